#include "carnot/special.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include <Eigen/Dense>

#include "carnot/errors.hpp"

namespace carnot {

namespace {

double gamma_series(double s, double x) {
    double term = 1.0 / s, sum = term;
    for (int n = 1; n < 1000; ++n) {
        term *= x / (s + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-17) break;
    }
    return sum * std::exp(-x + s * std::log(x));
}

// Upper incomplete gamma by modified Lentz on the Legendre continued fraction.
double gamma_cf_upper(double s, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - s;
    double c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 1000; ++i) {
        double an = -i * (i - s);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-17) break;
    }
    return std::exp(-x + s * std::log(x)) * h;
}

const int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace

double lower_incomplete_gamma(double s, double x) {
    if (!(s > 0.0)) throw DomainError("incomplete gamma needs s > 0");
    if (x < 0.0) throw DomainError("incomplete gamma needs x >= 0");
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return std::tgamma(s);
    if (x < s + 1.0) return gamma_series(s, x);
    return std::tgamma(s) - gamma_cf_upper(s, x);
}

double unit_ball_volume(int m) {
    return std::pow(std::numbers::pi, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

const QuadratureRule& gauss_legendre(int n) {
    static std::map<int, QuadratureRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    if (n < 1) throw DomainError("Gauss-Legendre needs at least one node");
    QuadratureRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it2 = 0; it2 < 100; ++it2) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-16) break;
        }
        r.nodes[i] = -z;
        r.nodes[n - 1 - i] = z;
        r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

QuadratureRule gauss_legendre(int n, double a, double b) {
    const auto& base = gauss_legendre(n);
    QuadratureRule r = base;
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = c + h * base.nodes[i];
        r.weights[i] = h * base.weights[i];
    }
    return r;
}

const QuadratureRule& gauss_hermite_normal(int n) {
    static std::map<int, QuadratureRule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    if (n < 1) throw DomainError("Gauss-Hermite needs at least one node");
    // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    QuadratureRule r;
    for (int i = 0; i < n; ++i) {
        r.nodes.push_back(es.eigenvalues()[i]);
        double v = es.eigenvectors()(0, i);
        r.weights.push_back(v * v);
    }
    return cache.emplace(n, std::move(r)).first->second;
}

double radical_inverse(std::uint64_t index, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (index > 0) {
        r += f * static_cast<double>(index % base);
        index /= base;
        f *= inv;
    }
    return r;
}

std::vector<double> halton_point(std::uint64_t index, int dim) {
    if (dim > 16) throw DomainError("Halton sequence supports at most 16 dimensions");
    std::vector<double> p(dim);
    for (int d = 0; d < dim; ++d) p[d] = radical_inverse(index + 1, kPrimes[d]);
    return p;
}

}  // namespace carnot
