#include "carnot/kernels.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "carnot/errors.hpp"

namespace carnot {

Eigen::MatrixXd inverse_sqrt_spd(const Eigen::MatrixXd& A) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0)
        throw DomainError("coefficient matrix is not symmetric positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

KernelEstimate heat_kernel(const CarnotGroup& g, const Point& x, double t) {
    KernelEstimate k;
    if (t <= 0.0) return k;
    if (g.is_euclidean()) {
        const int n = g.dim();
        k.value = std::pow(4.0 * std::numbers::pi * t, -0.5 * n) * std::exp(-x.squaredNorm() / (4.0 * t));
        return k;
    }
    if (g.name() == "heisenberg1" && g.dim() == 3) return heisenberg_table().eval(x, t);
    throw DomainError("no heat-kernel oracle for group '" + g.name() + "'");
}

Point frozen_transform(const CarnotGroup& g, const Eigen::MatrixXd& A, const Point& x) {
    const int m = g.m1();
    if (A.rows() != m || A.cols() != m) throw DomainError("coefficient matrix must be m1 x m1");
    Eigen::MatrixXd M = inverse_sqrt_spd(A);
    Point y(g.dim());
    y.head(m) = M * x.head(m);
    if (g.is_euclidean()) return y;
    if (g.step() != 2 || g.layers()[1] != m * (m - 1) / 2)
        throw DomainError("frozen kernels need a Euclidean or free step-two group");
    // Induced action on the second layer: the 2x2 minors of M.
    int p = 0;
    for (int k = 0; k < m; ++k)
        for (int l = k + 1; l < m; ++l, ++p) {
            double s = 0.0;
            int q = 0;
            for (int i = 0; i < m; ++i)
                for (int j = i + 1; j < m; ++j, ++q) s += (M(k, i) * M(l, j) - M(k, j) * M(l, i)) * x[m + q];
            y[m + p] = s;
        }
    return y;
}

double frozen_jacobian(const CarnotGroup& g, const Eigen::MatrixXd& A) {
    const int m = g.m1();
    Eigen::MatrixXd M = inverse_sqrt_spd(A);
    double dm = M.determinant();
    if (g.is_euclidean()) return std::abs(dm);
    // det of the induced map on the second layer is det(M)^{m-1}
    return std::abs(dm * std::pow(dm, m - 1));
}

KernelEstimate frozen_kernel(const CarnotGroup& g, const Eigen::MatrixXd& A, const Point& x, double t) {
    KernelEstimate k = heat_kernel(g, frozen_transform(g, A, x), t);
    double j = frozen_jacobian(g, A);
    k.value *= j;
    k.quad_error *= j;
    return k;
}

GaussianBoundFit fit_gaussian_sandwich(const std::vector<KernelSample>& samples, int Q) {
    GaussianBoundFit f;
    if (samples.size() < 2) return f;
    // log(value t^{Q/2}) against d^2/t
    std::vector<double> xs, ys;
    for (const auto& s : samples) {
        if (!(s.t > 0.0)) continue;
        if (!(s.value > 0.0)) return f;
        xs.push_back(s.d * s.d / s.t);
        ys.push_back(std::log(s.value) + 0.5 * Q * std::log(s.t));
    }
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) sxx += (xs[i] - mx) * (xs[i] - mx), sxy += (xs[i] - mx) * (ys[i] - my);
    if (sxx <= 0.0) return f;
    // Both forms share the least-squares decay rate; the constants are the extreme intercepts.
    double slope = -sxy / sxx;
    if (!(slope > 0.0)) return f;
    double cu = slope, cl = slope;
    double lu = -std::numeric_limits<double>::infinity(), ll = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        lu = std::max(lu, ys[i] + cu * xs[i]);
        ll = std::min(ll, ys[i] + cl * xs[i]);
    }
    f.c_upper = cu;
    f.c_lower = cl;
    f.C_upper = std::exp(lu) * (1.0 + 1e-12);
    f.C_lower = std::exp(ll) * (1.0 - 1e-12);
    f.residual = -std::numeric_limits<double>::infinity();
    for (const auto& s : samples) {
        if (!(s.t > 0.0)) continue;
        double up = upper_bound(f, Q, s.d, s.t), lo = lower_bound(f, Q, s.d, s.t);
        f.residual = std::max(f.residual, std::max(s.value - up, lo - s.value) / std::max(s.value, 1e-300));
    }
    f.feasible = f.residual <= 0.0 && f.C_upper > 0.0 && f.C_lower > 0.0;
    return f;
}

double upper_bound(const GaussianBoundFit& f, int Q, double d, double t) {
    return f.C_upper * std::pow(t, -0.5 * Q) * std::exp(-f.c_upper * d * d / t);
}

double lower_bound(const GaussianBoundFit& f, int Q, double d, double t) {
    return f.C_lower * std::pow(t, -0.5 * Q) * std::exp(-f.c_lower * d * d / t);
}

}  // namespace carnot
