#include "carnot/polynomial.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace carnot {

namespace {
constexpr double kDropTol = 1e-15;
}

Polynomial Polynomial::constant(int nvars, double c) {
    Polynomial p(nvars);
    p.add_term(Exponents(nvars, 0), c);
    return p;
}

Polynomial Polynomial::variable(int nvars, int i, double coef) {
    Polynomial p(nvars);
    Exponents e(nvars, 0);
    e.at(i) = 1;
    p.add_term(e, coef);
    return p;
}

void Polynomial::add_term(const Exponents& e, double c) {
    if (static_cast<int>(e.size()) != nvars_)
        throw std::invalid_argument("monomial arity does not match polynomial");
    for (int k : e)
        if (k < 0) throw std::invalid_argument("negative exponent");
    double v = (terms_[e] += c);
    if (std::abs(v) < kDropTol) terms_.erase(e);
}

double Polynomial::eval(const double* x) const {
    double s = 0.0;
    for (const auto& [e, c] : terms_) {
        double m = c;
        for (int i = 0; i < nvars_; ++i)
            for (int k = 0; k < e[i]; ++k) m *= x[i];
        s += m;
    }
    return s;
}

Polynomial Polynomial::derivative(int var) const {
    Polynomial d(nvars_);
    for (const auto& [e, c] : terms_) {
        if (e[var] == 0) continue;
        Exponents f = e;
        f[var] -= 1;
        d.add_term(f, c * e[var]);
    }
    return d;
}

int Polynomial::homogeneous_degree(const std::vector<int>& w) const {
    if (terms_.empty()) return -1;
    int deg = -1;
    for (const auto& [e, c] : terms_) {
        int d = 0;
        for (int i = 0; i < nvars_; ++i) d += e[i] * w[i];
        if (deg < 0) deg = d;
        else if (deg != d) return -2;
    }
    return deg;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    Polynomial r = *this;
    if (r.nvars_ == 0) r.nvars_ = o.nvars_;
    for (const auto& [e, c] : o.terms_) r.add_term(e, c);
    return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + o.scaled(-1.0); }

Polynomial Polynomial::operator*(const Polynomial& o) const {
    Polynomial r(std::max(nvars_, o.nvars_));
    for (const auto& [e1, c1] : terms_)
        for (const auto& [e2, c2] : o.terms_) {
            Exponents e(r.nvars_, 0);
            for (int i = 0; i < r.nvars_; ++i) e[i] = e1[i] + e2[i];
            r.add_term(e, c1 * c2);
        }
    return r;
}

Polynomial Polynomial::scaled(double s) const {
    Polynomial r(nvars_);
    if (s == 0.0) return r;
    for (const auto& [e, c] : terms_) r.terms_[e] = c * s;
    return r;
}

std::string Polynomial::to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [e, c] : terms_) {
        if (!first) os << " + ";
        first = false;
        os << c;
        for (int i = 0; i < nvars_; ++i)
            if (e[i] > 0) os << "*x" << i << (e[i] > 1 ? "^" + std::to_string(e[i]) : "");
    }
    return os.str();
}

CompiledPolynomial::CompiledPolynomial(const Polynomial& p) : nvars_(p.nvars()) {
    for (const auto& [e, c] : p.terms()) {
        coef_.push_back(c);
        for (int k : e) {
            exps_.push_back(k);
            max_deg_ = std::max(max_deg_, k);
        }
    }
}

double CompiledPolynomial::eval(const double* x) const {
    double s = 0.0;
    const int* e = exps_.data();
    for (double c : coef_) {
        double m = c;
        for (int i = 0; i < nvars_; ++i, ++e)
            for (int k = 0; k < *e; ++k) m *= x[i];
        s += m;
    }
    return s;
}

}  // namespace carnot
