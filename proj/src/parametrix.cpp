#include "carnot/parametrix.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "carnot/errors.hpp"
#include "carnot/special.hpp"

namespace carnot {

namespace {

constexpr int kMax = 3;

struct Pt {
    double x[kMax] = {0.0, 0.0, 0.0};
    double t = 0.0;
};

Pt to_pt(const SpaceTimePoint& z, int n) {
    if (z.x.size() != n) throw DomainError("point dimension does not match the operator's group");
    Pt p;
    for (int k = 0; k < n; ++k) p.x[k] = z.x[k];
    p.t = z.t;
    return p;
}

struct Frozen {
    double a[kMax * kMax];
    double B[kMax * kMax];  // A^{-1}, Euclidean path
    double M[4];            // A^{-1/2}, Heisenberg path
    double detM = 1.0;
    double J = 1.0;
};

struct Node {
    Pt y;
    double w;
};

// Gauss-Hermite in the horizontal directions (weights carry the exp(z^2/2) factor, so they
// integrate plain functions of Gaussian decay), Gauss-Legendre in a sinh map vertically.
struct SpaceRule {
    std::vector<double> hz, hw, vz, vw;
    SpaceRule() = default;
    explicit SpaceRule(int nx) {
        const auto& gh = gauss_hermite_normal(nx);
        for (int i = 0; i < nx; ++i) {
            hz.push_back(gh.nodes[i]);
            hw.push_back(gh.weights[i] * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * gh.nodes[i] * gh.nodes[i]));
        }
        const auto& gv = gauss_legendre(nx);
        vz = gv.nodes;
        vw = gv.weights;
    }
};

// Nodes for int dy F(zeta o e; y) H(y; zeta) when the two factors are kernels at times t - s and
// s - tau, th = (s - tau) / (t - tau), v = (t - s)(s - tau) / (t - tau). With e = 0 and th = 1
// this covers int dy F(x; y) for a single kernel of time v centred at x.
template <class Fn>
void bridge_nodes(const CarnotGroup& g, const double* base, const double* e, double th, double v, double lambda,
                  const SpaceRule& R, Fn&& fn) {
    const int n = g.dim(), nx = static_cast<int>(R.hz.size());
    const double sh = std::sqrt(2.0 * lambda * v);
    double w[kMax], y[kMax];
    if (g.is_euclidean()) {
        int idx[kMax] = {0, 0, 0};
        const int total = static_cast<int>(std::pow(nx, n));
        for (int q = 0; q < total; ++q) {
            int r = q;
            double wt = 1.0;
            for (int k = 0; k < n; ++k) {
                idx[k] = r % nx;
                r /= nx;
                w[k] = th * e[k] + sh * R.hz[idx[k]];
                wt *= sh * R.hw[idx[k]];
            }
            g.compose_into(base, w, y);
            fn(y, wt);
        }
        return;
    }
    // The vertical profile is sharply peaked at the bridge centre with exponential tails.
    const double eh = std::hypot(e[0], e[1]);
    const double a = 0.5 * lambda * v;
    const double reach = 20.0 * lambda * v + 3.0 * eh * sh + th * (1.0 - th) * std::abs(e[2]);
    const double P = std::asinh(reach / a);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < nx; ++j) {
            w[0] = th * e[0] + sh * R.hz[i];
            w[1] = th * e[1] + sh * R.hz[j];
            const double c3 = th * (e[2] - 0.5 * (w[0] * e[1] - w[1] * e[0]));
            const double wh = sh * R.hw[i] * sh * R.hw[j];
            for (int k = 0; k < nx; ++k) {
                const double psi = P * R.vz[k];
                w[2] = c3 + a * std::sinh(psi);
                g.compose_into(base, w, y);
                fn(y, wh * P * R.vw[k] * a * std::cosh(psi));
            }
        }
}

class Engine {
public:
    Engine(const OperatorSpec& op, int nt, int nx) : op_(op), g_(op.group), n_(g_.dim()), m_(g_.m1()) {
        if (n_ > kMax) throw DomainError("parametrix iteration is limited to N <= 3");
        euclid_ = g_.is_euclidean();
        if (!euclid_) {
            if (n_ != 3 || m_ != 2 || g_.step() != 2) throw DomainError("parametrix needs a Euclidean group or H^1");
            table_ = &heisenberg_table();
        }
        // Nested levels carry terms that are already small, so they get fewer time nodes.
        rules_[0] = make_rule(nt, nx);
        rules_[1] = make_rule(std::max(4, 2 * nt / 3), nx);
    }

    Frozen freeze(const Pt& y) const {
        Frozen f;
        op_.A(y.x, y.t, f.a);
        if (euclid_) {
            double det;
            if (m_ == 1) {
                det = f.a[0];
                f.B[0] = 1.0 / det;
            } else {
                Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> A(f.a, m_, m_);
                Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, kMax, kMax> inv = A.inverse();
                det = A.determinant();
                for (int k = 0; k < m_ * m_; ++k) f.B[k] = inv.data()[k];
            }
            if (!(det > 0.0)) throw NumericalError("frozen coefficient matrix is not positive definite");
            f.J = 1.0 / std::sqrt(det);
        } else {
            // sqrt(A) = (A + s I) / sqrt(tr A + 2 s), s = sqrt(det A), for 2 x 2 SPD A
            double det = f.a[0] * f.a[3] - f.a[1] * f.a[2];
            if (!(det > 0.0)) throw NumericalError("frozen coefficient matrix is not positive definite");
            double s = std::sqrt(det), r = std::sqrt(f.a[0] + f.a[3] + 2.0 * s);
            double R[4] = {(f.a[0] + s) / r, f.a[1] / r, f.a[2] / r, (f.a[3] + s) / r};
            double dr = R[0] * R[3] - R[1] * R[2];
            f.M[0] = R[3] / dr;
            f.M[1] = -R[1] / dr;
            f.M[2] = -R[2] / dr;
            f.M[3] = R[0] / dr;
            f.detM = 1.0 / dr;
            f.J = f.detM * f.detM;
        }
        return f;
    }

    // Gamma_A(e, tau) for the frozen matrix, e = y^{-1} x
    double kernel(const Frozen& f, const double* e, double tau) const {
        if (euclid_) {
            double q = 0.0;
            for (int i = 0; i < m_; ++i)
                for (int j = 0; j < m_; ++j) q += e[i] * f.B[i * m_ + j] * e[j];
            return f.J * std::pow(4.0 * std::numbers::pi * tau, -0.5 * n_) * std::exp(-q / (4.0 * tau));
        }
        double w0 = f.M[0] * e[0] + f.M[1] * e[1], w1 = f.M[2] * e[0] + f.M[3] * e[1];
        double w2 = f.detM * e[2];
        const double lam = table_->config().T / tau;
        return f.J * lam * lam * table_->profile(std::hypot(w0, w1) * std::sqrt(lam), std::abs(w2) * lam);
    }

    double kernel_error(const Frozen& f, double tau) const {
        if (euclid_) return 0.0;
        const double lam = table_->config().T / tau;
        return f.J * lam * lam * table_->error_bound();
    }

    void rel(const Pt& z, const Pt& y, double* e) const {
        double my[kMax];
        for (int k = 0; k < n_; ++k) my[k] = -y.x[k];
        g_.compose_into(my, z.x, e);
    }

    double Z(const Pt& z, const Pt& y) const {
        double tau = z.t - y.t;
        if (tau <= 0.0) return 0.0;
        double e[kMax];
        rel(z, y, e);
        return kernel(freeze(y), e, tau);
    }

    double Z_error(const Pt& z, const Pt& y) const {
        double tau = z.t - y.t;
        if (tau <= 0.0 || euclid_) return 0.0;
        return kernel_error(freeze(y), tau);
    }

    double HZ(const Pt& z, const Pt& y) const {
        const double tau = z.t - y.t;
        if (tau <= 0.0) return 0.0;
        Frozen f = freeze(y);
        double a[kMax * kMax], b[kMax] = {0.0, 0.0, 0.0};
        double c = op_.c ? op_.c(z.x, z.t) : 0.0;
        bool second = false;
        if (!op_.constant_A) {
            op_.A(z.x, z.t, a);
            for (int k = 0; k < m_ * m_; ++k) {
                a[k] -= f.a[k];
                if (a[k] != 0.0) second = true;
            }
        }
        bool first = false;
        if (op_.b) {
            op_.b(z.x, z.t, b);
            for (int k = 0; k < m_; ++k) first = first || b[k] != 0.0;
        }
        if (!second && !first && c == 0.0) return 0.0;
        double e[kMax];
        rel(z, y, e);
        if (euclid_) {
            double f0 = kernel(f, e, tau);
            double Be[kMax];
            for (int i = 0; i < m_; ++i) {
                Be[i] = 0.0;
                for (int j = 0; j < m_; ++j) Be[i] += f.B[i * m_ + j] * e[j];
            }
            double r = c;
            for (int i = 0; i < m_; ++i) {
                r -= b[i] * Be[i] / (2.0 * tau);
                if (second)
                    for (int j = 0; j < m_; ++j)
                        r += a[i * m_ + j] * (Be[i] * Be[j] / (4.0 * tau * tau) - f.B[i * m_ + j] / (2.0 * tau));
            }
            return r * f0;
        }
        // Heisenberg: differences along the flows e -> e o (h e_i)
        const double h = 0.02 * std::sqrt(tau);
        auto at = [&](double u1, double u2, double u3) {
            double v[3] = {u1, u2, u3}, w[3];
            g_.compose_into(e, v, w);
            return kernel(f, w, tau);
        };
        double f0 = at(0, 0, 0);
        double r = c * f0;
        if (!first && !second) return r;
        double p1 = at(h, 0, 0), m1 = at(-h, 0, 0), p2 = at(0, h, 0), m2 = at(0, -h, 0);
        r += b[0] * (p1 - m1) / (2.0 * h) + b[1] * (p2 - m2) / (2.0 * h);
        if (second) {
            r += a[0] * (p1 - 2.0 * f0 + m1) / (h * h) + a[3] * (p2 - 2.0 * f0 + m2) / (h * h);
            double off = a[1] + a[2];
            if (off != 0.0) {
                // (X1 X2 + X2 X1) / 2 from e o (a e1) o (b e2) = e o (a, b, ab/2) and the swapped order
                double s = 0.0;
                for (int sa : {-1, 1})
                    for (int sb : {-1, 1}) {
                        double q = sa * sb * h * h * 0.5;
                        s += sa * sb * (at(sa * h, sb * h, q) + at(sa * h, sb * h, -q));
                    }
                r += off * s / (8.0 * h * h);
            }
        }
        return r;
    }

    // Space-time nodes for int_tau^t ds int dy F(z; y, s) H(y, s; zeta).
    template <class Fn>
    void integrate(const Pt& z, const Pt& zeta, int depth, Fn&& fn) const {
        const Rule& R = rules_[depth == 0 ? 0 : 1];
        const double T = z.t - zeta.t;
        if (T <= 0.0) return;
        double e[kMax];
        rel(z, zeta, e);
        const double half = 0.5 * T;
        Node nd;
        for (int side = 0; side < 2; ++side)
            for (std::size_t it = 0; it < R.tu.size(); ++it) {
                double s = side == 0 ? zeta.t + half * R.tu[it] : z.t - half * R.tu[it];
                double ws = half * R.tw[it];
                double th = (s - zeta.t) / T, v = (z.t - s) * (s - zeta.t) / T;
                nd.y.t = s;
                bridge_nodes(g_, zeta.x, e, th, v, op_.lambda, R.space, [&](const double* y, double w) {
                    for (int k = 0; k < n_; ++k) nd.y.x[k] = y[k];
                    nd.w = ws * w;
                    fn(nd);
                });
            }
    }

    // out[k-1] = (H Z)_k(z; zeta), k = 1..K
    void series(const Pt& z, const Pt& zeta, int K, double* out, int depth = 0) const {
        out[0] = HZ(z, zeta);
        for (int k = 1; k < K; ++k) out[k] = 0.0;
        if (K == 1) return;
        std::vector<double> inner(K - 1);
        integrate(z, zeta, depth, [&](const Node& nd) {
            double f = HZ(z, nd.y);
            if (f == 0.0) return;
            series(nd.y, zeta, K - 1, inner.data(), depth + 1);
            for (int k = 1; k < K; ++k) out[k] += nd.w * f * inner[k - 1];
        });
    }

    // out[k-1] = (Z * (H Z)_k)(z; zeta)
    void jterms(const Pt& z, const Pt& zeta, int K, double* out) const {
        for (int k = 0; k < K; ++k) out[k] = 0.0;
        std::vector<double> inner(K);
        integrate(z, zeta, 0, [&](const Node& nd) {
            double f = Z(z, nd.y);
            if (f == 0.0) return;
            series(nd.y, zeta, K, inner.data(), 1);
            for (int k = 0; k < K; ++k) out[k] += nd.w * f * inner[k];
        });
    }

    // H Z vanishes identically: frozen and actual operators coincide.
    bool exact() const { return op_.constant_A && !op_.b && !op_.c; }

    const OperatorSpec& op() const { return op_; }
    int dim() const { return n_; }
    bool euclidean() const { return euclid_; }

private:
    const OperatorSpec& op_;
    const CarnotGroup& g_;
    int n_, m_;
    bool euclid_ = true;
    const HeisenbergKernelTable* table_ = nullptr;
    struct Rule {
        std::vector<double> tu, tw;  // time substitution nodes on (0, 1]
        SpaceRule space;
    };
    Rule rules_[2];

    Rule make_rule(int nt, int nx) const {
        Rule r;
        const double p = 2.0 / op_.alpha;
        const auto& gl = gauss_legendre(nt);
        for (int i = 0; i < nt; ++i) {
            double u = 0.5 * (gl.nodes[i] + 1.0);
            r.tu.push_back(std::pow(u, p));
            r.tw.push_back(0.5 * gl.weights[i] * p * std::pow(u, p - 1.0));
        }
        r.space = SpaceRule(nx);
        return r;
    }
};

void validate(const ParametrixConfig& cfg) {
    if (cfg.order < 1) throw DomainError("series order must be at least 1");
    if (cfg.time_nodes < 4 || cfg.space_nodes < 4) throw DomainError("quadrature needs at least 4 nodes per axis");
    if (!(cfg.horizon > 0.0)) throw DomainError("horizon must be positive");
}

int coarse(int n) { return std::max(3, n / 2); }

void tail_from_terms(const std::vector<double>& terms, double& tail, bool& diverging) {
    const int K = static_cast<int>(terms.size());
    diverging = false;
    if (K == 1) {
        tail = std::abs(terms[0]);
        return;
    }
    double last = std::abs(terms[K - 1]), prev = std::abs(terms[K - 2]);
    if (last == 0.0) {
        tail = 0.0;
        return;
    }
    double q = prev > 0.0 ? last / prev : std::numeric_limits<double>::infinity();
    if (q >= 1.0) {
        diverging = true;
        tail = std::numeric_limits<double>::infinity();
        return;
    }
    tail = last * q / (1.0 - q);
}

std::vector<std::pair<Point, double>> bridge_rule(const CarnotGroup& g, const Point& base, const Point& e, double th,
                                                  double v, double lambda, int nx) {
    std::vector<std::pair<Point, double>> out;
    const int n = g.dim();
    double eb[kMax] = {0.0, 0.0, 0.0};
    for (int k = 0; k < n; ++k) eb[k] = e[k];
    bridge_nodes(g, base.data(), eb, th, v, lambda, SpaceRule(nx), [&](const double* y, double w) {
        out.emplace_back(Eigen::Map<const Point>(y, n), w);
    });
    return out;
}

// Nodes for int F(xi) dxi weighted like a kernel of time dt centred at x.
std::vector<std::pair<Point, double>> spatial_rule(const OperatorSpec& op, const Point& x, double dt, int nx) {
    return bridge_rule(op.group, x, Point::Zero(x.size()), 1.0, dt, op.lambda, nx);
}

}  // namespace

KernelEstimate parametrix_Z(const OperatorSpec& op, const SpaceTimePoint& z, const SpaceTimePoint& zeta) {
    Engine eng(op, 4, 4);
    const int n = op.group.dim();
    KernelEstimate k;
    if (n > kMax) {
        if (z.t <= zeta.t) return k;
        Eigen::MatrixXd A = op.a_at(zeta.x, zeta.t);
        return frozen_kernel(op.group, A, op.group.compose(-zeta.x, z.x), z.t - zeta.t);
    }
    Pt a = to_pt(z, n), b = to_pt(zeta, n);
    k.value = eng.Z(a, b);
    k.quad_error = eng.Z_error(a, b);
    return k;
}

double levi_residual(const OperatorSpec& op, const SpaceTimePoint& z, const SpaceTimePoint& zeta) {
    Engine eng(op, 4, 4);
    const int n = op.group.dim();
    return eng.HZ(to_pt(z, n), to_pt(zeta, n));
}

SeriesEval iterate_G(const OperatorSpec& op, const SpaceTimePoint& z, const SpaceTimePoint& zeta,
                     const ParametrixConfig& cfg) {
    validate(cfg);
    SeriesEval r;
    if (z.t <= zeta.t) {
        r.terms.assign(cfg.order, 0.0);
        return r;
    }
    if (z.t - zeta.t > cfg.horizon * (1.0 + 1e-12)) throw DomainError("t - tau exceeds the horizon");
    const int n = op.group.dim();
    Pt a = to_pt(z, n), b = to_pt(zeta, n);
    Engine eng(op, cfg.time_nodes, cfg.space_nodes);
    r.terms.assign(cfg.order, 0.0);
    if (eng.exact()) return r;
    eng.series(a, b, cfg.order, r.terms.data());
    for (double v : r.terms) r.value += v;
    if (cfg.estimate_error && cfg.order > 1) {
        Engine c(op, coarse(cfg.time_nodes), coarse(cfg.space_nodes));
        std::vector<double> t2(cfg.order);
        c.series(a, b, cfg.order, t2.data());
        double v2 = 0.0;
        for (double v : t2) v2 += v;
        r.quad_error = std::abs(r.value - v2);
    }
    tail_from_terms(r.terms, r.tail_bound, r.diverging);
    return r;
}

FundamentalSolutionEval fundamental_solution(const OperatorSpec& op, const SpaceTimePoint& z,
                                             const SpaceTimePoint& zeta, const ParametrixConfig& cfg) {
    validate(cfg);
    FundamentalSolutionEval r;
    r.j_terms.assign(cfg.order, 0.0);
    if (z.t <= zeta.t) return r;
    if (z.t - zeta.t > cfg.horizon * (1.0 + 1e-12)) throw DomainError("t - tau exceeds the horizon");
    const int n = op.group.dim();
    Pt a = to_pt(z, n), b = to_pt(zeta, n);
    Engine eng(op, cfg.time_nodes, cfg.space_nodes);
    r.z_value = eng.Z(a, b);
    r.quad_error = eng.Z_error(a, b);
    if (eng.exact()) {
        r.total = r.z_value;
        return r;
    }
    eng.jterms(a, b, cfg.order, r.j_terms.data());
    for (double v : r.j_terms) r.j_value += v;
    r.total = r.z_value + r.j_value;
    if (cfg.estimate_error) {
        Engine c(op, coarse(cfg.time_nodes), coarse(cfg.space_nodes));
        std::vector<double> t2(cfg.order);
        c.jterms(a, b, cfg.order, t2.data());
        double v2 = 0.0;
        for (double v : t2) v2 += v;
        r.quad_error += std::abs(r.j_value - v2);
    }
    tail_from_terms(r.j_terms, r.tail_bound, r.diverging);
    return r;
}

CauchyResult cauchy_solve(const OperatorSpec& op, const CauchyData& data, double T1, const SpaceTimePoint& z,
                          const ParametrixConfig& cfg) {
    validate(cfg);
    CauchyResult res;
    if (!data.g) throw DomainError("Cauchy problem needs an initial datum");
    const double dt = z.t - T1;
    if (!(dt > 0.0)) throw DomainError("Cauchy problem needs t > T1");
    const double cu = data.c_u > 0.0 ? data.c_u : 1.0 / (4.0 * op.lambda);
    auto gate = [&](double h) {
        if (h <= 0.0) return std::numeric_limits<double>::infinity();
        return std::min(cu / (2.0 * h * (2.0 * data.k1 * data.k1 - 1.0)), 3.0 * cu / h);
    };
    const double limit = std::min(gate(data.h1), gate(data.h2));
    if (dt >= limit) {
        res.refused = true;
        res.reason = "growth constants allow horizons below " + std::to_string(limit);
        return res;
    }
    auto term = [&](int nx, double& err) {
        double u = 0.0;
        for (const auto& [xi, w] : spatial_rule(op, z.x, dt, nx)) {
            double gv = data.g(xi);
            if (gv == 0.0) continue;
            auto G = fundamental_solution(op, z, {xi, T1}, cfg);
            u += w * G.total * gv;
            err += std::abs(w * gv) * (G.quad_error + G.tail_bound);
        }
        if (data.f) {
            const auto& gl = gauss_legendre(cfg.time_nodes);
            for (int i = 0; i < cfg.time_nodes; ++i) {
                double v = 0.5 * (gl.nodes[i] + 1.0);
                double s = z.t - dt * v * v, ws = dt * 2.0 * v * 0.5 * gl.weights[i];
                for (const auto& [xi, w] : spatial_rule(op, z.x, z.t - s, nx)) {
                    double fv = data.f(xi, s);
                    if (fv == 0.0) continue;
                    auto G = fundamental_solution(op, z, {xi, s}, cfg);
                    u -= ws * w * G.total * fv;
                    err += std::abs(ws * w * fv) * (G.quad_error + G.tail_bound);
                }
            }
        }
        return u;
    };
    double err = 0.0, dummy = 0.0;
    res.value = term(cfg.space_nodes, err);
    res.quad_error = err;
    if (cfg.estimate_error) res.quad_error += std::abs(res.value - term(std::max(4, cfg.space_nodes - 4), dummy));
    return res;
}

VerifyResult verify_reproduction(const OperatorSpec& op, const SpaceTimePoint& z, const SpaceTimePoint& zeta,
                                 double s, const ParametrixConfig& cfg) {
    if (!(zeta.t < s && s < z.t)) throw DomainError("reproduction needs tau < s < t");
    const CarnotGroup& g = op.group;
    VerifyResult r;
    auto G0 = fundamental_solution(op, z, zeta, cfg);
    r.lhs = G0.total;
    const double T = z.t - zeta.t, th = (s - zeta.t) / T, v = (z.t - s) * (s - zeta.t) / T;
    Point e = g.compose(-zeta.x, z.x);
    auto rhs = [&](int nx, double& err) {
        double sum = 0.0;
        for (const auto& [y, w] : bridge_rule(g, zeta.x, e, th, v, op.lambda, nx)) {
            auto a = fundamental_solution(op, z, {y, s}, cfg);
            auto b = fundamental_solution(op, {y, s}, zeta, cfg);
            sum += w * a.total * b.total;
            err += std::abs(w) * ((a.quad_error + a.tail_bound) * std::abs(b.total) +
                                  (b.quad_error + b.tail_bound) * std::abs(a.total));
        }
        return sum;
    };
    double err = 0.0, dummy = 0.0;
    r.rhs = rhs(cfg.space_nodes, err);
    r.error_bar = err + G0.quad_error + G0.tail_bound;
    if (cfg.estimate_error) r.error_bar += std::abs(r.rhs - rhs(std::max(4, cfg.space_nodes - 4), dummy));
    r.residual = std::abs(r.lhs - r.rhs);
    return r;
}

VerifyResult verify_adjoint_symmetry(const OperatorSpec& op, const SpaceTimePoint& z, const SpaceTimePoint& zeta,
                                     const ParametrixConfig& cfg) {
    OperatorSpec adj = adjoint_reversed(op);
    VerifyResult r;
    auto a = fundamental_solution(op, z, zeta, cfg);
    auto b = fundamental_solution(adj, {zeta.x, -zeta.t}, {z.x, -z.t}, cfg);
    r.lhs = a.total;
    r.rhs = b.total;
    r.residual = std::abs(r.lhs - r.rhs);
    r.error_bar = a.quad_error + a.tail_bound + b.quad_error + b.tail_bound;
    return r;
}

VerifyResult verify_normalization(const OperatorSpec& op, const SpaceTimePoint& z, double tau,
                                  const ParametrixConfig& cfg) {
    if (!op.constant_c) throw DomainError("normalization needs a constant zero-order coefficient");
    if (!(z.t > tau)) throw DomainError("normalization needs t > tau");
    VerifyResult r;
    const double dt = z.t - tau;
    r.rhs = std::exp(op.c_at(z.x, z.t) * dt);
    auto lhs = [&](int nx, double& err) {
        double sum = 0.0;
        for (const auto& [xi, w] :
             spatial_rule(op, z.x, dt, nx)) {
            auto G = fundamental_solution(op, z, {xi, tau}, cfg);
            sum += w * G.total;
            err += std::abs(w) * (G.quad_error + G.tail_bound);
        }
        return sum;
    };
    double err = 0.0, dummy = 0.0;
    r.lhs = lhs(cfg.space_nodes, err);
    r.error_bar = err;
    if (cfg.estimate_error) r.error_bar += std::abs(r.lhs - lhs(std::max(4, cfg.space_nodes - 4), dummy));
    r.residual = std::abs(r.lhs - r.rhs);
    return r;
}

}  // namespace carnot
