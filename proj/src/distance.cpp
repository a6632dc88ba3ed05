#include "carnot/distance.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "carnot/errors.hpp"

namespace carnot {

CostNorm cost_norm_from_string(const std::string& s) {
    if (s == "1") return CostNorm::L1;
    if (s == "2") return CostNorm::L2;
    if (s == "inf" || s == "sup" || s == "oo") return CostNorm::Sup;
    throw DomainError("cost exponent must be 1, 2 or inf, got '" + s + "'");
}

double ControlTrajectory::cost(CostNorm p) const {
    switch (p) {
        case CostNorm::L1: return cost_p1;
        case CostNorm::L2: return cost_p2;
        case CostNorm::Sup: return cost_sup;
    }
    return cost_p2;
}

void fill_costs(ControlTrajectory& tr) {
    const int k = static_cast<int>(tr.controls.rows());
    double s1 = 0.0, s2 = 0.0, sup = 0.0;
    for (int i = 0; i < k; ++i) {
        double n = tr.controls.row(i).norm();
        s1 += n;
        s2 += n * n;
        sup = std::max(sup, n);
    }
    tr.cost_p1 = k ? s1 / k : 0.0;
    tr.cost_p2 = k ? std::sqrt(s2 / k) : 0.0;
    tr.cost_sup = sup;
}

namespace {

// RK4 on x' = sum_i alpha_i X_i(x), in place.
void rk4_flow(const CarnotGroup& g, double* x, const double* alpha, double duration, int steps) {
    const int n = g.dim();
    double k1[32], k2[32], k3[32], k4[32], tmp[32];
    if (n > 32) throw DomainError("flow integrator supports N <= 32");
    const double h = duration / steps;
    for (int s = 0; s < steps; ++s) {
        g.horizontal_into(alpha, x, k1);
        for (int j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
        g.horizontal_into(alpha, tmp, k2);
        for (int j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
        g.horizontal_into(alpha, tmp, k3);
        for (int j = 0; j < n; ++j) tmp[j] = x[j] + h * k3[j];
        g.horizontal_into(alpha, tmp, k4);
        for (int j = 0; j < n; ++j) x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
}

struct Problem {
    const CarnotGroup& g;
    Point x0, target;
    int K, m1, n, sub;

    int params() const { return K * m1; }

    Point endpoint(const std::vector<double>& a) const {
        Point x = x0;
        for (int k = 0; k < K; ++k) rk4_flow(g, x.data(), &a[k * m1], 1.0 / K, sub);
        return x;
    }

    // Endpoint and Jacobian: per-segment sensitivities [d/dx | d/dalpha] from the variational
    // equations, chained backwards.
    Point jacobian(const std::vector<double>& a, Eigen::MatrixXd& J) const {
        const int w = n + m1;
        std::vector<double> sens(static_cast<std::size_t>(K) * n * w);
        Point x = x0;
        for (int k = 0; k < K; ++k) segment_sensitivity(x.data(), &a[k * m1], &sens[static_cast<std::size_t>(k) * n * w]);
        J.resize(n, params());
        Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
        for (int k = K - 1; k >= 0; --k) {
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(
                &sens[static_cast<std::size_t>(k) * n * w], n, w);
            J.middleCols(k * m1, m1).noalias() = P * M.rightCols(m1);
            P = P * M.leftCols(n);
        }
        return x;
    }

    // Advances x over one segment; M (n x (n+m1), row-major) receives the segment sensitivity.
    void segment_sensitivity(double* x, const double* alpha, double* M) const {
        const int w = n + m1;
        const double h = 1.0 / (K * sub);
        std::vector<double> buf(static_cast<std::size_t>(12) * n * w + 16 * n + n * n + n * m1);
        double* km[4];
        for (int i = 0; i < 4; ++i) km[i] = &buf[static_cast<std::size_t>(i) * n * w];
        double* Mt = &buf[static_cast<std::size_t>(4) * n * w];
        double* kx = Mt + n * w;  // 4 * n
        double* xt = kx + 4 * n;
        double* A = xt + n;
        double* F = A + n * n;
        for (int i = 0; i < n * w; ++i) M[i] = 0.0;
        for (int i = 0; i < n; ++i) M[i * w + i] = 1.0;
        auto deriv = [&](const double* xs, const double* Ms, double* dx, double* dM) {
            g.horizontal_into(alpha, xs, dx);
            g.horizontal_jacobian_into(alpha, xs, A);
            for (int j = 0; j < n; ++j)
                for (int c = 0; c < w; ++c) {
                    double s = 0.0;
                    for (int l = 0; l < n; ++l) s += A[j * n + l] * Ms[l * w + c];
                    dM[j * w + c] = s;
                }
            for (int i = 0; i < m1; ++i) {
                double e[32] = {0};
                e[i] = 1.0;
                g.horizontal_into(e, xs, F);
                for (int j = 0; j < n; ++j) dM[j * w + n + i] += F[j];
            }
        };
        const double cs[4] = {0.0, 0.5, 0.5, 1.0};
        for (int st = 0; st < sub; ++st) {
            for (int s = 0; s < 4; ++s) {
                const double c = cs[s] * h;
                for (int j = 0; j < n; ++j) xt[j] = x[j] + (s ? c * kx[(s - 1) * n + j] : 0.0);
                for (int i = 0; i < n * w; ++i) Mt[i] = M[i] + (s ? c * km[s - 1][i] : 0.0);
                deriv(xt, Mt, &kx[s * n], km[s]);
            }
            for (int j = 0; j < n; ++j)
                x[j] += h / 6.0 * (kx[j] + 2.0 * kx[n + j] + 2.0 * kx[2 * n + j] + kx[3 * n + j]);
            for (int i = 0; i < n * w; ++i) M[i] += h / 6.0 * (km[0][i] + 2.0 * km[1][i] + 2.0 * km[2][i] + km[3][i]);
        }
    }
};

double energy(const std::vector<double>& a, int K) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s / K);
}

struct RestartOutcome {
    std::vector<double> a;
    double value = std::numeric_limits<double>::infinity();
    double residual = std::numeric_limits<double>::infinity();
    double gap = std::numeric_limits<double>::infinity();
    bool converged = false;
};

RestartOutcome optimize(const Problem& pr, std::vector<double> a, const DistanceConfig& cfg, double scale,
                        double incumbent) {
    const int P = pr.params();
    const double res_tol = 1e-11 * std::max(1.0, scale);
    Eigen::MatrixXd J;
    RestartOutcome out;
    double last_change = std::numeric_limits<double>::infinity();
    for (int it = 0; it < cfg.max_iter; ++it) {
        Point F = pr.jacobian(a, J);
        Eigen::VectorXd r = F - pr.target;
        Eigen::Map<Eigen::VectorXd> av(a.data(), P);
        Eigen::MatrixXd JJt = J * J.transpose();
        JJt.diagonal().array() += 1e-14 * std::max(1.0, JJt.trace());
        Eigen::LDLT<Eigen::MatrixXd> ldlt(JJt);
        // Minimum-norm step onto the linearised constraint: projected descent on the energy plus restoration.
        Eigen::VectorXd lam = ldlt.solve(J * av - r);
        Eigen::VectorXd d = -av + J.transpose() * lam;
        const double e0 = energy(a, pr.K);
        const double mu = 10.0 * (1.0 + lam.norm());
        const double merit0 = e0 + mu * r.norm();
        double step = 1.0;
        std::vector<double> trial(P);
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            for (int i = 0; i < P; ++i) trial[i] = a[i] + step * d[i];
            double rt = (pr.endpoint(trial) - pr.target).norm();
            double m = energy(trial, pr.K) + mu * rt;
            if (m <= merit0 - 1e-4 * step * std::abs(merit0 - e0) || m < merit0) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        a = trial;
        const double e1 = energy(a, pr.K);
        last_change = std::abs(e1 - e0);
        double dn = step * d.norm() / std::sqrt(static_cast<double>(P));
        double rn = (pr.endpoint(a) - pr.target).norm();
        // Abandon a start that is clearly in a worse basin than the incumbent.
        if (it >= 6 && rn < 1e-6 * std::max(1.0, scale) && e1 > 1.02 * incumbent) break;
        if (rn < 1e3 * res_tol && (dn < 1e-10 * std::max(1.0, scale) || last_change < 1e-2 * cfg.tol)) break;
    }
    // Restoration polish so the certificate hits the target.
    for (int it = 0; it < 5; ++it) {
        Point F = pr.jacobian(a, J);
        Eigen::VectorXd r = F - pr.target;
        if (r.norm() < res_tol) break;
        Eigen::MatrixXd JJt = J * J.transpose();
        JJt.diagonal().array() += 1e-14 * std::max(1.0, JJt.trace());
        Eigen::VectorXd d = -J.transpose() * JJt.ldlt().solve(r);
        for (int i = 0; i < P; ++i) a[i] += d[i];
    }
    out.residual = (pr.endpoint(a) - pr.target).norm();
    out.value = energy(a, pr.K);
    out.gap = last_change + out.residual;
    out.converged = out.residual < 1e-8 * std::max(1.0, scale) && last_change < cfg.tol * 1e-2 + 1e-15;
    out.a = std::move(a);
    return out;
}

}  // namespace

Point flow_constant_control(const CarnotGroup& g, const Point& x, const double* alpha, double duration, int steps) {
    Point y = x;
    rk4_flow(g, y.data(), alpha, duration, steps);
    return y;
}

Eigen::MatrixXd integrate_controls(const CarnotGroup& g, const Point& x, const Eigen::MatrixXd& controls,
                                   int substeps) {
    const int K = static_cast<int>(controls.rows());
    Eigen::MatrixXd path(K + 1, g.dim());
    Point p = x;
    path.row(0) = p.transpose();
    std::vector<double> a(g.m1());
    for (int k = 0; k < K; ++k) {
        for (int i = 0; i < g.m1(); ++i) a[i] = controls(k, i);
        rk4_flow(g, p.data(), a.data(), 1.0 / K, substeps);
        path.row(k + 1) = p.transpose();
    }
    return path;
}

Point trajectory_point(const CarnotGroup& g, const Point& x, const Eigen::MatrixXd& controls, double tau,
                       int substeps) {
    const int K = static_cast<int>(controls.rows());
    tau = std::clamp(tau, 0.0, 1.0);
    Point p = x;
    std::vector<double> a(g.m1());
    for (int k = 0; k < K; ++k) {
        double t0 = static_cast<double>(k) / K;
        if (tau <= t0) break;
        double dur = std::min(tau - t0, 1.0 / K);
        for (int i = 0; i < g.m1(); ++i) a[i] = controls(k, i);
        int steps = std::max(1, static_cast<int>(std::ceil(substeps * dur * K)));
        rk4_flow(g, p.data(), a.data(), dur, steps);
    }
    return p;
}

DistanceResult cc_distance(const CarnotGroup& g, const Point& x, const Point& y, const DistanceConfig& cfg) {
    if (x.size() != g.dim() || y.size() != g.dim()) throw DomainError("point dimension does not match group");
    if (!x.allFinite() || !y.allFinite()) throw DomainError("non-finite point");
    if (cfg.segments < 1 || cfg.restarts < 1 || cfg.substeps < 1) throw DomainError("invalid distance configuration");
    const int K = cfg.segments, m1 = g.m1(), n = g.dim();
    Problem pr{g, x, y, K, m1, n, cfg.substeps};

    DistanceResult res;
    res.seed = cfg.seed;
    if ((x - y).norm() == 0.0) {
        res.trajectory.controls = Eigen::MatrixXd::Zero(K, m1);
        res.trajectory.path = integrate_controls(g, x, res.trajectory.controls, cfg.substeps);
        fill_costs(res.trajectory);
        res.converged = true;
        return res;
    }

    Point w = g.compose(g.inverse(x), y);
    Eigen::VectorXd wh = w.head(m1);
    // Loop seed for the second layer: a circle in the plane of the dominant bracket direction.
    double loop_speed = 0.0;
    int pa = 0, pb = 1;
    double orient = 1.0;
    if (g.step() >= 2 && m1 >= 2) {
        int best = -1;
        double bv = 0.0;
        for (int j = m1; j < m1 + g.layers()[1]; ++j)
            if (std::abs(w[j]) > bv) {
                bv = std::abs(w[j]);
                best = j;
            }
        if (best >= 0) {
            Point e0 = Point::Zero(n);
            int p = 0;
            for (int k = 0; k < m1; ++k)
                for (int l = k + 1; l < m1; ++l, ++p)
                    if (m1 + p == best) {
                        pa = k;
                        pb = l;
                    }
            loop_speed = std::sqrt(4.0 * std::numbers::pi * bv);
            orient = w[best] >= 0.0 ? 1.0 : -1.0;
        }
    }
    const double scale = wh.norm() + loop_speed + 1e-300;

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 2.0 * std::numbers::pi);

    RestartOutcome best;
    for (int r = 0; r < cfg.restarts; ++r) {
        std::vector<double> a(K * m1, 0.0);
        double phase = r == 0 ? 0.0 : ud(rng);
        double loop = loop_speed * (r == 0 ? 1.0 : std::exp(0.3 * nd(rng)));
        for (int k = 0; k < K; ++k) {
            double th = 2.0 * std::numbers::pi * (k + 0.5) / K + phase;
            for (int i = 0; i < m1; ++i) a[k * m1 + i] = wh[i];
            if (loop > 0.0) {
                a[k * m1 + pa] += -loop * std::sin(th);
                a[k * m1 + pb] += orient * loop * std::cos(th);
            }
            if (r > 0)
                for (int i = 0; i < m1; ++i) a[k * m1 + i] += 0.25 * scale * nd(rng);
        }
        RestartOutcome o = optimize(pr, std::move(a), cfg, scale, best.value);
        bool better = false;
        if (o.residual < 1e-6 * std::max(1.0, scale)) {
            if (best.residual >= 1e-6 * std::max(1.0, scale) || o.value < best.value) better = true;
        } else if (o.residual < best.residual && best.residual >= 1e-6 * std::max(1.0, scale)) {
            better = true;
        }
        if (better) best = std::move(o);
    }
    if (!std::isfinite(best.value)) throw NumericalError("distance optimiser produced no finite candidate");

    res.trajectory.controls.resize(K, m1);
    for (int k = 0; k < K; ++k)
        for (int i = 0; i < m1; ++i) res.trajectory.controls(k, i) = best.a[k * m1 + i];
    res.trajectory.path = integrate_controls(g, x, res.trajectory.controls, cfg.substeps);
    fill_costs(res.trajectory);
    res.value = res.trajectory.cost(cfg.p);
    res.endpoint_residual = best.residual;
    res.gap_estimate = best.gap;
    res.converged = best.converged;
    return res;
}

DistanceResult parabolic_distance(const CarnotGroup& g, const Point& x, double t, const Point& y, double tau,
                                  const DistanceConfig& cfg) {
    if (!std::isfinite(t) || !std::isfinite(tau)) throw DomainError("times must be finite");
    DistanceResult r = cc_distance(g, x, y, cfg);
    r.value += std::sqrt(std::abs(t - tau));
    return r;
}

EquivalenceConstants equivalence_constants(const CarnotGroup& g, int samples, std::uint64_t seed,
                                           const DistanceConfig& cfg) {
    if (samples < 1) throw DomainError("need at least one sample");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto draw = [&] {
        Point p(g.dim());
        for (int j = 0; j < g.dim(); ++j) p[j] = u(rng);
        return p;
    };
    EquivalenceConstants ec;
    ec.c_low = std::numeric_limits<double>::infinity();
    ec.c_high = 0.0;
    const Point zero = Point::Zero(g.dim());
    DistanceConfig c = cfg;
    for (int s = 0; s < samples; ++s) {
        Point w = draw();
        double gw = g.gauge(w);
        if (gw < 1e-6) continue;
        c.seed = cfg.seed + s;
        double d = cc_distance(g, zero, w, c).value;
        ec.c_low = std::min(ec.c_low, d / gw);
        ec.c_high = std::max(ec.c_high, d / gw);
    }
    ec.k1_fit = 1.0;
    for (int s = 0; s < samples; ++s) {
        Point a = draw(), b = draw(), e = draw();
        c.seed = cfg.seed + 7919 * (s + 1);
        double dae = cc_distance(g, a, e, c).value;
        double dab = cc_distance(g, a, b, c).value;
        double dbe = cc_distance(g, b, e, c).value;
        if (dab + dbe > 0.0) ec.k1_fit = std::max(ec.k1_fit, dae / (dab + dbe));
    }
    return ec;
}

}  // namespace carnot
