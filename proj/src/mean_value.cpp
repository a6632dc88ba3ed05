#include "carnot/mean_value.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "carnot/errors.hpp"
#include "carnot/special.hpp"

namespace carnot {

namespace {

constexpr double kPi = std::numbers::pi;

double descent_factor(double s, int m) { return m == 0 ? 1.0 : std::pow(4.0 * kPi * s, -0.5 * m); }

// N_rho^m omega_m and W_rho for a member, m = 0 giving the limits 1 and 1/rho - Gamma.
void radial_terms(double gamma, double s, double rho, int m, double& nm_omega, double& W) {
    if (m == 0) {
        nm_omega = 1.0;
        W = 1.0 / rho - gamma;
        return;
    }
    const double gm = gamma * descent_factor(s, m);
    const double L = std::max(0.0, std::log(rho * gm));
    const double om = unit_ball_volume(m);
    const double Nm = std::pow(4.0 * s * L, 0.5 * m);
    nm_omega = om * Nm;
    W = m * om * (Nm / (rho * m) - gamma * std::pow(kPi, -0.5 * m) / 2.0 * lower_incomplete_gamma(0.5 * m, L));
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t k) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Decay rate of the upper bound chosen to minimise the box size C^{1/p} / c.
void tighten_upper(GaussianBoundFit& fit, const std::vector<KernelSample>& samples, int Q, double p) {
    double best = fit.C_upper > 0.0 ? std::pow(fit.C_upper, 1.0 / p) / fit.c_upper : INFINITY;
    for (int k = 1; k <= 400; ++k) {
        const double c = fit.c_upper * k / 200.0;
        double lc = -INFINITY;
        for (const auto& s : samples)
            if (s.t > 0.0) lc = std::max(lc, std::log(s.value) + 0.5 * Q * std::log(s.t) + c * s.d * s.d / s.t);
        const double C = std::exp(lc) * (1.0 + 1e-12);
        const double score = std::pow(C, 1.0 / p) / c;
        if (score < best) {
            best = score;
            fit.C_upper = C;
            fit.c_upper = c;
        }
    }
}

}  // namespace

KernelFn operator_kernel(const OperatorSpec& op, const ParametrixConfig& cfg) {
    if (op.constant_A && !op.b && op.constant_c) {
        const Eigen::MatrixXd A = op.a_at(Point::Zero(op.group.dim()), 0.0);
        const double c = op.c_at(Point::Zero(op.group.dim()), 0.0);
        const CarnotGroup g = op.group;
        return [g, A, c](const SpaceTimePoint& zeta, const SpaceTimePoint& z) {
            const double s = zeta.t - z.t;
            if (s <= 0.0) return KernelEstimate{};
            KernelEstimate k = frozen_kernel(g, A, g.compose(-z.x, zeta.x), s);
            const double e = std::exp(c * s);
            k.value *= e;
            k.quad_error *= e;
            return k;
        };
    }
    return [op, cfg](const SpaceTimePoint& zeta, const SpaceTimePoint& z) {
        KernelEstimate k;
        if (zeta.t <= z.t) return k;
        auto r = fundamental_solution(op, zeta, z, cfg);
        k.value = r.total;
        k.quad_error = r.quad_error + r.tail_bound;
        return k;
    };
}

double gradient_step(double s) { return std::max(1e-5, 1e-3 * std::sqrt(s)); }

double kernel_MG(const OperatorSpec& op, const KernelFn& kernel, const SpaceTimePoint& zeta, const SpaceTimePoint& z) {
    const double s = zeta.t - z.t;
    if (!(s > 0.0)) throw DomainError("M_G needs t < tau");
    const double g0 = kernel(zeta, z).value;
    if (!(g0 > 1e-300)) throw DomainError("M_G is undefined where the kernel vanishes");
    const int m = op.m1(), n = op.group.dim();
    const double h = gradient_step(s);
    Eigen::VectorXd grad(m);
    Point e = Point::Zero(n);
    for (int i = 0; i < m; ++i) {
        e[i] = h;
        double p = kernel(zeta, {op.group.compose(z.x, e), z.t}).value;
        e[i] = -h;
        double q = kernel(zeta, {op.group.compose(z.x, e), z.t}).value;
        e[i] = 0.0;
        grad[i] = (p - q) / (2.0 * h);
    }
    return grad.dot(op.a_at(z.x, z.t) * grad) / (g0 * g0);
}

DescentKernelBundle descent_from(double gamma, double MG, double s, double r, int m) {
    if (m < 0) throw DomainError("descent dimension must be nonnegative");
    if (!(s > 0.0) || !(r > 0.0)) throw DomainError("descent kernels need t < tau and r > 0");
    DescentKernelBundle b;
    b.m = m;
    b.omega_m = unit_ball_volume(m);
    b.gamma = gamma;
    b.gamma_m = gamma * descent_factor(s, m);
    b.MG = MG;
    const double L = std::log(r * b.gamma_m);
    if (!(L > -1e-12)) throw DomainError("point lies outside the super-level set");
    b.N = 2.0 * std::sqrt(s) * std::sqrt(std::max(L, 0.0));
    const double Nm = std::pow(b.N, m);
    b.M = b.omega_m * Nm * (MG + static_cast<double>(m) / (m + 2) * b.N * b.N / (4.0 * s * s));
    double nm_omega;
    radial_terms(gamma, s, r, m, nm_omega, b.W);
    b.W_negative = b.W < -1e-9;
    return b;
}

DescentKernelBundle descent_kernels(const OperatorSpec& op, const KernelFn& kernel, const SpaceTimePoint& zeta,
                                    const SpaceTimePoint& z, double r, int m) {
    const double s = zeta.t - z.t;
    if (!(s > 0.0)) throw DomainError("point lies outside the super-level set");
    const double g = kernel(zeta, z).value;
    if (!(r * g * descent_factor(s, m) >= 1.0 - 1e-12)) throw DomainError("point lies outside the super-level set");
    return descent_from(g, kernel_MG(op, kernel, zeta, z), s, r, m);
}

double heat1d_descent_M(double xi, double tau, double x, double t, double r, int m) {
    const double s = tau - t;
    if (!(s > 0.0)) return 0.0;
    const double L = std::log(r / std::pow(4.0 * kPi * s, 0.5 * (m + 1)));
    const double d2 = (xi - x) * (xi - x);
    const double a = s * L - d2 / 4.0;
    if (a <= 0.0) return 0.0;
    return std::pow(2.0, m) * m * unit_ball_volume(m) / ((m + 2) * s) * std::pow(a, 0.5 * m) * (L + d2 / (2.0 * m * s));
}

bool heat1d_in_set(double xi, double tau, double x, double t, double r, int m) {
    const double s = tau - t;
    if (!(s > 0.0)) return false;
    return (xi - x) * (xi - x) < 4.0 * s * std::log(r / std::pow(4.0 * kPi * s, 0.5 * (m + 1)));
}

double SuperLevelSet::radius(double s) const {
    if (!(s > 0.0) || s >= s_max) return 0.0;
    const double p = 0.5 * (group.homogeneous_dim() + m);
    const double A = r * C_u * std::pow(4.0 * kPi, -0.5 * m);
    return std::sqrt(std::max(0.0, s / c_u * std::log(A * std::pow(s, -p))));
}

Eigen::VectorXd SuperLevelSet::half_widths(double s) const {
    const double R = radius(s);
    Eigen::VectorXd h(group.dim());
    for (int j = 0; j < group.dim(); ++j) h[j] = std::pow(R, group.sigma()[j]);
    return h;
}

Eigen::VectorXd SuperLevelSet::box() const {
    const double p = 0.5 * (group.homogeneous_dim() + m);
    const double R = std::sqrt(p * s_max / std::numbers::e / c_u);
    Eigen::VectorXd h(group.dim());
    for (int j = 0; j < group.dim(); ++j) h[j] = std::pow(R, group.sigma()[j]);
    return h;
}

Membership SuperLevelSet::classify(const SpaceTimePoint& z) const {
    const double s = center.t - z.t;
    if (!(s > 0.0)) return Membership::Out;
    KernelEstimate k = kernel(center, z);
    const double f = descent_factor(s, m), thr = 1.0 / r;
    const double gm = k.value * f, em = k.quad_error * f;
    if (gm - em > thr) return Membership::In;
    if (gm + em <= thr) return Membership::Out;
    return Membership::Uncertain;
}

int box_violations(const SuperLevelSet& set, int samples, std::uint64_t seed) {
    const int n = set.group.dim();
    std::mt19937_64 rng(mix(seed, 17));
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const Eigen::VectorXd big = 2.0 * set.box();
    int bad = 0;
    for (int i = 0; i < samples; ++i) {
        double s = set.s_max * (1.0 + U(rng));
        Point w(n);
        for (int j = 0; j < n; ++j) w[j] = big[j] * U(rng);
        SpaceTimePoint z{set.group.compose(set.center.x, w), set.center.t - s};
        if (set.classify(z) == Membership::Out) continue;
        Eigen::VectorXd h = set.half_widths(s);
        bool inside = s < set.s_max;
        for (int j = 0; j < n && inside; ++j) inside = std::abs(w[j]) <= h[j];
        if (!inside) ++bad;
    }
    return bad;
}

SuperLevelSet superlevel_set(const OperatorSpec& op, const KernelFn& kernel, const SpaceTimePoint& zeta, double r,
                             int m, const MeanValueConfig& cfg) {
    if (!(r > 0.0)) throw DomainError("super-level set needs r > 0");
    if (m < 0) throw DomainError("descent dimension must be nonnegative");
    const CarnotGroup& g = op.group;
    const int n = g.dim(), Q = g.homogeneous_dim();
    if (zeta.x.size() != n) throw DomainError("point dimension does not match the group");
    // Fitting sample: dilated unit-gauge directions at geometric lags.
    std::vector<KernelSample> samples;
    std::vector<Point> dirs;
    for (int k = 0; k < 12; ++k) {
        auto h = halton_point(k + 1, n);
        Point w(n);
        for (int j = 0; j < n; ++j) w[j] = 2.0 * h[j] - 1.0;
        if (n == 1) w[0] = k % 2 ? 1.0 : -1.0;
        double gw = g.gauge(w);
        if (gw > 0.0) dirs.push_back(g.dilate(1.0 / gw, w));
    }
    for (int k = 0; k < 10; ++k) {
        const double s = cfg.horizon * std::pow(0.5, k);
        for (double rho : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0})
            for (const Point& d : dirs) {
                Point w = g.dilate(rho * std::sqrt(s), d);
                double v = kernel(zeta, {g.compose(zeta.x, w), zeta.t - s}).value;
                samples.push_back({s, g.gauge(w), v});
                if (rho == 0.0) break;
            }
    }
    GaussianBoundFit fit = fit_gaussian_sandwich(samples, Q);
    if (!fit.feasible) throw NumericalError("no Gaussian upper bound fits the kernel on the sample");
    tighten_upper(fit, samples, Q, 0.5 * (Q + m));
    SuperLevelSet set;
    set.center = zeta;
    set.r = r;
    set.m = m;
    set.group = g;
    set.kernel = kernel;
    set.c_u = 0.75 * fit.c_upper;
    set.C_u = 1.25 * fit.C_upper;
    const double p = 0.5 * (Q + m);
    for (int attempt = 0;; ++attempt) {
        set.s_max = std::pow(r * set.C_u * std::pow(4.0 * kPi, -0.5 * m), 1.0 / p);
        if (set.s_max > cfg.horizon)
            throw DomainError("r = " + std::to_string(r) + " is too large: the set reaches beyond the horizon");
        if (box_violations(set, 2000, cfg.seed) == 0) break;
        if (attempt == 5) throw NumericalError("could not certify a bounding box for the super-level set");
        set.c_u *= 0.8;
        set.C_u *= 1.25;
    }
    return set;
}

namespace {

struct Stratum {
    std::mt19937_64 rng;
    int n = 0;
    double sum = 0.0, sum2 = 0.0, solid = 0.0, source = 0.0, zero = 0.0, uncertain_abs = 0.0;
};

MeanValueReport evaluate(const OperatorSpec& op, const KernelFn& kernel, const SolutionFn& u, const SolutionFn& f,
                         const SpaceTimePoint& zeta, double r, int m, const MeanValueConfig& cfg) {
    if (!u) throw DomainError("mean value formula needs a solution u");
    if (cfg.samples < cfg.strata || cfg.strata < 1) throw DomainError("need at least one sample per stratum");
    SuperLevelSet set = superlevel_set(op, kernel, zeta, r, m, cfg);
    const CarnotGroup& g = op.group;
    const int n = g.dim();
    const auto& gl = gauss_legendre(cfg.rho_nodes);

    MeanValueReport rep;
    rep.u_zeta = u(zeta.x, zeta.t);
    rep.w_reading = "W = m omega_m (N^m / (rho m) - Gamma^(m) (4 (tau - t))^{m/2} / 2 gamma(m/2, N^2 / (4 (tau - t))))";

    auto draw = [&](Stratum& st, int k) {
        std::uniform_real_distribution<double> U(0.0, 1.0);
        const double v = (k + U(st.rng)) / cfg.strata;
        const double s = set.s_max * v * v;
        Eigen::VectorXd h = set.half_widths(s);
        Point w(n);
        double vol = 2.0 * set.s_max * v;
        for (int j = 0; j < n; ++j) {
            w[j] = h[j] * (2.0 * U(st.rng) - 1.0);
            vol *= 2.0 * h[j];
        }
        ++st.n;
        ++rep.samples;
        SpaceTimePoint z{g.compose(zeta.x, w), zeta.t - s};
        KernelEstimate ke = kernel(zeta, z);
        const double fac = descent_factor(s, m);
        const double gm = ke.value * fac, em = ke.quad_error * fac;
        double weight = 1.0;
        if (gm + em <= 1.0 / r) return;
        if (gm - em <= 1.0 / r) {
            weight = 0.5;
            ++rep.uncertain;
        }
        if (!(gm > 1.0 / r)) return;  // uncertain points below the threshold carry no kernel mass
        ++rep.members;
        const double uz = u(z.x, z.t);
        auto b = descent_from(ke.value, kernel_MG(op, kernel, zeta, z), s, r, m);
        if (b.W_negative) ++rep.w_negative;
        const double solid = b.M * uz / r;
        double source = 0.0, zero = 0.0;
        const double fz = f ? f(z.x, z.t) : 0.0;
        const double dz = (op.Xb ? op.Xb(z.x.data(), z.t) : 0.0) - op.c_at(z.x, z.t);
        if (fz != 0.0 || dz != 0.0) {
            const double rho0 = 1.0 / gm;
            for (int q = 0; q < cfg.rho_nodes; ++q) {
                const double rho = rho0 + (r - rho0) * 0.5 * (gl.nodes[q] + 1.0);
                const double wq = 0.5 * (r - rho0) * gl.weights[q];
                double nmo, W;
                radial_terms(ke.value, s, rho, m, nmo, W);
                source += wq * fz * W;
                zero += wq * nmo / rho * dz * uz;
            }
            source /= r;
            zero /= r;
        }
        const double hv = weight * vol * (solid + source + zero);
        st.sum += hv;
        st.sum2 += hv * hv;
        st.solid += weight * vol * solid;
        st.source += weight * vol * source;
        st.zero += weight * vol * zero;
        if (weight < 1.0) st.uncertain_abs += std::abs(hv);
    };

    std::vector<Stratum> strata(cfg.strata);
    for (int k = 0; k < cfg.strata; ++k) strata[k].rng.seed(mix(cfg.seed, static_cast<std::uint64_t>(k)));
    int per = cfg.samples / cfg.strata;
    for (;;) {
        for (int k = 0; k < cfg.strata; ++k)
            while (strata[k].n < per) draw(strata[k], k);
        double var = 0.0;
        rep.solid = rep.source = rep.zero_order = rep.membership_error = 0.0;
        const double S = cfg.strata;
        for (const Stratum& st : strata) {
            const double mean = st.sum / st.n;
            var += std::max(0.0, st.sum2 / st.n - mean * mean) / st.n / (S * S);
            rep.solid += st.solid / st.n / S;
            rep.source += st.source / st.n / S;
            rep.zero_order += st.zero / st.n / S;
            rep.membership_error += st.uncertain_abs / st.n / S;
        }
        rep.rhs = rep.solid + rep.source + rep.zero_order;
        rep.sigma = std::sqrt(var);
        if (rep.sigma <= cfg.target_rel_sigma * std::abs(rep.rhs) || 2 * per * cfg.strata > cfg.max_samples) break;
        per *= 2;
    }
    rep.residual = std::abs(rep.rhs - rep.u_zeta);
    rep.within_budget = rep.residual <= cfg.budget_sigmas * rep.sigma + rep.membership_error + 1e-12;
    return rep;
}

}  // namespace

MeanValueReport mean_value_evaluate(const OperatorSpec& op, const KernelFn& kernel, const SolutionFn& u,
                                    const SolutionFn& f, const SpaceTimePoint& zeta, double r,
                                    const MeanValueConfig& cfg) {
    if (cfg.m <= 2) throw DomainError("the descent formula needs m > 2");
    return evaluate(op, kernel, u, f, zeta, r, cfg.m, cfg);
}

MeanValueReport unbounded_mean_value_evaluate(const OperatorSpec& op, const KernelFn& kernel, const SolutionFn& u,
                                              const SolutionFn& f, const SpaceTimePoint& zeta, double r,
                                              const MeanValueConfig& cfg) {
    MeanValueReport rep = evaluate(op, kernel, u, f, zeta, r, 0, cfg);
    rep.w_reading = "1 / rho - Gamma";
    return rep;
}

}  // namespace carnot
