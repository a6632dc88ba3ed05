#include "carnot/harnack.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "carnot/errors.hpp"
#include "carnot/kernels.hpp"
#include "carnot/special.hpp"

namespace carnot {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kBallSegments = 16;

void check_order(double nu, double eta, double mu, double theta) {
    if (!(0.0 < nu && nu < eta && eta < mu && mu < 1.0)) throw DomainError("need 0 < nu < eta < mu < 1");
    if (!(0.0 < theta && theta < 1.0)) throw DomainError("need 0 < theta < 1");
}

// Length of the piecewise-constant controls over the parameter interval [a, b] of [0, 1].
double control_length(const Eigen::MatrixXd& controls, double a, double b) {
    const int K = static_cast<int>(controls.rows());
    double len = 0.0;
    for (int k = 0; k < K; ++k) {
        const double lo = std::max(a, static_cast<double>(k) / K), hi = std::min(b, static_cast<double>(k + 1) / K);
        if (hi > lo) len += (hi - lo) * controls.row(k).norm();
    }
    return len;
}

}  // namespace

HarnackBoxes build_boxes(const CarnotGroup& g, const SpaceTimePoint& z0, double r, double nu, double eta, double mu,
                         double theta, double epsilon1, double theta1) {
    check_order(nu, eta, mu, theta);
    if (!(r > 0.0)) throw DomainError("need r > 0");
    if (!(0.0 < epsilon1 && epsilon1 < 1.0) || !(0.0 < theta1 && theta1 < 1.0))
        throw DomainError("need epsilon1 and theta1 in (0, 1)");
    if (z0.x.size() != g.dim()) throw DomainError("point dimension does not match the group");
    HarnackBoxes b;
    b.z0 = z0;
    b.r = r;
    b.nu = nu;
    b.eta = eta;
    b.mu = mu;
    b.theta = theta;
    b.epsilon1 = epsilon1;
    b.theta1 = theta1;
    const double t0 = z0.t, r2 = r * r;
    b.Q = {z0.x, r, t0 - r2, t0};
    b.Q_plus = {z0.x, theta * r, t0 - nu * r2, t0};
    b.Q_minus = {z0.x, theta * r, t0 - mu * r2, t0 - eta * r2};
    b.D = {z0.x, theta1 * r, t0 - epsilon1 * r2, t0 - epsilon1 * r2};
    return b;
}

Point ball_point(const CarnotGroup& g, const Point& x0, double rho, const double* u) {
    const int m1 = g.m1();
    const double len = rho * std::pow(u[0], 1.0 / g.homogeneous_dim());
    Eigen::MatrixXd controls = Eigen::MatrixXd::Zero(kBallSegments, m1);
    if (m1 == 1) {
        controls.col(0).setConstant(u[1] < 0.5 ? -len : len);
    } else {
        // rotate in the plane of a pair of generators
        const int pairs = m1 * (m1 - 1) / 2;
        int p = std::min(pairs - 1, static_cast<int>(u[3] * pairs)), a = 0, b = 1;
        for (int i = 0, k = 0; i < m1; ++i)
            for (int j = i + 1; j < m1; ++j, ++k)
                if (k == p) a = i, b = j;
        const double phi = 2.0 * kPi * u[1], kappa = 4.0 * kPi * (u[2] - 0.5);
        for (int k = 0; k < kBallSegments; ++k) {
            const double ang = phi + kappa * (k + 0.5) / kBallSegments;
            controls(k, a) = len * std::cos(ang);
            controls(k, b) = len * std::sin(ang);
        }
    }
    return trajectory_point(g, x0, controls, 1.0, 4);
}

std::vector<SpaceTimePoint> sample_cylinder(const CarnotGroup& g, const Cylinder& c, int n, std::uint64_t offset) {
    if (n < 1) throw DomainError("need at least one sample");
    std::vector<SpaceTimePoint> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        auto h = halton_point(offset + i + 1, 5);
        out.push_back({ball_point(g, c.center, c.radius, h.data()), c.t_lo + (c.t_hi - c.t_lo) * h[4]});
    }
    return out;
}

bool in_cylinder(const CarnotGroup& g, const Cylinder& c, const SpaceTimePoint& z, double tol,
                 const DistanceConfig& dcfg) {
    if (c.t_lo == c.t_hi) {
        if (std::abs(z.t - c.t_lo) > tol) return false;
    } else if (!(z.t > c.t_lo && z.t < c.t_hi)) {
        return false;
    }
    return cc_distance(g, c.center, z.x, dcfg).value <= c.radius + tol;
}

double theta0(const HarnackConstants& c) { return std::min(c.theta1, 1.0 / (12.0 * std::pow(c.k1, 3))); }

double r0(const HarnackConstants& c) {
    if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw DomainError("gamma must lie in (0, 1)");
    return std::min({c.r1, 1.0 / (2.0 * c.k1), std::sqrt(1.0 - c.gamma)});
}

ChainLengthBounds chain_length_bounds(const HarnackConstants& c, double nu, double eta, double mu) {
    check_order(nu, eta, mu, 0.5);
    ChainLengthBounds b;
    b.first = 16.0 * c.k1 * c.epsilon1 / (eta - nu);
    b.second = 4.0 * c.k1 * c.k1 * c.epsilon1 / (eta - nu);
    const double r = r0(c);
    b.time = mu / (c.epsilon1 * r * r);
    b.m_bar = static_cast<int>(std::ceil(std::max({b.first, b.second, b.time})));
    return b;
}

HarnackChain harnack_chain(const CarnotGroup& g, const SpaceTimePoint& z_plus, const SpaceTimePoint& z_minus,
                           const ChainConfig& cfg) {
    const HarnackConstants& c = cfg.constants;
    if (z_plus.x.size() != g.dim() || z_minus.x.size() != g.dim())
        throw DomainError("point dimension does not match the group");
    if (!(z_plus.t > z_minus.t)) throw DomainError("the chain needs t+ > t-");
    if (!(z_plus.t <= 0.0 && z_minus.t > -1.0)) throw DomainError("chain end points must lie in the unit cylinder");
    if (!(c.epsilon1 > 0.0 && c.epsilon1 < 1.0 && c.theta1 > 0.0 && c.theta1 < 1.0))
        throw DomainError("need epsilon1 and theta1 in (0, 1)");
    if (!(c.C_P >= 1.0)) throw DomainError("C_P must be at least 1");

    HarnackChain ch;
    ch.dt = z_plus.t - z_minus.t;
    DistanceResult dr = cc_distance(g, z_plus.x, z_minus.x, cfg.distance);
    if (!dr.converged) throw NumericalError("geodesic solver did not converge");
    ch.d = dr.value;
    ch.trajectory = dr.trajectory;
    const double rr = r0(c);
    ch.m_primam = c.epsilon1 * ch.d * ch.d / (c.theta1 * c.theta1 * ch.dt);
    ch.m_time = ch.dt / (c.epsilon1 * rr * rr);
    int m = std::max({1, static_cast<int>(std::ceil(ch.m_primam)), static_cast<int>(std::ceil(ch.m_time))});

    for (int attempt = 0; attempt < 2; ++attempt, ++m) {
        ch.m = m;
        ch.r = std::sqrt(ch.dt / (m * c.epsilon1));
        ch.points.clear();
        ch.gap_lengths.clear();
        ch.gaps.clear();
        ch.origin_distances.clear();
        for (int j = 0; j <= m; ++j) {
            const double s = static_cast<double>(j) / m;
            Point x = j == m ? z_minus.x : trajectory_point(g, z_plus.x, ch.trajectory.controls, s, cfg.distance.substeps);
            ch.points.push_back({x, z_plus.t - j * ch.dt / m});
            if (j > 0) ch.gap_lengths.push_back(control_length(ch.trajectory.controls, s - 1.0 / m, s));
        }
        bool inside = true;
        if (cfg.verify) {
            const Point origin = Point::Zero(g.dim());
            for (int j = 0; j <= m; ++j) {
                if (j > 0) ch.gaps.push_back(cc_distance(g, ch.points[j - 1].x, ch.points[j].x, cfg.distance).value);
                double d0 = ch.points[j].x.norm() == 0.0 ? 0.0 : cc_distance(g, origin, ch.points[j].x, cfg.distance).value;
                ch.origin_distances.push_back(d0);
                inside = inside && d0 <= 1.0 + cfg.tol;
            }
        }
        if (inside) {
            ch.bound = std::pow(c.C_P, m);
            return ch;
        }
        ch.retried = true;
    }
    throw NumericalError("the Harnack chain leaves the unit ball");
}

ParabolicCheck parabolic_harnack_check(const CarnotGroup& g, const SolutionFn& u, const SpaceTimePoint& z0, double r,
                                       const HarnackConstants& c, int samples) {
    if (!u) throw DomainError("parabolic check needs a solution");
    const Cylinder D{z0.x, c.theta1 * r, z0.t - c.epsilon1 * r * r, z0.t - c.epsilon1 * r * r};
    ParabolicCheck out;
    out.u_z0 = u(z0.x, z0.t);
    if (out.u_z0 < 0.0) throw DomainError("solution is negative at the centre");
    for (const auto& z : sample_cylinder(g, D, samples)) {
        const double v = u(z.x, z.t);
        if (v < 0.0) throw DomainError("solution is negative at a sample point");
        out.sup_D = std::max(out.sup_D, v);
    }
    out.ratio = out.u_z0 > 0.0 ? out.sup_D / out.u_z0 : INFINITY;
    return out;
}

InvariantCheck invariant_harnack_check(const CarnotGroup& g, const SolutionFn& u, const HarnackBoxes& boxes,
                                       double C_H, int samples) {
    if (!u) throw DomainError("invariant check needs a solution");
    InvariantCheck out;
    out.inf_plus = INFINITY;
    for (const auto& z : sample_cylinder(g, boxes.Q_minus, samples)) {
        const double v = u(z.x, z.t);
        if (v < 0.0) throw DomainError("solution is negative at a sample point");
        out.sup_minus = std::max(out.sup_minus, v);
    }
    for (const auto& z : sample_cylinder(g, boxes.Q_plus, samples)) {
        const double v = u(z.x, z.t);
        if (v < 0.0) throw DomainError("solution is negative at a sample point");
        out.inf_plus = std::min(out.inf_plus, v);
    }
    out.ratio = out.inf_plus > 0.0 ? out.sup_minus / out.inf_plus : INFINITY;
    out.pass = out.ratio <= C_H;
    return out;
}

SolutionFn pole_solution(const CarnotGroup& g, const SpaceTimePoint& pole) {
    return [g, pole](const Point& x, double t) {
        if (t <= pole.t) return 0.0;
        return heat_kernel(g, g.compose(-pole.x, x), t - pole.t).value;
    };
}

std::vector<SpaceTimePoint> pole_family(const CarnotGroup& g, const SpaceTimePoint& z0, double r, int count,
                                        std::uint64_t seed, double spread, double depth) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<SpaceTimePoint> out;
    while (static_cast<int>(out.size()) < count) {
        Point w(g.dim());
        for (int j = 0; j < g.dim(); ++j) w[j] = spread * (2.0 * U(rng) - 1.0);
        if (g.gauge(w) > spread) continue;
        out.push_back({g.compose(z0.x, g.dilate(r, w)), z0.t - r * r * (1.0 + depth * (0.25 + U(rng)))});
    }
    return out;
}

FamilyFit fit_parabolic_constant(const CarnotGroup& g, const std::vector<SolutionFn>& calibration,
                                 const std::vector<SolutionFn>& heldout, const SpaceTimePoint& z0, double r,
                                 const HarnackConstants& c, int samples) {
    if (calibration.empty()) throw DomainError("empty calibration family");
    FamilyFit f;
    for (const auto& u : calibration) {
        f.calibration_ratios.push_back(parabolic_harnack_check(g, u, z0, r, c, samples).ratio);
        f.C_P = std::max(f.C_P, f.calibration_ratios.back());
    }
    for (const auto& u : heldout) {
        f.heldout_ratios.push_back(parabolic_harnack_check(g, u, z0, r, c, samples).ratio);
        f.heldout_max = std::max(f.heldout_max, f.heldout_ratios.back());
        f.heldout_exceed += f.heldout_ratios.back() > f.C_P;
    }
    return f;
}

ChainComposition compose_along_chain(const HarnackChain& chain, const SolutionFn& u, double C_P) {
    ChainComposition out;
    std::vector<double> vals;
    for (const auto& z : chain.points) vals.push_back(u(z.x, z.t));
    for (std::size_t j = 1; j < vals.size(); ++j) {
        out.step_ratios.push_back(vals[j] / vals[j - 1]);
        out.max_step = std::max(out.max_step, out.step_ratios.back());
    }
    out.total = vals.back() / vals.front();
    out.within_bound = vals.back() <= std::pow(C_P, chain.m) * vals.front();
    return out;
}

AdmissiblePath admissible_reach(const CarnotGroup& g, const SpaceTimePoint& zeta, const ControlFn& controls,
                                double duration, int steps, const DomainFn& domain) {
    if (!controls) throw DomainError("admissible path needs controls");
    if (!(duration >= 0.0) || steps < 1) throw DomainError("need duration >= 0 and steps >= 1");
    const int n = g.dim(), m1 = g.m1();
    const double h = duration / steps;
    AdmissiblePath path;
    path.points.push_back(zeta);
    Point y = zeta.x, k1(n), k2(n), k3(n), k4(n), tmp(n);
    auto rhs = [&](double s, const Point& x, Point& out) {
        Eigen::VectorXd a = controls(s);
        if (a.size() != m1) throw DomainError("control has the wrong number of components");
        g.horizontal_into(a.data(), x.data(), out.data());
    };
    for (int k = 0; k < steps; ++k) {
        const double s = k * h;
        rhs(s, y, k1);
        tmp = y + 0.5 * h * k1;
        rhs(s + 0.5 * h, tmp, k2);
        tmp = y + 0.5 * h * k2;
        rhs(s + 0.5 * h, tmp, k3);
        tmp = y + h * k3;
        rhs(s + h, tmp, k4);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        SpaceTimePoint z{y, zeta.t - (k + 1) * h};
        if (domain && !domain(z)) {
            path.truncated = true;
            break;
        }
        path.points.push_back(z);
    }
    return path;
}

MaxPrincipleReport max_principle_probe(const OperatorSpec& op, const SolutionFn& u, const SolutionFn& f,
                                       const SpaceTimePoint& zeta, const DomainFn& domain,
                                       const MaxPrincipleConfig& cfg) {
    if (!u) throw DomainError("probe needs a solution");
    if (cfg.paths < 1) throw DomainError("probe needs at least one path");
    const CarnotGroup& g = op.group;
    const int m1 = g.m1();
    const double u0 = u(zeta.x, zeta.t);
    MaxPrincipleReport rep;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int p = 0; p < cfg.paths; ++p) {
        // a random smooth control: constant plus one harmonic per component
        Eigen::VectorXd a0(m1), a1(m1), ph(m1);
        for (int i = 0; i < m1; ++i) a0[i] = U(rng), a1[i] = U(rng), ph[i] = kPi * U(rng);
        const double scale = cfg.control_bound / std::max(1.0, (a0.cwiseAbs() + a1.cwiseAbs()).maxCoeff());
        const double T = cfg.duration;
        ControlFn w = [=](double s) {
            Eigen::VectorXd v(m1);
            for (int i = 0; i < m1; ++i) v[i] = scale * (a0[i] + a1[i] * std::sin(2.0 * kPi * s / T + ph[i]));
            return v;
        };
        auto path = admissible_reach(g, zeta, w, T, cfg.steps, domain);
        rep.truncated_paths += path.truncated;
        for (const auto& z : path.points) {
            ++rep.reached;
            rep.max_deviation = std::max(rep.max_deviation, std::abs(u(z.x, z.t) - u0));
            const double c = op.c_at(z.x, z.t);
            const double fz = f ? f(z.x, z.t) : 0.0;
            const double div = (op.Xb ? op.Xb(z.x.data(), z.t) : 0.0) - c;
            rep.max_source_mismatch = std::max(rep.max_source_mismatch, std::abs(fz - u0 * c));
            rep.c_nonpositive = rep.c_nonpositive && c <= 0.0;
            rep.divergence_condition = rep.divergence_condition && div >= 0.0;
            rep.f_nonnegative = rep.f_nonnegative && fz >= 0.0;
        }
    }
    return rep;
}

}  // namespace carnot
