#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "carnot/distance.hpp"
#include "carnot/mean_value.hpp"

namespace carnot {

// B_radius(center) x (t_lo, t_hi); a time slice when t_lo == t_hi.
struct Cylinder {
    Point center;
    double radius = 0.0;
    double t_lo = 0.0;
    double t_hi = 0.0;
};

struct HarnackBoxes {
    SpaceTimePoint z0;
    double r = 1.0;
    double nu = 0.0, eta = 0.0, mu = 0.0, theta = 0.0;
    double epsilon1 = 0.0, theta1 = 0.0;
    Cylinder Q, Q_plus, Q_minus, D;
};

HarnackBoxes build_boxes(const CarnotGroup& g, const SpaceTimePoint& z0, double r, double nu, double eta, double mu,
                         double theta, double epsilon1 = 0.25, double theta1 = 0.5);

// Point of B_rho(x0) reached by a rotating control of length <= rho; u in [0,1]^4.
// Every output lies in the ball, and the family sweeps it as u varies.
Point ball_point(const CarnotGroup& g, const Point& x0, double rho, const double* u);

// Quasi-random points of the cylinder, deterministic in (n, offset).
std::vector<SpaceTimePoint> sample_cylinder(const CarnotGroup& g, const Cylinder& c, int n,
                                            std::uint64_t offset = 0);

bool in_cylinder(const CarnotGroup& g, const Cylinder& c, const SpaceTimePoint& z, double tol = 1e-6,
                 const DistanceConfig& dcfg = {});

struct HarnackConstants {
    double epsilon1 = 0.25;
    double theta1 = 0.5;
    double r1 = 1.0;
    double C_P = 2.0;
    double k1 = 1.0;     // quasi-triangle constant of d_X
    double gamma = 0.5;  // free parameter in (0, 1) under the square root of r0
};

double theta0(const HarnackConstants& c);
double r0(const HarnackConstants& c);

struct ChainLengthBounds {
    double first = 0.0;   // 4^2 k1 eps1 / (eta - nu)
    double second = 0.0;  // 4 k1^2 eps1 / (eta - nu)
    double time = 0.0;    // mu / (eps1 r0^2)
    int m_bar = 0;        // ceil of the largest
};

ChainLengthBounds chain_length_bounds(const HarnackConstants& c, double nu, double eta, double mu);

struct ChainConfig {
    HarnackConstants constants;
    DistanceConfig distance = {.restarts = 2};
    bool verify = true;  // cc distances of the gaps and of the points from the origin
    double tol = 1e-3;   // distance-solver tolerance on the certificates
};

struct HarnackChain {
    std::vector<SpaceTimePoint> points;
    int m = 0;
    double r = 0.0;
    double d = 0.0;          // d_X(x+, x-)
    double dt = 0.0;         // t+ - t-
    double m_primam = 0.0;   // eps1 d^2 / (theta1^2 dt)
    double m_time = 0.0;     // dt / (eps1 r0^2)
    ControlTrajectory trajectory;
    std::vector<double> gap_lengths;  // control length over each piece
    std::vector<double> gaps;         // d_X between consecutive points
    std::vector<double> origin_distances;
    double bound = 0.0;  // C_P^m
    bool retried = false;
};

HarnackChain harnack_chain(const CarnotGroup& g, const SpaceTimePoint& z_plus, const SpaceTimePoint& z_minus,
                           const ChainConfig& cfg = {});

struct ParabolicCheck {
    double sup_D = 0.0;
    double u_z0 = 0.0;
    double ratio = 0.0;
};

// sup over samples of D_r(z0) against u(z0).
ParabolicCheck parabolic_harnack_check(const CarnotGroup& g, const SolutionFn& u, const SpaceTimePoint& z0, double r,
                                       const HarnackConstants& c, int samples = 2000);

struct InvariantCheck {
    double sup_minus = 0.0;
    double inf_plus = 0.0;
    double ratio = 0.0;
    bool pass = false;
};

InvariantCheck invariant_harnack_check(const CarnotGroup& g, const SolutionFn& u, const HarnackBoxes& boxes,
                                       double C_H, int samples = 2000);

// Canonical heat kernel with the given pole, as a solution above the pole.
SolutionFn pole_solution(const CarnotGroup& g, const SpaceTimePoint& pole);

// Poles below Q_r(z0): x0 o delta_r(w) with gauge(w) <= spread, at depths r^2 (1 + depth (0.25 + U)).
std::vector<SpaceTimePoint> pole_family(const CarnotGroup& g, const SpaceTimePoint& z0, double r, int count,
                                        std::uint64_t seed, double spread = 2.0, double depth = 1.0);

struct FamilyFit {
    double C_P = 0.0;           // max calibration ratio
    double heldout_max = 0.0;   // max held-out ratio
    int heldout_exceed = 0;     // held-out members above C_P
    std::vector<double> calibration_ratios, heldout_ratios;
};

FamilyFit fit_parabolic_constant(const CarnotGroup& g, const std::vector<SolutionFn>& calibration,
                                 const std::vector<SolutionFn>& heldout, const SpaceTimePoint& z0, double r,
                                 const HarnackConstants& c, int samples = 2000);

struct ChainComposition {
    std::vector<double> step_ratios;  // u(z_j) / u(z_{j-1})
    double max_step = 0.0;
    double total = 0.0;  // u(z-) / u(z+)
    bool within_bound = false;
};

ChainComposition compose_along_chain(const HarnackChain& chain, const SolutionFn& u, double C_P);

using ControlFn = std::function<Eigen::VectorXd(double s)>;
using DomainFn = std::function<bool(const SpaceTimePoint&)>;

struct AdmissiblePath {
    std::vector<SpaceTimePoint> points;  // at s = k duration / steps
    bool truncated = false;
};

// gamma' = sum omega_i X_i(gamma) and t' = -1 for s in [0, duration], RK4.
AdmissiblePath admissible_reach(const CarnotGroup& g, const SpaceTimePoint& zeta, const ControlFn& controls,
                                double duration, int steps, const DomainFn& domain = nullptr);

struct MaxPrincipleConfig {
    int paths = 64;
    int steps = 64;
    double duration = 0.5;
    double control_bound = 1.0;
    std::uint64_t seed = 1;
};

struct MaxPrincipleReport {
    double max_deviation = 0.0;       // sup |u - u(zeta)| over reached points
    double max_source_mismatch = 0.0; // sup |f - u(zeta) c| over reached points
    bool c_nonpositive = true;
    bool divergence_condition = true; // div b - c >= 0
    bool f_nonnegative = true;
    int reached = 0;
    int truncated_paths = 0;
};

MaxPrincipleReport max_principle_probe(const OperatorSpec& op, const SolutionFn& u, const SolutionFn& f,
                                       const SpaceTimePoint& zeta, const DomainFn& domain,
                                       const MaxPrincipleConfig& cfg = {});

}  // namespace carnot
