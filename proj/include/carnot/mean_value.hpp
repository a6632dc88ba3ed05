#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "carnot/parametrix.hpp"

namespace carnot {

// Gamma(zeta; z) as a function of the lower point z = (x, t), t < tau; zero otherwise.
using KernelFn = std::function<KernelEstimate(const SpaceTimePoint& zeta, const SpaceTimePoint& z)>;

// Closed form e^{c s} Gamma_A for constant A, no drift and constant c; the parametrix otherwise.
KernelFn operator_kernel(const OperatorSpec& op, const ParametrixConfig& cfg = {});

// Step for the differences along X_i at time lag s = tau - t.
double gradient_step(double s);

// <A(z) grad_X Gamma, grad_X Gamma> / Gamma^2, derivatives in x along the X_i flows.
double kernel_MG(const OperatorSpec& op, const KernelFn& kernel, const SpaceTimePoint& zeta, const SpaceTimePoint& z);

struct DescentKernelBundle {
    int m = 4;
    double omega_m = 0.0;
    double gamma = 0.0;    // Gamma(zeta; z)
    double gamma_m = 0.0;  // Gamma / (4 pi s)^{m/2}
    double N = 0.0;
    double MG = 0.0;
    double M = 0.0;
    double W = 0.0;
    bool W_negative = false;
};

// Kernels from known Gamma, M_G and lag s; throws when z lies outside Omega_r^(m).
DescentKernelBundle descent_from(double gamma, double MG, double s, double r, int m);

DescentKernelBundle descent_kernels(const OperatorSpec& op, const KernelFn& kernel, const SpaceTimePoint& zeta,
                                    const SpaceTimePoint& z, double r, int m);

// Explicit forms for the one-dimensional heat operator.
double heat1d_descent_M(double xi, double tau, double x, double t, double r, int m);
bool heat1d_in_set(double xi, double tau, double x, double t, double r, int m);

enum class Membership { Out, In, Uncertain };

struct MeanValueConfig {
    int m = 4;
    int samples = 20000;  // initial count
    int strata = 40;
    std::uint64_t seed = 1;
    int rho_nodes = 16;
    double horizon = 1.0;       // largest admissible tau - t of the set
    double budget_sigmas = 3.0;
    double target_rel_sigma = 0.01;  // samples double until sigma <= target |rhs|
    int max_samples = 2000000;
};

// Omega_r^(m)(zeta) with a box certified by the fitted Gaussian upper bound. Points are
// x = xi o w, t = tau - s with |w_j| <= R(s)^{sigma_j}; m = 0 gives Omega_r itself.
struct SuperLevelSet {
    SpaceTimePoint center;
    double r = 0.0;
    int m = 4;
    double C_u = 0.0;  // Gamma <= C_u s^{-Q/2} exp(-c_u gauge(w)^2 / s) on the fitting sample, with margin
    double c_u = 0.0;
    double s_max = 0.0;

    CarnotGroup group = CarnotGroup::euclidean(1);
    KernelFn kernel;

    double radius(double s) const;  // gauge bound R(s), zero beyond s_max
    Eigen::VectorXd half_widths(double s) const;
    Eigen::VectorXd box() const;  // half-widths over all s
    Membership classify(const SpaceTimePoint& z) const;
};

SuperLevelSet superlevel_set(const OperatorSpec& op, const KernelFn& kernel, const SpaceTimePoint& zeta, double r,
                             int m, const MeanValueConfig& cfg = {});

// Members of the set found by sampling a box twice as wide that fall outside the certified box.
int box_violations(const SuperLevelSet& set, int samples, std::uint64_t seed);

struct MeanValueReport {
    double u_zeta = 0.0;
    double solid = 0.0;       // (1/r) int M u
    double source = 0.0;      // f term
    double zero_order = 0.0;  // (div b - c) u term
    double rhs = 0.0;
    double sigma = 0.0;       // Monte Carlo standard error of rhs
    double membership_error = 0.0;
    double residual = 0.0;
    bool within_budget = false;
    int samples = 0;
    int members = 0;
    int uncertain = 0;
    int w_negative = 0;  // members where the source kernel W is below -1e-9
    std::string w_reading;
};

using SolutionFn = std::function<double(const Point& x, double t)>;

// Improved (descent) formula with bounded kernels, m = cfg.m > 2.
MeanValueReport mean_value_evaluate(const OperatorSpec& op, const KernelFn& kernel, const SolutionFn& u,
                                    const SolutionFn& f, const SpaceTimePoint& zeta, double r,
                                    const MeanValueConfig& cfg = {});

// Formula with the unbounded kernel M_G over Omega_r(zeta).
MeanValueReport unbounded_mean_value_evaluate(const OperatorSpec& op, const KernelFn& kernel, const SolutionFn& u,
                                              const SolutionFn& f, const SpaceTimePoint& zeta, double r,
                                              const MeanValueConfig& cfg = {});

}  // namespace carnot
