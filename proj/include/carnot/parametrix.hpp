#pragma once

#include <functional>
#include <vector>

#include "carnot/kernels.hpp"
#include "carnot/operator.hpp"

namespace carnot {

struct ParametrixConfig {
    int order = 3;          // K, number of series terms
    int time_nodes = 6;     // Gauss-Legendre nodes on each half of a time integral
    int space_nodes = 12;   // nodes per spatial axis
    double horizon = 1.0;   // largest admissible t - tau
    bool estimate_error = true;  // rerun with halved nodes for quad_error
};

struct SeriesEval {
    double value = 0.0;
    std::vector<double> terms;  // (H Z)_1 .. (H Z)_K
    double quad_error = 0.0;
    double tail_bound = 0.0;
    bool diverging = false;
};

struct FundamentalSolutionEval {
    double z_value = 0.0;
    double j_value = 0.0;
    double total = 0.0;
    std::vector<double> j_terms;  // Z * (H Z)_k, k = 1..K
    double quad_error = 0.0;
    double tail_bound = 0.0;
    bool diverging = false;
};

// Frozen-coefficient kernel Gamma_{A(zeta)}(zeta^{-1} z).
KernelEstimate parametrix_Z(const OperatorSpec& op, const SpaceTimePoint& z, const SpaceTimePoint& zeta);

// H applied to Z(., zeta) at z.
double levi_residual(const OperatorSpec& op, const SpaceTimePoint& z, const SpaceTimePoint& zeta);

SeriesEval iterate_G(const OperatorSpec& op, const SpaceTimePoint& z, const SpaceTimePoint& zeta,
                     const ParametrixConfig& cfg = {});

FundamentalSolutionEval fundamental_solution(const OperatorSpec& op, const SpaceTimePoint& z,
                                             const SpaceTimePoint& zeta, const ParametrixConfig& cfg = {});

struct CauchyData {
    std::function<double(const Point&)> g;                 // initial datum at time T1
    std::function<double(const Point&, double)> f;        // source, may be empty
    double h1 = 0.0;  // |g| <= C exp(h1 d^2)
    double h2 = 0.0;  // |f| <= C exp(h2 d^2)
    double c_u = 0.0; // Gaussian upper-bound rate; 0 means 1 / (4 lambda)
    double k1 = 1.0;  // quasi-triangle constant of the distance
};

struct CauchyResult {
    double value = 0.0;
    double quad_error = 0.0;
    bool refused = false;
    std::string reason;
};

// u(x, t) = int Gamma(x, t; xi, T1) g(xi) dxi - int int Gamma f, for H u = f, u(., T1) = g.
CauchyResult cauchy_solve(const OperatorSpec& op, const CauchyData& data, double T1, const SpaceTimePoint& z,
                          const ParametrixConfig& cfg = {});

struct VerifyResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;  // |lhs - rhs|
    double error_bar = 0.0;
};

// Gamma(x, t; xi, tau) against int Gamma(x, t; y, s) Gamma(y, s; xi, tau) dy.
VerifyResult verify_reproduction(const OperatorSpec& op, const SpaceTimePoint& z, const SpaceTimePoint& zeta,
                                 double s, const ParametrixConfig& cfg = {});

// Gamma(z; zeta) against the fundamental solution of the time-reversed adjoint at (zeta; z).
VerifyResult verify_adjoint_symmetry(const OperatorSpec& op, const SpaceTimePoint& z, const SpaceTimePoint& zeta,
                                     const ParametrixConfig& cfg = {});

// int Gamma(x, t; xi, tau) dxi, which equals exp(c (t - tau)) for constant c.
VerifyResult verify_normalization(const OperatorSpec& op, const SpaceTimePoint& z, double tau,
                                  const ParametrixConfig& cfg = {});

}  // namespace carnot
