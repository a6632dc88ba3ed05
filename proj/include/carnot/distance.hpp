#pragma once

#include <cstdint>
#include <vector>

#include "carnot/group.hpp"

namespace carnot {

enum class CostNorm { L1, L2, Sup };

CostNorm cost_norm_from_string(const std::string& s);

struct DistanceConfig {
    int segments = 32;
    int substeps = 4;  // RK4 steps per segment
    CostNorm p = CostNorm::L2;
    int restarts = 8;
    double tol = 1e-4;
    std::uint64_t seed = 0;
    int max_iter = 80;
};

// Piecewise-constant horizontal controls on a uniform partition of [0, 1].
struct ControlTrajectory {
    Eigen::MatrixXd controls;  // K x m1
    Eigen::MatrixXd path;      // (K+1) x N, positions at partition nodes
    double cost_p1 = 0.0;
    double cost_p2 = 0.0;
    double cost_sup = 0.0;

    double cost(CostNorm p) const;
};

struct DistanceResult {
    double value = 0.0;
    ControlTrajectory trajectory;
    double gap_estimate = 0.0;
    double endpoint_residual = 0.0;
    bool converged = false;
    std::uint64_t seed = 0;
};

struct EquivalenceConstants {
    double c_low = 0.0;
    double c_high = 0.0;
    double k1_fit = 1.0;
};

// Flow of sum_i alpha_i X_i for unit time from x using `steps` RK4 steps.
Point flow_constant_control(const CarnotGroup& g, const Point& x, const double* alpha, double duration, int steps);

// Integrates a control trajectory from x; returns (K+1) x N node positions.
Eigen::MatrixXd integrate_controls(const CarnotGroup& g, const Point& x, const Eigen::MatrixXd& controls,
                                   int substeps);

// Position at parameter tau in [0, 1] along the controls started at x.
Point trajectory_point(const CarnotGroup& g, const Point& x, const Eigen::MatrixXd& controls, double tau,
                       int substeps);

void fill_costs(ControlTrajectory& tr);

DistanceResult cc_distance(const CarnotGroup& g, const Point& x, const Point& y, const DistanceConfig& cfg = {});

// d_X(x, y) + |t - tau|^{1/2}; the certificate is the spatial one.
DistanceResult parabolic_distance(const CarnotGroup& g, const Point& x, double t, const Point& y, double tau,
                                  const DistanceConfig& cfg = {});

// Gauge equivalence constants and the smallest quasi-triangle constant seen on random samples.
EquivalenceConstants equivalence_constants(const CarnotGroup& g, int samples, std::uint64_t seed,
                                           const DistanceConfig& cfg = {});

}  // namespace carnot
