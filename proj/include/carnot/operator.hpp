#pragma once

#include <functional>
#include <optional>

#include "carnot/group.hpp"

namespace carnot {

struct SpaceTimePoint {
    Point x;
    double t = 0.0;
};

// phi(x, t) = amplitude * exp(-|x - center|^2 / width^2 - (t - t_center)^2 / t_width^2)
struct Bump {
    double amplitude = 0.0;
    Point center;
    double t_center = 0.0;
    double width = 1.0;
    double t_width = 1.0;

    double value(const double* x, double t) const;
    // gradient in x (length N) and Hessian in x (N x N, row-major), both scaled by value
    double eval(const double* x, double t, double* grad, double* hess) const;
};

// base + phi(x, t) * shape, for a scalar, vector or matrix coefficient.
struct CoefficientField {
    Eigen::MatrixXd base;
    Eigen::MatrixXd shape;
    Bump bump;

    bool is_constant() const { return bump.amplitude == 0.0; }
    nlohmann::json to_json() const;
};

// H u = sum a_ij X_i X_j u + sum b_i X_i u + c u - d_t u.
struct OperatorSpec {
    CarnotGroup group = CarnotGroup::euclidean(1);
    std::function<void(const double* x, double t, double* a)> A;  // m1 x m1, row-major
    std::function<void(const double* x, double t, double* b)> b;  // empty means zero drift
    std::function<double(const double* x, double t)> c;          // empty means zero
    // Lie derivatives needed by the adjoint: (XA)_i = sum_j X_j a_ij, XXA = sum X_i X_j a_ij,
    // Xb = sum X_i b_i. Empty when unknown.
    std::function<void(const double* x, double t, double* out)> XA;
    std::function<double(const double* x, double t)> XXA;
    std::function<double(const double* x, double t)> Xb;
    bool constant_A = true;
    bool constant_c = true;
    double lambda = 1.0;
    double M1 = 1.0;
    double M2 = 0.0;
    double alpha = 1.0;
    nlohmann::json source;

    int m1() const { return group.m1(); }
    Eigen::MatrixXd a_at(const Point& x, double t) const;
    Eigen::VectorXd b_at(const Point& x, double t) const;
    double c_at(const Point& x, double t) const;
    bool has_adjoint_data() const { return static_cast<bool>(XA) && static_cast<bool>(XXA) && static_cast<bool>(Xb); }
};

// Builds an operator with constant coefficients.
OperatorSpec constant_operator(const CarnotGroup& g, const Eigen::MatrixXd& A, const Eigen::VectorXd& b = {},
                               double c = 0.0, double lambda = 0.0);

// {"group", "A", "b", "c", "lambda", "M1", "M2", "alpha"}; coefficients are numbers/arrays or
// {"kind": "constant", "value"} / {"kind": "bump", "base", "shape", "amplitude", "center", ...}.
OperatorSpec operator_from_json(const nlohmann::json& j);
OperatorSpec operator_from_fields(const CarnotGroup& g, const CoefficientField& A, const CoefficientField& b,
                                  const CoefficientField& c, double lambda, double M2, double alpha);

// The formal adjoint with time reversed, t -> -t, so that its fundamental solution with the
// roles of the points swapped reproduces the original one.
OperatorSpec adjoint_reversed(const OperatorSpec& op);

struct OperatorCheck {
    double min_eig = 0.0;
    double max_eig = 0.0;
    bool elliptic = false;  // spectrum inside [1/lambda, lambda]
    double sup = 0.0;       // largest |a_ij|, |b_i|, |c| seen
    double holder = 0.0;    // largest Hoelder quotient against the gauge-parabolic distance
    bool bounded = false;   // sup <= M1 and holder <= M2 (when M2 > 0)
};

OperatorCheck check_operator(const OperatorSpec& op, int samples = 200, std::uint64_t seed = 1);

}  // namespace carnot
