#pragma once

#include <cstdint>
#include <vector>

namespace carnot {

// Lower incomplete gamma gamma(s, x) = int_0^x t^{s-1} e^{-t} dt, s > 0, x >= 0.
double lower_incomplete_gamma(double s, double x);

// Volume of the Euclidean unit ball in R^m.
double unit_ball_volume(int m);

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre rule on [-1, 1]; cached per n.
const QuadratureRule& gauss_legendre(int n);

// Same rule mapped to [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

// Nodes and weights for E[f(Z)], Z standard normal; weights sum to one.
const QuadratureRule& gauss_hermite_normal(int n);

// Radical-inverse (Halton) point in [0,1)^dim.
double radical_inverse(std::uint64_t index, int base);
std::vector<double> halton_point(std::uint64_t index, int dim);

}  // namespace carnot
