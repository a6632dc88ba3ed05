#pragma once

#include <Eigen/Dense>
#include <json.hpp>
#include <string>
#include <vector>

#include "carnot/polynomial.hpp"

namespace carnot {

using Point = Eigen::VectorXd;
using VectorField = std::vector<Polynomial>;  // N components, each a polynomial in N variables

struct HormanderReport {
    int rank = 0;
    int step_reached = 0;  // 0 when rank N is never reached
    bool satisfied = false;
};

// Homogeneous Carnot group on R^N in exponential coordinates, x^{-1} = -x.
class CarnotGroup {
public:
    CarnotGroup(std::string name, std::vector<int> layers, std::vector<VectorField> fields,
                std::vector<Polynomial> compose);

    static CarnotGroup euclidean(int n);
    static CarnotGroup heisenberg1();
    static CarnotGroup free_step2(int m);
    // "euclidean<N>", "heisenberg1" or "free2_<m>".
    static CarnotGroup from_name(const std::string& name);
    static CarnotGroup from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    const std::string& name() const { return name_; }
    int dim() const { return n_; }
    int m1() const { return layers_.front(); }
    int step() const { return static_cast<int>(layers_.size()); }
    int homogeneous_dim() const { return q_; }
    const std::vector<int>& layers() const { return layers_; }
    const std::vector<int>& sigma() const { return sigma_; }
    bool is_euclidean() const { return step() == 1; }

    Point compose(const Point& x, const Point& y) const;
    void compose_into(const double* x, const double* y, double* out) const;
    Point inverse(const Point& x) const { return -x; }
    Point dilate(double r, const Point& x) const;

    Point field(int i, const Point& x) const;
    Eigen::MatrixXd field_matrix(const Point& x) const;  // N x m1, columns X_i(x)
    Point horizontal(const Eigen::VectorXd& alpha, const Point& x) const;
    void horizontal_into(const double* alpha, const double* x, double* out) const;
    // out (N x N, row-major) = d/dx sum_i alpha_i X_i(x)
    void horizontal_jacobian_into(const double* alpha, const double* x, double* out) const;
    const VectorField& field_polynomials(int i) const { return fields_.at(i); }
    const std::vector<Polynomial>& compose_polynomials() const { return compose_; }

    double gauge(const Point& x) const;
    HormanderReport check_hormander(const Point& x) const;

private:
    void validate() const;

    std::string name_;
    int n_ = 0;
    int q_ = 0;
    std::vector<int> layers_;
    std::vector<int> sigma_;
    std::vector<VectorField> fields_;
    std::vector<Polynomial> compose_;
    std::vector<std::vector<CompiledPolynomial>> fields_c_;
    std::vector<CompiledPolynomial> compose_c_;
    std::vector<std::vector<std::vector<CompiledPolynomial>>> dfields_c_;  // [i][j][k] = d_k X_i^j
};

VectorField lie_bracket(const VectorField& v, const VectorField& w);
Point eval_field(const VectorField& v, const Point& x);
Point lie_bracket(const CarnotGroup& g, int i, int j, const Point& x);

nlohmann::json polynomial_to_json(const Polynomial& p);
Polynomial polynomial_from_json(const nlohmann::json& j, int nvars);

}  // namespace carnot
