#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "carnot/group.hpp"

namespace carnot {

struct KernelEstimate {
    double value = 0.0;
    double quad_error = 0.0;
    bool in_range = true;
};

// Grid and time stepping of the Heisenberg heat-kernel oracle. The kernel is radial in the
// horizontal variables and even in x3, so it is solved as F(rho, z) on sinh-stretched grids.
struct HeisenbergTableConfig {
    int n_rho = 160;  // coarse intervals; the fine run doubles both
    int n_z = 320;
    double rho_max = 10.0;
    double z_max = 16.0;
    double rho_scale = 0.2;  // rho = rho_scale * sinh(s)
    double z_scale = 0.05;   // z = z_scale * sinh(w)
    double T = 1.0;
    double t0 = 0.02;          // start time of the evolution
    double step_growth = 0.02; // dt = step_growth * t
    std::size_t memory_budget = std::size_t(1) << 30;

    std::string key() const;
    nlohmann::json to_json() const;
};

class HeisenbergKernelTable {
public:
    static HeisenbergKernelTable bake(const HeisenbergTableConfig& cfg);
    static HeisenbergKernelTable load(const std::string& path);
    void save(const std::string& path) const;

    // Gamma_0(x, t) for Delta_X - d_t on the first Heisenberg group.
    KernelEstimate eval(const Point& x, double t) const;
    // Value of the stored profile at (rho, |z|), time T.
    double profile(double rho, double z) const;
    // Largest grid value feeding the interpolant at (rho, |z|); edge_max_ outside the grid.
    double stencil_max(double rho, double z) const;

    const HeisenbergTableConfig& config() const { return cfg_; }
    std::uint64_t checksum() const { return checksum_; }
    double mass() const { return mass_; }
    double richardson_agreement() const { return richardson_; }
    double scaling_residual() const { return scaling_residual_; }
    double max_value() const { return max_value_; }
    double error_bound() const { return err_bound_; }
    int rows() const { return cfg_.n_rho + 1; }
    int cols() const { return cfg_.n_z + 1; }
    const std::vector<double>& data() const { return data_; }

private:
    HeisenbergTableConfig cfg_;
    std::vector<double> data_;  // (n_rho+1) x (n_z+1), row-major in rho
    std::uint64_t checksum_ = 0;
    double mass_ = 0.0;
    double richardson_ = 0.0;
    double scaling_residual_ = 0.0;
    double max_value_ = 0.0;
    double err_bound_ = 0.0;
    double edge_max_ = 0.0;  // largest value on the outer rows of the grid
    double hs_ = 0.0, hw_ = 0.0;

    void finalize();
};

std::uint64_t fnv1a(const void* data, std::size_t bytes);

// Directory for cached oracle tables: $CARNOT_TABLE_DIR, else ./carnot_tables.
std::string table_directory();

// Loads the cached table for cfg, baking and saving it when absent and allowed.
const HeisenbergKernelTable& heisenberg_table(const HeisenbergTableConfig& cfg = {}, bool allow_bake = true);

// Gamma_0 of the sub-Laplacian heat operator: exact Gaussian on R^N, oracle table on H^1.
KernelEstimate heat_kernel(const CarnotGroup& g, const Point& x, double t);

// Group automorphism T_A with d(T_A) sum a_ij X_i X_j = sum X_i^2, and its Jacobian.
Point frozen_transform(const CarnotGroup& g, const Eigen::MatrixXd& A, const Point& x);
double frozen_jacobian(const CarnotGroup& g, const Eigen::MatrixXd& A);
// Gamma_A(x, t) = J_A Gamma_0(T_A x, t) for sum a_ij X_i X_j - d_t with constant A.
KernelEstimate frozen_kernel(const CarnotGroup& g, const Eigen::MatrixXd& A, const Point& x, double t);

// Symmetric positive definite square root inverse.
Eigen::MatrixXd inverse_sqrt_spd(const Eigen::MatrixXd& A);

struct KernelSample {
    double t = 0.0;
    double d = 0.0;  // control distance from the pole
    double value = 0.0;
};

struct GaussianBoundFit {
    double C_upper = 0.0;  // value <= C_upper t^{-Q/2} exp(-c_upper d^2 / t)
    double c_upper = 0.0;
    double C_lower = 0.0;  // value >= C_lower t^{-Q/2} exp(-c_lower d^2 / t)
    double c_lower = 0.0;
    double residual = 0.0;  // largest violation over the sample, <= 0 when feasible
    bool feasible = false;
};

GaussianBoundFit fit_gaussian_sandwich(const std::vector<KernelSample>& samples, int Q);

double upper_bound(const GaussianBoundFit& f, int Q, double d, double t);
double lower_bound(const GaussianBoundFit& f, int Q, double d, double t);

}  // namespace carnot
