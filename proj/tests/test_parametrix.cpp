#include <doctest.h>

#include <cmath>
#include <numbers>

#include "carnot/errors.hpp"
#include "carnot/parametrix.hpp"

using namespace carnot;

namespace {

Point p1(double a) { return Point::Constant(1, a); }

Point v3(double a, double b, double c) {
    Point p(3);
    p << a, b, c;
    return p;
}

// a(x, t) = 1 + 0.1 exp(-x^2 - t^2), constant zero-order term c0
OperatorSpec perturbed(double c0) {
    return operator_from_json({{"group", "euclidean1"},
                               {"A", {{"kind", "bump"}, {"base", 1.0}, {"amplitude", 0.1}}},
                               {"c", c0}});
}

ParametrixConfig order(int K) {
    ParametrixConfig c;
    c.order = K;
    return c;
}

}  // namespace

TEST_CASE("fundamental solution vanishes for t <= tau") {
    auto op = perturbed(0.0);
    auto r = fundamental_solution(op, {p1(0.2), 0.0}, {p1(0.0), 0.0});
    CHECK(r.total == 0.0);
    r = fundamental_solution(op, {p1(0.2), -1.0}, {p1(0.0), 0.0});
    CHECK(r.total == 0.0);
    CHECK(iterate_G(op, {p1(0.2), -1.0}, {p1(0.0), 0.0}).value == 0.0);
}

TEST_CASE("constant coefficients need no correction") {
    auto e2 = CarnotGroup::euclidean(2);
    Eigen::MatrixXd A(2, 2);
    A << 1.5, 0.3, 0.3, 0.8;
    auto op = constant_operator(e2, A);
    Point x(2), xi(2);
    x << 0.4, -0.3;
    xi << 0.1, 0.2;
    auto r = fundamental_solution(op, {x, 0.7}, {xi, 0.2});
    CHECK(r.j_value == 0.0);
    CHECK(r.total == doctest::Approx(frozen_kernel(e2, A, x - xi, 0.5).value).epsilon(1e-13));
    CHECK(iterate_G(op, {x, 0.7}, {xi, 0.2}).value == 0.0);

    auto e1 = constant_operator(CarnotGroup::euclidean(1), Eigen::MatrixXd::Identity(1, 1));
    double want = std::exp(-0.09 / 4.0) / std::sqrt(4.0 * std::numbers::pi);
    CHECK(parametrix_Z(e1, {p1(0.3), 1.0}, {p1(0.0), 0.0}).value == doctest::Approx(want).epsilon(1e-14));

    auto h = CarnotGroup::heisenberg1();
    auto oh = constant_operator(h, 2.0 * Eigen::MatrixXd::Identity(2, 2));
    Point y = v3(0.3, 0.5, -0.2);
    auto z = parametrix_Z(oh, {y, 0.6}, {Point::Zero(3), 0.0});
    auto ref = heat_kernel(h, y, 1.2);
    CHECK(std::abs(z.value - ref.value) <= 1e-3 * ref.value);
    ParametrixConfig c1 = order(1);
    auto rh = fundamental_solution(oh, {y, 0.6}, {v3(0.1, 0, 0.1), 0.0}, c1);
    CHECK(rh.j_value == 0.0);
    CHECK(rh.tail_bound == 0.0);
}

TEST_CASE("levi residual") {
    auto e1 = CarnotGroup::euclidean(1);
    auto op = constant_operator(e1, Eigen::MatrixXd::Identity(1, 1));
    CHECK(levi_residual(op, {p1(0.3), 1.0}, {p1(0.0), 0.0}) == 0.0);
    auto oc = constant_operator(e1, Eigen::MatrixXd::Identity(1, 1), {}, -0.7);
    double Z = parametrix_Z(oc, {p1(0.3), 1.0}, {p1(0.0), 0.0}).value;
    CHECK(levi_residual(oc, {p1(0.3), 1.0}, {p1(0.0), 0.0}) == doctest::Approx(-0.7 * Z));
    auto oh = constant_operator(CarnotGroup::heisenberg1(), Eigen::MatrixXd::Identity(2, 2), {}, 0.4);
    SpaceTimePoint z{v3(0.2, -0.1, 0.3), 0.5}, zeta{Point::Zero(3), 0.0};
    CHECK(levi_residual(oh, z, zeta) == doctest::Approx(0.4 * parametrix_Z(oh, z, zeta).value));

    // the Euclidean closed form against differences along the flow for a varying a
    auto pert = perturbed(0.0);
    const double h = 1e-3;
    SpaceTimePoint w{p1(0.4), 0.3}, w0{p1(-0.1), -0.2};
    auto Zat = [&](double dx) { return parametrix_Z(pert, {p1(0.4 + dx), 0.3}, w0).value; };
    double a = pert.a_at(p1(0.4), 0.3)(0, 0) - pert.a_at(p1(-0.1), -0.2)(0, 0);
    double fd = a * (Zat(h) - 2 * Zat(0) + Zat(-h)) / (h * h);
    CHECK(levi_residual(pert, w, w0) == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("first series term is the levi residual") {
    auto op = perturbed(-0.5);
    SpaceTimePoint z{p1(0.3), 0.5}, zeta{p1(0.0), -0.5};
    auto r = iterate_G(op, z, zeta, order(1));
    CHECK(r.value == doctest::Approx(levi_residual(op, z, zeta)));
    CHECK(r.terms.size() == 1);
}

TEST_CASE("series refinement agrees across nodes and order") {
    auto op = perturbed(0.0);
    SpaceTimePoint z{p1(0.3), 0.5}, zeta{p1(0.0), -0.5};
    ParametrixConfig a = order(2), b = order(3);
    b.time_nodes = 12;
    b.space_nodes = 24;
    b.estimate_error = false;
    auto ra = fundamental_solution(op, z, zeta, a);
    auto rb = fundamental_solution(op, z, zeta, b);
    CHECK(std::abs(ra.total - rb.total) <= 1e-3 * rb.total);
    CHECK(std::abs(ra.total - rb.total) <= ra.quad_error + ra.tail_bound);
    CHECK_FALSE(ra.diverging);
    CHECK(ra.tail_bound >= 0.0);
}

TEST_CASE("normalization for constant zero-order terms") {
    SpaceTimePoint z{p1(0.3), 0.5};
    auto r0 = verify_normalization(perturbed(0.0), z, -0.5, order(2));
    CHECK(r0.rhs == 1.0);
    CHECK(r0.residual < 1e-2);
    CHECK(r0.residual <= r0.error_bar);
    auto r1 = verify_normalization(perturbed(-0.5), z, -0.5, order(3));
    CHECK(r1.rhs == doctest::Approx(std::exp(-0.5)));
    CHECK(r1.residual < 1e-2);
    CHECK(r1.residual <= r1.error_bar);
    auto r2 = verify_normalization(perturbed(0.5), z, 0.0, order(3));
    CHECK(r2.residual < 1e-2);
    auto varying = operator_from_json({{"group", "euclidean1"}, {"A", 1.0}, {"c", {{"kind", "bump"}, {"amplitude", 1.0}}}});
    CHECK_THROWS_AS(verify_normalization(varying, z, 0.0), DomainError);
}

TEST_CASE("reproduction property") {
    auto gauss = constant_operator(CarnotGroup::euclidean(1), Eigen::MatrixXd::Identity(1, 1));
    auto g = verify_reproduction(gauss, {p1(0.7), 1.0}, {p1(-0.2), 0.0}, 0.4);
    CHECK(g.residual <= 1e-6);

    auto op = perturbed(-0.5);
    SpaceTimePoint z{p1(0.3), 0.5}, zeta{p1(0.0), -0.5};
    auto r = verify_reproduction(op, z, zeta, 0.1, order(3));
    CHECK(r.residual <= 1e-2 * std::abs(r.lhs));
    CHECK(r.residual <= r.error_bar);

    auto heis = constant_operator(CarnotGroup::heisenberg1(), Eigen::MatrixXd::Identity(2, 2));
    ParametrixConfig c1 = order(1);
    c1.space_nodes = 16;
    auto rh = verify_reproduction(heis, {v3(0.3, -0.2, 0.1), 0.5}, {Point::Zero(3), 0.0}, 0.25, c1);
    CHECK(rh.residual <= rh.error_bar);
    CHECK(rh.residual <= 1e-2 * rh.lhs);
    CHECK_THROWS_AS(verify_reproduction(op, z, zeta, 0.7), DomainError);
}

TEST_CASE("adjoint symmetry") {
    SpaceTimePoint z{p1(0.3), 0.5}, zeta{p1(0.0), -0.5};
    auto sym = constant_operator(CarnotGroup::euclidean(1), Eigen::MatrixXd::Identity(1, 1));
    CHECK(verify_adjoint_symmetry(sym, z, zeta).residual == 0.0);
    Eigen::VectorXd b0(1);
    b0 << 0.6;
    auto drift = constant_operator(CarnotGroup::euclidean(1), Eigen::MatrixXd::Identity(1, 1), b0);
    auto d = verify_adjoint_symmetry(drift, z, zeta, order(3));
    CHECK(d.residual <= d.error_bar);
    CHECK(d.lhs == doctest::Approx(std::exp(-std::pow(0.3 + 0.6, 2) / 4.0) / std::sqrt(4.0 * std::numbers::pi)).epsilon(1e-3));
    auto p = verify_adjoint_symmetry(perturbed(-0.5), z, zeta, order(3));
    CHECK(p.residual <= p.error_bar);
    CHECK(p.residual <= 1e-3 * p.lhs);
}

TEST_CASE("nonnegativity and closeness to the parametrix near the diagonal") {
    auto op = perturbed(0.0);
    SpaceTimePoint zeta{p1(0.0), 0.0};
    ParametrixConfig cfg = order(2);
    double eta[3] = {0.0, 0.0, 0.0};
    const double K0[3] = {1.0, 3.0, 10.0};
    for (double dt : {1e-4, 1e-3, 5e-3, 0.02, 0.1, 0.4, 1.0})
        for (double u : {-2.5, -1.0, 0.0, 0.5, 2.0, 4.0}) {
            SpaceTimePoint z{p1(u * std::sqrt(dt)), dt};
            auto r = fundamental_solution(op, z, zeta, cfg);
            CHECK(r.total >= -(r.quad_error + r.tail_bound));
            for (int k = 0; k < 3; ++k)
                if (r.z_value >= K0[k]) eta[k] = std::max(eta[k], std::abs(r.total / r.z_value - 1.0));
        }
    CHECK(eta[0] > eta[1]);
    CHECK(eta[1] > eta[2]);
    CHECK(eta[0] < 0.1);
}

TEST_CASE("gaussian sandwich for the variable-coefficient kernel") {
    auto op = perturbed(0.0);
    std::vector<KernelSample> s;
    for (double t : {0.05, 0.2, 0.6})
        for (double x : {0.0, 0.3, 0.8, 1.5}) {
            auto r = fundamental_solution(op, {p1(x), t}, {p1(0.0), 0.0}, order(2));
            s.push_back({t, x, r.total});
        }
    auto f = fit_gaussian_sandwich(s, 1);
    CHECK(f.feasible);
    CHECK(f.residual <= 0.0);
    CHECK(std::isfinite(f.C_upper));
}

TEST_CASE("heisenberg correction for a constant zero-order term") {
    auto op = constant_operator(CarnotGroup::heisenberg1(), Eigen::MatrixXd::Identity(2, 2), {}, 0.3);
    ParametrixConfig c1 = order(1);
    c1.space_nodes = 16;
    c1.time_nodes = 4;
    auto r = fundamental_solution(op, {v3(0.3, -0.2, 0.1), 0.5}, {Point::Zero(3), 0.0}, c1);
    // Z * (c Z) = c (t - tau) Z by the reproduction of the frozen kernel
    double want = 0.3 * 0.5 * r.z_value;
    CHECK(std::abs(r.j_value - want) <= r.quad_error);
    CHECK(std::abs(r.j_value - want) <= 1e-3 * want);
}

TEST_CASE("cauchy problem") {
    auto op = perturbed(0.0);
    CauchyData data;
    data.g = [](const Point&) { return 1.0; };
    ParametrixConfig cfg = order(2);
    auto u = cauchy_solve(op, data, 0.0, {p1(0.2), 0.4}, cfg);
    CHECK_FALSE(u.refused);
    CHECK(std::abs(u.value - 1.0) < 1e-2);

    auto oc = perturbed(-0.5);
    auto uc = cauchy_solve(oc, data, 0.0, {p1(0.2), 0.4}, order(3));
    CHECK(std::abs(uc.value - std::exp(-0.2)) < 1e-2);

    // semigroup property of the Gaussian
    auto heat = constant_operator(CarnotGroup::euclidean(1), Eigen::MatrixXd::Identity(1, 1));
    CauchyData gd;
    gd.g = [](const Point& x) { return heat_kernel(CarnotGroup::euclidean(1), x, 0.3).value; };
    auto us = cauchy_solve(heat, gd, 0.0, {p1(0.5), 0.2});
    double semi = heat_kernel(CarnotGroup::euclidean(1), p1(0.5), 0.5).value;
    CHECK(std::abs(us.value - semi) <= us.quad_error);

    // source term: u = t solves u_xx - u_t = -1 with u(., 0) = 0
    CauchyData sd;
    sd.g = [](const Point&) { return 0.0; };
    sd.f = [](const Point&, double) { return -1.0; };
    auto uf = cauchy_solve(heat, sd, 0.0, {p1(0.1), 0.3});
    CHECK(uf.value == doctest::Approx(0.3).epsilon(1e-6));

    CauchyData fast;
    fast.g = [](const Point& x) { return std::exp(x.squaredNorm()); };
    fast.h1 = 1.0;
    auto ur = cauchy_solve(heat, fast, 0.0, {p1(0.0), 2.0});
    CHECK(ur.refused);
    CHECK(!ur.reason.empty());
    CHECK_THROWS_AS(cauchy_solve(heat, fast, 1.0, {p1(0.0), 0.5}), DomainError);
}

TEST_CASE("parametrix rejects bad configurations") {
    auto op = perturbed(0.0);
    SpaceTimePoint z{p1(0.3), 0.5}, zeta{p1(0.0), -0.5};
    ParametrixConfig bad;
    bad.order = 0;
    CHECK_THROWS_AS(fundamental_solution(op, z, zeta, bad), DomainError);
    bad = {};
    bad.space_nodes = 3;
    CHECK_THROWS_AS(fundamental_solution(op, z, zeta, bad), DomainError);
    bad = {};
    bad.horizon = 0.5;
    CHECK_THROWS_AS(fundamental_solution(op, z, zeta, bad), DomainError);
    auto big = operator_from_json({{"group", "euclidean4"}, {"A", {{"kind", "bump"}, {"base", 1.0}, {"amplitude", 0.1}}}});
    SpaceTimePoint a{Point::Zero(4), 1.0}, b{Point::Zero(4), 0.0};
    CHECK_THROWS_AS(fundamental_solution(big, a, b), DomainError);
    CHECK_THROWS_AS(fundamental_solution(op, {Point::Zero(2), 1.0}, zeta), DomainError);
}
