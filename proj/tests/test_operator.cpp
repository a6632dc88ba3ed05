#include <doctest.h>

#include <cmath>

#include "carnot/errors.hpp"
#include "carnot/operator.hpp"

using namespace carnot;

namespace {

nlohmann::json bump_heisenberg() {
    return {{"group", "heisenberg1"},
            {"A",
             {{"kind", "bump"},
              {"base", {{1.5, 0.2}, {0.2, 1.0}}},
              {"shape", {{1.0, 0.5}, {0.5, 0.3}}},
              {"amplitude", 0.2},
              {"center", {0.1, -0.2, 0.3}},
              {"width", 0.8},
              {"t_width", 1.3}}},
            {"b", {{"kind", "bump"}, {"base", {0.1, -0.3}}, {"shape", {1.0, 2.0}}, {"amplitude", 0.4}}},
            {"c", -0.25}};
}

}  // namespace

TEST_CASE("operator from json") {
    auto op = operator_from_json({{"group", "euclidean2"}, {"A", 2.0}, {"c", -0.5}});
    Point x = Point::Zero(2);
    CHECK(op.a_at(x, 0.0).isApprox(2.0 * Eigen::MatrixXd::Identity(2, 2)));
    CHECK(op.b_at(x, 0.0).isZero());
    CHECK(op.c_at(x, 0.3) == -0.5);
    CHECK(op.constant_A);
    CHECK(op.lambda == doctest::Approx(2.0));
    CHECK(op.M1 == doctest::Approx(2.0));

    auto h = operator_from_json(bump_heisenberg());
    CHECK_FALSE(h.constant_A);
    Point c(3);
    c << 0.1, -0.2, 0.3;
    Eigen::MatrixXd want(2, 2);
    want << 1.7, 0.3, 0.3, 1.06;
    CHECK(h.a_at(c, 0.0).isApprox(want));
    CHECK(h.b_at(c, 0.0)[1] == doctest::Approx(-0.3 + 0.8 * std::exp(-0.14)));
}

TEST_CASE("operator spec validation") {
    CHECK_THROWS_AS(operator_from_json({{"A", 1.0}}), DomainError);
    CHECK_THROWS_AS(operator_from_json({{"group", "euclidean1"}}), DomainError);
    CHECK_THROWS_AS(operator_from_json({{"group", "euclidean2"}, {"A", {{1.0, 0.3}, {0.0, 1.0}}}}), DomainError);
    CHECK_THROWS_AS(operator_from_json({{"group", "euclidean1"}, {"A", -1.0}}), DomainError);
    CHECK_THROWS_AS(operator_from_json({{"group", "euclidean1"}, {"A", 3.0}, {"lambda", 2.0}}), DomainError);
    CHECK_THROWS_AS(operator_from_json({{"group", "euclidean1"}, {"A", 1.0}, {"alpha", 1.5}}), DomainError);
    CHECK_THROWS_AS(operator_from_json({{"group", "euclidean1"}, {"A", {{"kind", "wavelet"}}}}), DomainError);
    CHECK_THROWS_AS(operator_from_json({{"group", "euclidean1"}, {"A", 1.0}, {"M1", 0.5}}), DomainError);
    CHECK_THROWS_AS(operator_from_json({{"group", "euclidean2"}, {"A", 1.0}, {"b", {1.0, 2.0, 3.0}}}), DomainError);
}

TEST_CASE("sampled ellipticity and hoelder bounds") {
    auto op = operator_from_json(bump_heisenberg());
    auto rep = check_operator(op, 120, 3);
    CHECK(rep.elliptic);
    CHECK(rep.min_eig >= 1.0 / op.lambda);
    CHECK(rep.sup <= op.M1);
    CHECK(rep.holder > 0.0);
    CHECK(rep.bounded);  // M2 undeclared
    auto j = bump_heisenberg();
    j["M2"] = 1e-3;
    CHECK_FALSE(check_operator(operator_from_json(j), 120, 3).bounded);
}

TEST_CASE("analytic lie derivatives of the coefficients") {
    auto op = operator_from_json(bump_heisenberg());
    const auto& g = op.group;
    REQUIRE(op.has_adjoint_data());
    const double h = 1e-4, t = 0.2;
    auto a = [&](const Point& x, int i, int j) { return op.a_at(x, t)(i, j); };
    auto flow = [&](const Point& x, int i, double s) {
        Point v = Point::Zero(3);
        v[i] = s;
        return g.compose(x, v);
    };
    for (const Point& x : {Point(Eigen::Vector3d(0.3, 0.1, -0.2)), Point(Eigen::Vector3d(-0.4, 0.6, 0.5))}) {
        double XA[2];
        op.XA(x.data(), t, XA);
        double xxa = 0.0, xb = 0.0;
        for (int i = 0; i < 2; ++i) {
            double fd = 0.0;
            for (int j = 0; j < 2; ++j) fd += (a(flow(x, j, h), i, j) - a(flow(x, j, -h), i, j)) / (2 * h);
            CHECK(XA[i] == doctest::Approx(fd).epsilon(1e-6));
            xb += (op.b_at(flow(x, i, h), t)[i] - op.b_at(flow(x, i, -h), t)[i]) / (2 * h);
            for (int j = 0; j < 2; ++j) {
                // X_i X_j a_ij: differentiate along X_j, then along X_i
                auto dj = [&](const Point& y) {
                    return (a(flow(y, j, h), i, j) - a(flow(y, j, -h), i, j)) / (2 * h);
                };
                xxa += (dj(flow(x, i, h)) - dj(flow(x, i, -h))) / (2 * h);
            }
        }
        CHECK(op.XXA(x.data(), t) == doctest::Approx(xxa).epsilon(1e-5));
        CHECK(op.Xb(x.data(), t) == doctest::Approx(xb).epsilon(1e-6));
    }
}

TEST_CASE("time-reversed adjoint coefficients") {
    auto op = operator_from_json(bump_heisenberg());
    auto adj = adjoint_reversed(op);
    Point x(3);
    x << 0.2, 0.0, -0.1;
    const double t = 0.4;
    CHECK(adj.a_at(x, -t).isApprox(op.a_at(x, t)));
    double XA[2];
    op.XA(x.data(), t, XA);
    Eigen::VectorXd b = op.b_at(x, t);
    CHECK(adj.b_at(x, -t)[0] == doctest::Approx(2 * XA[0] - b[0]));
    CHECK(adj.b_at(x, -t)[1] == doctest::Approx(2 * XA[1] - b[1]));
    CHECK(adj.c_at(x, -t) == doctest::Approx(op.c_at(x, t) + op.XXA(x.data(), t) - op.Xb(x.data(), t)));
    // applying the construction twice returns the original operator
    auto back = adjoint_reversed(adj);
    CHECK(back.b_at(x, t).isApprox(op.b_at(x, t)));
    CHECK(back.c_at(x, t) == doctest::Approx(op.c_at(x, t)));
    OperatorSpec bare = op;
    bare.XA = nullptr;
    CHECK_THROWS_AS(adjoint_reversed(bare), DomainError);
}
