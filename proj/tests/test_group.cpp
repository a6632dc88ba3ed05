#include <doctest.h>

#include <cmath>
#include <random>

#include "carnot/errors.hpp"
#include "carnot/group.hpp"

using namespace carnot;

namespace {

Point rand_point(std::mt19937_64& rng, int n, double s = 1.0) {
    std::uniform_real_distribution<double> u(-s, s);
    Point p(n);
    for (int i = 0; i < n; ++i) p[i] = u(rng);
    return p;
}

Point v3(double a, double b, double c) {
    Point p(3);
    p << a, b, c;
    return p;
}

}  // namespace

TEST_CASE("heisenberg composition matches the worked examples") {
    auto g = CarnotGroup::heisenberg1();
    CHECK(g.dim() == 3);
    CHECK(g.homogeneous_dim() == 4);
    CHECK(g.step() == 2);
    Point z = g.compose(v3(1, 0, 0), v3(0, 1, 0));
    CHECK(z[0] == doctest::Approx(1));
    CHECK(z[1] == doctest::Approx(1));
    CHECK(z[2] == doctest::Approx(0.5));
    Point z2 = g.compose(v3(0, 1, 0), v3(1, 0, 0));
    CHECK(z2[2] == doctest::Approx(-0.5));
    Point d = g.dilate(2.0, v3(1, 1, 1));
    CHECK(d[0] == 2);
    CHECK(d[1] == 2);
    CHECK(d[2] == 4);
}

TEST_CASE("group axioms hold on random samples") {
    std::mt19937_64 rng(11);
    for (const char* name : {"euclidean2", "heisenberg1", "free2_3"}) {
        auto g = CarnotGroup::from_name(name);
        for (int s = 0; s < 100; ++s) {
            Point x = rand_point(rng, g.dim()), y = rand_point(rng, g.dim()), w = rand_point(rng, g.dim());
            CHECK((g.compose(g.compose(x, y), w) - g.compose(x, g.compose(y, w))).norm() < 1e-12);
            CHECK((g.compose(x, g.inverse(x))).norm() < 1e-12);
            CHECK((g.compose(Point::Zero(g.dim()), x) - x).norm() < 1e-14);
            double r = 0.2 + 3.0 * std::abs(x[0]);
            CHECK((g.dilate(r, g.compose(x, y)) - g.compose(g.dilate(r, x), g.dilate(r, y))).norm() < 1e-12);
        }
    }
}

TEST_CASE("generating fields are left-invariant and are the derivatives of right translation") {
    std::mt19937_64 rng(5);
    auto g = CarnotGroup::heisenberg1();
    for (int s = 0; s < 50; ++s) {
        Point x = rand_point(rng, 3), p = rand_point(rng, 3);
        for (int i = 0; i < 2; ++i) {
            // X_i(x o p) = d(L_x) X_i(p)
            const double h = 1e-6;
            Point e = Point::Zero(3);
            e[i] = h;
            Point fd = (g.compose(g.compose(x, p), e) - g.compose(g.compose(x, p), -e)) / (2 * h);
            CHECK((fd - g.field(i, g.compose(x, p))).norm() < 1e-6);
            Point v = g.field(i, p);
            Point dl = (g.compose(x, p + h * v) - g.compose(x, p - h * v)) / (2 * h);
            CHECK((dl - g.field(i, g.compose(x, p))).norm() < 1e-6);
        }
    }
}

TEST_CASE("fields have the homogeneity of the dilations") {
    std::mt19937_64 rng(9);
    auto g = CarnotGroup::heisenberg1();
    for (int s = 0; s < 20; ++s) {
        Point x = rand_point(rng, 3);
        double r = 0.5 + s * 0.1;
        for (int i = 0; i < 2; ++i) {
            // X_i(delta_r x) = r^{-1} d(delta_r) X_i(x)
            Point lhs = g.field(i, g.dilate(r, x));
            Point rhs = g.dilate(r, g.field(i, x)) / r;
            CHECK((lhs - rhs).norm() < 1e-12);
        }
    }
}

TEST_CASE("hormander rank condition") {
    auto h = CarnotGroup::heisenberg1();
    auto rep = h.check_hormander(Point::Zero(3));
    CHECK(rep.satisfied);
    CHECK(rep.rank == 3);
    CHECK(rep.step_reached == 2);
    Point b = lie_bracket(h, 0, 1, v3(0.3, -0.2, 1.0));
    CHECK(b[0] == doctest::Approx(0.0));
    CHECK(b[1] == doctest::Approx(0.0));
    CHECK(b[2] == doctest::Approx(1.0));
    auto f3 = CarnotGroup::free_step2(3);
    CHECK(f3.dim() == 6);
    CHECK(f3.check_hormander(Point::Zero(6)).step_reached == 2);
    auto e = CarnotGroup::euclidean(2);
    CHECK(e.check_hormander(Point::Zero(2)).step_reached == 1);
}

TEST_CASE("gauge is homogeneous of degree one") {
    auto g = CarnotGroup::heisenberg1();
    Point x = v3(0.3, -0.7, 0.4);
    CHECK(g.gauge(g.dilate(3.0, x)) == doctest::Approx(3.0 * g.gauge(x)).epsilon(1e-12));
    CHECK(g.gauge(v3(0, 0, 1)) == doctest::Approx(1.0));
    auto e = CarnotGroup::euclidean(2);
    Point p(2);
    p << 3, 4;
    CHECK(e.gauge(p) == doctest::Approx(5.0));
}

TEST_CASE("group JSON round-trips and rejects malformed input") {
    auto g = CarnotGroup::heisenberg1();
    auto j = g.to_json();
    auto g2 = CarnotGroup::from_json(j);
    std::mt19937_64 rng(1);
    Point x = rand_point(rng, 3), y = rand_point(rng, 3);
    CHECK((g.compose(x, y) - g2.compose(x, y)).norm() == 0.0);

    auto bad = j;
    bad["layers"] = {2, 2};
    CHECK_THROWS_AS(CarnotGroup::from_json(bad), DomainError);

    // x3 coefficient of degree 2 in a sigma_3 - 1 = 1 slot breaks homogeneity
    auto inh = j;
    inh["fields"][0][2] = nlohmann::json::array({{{"c", 1.0}, {"e", {2, 0, 0}}}});
    CHECK_THROWS_AS(CarnotGroup::from_json(inh), DomainError);

    CHECK_THROWS_AS(CarnotGroup::from_name("nilpotent7"), DomainError);
}
