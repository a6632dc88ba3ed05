#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "carnot/distance.hpp"
#include "carnot/errors.hpp"

using namespace carnot;

namespace {

Point v3(double a, double b, double c) {
    Point p(3);
    p << a, b, c;
    return p;
}

// Unit-time horizontal curve whose heading turns at rate k1 then k2; returns endpoint of the unit-speed lift.
Eigen::Vector3d two_arc_endpoint(double th0, double k1, double k2, double ts) {
    const int n = 4000;
    double x = 0, y = 0, a = 0;
    for (int i = 0; i < n; ++i) {
        double t = (i + 0.5) / n;
        double th = t < ts ? th0 + k1 * t : th0 + k1 * ts + k2 * (t - ts);
        double dx = std::cos(th) / n, dy = std::sin(th) / n;
        double xm = x + 0.5 * dx, ym = y + 0.5 * dy;
        a += 0.5 * (xm * dy - ym * dx);
        x += dx;
        y += dy;
    }
    return {x, y, a};
}

// Brute-force oracle for d(0, (0,0,1)) over two-arc controls: the path must close
// horizontally; the speed L then scales the enclosed area to L^2 * a = 1.
double two_arc_vertical_oracle() {
    auto objective = [](double k1, double k2, double ts) {
        Eigen::Vector3d e = two_arc_endpoint(0.0, k1, k2, ts);
        if (e[2] <= 1e-6) return 1e9;
        double len = 1.0 / std::sqrt(e[2]);
        return len + 1e4 * len * (e[0] * e[0] + e[1] * e[1]);
    };
    double best = 1e18, bk1 = 0, bk2 = 0, bts = 0.5;
    for (double k1 = 1.0; k1 <= 12.0; k1 += 0.5)
        for (double k2 = 1.0; k2 <= 12.0; k2 += 0.5)
            for (double ts = 0.1; ts <= 0.9; ts += 0.1) {
                double v = objective(k1, k2, ts);
                if (v < best) best = v, bk1 = k1, bk2 = k2, bts = ts;
            }
    double step = 0.25;
    for (int it = 0; it < 2000 && step > 1e-9; ++it) {
        bool moved = false;
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b)
                for (int c = -1; c <= 1; ++c) {
                    double k1 = bk1 + a * step, k2 = bk2 + b * step;
                    double ts = std::clamp(bts + c * step * 0.1, 0.01, 0.99);
                    double v = objective(k1, k2, ts);
                    if (v < best) best = v, bk1 = k1, bk2 = k2, bts = ts, moved = true;
                }
        if (!moved) step *= 0.5;
    }
    return best;
}

}  // namespace

TEST_CASE("euclidean distance is the straight-line length") {
    auto g = CarnotGroup::euclidean(2);
    Point a(2), b(2);
    a << 0, 0;
    b << 3, 4;
    auto r = cc_distance(g, a, b);
    CHECK(std::abs(r.value - 5.0) < 1e-4);
    CHECK(r.converged);
    CHECK((r.trajectory.path.row(r.trajectory.path.rows() - 1).transpose() - b).norm() < 1e-8);
}

TEST_CASE("horizontal heisenberg distance") {
    auto g = CarnotGroup::heisenberg1();
    auto r = cc_distance(g, v3(0, 0, 0), v3(1, 0, 0));
    CHECK(std::abs(r.value - 1.0) < 1e-4);
    CHECK(r.trajectory.cost_p1 <= r.trajectory.cost_p2 + 1e-12);
}

TEST_CASE("vertical heisenberg distance against the two-arc oracle") {
    auto g = CarnotGroup::heisenberg1();
    const double oracle = two_arc_vertical_oracle();
    // frozen value of the same search
    CHECK(oracle == doctest::Approx(3.5449077).epsilon(2e-5));
    auto r = cc_distance(g, v3(0, 0, 0), v3(0, 0, 1));
    // piecewise-constant controls can only be longer; 32 segments lose ~0.2%
    CHECK(r.value >= oracle - 1e-4);
    CHECK(r.value <= oracle * 1.005);
    DistanceConfig fine;
    fine.segments = 96;
    auto rf = cc_distance(g, v3(0, 0, 0), v3(0, 0, 1), fine);
    CHECK(rf.value >= oracle - 1e-4);
    CHECK(rf.value <= oracle * 1.0006);
    CHECK(std::abs(rf.trajectory.cost_p1 - rf.trajectory.cost_p2) < 1e-6);
}

TEST_CASE("certificate reaches the target and costs match the value") {
    auto g = CarnotGroup::heisenberg1();
    Point x = v3(0.2, -0.4, 0.1), y = v3(-0.5, 0.3, 0.7);
    auto r = cc_distance(g, x, y);
    Point end = integrate_controls(g, x, r.trajectory.controls, 4).bottomRows(1).transpose();
    CHECK((end - y).norm() < 1e-8);
    CHECK(r.value == doctest::Approx(r.trajectory.cost_p2));
    DistanceConfig c1;
    c1.p = CostNorm::L1;
    auto r1 = cc_distance(g, x, y, c1);
    CHECK(r1.value == doctest::Approx(r1.trajectory.cost_p1));
    CHECK(std::abs(r1.value - r.value) < 2e-4);
}

TEST_CASE("metric properties on random heisenberg points") {
    auto g = CarnotGroup::heisenberg1();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    DistanceConfig cfg;
    for (int s = 0; s < 6; ++s) {
        Point x = v3(u(rng), u(rng), u(rng)), y = v3(u(rng), u(rng), u(rng)), w = v3(u(rng), u(rng), u(rng));
        double dxy = cc_distance(g, x, y, cfg).value, dyx = cc_distance(g, y, x, cfg).value;
        CHECK(std::abs(dxy - dyx) <= 2 * cfg.tol);
        double dxw = cc_distance(g, x, w, cfg).value, dyw = cc_distance(g, y, w, cfg).value;
        CHECK(dxw <= dxy + dyw + 3 * cfg.tol);
        double r = 0.5 + std::abs(u(rng));
        double ds = cc_distance(g, g.dilate(r, x), g.dilate(r, y), cfg).value;
        CHECK(std::abs(ds - r * dxy) <= 3 * cfg.tol * std::max(1.0, r));
        // left invariance
        double dl = cc_distance(g, g.compose(w, x), g.compose(w, y), cfg).value;
        CHECK(std::abs(dl - dxy) <= 3 * cfg.tol);
    }
}

TEST_CASE("same seed gives the same certificate") {
    auto g = CarnotGroup::heisenberg1();
    DistanceConfig cfg;
    cfg.seed = 42;
    auto a = cc_distance(g, v3(0, 0, 0), v3(0.3, 0.1, -0.4), cfg);
    auto b = cc_distance(g, v3(0, 0, 0), v3(0.3, 0.1, -0.4), cfg);
    CHECK(a.value == b.value);
    CHECK((a.trajectory.controls - b.trajectory.controls).norm() == 0.0);
}

TEST_CASE("distance rejects bad input") {
    auto g = CarnotGroup::heisenberg1();
    Point bad(2);
    bad << 0, 0;
    CHECK_THROWS_AS(cc_distance(g, bad, v3(0, 0, 1)), DomainError);
    CHECK_THROWS_AS(cc_distance(g, v3(0, 0, NAN), v3(0, 0, 1)), DomainError);
    CHECK_THROWS_AS(cost_norm_from_string("3"), DomainError);
}

TEST_CASE("equivalence constants bracket the gauge") {
    auto g = CarnotGroup::heisenberg1();
    DistanceConfig cfg;
    cfg.restarts = 4;
    auto ec = equivalence_constants(g, 12, 7, cfg);
    CHECK(ec.c_low > 0.0);
    CHECK(ec.c_high >= ec.c_low);
    CHECK(ec.k1_fit >= 1.0);
    auto eu = equivalence_constants(CarnotGroup::euclidean(2), 10, 7);
    CHECK(eu.c_low == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(eu.c_high == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(eu.k1_fit == doctest::Approx(1.0));
}
