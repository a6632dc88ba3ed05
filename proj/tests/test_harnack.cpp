#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "carnot/errors.hpp"
#include "carnot/harnack.hpp"
#include "carnot/special.hpp"

using namespace carnot;

namespace {

Point pt(std::initializer_list<double> v) {
    Point p(static_cast<Eigen::Index>(v.size()));
    int i = 0;
    for (double x : v) p[i++] = x;
    return p;
}

}  // namespace

TEST_CASE("harnack boxes") {
    auto g = CarnotGroup::heisenberg1();
    SpaceTimePoint z0{Point::Zero(3), 0.0};
    auto b = build_boxes(g, z0, 1.0, 0.2, 0.4, 0.8, 0.5);
    CHECK(b.Q_plus.t_lo == doctest::Approx(-0.2));
    CHECK(b.Q_plus.t_hi == 0.0);
    CHECK(b.Q_minus.t_lo == doctest::Approx(-0.8));
    CHECK(b.Q_minus.t_hi == doctest::Approx(-0.4));
    CHECK(b.Q_plus.radius == 0.5);
    CHECK(b.D.t_lo == doctest::Approx(-0.25));
    CHECK(b.D.t_lo == b.D.t_hi);
    CHECK(b.D.radius == 0.5);

    auto h = build_boxes(g, z0, 0.5, 0.2, 0.4, 0.8, 0.5);
    CHECK(h.Q_minus.t_lo == doctest::Approx(0.25 * b.Q_minus.t_lo));
    CHECK(h.Q_minus.radius == doctest::Approx(0.5 * b.Q_minus.radius));
    CHECK(h.D.t_lo == doctest::Approx(0.25 * b.D.t_lo));

    // sub-boxes sit inside Q
    for (const auto& c : {b.Q_plus, b.Q_minus})
        for (const auto& z : sample_cylinder(g, c, 20)) {
            CHECK(z.t >= b.Q.t_lo);
            CHECK(z.t <= b.Q.t_hi);
        }

    CHECK_THROWS_AS(build_boxes(g, z0, 1.0, 0.4, 0.2, 0.8, 0.5), DomainError);
    CHECK_THROWS_AS(build_boxes(g, z0, 1.0, 0.2, 0.4, 1.2, 0.5), DomainError);
    CHECK_THROWS_AS(build_boxes(g, z0, 1.0, 0.2, 0.4, 0.8, 1.5), DomainError);
    CHECK_THROWS_AS(build_boxes(g, z0, -1.0, 0.2, 0.4, 0.8, 0.5), DomainError);
}

TEST_CASE("ball samples stay in the ball") {
    auto g = CarnotGroup::heisenberg1();
    Point c = pt({0.1, -0.2, 0.05});
    Cylinder cyl{c, 0.3, -0.5, -0.1};
    DistanceConfig dc;
    dc.restarts = 2;
    double far = 0.0;
    for (const auto& z : sample_cylinder(g, cyl, 40)) {
        const double d = cc_distance(g, c, z.x, dc).value;
        CHECK(d <= 0.3 + 1e-3);
        far = std::max(far, d);
        CHECK(in_cylinder(g, cyl, z, 1e-3, dc));
    }
    CHECK(far > 0.25);
    auto e = CarnotGroup::euclidean(2);
    for (const auto& z : sample_cylinder(e, {Point::Zero(2), 0.5, -1.0, 0.0}, 200)) CHECK(z.x.norm() <= 0.5 + 1e-12);
    CHECK_FALSE(in_cylinder(g, cyl, {c, 0.2}));
}

TEST_CASE("constants and chain-length bounds") {
    HarnackConstants c;
    c.k1 = 1.0;
    CHECK(theta0(c) == doctest::Approx(1.0 / 12.0));
    CHECK(r0(c) == doctest::Approx(0.5));
    c.gamma = 0.96;
    CHECK(r0(c) == doctest::Approx(0.2));
    c.gamma = 1.0;
    CHECK_THROWS_AS(r0(c), DomainError);
    c.gamma = 0.5;
    auto b = chain_length_bounds(c, 0.2, 0.4, 0.8);
    CHECK(b.first == doctest::Approx(16 * 0.25 / 0.2));
    CHECK(b.second == doctest::Approx(4 * 0.25 / 0.2));
    CHECK(b.time == doctest::Approx(0.8 / (0.25 * 0.25)));
    CHECK(b.m_bar == 20);
}

TEST_CASE("vertical chain") {
    auto g = CarnotGroup::heisenberg1();
    ChainConfig cfg;
    Point x = pt({0.02, 0.0, 0.001});
    auto ch = harnack_chain(g, {x, -0.1}, {x, -0.7}, cfg);
    CHECK(ch.m == static_cast<int>(std::ceil(0.6 / (0.25 * 0.25))));
    for (const auto& z : ch.points) CHECK((z.x - x).norm() < 1e-12);
    CHECK(ch.points.front().t == -0.1);
    CHECK(ch.points.back().t == doctest::Approx(-0.7));
    CHECK(ch.bound == doctest::Approx(std::pow(cfg.constants.C_P, ch.m)));
}

TEST_CASE("euclidean chain and the chain length formula") {
    auto g = CarnotGroup::euclidean(1);
    ChainConfig cfg;
    auto ch = harnack_chain(g, {pt({0.0}), -0.3}, {pt({0.3}), -0.7}, cfg);
    CHECK(ch.d == doctest::Approx(0.3).epsilon(1e-4));
    CHECK(ch.m_primam == doctest::Approx(0.25 * ch.d * ch.d / (0.25 * 0.4)));
    CHECK(ch.m == 7);  // the r <= r0 requirement dominates
    for (std::size_t j = 0; j < ch.gaps.size(); ++j) CHECK(ch.gaps[j] <= 0.5 * ch.r + 1e-3);
    CHECK(ch.points.back().x[0] == doctest::Approx(0.3));
    CHECK(ch.r * ch.r * 0.25 * ch.m == doctest::Approx(0.4));

    // a small theta1 makes the gap condition decisive: m is exactly its ceiling
    cfg.constants.theta1 = 0.1;
    auto tight = harnack_chain(g, {pt({-0.15}), -0.1}, {pt({0.15}), -0.3}, cfg);
    CHECK(tight.m_primam > tight.m_time);
    CHECK(tight.m == static_cast<int>(std::ceil(tight.m_primam)));

    // the gap requirement weakens as the time span grows
    int prev = 1 << 30;
    for (double dt : {0.1, 0.2, 0.4, 0.8}) {
        auto c = harnack_chain(g, {pt({-0.15}), -0.05}, {pt({0.15}), -0.05 - dt}, cfg);
        const int mp = static_cast<int>(std::ceil(c.m_primam));
        CHECK(mp <= prev);
        prev = mp;
    }
    CHECK_THROWS_AS(harnack_chain(g, {pt({0.0}), -0.7}, {pt({0.0}), -0.3}, cfg), DomainError);
}

TEST_CASE("chain validity on random pairs") {
    auto g = CarnotGroup::heisenberg1();
    ChainConfig cfg;
    const double th = theta0(cfg.constants);
    auto boxes = build_boxes(g, {Point::Zero(3), 0.0}, 1.0, 0.2, 0.4, 0.8, th);
    auto plus = sample_cylinder(g, boxes.Q_plus, 50, 3);
    auto minus = sample_cylinder(g, boxes.Q_minus, 50, 101);
    int checked = 0;
    for (int i = 0; i < 50; ++i) {
        auto ch = harnack_chain(g, plus[i], minus[i], cfg);
        REQUIRE(ch.gaps.size() == static_cast<std::size_t>(ch.m));
        for (int j = 0; j < ch.m; ++j) {
            CHECK(ch.gap_lengths[j] <= cfg.constants.theta1 * ch.r + cfg.tol);
            CHECK(ch.gaps[j] <= cfg.constants.theta1 * ch.r + cfg.tol);
        }
        for (double d : ch.origin_distances) CHECK(d <= 1.0);
        CHECK((ch.points.back().x - minus[i].x).norm() < 1e-12);
        ++checked;
    }
    CHECK(checked == 50);
}

TEST_CASE("parabolic harnack ratios and the fitted constant") {
    auto g = CarnotGroup::euclidean(1);
    HarnackConstants c;
    SpaceTimePoint z0{pt({0.0}), 0.0};
    auto one = [](const Point&, double) { return 1.0; };
    CHECK(parabolic_harnack_check(g, one, z0, 0.5, c).ratio == 1.0);

    auto u = pole_solution(g, {pt({0.0}), -1.0});
    auto rep = parabolic_harnack_check(g, u, z0, 0.5, c);
    CHECK(std::isfinite(rep.ratio));
    CHECK(rep.ratio > 1.0);  // the kernel grows backwards in time toward its pole

    std::vector<SolutionFn> cal, held;
    for (const auto& p : pole_family(g, z0, 1.0, 40, 1)) cal.push_back(pole_solution(g, p));
    for (const auto& p : pole_family(g, z0, 1.0, 20, 2)) held.push_back(pole_solution(g, p));
    auto fit = fit_parabolic_constant(g, cal, held, z0, 1.0, c);
    CHECK(fit.C_P >= 1.0);
    CHECK(std::isfinite(fit.C_P));
    CHECK(fit.heldout_max <= 1.5 * fit.C_P);
    CHECK(fit.C_P <= 2.0 * fit.heldout_max);

    auto neg = [](const Point& x, double) { return x[0]; };
    CHECK_THROWS_AS(parabolic_harnack_check(g, neg, z0, 0.5, c), DomainError);
}

TEST_CASE("chain bound composes along the chain") {
    auto g = CarnotGroup::euclidean(1);
    HarnackConstants c;
    SpaceTimePoint z0{pt({0.0}), 0.0};
    std::vector<SolutionFn> cal, held;
    for (const auto& p : pole_family(g, z0, 1.0, 40, 1)) cal.push_back(pole_solution(g, p));
    c.C_P = fit_parabolic_constant(g, cal, {}, z0, 1.0, c).C_P;
    ChainConfig cfg;
    cfg.constants = c;
    auto boxes = build_boxes(g, z0, 1.0, 0.2, 0.4, 0.8, 0.5);
    auto plus = sample_cylinder(g, boxes.Q_plus, 10, 7);
    auto minus = sample_cylinder(g, boxes.Q_minus, 10, 77);
    auto tests = pole_family(g, z0, 1.0, 10, 99);
    for (int i = 0; i < 10; ++i) {
        auto ch = harnack_chain(g, plus[i], minus[i], cfg);
        for (const auto& p : tests) {
            auto comp = compose_along_chain(ch, pole_solution(g, p), c.C_P);
            CHECK(comp.max_step <= c.C_P);
            CHECK(comp.within_bound);
        }
    }
}

TEST_CASE("invariant harnack ratios") {
    auto g = CarnotGroup::euclidean(2);
    SpaceTimePoint z0{Point::Zero(2), 0.0};
    auto one = [](const Point&, double) { return 1.0; };
    auto b1 = build_boxes(g, z0, 0.5, 0.2, 0.4, 0.8, 0.5);
    auto r1 = invariant_harnack_check(g, one, b1, 1.0);
    CHECK(r1.ratio == 1.0);
    CHECK(r1.pass);

    // the worst ratio over a pole family is the same at both scales
    double worst[2] = {0.0, 0.0};
    int k = 0;
    for (double r : {0.25, 0.5}) {
        auto b = build_boxes(g, z0, r, 0.2, 0.4, 0.8, 0.5);
        for (const auto& p : pole_family(g, z0, r, 20, 5)) {
            auto rep = invariant_harnack_check(g, pole_solution(g, p), b, 1e6);
            CHECK(rep.pass);
            worst[k] = std::max(worst[k], rep.ratio);
        }
        ++k;
    }
    CHECK(worst[0] == doctest::Approx(worst[1]).epsilon(0.05));

    auto h = CarnotGroup::heisenberg1();
    SpaceTimePoint h0{Point::Zero(3), 0.0};
    auto bh = build_boxes(h, h0, 0.5, 0.2, 0.4, 0.8, 0.5);
    for (const auto& p : pole_family(h, h0, 0.5, 5, 3)) {
        auto rep = invariant_harnack_check(h, pole_solution(h, p), bh, 1e6, 500);
        CHECK(std::isfinite(rep.ratio));
        CHECK(rep.inf_plus > 0.0);
    }
    CHECK_FALSE(invariant_harnack_check(g, pole_solution(g, {Point::Zero(2), -0.3}), b1, 1.0).pass);
}

TEST_CASE("admissible paths") {
    auto e = CarnotGroup::euclidean(2);
    SpaceTimePoint z{pt({0.1, 0.2}), 0.5};
    auto still = admissible_reach(e, z, [](double) { return Eigen::VectorXd::Zero(2).eval(); }, 0.4, 8);
    CHECK((still.points.back().x - z.x).norm() == 0.0);
    CHECK(still.points.back().t == doctest::Approx(0.1));
    auto line = admissible_reach(e, z, [](double) { return Eigen::Vector2d(1.0, 0.0).eval(); }, 0.3, 6);
    for (std::size_t k = 0; k < line.points.size(); ++k) {
        const double s = 0.05 * k;
        CHECK(line.points[k].x[0] == doctest::Approx(0.1 + s));
        CHECK(line.points[k].x[1] == doctest::Approx(0.2));
        CHECK(line.points[k].t == doctest::Approx(0.5 - s));
    }

    auto h = CarnotGroup::heisenberg1();
    const double pi = std::numbers::pi;
    ControlFn circle = [pi](double s) { return Eigen::Vector2d(std::cos(2 * pi * s), std::sin(2 * pi * s)).eval(); };
    SpaceTimePoint o{Point::Zero(3), 0.0};
    auto coarse = admissible_reach(h, o, circle, 1.0, 32);
    auto fine = admissible_reach(h, o, circle, 1.0, 64);
    // a closed horizontal loop of length 1 encloses area 1 / (4 pi)
    CHECK(std::abs(fine.points.back().x[0]) < 1e-6);
    CHECK(fine.points.back().x[2] == doctest::Approx(1.0 / (4 * pi)).epsilon(1e-6));
    CHECK(std::abs(coarse.points.back().x[2] - fine.points.back().x[2]) < 1e-5);

    auto cut = admissible_reach(e, z, [](double) { return Eigen::Vector2d(1.0, 0.0).eval(); }, 1.0, 10,
                                [](const SpaceTimePoint& p) { return p.x[0] < 0.5; });
    CHECK(cut.truncated);
    CHECK(cut.points.back().x[0] < 0.5);
}

TEST_CASE("maximum principle probe") {
    auto op = operator_from_json({{"group", "heisenberg1"}, {"A", 1.0}});
    SpaceTimePoint zeta{Point::Zero(3), 0.0};
    auto one = [](const Point&, double) { return 1.0; };
    auto rep = max_principle_probe(op, one, nullptr, zeta, nullptr);
    CHECK(rep.max_deviation == 0.0);
    CHECK(rep.reached > 0);
    CHECK(rep.c_nonpositive);
    CHECK(rep.divergence_condition);

    auto damped = operator_from_json({{"group", "heisenberg1"}, {"A", 1.0}, {"c", -1.0}});
    auto minus_one = [](const Point&, double) { return -1.0; };
    rep = max_principle_probe(damped, one, minus_one, zeta, nullptr);
    CHECK(rep.max_deviation == 0.0);
    CHECK(rep.max_source_mismatch == 0.0);
    CHECK_FALSE(rep.f_nonnegative);

    auto caloric = [](const Point& x, double) { return x[0]; };
    rep = max_principle_probe(op, caloric, nullptr, zeta, nullptr);
    CHECK(rep.max_deviation > 0.01);

    auto box = [](const SpaceTimePoint& p) { return p.x.norm() < 0.05; };
    rep = max_principle_probe(op, one, nullptr, zeta, box);
    CHECK(rep.truncated_paths > 0);
}
