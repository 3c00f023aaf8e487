#include <cmath>
#include <random>

#include "doctest.h"
#include "lem/commitment.hpp"

using namespace lem::commitment;

TEST_CASE("raw error bracket") {
    CHECK(raw_error(13.0, 10.0, 2.0) == doctest::Approx(1.0));
    CHECK(raw_error(10.0, 10.0, 2.0) == doctest::Approx(-2.0));
    CHECK(raw_error(12.0, 10.0, 2.0) == doctest::Approx(0.0));
    CHECK(raw_error(7.5, 10.0, 2.0) == doctest::Approx(0.5));
    CHECK(raw_error(-3.0, -3.0, 0.0) == 0.0);
    CHECK_THROWS(raw_error(0.0, 0.0, -1.0));

    // Inside the band the value equals minus the distance to the nearest edge.
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-50.0, 50.0), w(0.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const double sp = u(rng), hw = w(rng), a = u(rng);
        const double lo = sp - hw, hi = sp + hw;
        const double expect = a > hi ? a - hi : (a < lo ? lo - a : -std::min(a - lo, hi - a));
        CHECK(raw_error(a, sp, hw) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("update with all DCAs on setpoint leaves scores unchanged") {
    CommitmentLedger led({1, 2, 3});
    std::vector<Schedule> s{{1, 10, 0, 1, 0}, {2, -4, 0, 0, 0}, {3, 7, 0, -2, 0}};
    std::vector<Response> a{{10, 1}, {-4, 0}, {7, -2}};
    led = update_scores(led, s, a);
    for (double c : led.scores()) CHECK(c == 1.0);
    REQUIRE(led.history().size() == 1);
    for (double e : led.history()[0].norm_P) CHECK(e == 0.0);
}

TEST_CASE("one violator and one complier") {
    // Scores start below 1 so the complier's increase is visible.
    CommitmentLedger led({1, 2});
    std::vector<Schedule> s{{1, 10, 0, 0, 0}, {2, 10, 2, 0, 0}};
    std::vector<Response> a{{11, 0}, {10, 0}};
    // Worked by hand: normalized P errors (0.1, -0.2) / sqrt(0.05).
    const double n = std::sqrt(0.1 * 0.1 + 0.2 * 0.2);
    const double e1 = 0.1 / n, e2 = -0.2 / n;
    auto e = normalized_errors(std::vector<double>{1.0, -2.0}, std::vector<double>{10.0, 10.0});
    CHECK(e[0] == doctest::Approx(e1));
    CHECK(e[1] == doctest::Approx(e2));

    led = update_scores(led, s, a);
    CHECK(led.score(1) == doctest::Approx(1.0 - 0.5 * e1));
    CHECK(led.score(2) == 1.0);  // clamped from above
    const auto& h = led.history().back();
    CHECK(h.norm_P[0] > 0.0);
    CHECK(h.norm_P[1] < 0.0);

    // Second step from a lowered score: the complier rises.
    std::vector<Schedule> s2{{1, 10, 2, 0, 0}, {2, 10, 0, 0, 0}};
    std::vector<Response> a2{{10, 0}, {11, 0}};
    const double before = led.score(1);
    led = update_scores(led, s2, a2);
    CHECK(led.score(1) > before);
    CHECK(led.score(2) < 1.0);
}

TEST_CASE("score clamps at zero") {
    CommitmentLedger led({1, 2});
    std::vector<Schedule> s{{1, 10, 0, 10, 0}, {2, 10, 0, 10, 0}};
    std::vector<Response> a{{100, 100}, {10, 10}};
    for (int k = 0; k < 3; ++k) led = update_scores(led, s, a);
    CHECK(led.score(1) == 0.0);
    CHECK(led.score(2) == 1.0);
}

TEST_CASE("zero setpoint guard") {
    ScoreGuards g;
    auto e = normalized_errors(std::vector<double>{0.5, 0.0}, std::vector<double>{0.0, 5.0}, g);
    CHECK(e[0] == doctest::Approx(1.0));
    CHECK(e[1] == 0.0);
    // Tiny setpoints use the floor of 1 kW.
    auto e2 = normalized_errors(std::vector<double>{0.5, 1.0}, std::vector<double>{1e-5, 2.0}, g);
    CHECK(e2[0] == doctest::Approx(e2[1]));
}

TEST_CASE("normalized direction is scale invariant") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-5.0, 5.0), k(0.01, 1000.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> raw(5), sp(5);
        for (auto& v : raw) v = u(rng);
        for (auto& v : sp) v = 10.0 * u(rng);
        const double s = k(rng);
        std::vector<double> scaled(raw);
        for (auto& v : scaled) v *= s;
        auto a = normalized_errors(raw, sp);
        auto b = normalized_errors(scaled, sp);
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
    }
}

TEST_CASE("reward and penalty signs") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 2 + t % 4;
        std::vector<int> ids;
        std::vector<Schedule> s;
        std::vector<Response> a;
        std::vector<int> inside;
        for (std::size_t j = 0; j < n; ++j) {
            ids.push_back(static_cast<int>(j));
            const double sp = (u(rng) - 0.6) * 40.0, hw = 0.1 + 3.0 * u(rng);
            const double qsp = (u(rng) - 0.5) * 10.0, qhw = 0.1 + u(rng);
            s.push_back({static_cast<int>(j), sp, hw, qsp, qhw});
            const bool in = u(rng) < 0.5;
            inside.push_back(in);
            if (in) {
                a.push_back({sp + (2 * u(rng) - 1) * 0.99 * hw, qsp + (2 * u(rng) - 1) * 0.99 * qhw});
            } else {
                const double side = u(rng) < 0.5 ? -1.0 : 1.0;
                a.push_back({sp + side * (hw + 0.1 + u(rng)), qsp + side * (qhw + 0.1 + u(rng))});
            }
        }
        CommitmentLedger led(ids);
        led = update_scores(led, s, a);
        const auto& h = led.history().back();
        for (std::size_t j = 0; j < n; ++j) {
            const double contribution = -0.5 * (h.norm_P[j] + h.norm_Q[j]);
            if (inside[j]) {
                CHECK(contribution >= 0.0);
            } else {
                CHECK(contribution < 0.0);
            }
        }
    }
}

TEST_CASE("simulated responses") {
    SUBCASE("follow with no noise hits the setpoint") {
        ResponseModel m{{{1.0, 0.5, 0.0}}, 9};
        std::vector<Schedule> s{{1, 10.0, 2.0, -3.0, 1.0}};
        auto r = simulate_response(m, s, 17);
        CHECK(r[0].P == 10.0);
        CHECK(r[0].Q == -3.0);
    }
    SUBCASE("violation distance") {
        ResponseModel m{{{0.0, 0.5, 0.0}}, 9};
        std::vector<Schedule> s{{1, 10.0, 2.0, 0.0, 1.0}};
        for (std::uint64_t step = 0; step < 50; ++step) {
            auto r = simulate_response(m, s, step);
            const double edge = r[0].P > 10.0 ? 12.0 : 8.0;
            CHECK(std::abs(r[0].P - edge) == doctest::Approx(1.0));
        }
    }
    SUBCASE("uniform in band") {
        ResponseModel m{{{1.0, 0.5, 1.0}}, 1};
        std::vector<Schedule> s{{4, -20.0, 4.0, 2.0, 0.5}};
        double lo = 1e9, hi = -1e9;
        for (std::uint64_t step = 0; step < 2000; ++step) {
            auto r = simulate_response(m, s, step);
            CHECK(std::abs(r[0].P + 20.0) <= 4.0);
            lo = std::min(lo, r[0].P);
            hi = std::max(hi, r[0].P);
        }
        CHECK(lo < -23.8);
        CHECK(hi > -16.2);
    }
    SUBCASE("deterministic") {
        ResponseModel m{{{0.7, 0.5, 1.0}, {0.3, 1.0, 0.2}}, 42};
        std::vector<Schedule> s{{1, 10.0, 2.0, 1.0, 0.5}, {2, -7.0, 1.0, 0.0, 0.0}};
        for (std::uint64_t step = 0; step < 20; ++step) {
            auto a = simulate_response(m, s, step, 3);
            auto b = simulate_response(m, s, step, 3);
            CHECK(a[0].P == b[0].P);
            CHECK(a[1].Q == b[1].Q);
        }
        ResponseModel other = m;
        other.seed = 43;
        bool differs = false;
        for (std::uint64_t step = 0; step < 20; ++step) {
            differs |= simulate_response(m, s, step, 3)[0].P != simulate_response(other, s, step, 3)[0].P;
        }
        CHECK(differs);
    }
}

TEST_CASE("faithful DCA never falls below a defaulting twin") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        ResponseModel m{{{1.0, 0.5, 1.0}, {0.0, 0.5, 1.0}, {0.8, 0.5, 1.0}}, seed};
        CommitmentLedger led({1, 2, 3});
        for (std::uint64_t step = 0; step < 100; ++step) {
            std::vector<Schedule> s;
            const double sp = -5.0 - 20.0 * u(rng), hw = 2.0 * u(rng);
            for (int id = 1; id <= 3; ++id) s.push_back({id, sp, hw, 0.3 * sp, 0.3 * hw});
            led = update_scores(led, s, simulate_response(m, s, step));
            CHECK(led.score(1) >= led.score(2));
            for (double c : led.scores()) CHECK((c >= 0.0 && c <= 1.0));
        }
        CHECK(led.score(1) == 1.0);
    }
}
