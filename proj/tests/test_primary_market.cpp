#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "lem/primary_market.hpp"
#include "pm_fixtures.hpp"

using namespace lem;
using namespace lem::pm;

using namespace lem::fixtures;

TEST_CASE("two-bus program layout") {
    auto net = feeder(2, {{0, 1, 0.01, 0.02, 5.0}});
    std::vector<SmoBid> bids{load_bid(1, 1.0, 0.5, 1.5)};
    auto m = assemble_opf(net, bids, lmp_from_p(0.05));
    CHECK(m.program.num_variables() == 13);
    CHECK(m.program.cone_constraints().size() == 2);
    for (const char* name : {"balance.P.0", "balance.Q.0", "balance.P.1", "balance.Q.1"}) {
        CHECK(m.program.find_constraint(name).has_value());
    }
    CHECK(m.program.find_constraint("relax.0-1").has_value());
    CHECK(m.program.find_constraint("thermal.0-1").has_value());

    // Linear price only at the PCC, squares only at the SMO node.
    const auto& obj = m.program.objective();
    for (const auto& t : obj.linear().terms()) {
        const auto& name = m.program.variable({t.var}).name;
        CHECK((name == "PG.0" || name == "QG.0" || name == "l.0-1"));
    }
    for (const auto& sq : obj.squares()) {
        for (const auto& t : sq.expr.terms()) CHECK(m.program.variable({t.var}).name.ends_with(".1"));
    }

    auto m0 = assemble_opf(net, bids, lmp_from_p(0.05), 0.0);
    for (const auto& t : m0.program.objective().linear().terms()) {
        CHECK(m0.program.variable({t.var}).name != "l.0-1");
    }
}

TEST_CASE("bid validation") {
    auto net = feeder(3, {{0, 1, 0.01, 0.02, 5.0}, {1, 2, 0.01, 0.02, 5.0}});
    std::vector<SmoBid> one{load_bid(1, 1.0, 0.5, 1.5)};
    CHECK_THROWS_AS(assemble_opf(net, one, lmp_from_p(0.05)), MissingBid);
    std::vector<SmoBid> stray{load_bid(1, 1.0, 0.5, 1.5), load_bid(2, 1.0, 0.5, 1.5), load_bid(7, 1.0, 0.5, 1.5)};
    CHECK_THROWS_AS(assemble_opf(net, stray, lmp_from_p(0.05)), MissingBid);
    std::vector<SmoBid> base{load_bid(1, 1.0, 0.5, 1.5), load_bid(2, 1.0, 0.5, 1.5)};
    base[1].s_base_mva = 10.0;
    CHECK_THROWS_AS(assemble_opf(net, base, lmp_from_p(0.05)), InconsistentBase);
    std::vector<SmoBid> bad{load_bid(1, 1.0, 0.5, 1.5), load_bid(2, 2.0, 0.5, 1.5)};
    CHECK_THROWS_AS(assemble_opf(net, bad, lmp_from_p(0.05)), std::invalid_argument);
    CHECK_THROWS(assemble_opf(net, base, lmp_from_p(0.05), -1.0));
}

TEST_CASE("lossless feeder prices uniformly at the wholesale price") {
    auto net = feeder(2, {{0, 1, 0.0, 0.0, 5.0}});
    std::vector<SmoBid> bids{load_bid(1, 1.0, 0.5, 1.5)};
    auto c = clear_pm(net, bids, lmp_from_p(0.05));
    CHECK(c.node(0).dlmp_P == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(c.node(1).dlmp_P == doctest::Approx(0.05).epsilon(1e-6));
    // Disutility stationarity: 2 beta (PL - PL0) = -price in $/(pu h).
    CHECK(c.node(1).PL == doctest::Approx(1.0 - 0.05 * 1000.0 / 200.0).epsilon(1e-4));
    CHECK(c.P_pcc == doctest::Approx(c.node(1).PL).epsilon(1e-6));
    CHECK(c.losses_P == doctest::Approx(0.0));
}

TEST_CASE("loss pricing rises with resistance") {
    double prev = 0.0;
    std::vector<double> prices;
    for (double r : {0.0, 0.005, 0.01, 0.02}) {
        auto net = feeder(2, {{0, 1, r, 0.01, 5.0}});
        std::vector<SmoBid> bids{load_bid(1, 1.0, 0.5, 1.5)};
        auto c = clear_pm(net, bids, lmp_from_p(0.05));
        CAPTURE(r);
        CHECK(c.node(1).dlmp_P >= prev - 1e-9);
        CHECK(c.node(0).dlmp_P == doctest::Approx(0.05).epsilon(1e-6));
        if (r > 0.0) CHECK(c.node(1).dlmp_P > 0.05);
        prev = c.node(1).dlmp_P;
        prices.push_back(prev);
    }
    CHECK(prices.back() > prices.front());
}

TEST_CASE("reported prices match objective finite differences") {
    // 5-node feeder with a branch: 0-1-2, 1-3-4.
    auto net = feeder(5, {{0, 1, 0.004, 0.008, 5.0},
                          {1, 2, 0.010, 0.012, 3.0},
                          {1, 3, 0.006, 0.010, 3.0},
                          {3, 4, 0.012, 0.010, 2.0}});
    std::vector<SmoBid> bids{load_bid(1, 0.4, 0.2, 0.6, 40.0), load_bid(2, 0.6, 0.3, 0.9, 60.0),
                             load_bid(3, 0.3, 0.1, 0.5, 30.0), load_bid(4, 0.5, 0.2, 0.8, 50.0)};
    bids[3].PG = {0.0, 0.4};
    bids[3].QG = {-0.1, 0.1};
    bids[1].alpha_P = 4.0;
    bids[1].PG = {0.0, 0.2};

    for (double lam : {0.03, 0.08}) {
        const auto checks = finite_difference_prices(net, bids, lmp_from_p(lam));
        CHECK(checks.size() == 5);
        for (const auto& pc : checks) {
            CAPTURE(pc.node);
            CAPTURE(lam);
            CAPTURE(pc.reported);
            CAPTURE(pc.finite_difference);
            CHECK(pc.ok());
            if (pc.node == 0) CHECK(pc.reported == doctest::Approx(lam).epsilon(1e-6));
        }
    }
}

TEST_CASE("power conservation and exactness on random radial feeders") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 15; ++trial) {
        const int n = 3 + trial % 6;
        std::vector<Branch> br;
        for (int i = 1; i < n; ++i) {
            const int parent = static_cast<int>(u(rng) * i);
            br.push_back({parent, i, 0.002 + 0.01 * u(rng), 0.002 + 0.01 * u(rng), 5.0});
        }
        auto net = feeder(n, br);
        std::vector<SmoBid> bids;
        for (int i = 1; i < n; ++i) {
            const double pl0 = 0.05 + 0.3 * u(rng);
            auto b = load_bid(i, pl0, 0.5 * pl0, 1.5 * pl0, 20.0 + 80.0 * u(rng));
            if (u(rng) < 0.4) {
                b.PG = {0.0, 0.3 * u(rng)};
                b.alpha_P = 4.0 + 4.0 * u(rng);
                b.alpha_Q = 0.1 * b.alpha_P;
            }
            bids.push_back(b);
        }
        const double lam = 0.02 + 0.1 * u(rng);
        auto c = clear_pm(net, bids, lmp_from_p(lam));
        double sum_p = 0.0, sum_q = 0.0;
        for (const auto& nd : c.nodes) {
            sum_p += nd.P_net;
            sum_q += nd.Q_net;
        }
        for (const auto& ln : c.lines) {
            sum_p -= line_r(net, ln.to) * ln.l;
            sum_q -= line_x(net, ln.to) * ln.l;
        }
        CAPTURE(trial);
        CHECK(std::abs(sum_p) <= 1e-6);
        CHECK(std::abs(sum_q) <= 1e-6);
        for (const auto& nd : c.nodes) {
            const auto& node = net.node(nd.id);
            CHECK(nd.v_sq >= node.v_min_sq - 1e-7);
            CHECK(nd.v_sq <= node.v_max_sq + 1e-7);
        }
        const auto rep = check_socp_exactness(c);
        CHECK(rep.flagged.empty());
        CHECK(rep.min_gap >= -1e-6);
        CHECK(rep.max_gap <= 1e-5);
        CHECK(c.node(0).dlmp_P == doctest::Approx(lam).epsilon(1e-6));
    }
}

TEST_CASE("thermal cap below the minimum load is reported") {
    auto net = feeder(2, {{0, 1, 0.01, 0.02, 0.5}});
    std::vector<SmoBid> bids{load_bid(1, 1.0, 1.0, 1.0)};
    try {
        (void)clear_pm(net, bids, lmp_from_p(0.05));
        FAIL("expected an infeasible clearing");
    } catch (const Infeasible& e) {
        const auto& v = e.violating();
        CHECK(std::any_of(v.begin(), v.end(), [](const std::string& s) { return s == "thermal.0-1"; }));
    }
}

TEST_CASE("three-node clearing beats every gridded operating point") {
    const ThreeNodeCase tc;
    const auto c = clear_pm(tc.net, tc.bids, tc.lambda, tc.xi);
    const auto g = grid_search(tc);
    REQUIRE(std::isfinite(g.best));
    CHECK(c.objective <= g.best + 1e-6);
    CHECK(g.best - c.objective <= g.bound + 1e-6);
    CHECK(std::abs(c.node(1).PL - g.arg[0]) <= 2.0 * g.half_cell[0] + 1e-6);
    CHECK(std::abs(c.node(2).PL - g.arg[1]) <= 2.0 * g.half_cell[1] + 1e-6);
    CHECK(std::abs(c.node(2).PG - g.arg[2]) <= 2.0 * g.half_cell[2] + 1e-6);
}

TEST_CASE("exactness checker arithmetic") {
    PmClearing c;
    c.nodes = {{0, 0, 0, 0, 0, 0, 0, 1.0, 0, 0}, {1, 0, 0, 0, 0, 0, 0, 0.98, 0, 0}};
    c.lines = {{0, 1, 0.6, 0.2, (0.36 + 0.04) / 0.98, 0.0}};
    auto r = check_socp_exactness(c);
    CHECK(r.gaps[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.flagged.empty());
    c.lines[0].l += 0.1;
    r = check_socp_exactness(c);
    CHECK(r.gaps[0] == doctest::Approx(0.1 * 0.98));
    CHECK(r.flagged.size() == 1);
    c.lines[0] = {0, 1, 0.0, 0.0, 0.0, 0.0};
    CHECK(check_socp_exactness(c).gaps[0] == 0.0);
}

TEST_CASE("generation cost follows the weighted retail tariff") {
    AlphaState s;
    std::vector<TariffSample> flat(5, {0.1, 3.0});
    CHECK(update_alpha(s, flat) == doctest::Approx(6.1));
    CHECK(s.alpha_var == doctest::Approx(0.1));

    std::vector<TariffSample> w{{0.1, 10.0}, {0.2, 30.0}};
    CHECK(injection_weighted_tariff(w) == doctest::Approx(0.175));
    CHECK(update_alpha(s, w) == doctest::Approx(6.175));

    std::vector<TariffSample> idle{{0.3, 0.0}, {0.2, 0.0}};
    CHECK_THROWS_AS(injection_weighted_tariff(idle), EmptyWindow);
    CHECK(update_alpha(s, idle) == doctest::Approx(6.175));
    CHECK(update_alpha(s, {}) == doctest::Approx(6.175));
    CHECK(s.history.size() == 4);
}
