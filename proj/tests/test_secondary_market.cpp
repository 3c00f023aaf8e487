#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "lem/secondary_market.hpp"

using namespace lem::sm;

namespace {

constexpr double kDt = 1.0 / 60.0;

BudgetLedger generous() {
    BudgetLedger l;
    l.mode = BudgetMode::quasi_multiperiod;
    l.credit({1e6, 1e6});
    return l;
}

DcaBid load_bid(int id, double p0, double lo, double hi) {
    DcaBid b;
    b.dca_id = id;
    b.P0 = p0;
    b.P_lo = lo;
    b.P_hi = hi;
    b.Q0 = b.Q_lo = b.Q_hi = 0.0;
    return b;
}

DcaBid random_bid(std::mt19937_64& rng, int id) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    DcaBid b;
    b.dca_id = id;
    b.P0 = (u(rng) < 0.6 ? -1.0 : 1.0) * (1.0 + 40.0 * u(rng));
    b.Q0 = 0.3 * b.P0 * u(rng);
    auto band = [&](double p0, double& lo, double& hi) {
        const double a = p0 * (1.0 - 0.5 * u(rng)), c = p0 * (1.0 + 0.5 * u(rng));
        lo = std::min(a, c);
        hi = std::max(a, c);
    };
    band(b.P0, b.P_lo, b.P_hi);
    band(b.Q0, b.Q_lo, b.Q_hi);
    b.beta_P = 0.1 + 0.9 * u(rng);
    b.beta_Q = 0.1 + 0.9 * u(rng);
    return b;
}

PQ random_setpoint(std::mt19937_64& rng, const std::vector<DcaBid>& bids) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    PQ lo, hi;
    for (const auto& b : bids) {
        lo.P += b.P_lo, hi.P += b.P_hi, lo.Q += b.Q_lo, hi.Q += b.Q_hi;
    }
    return {lo.P + u(rng) * (hi.P - lo.P), lo.Q + u(rng) * (hi.Q - lo.Q)};
}

// Stage objectives evaluated from a clearing, with the cost stage priced
// exactly from the reported tariffs.
std::array<double, 4> objectives(const std::vector<DcaBid>& bids, const std::vector<double>& scores,
                                 const SmClearing& c) {
    std::array<double, 4> f{};
    for (std::size_t j = 0; j < bids.size(); ++j) {
        const auto& d = c.dcas[j];
        const auto& b = bids[j];
        auto sg = [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); };
        f[0] -= scores[j] * (sg(b.P0) * d.P_star + sg(b.Q0) * d.Q_star);
        f[1] += d.mu_P * d.P_star + d.mu_Q * d.Q_star;
        f[2] -= d.dP + d.dQ;
        f[3] += b.beta_P * (d.P_star - b.P0) * (d.P_star - b.P0) + b.beta_Q * (d.Q_star - b.Q0) * (d.Q_star - b.Q0);
    }
    return f;
}

void check_invariants(const std::vector<DcaBid>& bids, const SmClearing& c, PQ setpoint, const PriceCaps& caps) {
    double sp = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < bids.size(); ++j) {
        const auto& d = c.dcas[j];
        const auto& b = bids[j];
        sp += d.P_star;
        sq += d.Q_star;
        CHECK(d.dP >= 0.0);
        CHECK(d.dQ >= 0.0);
        CHECK(d.P_star - d.dP >= b.P_lo - 1e-9);
        CHECK(d.P_star + d.dP <= b.P_hi + 1e-9);
        CHECK(d.Q_star - d.dQ >= b.Q_lo - 1e-9);
        CHECK(d.Q_star + d.dQ <= b.Q_hi + 1e-9);
        CHECK((d.mu_P >= 0.0 && d.mu_P <= caps.P));
        CHECK((d.mu_Q >= 0.0 && d.mu_Q <= caps.Q));
    }
    // 1e-6 pu with a 1 MVA base.
    CHECK(std::abs(sp - setpoint.P) <= 1e-3);
    CHECK(std::abs(sq - setpoint.Q) <= 1e-3);
    for (std::size_t k = 0; k < 4; ++k) {
        for (std::size_t l = 0; l < k; ++l) {
            CHECK(c.stage_values[l] <= c.stage_bounds[l] + 1e-6 * std::max(1.0, std::abs(c.stage_bounds[l])));
        }
    }
}

}  // namespace

TEST_CASE("feasibility check") {
    std::vector<DcaBid> bids{load_bid(1, -10, -15, -5), load_bid(2, -10, -15, -5)};
    CHECK(feasibility_check(bids, {-20, 0}).ok());
    const auto g = feasibility_check(bids, {-35, 0});
    CHECK_FALSE(g.ok());
    CHECK(g.gap.P == doctest::Approx(-5.0));
    CHECK(feasibility_check({}, {0, 0}).ok());
    CHECK(std::abs(feasibility_check({}, {3.5, 0}).gap.P) == doctest::Approx(3.5));
    CHECK(relax_to_nearest(bids, {-35, 0}).P == doctest::Approx(-30.0));
    CHECK_THROWS_AS(clear_sm(bids, std::vector<double>{1, 1}, {-35, 0}, {}, generous(), {}), InfeasibleSetpoint);

    // The relaxed point must pass the check exactly, whatever the rounding.
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        std::vector<DcaBid> rb{random_bid(rng, 1), random_bid(rng, 2), random_bid(rng, 3)};
        const PQ far{300.0 * u(rng), 300.0 * u(rng)};
        CHECK(feasibility_check(rb, relax_to_nearest(rb, far)).ok());
    }
}

TEST_CASE("budget right-hand sides") {
    BudgetLedger l;
    l.mode = BudgetMode::quasi_multiperiod;
    l.revenue_received = {10.0, 0.0};
    l.paid_out = {4.0, 0.0};
    l.remaining_secondary_clearings = 3;
    CHECK(budget_rhs(l).P == doctest::Approx(2.0));
    l.remaining_secondary_clearings = 0;
    CHECK_THROWS_AS(budget_rhs(l), ZeroRemainingClearings);

    BudgetLedger s;
    s.mode = BudgetMode::strict;
    s.credit({1.5, 0.1});
    CHECK(budget_rhs(s).P == 1.5);
    s.debit({0.4, 0.0});
    CHECK(budget_rhs(s).P == 1.5);
    CHECK(clearing_budget(s).P == doctest::Approx(1.1));
    CHECK(s.remaining_secondary_clearings == 4);

    BudgetLedger r;
    r.mode = BudgetMode::relaxed;
    r.horizon_periods = 288;
    double total = 0.0;
    for (int k = 0; k < 288; ++k) {
        r.credit({0.01 * k, 0.0});
        total += 0.01 * k;
        r.debit({0.001, 0.0});
    }
    CHECK(budget_rhs(r).P == doctest::Approx(total));
    CHECK(clearing_budget(r).P == doctest::Approx(total - 0.288));
    CHECK(parse_budget_mode("quasi") == BudgetMode::quasi_multiperiod);
    CHECK_THROWS(parse_budget_mode("loose"));
}

TEST_CASE("exact pricing of frozen quantities") {
    PriceCaps caps{0.2, 0.2};
    SUBCASE("net load goes to the ceiling") {
        std::vector<DcaClearing> q{{1, -10.0, 0.0, 0, 0, 0, 0}};
        auto r = recover_prices(q, {1e9, 1e9}, caps, {}, kDt);
        CHECK(r.feasible);
        CHECK(r.tariffs[0].P == 0.2);
    }
    SUBCASE("net generator is priced at zero") {
        std::vector<DcaClearing> q{{1, 10.0, 0.0, 0, 0, 0, 0}};
        auto r = recover_prices(q, {0.10, 0.0}, caps, {}, kDt);
        CHECK(r.feasible);
        CHECK(r.tariffs[0].P == 0.0);
    }
    SUBCASE("zero injection keeps the held tariff") {
        std::vector<DcaClearing> q{{1, 0.0, 0.0, 0, 0, 0, 0}};
        std::vector<Tariff> held{{0.0431, 0.5}};
        auto r = recover_prices(q, {0.0, 0.0}, caps, held, kDt);
        CHECK(r.tariffs[0].P == 0.0431);
        CHECK(r.tariffs[0].Q == 0.2);  // clamped to the ceiling
    }
    SUBCASE("unattainable collection") {
        std::vector<DcaClearing> q{{1, -10.0, 0.0, 0, 0, 0, 0}};
        // Collecting more than 0.2 * 10 / 60 dollars is impossible.
        auto r = recover_prices(q, {-0.05, 0.0}, caps, {}, kDt);
        CHECK_FALSE(r.feasible);
        CHECK(r.tariffs[0].P == 0.2);
        CHECK_THROWS_AS(recover_prices_strict(q, {-0.05, 0.0}, caps, {}, kDt), PriceInfeasible);
    }
    SUBCASE("oracle: grid over both tariffs") {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(-20.0, 20.0);
        for (int t = 0; t < 50; ++t) {
            std::vector<DcaClearing> q{{1, u(rng), 0, 0, 0, 0, 0}, {2, u(rng), 0, 0, 0, 0, 0}};
            const double budget = 0.01 * u(rng);
            double best = std::numeric_limits<double>::infinity();
            for (int a = 0; a <= 100; ++a) {
                for (int b = 0; b <= 100; ++b) {
                    const double m1 = 0.002 * a, m2 = 0.002 * b;
                    const double f = m1 * q[0].P_star + m2 * q[1].P_star;
                    if (f * kDt <= budget) best = std::min(best, f);
                }
            }
            auto r = recover_prices(q, {budget, 1.0}, caps, {}, kDt);
            if (std::isinf(best)) {
                CHECK_FALSE(r.feasible);
            } else {
                CHECK(r.feasible);
                const double f = r.tariffs[0].P * q[0].P_star + r.tariffs[1].P * q[1].P_star;
                CHECK(f <= best + 1e-12);
            }
        }
    }
}

TEST_CASE("single DCA takes the widest symmetric band") {
    std::vector<DcaBid> bids{load_bid(1, -10, -15, -5)};
    auto c = clear_sm(bids, std::vector<double>{1.0}, {-10, 0}, {}, generous(), {});
    REQUIRE(c.dcas.size() == 1);
    CHECK(c.dcas[0].P_star == doctest::Approx(-10.0).epsilon(1e-7));
    // Stage 3 reaches the full half-width; later stages may give back up to
    // the degradation allowance.
    CHECK(c.stage_optima[2] == doctest::Approx(-5.0).epsilon(1e-6));
    CHECK(c.dcas[0].dP >= 5.0 - 0.05 * 5.0 - 1e-6);
    CHECK(c.dcas[0].dP <= 5.0 + 1e-9);
    CHECK(c.dcas[0].mu_P == 0.2);
}

TEST_CASE("trusted DCA gets the larger injection") {
    std::vector<DcaBid> bids{load_bid(1, -10, -15, -5), load_bid(2, -10, -15, -5)};
    std::vector<double> scores{1.0, 0.2};
    const PQ sp{-20, 0};
    auto c = clear_sm(bids, scores, sp, {}, generous(), {});
    CHECK(std::abs(c.dcas[0].P_star) >= std::abs(c.dcas[1].P_star));

    // Oracle: 2-D grid over (P1, P2) on the balance line for the surrogate.
    double best = std::numeric_limits<double>::infinity();
    double best_p1 = 0.0;
    for (int a = 0; a <= 1000; ++a) {
        const double p1 = -15.0 + 0.01 * a;
        for (int b = 0; b <= 1000; ++b) {
            const double p2 = -15.0 + 0.01 * b;
            if (std::abs(p1 + p2 - sp.P) > 1e-9) continue;
            const double f = -(scores[0] * -1.0 * p1 + scores[1] * -1.0 * p2);
            if (f < best) best = f, best_p1 = p1;
        }
    }
    CHECK(best_p1 == doctest::Approx(-15.0));
    CHECK(c.stage_optima[0] <= best + 1e-6);
    CHECK(c.stage_optima[0] >= best - 1e-6);
}

TEST_CASE("empty budget with only loads drives tariffs to the ceiling") {
    std::vector<DcaBid> bids{load_bid(1, -10, -12, -6), load_bid(2, -4, -5, -3)};
    BudgetLedger l;
    l.mode = BudgetMode::quasi_multiperiod;
    l.credit({0.0, 0.0});
    PriceCaps caps{0.2, 0.2};
    auto c = clear_sm(bids, std::vector<double>{1, 1}, {-14, 0}, {}, l, caps);
    for (const auto& d : c.dcas) CHECK(d.mu_P == 0.2);
    CHECK_FALSE(c.price_infeasible);
    CHECK(payouts(c.dcas, kDt).P <= clearing_budget(l).P + 1e-9);
}

TEST_CASE("unaffordable budget is dropped and flagged") {
    std::vector<DcaBid> bids{load_bid(1, -10, -12, -6)};
    BudgetLedger l;
    l.credit({-100.0, 0.0});
    auto c = clear_sm(bids, std::vector<double>{1}, {-10, 0}, {}, l, {});
    CHECK(c.budget_dropped);
    CHECK(c.price_infeasible);
    CHECK(c.dcas[0].mu_P == 0.2);
}

TEST_CASE("randomized clearings keep the invariants") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const PriceCaps caps{0.2, 0.2};
    for (int t = 0; t < 60; ++t) {
        const int n = 1 + t % 5;
        std::vector<DcaBid> bids;
        std::vector<double> scores;
        for (int j = 0; j < n; ++j) {
            bids.push_back(random_bid(rng, j + 1));
            scores.push_back(u(rng));
        }
        const PQ sp = random_setpoint(rng, bids);
        BudgetLedger l;
        l.mode = static_cast<BudgetMode>(t % 3);
        l.credit({(u(rng) - 0.7) * 0.02, (u(rng) - 0.5) * 0.01});
        auto c = clear_sm(bids, scores, sp, {}, l, caps);
        check_invariants(bids, c, sp, caps);
        if (!c.price_infeasible) CHECK(payouts(c.dcas, kDt).P <= clearing_budget(l).P + 1e-9);
        const auto f = objectives(bids, scores, c);
        for (std::size_t k : {0u, 2u, 3u}) {
            CHECK(f[k] == doctest::Approx(c.stage_values[k]).epsilon(1e-6).scale(1.0));
        }
        CHECK(c.relaxation_gap == doctest::Approx(std::abs(f[1] - c.stage_values[1])).scale(1.0));
    }
}

TEST_CASE("paired identical DCAs are ordered by score") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 40; ++t) {
        DcaBid a = random_bid(rng, 1);
        DcaBid b = a;
        b.dca_id = 2;
        std::vector<DcaBid> bids{a, b};
        if (t % 2) bids.push_back(random_bid(rng, 3));
        std::vector<double> scores{u(rng), u(rng), u(rng)};
        scores.resize(bids.size());
        if (scores[0] == scores[1]) continue;
        const PQ sp = random_setpoint(rng, bids);
        auto c = clear_sm(bids, scores, sp, {}, generous(), {});
        const std::size_t hi = scores[0] > scores[1] ? 0 : 1, lo = 1 - hi;
        const double m_hi = std::abs(c.dcas[hi].P_star), m_lo = std::abs(c.dcas[lo].P_star);
        // Quantities are resolved to 1e-6 pu (1e-3 kW).
        CHECK(m_hi >= m_lo - 1e-3);
    }
}

TEST_CASE("two-DCA stages match a gridded lexicographic search") {
    // Reactive bands are collapsed so the balance line leaves one free
    // quantity P1; the other variables are set optimally per grid point.
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const PriceCaps caps{0.2, 0.2};
    for (int t = 0; t < 25; ++t) {
        std::vector<DcaBid> bids{random_bid(rng, 1), random_bid(rng, 2)};
        for (auto& b : bids) b.Q0 = b.Q_lo = b.Q_hi = 0.0;
        std::vector<double> scores{u(rng), u(rng)};
        const PQ sp = random_setpoint(rng, bids);
        auto c = clear_sm(bids, scores, sp, {}, generous(), caps);

        struct Point {
            double f[4];
        };
        std::vector<Point> grid;
        const auto& b1 = bids[0];
        const auto& b2 = bids[1];
        for (int i = 0; i <= 100; ++i) {
            const double p1 = b1.P_lo + (b1.P_hi - b1.P_lo) * i / 100.0;
            const double p2 = sp.P - p1;
            if (p2 < b2.P_lo - 1e-12 || p2 > b2.P_hi + 1e-12) continue;
            const double p[2] = {p1, p2};
            Point pt{};
            for (int j = 0; j < 2; ++j) {
                const auto& b = bids[static_cast<std::size_t>(j)];
                const double sg = b.P0 > 0 ? 1.0 : -1.0;
                pt.f[0] -= scores[static_cast<std::size_t>(j)] * sg * p[j];
                // Lowest relaxed payment: the envelope maximum is piecewise
                // linear in mu, so checking the breakpoints is exact.
                auto env = [&](double mu) {
                    return std::max(mu * b.P_lo, caps.P * p[j] + mu * b.P_hi - caps.P * b.P_hi);
                };
                double w = std::min(env(0.0), env(caps.P));
                if (b.P_hi != b.P_lo) {
                    const double mu_x = caps.P * (b.P_hi - p[j]) / (b.P_hi - b.P_lo);
                    if (mu_x > 0.0 && mu_x < caps.P) w = std::min(w, env(mu_x));
                }
                pt.f[1] += w;
                pt.f[2] -= std::min(p[j] - b.P_lo, b.P_hi - p[j]);
                pt.f[3] += b.beta_P * (p[j] - b.P0) * (p[j] - b.P0);
            }
            grid.push_back(pt);
        }
        REQUIRE(!grid.empty());
        // Engine stage k optimum is no worse than any grid point meeting the
        // engine's own earlier bounds.
        for (std::size_t k = 0; k < 4; ++k) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& g : grid) {
                bool ok = true;
                for (std::size_t l = 0; l < k; ++l) ok &= g.f[l] <= c.stage_bounds[l];
                if (ok) best = std::min(best, g.f[k]);
            }
            if (std::isinf(best)) continue;
            CHECK(c.stage_optima[k] <= best + 1e-6 * std::max(1.0, std::abs(best)));
        }
        // And stage 1 is within the grid resolution of the grid optimum.
        double best1 = std::numeric_limits<double>::infinity();
        for (const auto& g : grid) best1 = std::min(best1, g.f[0]);
        const double res = (b1.P_hi - b1.P_lo) / 100.0 * (scores[0] + scores[1]);
        CHECK(c.stage_optima[0] >= best1 - res - 1e-9);
    }
}
