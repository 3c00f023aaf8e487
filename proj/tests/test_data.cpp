#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lem/data/metrics.hpp"
#include "lem/data/profiles.hpp"
#include "lem/data/results_io.hpp"
#include "lem/data/scenario_config.hpp"
#include "lem/data/synthetic.hpp"

using namespace lem::data;

TEST_CASE("ISO 8601 timestamps") {
    CHECK(parse_iso8601("2023-07-01T00:00:00") == 1688169600);
    CHECK(parse_iso8601("2023-07-01T00:00Z") == 1688169600);
    CHECK(parse_iso8601("1970-01-01T00:01:00") == 60);
    CHECK(format_iso8601(1688169600 + 7 * 3600 + 3 * 60) == "2023-07-01T07:03:00");
    CHECK(format_iso8601(-60) == "1969-12-31T23:59:00");
    for (Timestamp t : {0L, 951782400L, 1709164800L, 4102444740L}) CHECK(parse_iso8601(format_iso8601(t)) == t);
    CHECK_THROWS(parse_iso8601("2023-02-30T00:00"));
    CHECK_THROWS(parse_iso8601("2023-07-01 25:00"));
    CHECK_THROWS(parse_iso8601("yesterday"));
}

TEST_CASE("profile ingestion") {
    SUBCASE("well formed") {
        std::istringstream in(
            "node_id,timestamp_iso8601,P_kW,Q_kvar\n"
            "1,2023-07-01T07:00:00,-10,-2\n"
            "2,2023-07-01T07:00:00,4,0\n"
            "1,2023-07-01T07:01:00,-11,-2.5\n"
            "2,2023-07-01T07:01:00,4.5,0\n"
            "1,2023-07-01T07:02:00,-12,-3\n"
            "2,2023-07-01T07:02:00,5,0\n");
        auto s = read_profiles(in);
        CHECK(s.nodes.size() == 2);
        CHECK(s.length() == 3);
        CHECK(s.at(1, 2).P_kw == -12.0);
        CHECK(s.at(2, 1).P_kw == 4.5);
        CHECK(s.start == parse_iso8601("2023-07-01T07:00"));
        std::ostringstream out;
        write_profiles(out, s);
        std::istringstream back(out.str());
        auto s2 = read_profiles(back);
        CHECK(s2.start == s.start);
        CHECK(s2.at(1, 1).Q_kvar == -2.5);
    }
    SUBCASE("gap") {
        std::istringstream in(
            "node_id,timestamp_iso8601,P_kW,Q_kvar\n"
            "1,2023-07-01T07:01:00,1,0\n"
            "1,2023-07-01T07:02:00,1,0\n"
            "1,2023-07-01T07:04:00,1,0\n");
        try {
            (void)read_profiles(in);
            FAIL("expected a gap");
        } catch (const GapInSeries& e) {
            CHECK(e.missing() == parse_iso8601("2023-07-01T07:03"));
            CHECK(std::string(e.what()).find("07:03") != std::string::npos);
        }
    }
    SUBCASE("missing column") {
        std::istringstream in("node_id,timestamp_iso8601,P_kW\n1,2023-07-01T07:01:00,1\n");
        try {
            (void)read_profiles(in);
            FAIL("expected a schema error");
        } catch (const SchemaMismatch& e) {
            CHECK(std::string(e.what()).find("Q_kvar") != std::string::npos);
        }
    }
    SUBCASE("non monotone") {
        std::istringstream in(
            "node_id,timestamp_iso8601,P_kW,Q_kvar\n"
            "1,2023-07-01T07:02:00,1,0\n"
            "1,2023-07-01T07:01:00,1,0\n");
        CHECK_THROWS_AS(read_profiles(in), NonMonotoneTimestamps);
    }
    SUBCASE("bad number") {
        std::istringstream in("node_id,timestamp_iso8601,P_kW,Q_kvar\n1,2023-07-01T07:02:00,abc,0\n");
        CHECK_THROWS_AS(read_profiles(in), SchemaMismatch);
    }
    SUBCASE("empty file") {
        std::istringstream in("");
        CHECK_THROWS_AS(read_profiles(in), SchemaMismatch);
    }
}

TEST_CASE("price series") {
    std::istringstream in(
        "timestamp_iso8601,lmp_usd_per_kwh\n"
        "2023-07-01T00:00:00,0.0431\n"
        "2023-07-01T00:05:00,0.05\n");
    auto l = read_lmps(in);
    REQUIRE(l.length() == 2);
    CHECK(l.usd_per_kwh[0] == 0.0431);
    std::ostringstream out;
    write_lmps(out, l);
    std::istringstream back(out.str());
    CHECK(read_lmps(back).usd_per_kwh == l.usd_per_kwh);
    std::istringstream gap(
        "timestamp_iso8601,lmp_usd_per_kwh\n"
        "2023-07-01T00:00:00,0.04\n"
        "2023-07-01T00:10:00,0.05\n");
    CHECK_THROWS_AS(read_lmps(gap), GapInSeries);
}

TEST_CASE("disaggregation") {
    std::mt19937_64 rng(4);
    auto d = disaggregate_node(-30.0, -6.0, 3, rng);
    REQUIRE(d.size() == 3);
    double p = 0.0, q = 0.0;
    for (const auto& b : d) {
        p += b.injection.P_kw;
        q += b.injection.Q_kvar;
        CHECK((b.kind == DcaKind::generator) == (b.injection.P_kw >= 0.0));
    }
    CHECK(p == doctest::Approx(-30.0).epsilon(1e-12));
    CHECK(q == doctest::Approx(-6.0).epsilon(1e-12));

    for (std::uint64_t s = 0; s < 50; ++s) {
        std::mt19937_64 r(s);
        auto g = disaggregate_node(4.0, 0.0, 3, r);
        CHECK(std::any_of(g.begin(), g.end(), [](const DcaBaseline& b) { return b.injection.P_kw > 0.0; }));
    }

    std::mt19937_64 a(99), b(99);
    auto da = disaggregate_node(-17.0, 2.0, 4, a);
    auto db = disaggregate_node(-17.0, 2.0, 4, b);
    for (std::size_t j = 0; j < da.size(); ++j) CHECK(da[j].injection.P_kw == db[j].injection.P_kw);

    // Conservation over many draws and both signs.
    std::mt19937_64 rr(8);
    std::uniform_real_distribution<double> u(-200.0, 200.0);
    std::uniform_int_distribution<int> n(1, 6);
    for (int k = 0; k < 5000; ++k) {
        const double P = u(rr), Q = 0.3 * u(rr);
        auto split = draw_split(n(rr), rr);
        auto v = apply_split(split, P, Q);
        double sp = 0.0, sq = 0.0;
        for (const auto& x : v) {
            sp += x.injection.P_kw;
            sq += x.injection.Q_kvar;
        }
        CHECK(std::abs(sp - P) <= 1e-12 * std::max(1.0, std::abs(P)));
        CHECK(std::abs(sq - Q) <= 1e-12 * std::max(1.0, std::abs(Q)));
    }
    CHECK_THROWS(draw_split(0, rr));
}

TEST_CASE("flexibility bids") {
    auto [lo, hi] = flex_interval(10.0, 0.2, 0.4);
    CHECK(lo == doctest::Approx(8.0));
    CHECK(hi == doctest::Approx(14.0));
    std::tie(lo, hi) = flex_interval(-10.0, 0.2, 0.4);
    CHECK(lo == doctest::Approx(-14.0));
    CHECK(hi == doctest::Approx(-8.0));
    std::tie(lo, hi) = flex_interval(0.0, 0.3, 0.1);
    CHECK(lo == 0.0);
    CHECK(hi == 0.0);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    bool ordered = true;
    for (int k = 0; k < 100000; ++k) {
        const Injection base{u(rng), u(rng)};
        const auto f = gen_flexibility_bids(base, rng);
        ordered = ordered && f.P_lo <= base.P_kw && base.P_kw <= f.P_hi && f.Q_lo <= base.Q_kvar &&
                  base.Q_kvar <= f.Q_hi && f.P_lo >= base.P_kw - 0.5 * std::abs(base.P_kw) - 1e-12 &&
                  f.P_hi <= base.P_kw + 0.5 * std::abs(base.P_kw) + 1e-12;
    }
    CHECK(ordered);
    CHECK_THROWS(gen_flexibility_bids({1.0, 0.0}, rng, 1.5));
}

TEST_CASE("synthetic feeder defaults") {
    SyntheticParams p;
    const auto s = gen_synthetic_feeder(p);
    CHECK(s.feeder.nodes.size() == 80);
    CHECK(s.feeder.lines.size() == 79);
    const double peak = *std::max_element(s.total_load_kw.begin(), s.total_load_kw.end());
    CHECK(peak == doctest::Approx(3600.0).epsilon(1e-9));
    double pv = 0.0;
    for (const auto& [id, cap] : s.pv_nameplate_kw) pv += cap;
    CHECK(pv == doctest::Approx(510.3).epsilon(1e-12));
    std::set<int> ids;
    for (const auto& n : s.feeder.nodes) ids.insert(n.id);
    for (int id : {5, 20, 50, 63, 94, 149}) CHECK(ids.count(id) == 1);
    CHECK(*ids.begin() >= 1);
    for (int id : ids) CHECK((id <= 114 || id == 149));
    CHECK(s.profiles.nodes.size() == 79);
    CHECK(s.profiles.length() == 1440);
    CHECK(s.lmps.length() == 288);
    for (double l : s.lmps.usd_per_kwh) CHECK(l > 0.0);
    // PV never exceeds nameplate and is dark at night.
    for (std::size_t t = 0; t < s.total_pv_kw.size(); ++t) CHECK(s.total_pv_kw[t] <= 510.3 + 1e-9);
    CHECK(s.total_pv_kw[0] == 0.0);
    CHECK(s.total_pv_kw[12 * 60] == doctest::Approx(510.3));

    const auto net = lem::grid::build_feeder(s.feeder);
    CHECK(net.slack_id() == 149);
    for (const auto& ln : net.lines()) CHECK(ln.s_max >= 0.01 - 1e-15);
}

TEST_CASE("synthetic feeder is reproducible") {
    SyntheticParams p;
    p.smo_nodes = 3;
    p.minutes = 60;
    p.seed = 12;
    const auto a = gen_synthetic_feeder(p);
    const auto b = gen_synthetic_feeder(p);
    CHECK(a.feeder.nodes.size() == 4);
    std::ostringstream fa, fb;
    lem::grid::write_feeder(fa, a.feeder);
    lem::grid::write_feeder(fb, b.feeder);
    CHECK(fa.str() == fb.str());
    std::ostringstream pa, pb;
    write_profiles(pa, a.profiles);
    write_profiles(pb, b.profiles);
    CHECK(pa.str() == pb.str());
    p.seed = 13;
    std::ostringstream pc;
    write_profiles(pc, gen_synthetic_feeder(p).profiles);
    CHECK(pc.str() != pa.str());
}

TEST_CASE("results round trip") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    RunResults r;
    for (int k = 0; k < 50; ++k) {
        r.sm.push_back({k, 2, 3, u(rng), std::abs(u(rng)), u(rng), 1e-300, 0.2, 0.0, 0.123456789012345678});
        r.pm.push_back({5 * k, 7, u(rng) * 1e-7, u(rng), 1.0 + 1e-16, u(rng), -0.0});
        r.lines.push_back({5 * k, 1, 7, u(rng), u(rng), 0.1, -3e-9});
        r.flex.push_back({5 * k, 7, -u(rng), u(rng), 0.0});
    }
    std::ostringstream sm, pm, ln, fx;
    write_sm(sm, r.sm);
    write_pm(pm, r.pm);
    write_lines(ln, r.lines);
    write_flex(fx, r.flex);
    std::istringstream ism(sm.str()), ipm(pm.str()), iln(ln.str()), ifx(fx.str());
    CHECK(read_sm(ism) == r.sm);
    CHECK(read_pm(ipm) == r.pm);
    CHECK(read_lines(iln) == r.lines);
    CHECK(read_flex(ifx) == r.flex);
    CHECK(sm.str().rfind("t,smo,dca,P_star,dP,Q_star,dQ,mu_P,mu_Q,score\n", 0) == 0);
    CHECK(pm.str().rfind("t,node,P_net,Q_net,v_sq,dlmp_P,dlmp_Q\n", 0) == 0);
    CHECK(ln.str().rfind("t,from,to,P,Q,l,socp_gap\n", 0) == 0);

    const auto dir = std::filesystem::temp_directory_path() / "lem_results_roundtrip";
    std::filesystem::remove_all(dir);
    export_results(r, dir.string());
    CHECK(import_results(dir.string()) == r);
    export_results({}, dir.string());
    const auto empty = import_results(dir.string());
    CHECK(empty.sm.empty());
    CHECK(empty.pm.empty());
    std::filesystem::remove_all(dir);

    std::istringstream bad("t,node\n1,2\n");
    CHECK_THROWS_AS(read_pm(bad), IoFailure);
    CHECK_THROWS_AS(import_results("/nonexistent/dir"), IoFailure);
}

TEST_CASE("metrics") {
    std::vector<double> v{0.1, 0.2, 0.3}, ones(3, 1.0);
    CHECK(weighted_mean(v, ones) == doctest::Approx(0.2));
    CHECK(weighted_mean(std::vector<double>{0.1, 0.2}, std::vector<double>{10, 30}) == doctest::Approx(0.175));
    CHECK_THROWS(weighted_mean(std::vector<double>{}, std::vector<double>{}));

    RunResults run;
    // Two periods: slack imports 1 pu, loads take 0.99 pu, losses 0.01 pu.
    for (int t : {0, 5}) {
        run.pm.push_back({t, 0, 1.0, 0.2, 1.0, 0.05, 0.005});
        run.pm.push_back({t, 1, -0.6, -0.1, 0.98, 0.06, 0.006});
        run.pm.push_back({t, 2, -0.39, -0.1, 0.97, 0.07, 0.007});
    }
    run.sm.push_back({1, 1, 1, -5.0, 1.0, 0.0, 0.0, 0.2, 0.0, 1.0});
    run.sm.push_back({1, 1, 2, 3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0});
    MetricsOptions opt;
    const auto m = compute_metrics(run, opt);
    CHECK(m.avg_dlmp == doctest::Approx((0.06 * 0.6 + 0.07 * 0.39) / 0.99));
    CHECK(m.avg_retail == doctest::Approx(0.1));
    CHECK(m.losses_kwh == doctest::Approx(2 * 0.01 * 1000.0 * 5.0 / 60.0));
    CHECK(m.import_kwh == doctest::Approx(2 * 1000.0 * 5.0 / 60.0));
    CHECK(m.pm_clearings == 2);

    const auto table = report_metrics(run, run, opt);
    CHECK(table.with_smo.avg_dlmp - table.without_smo.avg_dlmp == 0.0);
    CHECK(table.with_smo.avg_retail - table.without_smo.avg_retail == 0.0);
    CHECK(table.flat_rate == 0.129);

    RunResults pm_only = run;
    pm_only.sm.clear();
    CHECK(compute_metrics(pm_only, opt).avg_retail == doctest::Approx(m.avg_dlmp));
    pm_only.pm.pop_back();
    pm_only.pm.back().t = 10;
    CHECK_THROWS_AS(report_metrics(run, pm_only, opt), IncompatibleHorizons);

    std::ostringstream out;
    write_metrics(out, table);
    CHECK(out.str().find("no_lem,,0.129") != std::string::npos);
}

TEST_CASE("scenario configuration") {
    ScenarioConfig c;
    c.seed = 42;
    c.budget_mode = "strict";
    c.response.follow_probs = {1.0, 0.5};
    c.synthetic.smo_nodes = 10;
    const auto back = config_from_json(config_to_json(c));
    CHECK(back.seed == 42);
    CHECK(back.budget_mode == "strict");
    CHECK(back.response.follow_probs == std::vector<double>{1.0, 0.5});
    CHECK(back.synthetic.smo_nodes == 10);
    CHECK(back.synthetic.start == c.synthetic.start);
    CHECK(config_to_json(back) == config_to_json(c));

    const auto defaults = config_from_json("{}");
    CHECK(defaults.cap_P == 0.2);
    CHECK(defaults.epsilon == 0.05);
    CHECK(defaults.xi == 100.0);
    CHECK(defaults.dca_min == 3);
    CHECK(defaults.dca_max == 5);
    CHECK(defaults.flex_cap == 0.5);
    CHECK(defaults.synthetic_inputs());

    CHECK_THROWS_AS(config_from_json(R"({"sead": 1})"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(R"({"synthetic": {"nodes": 3}})"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(R"({"dca_min": 6})"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(R"({"budget_mode": "loose"})"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(R"({"feeder_path": "a.csv"})"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json(R"({"seed": "x"})"), std::invalid_argument);
    CHECK_THROWS_AS(config_from_json("not json"), std::invalid_argument);
}
