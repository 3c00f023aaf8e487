#include "lem/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

namespace lem::orch {

namespace {

enum Purpose : std::uint32_t { kSetup = 1, kBids = 2, kResponse = 3 };

double hours(int minutes) { return minutes / 60.0; }

sm::SmSettings sm_settings(const Scenario& s) {
    sm::SmSettings st;
    st.lexi.epsilon = s.config.epsilon;
    st.dt_hours = hours(s.timeline.dt_s);
    return st;
}

sm::PriceCaps caps(const Scenario& s) { return {s.config.cap_P, s.config.cap_Q}; }

double mean(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double lmp_at(const Scenario& s, int t) {
    const auto k = static_cast<std::size_t>(t / s.timeline.dt_p);
    if (k >= s.lmps.length()) throw MissingProfiles("no wholesale price for minute " + std::to_string(t));
    return s.lmps.usd_per_kwh[k];
}

// Net real-power range of a node bid, pu.
std::pair<double, double> net_range(const pm::SmoBid& b) { return {b.PG.lo - b.PL.hi, b.PG.hi - b.PL.lo}; }

void record_pm(int t, const pm::PmClearing& c, const std::vector<pm::SmoBid>& bids, RunOutput& out) {
    for (const auto& n : c.nodes) {
        out.results.pm.push_back({t, n.id, n.P_net, n.Q_net, n.v_sq, n.dlmp_P, n.dlmp_Q});
    }
    for (const auto& l : c.lines) out.results.lines.push_back({t, l.from, l.to, l.P, l.Q, l.l, l.socp_gap});
    for (const auto& b : bids) {
        const auto [lo, hi] = net_range(b);
        out.results.flex.push_back({t, b.node, lo, hi, c.node(b.node).P_net});
    }
    const auto rep = pm::check_socp_exactness(c);
    auto& sum = out.summary;
    if (sum.pm_clearings == 0) {
        sum.max_socp_gap = rep.max_gap;
        sum.min_socp_gap = rep.min_gap;
    } else {
        sum.max_socp_gap = std::max(sum.max_socp_gap, rep.max_gap);
        sum.min_socp_gap = std::min(sum.min_socp_gap, rep.min_gap);
    }
    ++sum.pm_clearings;
    sum.reduced_accuracy += c.reduced_accuracy;
    sum.pm_times.push_back(t);
}

pm::PmClearing clear_primary(const Scenario& s, int t, const std::vector<pm::SmoBid>& bids, const RunOptions& opt) {
    const pm::Lmp lambda = pm::lmp_from_p(lmp_at(s, t));
    try {
        auto c = pm::clear_pm(s.net, bids, lambda, s.config.xi);
        if (opt.on_pm) opt.on_pm({t, bids, &c, lambda});
        return c;
    } catch (const pm::Infeasible& e) {
        std::string names;
        for (const auto& n : e.violating()) names += (names.empty() ? "" : ", ") + n;
        throw TimelineError(t, s.net.slack_id(), std::string(e.what()) + " [" + names + "]");
    } catch (const pm::SolverFailure& e) {
        throw TimelineError(t, s.net.slack_id(), e.what());
    }
}

}  // namespace

void Timeline::validate() const {
    if (dt_s <= 0 || dt_p < dt_s || dt_p % dt_s != 0 || horizon <= 0) {
        throw std::invalid_argument("timeline needs 0 < dt_s <= dt_p, dt_p a multiple of dt_s, positive horizon");
    }
}

std::mt19937_64 rng_for(std::uint64_t seed, std::uint64_t step, int smo, int dca, std::uint32_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(step),
                      static_cast<std::uint32_t>(step >> 32),
                      static_cast<std::uint32_t>(smo),
                      static_cast<std::uint32_t>(dca),
                      purpose};
    return std::mt19937_64(seq);
}

pm::SmoBid aggregate_smo_bid(const sm::SmClearing& clearing, std::span<const sm::DcaBid> bids,
                             const AggregationInput& in) {
    if (clearing.dcas.empty()) throw EmptyClearing("no DCAs cleared at node " + std::to_string(in.node));
    if (bids.size() != clearing.dcas.size()) throw std::invalid_argument("bids do not match the clearing");
    pm::SmoBid b;
    b.node = in.node;
    b.s_base_mva = in.s_base_mva;
    b.alpha_P = in.alpha_P;
    b.alpha_Q = in.alpha_Q;
    const double k = 1.0 / in.kw_per_pu;
    double pg0 = 0, pg_lo = 0, pg_hi = 0, qg0 = 0, qg_lo = 0, qg_hi = 0;
    double pl0 = 0, pl_lo = 0, pl_hi = 0, ql0 = 0, ql_lo = 0, ql_hi = 0;
    std::vector<double> bp, bq;
    for (std::size_t j = 0; j < clearing.dcas.size(); ++j) {
        const auto& c = clearing.dcas[j];
        bp.push_back(bids[j].beta_P);
        bq.push_back(bids[j].beta_Q);
        if (c.P_star > 0.0) {
            pg0 += c.P_star;
            pg_lo += c.P_star - c.dP;
            pg_hi += c.P_star + c.dP;
            qg0 += c.Q_star;
            qg_lo += c.Q_star - c.dQ;
            qg_hi += c.Q_star + c.dQ;
        } else if (c.P_star < 0.0) {
            pl0 -= c.P_star;
            pl_lo -= c.P_star + c.dP;
            pl_hi -= c.P_star - c.dP;
            ql0 -= c.Q_star;
            ql_lo -= c.Q_star + c.dQ;
            ql_hi -= c.Q_star - c.dQ;
        }
    }
    b.PG0 = pg0 * k;
    b.PG = {pg_lo * k, pg_hi * k};
    b.QG0 = qg0 * k;
    b.QG = {qg_lo * k, qg_hi * k};
    b.PL0 = pl0 * k;
    b.PL = {pl_lo * k, pl_hi * k};
    b.QL0 = ql0 * k;
    b.QL = {ql_lo * k, ql_hi * k};
    const double kw2 = in.kw_per_pu * in.kw_per_pu;
    b.beta_P = mean(bp) * kw2;
    b.beta_Q = mean(bq) * kw2;
    return b;
}

Scenario build_scenario(const data::ScenarioConfig& config) {
    config.validate();
    Scenario s;
    s.config = config;
    s.timeline = {config.dt_s_minutes, config.dt_p_minutes, config.horizon_minutes};
    s.timeline.validate();
    if (s.timeline.dt_s != 1) throw std::invalid_argument("profiles are minute-level; dt_s must be 1 minute");

    if (config.synthetic_inputs()) {
        auto params = config.synthetic;
        params.seed = config.seed;
        params.minutes = std::max(params.minutes, config.horizon_minutes);
        auto syn = data::gen_synthetic_feeder(params);
        s.net = grid::build_feeder(syn.feeder);
        s.profiles = std::move(syn.profiles);
        s.lmps = std::move(syn.lmps);
    } else {
        s.net = grid::build_feeder(grid::read_feeder_file(config.feeder_path));
        if (std::filesystem::exists(config.profiles_path) && std::filesystem::file_size(config.profiles_path) == 0) {
            throw MissingProfiles("profile file '" + config.profiles_path + "' is empty");
        }
        s.profiles = data::load_profiles(config.profiles_path);
        s.lmps = data::load_lmps(config.lmp_path);
    }
    if (s.profiles.nodes.empty()) throw MissingProfiles("no injection profiles");
    if (s.profiles.length() < static_cast<std::size_t>(s.timeline.horizon)) {
        throw MissingProfiles("profiles cover " + std::to_string(s.profiles.length()) + " minutes, horizon needs " +
                              std::to_string(s.timeline.horizon));
    }
    if (s.lmps.cadence_s != s.timeline.dt_p * 60) throw std::invalid_argument("price cadence differs from dt_p");
    if (s.lmps.length() < static_cast<std::size_t>(s.timeline.n_p())) {
        throw MissingProfiles("price series shorter than the horizon");
    }

    const auto mode = sm::parse_budget_mode(config.budget_mode);
    for (const auto& node : s.net.nodes()) {
        if (node.kind == grid::NodeKind::slack) continue;
        if (!s.profiles.nodes.count(node.id)) {
            throw MissingProfiles("no profile for node " + std::to_string(node.id));
        }
        SmoState smo;
        smo.node = node.id;
        auto rng = rng_for(config.seed, 0, node.id, 0, kSetup);
        const int n = std::uniform_int_distribution<int>(config.dca_min, config.dca_max)(rng);
        smo.split = data::draw_split(n, rng, config.p_gen, config.gen_share_lo, config.gen_share_hi);
        std::uniform_real_distribution<double> beta(config.beta_lo, config.beta_hi);
        std::vector<int> ids;
        for (int j = 0; j < n; ++j) {
            smo.beta_P.push_back(beta(rng));
            smo.beta_Q.push_back(beta(rng));
            ids.push_back(j + 1);
            const double follow = config.response.follow_probs[static_cast<std::size_t>(j) %
                                                               config.response.follow_probs.size()];
            smo.response.dcas.push_back({follow, config.response.overshoot_scale, config.response.noise_scale});
        }
        smo.response.seed = config.seed;
        smo.alpha.alpha_fixed = std::uniform_real_distribution<double>(config.alpha_lo, config.alpha_hi)(rng);
        smo.commitment = commitment::CommitmentLedger(ids);
        smo.commitment.set_keep_history(false);
        smo.budget.mode = mode;
        smo.budget.horizon_periods = s.timeline.n_p();
        smo.budget.clearings_per_period = s.timeline.n_s();
        s.smos.push_back(std::move(smo));
    }
    std::sort(s.smos.begin(), s.smos.end(), [](const SmoState& a, const SmoState& b) { return a.node < b.node; });
    return s;
}

std::vector<sm::DcaBid> dca_bids(const Scenario& s, const SmoState& smo, int t) {
    const auto& inj = s.profiles.at(smo.node, static_cast<std::size_t>(t));
    const auto base = data::apply_split(smo.split, inj.P_kw, inj.Q_kvar);
    std::vector<sm::DcaBid> bids;
    for (std::size_t j = 0; j < base.size(); ++j) {
        auto rng = rng_for(s.config.seed, static_cast<std::uint64_t>(t), smo.node, static_cast<int>(j + 1), kBids);
        const auto band = data::gen_flexibility_bids(base[j].injection, rng, s.config.flex_cap);
        sm::DcaBid b;
        b.dca_id = static_cast<int>(j + 1);
        b.P0 = base[j].injection.P_kw;
        b.Q0 = base[j].injection.Q_kvar;
        b.P_lo = band.P_lo;
        b.P_hi = band.P_hi;
        b.Q_lo = band.Q_lo;
        b.Q_hi = band.Q_hi;
        b.beta_P = smo.beta_P[j];
        b.beta_Q = smo.beta_Q[j];
        bids.push_back(b);
    }
    return bids;
}

void bootstrap(Scenario& s) {
    const double lam = lmp_at(s, 0);
    const pm::Lmp price = pm::lmp_from_p(lam);
    const double dtp = hours(s.timeline.dt_p);
    for (auto& smo : s.smos) {
        sm::PQ sp;
        for (const auto& b : dca_bids(s, smo, 0)) {
            sp.P += b.P0;
            sp.Q += b.Q0;
        }
        smo.setpoint_kw = sp;
        smo.setpoint_time = -s.timeline.dt_p;
        smo.held.assign(smo.n_dca(), {price.P, price.Q});
        smo.commitment = commitment::CommitmentLedger(smo.commitment.dca_ids());
        smo.commitment.set_keep_history(false);
        const auto mode = smo.budget.mode;
        smo.budget = sm::BudgetLedger{};
        smo.budget.mode = mode;
        smo.budget.horizon_periods = s.timeline.n_p();
        smo.budget.clearings_per_period = s.timeline.n_s();
        smo.budget.credit({price.P * sp.P * dtp, price.Q * sp.Q * dtp});
        // The virtual bootstrap period ends with the first secondary clearing.
        smo.budget.remaining_secondary_clearings = 1;
        smo.window.clear();
        smo.alpha.alpha_var = 0.0;
        smo.alpha.history.clear();
    }
    s.bootstrapped = true;
}

RunOutput run_timeline(Scenario& s, const RunOptions& opt) {
    if (!s.bootstrapped) bootstrap(s);
    RunOutput out;
    const auto settings = sm_settings(s);
    const auto cap = caps(s);
    const double kw = s.net.kw_per_pu();
    const double dts = hours(s.timeline.dt_s);
    const double dtp = hours(s.timeline.dt_p);
    std::vector<sm::SmClearing> last(s.smos.size());
    std::vector<std::vector<sm::DcaBid>> last_bids(s.smos.size());

    for (int t = 0; t < s.timeline.horizon; t += s.timeline.dt_s) {
        for (std::size_t i = 0; i < s.smos.size(); ++i) {
            auto& smo = s.smos[i];
            if (smo.setpoint_time >= t) {
                throw std::logic_error("secondary clearing at minute " + std::to_string(t) +
                                       " would use a setpoint from minute " + std::to_string(smo.setpoint_time));
            }
            auto bids = dca_bids(s, smo, t);
            sm::PQ target = smo.setpoint_kw;
            if (!sm::feasibility_check(bids, target).ok()) {
                target = sm::relax_to_nearest(bids, target);
                ++out.summary.setpoint_fallbacks;
            }
            const sm::BudgetLedger before = smo.budget;
            const std::vector<double> scores_before = smo.commitment.scores();
            sm::SmClearing c;
            try {
                c = sm::clear_sm(bids, scores_before, target, smo.held, smo.budget, cap, settings);
            } catch (const std::exception& e) {
                throw TimelineError(t, smo.node, e.what());
            }
            std::vector<commitment::Schedule> sched;
            for (const auto& d : c.dcas) sched.push_back({d.dca_id, d.P_star, d.dP, d.Q_star, d.dQ});
            const auto resp = commitment::simulate_response(smo.response, sched, static_cast<std::uint64_t>(t),
                                                            smo.node);
            smo.commitment = commitment::update_scores(std::move(smo.commitment), sched, resp);
            smo.budget.debit(sm::payouts(c.dcas, dts));
            for (std::size_t j = 0; j < c.dcas.size(); ++j) {
                smo.held[j] = {c.dcas[j].mu_P, c.dcas[j].mu_Q};
                smo.window.push_back({c.dcas[j].mu_P, std::abs(c.dcas[j].P_star)});
            }
            if (opt.on_sm) {
                opt.on_sm({t, smo.node, bids, &c, &before, scores_before, smo.commitment.scores(), sched, resp,
                           smo.setpoint_kw});
            }
            if (opt.record_sm) {
                for (std::size_t j = 0; j < c.dcas.size(); ++j) {
                    const auto& d = c.dcas[j];
                    out.results.sm.push_back({t, smo.node, d.dca_id, d.P_star, d.dP, d.Q_star, d.dQ, d.mu_P, d.mu_Q,
                                              smo.commitment.scores()[j]});
                }
            }
            ++out.summary.sm_clearings;
            out.summary.budget_drops += c.budget_dropped;
            out.summary.price_infeasible += c.price_infeasible;
            out.summary.widened_stages += c.widened_stages.size();
            out.summary.reduced_accuracy += c.reduced_accuracy_stages.size();
            last[i] = std::move(c);
            last_bids[i] = std::move(bids);
        }

        if (!s.timeline.primary_boundary(t)) continue;
        std::vector<pm::SmoBid> pm_bids;
        for (std::size_t i = 0; i < s.smos.size(); ++i) {
            auto& smo = s.smos[i];
            const double alpha = pm::update_alpha(smo.alpha, smo.window);
            smo.window.clear();
            pm_bids.push_back(aggregate_smo_bid(last[i], last_bids[i],
                                                {smo.node, kw, alpha, 0.1 * alpha, s.net.s_base_mva()}));
        }
        const auto pc = clear_primary(s, t, pm_bids, opt);
        for (auto& smo : s.smos) {
            const auto& n = pc.node(smo.node);
            smo.setpoint_kw = {n.P_net * kw, n.Q_net * kw};
            smo.setpoint_time = t;
            smo.budget.credit({n.dlmp_P * smo.setpoint_kw.P * dtp, n.dlmp_Q * smo.setpoint_kw.Q * dtp});
        }
        record_pm(t, pc, pm_bids, out);
    }
    return out;
}

RunOutput run_without_smo(const Scenario& s, const RunOptions& opt) {
    RunOutput out;
    const double kw = s.net.kw_per_pu();
    const double f = s.config.without_smo_fraction;
    for (int t = 0; t < s.timeline.horizon; t += s.timeline.dt_s) {
        if (!s.timeline.primary_boundary(t)) continue;
        std::vector<pm::SmoBid> bids;
        for (const auto& smo : s.smos) {
            const auto& inj = s.profiles.at(smo.node, static_cast<std::size_t>(t));
            double g = 0, l = 0, qg = 0, ql = 0;
            for (const auto& d : data::apply_split(smo.split, inj.P_kw, inj.Q_kvar)) {
                if (d.injection.P_kw > 0.0) {
                    g += d.injection.P_kw;
                    qg += d.injection.Q_kvar;
                } else if (d.injection.P_kw < 0.0) {
                    l -= d.injection.P_kw;
                    ql -= d.injection.Q_kvar;
                }
            }
            pm::SmoBid b;
            b.node = smo.node;
            b.s_base_mva = s.net.s_base_mva();
            b.PG0 = g / kw;
            b.PL0 = l / kw;
            b.QG0 = qg / kw;
            b.QL0 = ql / kw;
            auto range = [&](double x) {
                const auto [lo, hi] = data::flex_interval(x, f, f);
                return grid::Interval{lo, hi};
            };
            b.PG = range(b.PG0);
            b.PL = range(b.PL0);
            b.QG = range(b.QG0);
            b.QL = range(b.QL0);
            b.alpha_P = smo.alpha.alpha_fixed;
            b.alpha_Q = 0.1 * smo.alpha.alpha_fixed;
            b.beta_P = mean(smo.beta_P) * kw * kw;
            b.beta_Q = mean(smo.beta_Q) * kw * kw;
            bids.push_back(b);
        }
        const auto pc = clear_primary(s, t, bids, opt);
        record_pm(t, pc, bids, out);
    }
    return out;
}

}  // namespace lem::orch
