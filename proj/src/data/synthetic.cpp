#include "lem/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace lem::data {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
    return std::mt19937_64(seq);
}

double bump(double hour, double centre, double width) {
    double d = std::fmod(std::abs(hour - centre), 24.0);
    d = std::min(d, 24.0 - d);
    return std::exp(-0.5 * d * d / (width * width));
}

}  // namespace

DcaSplit draw_split(int n_dca, std::mt19937_64& rng, double p_gen, double share_lo, double share_hi) {
    if (n_dca < 1) throw std::invalid_argument("a node needs at least one DCA");
    if (!(p_gen >= 0.0 && p_gen <= 1.0) || !(share_lo >= 0.0 && share_lo <= share_hi && share_hi < 1.0)) {
        throw std::invalid_argument("bad disaggregation parameters");
    }
    std::bernoulli_distribution is_gen(p_gen);
    std::uniform_real_distribution<double> w(0.5, 1.5);
    DcaSplit s;
    for (int j = 0; j < n_dca; ++j) {
        s.kinds.push_back(is_gen(rng) ? DcaKind::generator : DcaKind::load);
        s.weights.push_back(w(rng));
    }
    // Both kinds whenever possible so either sign of the node total can be met.
    if (n_dca >= 2) {
        const auto gens = std::count(s.kinds.begin(), s.kinds.end(), DcaKind::generator);
        if (gens == 0) s.kinds.back() = DcaKind::generator;
        if (gens == n_dca) s.kinds.front() = DcaKind::load;
    }
    s.gen_share = std::uniform_real_distribution<double>(share_lo, share_hi)(rng);
    return s;
}

std::vector<DcaBaseline> apply_split(const DcaSplit& split, double P_kw, double Q_kvar) {
    const std::size_t n = split.kinds.size();
    if (n == 0 || split.weights.size() != n) throw std::invalid_argument("malformed DCA split");
    std::vector<DcaBaseline> out(n);
    if (n == 1) {
        out[0] = {{P_kw, Q_kvar}, P_kw >= 0.0 ? DcaKind::generator : DcaKind::load};
        return out;
    }
    double w_gen = 0.0, w_load = 0.0;
    for (std::size_t j = 0; j < n; ++j) (split.kinds[j] == DcaKind::generator ? w_gen : w_load) += split.weights[j];
    const double mag = std::abs(P_kw);
    const double minority = split.gen_share * mag;
    const double gen_total = P_kw >= 0.0 ? mag + minority : minority;
    const double load_total = P_kw >= 0.0 ? minority : mag + minority;
    double abs_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const bool gen = split.kinds[j] == DcaKind::generator;
        out[j].kind = split.kinds[j];
        out[j].injection.P_kw = gen ? gen_total * split.weights[j] / w_gen : -load_total * split.weights[j] / w_load;
        abs_sum += std::abs(out[j].injection.P_kw);
    }
    // The last DCA absorbs rounding so the totals hold exactly.
    double p_acc = 0.0, q_acc = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        out[j].injection.Q_kvar =
            abs_sum > 0.0 ? Q_kvar * std::abs(out[j].injection.P_kw) / abs_sum : Q_kvar / static_cast<double>(n);
        p_acc += out[j].injection.P_kw;
        q_acc += out[j].injection.Q_kvar;
    }
    out[n - 1].injection.P_kw = P_kw - p_acc;
    out[n - 1].injection.Q_kvar = Q_kvar - q_acc;
    return out;
}

std::vector<DcaBaseline> disaggregate_node(double P_kw, double Q_kvar, int n_dca, std::mt19937_64& rng) {
    return apply_split(draw_split(n_dca, rng), P_kw, Q_kvar);
}

std::pair<double, double> flex_interval(double x0, double d_lo, double d_hi) {
    const double a = x0 * (1.0 - d_lo), b = x0 * (1.0 + d_hi);
    return {std::min(a, b), std::max(a, b)};
}

FlexBand gen_flexibility_bids(const Injection& baseline, std::mt19937_64& rng, double cap) {
    if (!(cap >= 0.0 && cap <= 1.0)) throw std::invalid_argument("flexibility cap outside [0, 1]");
    std::uniform_real_distribution<double> u(0.0, cap);
    FlexBand f;
    const double dpl = u(rng), dph = u(rng), dql = u(rng), dqh = u(rng);
    std::tie(f.P_lo, f.P_hi) = flex_interval(baseline.P_kw, dpl, dph);
    std::tie(f.Q_lo, f.Q_hi) = flex_interval(baseline.Q_kvar, dql, dqh);
    return f;
}

double load_shape(double hour) {
    return std::min(1.0, 0.42 + 0.33 * bump(hour, 8.0, 1.6) + 0.55 * bump(hour, 19.0, 2.2));
}

double pv_shape(double hour) {
    if (hour <= 6.0 || hour >= 18.0) return 0.0;
    return std::pow(std::sin(std::numbers::pi * (hour - 6.0) / 12.0), 1.5);
}

SyntheticScenario gen_synthetic_feeder(const SyntheticParams& p) {
    if (p.smo_nodes < 1 || p.minutes < 1 || !(p.peak_load_kw > 0.0) || !(p.pv_capacity_kw >= 0.0)) {
        throw std::invalid_argument("bad synthetic scenario parameters");
    }
    std::vector<int> pv;
    for (int id : p.pv_nodes) {
        if (id >= 1 && id <= p.id_max && static_cast<int>(pv.size()) < p.smo_nodes) pv.push_back(id);
    }
    std::sort(pv.begin(), pv.end());
    pv.erase(std::unique(pv.begin(), pv.end()), pv.end());
    if (p.smo_nodes > p.id_max) throw std::invalid_argument("more SMO nodes than available ids");
    if (p.slack_id >= 1 && p.slack_id <= p.id_max) throw std::invalid_argument("slack id collides with SMO ids");

    auto topo = stream(p.seed, 1);
    std::vector<int> pool;
    for (int id = 1; id <= p.id_max; ++id) {
        if (!std::binary_search(pv.begin(), pv.end(), id)) pool.push_back(id);
    }
    std::vector<int> ids(pv);
    std::sample(pool.begin(), pool.end(), std::back_inserter(ids), p.smo_nodes - static_cast<int>(pv.size()), topo);
    std::sort(ids.begin(), ids.end());
    const std::size_t n = ids.size();

    // Parent of ids[k] among the few previous nodes gives a long, branchy feeder.
    std::vector<int> parent(n, -1);
    for (std::size_t k = 1; k < n; ++k) {
        const std::size_t lo = k >= 3 ? k - 3 : 0;
        parent[k] = static_cast<int>(std::uniform_int_distribution<std::size_t>(lo, k - 1)(topo));
    }
    std::uniform_real_distribution<double> r_ohm(0.05, 0.2), xr(1.0, 2.0);
    std::vector<double> r(n), x(n);
    for (std::size_t k = 0; k < n; ++k) {
        r[k] = r_ohm(topo);
        x[k] = r[k] * xr(topo);
    }

    SyntheticScenario s;
    auto& f = s.feeder;
    f.s_base_mva = p.s_base_mva;
    grid::NodeRecord slack;
    slack.id = p.slack_id;
    slack.kind = grid::NodeKind::slack;
    slack.kv_base = p.slack_kv;
    slack.v_min_kv = slack.v_max_kv = p.slack_kv;
    slack.bounds_kw.pg = {-grid::kUnbounded, grid::kUnbounded};
    slack.bounds_kw.pl = {0.0, 0.0};
    slack.bounds_kw.ql = {0.0, 0.0};
    f.nodes.push_back(slack);
    for (int id : ids) {
        grid::NodeRecord nr;
        nr.id = id;
        nr.kv_base = p.node_kv;
        nr.v_min_kv = 0.95 * p.node_kv;
        nr.v_max_kv = 1.05 * p.node_kv;
        f.nodes.push_back(nr);
    }

    // Loads and PV.
    auto prof = stream(p.seed, 2);
    std::uniform_real_distribution<double> weight(0.3, 1.7), shift(-0.75, 0.75), jitter(-0.03, 0.03);
    std::vector<double> w(n), sh(n);
    for (std::size_t k = 0; k < n; ++k) {
        w[k] = weight(prof);
        sh[k] = shift(prof);
    }
    const auto T = static_cast<std::size_t>(p.minutes);
    std::vector<std::vector<double>> load(n, std::vector<double>(T));
    s.total_load_kw.assign(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const double hour = std::fmod(static_cast<double>(t) / 60.0, 24.0);
        for (std::size_t k = 0; k < n; ++k) {
            load[k][t] = w[k] * load_shape(hour + sh[k]) * (1.0 + jitter(prof));
        }
    }
    double peak = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        double tot = 0.0;
        for (std::size_t k = 0; k < n; ++k) tot += load[k][t];
        peak = std::max(peak, tot);
    }
    const double scale = p.peak_load_kw / peak;
    for (auto& row : load) {
        for (double& v : row) v *= scale;
    }
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < n; ++k) s.total_load_kw[t] += load[k][t];
    }

    std::vector<double> pv_w;
    for (std::size_t i = 0; i < pv.size(); ++i) pv_w.push_back(weight(prof));
    const double pv_wsum = std::accumulate(pv_w.begin(), pv_w.end(), 0.0);
    double assigned = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double cap = i + 1 == pv.size() ? p.pv_capacity_kw - assigned : p.pv_capacity_kw * pv_w[i] / pv_wsum;
        s.pv_nameplate_kw[pv[i]] = cap;
        assigned += cap;
    }

    const double tan_phi = std::tan(std::acos(p.load_power_factor));
    s.profiles.start = p.start;
    s.profiles.cadence_s = 60;
    s.total_pv_kw.assign(T, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        auto& rows = s.profiles.nodes[ids[k]];
        rows.resize(T);
        const auto it = s.pv_nameplate_kw.find(ids[k]);
        for (std::size_t t = 0; t < T; ++t) {
            const double hour = std::fmod(static_cast<double>(t) / 60.0, 24.0);
            const double gen = it == s.pv_nameplate_kw.end() ? 0.0 : it->second * pv_shape(hour);
            s.total_pv_kw[t] += gen;
            rows[t] = {gen - load[k][t], -tan_phi * load[k][t]};
        }
    }

    // Downstream sums per line (indexed by receiving node position).
    auto downstream = [&](std::size_t t) {
        std::vector<double> P(n), Q(n);
        for (std::size_t k = n; k-- > 0;) {
            const auto& inj = s.profiles.nodes[ids[k]][t];
            P[k] += -inj.P_kw;
            Q[k] += -inj.Q_kvar;
            if (parent[k] >= 0) {
                P[static_cast<std::size_t>(parent[k])] += P[k];
                Q[static_cast<std::size_t>(parent[k])] += Q[k];
            }
        }
        return std::pair{P, Q};
    };

    // Scale impedances so the linearized drop at peak load meets the target.
    const auto t_peak = static_cast<std::size_t>(
        std::max_element(s.total_load_kw.begin(), s.total_load_kw.end()) - s.total_load_kw.begin());
    {
        const auto [P, Q] = downstream(t_peak);
        const double zb = grid::impedance_base_ohm(p.node_kv, p.s_base_mva);
        const double kw = p.s_base_mva * 1000.0;
        std::vector<double> drop(n, 0.0);
        double worst = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double own = 2.0 * (r[k] * P[k] + x[k] * Q[k]) / zb / kw;
            drop[k] = own + (parent[k] >= 0 ? drop[static_cast<std::size_t>(parent[k])] : 0.0);
            worst = std::max(worst, drop[k]);
        }
        if (worst > 0.0) {
            const double k_scale = p.max_voltage_drop_sq / worst;
            for (std::size_t k = 0; k < n; ++k) {
                r[k] *= k_scale;
                x[k] *= k_scale;
            }
        }
    }

    std::vector<double> peak_s(n, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        const auto [P, Q] = downstream(t);
        for (std::size_t k = 0; k < n; ++k) peak_s[k] = std::max(peak_s[k], std::hypot(P[k], Q[k]));
    }
    std::vector<std::pair<int, double>> peaks;
    for (std::size_t k = 0; k < n; ++k) {
        const int from = parent[k] >= 0 ? ids[static_cast<std::size_t>(parent[k])] : p.slack_id;
        f.lines.push_back({from, ids[k], r[k], x[k], std::nullopt});
        peaks.emplace_back(ids[k], peak_s[k]);
    }
    grid::assign_default_line_limits(f, peaks);

    auto price = stream(p.seed, 3);
    std::normal_distribution<double> noise(0.0, p.lmp_noise);
    s.lmps.start = p.start;
    s.lmps.cadence_s = 300;
    const std::size_t periods = (T + 4) / 5;
    for (std::size_t k = 0; k < periods; ++k) {
        const double hour = std::fmod(static_cast<double>(k) / 12.0, 24.0);
        const double v = p.lmp_base + p.lmp_peak_adder * (load_shape(hour) - 0.42) / 0.58 + noise(price);
        s.lmps.usd_per_kwh.push_back(std::max(0.005, v));
    }
    return s;
}

}  // namespace lem::data
