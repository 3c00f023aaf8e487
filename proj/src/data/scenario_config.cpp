#include "lem/data/scenario_config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace lem::data {

using nlohmann::json;

namespace {

// Reads keys into fields and remembers which ones were consumed.
class Reader {
  public:
    Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj.is_object()) throw std::invalid_argument(where_ + " must be a JSON object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception& e) {
            throw std::invalid_argument(where_ + "." + key + ": " + e.what());
        }
    }

    const json* sub(const char* key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void finish() const {
        for (const auto& [k, v] : obj_.items()) {
            if (!seen_.count(k)) throw std::invalid_argument("unknown key '" + where_ + "." + k + "'");
        }
    }

  private:
    const json& obj_;
    std::string where_;
    std::set<std::string> seen_;
};

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid configuration: ") + what);
}

}  // namespace

void ScenarioConfig::validate() const {
    require(cap_P >= 0.0 && cap_Q >= 0.0, "price caps must be nonnegative");
    require(budget_mode == "strict" || budget_mode == "relaxed" || budget_mode == "quasi",
            "budget_mode must be strict, relaxed or quasi");
    require(epsilon >= 0.0, "epsilon must be nonnegative");
    require(xi >= 0.0, "xi must be nonnegative");
    require(horizon_minutes > 0, "horizon_minutes must be positive");
    require(dt_s_minutes > 0 && dt_p_minutes >= dt_s_minutes && dt_p_minutes % dt_s_minutes == 0,
            "dt_p_minutes must be a positive multiple of dt_s_minutes");
    require(dca_min >= 1 && dca_min <= dca_max, "dca range must be ordered and start at 1 or more");
    require(flex_cap >= 0.0 && flex_cap <= 1.0, "flex_cap must lie in [0, 1]");
    require(beta_lo > 0.0 && beta_lo <= beta_hi, "beta range must be positive and ordered");
    require(alpha_lo > 0.0 && alpha_lo <= alpha_hi, "alpha range must be positive and ordered");
    require(p_gen >= 0.0 && p_gen <= 1.0, "p_gen must lie in [0, 1]");
    require(gen_share_lo >= 0.0 && gen_share_lo <= gen_share_hi && gen_share_hi < 1.0,
            "gen share range must be ordered inside [0, 1)");
    require(without_smo_fraction >= 0.0 && without_smo_fraction <= 1.0, "without_smo_fraction must lie in [0, 1]");
    require(!response.follow_probs.empty(), "response.follow_probs must not be empty");
    for (double p : response.follow_probs) require(p >= 0.0 && p <= 1.0, "follow probabilities must lie in [0, 1]");
    require(response.overshoot_scale >= 0.0 && response.noise_scale >= 0.0, "response scales must be nonnegative");
    const bool any_file = !feeder_path.empty() || !profiles_path.empty() || !lmp_path.empty();
    const bool all_files = !feeder_path.empty() && !profiles_path.empty() && !lmp_path.empty();
    require(!any_file || all_files, "feeder, profiles and lmp paths must be given together");
}

ScenarioConfig config_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("configuration is not valid JSON: ") + e.what());
    }
    ScenarioConfig c;
    Reader r(doc, "config");
    r.get("feeder_path", c.feeder_path);
    r.get("profiles_path", c.profiles_path);
    r.get("lmp_path", c.lmp_path);
    r.get("cap_P", c.cap_P);
    r.get("cap_Q", c.cap_Q);
    r.get("budget_mode", c.budget_mode);
    r.get("epsilon", c.epsilon);
    r.get("xi", c.xi);
    r.get("seed", c.seed);
    r.get("horizon_minutes", c.horizon_minutes);
    r.get("dt_s_minutes", c.dt_s_minutes);
    r.get("dt_p_minutes", c.dt_p_minutes);
    r.get("dca_min", c.dca_min);
    r.get("dca_max", c.dca_max);
    r.get("flex_cap", c.flex_cap);
    r.get("beta_lo", c.beta_lo);
    r.get("beta_hi", c.beta_hi);
    r.get("alpha_lo", c.alpha_lo);
    r.get("alpha_hi", c.alpha_hi);
    r.get("p_gen", c.p_gen);
    r.get("gen_share_lo", c.gen_share_lo);
    r.get("gen_share_hi", c.gen_share_hi);
    r.get("without_smo_fraction", c.without_smo_fraction);
    r.get("flat_rate", c.flat_rate);
    if (const json* resp = r.sub("response")) {
        Reader rr(*resp, "config.response");
        rr.get("follow_probs", c.response.follow_probs);
        rr.get("overshoot_scale", c.response.overshoot_scale);
        rr.get("noise_scale", c.response.noise_scale);
        rr.finish();
    }
    if (const json* syn = r.sub("synthetic")) {
        auto& s = c.synthetic;
        Reader rs(*syn, "config.synthetic");
        rs.get("smo_nodes", s.smo_nodes);
        rs.get("id_max", s.id_max);
        rs.get("pv_nodes", s.pv_nodes);
        rs.get("slack_id", s.slack_id);
        rs.get("slack_kv", s.slack_kv);
        rs.get("node_kv", s.node_kv);
        rs.get("s_base_mva", s.s_base_mva);
        rs.get("peak_load_kw", s.peak_load_kw);
        rs.get("pv_capacity_kw", s.pv_capacity_kw);
        rs.get("load_power_factor", s.load_power_factor);
        rs.get("max_voltage_drop_sq", s.max_voltage_drop_sq);
        rs.get("minutes", s.minutes);
        std::string start;
        rs.get("start", start);
        if (!start.empty()) s.start = parse_iso8601(start);
        rs.get("lmp_base", s.lmp_base);
        rs.get("lmp_peak_adder", s.lmp_peak_adder);
        rs.get("lmp_noise", s.lmp_noise);
        rs.finish();
    }
    r.finish();
    c.validate();
    return c;
}

std::string config_to_json(const ScenarioConfig& c) {
    const auto& s = c.synthetic;
    json syn = {{"smo_nodes", s.smo_nodes},
                {"id_max", s.id_max},
                {"pv_nodes", s.pv_nodes},
                {"slack_id", s.slack_id},
                {"slack_kv", s.slack_kv},
                {"node_kv", s.node_kv},
                {"s_base_mva", s.s_base_mva},
                {"peak_load_kw", s.peak_load_kw},
                {"pv_capacity_kw", s.pv_capacity_kw},
                {"load_power_factor", s.load_power_factor},
                {"max_voltage_drop_sq", s.max_voltage_drop_sq},
                {"minutes", s.minutes},
                {"start", format_iso8601(s.start)},
                {"lmp_base", s.lmp_base},
                {"lmp_peak_adder", s.lmp_peak_adder},
                {"lmp_noise", s.lmp_noise}};
    json doc = {{"feeder_path", c.feeder_path},
                {"profiles_path", c.profiles_path},
                {"lmp_path", c.lmp_path},
                {"cap_P", c.cap_P},
                {"cap_Q", c.cap_Q},
                {"budget_mode", c.budget_mode},
                {"epsilon", c.epsilon},
                {"xi", c.xi},
                {"seed", c.seed},
                {"horizon_minutes", c.horizon_minutes},
                {"dt_s_minutes", c.dt_s_minutes},
                {"dt_p_minutes", c.dt_p_minutes},
                {"dca_min", c.dca_min},
                {"dca_max", c.dca_max},
                {"flex_cap", c.flex_cap},
                {"beta_lo", c.beta_lo},
                {"beta_hi", c.beta_hi},
                {"alpha_lo", c.alpha_lo},
                {"alpha_hi", c.alpha_hi},
                {"p_gen", c.p_gen},
                {"gen_share_lo", c.gen_share_lo},
                {"gen_share_hi", c.gen_share_hi},
                {"without_smo_fraction", c.without_smo_fraction},
                {"flat_rate", c.flat_rate},
                {"response",
                 {{"follow_probs", c.response.follow_probs},
                  {"overshoot_scale", c.response.overshoot_scale},
                  {"noise_scale", c.response.noise_scale}}},
                {"synthetic", syn}};
    return doc.dump(2) + "\n";
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open configuration '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    ScenarioConfig c = config_from_json(ss.str());
    const auto base = std::filesystem::path(path).parent_path();
    for (auto* p : {&c.feeder_path, &c.profiles_path, &c.lmp_path}) {
        if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
    }
    return c;
}

void save_config(const std::string& path, const ScenarioConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write configuration '" + path + "'");
    out << config_to_json(cfg);
}

}  // namespace lem::data
