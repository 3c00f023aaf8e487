// Scenario configuration, stored as JSON.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lem/data/synthetic.hpp"

namespace lem::data {

struct ResponseParams {
    std::vector<double> follow_probs{1.0, 0.8, 0.3};  // cycled over each SMO's DCAs
    double overshoot_scale = 0.5;
    double noise_scale = 1.0;
};

struct ScenarioConfig {
    // Input files; all empty selects the synthetic generator.
    std::string feeder_path;
    std::string profiles_path;
    std::string lmp_path;
    SyntheticParams synthetic;

    double cap_P = 0.2;  // $/kWh
    double cap_Q = 0.2;
    std::string budget_mode = "quasi";
    double epsilon = 0.05;
    double xi = 100.0;
    std::uint64_t seed = 1;
    int horizon_minutes = 1440;
    int dt_s_minutes = 1;
    int dt_p_minutes = 5;

    int dca_min = 3;
    int dca_max = 5;
    double flex_cap = 0.5;
    double beta_lo = 0.1;  // $/kW^2 h
    double beta_hi = 1.0;
    double alpha_lo = 4.0;  // $/pu^2 h
    double alpha_hi = 8.0;
    double p_gen = 0.5;
    double gen_share_lo = 0.1;
    double gen_share_hi = 0.5;
    double without_smo_fraction = 0.5;
    double flat_rate = 0.129;
    ResponseParams response;

    bool synthetic_inputs() const { return feeder_path.empty() && profiles_path.empty() && lmp_path.empty(); }
    /// Throws std::invalid_argument naming the first offending field.
    void validate() const;
};

/// Unknown keys are rejected; missing keys keep their defaults.
ScenarioConfig config_from_json(const std::string& text);
std::string config_to_json(const ScenarioConfig& cfg);

/// Relative input paths are resolved against the file's directory.
ScenarioConfig load_config(const std::string& path);
void save_config(const std::string& path, const ScenarioConfig& cfg);

}  // namespace lem::data
