// Synthetic feeder, profiles and DCA bids for desk-scale studies.
#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "lem/data/profiles.hpp"
#include "lem/grid_model.hpp"

namespace lem::data {

enum class DcaKind { load, generator };

struct DcaBaseline {
    Injection injection;
    DcaKind kind = DcaKind::load;
};

/// How a node's injection is shared among its DCAs. Drawn once per node so
/// DCA identities persist over the day.
struct DcaSplit {
    std::vector<DcaKind> kinds;
    std::vector<double> weights;  // within-kind shares, positive
    double gen_share = 0.3;       // gross minority-side injection / |net|
};

DcaSplit draw_split(int n_dca, std::mt19937_64& rng, double p_gen = 0.5, double share_lo = 0.1,
                    double share_hi = 0.5);

/// Baselines summing to (P, Q). With both kinds present the minority side
/// carries gen_share x |P| and the majority side covers the rest.
std::vector<DcaBaseline> apply_split(const DcaSplit& split, double P_kw, double Q_kvar);

std::vector<DcaBaseline> disaggregate_node(double P_kw, double Q_kvar, int n_dca, std::mt19937_64& rng);

struct FlexBand {
    double P_lo = 0.0, P_hi = 0.0;
    double Q_lo = 0.0, Q_hi = 0.0;
};

/// x0 (1 - d_lo), x0 (1 + d_hi), reordered when x0 < 0.
std::pair<double, double> flex_interval(double x0, double d_lo, double d_hi);

/// Independent U[0, cap] draws for each endpoint on both axes.
FlexBand gen_flexibility_bids(const Injection& baseline, std::mt19937_64& rng, double cap = 0.5);

struct SyntheticParams {
    int smo_nodes = 79;
    int id_max = 114;  // SMO ids drawn from 1..id_max
    std::vector<int> pv_nodes{5, 20, 50, 63, 94};
    int slack_id = 149;
    double slack_kv = 13.2;
    double node_kv = 4.16;
    double s_base_mva = 1.0;
    double peak_load_kw = 3600.0;
    double pv_capacity_kw = 510.3;
    double load_power_factor = 0.95;
    double max_voltage_drop_sq = 0.05;  // at peak load, in v^2
    int minutes = 1440;
    Timestamp start = 1688169600;  // 2023-07-01T00:00:00
    double lmp_base = 0.035;       // $/kWh
    double lmp_peak_adder = 0.03;
    double lmp_noise = 0.004;
    std::uint64_t seed = 1;
};

struct SyntheticScenario {
    grid::FeederSpec feeder;
    ProfileSeries profiles;  // net injections, generation positive
    LmpSeries lmps;
    std::map<int, double> pv_nameplate_kw;
    std::vector<double> total_load_kw;  // per minute
    std::vector<double> total_pv_kw;
};

/// Daily load shape in [0, 1] with morning and evening peaks.
double load_shape(double hour);
/// Clear-sky PV output per unit of nameplate.
double pv_shape(double hour);

SyntheticScenario gen_synthetic_feeder(const SyntheticParams& params);

}  // namespace lem::data
