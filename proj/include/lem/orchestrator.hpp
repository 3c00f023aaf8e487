// Interleaved secondary/primary market timeline and the PM-only baseline.
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lem/commitment.hpp"
#include "lem/data/results_io.hpp"
#include "lem/data/scenario_config.hpp"
#include "lem/data/synthetic.hpp"
#include "lem/primary_market.hpp"
#include "lem/secondary_market.hpp"

namespace lem::orch {

class EmptyClearing : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class MissingProfiles : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A clearing error with the minute and node it happened at.
class TimelineError : public std::runtime_error {
  public:
    TimelineError(int t, int node, const std::string& what)
        : std::runtime_error("t=" + std::to_string(t) + " node " + std::to_string(node) + ": " + what),
          t_(t),
          node_(node) {}
    int t() const noexcept { return t_; }
    int node() const noexcept { return node_; }

  private:
    int t_, node_;
};

/// Minutes; the wholesale period equals the primary period.
struct Timeline {
    int dt_s = 1;
    int dt_p = 5;
    int horizon = 1440;

    void validate() const;
    int n_s() const { return dt_p / dt_s; }
    int n_p() const { return (horizon + dt_p - 1) / dt_p; }
    bool primary_boundary(int t) const { return t % dt_p == 0; }
};

/// Deterministic stream for (seed, step, smo, dca, purpose).
std::mt19937_64 rng_for(std::uint64_t seed, std::uint64_t step, int smo, int dca, std::uint32_t purpose);

struct AggregationInput {
    int node = 0;
    double kw_per_pu = 1000.0;
    double alpha_P = 6.0;  // $/pu^2 h
    double alpha_Q = 0.6;
    double s_base_mva = 1.0;
};

/// Splits the cleared DCAs into a generation side (P* > 0) and a load side
/// (P* < 0); each side spans its members' P* -/+ dP. beta is the mean of the
/// members' coefficients rescaled to pu.
pm::SmoBid aggregate_smo_bid(const sm::SmClearing& clearing, std::span<const sm::DcaBid> bids,
                             const AggregationInput& in);

struct SmoState {
    int node = 0;
    data::DcaSplit split;
    std::vector<double> beta_P, beta_Q;  // $/kW^2 h per DCA
    commitment::CommitmentLedger commitment;
    commitment::ResponseModel response;
    sm::BudgetLedger budget;
    pm::AlphaState alpha;
    std::vector<sm::Tariff> held;
    sm::PQ setpoint_kw;
    int setpoint_time = 0;  // minute of the PM clearing that produced the setpoint
    std::vector<pm::TariffSample> window;

    std::size_t n_dca() const { return split.kinds.size(); }
};

struct Scenario {
    data::ScenarioConfig config;
    grid::RadialNetwork net;
    data::ProfileSeries profiles;
    data::LmpSeries lmps;
    Timeline timeline;
    std::vector<SmoState> smos;  // by node id
    bool bootstrapped = false;
};

/// Reads or synthesizes the inputs and draws the per-SMO DCA population.
Scenario build_scenario(const data::ScenarioConfig& config);

/// DCA bids of one SMO at minute t, kW.
std::vector<sm::DcaBid> dca_bids(const Scenario& s, const SmoState& smo, int t);

/// Sets setpoints to the summed baselines, tariffs to the first wholesale
/// price, scores to 1, and credits one primary period at those prices.
void bootstrap(Scenario& s);

struct SmObservation {
    int t = 0;
    int node = 0;
    std::span<const sm::DcaBid> bids;
    const sm::SmClearing* clearing = nullptr;
    const sm::BudgetLedger* ledger_before = nullptr;
    std::span<const double> scores_before;
    std::span<const double> scores_after;
    std::span<const commitment::Schedule> schedules;
    std::span<const commitment::Response> responses;
    sm::PQ requested_setpoint;
};

struct PmObservation {
    int t = 0;
    std::span<const pm::SmoBid> bids;
    const pm::PmClearing* clearing = nullptr;
    pm::Lmp lambda;
};

struct RunOptions {
    std::function<void(const SmObservation&)> on_sm;
    std::function<void(const PmObservation&)> on_pm;
    bool record_sm = true;
};

struct RunSummary {
    std::size_t sm_clearings = 0;  // over all SMOs
    std::size_t pm_clearings = 0;
    std::size_t setpoint_fallbacks = 0;
    std::size_t budget_drops = 0;
    std::size_t price_infeasible = 0;
    std::size_t widened_stages = 0;
    std::size_t reduced_accuracy = 0;  // SM stages plus PM clearings
    double max_socp_gap = 0.0;
    double min_socp_gap = 0.0;
    std::vector<int> pm_times;
};

struct RunOutput {
    data::RunResults results;
    RunSummary summary;
};

/// With-SMO run over the configured horizon. bootstrap() is applied when
/// the scenario has not been bootstrapped yet.
RunOutput run_timeline(Scenario& s, const RunOptions& opt = {});

/// PM-only run: node flexibility is the configured fraction around the raw
/// gross generation and load baselines.
RunOutput run_without_smo(const Scenario& s, const RunOptions& opt = {});

}  // namespace lem::orch
