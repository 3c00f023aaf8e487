// Primary market: SOCP-relaxed branch-flow OPF and d-LMP extraction.
#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lem/convex/program.hpp"
#include "lem/convex/solver.hpp"
#include "lem/grid_model.hpp"

namespace lem::pm {

using grid::Interval;

/// Aggregated offer of one SMO node, per unit. alpha in $/(pu^2 h) and beta
/// in $/(pu^2 h).
struct SmoBid {
    int node = 0;
    double PG0 = 0.0, QG0 = 0.0, PL0 = 0.0, QL0 = 0.0;
    Interval PG{0.0, 0.0}, QG{0.0, 0.0}, PL{0.0, 0.0}, QL{0.0, 0.0};
    double beta_P = 1.0, beta_Q = 1.0;
    double alpha_P = 6.0, alpha_Q = 0.6;
    double s_base_mva = 1.0;
};

void validate(const SmoBid& bid);

/// Wholesale prices at the PCC, $/kWh.
struct Lmp {
    double P = 0.0;
    double Q = 0.0;
};

inline Lmp lmp_from_p(double p) { return {p, 0.1 * p}; }

class MissingBid : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class InconsistentBase : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

class Infeasible : public std::runtime_error {
  public:
    Infeasible(std::vector<std::string> violating, const std::string& what)
        : std::runtime_error(what), violating_(std::move(violating)) {}
    /// Constraint names carrying the infeasibility certificate, strongest first.
    const std::vector<std::string>& violating() const noexcept { return violating_; }

  private:
    std::vector<std::string> violating_;
};

class SolverFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct NodeVars {
    int id = 0;
    convex::VarId v, PG, QG, PL, QL;
    convex::ConstraintId balance_P, balance_Q;
};

struct LineVars {
    int from = 0, to = 0;
    convex::VarId P, Q, l;
    convex::ConstraintId relaxation, thermal, drop;
};

struct OpfModel {
    convex::ConvexProgram program;
    std::vector<NodeVars> nodes;  // network node order
    std::vector<LineVars> lines;  // network line order
    double kw_per_pu = 1000.0;
};

/// Builds the OPF. Objective in $/h: PCC import at the wholesale price,
/// quadratic generation cost and load disutility at SMO nodes, and xi times
/// the resistive losses. Balance rows read "net injection - outflow = rhs",
/// so their duals are marginal costs of extra demand.
OpfModel assemble_opf(const grid::RadialNetwork& net, std::span<const SmoBid> bids, Lmp lambda, double xi = 100.0);

struct NodeResult {
    int id = 0;
    double P_net = 0.0, Q_net = 0.0;  // pu
    double PG = 0.0, QG = 0.0, PL = 0.0, QL = 0.0;
    double v_sq = 0.0;
    double dlmp_P = 0.0, dlmp_Q = 0.0;  // $/kWh
};

struct LineResult {
    int from = 0, to = 0;
    double P = 0.0, Q = 0.0, l = 0.0;
    double socp_gap = 0.0;
};

struct PmClearing {
    std::vector<NodeResult> nodes;
    std::vector<LineResult> lines;
    double P_pcc = 0.0, Q_pcc = 0.0;
    double losses_P = 0.0, losses_Q = 0.0;
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool reduced_accuracy = false;  // solver stalled within the reduced tolerances

    const NodeResult& node(int id) const;
};

PmClearing clear_pm(const grid::RadialNetwork& net, std::span<const SmoBid> bids, Lmp lambda, double xi = 100.0,
                    const convex::Tolerances& tol = {});

/// Reads a solved model into a clearing.
PmClearing extract(const grid::RadialNetwork& net, const OpfModel& model, const convex::Solution& sol);

struct ExactnessReport {
    std::vector<double> gaps;  // per line, v*l - (P^2 + Q^2)
    std::vector<std::size_t> flagged;
    double max_gap = 0.0;
    double min_gap = 0.0;
};

ExactnessReport check_socp_exactness(const PmClearing& clearing, double flag_above = 1e-5);

/// Generation cost state of one SMO.
struct AlphaState {
    double alpha_fixed = 6.0;
    double alpha_var = 0.0;
    std::vector<double> history;  // alpha_var per primary period
};

struct TariffSample {
    double mu = 0.0;      // $/kWh
    double P_abs = 0.0;   // |P|, any consistent unit
};

class EmptyWindow : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// |P|-weighted mean tariff over the window.
double injection_weighted_tariff(std::span<const TariffSample> window);

/// Updates alpha_var from the last SM clearings and returns fixed + var.
/// An empty or zero-weight window carries the previous alpha_var over.
double update_alpha(AlphaState& state, std::span<const TariffSample> window);

}  // namespace lem::pm
