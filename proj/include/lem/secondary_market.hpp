// Secondary market clearing for one SMO and its budget bookkeeping.
#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lem/convex/lexicographic.hpp"

namespace lem::sm {

/// kW / kvar, generation positive; beta in $/kW^2.
struct DcaBid {
    int dca_id = 0;
    double P0 = 0.0, Q0 = 0.0;
    double P_lo = 0.0, P_hi = 0.0;
    double Q_lo = 0.0, Q_hi = 0.0;
    double beta_P = 0.5, beta_Q = 0.5;
};

void validate(const DcaBid& bid);

struct DcaClearing {
    int dca_id = 0;
    double P_star = 0.0, Q_star = 0.0;
    double dP = 0.0, dQ = 0.0;
    double mu_P = 0.0, mu_Q = 0.0;  // $/kWh, $/kvarh
};

struct PQ {
    double P = 0.0;
    double Q = 0.0;
};

struct SmClearing {
    std::vector<DcaClearing> dcas;
    std::array<double, 4> stage_values{};  // F1..F4 at the returned point
    std::array<double, 4> stage_optima{};  // F_k* reached by stage k
    std::array<double, 4> stage_bounds{};  // bounds imposed on later stages
    double relaxation_gap = 0.0;
    PQ setpoint;                // balance target actually used
    bool budget_dropped = false;  // budget rows removed to reach feasibility
    bool price_infeasible = false;
    std::vector<std::string> widened_stages;
    std::vector<std::string> reduced_accuracy_stages;
    std::string status = "optimal";
};

class InfeasibleSetpoint : public std::runtime_error {
  public:
    InfeasibleSetpoint(PQ gap, const std::string& what) : std::runtime_error(what), gap_(gap) {}
    PQ gap() const noexcept { return gap_; }

  private:
    PQ gap_;
};

class SolverFailure : public std::runtime_error {
  public:
    SolverFailure(std::size_t stage, const std::string& what) : std::runtime_error(what), stage_(stage) {}
    std::size_t stage() const noexcept { return stage_; }

  private:
    std::size_t stage_;
};

class PriceInfeasible : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class ZeroRemainingClearings : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

enum class BudgetMode { strict, relaxed, quasi_multiperiod };

const char* to_string(BudgetMode m);
BudgetMode parse_budget_mode(const std::string& s);

/// Signed dollar amounts; a negative credit means the SMO owes the PMO.
struct BudgetLedger {
    BudgetMode mode = BudgetMode::quasi_multiperiod;
    int horizon_periods = 288;
    int clearings_per_period = 5;
    PQ revenue_received;   // cumulative PMO credits
    PQ paid_out;           // cumulative DCA payments
    PQ period_credit;      // credit of the current primary period
    PQ period_paid;        // payments inside the current primary period
    int remaining_secondary_clearings = 5;

    /// Credit from a PM clearing; opens a new primary period.
    void credit(PQ amount);
    /// Payment of one SM clearing.
    void debit(PQ amount);
};

/// Right-hand side in the form the mode is stated in: strict gives the
/// period credit, relaxed the cumulative revenue, quasi the per-clearing
/// share of the leftover revenue.
PQ budget_rhs(const BudgetLedger& ledger, BudgetMode mode);
PQ budget_rhs(const BudgetLedger& ledger);

/// Bound on the dollars a single clearing may pay out.
PQ clearing_budget(const BudgetLedger& ledger);

struct FeasibilityGap {
    PQ gap;  // signed: positive when the setpoint lies above the bid range
    bool ok() const noexcept { return gap.P == 0.0 && gap.Q == 0.0; }
};

FeasibilityGap feasibility_check(std::span<const DcaBid> bids, PQ setpoint);

/// Projects the setpoint onto the aggregate bid range.
PQ relax_to_nearest(std::span<const DcaBid> bids, PQ setpoint);

struct PriceCaps {
    double P = 0.2;
    double Q = 0.2;
};

struct Tariff {
    double P = 0.0;
    double Q = 0.0;
};

struct SmSettings {
    convex::LexiConfig lexi;
    convex::Tolerances tol;
    double dt_hours = 1.0 / 60.0;
    double zero_injection_kw = 1e-6;
};

/// Clears the four stages (trust-weighted injection, SMO cost, flexibility,
/// disutility), then prices the frozen quantities exactly.
/// held_tariffs supplies the tariff of DCAs cleared at zero injection.
SmClearing clear_sm(std::span<const DcaBid> bids, std::span<const double> scores, PQ setpoint,
                    std::span<const Tariff> held_tariffs, const BudgetLedger& ledger, const PriceCaps& caps,
                    const SmSettings& settings = {});

struct PricedQuantities {
    std::vector<Tariff> tariffs;
    bool feasible = true;  // false: budget unattainable, caps applied
};

/// Exact tariffs for fixed quantities: minimizes sum(mu * P) per axis under
/// the ceilings and the one-clearing budget.
PricedQuantities recover_prices(std::span<const DcaClearing> quantities, PQ budget, const PriceCaps& caps,
                                std::span<const Tariff> held_tariffs, double dt_hours,
                                double zero_injection_kw = 1e-6);

/// Throws PriceInfeasible instead of reporting it.
std::vector<Tariff> recover_prices_strict(std::span<const DcaClearing> quantities, PQ budget, const PriceCaps& caps,
                                          std::span<const Tariff> held_tariffs, double dt_hours);

/// Dollars paid to DCAs by a clearing (positive: SMO pays out).
PQ payouts(std::span<const DcaClearing> clearing, double dt_hours);

}  // namespace lem::sm
