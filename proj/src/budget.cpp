#include <algorithm>
#include <cmath>

#include "lem/secondary_market.hpp"

namespace lem::sm {

const char* to_string(BudgetMode m) {
    switch (m) {
        case BudgetMode::strict: return "strict";
        case BudgetMode::relaxed: return "relaxed";
        case BudgetMode::quasi_multiperiod: return "quasi";
    }
    return "?";
}

BudgetMode parse_budget_mode(const std::string& s) {
    if (s == "strict") return BudgetMode::strict;
    if (s == "relaxed") return BudgetMode::relaxed;
    if (s == "quasi" || s == "quasi_multiperiod") return BudgetMode::quasi_multiperiod;
    throw std::invalid_argument("unknown budget mode '" + s + "'");
}

void BudgetLedger::credit(PQ amount) {
    revenue_received.P += amount.P;
    revenue_received.Q += amount.Q;
    period_credit = amount;
    period_paid = {};
    remaining_secondary_clearings = clearings_per_period;
}

void BudgetLedger::debit(PQ amount) {
    paid_out.P += amount.P;
    paid_out.Q += amount.Q;
    period_paid.P += amount.P;
    period_paid.Q += amount.Q;
    remaining_secondary_clearings = std::max(0, remaining_secondary_clearings - 1);
}

PQ budget_rhs(const BudgetLedger& ledger, BudgetMode mode) {
    switch (mode) {
        case BudgetMode::strict: return ledger.period_credit;
        case BudgetMode::relaxed: return ledger.revenue_received;
        case BudgetMode::quasi_multiperiod: {
            if (ledger.remaining_secondary_clearings <= 0) {
                throw ZeroRemainingClearings("no secondary clearings left in the primary period");
            }
            const double n = ledger.remaining_secondary_clearings;
            return {(ledger.revenue_received.P - ledger.paid_out.P) / n,
                    (ledger.revenue_received.Q - ledger.paid_out.Q) / n};
        }
    }
    return {};
}

PQ budget_rhs(const BudgetLedger& ledger) { return budget_rhs(ledger, ledger.mode); }

PQ clearing_budget(const BudgetLedger& ledger) {
    const PQ rhs = budget_rhs(ledger);
    switch (ledger.mode) {
        case BudgetMode::strict: return {rhs.P - ledger.period_paid.P, rhs.Q - ledger.period_paid.Q};
        case BudgetMode::relaxed: return {rhs.P - ledger.paid_out.P, rhs.Q - ledger.paid_out.Q};
        case BudgetMode::quasi_multiperiod: return rhs;
    }
    return rhs;
}

PQ payouts(std::span<const DcaClearing> clearing, double dt_hours) {
    PQ out;
    for (const auto& c : clearing) {
        out.P += c.mu_P * c.P_star * dt_hours;
        out.Q += c.mu_Q * c.Q_star * dt_hours;
    }
    return out;
}

namespace {

// One axis: mu = cap on net loads, 0 on net generators, held tariff at zero.
template <class Get>
bool price_axis(std::span<const DcaClearing> q, double budget, double cap, std::span<const Tariff> held,
                double dt, double zero, Get get, std::vector<Tariff>& out, double Tariff::*field) {
    double paid = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
        const double p = get(q[j]);
        double mu;
        if (p < -zero) {
            mu = cap;
        } else if (p > zero) {
            mu = 0.0;
        } else {
            mu = held.empty() ? 0.0 : std::clamp(held[j].*field, 0.0, cap);
        }
        out[j].*field = mu;
        paid += mu * p * dt;
    }
    return paid <= budget + 1e-9;
}

}  // namespace

PricedQuantities recover_prices(std::span<const DcaClearing> quantities, PQ budget, const PriceCaps& caps,
                                std::span<const Tariff> held_tariffs, double dt_hours, double zero_injection_kw) {
    if (!held_tariffs.empty() && held_tariffs.size() != quantities.size()) {
        throw std::invalid_argument("held tariffs do not match the clearing");
    }
    PricedQuantities out;
    out.tariffs.resize(quantities.size());
    const bool okP = price_axis(quantities, budget.P, caps.P, held_tariffs, dt_hours, zero_injection_kw,
                                [](const DcaClearing& c) { return c.P_star; }, out.tariffs, &Tariff::P);
    const bool okQ = price_axis(quantities, budget.Q, caps.Q, held_tariffs, dt_hours, zero_injection_kw,
                                [](const DcaClearing& c) { return c.Q_star; }, out.tariffs, &Tariff::Q);
    out.feasible = okP && okQ;
    return out;
}

std::vector<Tariff> recover_prices_strict(std::span<const DcaClearing> quantities, PQ budget, const PriceCaps& caps,
                                          std::span<const Tariff> held_tariffs, double dt_hours) {
    auto r = recover_prices(quantities, budget, caps, held_tariffs, dt_hours);
    if (!r.feasible) throw PriceInfeasible("budget cannot be met at any tariff within the ceilings");
    return std::move(r.tariffs);
}

}  // namespace lem::sm
