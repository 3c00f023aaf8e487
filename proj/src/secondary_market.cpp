#include "lem/secondary_market.hpp"

#include <algorithm>
#include <cmath>

namespace lem::sm {

using convex::LinearExpr;
using convex::Objective;
using convex::Sense;
using convex::VarId;

void validate(const DcaBid& b) {
    const bool ok = b.P_lo <= b.P0 && b.P0 <= b.P_hi && b.Q_lo <= b.Q0 && b.Q0 <= b.Q_hi && b.beta_P > 0.0 &&
                    b.beta_Q > 0.0 && std::isfinite(b.P_lo) && std::isfinite(b.P_hi) && std::isfinite(b.Q_lo) &&
                    std::isfinite(b.Q_hi);
    if (!ok) throw std::invalid_argument("invalid bid for DCA " + std::to_string(b.dca_id));
}

namespace {

std::pair<PQ, PQ> aggregate_range(std::span<const DcaBid> bids) {
    PQ lo, hi;
    for (const auto& b : bids) {
        lo.P += b.P_lo;
        hi.P += b.P_hi;
        lo.Q += b.Q_lo;
        hi.Q += b.Q_hi;
    }
    return {lo, hi};
}

}  // namespace

FeasibilityGap feasibility_check(std::span<const DcaBid> bids, PQ setpoint) {
    const auto [lo, hi] = aggregate_range(bids);
    auto gap = [](double v, double l, double h) { return v < l ? v - l : (v > h ? v - h : 0.0); };
    return {{gap(setpoint.P, lo.P, hi.P), gap(setpoint.Q, lo.Q, hi.Q)}};
}

// Clamped to the summed endpoints themselves so the result passes
// feasibility_check exactly.
PQ relax_to_nearest(std::span<const DcaBid> bids, PQ setpoint) {
    const auto [lo, hi] = aggregate_range(bids);
    return {std::clamp(setpoint.P, lo.P, hi.P), std::clamp(setpoint.Q, lo.Q, hi.Q)};
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

struct DcaVars {
    VarId P, Q, dP, dQ, muP, muQ, wP, wQ;
};

struct Model {
    convex::ConvexProgram prog;
    std::vector<DcaVars> v;
};

// w >= convex envelope of mu * x for mu in [0, cap], x in [lo, hi]. Only the
// lower envelope is needed: w enters every stage and budget row as an upper
// bounded sum.
void add_mccormick(convex::ConvexProgram& prog, const std::string& tag, VarId w, VarId mu, VarId x, double cap,
                   double lo, double hi) {
    prog.add_constraint(tag + ".mc1", LinearExpr(w).add(mu, -lo), Sense::greater_equal, 0.0);
    prog.add_constraint(tag + ".mc2", LinearExpr(w).add(x, -cap).add(mu, -hi), Sense::greater_equal, -cap * hi);
}

Model build(std::span<const DcaBid> bids, PQ setpoint, const PriceCaps& caps, std::optional<PQ> budget,
            double dt) {
    Model m;
    auto& p = m.prog;
    LinearExpr sumP, sumQ, payP, payQ;
    for (const auto& b : bids) {
        const std::string id = "dca" + std::to_string(b.dca_id);
        DcaVars d;
        d.P = p.add_variable(id + ".P");
        d.Q = p.add_variable(id + ".Q");
        d.dP = p.add_variable(id + ".dP", 0.0, 0.5 * (b.P_hi - b.P_lo));
        d.dQ = p.add_variable(id + ".dQ", 0.0, 0.5 * (b.Q_hi - b.Q_lo));
        d.muP = p.add_variable(id + ".muP", 0.0, caps.P);
        d.muQ = p.add_variable(id + ".muQ", 0.0, caps.Q);
        d.wP = p.add_variable(id + ".wP");
        d.wQ = p.add_variable(id + ".wQ");
        p.add_constraint(id + ".Plo", LinearExpr(d.P).add(d.dP, -1.0), Sense::greater_equal, b.P_lo);
        p.add_constraint(id + ".Phi", LinearExpr(d.P).add(d.dP, 1.0), Sense::less_equal, b.P_hi);
        p.add_constraint(id + ".Qlo", LinearExpr(d.Q).add(d.dQ, -1.0), Sense::greater_equal, b.Q_lo);
        p.add_constraint(id + ".Qhi", LinearExpr(d.Q).add(d.dQ, 1.0), Sense::less_equal, b.Q_hi);
        add_mccormick(p, id + ".wP", d.wP, d.muP, d.P, caps.P, b.P_lo, b.P_hi);
        add_mccormick(p, id + ".wQ", d.wQ, d.muQ, d.Q, caps.Q, b.Q_lo, b.Q_hi);
        sumP.add(d.P, 1.0);
        sumQ.add(d.Q, 1.0);
        payP.add(d.wP, dt);
        payQ.add(d.wQ, dt);
        m.v.push_back(d);
    }
    p.add_constraint("balance.P", sumP, Sense::equal, setpoint.P);
    p.add_constraint("balance.Q", sumQ, Sense::equal, setpoint.Q);
    if (budget) {
        p.add_constraint("budget.P", payP, Sense::less_equal, budget->P);
        p.add_constraint("budget.Q", payQ, Sense::less_equal, budget->Q);
    }
    return m;
}

std::vector<convex::Stage> stages(const Model& m, std::span<const DcaBid> bids, std::span<const double> scores) {
    LinearExpr f1, f2, f3;
    Objective f4;
    for (std::size_t j = 0; j < bids.size(); ++j) {
        const auto& d = m.v[j];
        const auto& b = bids[j];
        f1.add(d.P, -scores[j] * sign(b.P0)).add(d.Q, -scores[j] * sign(b.Q0));
        f2.add(d.wP, 1.0).add(d.wQ, 1.0);
        f3.add(d.dP, -1.0).add(d.dQ, -1.0);
        f4.add_square(b.beta_P, LinearExpr(d.P).add_constant(-b.P0));
        f4.add_square(b.beta_Q, LinearExpr(d.Q).add_constant(-b.Q0));
    }
    return {{"trust", Objective(f1), {}},
            {"cost", Objective(f2), {}},
            {"flexibility", Objective(f3), {}},
            {"disutility", std::move(f4), {}}};
}

// Lowest dollar amount the relaxed payment rows can reach on one axis.
double min_payment(std::span<const DcaBid> bids, double cap, double dt, bool reactive) {
    double s = 0.0;
    for (const auto& b : bids) s += cap * std::min(reactive ? b.Q_lo : b.P_lo, 0.0) * dt;
    return s;
}

}  // namespace

SmClearing clear_sm(std::span<const DcaBid> bids, std::span<const double> scores, PQ setpoint,
                    std::span<const Tariff> held_tariffs, const BudgetLedger& ledger, const PriceCaps& caps,
                    const SmSettings& settings) {
    if (scores.size() != bids.size()) throw std::invalid_argument("one score per bid required");
    if (!held_tariffs.empty() && held_tariffs.size() != bids.size()) {
        throw std::invalid_argument("held tariffs do not match the bids");
    }
    for (const auto& b : bids) validate(b);
    for (double c : scores) {
        if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("commitment score outside [0, 1]");
    }
    const auto gap = feasibility_check(bids, setpoint);
    if (!gap.ok()) {
        throw InfeasibleSetpoint(gap.gap, "setpoint (" + std::to_string(setpoint.P) + ", " +
                                              std::to_string(setpoint.Q) + ") outside the aggregate bid range");
    }

    SmClearing out;
    out.setpoint = setpoint;
    if (bids.empty()) return out;

    const double dt = settings.dt_hours;
    const PQ budget = clearing_budget(ledger);
    const double tol = 1e-9;
    bool with_budget = budget.P >= min_payment(bids, caps.P, dt, false) - tol &&
                       budget.Q >= min_payment(bids, caps.Q, dt, true) - tol;

    std::optional<convex::StagedSolution> staged;
    Model model;
    for (int attempt = 0; attempt < 2 && !staged; ++attempt) {
        model = build(bids, setpoint, caps, with_budget ? std::optional<PQ>(budget) : std::nullopt, dt);
        try {
            staged = convex::lexicographic_solve(stages(model, bids, scores), model.prog, settings.lexi,
                                                 settings.tol);
        } catch (const convex::StageInfeasible& e) {
            if (!with_budget) throw SolverFailure(e.stage(), e.what());
            with_budget = false;
        }
    }
    out.budget_dropped = !with_budget;
    out.widened_stages = staged->widened_stages;
    out.reduced_accuracy_stages = staged->reduced_accuracy_stages;

    const auto& x = staged->final;
    double f2_relaxed = 0.0;
    out.dcas.resize(bids.size());
    for (std::size_t j = 0; j < bids.size(); ++j) {
        const auto& d = model.v[j];
        const auto& b = bids[j];
        auto& c = out.dcas[j];
        c.dca_id = b.dca_id;
        c.P_star = std::clamp(x.value(d.P), b.P_lo, b.P_hi);
        c.Q_star = std::clamp(x.value(d.Q), b.Q_lo, b.Q_hi);
        c.dP = std::clamp(x.value(d.dP), 0.0, std::min(c.P_star - b.P_lo, b.P_hi - c.P_star));
        c.dQ = std::clamp(x.value(d.dQ), 0.0, std::min(c.Q_star - b.Q_lo, b.Q_hi - c.Q_star));
        f2_relaxed += x.value(d.wP) + x.value(d.wQ);
    }

    const auto priced = recover_prices(out.dcas, budget, caps, held_tariffs, dt, settings.zero_injection_kw);
    out.price_infeasible = !priced.feasible;
    double f2 = 0.0;
    for (std::size_t j = 0; j < bids.size(); ++j) {
        out.dcas[j].mu_P = priced.tariffs[j].P;
        out.dcas[j].mu_Q = priced.tariffs[j].Q;
        f2 += out.dcas[j].mu_P * out.dcas[j].P_star + out.dcas[j].mu_Q * out.dcas[j].Q_star;
    }
    out.relaxation_gap = std::abs(f2 - f2_relaxed);
    for (std::size_t k = 0; k < 4; ++k) {
        out.stage_values[k] = staged->final_values[k];
        out.stage_optima[k] = staged->optimal_values[k];
        out.stage_bounds[k] = convex::degradation_bound(staged->optimal_values[k], settings.lexi);
    }
    if (out.budget_dropped || out.price_infeasible) out.status = "budget_deficit";
    return out;
}

}  // namespace lem::sm
