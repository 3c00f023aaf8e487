#include "lem/convex/lexicographic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace lem::convex {

double degradation_bound(double f_star, const LexiConfig& cfg) {
    return f_star + std::max(cfg.epsilon * std::abs(f_star), cfg.epsilon_abs);
}

namespace {

std::vector<const Stage*> ordered_stages(const std::vector<Stage>& stages, const LexiConfig& cfg) {
    std::vector<const Stage*> out;
    if (cfg.stage_order.empty()) {
        for (const auto& s : stages) out.push_back(&s);
    } else {
        for (const auto& id : cfg.stage_order) {
            auto it = std::find_if(stages.begin(), stages.end(), [&](const Stage& s) { return s.id == id; });
            if (it == stages.end()) throw ModelError("stage order names unknown stage '" + id + "'");
            out.push_back(&*it);
        }
    }
    std::set<std::string> seen;
    for (const Stage* s : out) {
        if (!seen.insert(s->id).second) throw ModelError("duplicate stage id '" + s->id + "'");
    }
    return out;
}

}  // namespace

StagedSolution lexicographic_solve(const std::vector<Stage>& stages, const ConvexProgram& base, const LexiConfig& cfg,
                                   const Tolerances& tol) {
    if (!(cfg.epsilon >= 0.0) || !(cfg.epsilon_abs >= 0.0)) throw ModelError("epsilon must be nonnegative");
    const auto order = ordered_stages(stages, cfg);
    if (order.empty()) throw ModelError("lexicographic solve needs at least one stage");

    // Stage k program: base, extras of stages 0..k, bounds of stages 0..k-1.
    auto build = [&](std::size_t k, const std::vector<double>& bounds, double widen) {
        ConvexProgram prog = base;
        for (std::size_t j = 0; j <= k; ++j) {
            for (const auto& c : order[j]->extra) prog.add_constraint(c.name, c.expr, c.sense, c.rhs);
        }
        for (std::size_t j = 0; j < k; ++j) {
            const double margin = widen * std::max(1.0, std::abs(bounds[j]));
            prog.add_objective_bound("lexi:" + order[j]->id, order[j]->objective, bounds[j] + margin);
        }
        prog.set_objective(order[k]->objective);
        return prog;
    };

    StagedSolution out;
    std::vector<double> bounds;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const Stage& st = *order[k];
        Solution sol = solve(build(k, bounds, 0.0), tol);
        bool widened = false;
        if (!sol.optimal() && k > 0) {
            Solution retry = solve(build(k, bounds, tol.feas), tol);
            if (retry.optimal() || (!sol.acceptable() && retry.acceptable())) {
                sol = std::move(retry);
                widened = true;
            }
        }
        if (widened) out.widened_stages.push_back(st.id);
        if (sol.status == SolveStatus::reduced_accuracy) out.reduced_accuracy_stages.push_back(st.id);
        if (!sol.acceptable()) {
            throw StageInfeasible(k, sol.status,
                                  "stage " + std::to_string(k + 1) + " (" + st.id + "): " + to_string(sol.status) +
                                      (sol.diagnostics.empty() ? "" : ": " + sol.diagnostics));
        }
        sol.primal.resize(base.num_variables());
        const double f_star = st.objective.evaluate(sol.primal);
        out.stage_ids.push_back(st.id);
        out.optimal_values.push_back(f_star);
        out.iterations.push_back(sol.iterations);
        bounds.push_back(degradation_bound(f_star, cfg));
        if (k + 1 == order.size()) out.final = std::move(sol);
    }
    for (const Stage* s : order) out.final_values.push_back(s->objective.evaluate(out.final.primal));
    return out;
}

}  // namespace lem::convex
