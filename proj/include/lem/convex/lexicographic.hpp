// Lexicographic (epsilon-constraint) multi-stage optimization.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lem/convex/program.hpp"
#include "lem/convex/solver.hpp"

namespace lem::convex {

struct LexiConfig {
    double epsilon = 0.05;
    double epsilon_abs = 1e-9;
    /// Stage ids in priority order; empty keeps the order given to the solver.
    std::vector<std::string> stage_order;
};

struct Stage {
    std::string id;
    Objective objective;
    std::vector<LinearConstraint> extra;
};

class StageInfeasible : public std::runtime_error {
  public:
    StageInfeasible(std::size_t stage, SolveStatus status, const std::string& what)
        : std::runtime_error(what), stage_(stage), status_(status) {}
    std::size_t stage() const noexcept { return stage_; }
    SolveStatus status() const noexcept { return status_; }

  private:
    std::size_t stage_;
    SolveStatus status_;
};

struct StagedSolution {
    std::vector<std::string> stage_ids;
    std::vector<double> optimal_values;  // F_k* as reached by stage k
    std::vector<double> final_values;    // F_k at the returned point
    Solution final;                      // solution of the last stage
    std::vector<int> iterations;
    /// Stages that only solved after the earlier bounds were widened by the
    /// solver feasibility tolerance.
    std::vector<std::string> widened_stages;
    /// Stages accepted at reduced accuracy (see SolveStatus).
    std::vector<std::string> reduced_accuracy_stages;
};

/// Upper bound placed on objective l at later stages:
/// F* + max(eps*|F*|, eps_abs).
double degradation_bound(double f_star, const LexiConfig& cfg);

/// Throws StageInfeasible when a stage has neither an optimal nor a
/// reduced-accuracy solution, even after one retry with the earlier bounds
/// widened by the feasibility tolerance.
StagedSolution lexicographic_solve(const std::vector<Stage>& stages, const ConvexProgram& base,
                                   const LexiConfig& cfg, const Tolerances& tol = {});

}  // namespace lem::convex
