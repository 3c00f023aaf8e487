// Primal-dual interior-point solver for ConvexProgram.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lem/convex/program.hpp"

namespace lem::convex {

struct Tolerances {
    double feas = 1e-7;      // relative primal/dual residual
    double gap_abs = 1e-7;
    double gap_rel = 1e-7;
    int max_iterations = 80;
    /// A solve that stalls is still returned when its best iterate met every
    /// tolerance above scaled by this factor.
    double reduced_factor = 100.0;
};

/// reduced_accuracy: the iteration stalled or hit the limit, and the best
/// iterate is returned because it meets the tolerances times reduced_factor.
enum class SolveStatus { optimal, reduced_accuracy, infeasible, unbounded, numerical_failure };

const char* to_string(SolveStatus s);

class UnknownConstraint : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

struct Solution {
    SolveStatus status = SolveStatus::numerical_failure;
    std::vector<double> primal;  // indexed by VarId
    /// Marginal value per constraint id. Equalities: d(objective)/d(rhs).
    /// Inequalities: objective decrease per unit relaxation (>= 0). Cones:
    /// leading component of the cone multiplier.
    std::vector<double> duals;
    std::vector<std::vector<double>> cone_duals;  // full multiplier, cones only
    std::vector<double> lower_bound_duals;         // per variable, >= 0
    std::vector<double> upper_bound_duals;
    double objective = 0.0;
    double kkt_residual = 0.0;  // max-norm of the stationarity residual
    double primal_residual = 0.0;
    double duality_gap = 0.0;
    int iterations = 0;
    /// On infeasibility: constraints carrying the certificate, strongest first.
    std::vector<ConstraintId> infeasibility_set;
    std::string diagnostics;

    bool optimal() const noexcept { return status == SolveStatus::optimal; }
    bool acceptable() const noexcept { return optimal() || status == SolveStatus::reduced_accuracy; }
    double value(VarId v) const { return primal.at(static_cast<std::size_t>(v.index)); }
    double value(const LinearExpr& e) const { return e.evaluate(primal); }
    double dual(ConstraintId c) const { return duals.at(static_cast<std::size_t>(c.index)); }
};

Solution solve(const ConvexProgram& program, const Tolerances& tol = {});

/// Dual of a named constraint; throws UnknownConstraint.
double dual_of(const Solution& sol, const ConvexProgram& program, std::string_view name);

}  // namespace lem::convex
