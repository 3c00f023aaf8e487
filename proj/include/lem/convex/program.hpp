// Modelling layer for linear / quadratic / second-order-cone programs.
#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lem::convex {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class ModelError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct VarId {
    int index = -1;
    friend bool operator==(VarId, VarId) = default;
};

struct ConstraintId {
    int index = -1;
    friend bool operator==(ConstraintId, ConstraintId) = default;
};

struct Term {
    int var;
    double coef;
};

/// Affine expression sum(coef * var) + constant.
class LinearExpr {
  public:
    LinearExpr() = default;
    LinearExpr(double constant) : constant_(constant) {}  // NOLINT(implicit)
    LinearExpr(VarId v) { terms_.push_back({v.index, 1.0}); }  // NOLINT(implicit)

    LinearExpr& add(VarId v, double coef) {
        terms_.push_back({v.index, coef});
        return *this;
    }
    LinearExpr& add_constant(double c) {
        constant_ += c;
        return *this;
    }
    LinearExpr& operator+=(const LinearExpr& o);
    LinearExpr& operator-=(const LinearExpr& o);
    LinearExpr& operator*=(double s);

    const std::vector<Term>& terms() const noexcept { return terms_; }
    double constant() const noexcept { return constant_; }
    double evaluate(std::span<const double> x) const;
    /// Merges repeated variables and drops zero coefficients.
    LinearExpr& compress();

  private:
    std::vector<Term> terms_;
    double constant_ = 0.0;
};

LinearExpr operator+(LinearExpr a, const LinearExpr& b);
LinearExpr operator-(LinearExpr a, const LinearExpr& b);
LinearExpr operator-(LinearExpr a);
LinearExpr operator*(LinearExpr a, double s);
LinearExpr operator*(double s, LinearExpr a);

struct SquareTerm {
    double weight;
    LinearExpr expr;
};

/// linear + sum(weight_k * expr_k^2); weights are nonnegative so the
/// objective is convex by construction.
class Objective {
  public:
    Objective() = default;
    Objective(LinearExpr linear) : linear_(std::move(linear)) {}  // NOLINT(implicit)

    Objective& add_linear(const LinearExpr& e) {
        linear_ += e;
        return *this;
    }
    Objective& add_square(double weight, LinearExpr e);

    const LinearExpr& linear() const noexcept { return linear_; }
    const std::vector<SquareTerm>& squares() const noexcept { return squares_; }
    double evaluate(std::span<const double> x) const;

  private:
    LinearExpr linear_;
    std::vector<SquareTerm> squares_;
};

enum class Sense { less_equal, greater_equal, equal };

struct Variable {
    std::string name;
    double lower = -kInf;
    double upper = kInf;
};

struct LinearConstraint {
    std::string name;
    LinearExpr expr;
    Sense sense;
    double rhs;
};

enum class ConeKind {
    second_order,  // ||members|| <= a
    rotated,       // ||members||^2 <= a * b, a, b >= 0
};

struct ConeConstraint {
    std::string name;
    ConeKind kind;
    std::vector<LinearExpr> members;
    LinearExpr a;
    LinearExpr b;
};

class ConvexProgram {
  public:
    VarId add_variable(std::string name, double lower = -kInf, double upper = kInf);
    void set_bounds(VarId v, double lower, double upper);
    /// Replaces the right-hand side of a linear constraint.
    void set_rhs(ConstraintId c, double rhs);

    ConstraintId add_constraint(std::string name, LinearExpr expr, Sense sense, double rhs);
    ConstraintId add_soc(std::string name, std::vector<LinearExpr> members, LinearExpr bound);
    ConstraintId add_rotated_cone(std::string name, std::vector<LinearExpr> members, LinearExpr a, LinearExpr b);
    /// Adds objective(x) <= bound, introducing epigraph variables for the
    /// square terms.
    ConstraintId add_objective_bound(std::string name, const Objective& objective, double bound);

    void set_objective(Objective obj) { objective_ = std::move(obj); }
    const Objective& objective() const noexcept { return objective_; }

    std::size_t num_variables() const noexcept { return variables_.size(); }
    const std::vector<Variable>& variables() const noexcept { return variables_; }
    const Variable& variable(VarId v) const { return variables_.at(static_cast<std::size_t>(v.index)); }

    std::size_t num_constraints() const noexcept { return refs_.size(); }
    bool is_cone(ConstraintId c) const { return refs_.at(static_cast<std::size_t>(c.index)).cone; }
    const LinearConstraint& linear(ConstraintId c) const;
    const ConeConstraint& cone(ConstraintId c) const;
    const std::string& constraint_name(ConstraintId c) const;
    std::optional<ConstraintId> find_constraint(std::string_view name) const;

    const std::vector<LinearConstraint>& linear_constraints() const noexcept { return linear_; }
    const std::vector<ConeConstraint>& cone_constraints() const noexcept { return cones_; }
    /// Position of constraint c within linear_constraints() or cone_constraints().
    std::size_t storage_index(ConstraintId c) const { return refs_.at(static_cast<std::size_t>(c.index)).index; }

    /// Plain-text LP-style listing for external cross-checking.
    void write_listing(std::ostream& out) const;

  private:
    struct Ref {
        bool cone;
        std::size_t index;
    };
    ConstraintId register_name(std::string& name, Ref ref);
    void check_expr(const LinearExpr& e) const;

    std::vector<Variable> variables_;
    std::vector<LinearConstraint> linear_;
    std::vector<ConeConstraint> cones_;
    std::vector<Ref> refs_;
    std::unordered_map<std::string, int> by_name_;
    Objective objective_;
};

}  // namespace lem::convex
