#include "lem/convex/program.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace lem::convex {

LinearExpr& LinearExpr::operator+=(const LinearExpr& o) {
    terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
    constant_ += o.constant_;
    return *this;
}

LinearExpr& LinearExpr::operator-=(const LinearExpr& o) {
    for (const auto& t : o.terms_) terms_.push_back({t.var, -t.coef});
    constant_ -= o.constant_;
    return *this;
}

LinearExpr& LinearExpr::operator*=(double s) {
    for (auto& t : terms_) t.coef *= s;
    constant_ *= s;
    return *this;
}

double LinearExpr::evaluate(std::span<const double> x) const {
    double v = constant_;
    for (const auto& t : terms_) v += t.coef * x[static_cast<std::size_t>(t.var)];
    return v;
}

LinearExpr& LinearExpr::compress() {
    std::sort(terms_.begin(), terms_.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> merged;
    merged.reserve(terms_.size());
    for (const auto& t : terms_) {
        if (!merged.empty() && merged.back().var == t.var) {
            merged.back().coef += t.coef;
        } else {
            merged.push_back(t);
        }
    }
    std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
    terms_ = std::move(merged);
    return *this;
}

LinearExpr operator+(LinearExpr a, const LinearExpr& b) { return a += b; }
LinearExpr operator-(LinearExpr a, const LinearExpr& b) { return a -= b; }
LinearExpr operator-(LinearExpr a) { return a *= -1.0; }
LinearExpr operator*(LinearExpr a, double s) { return a *= s; }
LinearExpr operator*(double s, LinearExpr a) { return a *= s; }

Objective& Objective::add_square(double weight, LinearExpr e) {
    if (!(weight >= 0.0) || !std::isfinite(weight)) throw ModelError("square term weight must be finite and >= 0");
    if (weight > 0.0) squares_.push_back({weight, std::move(e.compress())});
    return *this;
}

double Objective::evaluate(std::span<const double> x) const {
    double v = linear_.evaluate(x);
    for (const auto& sq : squares_) {
        const double e = sq.expr.evaluate(x);
        v += sq.weight * e * e;
    }
    return v;
}

VarId ConvexProgram::add_variable(std::string name, double lower, double upper) {
    if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
        throw ModelError("variable '" + name + "' has inconsistent bounds");
    }
    variables_.push_back({std::move(name), lower, upper});
    return VarId{static_cast<int>(variables_.size()) - 1};
}

void ConvexProgram::set_rhs(ConstraintId c, double rhs) {
    const auto& ref = refs_.at(static_cast<std::size_t>(c.index));
    if (ref.cone) throw ModelError("constraint '" + constraint_name(c) + "' has no right-hand side");
    if (!std::isfinite(rhs)) throw ModelError("non-finite right-hand side for '" + constraint_name(c) + "'");
    linear_[ref.index].rhs = rhs;
}

void ConvexProgram::set_bounds(VarId v, double lower, double upper) {
    auto& var = variables_.at(static_cast<std::size_t>(v.index));
    if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
        throw ModelError("variable '" + var.name + "' has inconsistent bounds");
    }
    var.lower = lower;
    var.upper = upper;
}

void ConvexProgram::check_expr(const LinearExpr& e) const {
    for (const auto& t : e.terms()) {
        if (t.var < 0 || static_cast<std::size_t>(t.var) >= variables_.size()) {
            throw ModelError("expression references an undeclared variable");
        }
        if (!std::isfinite(t.coef)) throw ModelError("expression has a non-finite coefficient");
    }
    if (!std::isfinite(e.constant())) throw ModelError("expression has a non-finite constant");
}

ConstraintId ConvexProgram::register_name(std::string& name, Ref ref) {
    const int id = static_cast<int>(refs_.size());
    if (!name.empty()) {
        if (!by_name_.emplace(name, id).second) throw ModelError("duplicate constraint name '" + name + "'");
    }
    refs_.push_back(ref);
    return ConstraintId{id};
}

ConstraintId ConvexProgram::add_constraint(std::string name, LinearExpr expr, Sense sense, double rhs) {
    check_expr(expr);
    if (!std::isfinite(rhs)) throw ModelError("constraint '" + name + "' has a non-finite rhs");
    expr.compress();
    const ConstraintId id = register_name(name, {false, linear_.size()});
    linear_.push_back({std::move(name), std::move(expr), sense, rhs});
    return id;
}

ConstraintId ConvexProgram::add_soc(std::string name, std::vector<LinearExpr> members, LinearExpr bound) {
    for (auto& m : members) check_expr(m.compress());
    check_expr(bound.compress());
    if (members.empty()) throw ModelError("cone '" + name + "' has no members");
    const ConstraintId id = register_name(name, {true, cones_.size()});
    cones_.push_back({std::move(name), ConeKind::second_order, std::move(members), std::move(bound), LinearExpr{}});
    return id;
}

ConstraintId ConvexProgram::add_rotated_cone(std::string name, std::vector<LinearExpr> members, LinearExpr a,
                                             LinearExpr b) {
    for (auto& m : members) check_expr(m.compress());
    check_expr(a.compress());
    check_expr(b.compress());
    if (members.empty()) throw ModelError("cone '" + name + "' has no members");
    const ConstraintId id = register_name(name, {true, cones_.size()});
    cones_.push_back({std::move(name), ConeKind::rotated, std::move(members), std::move(a), std::move(b)});
    return id;
}

ConstraintId ConvexProgram::add_objective_bound(std::string name, const Objective& objective, double bound) {
    LinearExpr total = objective.linear();
    int k = 0;
    for (const auto& sq : objective.squares()) {
        const VarId t = add_variable(name.empty() ? std::string{} : name + ".t" + std::to_string(k), 0.0, kInf);
        add_rotated_cone(name.empty() ? std::string{} : name + ".sq" + std::to_string(k),
                         {std::sqrt(sq.weight) * sq.expr}, LinearExpr(t), LinearExpr(1.0));
        total.add(t, 1.0);
        ++k;
    }
    return add_constraint(std::move(name), std::move(total), Sense::less_equal, bound);
}

const LinearConstraint& ConvexProgram::linear(ConstraintId c) const {
    const Ref& r = refs_.at(static_cast<std::size_t>(c.index));
    if (r.cone) throw ModelError("constraint is a cone");
    return linear_[r.index];
}

const ConeConstraint& ConvexProgram::cone(ConstraintId c) const {
    const Ref& r = refs_.at(static_cast<std::size_t>(c.index));
    if (!r.cone) throw ModelError("constraint is linear");
    return cones_[r.index];
}

const std::string& ConvexProgram::constraint_name(ConstraintId c) const {
    const Ref& r = refs_.at(static_cast<std::size_t>(c.index));
    return r.cone ? cones_[r.index].name : linear_[r.index].name;
}

std::optional<ConstraintId> ConvexProgram::find_constraint(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return ConstraintId{it->second};
}

namespace {

std::string var_label(const ConvexProgram& p, int v) {
    const auto& name = p.variables()[static_cast<std::size_t>(v)].name;
    return name.empty() ? "x" + std::to_string(v) : name;
}

void write_expr(std::ostream& out, const ConvexProgram& p, const LinearExpr& e, bool with_constant = true) {
    bool first = true;
    for (const auto& t : e.terms()) {
        if (first) {
            if (t.coef < 0) out << "- ";
        } else {
            out << (t.coef < 0 ? " - " : " + ");
        }
        out << std::abs(t.coef) << ' ' << var_label(p, t.var);
        first = false;
    }
    if (with_constant && (e.constant() != 0.0 || first)) {
        if (first) {
            out << e.constant();
        } else {
            out << (e.constant() < 0 ? " - " : " + ") << std::abs(e.constant());
        }
    }
}

}  // namespace

void ConvexProgram::write_listing(std::ostream& out) const {
    out.precision(17);
    out << "Minimize\n obj: ";
    write_expr(out, *this, objective_.linear());
    for (const auto& sq : objective_.squares()) {
        out << " + " << sq.weight << " [ ";
        write_expr(out, *this, sq.expr);
        out << " ]^2";
    }
    out << "\nSubject To\n";
    for (std::size_t i = 0; i < refs_.size(); ++i) {
        const Ref& r = refs_[i];
        const std::string& nm = r.cone ? cones_[r.index].name : linear_[r.index].name;
        out << ' ' << (nm.empty() ? "c" + std::to_string(i) : nm) << ": ";
        if (!r.cone) {
            const auto& lc = linear_[r.index];
            write_expr(out, *this, lc.expr);
            out << (lc.sense == Sense::less_equal ? " <= " : lc.sense == Sense::greater_equal ? " >= " : " = ")
                << lc.rhs << '\n';
        } else {
            const auto& cc = cones_[r.index];
            out << "|| ";
            for (std::size_t k = 0; k < cc.members.size(); ++k) {
                if (k) out << ", ";
                write_expr(out, *this, cc.members[k]);
            }
            out << (cc.kind == ConeKind::rotated ? " ||^2 <= ( " : " || <= ");
            write_expr(out, *this, cc.a);
            if (cc.kind == ConeKind::rotated) {
                out << " ) * ( ";
                write_expr(out, *this, cc.b);
                out << " )";
            }
            out << '\n';
        }
    }
    out << "Bounds\n";
    for (std::size_t v = 0; v < variables_.size(); ++v) {
        const auto& var = variables_[v];
        out << ' ';
        if (std::isinf(var.lower) && std::isinf(var.upper)) {
            out << var_label(*this, static_cast<int>(v)) << " free\n";
            continue;
        }
        out << (std::isinf(var.lower) ? std::string("-inf") : std::to_string(var.lower)) << " <= "
            << var_label(*this, static_cast<int>(v)) << " <= "
            << (std::isinf(var.upper) ? std::string("+inf") : std::to_string(var.upper)) << '\n';
    }
    out << "End\n";
}

}  // namespace lem::convex
