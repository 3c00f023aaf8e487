#include "standard_form.hpp"

#include <cmath>

namespace lem::convex::detail {

void SparseRows::push_row(const std::vector<Term>& terms, double sign) {
    for (const auto& t : terms) {
        index.push_back(t.var);
        value.push_back(sign * t.coef);
    }
    start.push_back(static_cast<int>(index.size()));
}

void SparseRows::gemv(const double* x, double* y, double alpha) const {
    const int m = rows();
    for (int r = 0; r < m; ++r) {
        double acc = 0.0;
        for (int k = start[r]; k < start[r + 1]; ++k) acc += value[k] * x[index[k]];
        y[r] += alpha * acc;
    }
}

void SparseRows::gemv_t(const double* x, double* y, double alpha) const {
    const int m = rows();
    for (int r = 0; r < m; ++r) {
        const double xr = alpha * x[r];
        if (xr == 0.0) continue;
        for (int k = start[r]; k < start[r + 1]; ++k) y[index[k]] += value[k] * xr;
    }
}

namespace {

// Objectives with few square terms share one epigraph cone.
constexpr std::size_t kMaxMergedSquares = 16;

struct Builder {
    StandardForm sf;
    std::vector<std::vector<Term>> soc_rows;  // built after the LP rows
    std::vector<double> soc_h;
    std::vector<int> soc_owner;

    void lp_row(const std::vector<Term>& terms, double sign, double h, int owner) {
        sf.G.push_row(terms, sign);
        sf.h.push_back(h);
        sf.g_row_owner.push_back(owner);
        ++sf.cones.lp;
    }
    // Cone row whose slack equals expr(x) = terms*x + constant.
    void cone_row(const std::vector<Term>& terms, double constant, int owner) {
        std::vector<Term> neg;
        neg.reserve(terms.size());
        for (const auto& t : terms) neg.push_back({t.var, -t.coef});
        soc_rows.push_back(std::move(neg));
        soc_h.push_back(constant);
        soc_owner.push_back(owner);
    }
    void cone_row(const LinearExpr& e, int owner) { cone_row(e.terms(), e.constant(), owner); }
};

}  // namespace

StandardForm to_standard_form(const ConvexProgram& p) {
    Builder bld;
    StandardForm& sf = bld.sf;
    sf.n_model = static_cast<int>(p.num_variables());
    const Objective& obj = p.objective();
    const std::size_t nsq = obj.squares().size();
    const bool merged = nsq > 0 && nsq <= kMaxMergedSquares;
    const int n_epi = nsq == 0 ? 0 : (merged ? 1 : static_cast<int>(nsq));
    sf.n = sf.n_model + n_epi;
    sf.A.cols = sf.G.cols = sf.n;
    sf.c.assign(static_cast<std::size_t>(sf.n), 0.0);
    for (const auto& t : obj.linear().terms()) sf.c[static_cast<std::size_t>(t.var)] += t.coef;
    sf.c0 = obj.linear().constant();
    for (int k = 0; k < n_epi; ++k) sf.c[static_cast<std::size_t>(sf.n_model + k)] = 1.0;

    sf.constraint_rows.assign(p.num_constraints(), {});
    sf.lower_row.assign(static_cast<std::size_t>(sf.n_model), -1);
    sf.upper_row.assign(static_cast<std::size_t>(sf.n_model), -1);
    sf.fixed_row.assign(static_cast<std::size_t>(sf.n_model), -1);

    // Equalities and linear inequalities, in declaration order.
    for (std::size_t id = 0; id < p.num_constraints(); ++id) {
        const ConstraintId cid{static_cast<int>(id)};
        if (p.is_cone(cid)) continue;
        const auto& lc = p.linear(cid);
        RowMap& rm = sf.constraint_rows[id];
        if (lc.sense == Sense::equal) {
            rm = {RowKind::equality, sf.A.rows(), 1, -1.0};
            sf.A.push_row(lc.expr.terms());
            sf.b.push_back(lc.rhs - lc.expr.constant());
        } else if (lc.sense == Sense::less_equal) {
            rm = {RowKind::inequality, sf.cones.lp, 1, 1.0};
            bld.lp_row(lc.expr.terms(), 1.0, lc.rhs - lc.expr.constant(), static_cast<int>(id));
        } else {
            rm = {RowKind::inequality, sf.cones.lp, 1, 1.0};
            bld.lp_row(lc.expr.terms(), -1.0, lc.expr.constant() - lc.rhs, static_cast<int>(id));
        }
    }
    // Variable bounds; fixed variables become equalities.
    for (int v = 0; v < sf.n_model; ++v) {
        const auto& var = p.variables()[static_cast<std::size_t>(v)];
        const std::vector<Term> unit{{v, 1.0}};
        if (var.lower == var.upper) {
            sf.fixed_row[static_cast<std::size_t>(v)] = sf.A.rows();
            sf.A.push_row(unit);
            sf.b.push_back(var.lower);
            continue;
        }
        if (std::isfinite(var.lower)) {
            sf.lower_row[static_cast<std::size_t>(v)] = sf.cones.lp;
            bld.lp_row(unit, -1.0, -var.lower, -1);
        }
        if (std::isfinite(var.upper)) {
            sf.upper_row[static_cast<std::size_t>(v)] = sf.cones.lp;
            bld.lp_row(unit, 1.0, var.upper, -1);
        }
    }
    // Program cones.
    int soc_offset = sf.cones.lp;
    for (std::size_t id = 0; id < p.num_constraints(); ++id) {
        const ConstraintId cid{static_cast<int>(id)};
        if (!p.is_cone(cid)) continue;
        const auto& cc = p.cone(cid);
        const int owner = static_cast<int>(id);
        const int size = static_cast<int>(cc.members.size()) + (cc.kind == ConeKind::rotated ? 2 : 1);
        sf.constraint_rows[id] = {RowKind::cone, soc_offset, size, 1.0};
        if (cc.kind == ConeKind::second_order) {
            bld.cone_row(cc.a, owner);
            for (const auto& m : cc.members) bld.cone_row(m, owner);
        } else {
            bld.cone_row(cc.a + cc.b, owner);
            for (const auto& m : cc.members) bld.cone_row(2.0 * m, owner);
            bld.cone_row(cc.a - cc.b, owner);
        }
        sf.cones.soc.push_back(size);
        soc_offset += size;
    }
    // Epigraph cones for square terms: ||sqrt(w) e||^2 <= t * 1.
    if (nsq > 0) {
        auto epi = [&](int t_index, std::span<const SquareTerm> terms) {
            const VarId t{t_index};
            bld.cone_row(LinearExpr(t) + LinearExpr(1.0), -1);
            for (const auto& sq : terms) bld.cone_row(2.0 * std::sqrt(sq.weight) * sq.expr, -1);
            bld.cone_row(LinearExpr(t) - LinearExpr(1.0), -1);
            sf.cones.soc.push_back(static_cast<int>(terms.size()) + 2);
        };
        if (merged) {
            epi(sf.n_model, obj.squares());
        } else {
            for (std::size_t k = 0; k < nsq; ++k) epi(sf.n_model + static_cast<int>(k), {&obj.squares()[k], 1});
        }
    }
    for (std::size_t r = 0; r < bld.soc_rows.size(); ++r) {
        sf.G.push_row(bld.soc_rows[r]);
        sf.h.push_back(bld.soc_h[r]);
        sf.g_row_owner.push_back(bld.soc_owner[r]);
    }
    return sf;
}

}  // namespace lem::convex::detail
