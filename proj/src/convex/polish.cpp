#include "polish.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

namespace lem::convex::detail {

namespace {

constexpr double kDelta = 1e-10;
constexpr int kRefinementSteps = 6;
constexpr int kMaxReleases = 8;

bool is_epigraph_row(const StandardForm& sf, int r) { return r >= sf.cones.lp && sf.g_row_owner[r] < 0; }

// grad f(x) over the model variables.
std::vector<double> objective_gradient(const StandardForm& sf, const Objective& obj, const std::vector<double>& x) {
    std::vector<double> g(static_cast<std::size_t>(sf.n_model), 0.0);
    for (const auto& t : obj.linear().terms()) g[static_cast<std::size_t>(t.var)] += t.coef;
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(sf.n_model));
    for (const auto& sq : obj.squares()) {
        const double v = 2.0 * sq.weight * sq.expr.evaluate(xs);
        for (const auto& t : sq.expr.terms()) g[static_cast<std::size_t>(t.var)] += v * t.coef;
    }
    return g;
}

}  // namespace

double model_stationarity(const StandardForm& sf, const Objective& obj, const std::vector<double>& x,
                          const std::vector<double>& y, const std::vector<double>& z) {
    std::vector<double> g = objective_gradient(sf, obj, x);
    g.resize(static_cast<std::size_t>(sf.n), 0.0);
    sf.A.gemv_t(y.data(), g.data());
    for (int r = 0; r < sf.G.rows(); ++r) {
        if (is_epigraph_row(sf, r)) continue;
        for (int e = sf.G.start[r]; e < sf.G.start[r + 1]; ++e) g[sf.G.index[e]] += sf.G.value[e] * z[r];
    }
    double m = 0.0;
    for (int i = 0; i < sf.n_model; ++i) m = std::max(m, std::abs(g[i]));
    return m;
}

double linear_violation(const StandardForm& sf, const std::vector<double>& x) {
    std::vector<double> ax(sf.b.size(), 0.0);
    sf.A.gemv(x.data(), ax.data());
    double v = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) v = std::max(v, std::abs(ax[i] - sf.b[i]));
    for (int r = 0; r < sf.cones.lp; ++r) {
        double acc = 0.0;
        for (int e = sf.G.start[r]; e < sf.G.start[r + 1]; ++e) acc += sf.G.value[e] * x[sf.G.index[e]];
        v = std::max(v, acc - sf.h[r]);
    }
    return v;
}

namespace {

// Solves the equality-constrained QP of the given active set. Returns the
// stacked (x, y, z_active) or an empty vector on failure.
Eigen::VectorXd solve_active(const StandardForm& sf, const Objective& obj, const std::vector<int>& active) {
    const int n = sf.n_model;
    const int p = sf.A.rows();
    const int na = static_cast<int>(active.size());
    const int dim = n + p + na;

    // Hessian of the objective: sum 2 w a a'.
    std::vector<Eigen::Triplet<double>> tr;
    for (const auto& sq : obj.squares()) {
        for (const auto& ti : sq.expr.terms()) {
            for (const auto& tj : sq.expr.terms()) {
                if (ti.var >= tj.var) tr.emplace_back(ti.var, tj.var, 2.0 * sq.weight * ti.coef * tj.coef);
            }
        }
    }
    for (int r = 0; r < p; ++r) {
        for (int e = sf.A.start[r]; e < sf.A.start[r + 1]; ++e) tr.emplace_back(n + r, sf.A.index[e], sf.A.value[e]);
    }
    for (int k = 0; k < na; ++k) {
        const int r = active[k];
        for (int e = sf.G.start[r]; e < sf.G.start[r + 1]; ++e) tr.emplace_back(n + p + k, sf.G.index[e], sf.G.value[e]);
    }
    Eigen::SparseMatrix<double> kkt(dim, dim);
    kkt.setFromTriplets(tr.begin(), tr.end());
    Eigen::SparseMatrix<double> full = kkt.selfadjointView<Eigen::Lower>();
    for (int i = 0; i < dim; ++i) tr.emplace_back(i, i, i < n ? kDelta : -kDelta);
    Eigen::SparseMatrix<double> reg(dim, dim);
    reg.setFromTriplets(tr.begin(), tr.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(reg);
    if (ldlt.info() != Eigen::Success) return {};

    // Right-hand side: -q, b, h_active, where grad f(x) = P x + q.
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    for (const auto& t : obj.linear().terms()) rhs[t.var] -= t.coef;
    for (const auto& sq : obj.squares()) {
        const double k = 2.0 * sq.weight * sq.expr.constant();
        for (const auto& t : sq.expr.terms()) rhs[t.var] -= k * t.coef;
    }
    for (int r = 0; r < p; ++r) rhs[n + r] = sf.b[r];
    for (int k = 0; k < na; ++k) rhs[n + p + k] = sf.h[active[k]];

    Eigen::VectorXd sol = ldlt.solve(rhs);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it < kRefinementSteps; ++it) {
        const Eigen::VectorXd res = rhs - full * sol;
        const double err = res.lpNorm<Eigen::Infinity>();
        if (err <= 1e-15 * (1.0 + rhs.lpNorm<Eigen::Infinity>()) || err >= 0.5 * prev) break;
        prev = err;
        sol += ldlt.solve(res);
    }
    if (!sol.allFinite()) return {};
    return sol;
}

}  // namespace

bool polish(const StandardForm& sf, const Objective& obj, std::vector<double>& x, std::vector<double>& y,
            std::vector<double>& z, const std::vector<double>& s, double feas_tol) {
    const int n = sf.n_model;
    const int p = sf.A.rows();
    std::vector<int> active;
    for (int r = 0; r < sf.cones.lp; ++r) {
        if (z[r] > s[r]) active.push_back(r);
    }
    // Degenerate vertices carry more active rows than needed; rows with a
    // negative multiplier are released one at a time.
    for (int round = 0; round < kMaxReleases; ++round) {
        const Eigen::VectorXd sol = solve_active(sf, obj, active);
        if (sol.size() == 0) return false;
        const int na = static_cast<int>(active.size());
        double zscale = 1.0;
        for (int k = 0; k < na; ++k) zscale = std::max(zscale, std::abs(sol[n + p + k]));
        int worst = -1;
        for (int k = 0; k < na; ++k) {
            if (sol[n + p + k] < -1e-9 * zscale && (worst < 0 || sol[n + p + k] < sol[n + p + worst])) worst = k;
        }
        if (worst >= 0) {
            active.erase(active.begin() + worst);
            continue;
        }
        std::vector<double> px(x), py(y), pz(z);
        for (int i = 0; i < n; ++i) px[i] = sol[i];
        for (int r = 0; r < p; ++r) py[r] = sol[n + r];
        for (int r = 0; r < sf.cones.lp; ++r) pz[r] = 0.0;
        for (int k = 0; k < na; ++k) pz[active[k]] = std::max(sol[n + p + k], 0.0);
        const double viol_ipm = linear_violation(sf, x);
        const double viol_pol = linear_violation(sf, px);
        if (viol_pol > std::max(viol_ipm, feas_tol)) return false;
        if (model_stationarity(sf, obj, px, py, pz) > model_stationarity(sf, obj, x, y, z)) return false;
        x.swap(px);
        y.swap(py);
        z.swap(pz);
        return true;
    }
    return false;
}

}  // namespace lem::convex::detail
