// Homogeneous self-dual embedding with Nesterov-Todd scaling and a
// Mehrotra predictor-corrector, in the style of ECOS / CVXOPT conelp.
#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "cones.hpp"
#include "kkt.hpp"
#include "polish.hpp"
#include "lem/convex/solver.hpp"
#include "standard_form.hpp"

namespace lem::convex {

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::reduced_accuracy: return "reduced_accuracy";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

namespace {

using detail::ConeAlgebra;
using detail::KktSolver;
using detail::StandardForm;

using Vec = std::vector<double>;

double norm2(const Vec& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double dotp(const Vec& a, const Vec& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

constexpr double kStepFraction = 0.99;
constexpr double kBacktrack = 0.5;
constexpr int kMaxBacktracks = 40;

struct Iterate {
    Vec x, y, z, s;
    double tau = 1.0;
    double kappa = 1.0;
};

struct Direction {
    Vec dx, dy, dz, ds;
    double dtau = 0.0;
    double dkappa = 0.0;
};

enum class Outcome { optimal, reduced, primal_infeasible, dual_infeasible, failure };

class HsdSolver {
  public:
    HsdSolver(const StandardForm& sf, const Tolerances& tol)
        : sf_(sf), tol_(tol), cones_(sf.cones), kkt_(sf, cones_), n_(sf.n), p_(sf.A.rows()), m_(sf.G.rows()) {
        it_.x.assign(n_, 0.0);
        it_.y.assign(p_, 0.0);
        it_.z.assign(m_, 0.0);
        it_.s.assign(m_, 0.0);
        for (Direction* d : {&aff_, &cmb_}) {
            d->dx.assign(n_, 0.0);
            d->dy.assign(p_, 0.0);
            d->dz.assign(m_, 0.0);
            d->ds.assign(m_, 0.0);
        }
        x1_.assign(n_, 0.0);
        y1_.assign(p_, 0.0);
        z1_.assign(m_, 0.0);
        rx_.assign(n_, 0.0);
        ry_.assign(p_, 0.0);
        rz_.assign(m_, 0.0);
        neg_c_.resize(n_);
        for (int i = 0; i < n_; ++i) neg_c_[i] = -sf.c[i];
        norm_b_ = std::max(1.0, norm2(sf.b));
        norm_h_ = std::max(1.0, norm2(sf.h));
        norm_c_ = std::max(1.0, norm2(sf.c));
    }

    Outcome run();

    const Iterate& iterate() const { return it_; }
    int iterations() const { return iterations_; }
    double pres() const { return pres_; }
    double dres() const { return dres_; }
    double gap() const { return gap_; }
    std::string diagnostics() const { return diag_.str(); }

  private:
    Outcome iterate_to_end();
    bool initialize();
    void residuals();
    bool direction(const Vec& dxr, const Vec& dyr, const Vec& dzr, double dtau_r, const Vec& ds_r, double dkappa_r,
                   Direction& out);
    double step_length(const Direction& d) const;

    const StandardForm& sf_;
    Tolerances tol_;
    ConeAlgebra cones_;
    KktSolver kkt_;
    int n_, p_, m_;
    Iterate it_;
    Direction aff_, cmb_;
    Vec x1_, y1_, z1_;
    Vec rx_, ry_, rz_;
    double rt_ = 0.0;
    Vec neg_c_;
    double norm_b_ = 1.0, norm_h_ = 1.0, norm_c_ = 1.0;
    double pres_ = 0.0, dres_ = 0.0, gap_ = 0.0;
    int iterations_ = 0;
    std::ostringstream diag_;
    // Last iterate within the reduced tolerances, with its measures.
    std::optional<Iterate> best_;
    double best_pres_ = 0.0, best_dres_ = 0.0, best_gap_ = 0.0;
};

bool HsdSolver::initialize() {
    if (!kkt_.factor(true)) return false;
    Vec zero_n(n_, 0.0), zero_p(p_, 0.0), zero_m(m_, 0.0);
    Vec tmp_z(m_, 0.0), tmp_y(p_, 0.0);
    // Primal: x minimizing ||Gx - h|| subject to Ax = b.
    if (!kkt_.solve(zero_n.data(), sf_.b.data(), sf_.h.data(), it_.x.data(), tmp_y.data(), tmp_z.data())) return false;
    for (int i = 0; i < m_; ++i) it_.s[i] = -tmp_z[i];
    // Dual: z minimizing ||z|| subject to A'y + G'z + c = 0.
    Vec tmp_x(n_, 0.0);
    if (!kkt_.solve(neg_c_.data(), zero_p.data(), zero_m.data(), tmp_x.data(), it_.y.data(), it_.z.data())) return false;

    const double ap = cones_.distance_to_interior(it_.s.data());
    if (ap >= -1e-8) cones_.add_identity(it_.s.data(), 1.0 + std::max(ap, 0.0));
    const double ad = cones_.distance_to_interior(it_.z.data());
    if (ad >= -1e-8) cones_.add_identity(it_.z.data(), 1.0 + std::max(ad, 0.0));
    it_.tau = 1.0;
    it_.kappa = 1.0;
    return true;
}

void HsdSolver::residuals() {
    const auto& x = it_.x;
    const auto& y = it_.y;
    const auto& z = it_.z;
    const auto& s = it_.s;
    const double tau = it_.tau;
    // rx = A'y + G'z + c tau
    for (int i = 0; i < n_; ++i) rx_[i] = sf_.c[i] * tau;
    sf_.A.gemv_t(y.data(), rx_.data());
    sf_.G.gemv_t(z.data(), rx_.data());
    // ry = -Ax + b tau
    for (int i = 0; i < p_; ++i) ry_[i] = sf_.b[i] * tau;
    sf_.A.gemv(x.data(), ry_.data(), -1.0);
    // rz = s + Gx - h tau
    for (int i = 0; i < m_; ++i) rz_[i] = s[i] - sf_.h[i] * tau;
    sf_.G.gemv(x.data(), rz_.data());
    rt_ = it_.kappa + dotp(sf_.c, x) + dotp(sf_.b, y) + dotp(sf_.h, z);
}

bool HsdSolver::direction(const Vec& dxr, const Vec& dyr, const Vec& dzr, double dtau_r, const Vec& ds_r,
                          double dkappa_r, Direction& out) {
    Vec tmp(m_), wtmp(m_), rhs3(m_), ndy(p_);
    cones_.divide(cones_.lambda().data(), ds_r.data(), tmp.data());
    cones_.apply_w(tmp.data(), wtmp.data());
    for (int i = 0; i < m_; ++i) rhs3[i] = dzr[i] - wtmp[i];
    for (int i = 0; i < p_; ++i) ndy[i] = -dyr[i];
    if (!kkt_.solve(dxr.data(), ndy.data(), rhs3.data(), out.dx.data(), out.dy.data(), out.dz.data())) return false;
    const double tau = it_.tau;
    const double kappa = it_.kappa;
    const double num = dtau_r - dkappa_r / tau - dotp(sf_.c, out.dx) - dotp(sf_.b, out.dy) - dotp(sf_.h, out.dz);
    const double den = dotp(sf_.c, x1_) + dotp(sf_.b, y1_) + dotp(sf_.h, z1_) - kappa / tau;
    if (den == 0.0 || !std::isfinite(den)) return false;
    const double dtau = num / den;
    for (int i = 0; i < n_; ++i) out.dx[i] += dtau * x1_[i];
    for (int i = 0; i < p_; ++i) out.dy[i] += dtau * y1_[i];
    for (int i = 0; i < m_; ++i) out.dz[i] += dtau * z1_[i];
    // ds = W (lambda \ d_s - W dz)
    cones_.apply_w(out.dz.data(), wtmp.data());
    for (int i = 0; i < m_; ++i) tmp[i] -= wtmp[i];
    cones_.apply_w(tmp.data(), out.ds.data());
    out.dtau = dtau;
    out.dkappa = (dkappa_r - kappa * dtau) / tau;
    return std::isfinite(dtau) && std::isfinite(out.dkappa);
}

double HsdSolver::step_length(const Direction& d) const {
    double a = std::min(cones_.max_step(it_.s.data(), d.ds.data(), 1.0),
                        cones_.max_step(it_.z.data(), d.dz.data(), 1.0));
    if (d.dtau < 0.0) a = std::min(a, -it_.tau / d.dtau);
    if (d.dkappa < 0.0) a = std::min(a, -it_.kappa / d.dkappa);
    return std::max(a, 0.0);
}

Outcome HsdSolver::run() {
    const Outcome o = iterate_to_end();
    if (o != Outcome::failure || !best_) return o;
    it_ = *best_;
    pres_ = best_pres_;
    dres_ = best_dres_;
    gap_ = best_gap_;
    return Outcome::reduced;
}

Outcome HsdSolver::iterate_to_end() {
    if (!initialize()) {
        diag_ << "initial factorization failed";
        return Outcome::failure;
    }
    const int degree = cones_.degree();
    Vec dxr(n_), dyr(p_), dzr(m_), dsr(m_), wds(m_), wdz(m_), corr(m_);
    for (iterations_ = 0; iterations_ <= tol_.max_iterations; ++iterations_) {
        residuals();
        const double tau = it_.tau;
        const double kappa = it_.kappa;
        const double cx = dotp(sf_.c, it_.x);
        const double by = dotp(sf_.b, it_.y);
        const double hz = dotp(sf_.h, it_.z);
        const double sz = dotp(it_.s, it_.z);

        // ||Ax - b tau||, ||Gx + s - h tau||, ||A'y + G'z + c tau||
        pres_ = std::max(norm2(ry_) / norm_b_, norm2(rz_) / norm_h_) / tau;
        dres_ = norm2(rx_) / norm_c_ / tau;
        gap_ = sz / (tau * tau);
        const double pcost = cx / tau;
        const double dcost = -(hz + by) / tau;
        const double relgap = gap_ / std::max({std::abs(pcost), std::abs(dcost), 1e-300});
        if (pres_ < tol_.feas && dres_ < tol_.feas && (gap_ < tol_.gap_abs || relgap < tol_.gap_rel)) {
            return Outcome::optimal;
        }
        const double rf = tol_.reduced_factor;
        if (pres_ < rf * tol_.feas && dres_ < rf * tol_.feas && (gap_ < rf * tol_.gap_abs || relgap < rf * tol_.gap_rel)) {
            best_ = it_;
            best_pres_ = pres_;
            best_dres_ = dres_;
            best_gap_ = gap_;
        }
        // Certificates.
        if (hz + by < 0.0) {
            Vec cert(n_, 0.0);
            sf_.A.gemv_t(it_.y.data(), cert.data());
            sf_.G.gemv_t(it_.z.data(), cert.data());
            if (norm2(cert) / norm_c_ < tol_.feas * -(hz + by)) return Outcome::primal_infeasible;
        }
        if (cx < 0.0) {
            Vec ax(p_, 0.0), gxs(it_.s);
            sf_.A.gemv(it_.x.data(), ax.data());
            sf_.G.gemv(it_.x.data(), gxs.data());
            if (std::max(norm2(ax) / norm_b_, norm2(gxs) / norm_h_) < tol_.feas * -cx) return Outcome::dual_infeasible;
        }
        if (iterations_ == tol_.max_iterations) break;

        if (!cones_.update_scaling(it_.s.data(), it_.z.data())) {
            diag_ << "iterate left the cone interior";
            return Outcome::failure;
        }
        if (!kkt_.factor(false)) {
            diag_ << "KKT factorization failed";
            return Outcome::failure;
        }
        {
            Vec ny(sf_.b), nz(sf_.h);
            if (!kkt_.solve(neg_c_.data(), ny.data(), nz.data(), x1_.data(), y1_.data(), z1_.data())) {
                diag_ << "KKT solve failed";
                return Outcome::failure;
            }
        }
        const auto& lam = cones_.lambda();
        // Affine (predictor) direction.
        for (int i = 0; i < n_; ++i) dxr[i] = -rx_[i];
        for (int i = 0; i < p_; ++i) dyr[i] = -ry_[i];
        for (int i = 0; i < m_; ++i) dzr[i] = -rz_[i];
        cones_.product(lam.data(), lam.data(), dsr.data());
        for (int i = 0; i < m_; ++i) dsr[i] = -dsr[i];
        if (!direction(dxr, dyr, dzr, -rt_, dsr, -kappa * tau, aff_)) {
            diag_ << "affine direction failed";
            return Outcome::failure;
        }
        const double alpha_aff = step_length(aff_);
        const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);
        const double mu = (sz + tau * kappa) / (degree + 1);

        // Combined direction with second-order correction.
        const double f = 1.0 - sigma;
        for (int i = 0; i < n_; ++i) dxr[i] = -f * rx_[i];
        for (int i = 0; i < p_; ++i) dyr[i] = -f * ry_[i];
        for (int i = 0; i < m_; ++i) dzr[i] = -f * rz_[i];
        cones_.apply_w_inv(aff_.ds.data(), wds.data());
        cones_.apply_w(aff_.dz.data(), wdz.data());
        cones_.product(wds.data(), wdz.data(), corr.data());
        cones_.product(lam.data(), lam.data(), dsr.data());
        for (int i = 0; i < m_; ++i) dsr[i] = -dsr[i] - corr[i];
        cones_.add_identity(dsr.data(), sigma * mu);
        const double dkap = -kappa * tau - aff_.dkappa * aff_.dtau + sigma * mu;
        if (!direction(dxr, dyr, dzr, -f * rt_, dsr, dkap, cmb_)) {
            diag_ << "combined direction failed";
            return Outcome::failure;
        }
        double alpha = std::min(1.0, kStepFraction * step_length(cmb_));
        // The fraction-to-boundary rule can still land on the boundary through rounding near a degenerate
        // optimum; back off until both iterates stay strictly interior.
        for (int k = 0; k < kMaxBacktracks && !(cones_.interior_after(it_.s.data(), cmb_.ds.data(), alpha) &&
                                                  cones_.interior_after(it_.z.data(), cmb_.dz.data(), alpha));
             ++k) {
            alpha *= kBacktrack;
        }
        if (!(alpha > 1e-12)) {
            diag_ << "step length collapsed";
            return Outcome::failure;
        }
        for (int i = 0; i < n_; ++i) it_.x[i] += alpha * cmb_.dx[i];
        for (int i = 0; i < p_; ++i) it_.y[i] += alpha * cmb_.dy[i];
        for (int i = 0; i < m_; ++i) {
            it_.z[i] += alpha * cmb_.dz[i];
            it_.s[i] += alpha * cmb_.ds[i];
        }
        it_.tau += alpha * cmb_.dtau;
        it_.kappa += alpha * cmb_.dkappa;
    }
    diag_ << "iteration limit reached";
    return Outcome::failure;
}

// x, y, z are already normalized by tau (or are a certificate).
void fill_solution(const StandardForm& sf, const ConvexProgram& prog, const Vec& x, const Vec& y, const Vec& z,
                   Solution& sol) {
    const std::size_t nm = static_cast<std::size_t>(sf.n_model);
    sol.primal.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(nm));
    sol.duals.assign(prog.num_constraints(), 0.0);
    sol.cone_duals.assign(prog.num_constraints(), {});
    for (std::size_t id = 0; id < prog.num_constraints(); ++id) {
        const auto& rm = sf.constraint_rows[id];
        switch (rm.kind) {
            case detail::RowKind::equality: sol.duals[id] = rm.sign * y[rm.row]; break;
            case detail::RowKind::inequality: sol.duals[id] = z[rm.row]; break;
            case detail::RowKind::cone:
                sol.duals[id] = z[rm.row];
                sol.cone_duals[id].assign(z.begin() + rm.row, z.begin() + rm.row + rm.size);
                break;
            case detail::RowKind::none: break;
        }
    }
    sol.lower_bound_duals.assign(nm, 0.0);
    sol.upper_bound_duals.assign(nm, 0.0);
    for (std::size_t v = 0; v < nm; ++v) {
        if (sf.lower_row[v] >= 0) sol.lower_bound_duals[v] = z[sf.lower_row[v]];
        if (sf.upper_row[v] >= 0) sol.upper_bound_duals[v] = z[sf.upper_row[v]];
        if (sf.fixed_row[v] >= 0) {
            const double g = -y[sf.fixed_row[v]];  // d objective / d value
            sol.lower_bound_duals[v] = std::max(g, 0.0);
            sol.upper_bound_duals[v] = std::max(-g, 0.0);
        }
    }
}

Vec scaled(const Vec& v, double f) {
    Vec out(v);
    for (double& a : out) a *= f;
    return out;
}

double inf_norm(const Vec& v) {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::abs(a));
    return m;
}

// Farkas certificate of least weight: min e'z s.t. A'y + G'z = 0,
// b'y + h'z = -1, z in K. Rows that do not take part in the conflict end up
// with (near) zero weight, unlike the interior-point certificate.
std::optional<std::pair<Vec, Vec>> sparse_certificate(const StandardForm& sf, const Tolerances& tol) {
    ConvexProgram cp;
    const int p = sf.A.rows();
    const int m = sf.G.rows();
    std::vector<VarId> y, z;
    for (int r = 0; r < p; ++r) y.push_back(cp.add_variable(""));
    for (int r = 0; r < m; ++r) z.push_back(cp.add_variable("", r < sf.cones.lp ? 0.0 : -kInf, kInf));
    std::vector<LinearExpr> cols(static_cast<std::size_t>(sf.n));
    for (int r = 0; r < p; ++r) {
        for (int e = sf.A.start[r]; e < sf.A.start[r + 1]; ++e) cols[sf.A.index[e]].add(y[r], sf.A.value[e]);
    }
    for (int r = 0; r < m; ++r) {
        for (int e = sf.G.start[r]; e < sf.G.start[r + 1]; ++e) cols[sf.G.index[e]].add(z[r], sf.G.value[e]);
    }
    for (auto& col : cols) {
        if (!col.terms().empty()) cp.add_constraint("", col, Sense::equal, 0.0);
    }
    LinearExpr norm, weight;
    for (int r = 0; r < p; ++r) norm.add(y[r], sf.b[r]);
    for (int r = 0; r < m; ++r) norm.add(z[r], sf.h[r]);
    cp.add_constraint("", norm, Sense::equal, -1.0);
    for (int r = 0; r < sf.cones.lp; ++r) weight.add(z[r], 1.0);
    int st = sf.cones.lp;
    for (int q : sf.cones.soc) {
        std::vector<LinearExpr> tail;
        for (int i = 1; i < q; ++i) tail.emplace_back(z[st + i]);
        cp.add_soc("", std::move(tail), z[st]);
        weight.add(z[st], 1.0);
        st += q;
    }
    cp.set_objective(weight);
    const Solution cs = solve(cp, tol);
    if (!cs.optimal()) return std::nullopt;
    Vec yv(static_cast<std::size_t>(p)), zv(static_cast<std::size_t>(m));
    for (int r = 0; r < p; ++r) yv[r] = cs.value(y[r]);
    for (int r = 0; r < m; ++r) zv[r] = cs.value(z[r]);
    return std::make_pair(std::move(yv), std::move(zv));
}

}  // namespace

Solution solve(const ConvexProgram& program, const Tolerances& tol) {
    const StandardForm sf = detail::to_standard_form(program);
    HsdSolver hsd(sf, tol);
    const Outcome outcome = hsd.run();
    const Iterate& it = hsd.iterate();

    Solution sol;
    sol.iterations = hsd.iterations();
    sol.primal_residual = hsd.pres();
    sol.duality_gap = hsd.gap();
    const double tau = it.tau > 0.0 ? it.tau : 1.0;

    switch (outcome) {
        case Outcome::optimal: sol.status = SolveStatus::optimal; break;
        case Outcome::reduced: sol.status = SolveStatus::reduced_accuracy; break;
        case Outcome::primal_infeasible: sol.status = SolveStatus::infeasible; break;
        case Outcome::dual_infeasible: sol.status = SolveStatus::unbounded; break;
        case Outcome::failure: sol.status = SolveStatus::numerical_failure; break;
    }

    if (sol.status == SolveStatus::infeasible) {
        // Farkas certificate: report constraints carrying weight, largest first.
        if (auto cert = sparse_certificate(sf, tol)) {
            fill_solution(sf, program, Vec(it.x.size(), 0.0), cert->first, cert->second, sol);
        } else {
            const double scale = -1.0 / (std::inner_product(sf.h.begin(), sf.h.end(), it.z.begin(), 0.0) +
                                         std::inner_product(sf.b.begin(), sf.b.end(), it.y.begin(), 0.0));
            fill_solution(sf, program, Vec(it.x.size(), 0.0), scaled(it.y, scale), scaled(it.z, scale), sol);
        }
        std::vector<std::pair<double, int>> weights;
        double wmax = 0.0;
        for (std::size_t id = 0; id < program.num_constraints(); ++id) {
            const double w = std::abs(sol.duals[id]);
            weights.push_back({w, static_cast<int>(id)});
            wmax = std::max(wmax, w);
        }
        std::stable_sort(weights.begin(), weights.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        for (const auto& [w, id] : weights) {
            if (w > 1e-6 * wmax && w > 0.0) sol.infeasibility_set.push_back(ConstraintId{id});
        }
        std::ostringstream os;
        os << "primal infeasible";
        if (!sol.infeasibility_set.empty()) {
            const auto& nm = program.constraint_name(sol.infeasibility_set.front());
            os << "; most violated constraint: " << (nm.empty() ? "#" + std::to_string(sol.infeasibility_set.front().index) : nm);
        }
        for (std::size_t v = 0; v < program.num_variables(); ++v) {
            wmax = std::max({wmax, sol.lower_bound_duals[v], sol.upper_bound_duals[v]});
        }
        for (std::size_t v = 0; v < program.num_variables(); ++v) {
            const double w = std::max(sol.lower_bound_duals[v], sol.upper_bound_duals[v]);
            if (wmax > 0.0 && w > 1e-6 * wmax) {
                os << "; bound on " << (program.variables()[v].name.empty() ? "x" + std::to_string(v)
                                                                           : program.variables()[v].name);
            }
        }
        sol.diagnostics = os.str();
        sol.primal.assign(program.num_variables(), 0.0);
        return sol;
    }
    if (sol.status == SolveStatus::unbounded) {
        sol.diagnostics = "dual infeasible (objective unbounded below)";
        fill_solution(sf, program, it.x, Vec(it.y.size(), 0.0), Vec(it.z.size(), 0.0), sol);
        sol.objective = -kInf;
        return sol;
    }

    Vec x = scaled(it.x, 1.0 / tau);
    Vec y = scaled(it.y, 1.0 / tau);
    Vec z = scaled(it.z, 1.0 / tau);
    if (sol.status == SolveStatus::optimal && program.cone_constraints().empty()) {
        const Vec s = scaled(it.s, 1.0 / tau);
        const double feas = tol.feas * std::max({1.0, inf_norm(sf.b), inf_norm(sf.h)});
        detail::polish(sf, program.objective(), x, y, z, s, feas);
    }
    fill_solution(sf, program, x, y, z, sol);
    sol.objective = program.objective().evaluate(sol.primal);
    sol.kkt_residual = detail::model_stationarity(sf, program.objective(), x, y, z);
    if (sol.status == SolveStatus::numerical_failure || sol.status == SolveStatus::reduced_accuracy) {
        std::ostringstream os;
        os << hsd.diagnostics() << " after " << hsd.iterations() << " iterations; pres=" << hsd.pres()
           << " dres=" << hsd.dres() << " gap=" << hsd.gap() << " tau=" << it.tau << " kappa=" << it.kappa;
        sol.diagnostics = os.str();
    }
    return sol;
}

double dual_of(const Solution& sol, const ConvexProgram& program, std::string_view name) {
    const auto id = program.find_constraint(name);
    if (!id) throw UnknownConstraint("unknown constraint '" + std::string(name) + "'");
    return sol.dual(*id);
}

}  // namespace lem::convex
