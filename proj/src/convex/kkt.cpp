#include "kkt.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

namespace lem::convex::detail {

namespace {

constexpr int kDenseLimit = 160;       // variables
constexpr double kRegularization = 1e-9;
constexpr int kRefinementSteps = 4;

struct ConeBlock {
    std::vector<int> support;   // columns touched by the block
    Eigen::MatrixXd g;          // q x |support|, dense copy of the block rows
};

}  // namespace

struct KktSolver::Impl {
    int n = 0;
    int p = 0;
    int m = 0;
    std::vector<ConeBlock> blocks;
    Eigen::MatrixXd scaled;  // workspace: W^{-1} G_block

    // Dense path.
    Eigen::MatrixXd h;
    Eigen::LLT<Eigen::MatrixXd> llt_m;
    Eigen::MatrixXd a;
    Eigen::MatrixXd minv_at;
    Eigen::LLT<Eigen::MatrixXd> llt_s;

    // Sparse path.
    std::vector<Eigen::Triplet<double>> triplets;
    Eigen::SparseMatrix<double> k;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
    bool analyzed = false;

    // Workspaces.
    Eigen::VectorXd r1t, x, y, e1, e2, e3, cx, cy, cz, tmp_m, tmp_m2, rhs, sol;
};

KktSolver::KktSolver(const StandardForm& sf, const ConeAlgebra& cones)
    : sf_(sf), cones_(cones), dense_(sf.n <= kDenseLimit), impl_(std::make_unique<Impl>()) {
    Impl& im = *impl_;
    im.n = sf.n;
    im.p = sf.A.rows();
    im.m = sf.G.rows();
    const auto& dims = cones.dims();
    for (std::size_t kc = 0; kc < dims.soc.size(); ++kc) {
        const int st = cones.soc_start()[kc];
        const int q = dims.soc[kc];
        ConeBlock blk;
        for (int r = st; r < st + q; ++r) {
            for (int e = sf.G.start[r]; e < sf.G.start[r + 1]; ++e) blk.support.push_back(sf.G.index[e]);
        }
        std::sort(blk.support.begin(), blk.support.end());
        blk.support.erase(std::unique(blk.support.begin(), blk.support.end()), blk.support.end());
        blk.g = Eigen::MatrixXd::Zero(q, static_cast<Eigen::Index>(blk.support.size()));
        for (int r = st; r < st + q; ++r) {
            for (int e = sf.G.start[r]; e < sf.G.start[r + 1]; ++e) {
                const auto pos = std::lower_bound(blk.support.begin(), blk.support.end(), sf.G.index[e]) -
                                 blk.support.begin();
                blk.g(r - st, pos) += sf.G.value[e];
            }
        }
        im.blocks.push_back(std::move(blk));
    }
    if (dense_) {
        im.h.resize(im.n, im.n);
        im.a = Eigen::MatrixXd::Zero(im.p, im.n);
        for (int r = 0; r < im.p; ++r) {
            for (int e = sf.A.start[r]; e < sf.A.start[r + 1]; ++e) im.a(r, sf.A.index[e]) += sf.A.value[e];
        }
    }
    im.r1t.resize(im.n);
    im.x.resize(im.n);
    im.y.resize(im.p);
    im.e1.resize(im.n);
    im.e2.resize(im.p);
    im.cx.resize(im.n);
    im.cy.resize(im.p);
    im.tmp_m.resize(im.m);
    im.tmp_m2.resize(im.m);
}

KktSolver::~KktSolver() = default;

void KktSolver::apply_w2_inv(const double* v, double* out) const {
    if (identity_) {
        std::copy(v, v + impl_->m, out);
        return;
    }
    double* tmp = impl_->tmp_m2.data();
    cones_.apply_w_inv(v, tmp);
    cones_.apply_w_inv(tmp, out);
}

bool KktSolver::factor(bool identity_scaling) {
    identity_ = identity_scaling;
    Impl& im = *impl_;
    const int lp = cones_.dims().lp;
    const auto& lpw = cones_.lp_w();
    const auto& G = sf_.G;

    auto scaled_block = [&](std::size_t kc) -> const Eigen::MatrixXd& {
        const ConeBlock& blk = im.blocks[kc];
        if (identity_) return blk.g;
        im.scaled.resize(blk.g.rows(), blk.g.cols());
        for (Eigen::Index j = 0; j < blk.g.cols(); ++j) {
            cones_.apply_w_inv_soc(kc, blk.g.col(j).data(), im.scaled.col(j).data());
        }
        return im.scaled;
    };

    if (dense_) {
        im.h.setZero();
        for (int r = 0; r < lp; ++r) {
            const double d = identity_ ? 1.0 : 1.0 / (lpw[r] * lpw[r]);
            for (int e1 = G.start[r]; e1 < G.start[r + 1]; ++e1) {
                const double v1 = d * G.value[e1];
                for (int e2 = G.start[r]; e2 < G.start[r + 1]; ++e2) {
                    im.h(G.index[e1], G.index[e2]) += v1 * G.value[e2];
                }
            }
        }
        for (std::size_t kc = 0; kc < im.blocks.size(); ++kc) {
            const Eigen::MatrixXd& v = scaled_block(kc);
            const Eigen::MatrixXd vtv = v.transpose() * v;
            const auto& sup = im.blocks[kc].support;
            for (std::size_t i = 0; i < sup.size(); ++i) {
                for (std::size_t j = 0; j < sup.size(); ++j) im.h(sup[i], sup[j]) += vtv(i, j);
            }
        }
        // Badly scaled iterates can break the Cholesky; retry with a
        // regularization proportional to the diagonal.
        const double dmax = std::max(1.0, im.h.diagonal().cwiseAbs().maxCoeff());
        double reg = kRegularization;
        for (int attempt = 0; attempt < 4; ++attempt, reg = std::max(reg * 1e3, 1e-14 * dmax)) {
            Eigen::MatrixXd mreg = im.h;
            mreg.diagonal().array() += reg;
            im.llt_m.compute(mreg);
            if (im.llt_m.info() != Eigen::Success) continue;
            if (im.p == 0) return true;
            im.minv_at = im.llt_m.solve(im.a.transpose());
            Eigen::MatrixXd s = im.a * im.minv_at;
            s.diagonal().array() += reg;
            im.llt_s.compute(s);
            if (im.llt_s.info() == Eigen::Success) return true;
        }
        return false;
    }

    // Sparse quasi-definite matrix, lower triangle.
    auto& tr = im.triplets;
    tr.clear();
    for (int r = 0; r < lp; ++r) {
        const double d = identity_ ? 1.0 : 1.0 / (lpw[r] * lpw[r]);
        for (int e1 = G.start[r]; e1 < G.start[r + 1]; ++e1) {
            for (int e2 = G.start[r]; e2 < G.start[r + 1]; ++e2) {
                if (G.index[e1] >= G.index[e2]) tr.emplace_back(G.index[e1], G.index[e2], d * G.value[e1] * G.value[e2]);
            }
        }
    }
    for (std::size_t kc = 0; kc < im.blocks.size(); ++kc) {
        const Eigen::MatrixXd& v = scaled_block(kc);
        const Eigen::MatrixXd vtv = v.transpose() * v;
        const auto& sup = im.blocks[kc].support;
        for (std::size_t i = 0; i < sup.size(); ++i) {
            for (std::size_t j = 0; j <= i; ++j) tr.emplace_back(sup[i], sup[j], vtv(i, j));
        }
    }
    for (int i = 0; i < im.n; ++i) tr.emplace_back(i, i, kRegularization);
    for (int r = 0; r < im.p; ++r) {
        for (int e = sf_.A.start[r]; e < sf_.A.start[r + 1]; ++e) tr.emplace_back(im.n + r, sf_.A.index[e], sf_.A.value[e]);
        tr.emplace_back(im.n + r, im.n + r, -kRegularization);
    }
    im.k.resize(im.n + im.p, im.n + im.p);
    im.k.setFromTriplets(tr.begin(), tr.end());
    if (!im.analyzed) {
        im.ldlt.analyzePattern(im.k);
        im.analyzed = true;
    }
    im.ldlt.factorize(im.k);
    return im.ldlt.info() == Eigen::Success;
}

void KktSolver::apply_w2(const double* v, double* out) const {
    if (identity_) {
        std::copy(v, v + impl_->m, out);
        return;
    }
    double* tmp = impl_->tmp_m2.data();
    cones_.apply_w(v, tmp);
    cones_.apply_w(tmp, out);
}

void KktSolver::reduced_solve(const double* r1, const double* r2, const double* r3, double* dx, double* dy,
                              double* dz) {
    Impl& im = *impl_;
    const int n = im.n;
    const int p = im.p;
    const int m = im.m;

    // r1t = r1 + G' W^{-2} r3
    apply_w2_inv(r3, im.tmp_m.data());
    im.r1t = Eigen::Map<const Eigen::VectorXd>(r1, n);
    sf_.G.gemv_t(im.tmp_m.data(), im.r1t.data());
    Eigen::Map<const Eigen::VectorXd> r2v(r2, p);
    Eigen::Map<Eigen::VectorXd> x(dx, n);
    Eigen::Map<Eigen::VectorXd> y(dy, p);
    if (dense_) {
        im.x = im.llt_m.solve(im.r1t);
        if (p > 0) {
            im.y = im.llt_s.solve(im.a * im.x - r2v);
            x = im.x - im.minv_at * im.y;
            y = im.y;
        } else {
            x = im.x;
        }
    } else {
        im.rhs.resize(n + p);
        im.rhs.head(n) = im.r1t;
        im.rhs.tail(p) = r2v;
        im.sol = im.ldlt.solve(im.rhs);
        x = im.sol.head(n);
        y = im.sol.tail(p);
    }
    // dz = W^{-2} (G dx - r3)
    for (int i = 0; i < m; ++i) im.tmp_m[i] = -r3[i];
    sf_.G.gemv(dx, im.tmp_m.data());
    apply_w2_inv(im.tmp_m.data(), dz);
}

bool KktSolver::solve(const double* r1, const double* r2, const double* r3, double* dx, double* dy, double* dz) {
    Impl& im = *impl_;
    const int n = im.n;
    const int p = im.p;
    const int m = im.m;
    reduced_solve(r1, r2, r3, dx, dy, dz);

    // Iterative refinement against the unregularized full system.
    auto inf_norm = [](const double* v, int len) {
        double a = 0.0;
        for (int i = 0; i < len; ++i) a = std::max(a, std::abs(v[i]));
        return a;
    };
    const double scale = 1.0 + std::max({inf_norm(r1, n), inf_norm(r2, p), inf_norm(r3, m)});
    im.e1.resize(n);
    im.e2.resize(p);
    im.e3.resize(m);
    im.cx.resize(n);
    im.cy.resize(p);
    im.cz.resize(m);
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= kRefinementSteps; ++it) {
        // e1 = r1 - A'dy - G'dz, e2 = r2 - A dx, e3 = r3 - G dx + W^2 dz
        std::copy(r1, r1 + n, im.e1.data());
        sf_.A.gemv_t(dy, im.e1.data(), -1.0);
        sf_.G.gemv_t(dz, im.e1.data(), -1.0);
        std::copy(r2, r2 + p, im.e2.data());
        sf_.A.gemv(dx, im.e2.data(), -1.0);
        apply_w2(dz, im.e3.data());
        for (int i = 0; i < m; ++i) im.e3[i] += r3[i];
        sf_.G.gemv(dx, im.e3.data(), -1.0);
        const double err = std::max({inf_norm(im.e1.data(), n), inf_norm(im.e2.data(), p), inf_norm(im.e3.data(), m)});
        if (err <= 1e-11 * scale || err >= 0.5 * prev || it == kRefinementSteps) break;
        prev = err;
        reduced_solve(im.e1.data(), im.e2.data(), im.e3.data(), im.cx.data(), im.cy.data(), im.cz.data());
        for (int i = 0; i < n; ++i) dx[i] += im.cx[i];
        for (int i = 0; i < p; ++i) dy[i] += im.cy[i];
        for (int i = 0; i < m; ++i) dz[i] += im.cz[i];
    }
    auto finite = [](const double* v, int len) { return std::all_of(v, v + len, [](double a) { return std::isfinite(a); }); };
    return finite(dx, n) && finite(dy, p) && finite(dz, m);
}

}  // namespace lem::convex::detail
