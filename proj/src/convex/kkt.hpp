// Reduced KKT system of the interior-point method.
//
//   [ 0  A'  G'   ] [dx]   [r1]
//   [ A  0   0    ] [dy] = [r2]
//   [ G  0  -W'W  ] [dz]   [r3]
//
// dz is eliminated, leaving [H A'; A 0] with H = G' W^{-2} G, which is
// factored with a small static regularization. Iterative refinement runs
// against the full unregularized system. Small systems use dense Cholesky with a Schur complement on
// the equalities, larger ones a sparse LDL' of the quasi-definite matrix.
#pragma once

#include <memory>
#include <vector>

#include "cones.hpp"
#include "standard_form.hpp"

namespace lem::convex::detail {

class KktSolver {
  public:
    KktSolver(const StandardForm& sf, const ConeAlgebra& cones);
    ~KktSolver();
    KktSolver(const KktSolver&) = delete;
    KktSolver& operator=(const KktSolver&) = delete;

    /// Factors with the current cone scaling, or with W = I.
    bool factor(bool identity_scaling);
    /// Solves for (dx, dy, dz). Returns false on a non-finite result.
    bool solve(const double* r1, const double* r2, const double* r3, double* dx, double* dy, double* dz);

    bool dense() const noexcept { return dense_; }

  private:
    void apply_w2_inv(const double* v, double* out) const;  // W^{-2} v
    void apply_w2(const double* v, double* out) const;      // W^2 v
    void reduced_solve(const double* r1, const double* r2, const double* r3, double* dx, double* dy, double* dz);

    struct Impl;
    const StandardForm& sf_;
    const ConeAlgebra& cones_;
    bool dense_;
    bool identity_ = false;
    std::unique_ptr<Impl> impl_;
};

}  // namespace lem::convex::detail
