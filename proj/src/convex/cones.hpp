// Cone algebra on the product cone R^l_+ x Q^{q1} x ... (Nesterov-Todd scaling).
#pragma once

#include <vector>

#include "standard_form.hpp"

namespace lem::convex::detail {

class ConeAlgebra {
  public:
    explicit ConeAlgebra(const ConeDims& dims);

    int size() const noexcept { return m_; }
    int degree() const noexcept { return dims_.degree(); }
    const ConeDims& dims() const noexcept { return dims_; }
    const std::vector<int>& soc_start() const noexcept { return soc_start_; }

    /// Computes the NT scaling W with W z = W^{-1} s = lambda. Returns false
    /// when s or z leaves the cone interior.
    bool update_scaling(const double* s, const double* z);
    const std::vector<double>& lambda() const noexcept { return lambda_; }

    void apply_w(const double* v, double* out) const;      // out = W v
    void apply_w_inv(const double* v, double* out) const;  // out = W^{-1} v
    /// W^{-1} restricted to second-order cone k (q entries).
    void apply_w_inv_soc(std::size_t k, const double* v, double* out) const;

    void product(const double* u, const double* v, double* out) const;  // u o v
    void divide(const double* l, const double* d, double* out) const;   // solves l o out = d
    void add_identity(double* v, double alpha) const;                   // v += alpha e
    double dot(const double* u, const double* v) const;

    /// Largest alpha with u + alpha du in the closed cone (capped at cap).
    double max_step(const double* u, const double* du, double cap) const;
    /// Smallest alpha such that u + alpha e lies in the cone.
    double distance_to_interior(const double* u) const;
    /// True when u + alpha du is strictly inside every cone, by the same test update_scaling applies.
    bool interior_after(const double* u, const double* du, double alpha) const;

    // Scaling data, exposed for KKT assembly.
    const std::vector<double>& lp_w() const noexcept { return lp_w_; }  // sqrt(s/z)
    const std::vector<double>& soc_eta() const noexcept { return eta_; }
    const std::vector<double>& soc_wbar() const noexcept { return wbar_; }  // concatenated per cone

  private:
    ConeDims dims_;
    int m_ = 0;
    std::vector<int> soc_start_;
    std::vector<double> lp_w_;
    std::vector<double> eta_;
    std::vector<double> wbar_;
    std::vector<double> lambda_;
};

}  // namespace lem::convex::detail
