#include "cones.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lem::convex::detail {

namespace {

double norm_tail(const double* v, int q) {
    double acc = 0.0;
    for (int i = 1; i < q; ++i) acc += v[i] * v[i];
    return std::sqrt(acc);
}

// u0^2 - ||u1||^2, evaluated as a product of sums to limit cancellation.
double jnorm_sq(const double* u, int q) {
    const double t = norm_tail(u, q);
    return (u[0] - t) * (u[0] + t);
}

// Largest alpha in [0, cap] with u + alpha du in the second-order cone. The
// direction is mapped through the cone automorphism that sends u/|u|_J to e.
double soc_step(const double* u, const double* du, int q, double cap) {
    const double uj = jnorm_sq(u, q);
    if (!(uj > 0.0) || !(u[0] > 0.0)) return 0.0;
    const double un = std::sqrt(uj);
    double rho0 = u[0] * du[0];
    for (int i = 1; i < q; ++i) rho0 -= u[i] * du[i];
    rho0 /= un;
    const double f = (rho0 + du[0]) / (u[0] / un + 1.0);
    double r1 = 0.0;
    for (int i = 1; i < q; ++i) {
        const double v = du[i] - f * u[i] / un;
        r1 += v * v;
    }
    const double denom = std::sqrt(r1) - rho0;
    if (denom <= 0.0) return cap;
    return std::min(cap, un / denom);
}

}  // namespace

ConeAlgebra::ConeAlgebra(const ConeDims& dims) : dims_(dims), m_(dims.total()) {
    int pos = dims_.lp;
    for (int q : dims_.soc) {
        soc_start_.push_back(pos);
        pos += q;
    }
    lp_w_.assign(static_cast<std::size_t>(dims_.lp), 1.0);
    eta_.assign(dims_.soc.size(), 1.0);
    wbar_.assign(static_cast<std::size_t>(m_ - dims_.lp), 0.0);
    lambda_.assign(static_cast<std::size_t>(m_), 0.0);
}

bool ConeAlgebra::update_scaling(const double* s, const double* z) {
    for (int i = 0; i < dims_.lp; ++i) {
        if (!(s[i] > 0.0) || !(z[i] > 0.0)) return false;
        lp_w_[i] = std::sqrt(s[i] / z[i]);
        lambda_[i] = std::sqrt(s[i] * z[i]);
    }
    for (std::size_t k = 0; k < dims_.soc.size(); ++k) {
        const int q = dims_.soc[k];
        const int st = soc_start_[k];
        const double* sk = s + st;
        const double* zk = z + st;
        const double sj = jnorm_sq(sk, q);
        const double zj = jnorm_sq(zk, q);
        if (!(sj > 0.0) || !(zj > 0.0) || !(sk[0] > 0.0) || !(zk[0] > 0.0)) return false;
        const double sres = std::sqrt(sj);
        const double zres = std::sqrt(zj);
        double sz = 0.0;
        for (int i = 0; i < q; ++i) sz += (sk[i] / sres) * (zk[i] / zres);
        const double gamma = std::sqrt(std::max((1.0 + sz) / 2.0, 0.0));
        if (!(gamma > 0.0)) return false;
        double* wb = wbar_.data() + (st - dims_.lp);
        wb[0] = (sk[0] / sres + zk[0] / zres) / (2.0 * gamma);
        for (int i = 1; i < q; ++i) wb[i] = (sk[i] / sres - zk[i] / zres) / (2.0 * gamma);
        eta_[k] = std::sqrt(sres / zres);
    }
    apply_w(z, lambda_.data());
    for (int i = 0; i < dims_.lp; ++i) lambda_[i] = std::sqrt(s[i] * z[i]);
    return true;
}

void ConeAlgebra::apply_w(const double* v, double* out) const {
    for (int i = 0; i < dims_.lp; ++i) out[i] = lp_w_[i] * v[i];
    for (std::size_t k = 0; k < dims_.soc.size(); ++k) {
        const int q = dims_.soc[k];
        const int st = soc_start_[k];
        const double* wb = wbar_.data() + (st - dims_.lp);
        const double* vk = v + st;
        double* ok = out + st;
        double w1v1 = 0.0;
        for (int i = 1; i < q; ++i) w1v1 += wb[i] * vk[i];
        const double v0 = vk[0];
        const double coef = v0 + w1v1 / (1.0 + wb[0]);
        ok[0] = eta_[k] * (wb[0] * v0 + w1v1);
        for (int i = 1; i < q; ++i) ok[i] = eta_[k] * (vk[i] + coef * wb[i]);
    }
}

void ConeAlgebra::apply_w_inv(const double* v, double* out) const {
    for (int i = 0; i < dims_.lp; ++i) out[i] = v[i] / lp_w_[i];
    for (std::size_t k = 0; k < dims_.soc.size(); ++k) {
        const int st = soc_start_[k];
        apply_w_inv_soc(k, v + st, out + st);
    }
}

void ConeAlgebra::apply_w_inv_soc(std::size_t k, const double* vk, double* ok) const {
    const int q = dims_.soc[k];
    const double* wb = wbar_.data() + (soc_start_[k] - dims_.lp);
    double w1v1 = 0.0;
    for (int i = 1; i < q; ++i) w1v1 += wb[i] * vk[i];
    const double v0 = vk[0];
    const double coef = -v0 + w1v1 / (1.0 + wb[0]);
    const double inv = 1.0 / eta_[k];
    ok[0] = inv * (wb[0] * v0 - w1v1);
    for (int i = 1; i < q; ++i) ok[i] = inv * (vk[i] + coef * wb[i]);
}

void ConeAlgebra::product(const double* u, const double* v, double* out) const {
    for (int i = 0; i < dims_.lp; ++i) out[i] = u[i] * v[i];
    for (std::size_t k = 0; k < dims_.soc.size(); ++k) {
        const int q = dims_.soc[k];
        const int st = soc_start_[k];
        const double* uk = u + st;
        const double* vk = v + st;
        double* ok = out + st;
        double d = 0.0;
        for (int i = 0; i < q; ++i) d += uk[i] * vk[i];
        for (int i = 1; i < q; ++i) ok[i] = uk[0] * vk[i] + vk[0] * uk[i];
        ok[0] = d;
    }
}

void ConeAlgebra::divide(const double* l, const double* d, double* out) const {
    for (int i = 0; i < dims_.lp; ++i) out[i] = d[i] / l[i];
    for (std::size_t k = 0; k < dims_.soc.size(); ++k) {
        const int q = dims_.soc[k];
        const int st = soc_start_[k];
        const double* lk = l + st;
        const double* dk = d + st;
        double* ok = out + st;
        double l1d1 = 0.0;
        for (int i = 1; i < q; ++i) l1d1 += lk[i] * dk[i];
        const double det = jnorm_sq(lk, q);
        const double x0 = (lk[0] * dk[0] - l1d1) / det;
        for (int i = 1; i < q; ++i) ok[i] = (dk[i] - x0 * lk[i]) / lk[0];
        ok[0] = x0;
    }
}

void ConeAlgebra::add_identity(double* v, double alpha) const {
    for (int i = 0; i < dims_.lp; ++i) v[i] += alpha;
    for (int st : soc_start_) v[st] += alpha;
}

double ConeAlgebra::dot(const double* u, const double* v) const {
    double acc = 0.0;
    for (int i = 0; i < m_; ++i) acc += u[i] * v[i];
    return acc;
}

double ConeAlgebra::max_step(const double* u, const double* du, double cap) const {
    double alpha = cap;
    for (int i = 0; i < dims_.lp; ++i) {
        if (du[i] < 0.0) alpha = std::min(alpha, -u[i] / du[i]);
    }
    for (std::size_t k = 0; k < dims_.soc.size(); ++k) {
        const int st = soc_start_[k];
        alpha = std::min(alpha, soc_step(u + st, du + st, dims_.soc[k], cap));
    }
    return std::max(alpha, 0.0);
}

double ConeAlgebra::distance_to_interior(const double* u) const {
    double a = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < dims_.lp; ++i) a = std::max(a, -u[i]);
    for (std::size_t k = 0; k < dims_.soc.size(); ++k) {
        const int st = soc_start_[k];
        a = std::max(a, norm_tail(u + st, dims_.soc[k]) - u[st]);
    }
    return a;
}

bool ConeAlgebra::interior_after(const double* u, const double* du, double alpha) const {
    for (int i = 0; i < dims_.lp; ++i) {
        if (!(u[i] + alpha * du[i] > 0.0)) return false;
    }
    std::vector<double> v;
    for (std::size_t k = 0; k < dims_.soc.size(); ++k) {
        const int q = dims_.soc[k];
        const int st = soc_start_[k];
        v.resize(static_cast<std::size_t>(q));
        for (int i = 0; i < q; ++i) v[i] = u[st + i] + alpha * du[st + i];
        if (!(v[0] > 0.0) || !(jnorm_sq(v.data(), q) > 0.0)) return false;
    }
    return true;
}

}  // namespace lem::convex::detail
