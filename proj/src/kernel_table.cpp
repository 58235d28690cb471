#include "nelson/kernel_table.hpp"

#include <algorithm>
#include <limits>

#include "nelson/errors.hpp"
#include "nelson/parallel.hpp"

namespace nelson::kernels {

namespace {

bool is_scaled(KernelKind k) { return k == KernelKind::phi_scaled || k == KernelKind::grad_coeff_scaled; }

// Inverse of a strictly increasing map by bisection.
template <class F>
double invert(F&& f, double target, double hi) {
    double lo = 0.0;
    while (f(hi) < target) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline void lagrange4(double f, double w[4]) {
    // Nodes at -1, 0, 1, 2 relative to the cell start; f in [0, 1).
    const double fm1 = f - 1.0, fm2 = f - 2.0, fp1 = f + 1.0;
    w[0] = -f * fm1 * fm2 / 6.0;
    w[1] = fp1 * fm1 * fm2 / 2.0;
    w[2] = -fp1 * f * fm2 / 2.0;
    w[3] = fp1 * f * fm1 / 6.0;
}

}  // namespace

KernelTable::KernelTable(KernelKind kind, const ModelParams& params, double t_max, const QuadratureSpec& quad,
                         TableSpec spec)
    : kind_(kind), params_(params), quad_(quad), t_max_(t_max), step_(spec.step), s_max_(spec.s_max) {
    params_.validate();
    if (!(t_max > 0.0)) throw InvalidParams("table t_max must be > 0");
    a_ = std::max(std::sqrt(params_.eps), spec.a_min);
    c_ = is_scaled(kind) ? params_.kappa * params_.kappa : 1.0;
    alpha_ = std::max({params_.lambda, params_.nu, 0.25});
    const double wmin = params_.omega_min();
    tp_cut_ = c_ * t_max;
    if (wmin > 0.0) tp_cut_ = std::min(tp_cut_, 46.0 / wmin);
    power_ = (kind == KernelKind::phi || kind == KernelKind::phi_scaled) ? 0 : 1;

    nu_ = static_cast<int>(std::ceil(map_u(s_max_) / step_)) + 3;
    nv_ = static_cast<int>(std::ceil(map_v(tp_cut_) / step_)) + 3;
    std::vector<double> s_nodes(nu_), tp_nodes(nv_);
    for (int i = 0; i < nu_; ++i)
        s_nodes[i] = i == 0 ? 0.0 : invert([&](double s) { return map_u(s); }, i * step_, a_);
    for (int j = 0; j < nv_; ++j)
        tp_nodes[j] = j == 0 ? 0.0 : invert([&](double tp) { return map_v(tp); }, j * step_, a_);

    values_.assign(static_cast<std::size_t>(nv_) * (nu_ + 1), 0.0);
    const std::size_t total = static_cast<std::size_t>(nv_) * nu_;
    parallel_for(total, spec.threads, [&](std::size_t idx) {
        const int j = static_cast<int>(idx / nu_);
        const int i = static_cast<int>(idx % nu_);
        const double s = s_nodes[i];
        const double tp = tp_nodes[j];
        double v;
        if (params_.eps == 0.0 && s == 0.0 && tp == 0.0) {
            v = std::numeric_limits<double>::quiet_NaN();
        } else {
            v = eval_kind(kind_, params_, s, tp / c_, quad_).value * weight(s * s, tp * tp + a_ * a_);
        }
        values_[static_cast<std::size_t>(j) * (nu_ + 1) + i + 1] = v;
    });
    for (int j = 0; j < nv_; ++j) {
        double* row = values_.data() + static_cast<std::size_t>(j) * (nu_ + 1);
        row[0] = row[2];
    }
}

bool KernelTable::near_singular(double s, double tp) const {
    if (params_.eps > 0.0) return false;
    const double r0 = 24.0 * a_;
    return s * s + tp * tp < r0 * r0;
}

double KernelTable::direct(double s, double t) const { return eval_kind(kind_, params_, s, std::fabs(t), quad_).value; }

double KernelTable::eval_row(const double* row, double s, double tp2) const {
    const double u = map_u(s) / step_;
    const int i = static_cast<int>(u);
    double w[4];
    lagrange4(u - i, w);
    // Storage column i+1 holds node i; the stencil covers nodes i-1..i+2.
    const double* p = row + i;
    const double F = w[0] * p[0] + w[1] * p[1] + w[2] * p[2] + w[3] * p[3];
    return F / weight(s * s, tp2);
}

double KernelTable::operator()(double s, double t) const {
    const double at = std::fabs(t);
    if (at > t_max_ || s > s_max_) return direct(s, at);
    const double tp = c_ * at;
    if (tp > tp_cut_) return 0.0;
    if (near_singular(s, tp)) return direct(s, at);
    const double v = map_v(tp) / step_;
    const int j = static_cast<int>(v);
    const int j0 = std::clamp(j - 1, 0, nv_ - 4);
    double wv[4];
    lagrange4(v - (j0 + 1), wv);
    const double u = map_u(s) / step_;
    const int i = static_cast<int>(u);
    double wu[4];
    lagrange4(u - i, wu);
    double F = 0.0;
    for (int jj = 0; jj < 4; ++jj) {
        const double* p = values_.data() + static_cast<std::size_t>(j0 + jj) * (nu_ + 1) + i;
        F += wv[jj] * (wu[0] * p[0] + wu[1] * p[1] + wu[2] * p[2] + wu[3] * p[3]);
    }
    return F / weight(s * s, tp * tp + a_ * a_);
}

KernelTable::Slice KernelTable::slice(double t) const {
    Slice sl;
    sl.table_ = this;
    sl.t_ = std::fabs(t);
    const double tp = c_ * sl.t_;
    sl.tp2_ = tp * tp + a_ * a_;
    if (sl.t_ > t_max_) {
        sl.direct_ = true;
        return sl;
    }
    if (tp > tp_cut_) {
        sl.zero_ = true;
        return sl;
    }
    const double v = map_v(tp) / step_;
    const int j = static_cast<int>(v);
    const int j0 = std::clamp(j - 1, 0, nv_ - 4);
    double wv[4];
    lagrange4(v - (j0 + 1), wv);
    sl.row_.assign(nu_ + 1, 0.0);
    for (int jj = 0; jj < 4; ++jj) {
        const double* p = values_.data() + static_cast<std::size_t>(j0 + jj) * (nu_ + 1);
        for (int i = 0; i <= nu_; ++i) sl.row_[i] += wv[jj] * p[i];
    }
    return sl;
}

double KernelTable::Slice::operator()(double s) const {
    if (zero_) return 0.0;
    const KernelTable& tb = *table_;
    if (direct_ || s > tb.s_max_) return tb.direct(s, t_);
    if (tb.near_singular(s, tb.c_ * t_)) return tb.direct(s, t_);
    return tb.eval_row(row_.data(), s, tp2_);
}

}  // namespace nelson::kernels
