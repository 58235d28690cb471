#include "nelson/action.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nelson/errors.hpp"

namespace nelson::action {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNaiveFloor = 1e-4;

enum Which { kW = 0, kPhi = 1, kGrad = 2 };

inline double dist(const double* a, const double* b) {
    const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
}

ActionBreakdown empty_breakdown() {
    return {kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, false};
}

}  // namespace

void ActionConfig::validate(const paths::TimeGrid& grid) const {
    params.validate();
    grid.validate();
    if (!(tau > 0.0) || tau > 2.0 * grid.t_horizon * (1.0 + 1e-12)) throw InvalidGrid("tau must lie in (0, 2T]");
    if (route == Route::naive && params.eps == 0.0) throw RouteForbidden("naive route requires eps > 0");
    if (route == Route::naive && scaled) throw RouteForbidden("naive route is not defined for scaled kernels");
}

double DriftProcess::l2_norm_squared(double dt) const {
    double acc = 0.0;
    for (double v : values) acc += v * v;
    return acc * dt;
}

KernelSource::KernelSource(kernels::KernelKind kind, const kernels::ModelParams& params, double t_max,
                           const kernels::QuadratureSpec& quad, KernelMode mode, const kernels::TableSpec& spec)
    : kind_(kind), params_(params), quad_(quad) {
    if (mode == KernelMode::table) table_ = std::make_unique<kernels::KernelTable>(kind, params, t_max, quad, spec);
}

KernelSource::Slice KernelSource::slice(double t) const {
    Slice sl;
    if (table_) {
        sl.table_ = true;
        sl.table_slice_ = table_->slice(t);
    }
    sl.kind_ = kind_;
    sl.params_ = &params_;
    sl.quad_ = &quad_;
    sl.t_ = t;
    return sl;
}

double KernelSource::operator()(double s, double t) const {
    return table_ ? (*table_)(s, t) : kernels::eval_kind(kind_, params_, s, t, quad_).value;
}

ActionEvaluator::ActionEvaluator(ActionConfig config, paths::TimeGrid grid) : config_(config), grid_(grid) {
    grid_.tau = config_.tau;
    config_.validate(grid_);
    k_ = grid_.tau_steps();
    phi_kind_ = config_.scaled ? kernels::KernelKind::phi_scaled : kernels::KernelKind::phi;
    grad_kind_ = config_.scaled ? kernels::KernelKind::grad_coeff_scaled : kernels::KernelKind::grad_coeff;
}

const KernelSource& ActionEvaluator::source(int which) const {
    std::call_once(source_once_[which], [&] {
        const kernels::KernelKind kind = which == kW ? kernels::KernelKind::W : which == kPhi ? phi_kind_ : grad_kind_;
        sources_[which] = std::make_unique<KernelSource>(kind, config_.params, 2.0 * grid_.t_horizon, config_.quad,
                                                         config_.mode, config_.table);
    });
    return *sources_[which];
}

const std::vector<KernelSource::Slice>& ActionEvaluator::lag_slices(int which) const {
    const KernelSource& src = source(which);
    std::call_once(slice_once_[which], [&] {
        const int M = grid_.n_steps;
        slices_[which].resize(M + 1);
        for (int d = 0; d <= M; ++d) slices_[which][d] = src.slice(d * grid_.dt());
    });
    return slices_[which];
}

double ActionEvaluator::naive(const paths::PathView& path) const {
    if (config_.params.eps == 0.0) throw RouteForbidden("naive action requires eps > 0");
    if (config_.scaled) throw RouteForbidden("naive action is not defined for scaled kernels");
    const auto& w = lag_slices(kW);
    const int M = grid_.n_steps, N = path.n_particles;
    const double dt = grid_.dt();
    // Lower triangle n <= m; the (m,n) and (n,m) cells are equal after swapping i and j.
    double total = 0.0;
    for (int m = 0; m <= M; ++m) {
        const double wm = (m == 0 || m == M) ? 0.5 * dt : dt;
        double row = 0.0;
        for (int n = 0; n <= m; ++n) {
            const double wn = (n == 0 || n == M) ? 0.5 * dt : dt;
            const auto& sl = w[m - n];
            double cell = 0.0;
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) cell += sl(dist(path.x(m, i), path.x(n, j)));
            row += (n == m ? 1.0 : 2.0) * wn * cell;
        }
        total += wm * row;
    }
    return total;
}

// Both parts group the ordered square by lag d = m - n >= 0. Lags 1..M appear twice by the
// (i,j) <-> (j,i) symmetry of the full square; the window lag K is shared half and half.
std::pair<double, double> ActionEvaluator::dd_od(const paths::PathView& path, bool want_dd, bool want_od) const {
    const auto& w = lag_slices(kW);
    const int M = grid_.n_steps, N = path.n_particles, K = k_;
    const double dt = grid_.dt();
    auto weight = [&](int m) { return (m == 0 || m == M) ? 0.5 * dt : dt; };
    auto lag_sum = [&](int d) {
        const auto& sl = w[d];
        if (sl.is_zero()) return 0.0;
        double acc = 0.0;
        for (int m = d; m <= M; ++m) {
            double cell = 0.0;
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) cell += sl(dist(path.x(m, i), path.x(m - d, j)));
            acc += weight(m) * weight(m - d) * cell;
        }
        return acc;
    };
    double dd = 0.0, od = 0.0;
    if (want_dd) {
        for (int d = 0; d <= K; ++d) {
            const double c = (d == 0 || (d == K && K < M)) ? 1.0 : 2.0;
            dd += c * lag_sum(d);
        }
    }
    if (want_od && K < M) {
        for (int d = K; d <= M; ++d) od += (d == K ? 1.0 : 2.0) * lag_sum(d);
    }
    return {want_dd ? dd : kNaN, want_od ? od : kNaN};
}

std::pair<double, double> ActionEvaluator::split(const paths::PathView& path) const {
    if (config_.scaled) {
        if (!full_window()) throw RouteForbidden("scaled kernels require the full window");
        return {kNaN, 0.0};
    }
    const bool dd = config_.params.eps > 0.0;
    return dd_od(path, dd, true);
}

double ActionEvaluator::s_od(const paths::PathView& path) const {
    if (full_window()) return 0.0;
    if (config_.scaled) throw RouteForbidden("scaled kernels require the full window");
    return dd_od(path, false, true).second;
}

double ActionEvaluator::x_term(const paths::PathView& path) const {
    if (path.n_particles < 2) return 0.0;
    const auto& sl = lag_slices(kPhi)[0];
    const int M = grid_.n_steps, N = path.n_particles;
    const double dt = grid_.dt();
    double total = 0.0;
    for (int m = 0; m <= M; ++m) {
        double cell = 0.0;
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) cell += sl(dist(path.x(m, i), path.x(m, j)));
        total += ((m == 0 || m == M) ? 0.5 * dt : dt) * cell;
    }
    // Ordered pairs i != j give each unordered pair twice, times the overall factor 2.
    return 4.0 * total;
}

DriftProcess ActionEvaluator::drift(const paths::PathView& path) const {
    const auto& g = lag_slices(kGrad);
    const int M = grid_.n_steps, N = path.n_particles, K = k_;
    const double dt = grid_.dt();
    DriftProcess out;
    out.n_times = M;
    out.n_particles = N;
    out.values.assign(static_cast<std::size_t>(M) * N * 3, 0.0);
    // Lag-major order keeps one kernel slice hot. Phi at t_m sums s = t_l for l in
    // [max(m-K, 0), m); s = t_m is excluded and the interval start gets the half weight.
    for (int d = 1; d <= std::min(K, M - 1); ++d) {
        const auto& sl = g[d];
        if (sl.is_zero()) continue;
        for (int m = d; m < M; ++m) {
            const int l = m - d;
            const double wl = (l == std::max(m - K, 0)) ? 0.5 * dt : dt;
            for (int i = 0; i < N; ++i) {
                const double* xi = path.x(m, i);
                double* phi = out.values.data() + (static_cast<std::size_t>(m) * N + i) * 3;
                for (int j = 0; j < N; ++j) {
                    const double* xj = path.x(l, j);
                    const double v[3] = {xi[0] - xj[0], xi[1] - xj[1], xi[2] - xj[2]};
                    const double c = 2.0 * wl * sl(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
                    phi[0] += c * v[0];
                    phi[1] += c * v[1];
                    phi[2] += c * v[2];
                }
            }
        }
    }
    return out;
}

double ActionEvaluator::y_term(const paths::PathView& path) const {
    const DriftProcess phi = drift(path);
    const int M = grid_.n_steps, N = path.n_particles;
    double total = 0.0;
    for (int m = 0; m < M; ++m)
        for (int i = 0; i < N; ++i) {
            const double* a = path.x(m, i);
            const double* b = path.x(m + 1, i);
            const double* f = phi.at(m, i);
            total += f[0] * (b[0] - a[0]) + f[1] * (b[1] - a[1]) + f[2] * (b[2] - a[2]);
        }
    return total;
}

double ActionEvaluator::z_term(const paths::PathView& path) const {
    const auto& p = lag_slices(kPhi);
    const int M = grid_.n_steps, N = path.n_particles, K = k_;
    const double dt = grid_.dt();
    const bool singular = config_.params.eps == 0.0;
    double total = 0.0;
    for (int l = 0; l <= M; ++l) {
        const int u = std::min(l + K, M);
        const auto& sl = p[u - l];
        double cell = 0.0;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                // phi_0(0, 0) is infinite; the node is a single endpoint of zero measure.
                if (singular && i == j && u == l) continue;
                cell += sl(dist(path.x(u, i), path.x(l, j)));
            }
        total += ((l == 0 || l == M) ? 0.5 * dt : dt) * cell;
    }
    return -2.0 * total;
}

double ActionEvaluator::counterterm() const {
    if (config_.params.eps == 0.0) return kNaN;
    std::call_once(ct_once_, [&] {
        const kernels::KernelValue v = config_.scaled ? kernels::eval_phi_scaled(config_.params, 0.0, 0.0, config_.quad)
                                                      : kernels::eval_phi(config_.params, 0.0, 0.0, config_.quad);
        ct_ = 4.0 * config_.params.n_particles * grid_.t_horizon * v.value;
    });
    return ct_;
}

ActionBreakdown ActionEvaluator::renormalized(const paths::PathView& path) const {
    ActionBreakdown b = empty_breakdown();
    const bool eps_pos = config_.params.eps > 0.0;
    if (config_.route == Route::naive) {
        b.s_total = naive(path);
        b.diag_counterterm = counterterm();
        b.s_ren = b.s_total - b.diag_counterterm;
        b.naive_below_floor = config_.params.eps < kNaiveFloor;
        return b;
    }
    b.s_od = s_od(path);
    b.x_term = x_term(path);
    b.y_term = y_term(path);
    b.z_term = z_term(path);
    b.s_ren = b.s_od + b.x_term + b.y_term + b.z_term;
    if (eps_pos && !config_.scaled) {
        b.diag_counterterm = counterterm();
        b.s_dd = dd_od(path, true, false).first;
        b.s_total = b.s_dd + b.s_od;
        b.ito_residual = b.s_dd - (b.diag_counterterm + b.x_term + b.y_term + b.z_term);
    }
    return b;
}

double ActionEvaluator::ito_residual(const paths::PathView& path) const {
    if (config_.params.eps == 0.0) throw RouteForbidden("Ito residual requires eps > 0");
    if (config_.scaled) throw RouteForbidden("Ito residual is defined for unscaled kernels");
    return ito_decomposition(path).ito_residual;
}

ActionBreakdown ActionEvaluator::ito_decomposition(const paths::PathView& path) const {
    if (config_.params.eps == 0.0) throw RouteForbidden("Ito residual requires eps > 0");
    if (config_.scaled) throw RouteForbidden("Ito residual is defined for unscaled kernels");
    ActionBreakdown b = empty_breakdown();
    b.s_dd = dd_od(path, true, false).first;
    b.diag_counterterm = counterterm();
    b.x_term = x_term(path);
    b.y_term = y_term(path);
    b.z_term = z_term(path);
    b.ito_residual = b.s_dd - (b.diag_counterterm + b.x_term + b.y_term + b.z_term);
    return b;
}

ActionBreakdown ActionEvaluator::full(const paths::PathView& path) const {
    ActionBreakdown b = empty_breakdown();
    const bool eps_pos = config_.params.eps > 0.0 && !config_.scaled;
    b.x_term = x_term(path);
    b.y_term = y_term(path);
    b.z_term = z_term(path);
    if (eps_pos) {
        const auto [dd, od] = dd_od(path, true, !full_window());
        b.s_dd = dd;
        b.s_od = full_window() ? 0.0 : od;
        b.s_total = naive(path);
        b.diag_counterterm = counterterm();
        b.ito_residual = b.s_dd - (b.diag_counterterm + b.x_term + b.y_term + b.z_term);
        b.naive_below_floor = config_.params.eps < kNaiveFloor;
    } else {
        b.s_od = s_od(path);
    }
    b.s_ren = b.s_od + b.x_term + b.y_term + b.z_term;
    return b;
}

double ActionEvaluator::coulomb_integral(const paths::PathView& path) const {
    const int M = grid_.n_steps, N = path.n_particles;
    const double dt = grid_.dt();
    double total = 0.0;
    for (int m = 0; m <= M; ++m) {
        double cell = 0.0;
        for (int i = 0; i < N; ++i)
            for (int j = i + 1; j < N; ++j) cell += 1.0 / std::max(dist(path.x(m, i), path.x(m, j)), 1e-300);
        total += ((m == 0 || m == M) ? 0.5 * dt : dt) * cell;
    }
    return total;
}

namespace {

ActionEvaluator make(const paths::PathEnsemble& ens, const ActionConfig& config) {
    if (ens.n_particles() != config.params.n_particles)
        throw InvalidParams("path particle count does not match params.n_particles");
    return ActionEvaluator(config, ens.grid());
}

}  // namespace

double action_naive(const paths::PathEnsemble& path, const ActionConfig& config, int p) {
    if (config.params.eps == 0.0) throw RouteForbidden("naive action requires eps > 0");
    return make(path, config).naive(path.view(p));
}

std::pair<double, double> action_split(const paths::PathEnsemble& path, const ActionConfig& config, int p) {
    ActionConfig c = config;
    c.route = Route::decomposed;
    return make(path, c).split(path.view(p));
}

double term_X(const paths::PathEnsemble& path, const ActionConfig& config, int p) {
    ActionConfig c = config;
    c.route = Route::decomposed;
    return make(path, c).x_term(path.view(p));
}

double term_Y(const paths::PathEnsemble& path, const ActionConfig& config, int p) {
    ActionConfig c = config;
    c.route = Route::decomposed;
    return make(path, c).y_term(path.view(p));
}

double term_Z(const paths::PathEnsemble& path, const ActionConfig& config, int p) {
    ActionConfig c = config;
    c.route = Route::decomposed;
    return make(path, c).z_term(path.view(p));
}

ActionBreakdown action_renormalized(const paths::PathEnsemble& path, const ActionConfig& config, int p) {
    ActionConfig c = config;
    if (c.params.eps == 0.0) {
        if (c.route == Route::naive) throw RouteForbidden("eps = 0 requires the decomposed route");
        c.tau = path.grid().full_window_tau();
    }
    return make(path, c).renormalized(path.view(p));
}

double ito_residual(const paths::PathEnsemble& path, const ActionConfig& config, int p) {
    ActionConfig c = config;
    c.route = Route::decomposed;
    return make(path, c).ito_residual(path.view(p));
}

}  // namespace nelson::action
