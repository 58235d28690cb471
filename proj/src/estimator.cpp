#include "nelson/estimator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "nelson/errors.hpp"
#include "nelson/parallel.hpp"
#include "nelson/quadrature.hpp"

namespace nelson::estimator {

namespace {

constexpr double pi = std::numbers::pi;

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double sq_dist(const double* a, const double* b) {
    const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
}

// Effective config for a weighting: eps = 0 runs the decomposed route on the full window,
// unrenormalized weights need the naive double integral.
action::ActionConfig effective_config(action::ActionConfig config, const paths::TimeGrid& grid, Weighting w) {
    if (w == Weighting::unrenormalized) {
        if (config.params.eps == 0.0) throw RouteForbidden("unrenormalized weights need eps > 0");
        config.route = action::Route::naive;
    } else if (config.params.eps == 0.0) {
        config.route = action::Route::decomposed;
        config.tau = grid.full_window_tau();
    }
    return config;
}

double action_exponent(const action::ActionEvaluator& ev, const paths::PathView& view, Weighting w) {
    const auto& p = ev.config().params;
    if (p.g == 0.0) return 0.0;
    const double s = w == Weighting::unrenormalized ? ev.naive(view) : ev.renormalized(view).s_ren;
    return 0.5 * p.g * p.g * s;
}

void require_dims(const TestFunction& f, const TestFunction& h, int n_particles) {
    if (f.kind() != TestFunction::Kind::gaussian_packet)
        throw ProposalMismatch("the start-point proposal needs a Gaussian packet f");
    if (f.dim() != 3 * n_particles || h.dim() != 3 * n_particles)
        throw InvalidParams("test function dimension must be 3N");
}

// Draws the start point from N(c, 2 sigma² I) and then the path, both from one stream.
void draw_path(const TestFunction& f, const paths::TimeGrid& grid, Philox& gen, std::vector<double>& start,
               std::vector<double>& buffer) {
    const double sd = std::sqrt(2.0) * f.width();
    for (int d = 0; d < f.dim(); ++d) start[d] = f.center()[d] + sd * gen.normal();
    paths::sample_path(grid, start, gen, buffer);
}

struct SignedLog {
    double log_abs;
    double sign;
};

SignedLog eval_test(const TestFunction& h, std::span<const double> x) {
    if (h.kind() == TestFunction::Kind::gaussian_packet) return {h.log_value(x), 1.0};
    const double v = h(x);
    if (v == 0.0) return {-std::numeric_limits<double>::infinity(), 0.0};
    return {std::log(std::fabs(v)), v > 0.0 ? 1.0 : -1.0};
}

[[noreturn]] void non_finite(int p, const RngSpec& rng) {
    throw NonFiniteWeight("non-finite log weight on path " + std::to_string(p) + " (seed " +
                          std::to_string(rng.seed) + ", stream " + std::to_string(rng.stream_id + p) + ")");
}

}  // namespace

TestFunction TestFunction::gaussian(std::vector<double> center, double width) {
    if (center.empty() || center.size() % 3 != 0) throw InvalidParams("center must have 3N coordinates");
    if (!(width > 0.0)) throw InvalidParams("packet width must be > 0");
    TestFunction t;
    t.kind_ = Kind::gaussian_packet;
    t.dim_ = static_cast<int>(center.size());
    t.center_ = std::move(center);
    t.width_ = width;
    return t;
}

TestFunction TestFunction::callable(int dim, std::function<double(std::span<const double>)> fn) {
    if (dim <= 0 || dim % 3 != 0) throw InvalidParams("dimension must be 3N");
    TestFunction t;
    t.kind_ = Kind::callable;
    t.dim_ = dim;
    t.fn_ = std::move(fn);
    return t;
}

double TestFunction::log_value(std::span<const double> x) const {
    if (kind_ != Kind::gaussian_packet) return std::log(std::fabs(fn_(x)));
    double r2 = 0.0;
    for (int d = 0; d < dim_; ++d) r2 += (x[d] - center_[d]) * (x[d] - center_[d]);
    return -0.25 * dim_ * std::log(2.0 * pi * width_ * width_) - r2 / (4.0 * width_ * width_);
}

double TestFunction::operator()(std::span<const double> x) const {
    return kind_ == Kind::gaussian_packet ? std::exp(log_value(x)) : fn_(x);
}

double TestFunction::l2_norm() const {
    if (kind_ != Kind::gaussian_packet) return std::numeric_limits<double>::quiet_NaN();
    // |f|² is the N(c, sigma² I) density.
    return 1.0;
}

double TestFunction::integral() const {
    if (kind_ != Kind::gaussian_packet) return std::numeric_limits<double>::quiet_NaN();
    const double s2 = width_ * width_;
    return std::exp(-0.25 * dim_ * std::log(2.0 * pi * s2) + 0.5 * dim_ * std::log(4.0 * pi * s2));
}

Potential Potential::bounded_well(double depth, double width) {
    if (!(width > 0.0)) throw InvalidParams("well width must be > 0");
    Potential v;
    v.kind = Kind::bounded_well;
    v.depth = depth;
    v.width = width;
    return v;
}

Potential Potential::harmonic(double delta) {
    if (!(delta >= 0.0)) throw InvalidParams("harmonic strength must be >= 0");
    Potential v;
    v.kind = Kind::harmonic;
    v.delta = delta;
    return v;
}

Potential Potential::yukawa_pairwise(double g, double nu) {
    if (!(nu >= 0.0)) throw InvalidParams("nu must be >= 0");
    Potential v;
    v.kind = Kind::yukawa_pairwise;
    v.g = g;
    v.nu = nu;
    return v;
}

double Potential::operator()(std::span<const double> x) const {
    const int n = static_cast<int>(x.size() / 3);
    switch (kind) {
        case Kind::zero: return 0.0;
        case Kind::bounded_well: {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                const double* p = x.data() + 3 * j;
                acc += std::exp(-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (2.0 * width * width));
            }
            return -depth * acc;
        }
        case Kind::harmonic: {
            double acc = 0.0;
            for (double c : x) acc += c * c;
            return delta * acc;
        }
        case Kind::yukawa_pairwise: {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    const double r = std::max(std::sqrt(sq_dist(x.data() + 3 * i, x.data() + 3 * j)), 1e-10);
                    acc += std::exp(-nu * r) / r;
                }
            return -2.0 * g * g * kernels::yukawa_constant * acc;
        }
        case Kind::pairwise_radial: {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    acc += radial(std::max(std::sqrt(sq_dist(x.data() + 3 * i, x.data() + 3 * j)), 1e-10));
            return 2.0 * acc;
        }
    }
    return 0.0;
}

double Potential::path_integral(const paths::PathView& path, double dt) const {
    if (kind == Kind::zero) return 0.0;
    const std::size_t dim = static_cast<std::size_t>(path.n_particles) * 3;
    const int last = path.n_times - 1;
    double acc = 0.0;
    for (int m = 0; m <= last; ++m) {
        const double v = (*this)(std::span<const double>(path.x(m, 0), dim));
        acc += (m == 0 || m == last) ? 0.5 * v : v;
    }
    return acc * dt;
}

void RunningStats::push(double x) {
    count += 1.0;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
}

void RunningStats::merge(const RunningStats& o) {
    if (o.count == 0.0) return;
    if (count == 0.0) {
        *this = o;
        return;
    }
    const double n = count + o.count;
    const double d = o.mean - mean;
    mean += d * o.count / n;
    m2 += o.m2 + d * d * count * o.count / n;
    count = n;
}

McEstimate batch_means(std::span<const double> log_w, std::span<const double> sign, int max_batches) {
    const int n = static_cast<int>(log_w.size());
    if (static_cast<int>(sign.size()) != n) throw InvalidParams("weight and sign arrays differ in length");
    const int nb = std::min(max_batches, n);
    if (nb < 30) throw InvalidParams("batch means needs at least 30 samples and 30 batches");
    double shift = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < n; ++p)
        if (sign[p] != 0.0) shift = std::max(shift, log_w[p]);
    if (!std::isfinite(shift)) shift = 0.0;

    RunningStats batches, total;
    for (int b = 0; b < nb; ++b) {
        const int lo = static_cast<int>(static_cast<long long>(b) * n / nb);
        const int hi = static_cast<int>(static_cast<long long>(b + 1) * n / nb);
        RunningStats s;
        for (int p = lo; p < hi; ++p) s.push(sign[p] == 0.0 ? 0.0 : sign[p] * std::exp(log_w[p] - shift));
        batches.push(s.mean);
        total.merge(s);
    }
    McEstimate e;
    e.n_samples = n;
    e.n_batches = nb;
    const double m = total.mean;
    const double se = std::sqrt(batches.variance() / nb);
    e.log_mean = std::log(std::fabs(m)) + shift;
    e.rel_error = m == 0.0 ? std::numeric_limits<double>::infinity() : se / std::fabs(m);
    e.mean = std::copysign(std::exp(e.log_mean), m);
    e.std_error = se * std::exp(shift);
    return e;
}

McEstimate semigroup_element(const TestFunction& f, const TestFunction& h, const Potential& potential,
                             const action::ActionConfig& config, const paths::TimeGrid& grid, int n_paths,
                             const RngSpec& rng, const EstimatorOptions& options) {
    const double t0 = now_seconds();
    const int n = config.params.n_particles;
    require_dims(f, h, n);
    if (n_paths < 30) throw InvalidParams("need at least 30 paths");
    const action::ActionConfig cfg = effective_config(config, grid, options.weighting);
    const action::ActionEvaluator ev(cfg, grid);
    const int dim = 3 * n;
    const std::size_t stride = static_cast<std::size_t>(grid.n_steps + 1) * dim;
    const double log_int_f = std::log(f.integral());

    std::vector<double> log_w(n_paths), sign(n_paths);
    parallel_for(static_cast<std::size_t>(n_paths), options.threads, [&](std::size_t p) {
        Philox gen(rng.seed, rng.stream_id + p);
        std::vector<double> start(dim), buf(stride);
        draw_path(f, grid, gen, start, buf);
        const paths::PathView view{buf.data(), n, grid.n_steps + 1};
        const SignedLog hv = eval_test(h, std::span<const double>(view.x(grid.n_steps, 0), dim));
        double lw = log_int_f + hv.log_abs;
        if (hv.sign != 0.0) lw += -potential.path_integral(view, grid.dt()) + action_exponent(ev, view, options.weighting);
        if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) non_finite(static_cast<int>(p), rng);
        log_w[p] = lw;
        sign[p] = hv.sign;
    });
    McEstimate e = batch_means(log_w, sign, options.max_batches);
    e.rng = rng;
    e.wall_time = now_seconds() - t0;
    return e;
}

double free_overlap(const TestFunction& f, const TestFunction& h, double t_horizon) {
    if (f.kind() != TestFunction::Kind::gaussian_packet || h.kind() != TestFunction::Kind::gaussian_packet)
        throw ProposalMismatch("free overlap needs two Gaussian packets");
    if (f.dim() != h.dim()) throw InvalidParams("test function dimensions differ");
    if (!(t_horizon > 0.0)) throw InvalidGrid("t_horizon must be > 0");
    // Per coordinate: h smoothed by the heat kernel of variance 2T, then integrated against f.
    const double b = 2.0 * f.width() * f.width();
    const double c = 2.0 * h.width() * h.width() + 2.0 * t_horizon;
    const double amp = std::pow(2.0 * pi * f.width() * f.width(), -0.25) * std::pow(2.0 * pi * h.width() * h.width(), -0.25) *
                       std::sqrt(2.0 * h.width() * h.width() / c) * std::sqrt(2.0 * pi * b * c / (b + c));
    double log_total = 0.0;
    for (int k = 0; k < f.dim(); ++k) {
        const double d = f.center()[k] - h.center()[k];
        log_total += std::log(amp) - d * d / (2.0 * (b + c));
    }
    return std::exp(log_total);
}

double harmonic_ground_energy(double delta) { return 1.5 * std::sqrt(2.0 * delta); }

std::vector<EnergyProxy> ground_energy_proxy(const TestFunction& f, const Potential& potential,
                                             const action::ActionConfig& config,
                                             const std::vector<paths::TimeGrid>& grids, int n_paths,
                                             const RngSpec& rng, const EstimatorOptions& options) {
    if (f.kind() != TestFunction::Kind::gaussian_packet) throw ProposalMismatch("proxy needs a Gaussian packet");
    std::vector<EnergyProxy> out;
    for (const auto& grid : grids) {
        action::ActionConfig c = config;
        c.tau = std::min(c.tau, grid.full_window_tau());
        const McEstimate e = semigroup_element(f, f, potential, c, grid, n_paths, rng, options);
        if (!(e.mean > 0.0)) throw NonPositiveEstimate("semigroup estimate is not positive");
        const double two_t = 2.0 * grid.t_horizon;
        out.push_back({grid.t_horizon, -e.log_mean / two_t, e.rel_error / two_t, e});
    }
    return out;
}

XiConstants xi_constants(const XiSpec& spec, const kernels::ModelParams& params, double t_horizon,
                         const kernels::QuadratureSpec& quad) {
    params.validate();
    for (const auto* rho : {&spec.rho1, &spec.rho2}) {
        if (!std::isfinite(rho->amplitude) || !std::isfinite(rho->width))
            throw ProfileNotAdmissible("profile parameters must be finite");
        // A Gaussian profile has finite H_{-1/2} norm 2 pi a² / w² only for w > 0.
        if (rho->amplitude != 0.0 && !(rho->width > 0.0))
            throw ProfileNotAdmissible("profile width must be > 0");
    }
    auto radial = [&](double a1, double w1, double a2, double w2, double damp) {
        if (a1 == 0.0 || a2 == 0.0) return 0.0;
        const double w2sum = 0.5 * (w1 * w1 + w2 * w2);
        auto integrand = [&](double r) {
            const double om = params.omega(r);
            if (om <= 0.0) return 0.0;
            return 4.0 * pi * r * r * a1 * a2 * std::exp(-w2sum * r * r - damp * om) / om;
        };
        const double upper = std::sqrt(60.0 / w2sum);
        const auto res = quad::adaptive(integrand, quad::geometric_breaks(0.0, upper, 1e-3 * upper), quad.rel_tol, 0.0);
        if (!res.converged) throw QuadratureFailure("xi norm integral did not converge");
        return res.value;
    };
    XiConstants c;
    c.norm1 = radial(spec.rho1.amplitude, spec.rho1.width, spec.rho1.amplitude, spec.rho1.width, 0.0);
    c.norm2 = radial(spec.rho2.amplitude, spec.rho2.width, spec.rho2.amplitude, spec.rho2.width, 0.0);
    c.cross = radial(spec.rho1.amplitude, spec.rho1.width, spec.rho2.amplitude, spec.rho2.width, 2.0 * t_horizon);
    return c;
}

double compute_xi(const paths::PathView& path, const XiSpec& spec, const kernels::ModelParams& params,
                  const paths::TimeGrid& grid, const kernels::QuadratureSpec& quad) {
    if (!(params.lambda > 0.0)) throw InvalidParams("xi needs lambda > 0");
    if (spec.alpha == 0.0 && spec.beta == 0.0) return 0.0;
    const XiConstants c = xi_constants(spec, params, grid.t_horizon, quad);
    const double a = spec.alpha, b = spec.beta;
    double xi = a * a * c.norm1 + b * b * c.norm2 + 2.0 * a * b * c.cross;
    if (params.g == 0.0) return xi;
    const int M = grid.n_steps;
    const double T = grid.t_horizon, dt = grid.dt();
    double path1 = 0.0, path2 = 0.0;
    for (int m = 0; m <= M; ++m) {
        const double s = grid.time(m);
        const double w = (m == 0 || m == M) ? 0.5 * dt : dt;
        for (int j = 0; j < path.n_particles; ++j) {
            const double* x = path.x(m, j);
            const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
            if (a != 0.0 && spec.rho1.amplitude != 0.0)
                path1 += w * kernels::eval_rho_kernel(spec.rho1, params, r, std::fabs(s - T), quad).value;
            if (b != 0.0 && spec.rho2.amplitude != 0.0)
                path2 += w * kernels::eval_rho_kernel(spec.rho2, params, r, std::fabs(s + T), quad).value;
        }
    }
    xi += 2.0 * a * params.g * path1 + 2.0 * b * params.g * path2;
    return xi;
}

std::vector<WeakCouplingRow> weak_coupling_compare(const TestFunction& f, const TestFunction& h,
                                                   const Potential& potential, const kernels::ModelParams& base,
                                                   const std::vector<double>& kappas, const paths::TimeGrid& grid,
                                                   int n_paths, const RngSpec& rng,
                                                   const EstimatorOptions& options) {
    kernels::ModelParams params = base;
    params.eps = 0.0;
    params.dispersion = kernels::Dispersion::massive;
    if (!(params.nu > 0.0)) throw InvalidParams("weak coupling needs nu > 0");
    const int n = params.n_particles;
    require_dims(f, h, n);
    if (n_paths < 30) throw InvalidParams("need at least 30 paths");
    const int dim = 3 * n;
    const std::size_t stride = static_cast<std::size_t>(grid.n_steps + 1) * dim;
    const double log_int_f = std::log(f.integral());
    const Potential yukawa = Potential::yukawa_pairwise(params.g, params.nu);

    // Reference weights and the kappa-independent parts of the scaled weights.
    std::vector<double> base_lw(n_paths), ref_lw(n_paths), sign(n_paths);
    std::vector<double> all_paths(static_cast<std::size_t>(n_paths) * stride);
    parallel_for(static_cast<std::size_t>(n_paths), options.threads, [&](std::size_t p) {
        Philox gen(rng.seed, rng.stream_id + p);
        std::vector<double> start(dim), buf(stride);
        draw_path(f, grid, gen, start, buf);
        std::copy(buf.begin(), buf.end(), all_paths.begin() + p * stride);
        const paths::PathView view{buf.data(), n, grid.n_steps + 1};
        const SignedLog hv = eval_test(h, std::span<const double>(view.x(grid.n_steps, 0), dim));
        const double lw = log_int_f + hv.log_abs - potential.path_integral(view, grid.dt());
        base_lw[p] = lw;
        ref_lw[p] = lw - yukawa.path_integral(view, grid.dt());
        sign[p] = hv.sign;
        if (hv.sign != 0.0 && (std::isnan(ref_lw[p]) || ref_lw[p] == std::numeric_limits<double>::infinity()))
            non_finite(static_cast<int>(p), rng);
    });
    McEstimate reference = batch_means(ref_lw, sign, options.max_batches);
    reference.rng = rng;

    std::vector<WeakCouplingRow> rows;
    for (double kappa : kappas) {
        const double t0 = now_seconds();
        kernels::ModelParams pk = params;
        pk.kappa = kappa;
        action::ActionConfig cfg;
        cfg.params = pk;
        cfg.scaled = true;
        cfg.route = action::Route::decomposed;
        cfg.tau = grid.full_window_tau();
        const action::ActionEvaluator ev(cfg, grid);
        std::vector<double> lw(n_paths), diff_lw(n_paths), diff_sign(n_paths);
        parallel_for(static_cast<std::size_t>(n_paths), options.threads, [&](std::size_t p) {
            const paths::PathView view{all_paths.data() + p * stride, n, grid.n_steps + 1};
            double l = base_lw[p];
            if (sign[p] != 0.0) l += action_exponent(ev, view, Weighting::renormalized);
            if (std::isnan(l) || l == std::numeric_limits<double>::infinity()) non_finite(static_cast<int>(p), rng);
            lw[p] = l;
            // sign * (e^l - e^ref) in log form.
            const double hi = std::max(l, ref_lw[p]);
            const double d = std::exp(l - hi) - std::exp(ref_lw[p] - hi);
            diff_lw[p] = d == 0.0 ? 0.0 : hi + std::log(std::fabs(d));
            diff_sign[p] = d == 0.0 ? 0.0 : sign[p] * (d > 0.0 ? 1.0 : -1.0);
        });
        McEstimate scaled = batch_means(lw, sign, options.max_batches);
        scaled.rng = rng;
        scaled.wall_time = now_seconds() - t0;
        const McEstimate gap = batch_means(diff_lw, diff_sign, options.max_batches);
        rows.push_back({kappa, scaled, reference, gap.mean, gap.std_error});
    }
    return rows;
}

}  // namespace nelson::estimator
