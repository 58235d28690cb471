#include "nelson/katoclass.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nelson/errors.hpp"
#include "nelson/parallel.hpp"
#include "nelson/quadrature.hpp"

namespace nelson::kato {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double inf = std::numeric_limits<double>::infinity();

// Surface measure of the sphere of radius rho times the Kato kernel g(rho).
double weighted_measure(int dim, double rho) {
    switch (dim) {
        case 1: return 2.0 * rho;
        case 2: return 2.0 * pi * rho * std::log(1.0 / rho);
        default: return 4.0 * pi * rho;
    }
}

// ∫_0^r weighted_measure(rho) |V(rho)| drho over decade panels toward 0, with a geometric
// tail once successive panel ratios settle. Returns inf when the ratios settle at 1.
double local_integral(const RadialPotentialSpec& spec, double r, const kernels::QuadratureSpec& quad) {
    auto f = [&](double rho) { return weighted_measure(spec.dim, rho) * std::fabs(spec(rho)); };
    double sum = 0.0, prev = 0.0, q_prev = -1.0;
    double hi = r;
    for (int k = 0; k < 300; ++k) {
        const double lo = hi / 10.0;
        auto res = quad::adaptive(f, {lo, hi}, quad.rel_tol, 0.0, quad.max_intervals);
        if (!res.converged) throw QuadratureFailure("kato criterion panel did not converge");
        const double p = res.value;
        sum += p;
        hi = lo;
        if (p == 0.0 || p <= 1e-15 * sum) return sum;
        if (k > 0) {
            const double q = p / prev;
            if (k >= 3 && std::fabs(q - q_prev) < 1e-6 * std::max(q, 1.0)) {
                if (q >= 1.0 - 1e-9) return inf;
                return sum + p * q / (1.0 - q);
            }
            q_prev = q;
        }
        prev = p;
    }
    return inf;
}

std::vector<std::vector<double>> start_points(int dim, int n_starts, double box) {
    std::vector<std::vector<double>> out{std::vector<double>(dim, 0.0)};
    if (n_starts <= 1) return out;
    const int k = std::max(1, static_cast<int>(std::lround(std::pow(n_starts, 1.0 / dim))));
    int total = 1;
    for (int c = 0; c < dim; ++c) total *= k;
    for (int idx = 0; idx < total; ++idx) {
        std::vector<double> x(dim);
        int rem = idx;
        for (int c = 0; c < dim; ++c) {
            x[c] = -box + 2.0 * box * ((rem % k) + 0.5) / k;
            rem /= k;
        }
        out.push_back(std::move(x));
    }
    return out;
}

// Trapezoid integral of V along one Brownian path; partial[n] holds the integral up to step n.
void path_partials(const RadialPotentialSpec& spec, std::span<const double> start, int n_steps, double dt,
                   double r_clip, bool absolute, Philox& gen, std::vector<double>& partial) {
    const int d = static_cast<int>(start.size());
    std::vector<double> w(start.begin(), start.end());
    const double sd = std::sqrt(dt);
    auto value = [&] {
        double r2 = 0.0;
        for (double c : w) r2 += c * c;
        const double v = spec(std::max(std::sqrt(r2), r_clip));
        return absolute ? std::fabs(v) : v;
    };
    partial.assign(n_steps + 1, 0.0);
    double v_prev = value();
    double running = 0.0;
    for (int n = 1; n <= n_steps; ++n) {
        for (int c = 0; c < d; ++c) w[c] += sd * gen.normal();
        const double v = value();
        running += 0.5 * (v_prev + v);
        partial[n] = running * dt;
        v_prev = v;
    }
}

}  // namespace

RadialPotentialSpec RadialPotentialSpec::power(double exponent, int dim, double coupling) {
    RadialPotentialSpec s;
    s.form = Form::power;
    s.exponent = exponent;
    s.coupling = coupling;
    s.dim = dim;
    s.validate();
    return s;
}

RadialPotentialSpec RadialPotentialSpec::bounded(std::function<double(double)> profile, double bound, int dim) {
    RadialPotentialSpec s;
    s.form = Form::bounded;
    s.profile = std::move(profile);
    s.bound = bound;
    s.dim = dim;
    s.validate();
    return s;
}

void RadialPotentialSpec::validate() const {
    if (dim < 1 || dim > 3) throw InvalidParams("potential dimension must be 1, 2 or 3");
    if (form == Form::power) {
        if (!(exponent >= 0.0) || !std::isfinite(exponent)) throw InvalidParams("exponent must be finite and >= 0");
        if (!std::isfinite(coupling)) throw InvalidParams("coupling must be finite");
    } else {
        if (!profile) throw InvalidParams("bounded potential needs a profile");
        if (!(bound >= 0.0) || !std::isfinite(bound)) throw InvalidParams("bound must be finite and >= 0");
    }
}

double RadialPotentialSpec::operator()(double r) const {
    if (form == Form::bounded) return profile(r);
    return exponent == 0.0 ? coupling : coupling * std::pow(r, -exponent);
}

std::string RadialPotentialSpec::describe() const {
    std::ostringstream os;
    if (form == Form::power)
        os << coupling << "*|x|^-" << exponent << " in d=" << dim;
    else
        os << "bounded radial profile (|V| <= " << bound << ") in d=" << dim;
    return os.str();
}

KatoVerdict kato_criterion(const RadialPotentialSpec& spec, const kernels::QuadratureSpec& quad) {
    spec.validate();
    KatoVerdict v;
    v.radii = spec.dim == 2 ? std::vector<double>{0.5, 1e-1, 1e-2, 1e-3, 1e-4}
                            : std::vector<double>{1.0, 1e-1, 1e-2, 1e-3, 1e-4};
    for (double r : v.radii) v.diagnostic.push_back(local_integral(spec, r, quad));

    const std::size_t n = v.radii.size();
    for (double d : v.diagnostic)
        if (!std::isfinite(d)) {
            v.reason = "local integral diverges at the origin";
            return v;
        }
    if (v.diagnostic[n - 1] == 0.0) {
        v.pass = true;
        v.reason = "potential vanishes near the origin";
        return v;
    }
    for (std::size_t k = 1; k < n; ++k)
        if (!(v.diagnostic[k] < v.diagnostic[k - 1])) {
            v.reason = "diagnostic is not decreasing as r -> 0";
            return v;
        }
    v.log_slope = std::log(v.diagnostic[n - 1] / v.diagnostic[n - 2]) / std::log(v.radii[n - 1] / v.radii[n - 2]);
    if (!(v.log_slope > 1e-3)) {
        v.reason = "diagnostic does not vanish like a positive power of r";
        return v;
    }
    v.pass = true;
    v.reason = "diagnostic decreases to 0";
    return v;
}

std::vector<KatoCurvePoint> kato_mc(const RadialPotentialSpec& spec, const std::vector<double>& t_list, int n_paths,
                                    int n_starts, const RngSpec& rng, const MonteCarloOptions& options) {
    spec.validate();
    if (t_list.empty()) return {};
    if (n_paths < 2) throw InvalidParams("kato_mc needs at least 2 paths per start");
    if (options.n_steps < 1) throw InvalidGrid("n_steps must be >= 1");
    const double t_max = *std::max_element(t_list.begin(), t_list.end());
    if (!(t_max > 0.0)) throw InvalidGrid("times must be > 0");
    const double dt = t_max / options.n_steps;
    std::vector<int> idx;
    for (double t : t_list) {
        if (!(t > 0.0)) throw InvalidGrid("times must be > 0");
        idx.push_back(std::max(1, static_cast<int>(std::lround(t / dt))));
    }
    const double r_clip = spec.singular() ? options.clip * std::sqrt(dt) : 0.0;
    const auto starts = start_points(spec.dim, n_starts, options.start_box);
    const std::size_t ns = starts.size(), nt = t_list.size();

    std::vector<double> samples(ns * n_paths * nt);
    parallel_for(ns * n_paths, options.threads, [&](std::size_t job) {
        const std::size_t k = job / n_paths, p = job % n_paths;
        Philox gen(rng.seed, rng.stream_id + job);
        std::vector<double> partial;
        path_partials(spec, starts[k], options.n_steps, dt, r_clip, true, gen, partial);
        for (std::size_t j = 0; j < nt; ++j) samples[(k * n_paths + p) * nt + j] = partial[idx[j]];
    });

    std::vector<KatoCurvePoint> out;
    for (std::size_t j = 0; j < nt; ++j) {
        KatoCurvePoint pt{idx[j] * dt, -inf, 0.0, {}};
        for (std::size_t k = 0; k < ns; ++k) {
            estimator::RunningStats st;
            for (int p = 0; p < n_paths; ++p) st.push(samples[(k * n_paths + p) * nt + j]);
            if (st.mean > pt.value) {
                pt.value = st.mean;
                pt.std_error = std::sqrt(st.variance() / st.count);
                pt.argmax_start = starts[k];
            }
        }
        out.push_back(std::move(pt));
    }
    return out;
}

std::vector<ExpBoundRow> exp_bound_mc(const RadialPotentialSpec& spec, const std::vector<double>& beta_list,
                                      double tau, int n_paths, const RngSpec& rng,
                                      const std::vector<std::vector<double>>& starts_in,
                                      const MonteCarloOptions& options) {
    const KatoVerdict verdict = kato_criterion(spec);
    if (!verdict.pass) throw PreflightFailed("potential fails the Kato criterion: " + verdict.reason);
    if (!(tau > 0.0)) throw InvalidGrid("tau must be > 0");
    if (n_paths < 2) throw InvalidParams("exp_bound_mc needs at least 2 paths per start");
    if (options.n_steps < 1) throw InvalidGrid("n_steps must be >= 1");
    std::vector<std::vector<double>> starts = starts_in;
    if (starts.empty()) starts.push_back(std::vector<double>(spec.dim, 0.0));
    for (const auto& s : starts)
        if (static_cast<int>(s.size()) != spec.dim) throw InvalidParams("start dimension does not match potential");

    const double dt = tau / options.n_steps;
    const double r_clip = spec.singular() ? options.clip * std::sqrt(dt) : 0.0;
    const std::size_t ns = starts.size();
    std::vector<double> integrals(ns * n_paths);
    parallel_for(ns * n_paths, options.threads, [&](std::size_t job) {
        Philox gen(rng.seed, rng.stream_id + job);
        std::vector<double> partial;
        path_partials(spec, starts[job / n_paths], options.n_steps, dt, r_clip, false, gen, partial);
        integrals[job] = partial.back();
    });

    std::vector<ExpBoundRow> out;
    for (double beta : beta_list) {
        ExpBoundRow row{beta, tau, -inf, 0.0, {}, {}};
        for (std::size_t k = 0; k < ns; ++k) {
            estimator::RunningStats st;
            for (int p = 0; p < n_paths; ++p) st.push(beta == 0.0 ? 1.0 : std::exp(beta * integrals[k * n_paths + p]));
            row.per_start.push_back(st.mean);
            if (st.mean > row.value) {
                row.value = st.mean;
                row.std_error = std::sqrt(st.variance() / st.count);
                row.argmax_start = starts[k];
            }
        }
        out.push_back(std::move(row));
    }
    return out;
}

AffineFit affine_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidParams("affine fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw InvalidParams("affine fit needs distinct abscissae");
    AffineFit f{0.0, sxy / sxx, 0.0};
    f.intercept = my - f.slope * mx;
    double max_res = 0.0, max_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        max_res = std::max(max_res, std::fabs(y[i] - (f.intercept + f.slope * x[i])));
        max_y = std::max(max_y, std::fabs(y[i]));
    }
    f.residual = max_y > 0.0 ? max_res / max_y : 0.0;
    return f;
}

estimator::Potential lift_pairwise(const RadialPotentialSpec& spec, int n_particles) {
    spec.validate();
    if (spec.dim != 3) throw InvalidParams("pairwise lift needs a three-dimensional potential");
    if (n_particles < 1) throw InvalidParams("n_particles must be >= 1");
    const KatoVerdict verdict = kato_criterion(spec);
    if (!verdict.pass) throw PreflightFailed("potential fails the Kato criterion: " + verdict.reason);
    estimator::Potential pot;
    pot.origin = "pairwise lift of " + spec.describe();
    if (n_particles < 2) return pot;
    pot.kind = estimator::Potential::Kind::pairwise_radial;
    pot.radial = [spec](double r) { return spec(r); };
    pot.radial_bounded = spec.form == RadialPotentialSpec::Form::bounded;
    return pot;
}

}  // namespace nelson::kato
