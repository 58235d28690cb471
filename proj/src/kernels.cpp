#include "nelson/kernels.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "nelson/errors.hpp"
#include "nelson/quadrature.hpp"

namespace nelson::kernels {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double inf = std::numeric_limits<double>::infinity();

inline double osc_sinc(double r, double s) {
    const double u = r * s;
    if (u < 1e-4) return r * (1.0 - u * u / 6.0);
    return std::sin(u) / s;
}

inline double osc_grad(double r, double s) {
    const double u = r * s;
    if (u < 0.1) {
        const double u2 = u * u;
        return r * r * r * (-1.0 / 3.0 + u2 * (1.0 / 30.0 + u2 * (-1.0 / 840.0 + u2 / 45360.0)));
    }
    return (u * std::cos(u) - std::sin(u)) / (s * s * s);
}

std::vector<double> range_breaks(double a, double b) {
    if (a > 0.0) return quad::geometric_breaks(a, b, 2.0 * a);
    const double first = std::min(0.5, 0.5 * b);
    return quad::geometric_breaks(0.0, b, first);
}

void check_finite(const KernelValue& v, const char* what) {
    if (!std::isfinite(v.value)) throw QuadratureFailure(std::string(what) + ": non-finite result");
}

}  // namespace

void ModelParams::validate() const {
    if (!(eps >= 0.0)) throw InvalidParams("eps must be >= 0");
    if (!(lambda >= 0.0)) throw InvalidParams("lambda must be >= 0");
    if (!(kappa > 0.0)) throw InvalidParams("kappa must be > 0");
    if (n_particles < 1) throw InvalidParams("n_particles must be >= 1");
    if (!(nu >= 0.0)) throw InvalidParams("nu must be >= 0");
    if (dispersion == Dispersion::massless && nu != 0.0)
        throw InvalidParams("massless dispersion forbids nu != 0");
}

double ModelParams::omega(double r) const {
    return dispersion == Dispersion::massless ? r : std::sqrt(r * r + nu * nu);
}

double ModelParams::norm_factor() const {
    return fourier_norm == FourierNorm::none ? 1.0 : 1.0 / (8.0 * pi * pi * pi);
}

double ModelParams::omega_min() const { return omega(lambda); }

double truncation_radius(double lower, Damping d, const QuadratureSpec& quad) {
    if (quad.r_max_policy == RMaxPolicy::max_literal) {
        constexpr double delta = 1e-6;
        return lower + std::max(40.0 / std::max(d.linear, delta), 8.0 / std::sqrt(std::max(d.gauss, delta * delta)));
    }
    double r = inf;
    if (d.linear > 0.0) r = std::min(r, 40.0 / d.linear);
    if (d.gauss > 0.0) r = std::min(r, 8.0 / std::sqrt(d.gauss));
    return lower + r;
}

KernelValue radial_transform(FunctionRef<double(double)> q, double lower, double s, Oscillator osc,
                             Damping damping, const QuadratureSpec& quad) {
    const double R = truncation_radius(lower, damping, quad);
    const double rel = quad.rel_tol;
    auto integrand = [&](double r) {
        return q(r) * (osc == Oscillator::sinc ? osc_sinc(r, s) : osc_grad(r, s));
    };
    KernelValue out;
    if (s <= 0.0) {
        if (!std::isfinite(R)) throw SingularPoint("undamped radial integral at the origin");
        auto res = quad::adaptive(integrand, range_breaks(lower, R), rel, 0.0, quad.max_intervals);
        if (!res.converged) throw QuadratureFailure("adaptive quadrature did not converge at s = 0");
        out = {res.value, res.error, R};
        check_finite(out, "radial_transform");
        return out;
    }

    const double period = pi / s;
    const double half = period * quad.oscillation_panel;
    const double offset = osc == Oscillator::sinc ? 0.0 : 0.5;
    const double n_half = (R - lower) / half;

    if (n_half <= 64.0) {
        std::vector<double> breaks = range_breaks(lower, R);
        for (double k = std::ceil(lower / period - offset); (k + offset) * period < R; k += 1.0) {
            const double z = (k + offset) * period;
            if (z > lower) breaks.push_back(z);
        }
        std::sort(breaks.begin(), breaks.end());
        // Short relative-only pass first; cancellation-dominated cases fall through quickly.
        const int budget = std::min<int>(quad.max_intervals, 16 * static_cast<int>(breaks.size()));
        auto res = quad::adaptive(integrand, breaks, rel, 0.0, budget);
        if (!res.converged) {
            // Cancellation-dominated: the result is only defined relative to the L1 norm.
            auto abs_f = [&](double r) { return std::fabs(integrand(r)); };
            const double l1 = quad::adaptive(abs_f, breaks, 1e-3, 0.0, quad.max_intervals).value;
            res = quad::adaptive(integrand, breaks, rel, 1e-13 * l1, quad.max_intervals);
        }
        if (!res.converged) throw QuadratureFailure("adaptive quadrature did not converge");
        out = {res.value, res.error, R};
        check_finite(out, "radial_transform");
        return out;
    }

    // Head up to the first panel boundary, then half-period panels with Euler acceleration.
    double k0 = std::ceil(lower / period - offset);
    double z0 = (k0 + offset) * period;
    if (z0 <= lower) z0 += period;
    quad::Result head{};
    if (z0 > lower) {
        head = quad::adaptive(integrand, range_breaks(lower, z0), rel, 0.0, quad.max_intervals);
        if (!head.converged) throw QuadratureFailure("head integral did not converge");
    }
    std::vector<double> sums;
    sums.reserve(256);
    double total = head.value;
    double err = head.error;
    double scale = std::fabs(head.value);
    double prev_est = 0.0, prev_diff = inf;
    const int depth = std::max(2, quad.euler_depth);
    double a = z0;
    for (int k = 0; k < quad.max_panels; ++k) {
        double b = a + half;
        bool last = false;
        if (b >= R) {
            b = R;
            last = true;
        }
        const double abs_tol = 1e-3 * rel * std::max(scale, 1e-300);
        auto p = quad::adaptive(integrand, a, b, rel, abs_tol, 200);
        if (!p.converged) throw QuadratureFailure("panel integral did not converge");
        total += p.value;
        err += p.error;
        scale = std::max(scale, std::fabs(p.value));
        if (last) {
            out = {total, err, R};
            check_finite(out, "radial_transform");
            return out;
        }
        sums.push_back(total);
        const int n = static_cast<int>(sums.size());
        if (n > depth) {
            const double est = quad::euler_average(sums.data() + n - depth - 1, depth + 1);
            const double diff = std::fabs(est - prev_est);
            const double tol = std::max(rel * std::fabs(est), 1e-14 * scale);
            if (n > depth + 2 && diff <= tol && prev_diff <= tol) {
                out = {est, err + diff, b};
                check_finite(out, "radial_transform");
                return out;
            }
            prev_est = est;
            prev_diff = diff;
        }
        a = b;
    }
    throw QuadratureFailure("panel budget exhausted");
}

namespace {

struct PhiAmp {
    const ModelParams& p;
    double kappa;
    double tscale;  // multiplies omega |t| in the exponent
    double t;
    double extra_power;  // multiplies by (-r^2)^extra_power when 1 (Laplacian)
    double operator()(double r) const {
        const double w = p.omega(r);
        const double k2 = kappa * kappa;
        double v = 4.0 * pi * r * p.norm_factor() * std::exp(-p.eps * r * r - tscale * w * t) / (2.0 * w) * k2 /
                   (k2 * w + 0.5 * r * r);
        if (extra_power > 0.0) v *= -r * r;
        return v;
    }
};

struct WAmp {
    const ModelParams& p;
    double t;
    double operator()(double r) const {
        const double w = p.omega(r);
        return 4.0 * pi * r * p.norm_factor() * std::exp(-p.eps * r * r - w * t) / (2.0 * w);
    }
};

void require_phi_domain(const ModelParams& p, double s, double t) {
    p.validate();
    if (p.eps == 0.0) {
        if (p.omega_min() <= 0.0) throw InvalidParams("lambda > 0 required for phi-kernels at eps = 0");
        if (s == 0.0 && t == 0.0) throw SingularPoint("phi_0 diverges at (0,0)");
    }
}

KernelValue phi_family(const ModelParams& p, double kappa, double s, double t, Oscillator osc, bool laplacian,
                       const QuadratureSpec& quad) {
    const double at = std::fabs(t);
    require_phi_domain(p, s, at);
    const double tscale = kappa * kappa;
    PhiAmp amp{p, kappa, tscale, at, laplacian ? 1.0 : 0.0};
    return radial_transform(amp, p.lambda, s, osc, Damping{p.eps, tscale * at}, quad);
}

}  // namespace

KernelValue eval_W(const ModelParams& params, double x_norm, double t, const QuadratureSpec& quad) {
    params.validate();
    const double at = std::fabs(t);
    if (params.eps == 0.0 && x_norm == 0.0 && at == 0.0) throw SingularPoint("W_0 diverges at (0,0)");
    WAmp amp{params, at};
    return radial_transform(amp, params.lambda, x_norm, Oscillator::sinc, Damping{params.eps, at}, quad);
}

KernelValue eval_phi(const ModelParams& params, double x_norm, double t, const QuadratureSpec& quad) {
    return phi_family(params, 1.0, x_norm, t, Oscillator::sinc, false, quad);
}

KernelValue eval_grad_phi_coeff(const ModelParams& params, double x_norm, double t, const QuadratureSpec& quad) {
    return phi_family(params, 1.0, x_norm, t, Oscillator::grad, false, quad);
}

KernelValue eval_laplacian_phi(const ModelParams& params, double x_norm, double t, const QuadratureSpec& quad) {
    return phi_family(params, 1.0, x_norm, t, Oscillator::sinc, true, quad);
}

namespace {

Vec3 grad_from_coeff(const ModelParams& params, double kappa, const Vec3& x, double t, const QuadratureSpec& quad) {
    const double s = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    require_phi_domain(params, s, std::fabs(t));
    if (s < quad.small_x_threshold) return {0.0, 0.0, 0.0};
    const double g = phi_family(params, kappa, s, t, Oscillator::grad, false, quad).value;
    return {x[0] * g, x[1] * g, x[2] * g};
}

}  // namespace

Vec3 eval_grad_phi(const ModelParams& params, const Vec3& x, double t, const QuadratureSpec& quad) {
    return grad_from_coeff(params, 1.0, x, t, quad);
}

KernelValue eval_phi_scaled(const ModelParams& params, double x_norm, double t, const QuadratureSpec& quad) {
    return phi_family(params, params.kappa, x_norm, t, Oscillator::sinc, false, quad);
}

KernelValue eval_grad_phi_scaled_coeff(const ModelParams& params, double x_norm, double t,
                                       const QuadratureSpec& quad) {
    return phi_family(params, params.kappa, x_norm, t, Oscillator::grad, false, quad);
}

Vec3 eval_grad_phi_scaled(const ModelParams& params, const Vec3& x, double t, const QuadratureSpec& quad) {
    return grad_from_coeff(params, params.kappa, x, t, quad);
}

namespace {

// int_lower^inf f(r) dr in the variable y = ln r, with uniform unit breaks in y.
template <class F>
quad::Result log_variable_integral(F&& f, double lower, double upper, double rel_tol) {
    auto g = [&](double y) {
        const double r = std::exp(y);
        return f(r) * r;
    };
    quad::Result total{};
    double y0;
    if (lower > 0.0) {
        y0 = std::log(lower);
    } else {
        const double r1 = std::min(1.0, upper);
        total = quad::adaptive(f, 0.0, r1, rel_tol, 0.0);
        y0 = std::log(r1);
    }
    const double y1 = std::log(upper);
    std::vector<double> breaks;
    for (double y = y0; y < y1; y += 1.0) breaks.push_back(y);
    breaks.push_back(y1);
    auto part = quad::adaptive(g, breaks, rel_tol, 0.0, 4000);
    total.value += part.value;
    total.error += part.error;
    total.converged = total.converged && part.converged;
    return total;
}

KernelValue energy_integral(const ModelParams& p, double kappa, double prefactor, const QuadratureSpec& quad) {
    p.validate();
    if (p.eps <= 0.0) throw SingularPoint("E_eps diverges at eps = 0");
    if (p.g == 0.0) return {0.0, 0.0, 0.0};
    const double k2 = kappa * kappa;
    // e^{-eps r^2} / omega * kappa^2 / (kappa^2 omega + r^2/2), times the r^2 of the spherical measure.
    auto f = [&](double r) {
        const double w = p.omega(r);
        return r * r * std::exp(-p.eps * r * r) / w * k2 / (k2 * w + 0.5 * r * r);
    };
    const double upper = p.lambda + 9.0 / std::sqrt(p.eps);
    const auto res = log_variable_integral(f, p.lambda, upper, std::min(quad.rel_tol, 1e-12));
    if (!res.converged) throw QuadratureFailure("energy integral did not converge");
    const double c = prefactor * p.g * p.g * p.n_particles * 4.0 * pi * p.norm_factor();
    return {-c * res.value, std::fabs(c) * res.error, upper};
}

}  // namespace

KernelValue eval_E(const ModelParams& params, const QuadratureSpec& quad) {
    return energy_integral(params, 1.0, 0.5, quad);
}

KernelValue eval_E_scaled(const ModelParams& params, const QuadratureSpec& quad) {
    // Written with 1/(2 omega) inside the integral; the factor 1/2 is carried by the prefactor.
    return energy_integral(params, params.kappa, 0.5, quad);
}

KernelValue eval_phi_limit(const ModelParams& params, double x_norm, const QuadratureSpec& quad) {
    params.validate();
    if (x_norm <= 0.0) throw SingularPoint("limit kernel diverges at the origin");
    auto q = [&](double r) {
        const double w = params.omega(r);
        return 4.0 * pi * r * params.norm_factor() / (2.0 * w * w);
    };
    return radial_transform(q, params.lambda, x_norm, Oscillator::sinc, Damping{}, quad);
}

KernelValue eval_rho_kernel(const RhoProfile& rho, const ModelParams& params, double x_norm, double s_offset,
                            const QuadratureSpec& quad) {
    params.validate();
    if (s_offset < 0.0) throw InvalidParams("s_offset must be >= 0");
    if (rho.amplitude == 0.0) return {0.0, 0.0, params.lambda};
    if (params.omega_min() <= 0.0 && s_offset == 0.0 && rho.width == 0.0 && params.eps == 0.0)
        throw InvalidParams("rho kernel needs damping");
    auto q = [&](double r) {
        const double w = params.omega(r);
        return 4.0 * pi * r * rho.amplitude * std::exp(-0.5 * (rho.width * rho.width + params.eps) * r * r - s_offset * w) /
               std::sqrt(w);
    };
    return radial_transform(q, params.lambda, x_norm, Oscillator::sinc,
                            Damping{0.5 * (rho.width * rho.width + params.eps), s_offset}, quad);
}

double coulomb_bound_constant(double lambda) {
    if (!(lambda > 0.0)) throw InvalidParams("coulomb bound needs lambda > 0");
    return 2.0 * pi * std::log1p(2.0 / lambda);
}

KernelValue eval_kind(KernelKind kind, const ModelParams& params, double x_norm, double t,
                      const QuadratureSpec& quad) {
    switch (kind) {
        case KernelKind::W: return eval_W(params, x_norm, t, quad);
        case KernelKind::phi: return eval_phi(params, x_norm, t, quad);
        case KernelKind::grad_coeff: return eval_grad_phi_coeff(params, x_norm, t, quad);
        case KernelKind::phi_scaled: return eval_phi_scaled(params, x_norm, t, quad);
        case KernelKind::grad_coeff_scaled: return eval_grad_phi_scaled_coeff(params, x_norm, t, quad);
    }
    throw InvalidParams("unknown kernel kind");
}

}  // namespace nelson::kernels
