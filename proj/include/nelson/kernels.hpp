#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <utility>

namespace nelson {

using Vec3 = std::array<double, 3>;

// Non-owning callable reference; keeps the quadrature engine out of headers.
template <class Sig>
class FunctionRef;

template <class R, class... Args>
class FunctionRef<R(Args...)> {
public:
    template <class F>
    FunctionRef(F& f) : obj_(static_cast<void*>(&f)), call_([](void* o, Args... a) -> R {
                            return (*static_cast<F*>(o))(std::forward<Args>(a)...);
                        }) {}
    R operator()(Args... a) const { return call_(obj_, std::forward<Args>(a)...); }

private:
    void* obj_;
    R (*call_)(void*, Args...);
};

}  // namespace nelson

namespace nelson::kernels {

enum class Dispersion { massless, massive };
enum class FourierNorm { none, inverse_cube_two_pi };

struct ModelParams {
    double eps = 0.1;
    double lambda = 1.0;
    double g = 1.0;
    int n_particles = 1;
    double nu = 0.0;
    double kappa = 1.0;
    Dispersion dispersion = Dispersion::massless;
    FourierNorm fourier_norm = FourierNorm::none;

    // Throws InvalidParams when an invariant is violated.
    void validate() const;
    double omega(double r) const;
    // 1 or (2*pi)^-3 depending on fourier_norm.
    double norm_factor() const;
    // Smallest value of omega on the integration domain |k| >= lambda.
    double omega_min() const;
};

enum class RMaxPolicy {
    min_active,   // lambda + min over active damping cutoffs (default)
    max_literal,  // lambda + max(40/max(|t|,d), 8/sqrt(max(eps,d^2))), d = 1e-6
};

struct QuadratureSpec {
    double rel_tol = 1e-9;
    RMaxPolicy r_max_policy = RMaxPolicy::min_active;
    double oscillation_panel = 1.0;  // panel length in units of pi/|x|
    double small_x_threshold = 1e-8;
    int max_panels = 200000;
    int euler_depth = 24;
    int max_intervals = 4000;
};

struct KernelValue {
    double value = 0.0;
    double est_error = 0.0;
    double truncation_radius = 0.0;
};

// Oscillatory factor of the radial integrand: sin(r s)/s, or r^3 J(r s) with
// J(u) = (u cos u - sin u)/u^3, which yields (1/s) d/ds of the sinc transform.
enum class Oscillator { sinc, grad };

// Exponential envelope of the amplitude, |q(r)| <~ poly(r) exp(-gauss r^2 - linear r).
struct Damping {
    double gauss = 0.0;
    double linear = 0.0;
};

// Computes int_lower^inf q(r) osc(r, s) dr. q already contains the 4 pi r A(r) factor.
KernelValue radial_transform(FunctionRef<double(double)> q, double lower, double s, Oscillator osc,
                             Damping damping, const QuadratureSpec& quad);

// Truncation radius of the radial integral under the given policy (infinity when undamped).
double truncation_radius(double lower, Damping damping, const QuadratureSpec& quad);

// Radial transform of a 3D kernel: K(x) = int_{|k|>=lambda} A(|k|) e^{-ik.x} dk.
KernelValue eval_W(const ModelParams& params, double x_norm, double t, const QuadratureSpec& quad = {});
KernelValue eval_phi(const ModelParams& params, double x_norm, double t, const QuadratureSpec& quad = {});
Vec3 eval_grad_phi(const ModelParams& params, const Vec3& x, double t, const QuadratureSpec& quad = {});
// Scalar G with grad phi(x,t) = x * G(|x|,t).
KernelValue eval_grad_phi_coeff(const ModelParams& params, double x_norm, double t,
                                const QuadratureSpec& quad = {});
// Second radial derivative coefficient: Laplacian of phi at (x,t).
KernelValue eval_laplacian_phi(const ModelParams& params, double x_norm, double t,
                               const QuadratureSpec& quad = {});
KernelValue eval_E(const ModelParams& params, const QuadratureSpec& quad = {});

// kappa-scaled variants: time enters as kappa^2 omega |t| and beta as kappa^2/(kappa^2 omega + r^2/2).
KernelValue eval_phi_scaled(const ModelParams& params, double x_norm, double t, const QuadratureSpec& quad = {});
Vec3 eval_grad_phi_scaled(const ModelParams& params, const Vec3& x, double t, const QuadratureSpec& quad = {});
KernelValue eval_grad_phi_scaled_coeff(const ModelParams& params, double x_norm, double t,
                                       const QuadratureSpec& quad = {});
KernelValue eval_E_scaled(const ModelParams& params, const QuadratureSpec& quad = {});

// kappa -> infinity limit of the scaled phi at t = 0: norm * int e^{-ik.x} / (2 omega^2) dk.
KernelValue eval_phi_limit(const ModelParams& params, double x_norm, const QuadratureSpec& quad = {});

// Gaussian radial charge profile rho_hat(k) = amplitude * exp(-width^2 |k|^2 / 2).
struct RhoProfile {
    double amplitude = 1.0;
    double width = 1.0;
};

// int rho_hat(k)/sqrt(omega) 1_{|k|>=lambda} e^{-s omega} e^{-eps|k|^2/2} e^{-ik.x} dk.
KernelValue eval_rho_kernel(const RhoProfile& rho, const ModelParams& params, double x_norm, double s_offset,
                            const QuadratureSpec& quad = {});

// Slope of phi_eps(0,0) against ln(1/eps) as eps -> 0 (massless dispersion).
inline constexpr double c_log = 2.0 * std::numbers::pi;
// Limit of phi_0(x,0,kappa) |x| e^{nu|x|} as kappa -> infinity.
inline constexpr double yukawa_constant = 1.0 / (8.0 * std::numbers::pi);

// Closed-form constant a with |phi_eps(x,0)| <= a/|x| (massless dispersion, lambda > 0).
double coulomb_bound_constant(double lambda);

// Which member of the kernel family; used by tabulation.
enum class KernelKind { W, phi, grad_coeff, phi_scaled, grad_coeff_scaled };

// Unified scalar evaluation of a kernel kind at (|x|, t).
KernelValue eval_kind(KernelKind kind, const ModelParams& params, double x_norm, double t,
                      const QuadratureSpec& quad = {});

}  // namespace nelson::kernels
