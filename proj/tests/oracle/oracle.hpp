#pragma once

#include <vector>

#include "nelson/kernels.hpp"

// Reference values computed independently of the radial fast path. Test-only.
namespace nelson::oracle {

enum class Which { W, phi, grad_phi, rho };

struct OracleResult {
    Vec3 value{};        // scalar kernels use value[0]; grad_phi is the full vector
    double est_error = 0.0;
    long evals = 0;
};

/// Direct k-space integral in spherical coordinates (polar axis along x): an adaptive
/// Gauss-Kronrod rule in |k| over panels, and a second one in cos(theta) for the
/// angular factor. For rho, `t` is the offset s and `rho` sets the profile.
/// Requires eps > 0 (rho: eps + width^2 > 0). Throws BudgetExceeded after max_evals
/// integrand evaluations.
OracleResult oracle_kernel_3d(Which which, const kernels::ModelParams& params, const Vec3& x, double t,
                              long max_evals = 200'000'000, const kernels::RhoProfile& rho = {});

// W_0 for the massless dispersion: (2 pi / s) Im[exp(-lambda (t - i s)) / (t - i s)].
double w0_closed_form(double lambda, double x_norm, double t);
// phi_0(0, t) for the massless dispersion: 4 pi e^{2t} E1((2 + lambda) t), t > 0.
double phi0_origin_closed_form(double lambda, double t);
// phi_eps(0, 0) for the massless dispersion as a one-dimensional integral.
double phi_origin_1d(double lambda, double eps);
// Screened Coulomb transform (2 pi)^-3 int e^{-ik.x} / (2 (|k|^2 + nu^2)) dk.
double screened_coulomb(double nu, double x_norm);

// Expected discrete Kato integral dt * sum_m w_m E[max(R_m, c)^-1] for Brownian motion from the
// origin in 3D sampled at m dt, trapezoid weights, clip radius c.
double kato_discrete_inverse_r(int n_nodes, double dt, double clip_radius);

// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace nelson::oracle
