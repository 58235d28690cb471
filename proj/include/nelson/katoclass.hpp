#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nelson/estimator.hpp"
#include "nelson/kernels.hpp"
#include "nelson/rng.hpp"

namespace nelson::kato {

/// Radial potential on R^d: coupling * |x|^{-exponent}, or a bounded radial profile with |V| <= bound.
struct RadialPotentialSpec {
    enum class Form { power, bounded };
    Form form = Form::power;
    double exponent = 1.0;
    double coupling = 1.0;
    int dim = 3;
    std::function<double(double)> profile;  // bounded form only
    double bound = 0.0;

    static RadialPotentialSpec power(double exponent, int dim = 3, double coupling = 1.0);
    static RadialPotentialSpec bounded(std::function<double(double)> profile, double bound, int dim = 3);

    // Throws InvalidParams.
    void validate() const;
    double operator()(double r) const;
    bool singular() const { return form == Form::power && exponent > 0.0; }
    std::string describe() const;
};

struct KatoVerdict {
    bool pass = false;
    std::vector<double> radii;       // decreasing
    std::vector<double> diagnostic;  // sup_x of the local g-weighted integral of |V|; inf if divergent
    double log_slope = 0.0;          // d ln(diagnostic) / d ln(r) over the two smallest radii
    std::string reason;
};

/// Analytic criterion: D(r) = sup_x ∫_{|x-y|<r} g(x-y)|V(y)| dy with g = |y|^{2-d} (d = 1, 3)
/// or ln(1/|y|) (d = 2). For radial potentials the sup is taken at x = 0.
/// Pass iff D is finite, decreasing along the radii, and vanishes like a positive power of r.
KatoVerdict kato_criterion(const RadialPotentialSpec& spec, const kernels::QuadratureSpec& quad = {});

struct MonteCarloOptions {
    int n_steps = 2048;    // time steps over the longest horizon
    double clip = 1.0;     // node radii are clipped below at clip * sqrt(dt)
    double start_box = 2.0;
    unsigned threads = 0;
};

struct KatoCurvePoint {
    double t;
    double value;  // max over starts of the mean of ∫_0^t |V(W_s)| ds
    double std_error;
    std::vector<double> argmax_start;
};

/// Starts are the origin plus a regular grid of about n_starts points in [-box, box]^d.
/// Path p from start k draws from stream rng.stream_id + k * n_paths + p.
std::vector<KatoCurvePoint> kato_mc(const RadialPotentialSpec& spec, const std::vector<double>& t_list, int n_paths,
                                    int n_starts, const RngSpec& rng, const MonteCarloOptions& options = {});

struct ExpBoundRow {
    double beta;
    double tau;
    double value;  // sup over starts of the mean of exp(beta ∫_0^tau V(W_s) ds)
    double std_error;
    std::vector<double> argmax_start;
    std::vector<double> per_start;  // means in the order of the supplied starts
};

/// Exponential-moment table. The same paths serve every beta. Throws PreflightFailed if the
/// criterion fails. An empty `starts` means the origin only.
std::vector<ExpBoundRow> exp_bound_mc(const RadialPotentialSpec& spec, const std::vector<double>& beta_list,
                                      double tau, int n_paths, const RngSpec& rng,
                                      const std::vector<std::vector<double>>& starts = {},
                                      const MonteCarloOptions& options = {});

struct AffineFit {
    double intercept;
    double slope;
    double residual;  // max |y - fit| / max |y|; 0 when y vanishes identically
};

// Least-squares fit of y = intercept + slope * x.
AffineFit affine_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Pairwise lift W(x) = sum_{i != j} V(x^i - x^j) on R^{3N}. Requires d = 3 and a passing criterion.
estimator::Potential lift_pairwise(const RadialPotentialSpec& spec, int n_particles);

}  // namespace nelson::kato
