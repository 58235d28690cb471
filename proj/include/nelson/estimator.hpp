#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nelson/action.hpp"
#include "nelson/kernels.hpp"
#include "nelson/paths.hpp"
#include "nelson/rng.hpp"

namespace nelson::estimator {

/// L²-normalized Gaussian packet on R^{3N}:
/// f(x) = (2πσ²)^{-3N/4} exp(-|x - c|² / (4σ²)).
/// A `callable` test function can be used as the right-hand vector h only.
class TestFunction {
public:
    enum class Kind { gaussian_packet, callable };

    static TestFunction gaussian(std::vector<double> center, double width);
    static TestFunction callable(int dim, std::function<double(std::span<const double>)> fn);

    Kind kind() const { return kind_; }
    int dim() const { return dim_; }
    const std::vector<double>& center() const { return center_; }
    double width() const { return width_; }

    double operator()(std::span<const double> x) const;
    // ln f(x) for Gaussian packets.
    double log_value(std::span<const double> x) const;
    // Closed-form L² norm; 1 for Gaussian packets.
    double l2_norm() const;
    // Closed-form integral of a Gaussian packet over R^{3N}.
    double integral() const;

private:
    Kind kind_ = Kind::gaussian_packet;
    int dim_ = 0;
    std::vector<double> center_;
    double width_ = 1.0;
    std::function<double(std::span<const double>)> fn_;
};

/// Potential V on R^{3N}.
struct Potential {
    enum class Kind { zero, bounded_well, harmonic, yukawa_pairwise, pairwise_radial };
    Kind kind = Kind::zero;
    double depth = 0.0;  // bounded_well: V = -depth * sum_j exp(-|x_j|² / (2 width²))
    double width = 1.0;
    double delta = 0.0;  // harmonic: V = delta * sum_j |x_j|²
    double g = 0.0;      // yukawa_pairwise: V = -2 g² C_Y sum_{i<j} exp(-nu r) / r
    double nu = 0.0;
    // pairwise_radial: V = sum_{i != j} radial(|x_i - x_j|), radii clipped at 1e-10
    std::function<double(double)> radial;
    bool radial_bounded = false;
    std::string origin;  // free-form provenance, e.g. the lifted one-body potential

    static Potential zero() { return {}; }
    static Potential bounded_well(double depth, double width);
    static Potential harmonic(double delta);
    static Potential yukawa_pairwise(double g, double nu);

    bool bounded() const {
        return kind == Kind::zero || kind == Kind::bounded_well || (kind == Kind::pairwise_radial && radial_bounded);
    }
    bool singular() const { return kind == Kind::yukawa_pairwise || (kind == Kind::pairwise_radial && !radial_bounded); }
    double operator()(std::span<const double> x) const;
    // Trapezoid time integral of V along a path.
    double path_integral(const paths::PathView& path, double dt) const;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    // ln|mean|; finite even when mean itself would overflow a double.
    double log_mean = 0.0;
    // std_error / |mean|.
    double rel_error = 0.0;
    int n_samples = 0;
    int n_batches = 0;
    RngSpec rng;
    double wall_time = 0.0;
};

// Streaming mean and M2 (Chan et al. pairwise merge).
struct RunningStats {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;
    void push(double x);
    void merge(const RunningStats& other);
    double variance() const { return count > 1.0 ? m2 / (count - 1.0) : 0.0; }
};

// Batch-means estimate from signed weights sign[p] * exp(log_w[p]). Needs at least 30 samples.
McEstimate batch_means(std::span<const double> log_w, std::span<const double> sign, int max_batches = 32);

enum class Weighting {
    renormalized,    // exp((g²/2) s_ren)
    unrenormalized,  // exp((g²/2) s_total), naive route
};

struct EstimatorOptions {
    Weighting weighting = Weighting::renormalized;
    unsigned threads = 0;
    int max_batches = 32;
};

/// Monte Carlo estimate of ∫dx E^x[f(B_{-T}) h(B_T) exp(-∫V) exp((g²/2) S)].
/// Start points come from the Gaussian proposal matching |f|; path p uses stream rng.stream_id + p.
McEstimate semigroup_element(const TestFunction& f, const TestFunction& h, const Potential& potential,
                             const action::ActionConfig& config, const paths::TimeGrid& grid, int n_paths,
                             const RngSpec& rng, const EstimatorOptions& options = {});

struct EnergyProxy {
    double t_horizon;
    double value;  // -(1/2T) ln(estimate)
    double error;  // SE propagated through the log
    McEstimate estimate;
};

std::vector<EnergyProxy> ground_energy_proxy(const TestFunction& f, const Potential& potential,
                                             const action::ActionConfig& config,
                                             const std::vector<paths::TimeGrid>& grids, int n_paths,
                                             const RngSpec& rng, const EstimatorOptions& options = {});

// Closed form of the g = 0, V = 0 element ∫dx f(x) E^x[h(B_{2T})] for two Gaussian packets.
double free_overlap(const TestFunction& f, const TestFunction& h, double t_horizon);

// Ground energy of -½Δ + delta |x|² per particle in 3D.
double harmonic_ground_energy(double delta);

struct XiSpec {
    kernels::RhoProfile rho1;
    kernels::RhoProfile rho2;
    double alpha = 0.0;
    double beta = 0.0;
};

// Field-only parts of xi: the two norm terms and the e^{-2T omega} cross term.
struct XiConstants {
    double norm1 = 0.0;  // ||rho1 / sqrt(omega)||²
    double norm2 = 0.0;
    double cross = 0.0;  // (rho1/sqrt(omega), e^{-2T omega} rho2/sqrt(omega))
};

XiConstants xi_constants(const XiSpec& spec, const kernels::ModelParams& params, double t_horizon,
                         const kernels::QuadratureSpec& quad = {});

double compute_xi(const paths::PathView& path, const XiSpec& spec, const kernels::ModelParams& params,
                  const paths::TimeGrid& grid, const kernels::QuadratureSpec& quad = {});

struct WeakCouplingRow {
    double kappa;
    McEstimate scaled;     // scaled-kernel renormalized action, eps = 0
    McEstimate reference;  // Yukawa pair potential, no field
    double gap;            // scaled - reference, paired on common paths
    double gap_se;
};

/// Scaled-kernel semigroup elements against the Yukawa reference for each kappa.
/// `base` supplies g, N, nu, lambda and the Fourier normalization; eps is forced to 0
/// and the dispersion to massive. Both columns reuse the same sampled paths.
std::vector<WeakCouplingRow> weak_coupling_compare(const TestFunction& f, const TestFunction& h,
                                                   const Potential& potential, const kernels::ModelParams& base,
                                                   const std::vector<double>& kappas, const paths::TimeGrid& grid,
                                                   int n_paths, const RngSpec& rng,
                                                   const EstimatorOptions& options = {});

}  // namespace nelson::estimator
