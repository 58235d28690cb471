#pragma once

#include <memory>
#include <mutex>
#include <vector>

#include "nelson/kernel_table.hpp"
#include "nelson/kernels.hpp"
#include "nelson/paths.hpp"

namespace nelson::action {

enum class Route { naive, decomposed };
enum class KernelMode { table, direct };

struct ActionConfig {
    kernels::ModelParams params;
    double tau = 1.0;
    Route route = Route::decomposed;
    kernels::QuadratureSpec quad;
    bool scaled = false;  // kappa-scaled phi kernels (weak-coupling runs)
    KernelMode mode = KernelMode::table;
    kernels::TableSpec table;

    // Throws RouteForbidden / InvalidParams for combinations that cannot be evaluated.
    void validate(const paths::TimeGrid& grid) const;
};

struct ActionBreakdown {
    double s_total;
    double s_dd;
    double s_od;
    double x_term;
    double y_term;
    double z_term;
    double s_ren;
    double diag_counterterm;
    double ito_residual;
    bool naive_below_floor = false;  // naive route used with eps < 1e-4 (informational only)
};

// Phi^i_{t_m} for m = 0..M-1 (the drift integrated against B_{m+1} - B_m), flattened [m][i][c].
struct DriftProcess {
    int n_times = 0;
    int n_particles = 0;
    std::vector<double> values;
    const double* at(int m, int i) const { return values.data() + (static_cast<std::size_t>(m) * n_particles + i) * 3; }
    double l2_norm_squared(double dt) const;
};

// Kernel access either through a table or by direct quadrature; slices fix the time argument.
class KernelSource {
public:
    KernelSource(kernels::KernelKind kind, const kernels::ModelParams& params, double t_max,
                 const kernels::QuadratureSpec& quad, KernelMode mode, const kernels::TableSpec& spec);

    class Slice {
    public:
        double operator()(double s) const {
            return table_ ? table_slice_(s) : kernels::eval_kind(kind_, *params_, s, t_, *quad_).value;
        }
        bool is_zero() const { return table_ && table_slice_.is_zero(); }

    private:
        friend class KernelSource;
        bool table_ = false;
        kernels::KernelTable::Slice table_slice_;
        kernels::KernelKind kind_{};
        const kernels::ModelParams* params_ = nullptr;
        const kernels::QuadratureSpec* quad_ = nullptr;
        double t_ = 0.0;
    };

    Slice slice(double t) const;
    double operator()(double s, double t) const;

private:
    kernels::KernelKind kind_;
    kernels::ModelParams params_;
    kernels::QuadratureSpec quad_;
    std::unique_ptr<kernels::KernelTable> table_;
};

// Evaluates every action functional for paths on one time grid. Kernel tables and
// per-lag slices are built lazily once and shared read-only between threads.
class ActionEvaluator {
public:
    ActionEvaluator(ActionConfig config, paths::TimeGrid grid);

    const ActionConfig& config() const { return config_; }
    const paths::TimeGrid& grid() const { return grid_; }
    int window_steps() const { return k_; }
    bool full_window() const { return k_ >= grid_.n_steps; }

    double naive(const paths::PathView& path) const;
    // {s_dd, s_od}; s_dd is NaN at eps = 0.
    std::pair<double, double> split(const paths::PathView& path) const;
    double s_od(const paths::PathView& path) const;
    double x_term(const paths::PathView& path) const;
    DriftProcess drift(const paths::PathView& path) const;
    double y_term(const paths::PathView& path) const;
    double z_term(const paths::PathView& path) const;
    double counterterm() const;
    ActionBreakdown renormalized(const paths::PathView& path) const;
    double ito_residual(const paths::PathView& path) const;
    // s_dd, counterterm, X, Y, Z and the residual only; O(M K) work, no off-diagonal part.
    ActionBreakdown ito_decomposition(const paths::PathView& path) const;
    // Every field that can be computed at this eps, from both routes.
    ActionBreakdown full(const paths::PathView& path) const;
    // Sum over i<j of the trapezoid time integral of 1/|B^i - B^j|.
    double coulomb_integral(const paths::PathView& path) const;

private:
    const std::vector<KernelSource::Slice>& lag_slices(int which) const;
    const KernelSource& source(int which) const;
    double x_term_impl(const paths::PathView& path) const;
    std::pair<double, double> dd_od(const paths::PathView& path, bool want_dd, bool want_od) const;

    ActionConfig config_;
    paths::TimeGrid grid_;
    int k_;
    kernels::KernelKind phi_kind_, grad_kind_;
    mutable std::once_flag source_once_[3];
    mutable std::unique_ptr<KernelSource> sources_[3];
    mutable std::once_flag slice_once_[3];
    mutable std::vector<KernelSource::Slice> slices_[3];
    mutable std::once_flag ct_once_;
    mutable double ct_ = 0.0;
};

// Single-path convenience wrappers; each builds its own evaluator.
double action_naive(const paths::PathEnsemble& path, const ActionConfig& config, int p = 0);
std::pair<double, double> action_split(const paths::PathEnsemble& path, const ActionConfig& config, int p = 0);
double term_X(const paths::PathEnsemble& path, const ActionConfig& config, int p = 0);
double term_Y(const paths::PathEnsemble& path, const ActionConfig& config, int p = 0);
double term_Z(const paths::PathEnsemble& path, const ActionConfig& config, int p = 0);
ActionBreakdown action_renormalized(const paths::PathEnsemble& path, const ActionConfig& config, int p = 0);
double ito_residual(const paths::PathEnsemble& path, const ActionConfig& config, int p = 0);

}  // namespace nelson::action
