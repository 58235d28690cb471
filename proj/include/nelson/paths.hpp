#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nelson/kernels.hpp"
#include "nelson/rng.hpp"

namespace nelson::paths {

struct TimeGrid {
    double t_horizon = 1.0;  // T
    int n_steps = 64;        // M, a power of two
    double tau = 1.0;        // diagonal window, 0 < tau <= 2T (2T covers the whole interval)

    void validate() const;  // throws InvalidGrid
    double dt() const { return 2.0 * t_horizon / n_steps; }
    double time(int m) const { return -t_horizon + 2.0 * t_horizon * m / n_steps; }
    // Window length in grid steps (tau rounded to the nearest multiple of dt, at least 1).
    int tau_steps() const;
    // True when the window covers the whole interval, so [s + tau]_T = T for every s.
    bool full_window() const { return tau_steps() >= n_steps; }
    double full_window_tau() const { return 2.0 * t_horizon; }
};

// [t]_T = max(-T, min(t, T)).
double clamp_time(const TimeGrid& grid, double t);

// Read-only view of one path: x(m, i) points at the 3 coordinates of particle i at time index m.
struct PathView {
    const double* data = nullptr;
    int n_particles = 0;
    int n_times = 0;
    const double* x(int m, int i) const { return data + (static_cast<std::size_t>(m) * n_particles + i) * 3; }
};

// Discrete Brownian paths of N particles in 3D, stored flat as
// positions[((path * (M+1) + m) * N + i) * 3 + c].
class PathEnsemble {
public:
    PathEnsemble() = default;
    PathEnsemble(TimeGrid grid, int n_particles, int n_paths, std::vector<double> positions,
                 std::vector<RngSpec> lineage = {});

    const TimeGrid& grid() const { return grid_; }
    int n_particles() const { return n_particles_; }
    int n_paths() const { return n_paths_; }
    int n_times() const { return grid_.n_steps + 1; }
    const std::vector<double>& positions() const { return positions_; }
    // Rng specs used to build this ensemble: first the sampler, then one per refinement.
    const std::vector<RngSpec>& lineage() const { return lineage_; }
    int refinement_depth() const { return lineage_.empty() ? 0 : static_cast<int>(lineage_.size()) - 1; }

    // Position of particle i at time index m on path p.
    const double* at(int p, int m, int i) const {
        return positions_.data() + ((static_cast<std::size_t>(p) * n_times() + m) * n_particles_ + i) * 3;
    }
    // Span over all particles for time index m on path p (3N values).
    std::span<const double> frame(int p, int m) const {
        return {at(p, m, 0), static_cast<std::size_t>(3 * n_particles_)};
    }
    std::span<const double> path(int p) const {
        return {at(p, 0, 0), static_cast<std::size_t>(3 * n_particles_ * n_times())};
    }

    PathView view(int p) const { return {at(p, 0, 0), n_particles_, n_times()}; }

    // Single-path view as a standalone ensemble.
    PathEnsemble extract(int p) const;

private:
    TimeGrid grid_;
    int n_particles_ = 0;
    int n_paths_ = 0;
    std::vector<double> positions_;
    std::vector<RngSpec> lineage_;
};

// Fills out[(m * dim) + d] with a Brownian path from start, drawing increments in (m, d) order.
void sample_path(const TimeGrid& grid, std::span<const double> start, Philox& gen, std::span<double> out);

// Independent Brownian paths started at starts[p % starts.size()] at time -T.
// Path p draws from stream rng.stream_id + p.
PathEnsemble sample_ensemble(const TimeGrid& grid, const std::vector<std::vector<double>>& starts, int n_paths,
                             const RngSpec& rng, unsigned threads = 0);

// Doubles n_steps by Brownian-bridge midpoints; coarse positions are kept exactly.
PathEnsemble refine(const PathEnsemble& ensemble, const RngSpec& rng, unsigned threads = 0);

// Binary dump: magic, version, grid, counts, lineage, then little-endian f64 positions.
void dump(const PathEnsemble& ensemble, std::ostream& out);
PathEnsemble restore(std::istream& in);

}  // namespace nelson::paths
