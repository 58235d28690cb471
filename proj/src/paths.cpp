#include "nelson/paths.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <type_traits>

#include "nelson/errors.hpp"
#include "nelson/parallel.hpp"

namespace nelson::paths {

void TimeGrid::validate() const {
    if (!(t_horizon > 0.0)) throw InvalidGrid("T must be > 0");
    if (n_steps < 2 || !std::has_single_bit(static_cast<unsigned>(n_steps)))
        throw InvalidGrid("n_steps must be a power of two >= 2");
    if (!(tau > 0.0) || tau > 2.0 * t_horizon * (1.0 + 1e-12)) throw InvalidGrid("tau must lie in (0, 2T]");
}

int TimeGrid::tau_steps() const {
    const int k = static_cast<int>(std::lround(tau / dt()));
    return std::clamp(k, 1, n_steps);
}

double clamp_time(const TimeGrid& grid, double t) {
    return std::max(-grid.t_horizon, std::min(t, grid.t_horizon));
}

PathEnsemble::PathEnsemble(TimeGrid grid, int n_particles, int n_paths, std::vector<double> positions,
                           std::vector<RngSpec> lineage)
    : grid_(grid), n_particles_(n_particles), n_paths_(n_paths), positions_(std::move(positions)),
      lineage_(std::move(lineage)) {
    grid_.validate();
    const std::size_t expected = static_cast<std::size_t>(n_paths) * (grid.n_steps + 1) * n_particles * 3;
    if (n_particles < 1 || n_paths < 0 || positions_.size() != expected)
        throw InvalidGrid("position array does not match grid and counts");
}

PathEnsemble PathEnsemble::extract(int p) const {
    auto span = path(p);
    return PathEnsemble(grid_, n_particles_, 1, std::vector<double>(span.begin(), span.end()), lineage_);
}

void sample_path(const TimeGrid& grid, std::span<const double> start, Philox& gen, std::span<double> out) {
    const std::size_t dim = start.size();
    const int M = grid.n_steps;
    if (out.size() != (M + 1) * dim) throw InvalidGrid("path buffer size mismatch");
    const double sd = std::sqrt(grid.dt());
    std::copy(start.begin(), start.end(), out.begin());
    for (int m = 0; m < M; ++m)
        for (std::size_t d = 0; d < dim; ++d) out[(m + 1) * dim + d] = out[m * dim + d] + sd * gen.normal();
}

PathEnsemble sample_ensemble(const TimeGrid& grid, const std::vector<std::vector<double>>& starts, int n_paths,
                             const RngSpec& rng, unsigned threads) {
    grid.validate();
    if (starts.empty() || starts[0].empty() || starts[0].size() % 3 != 0)
        throw InvalidGrid("starts must be nonempty with 3N coordinates");
    const int dim = static_cast<int>(starts[0].size());
    for (const auto& s : starts)
        if (static_cast<int>(s.size()) != dim) throw InvalidGrid("inconsistent start dimensions");
    const int n = dim / 3;
    const int M = grid.n_steps;
    const std::size_t stride = static_cast<std::size_t>(M + 1) * dim;
    std::vector<double> pos(static_cast<std::size_t>(n_paths) * stride);
    parallel_for(static_cast<std::size_t>(n_paths), threads, [&](std::size_t p) {
        Philox gen(rng.seed, rng.stream_id + p);
        sample_path(grid, starts[p % starts.size()], gen, std::span<double>(pos.data() + p * stride, stride));
    });
    return PathEnsemble(grid, n, n_paths, std::move(pos), {rng});
}

PathEnsemble refine(const PathEnsemble& ens, const RngSpec& rng, unsigned threads) {
    TimeGrid g = ens.grid();
    const int M = g.n_steps;
    const int dim = 3 * ens.n_particles();
    const double sd = std::sqrt(g.dt() / 4.0);
    g.n_steps = 2 * M;
    std::vector<double> pos(static_cast<std::size_t>(ens.n_paths()) * (2 * M + 1) * dim);
    parallel_for(static_cast<std::size_t>(ens.n_paths()), threads, [&](std::size_t p) {
        Philox gen(rng.seed, rng.stream_id + p);
        const double* src = ens.at(static_cast<int>(p), 0, 0);
        double* x = pos.data() + p * (2 * M + 1) * dim;
        for (int m = 0; m <= M; ++m)
            for (int d = 0; d < dim; ++d) x[2 * m * dim + d] = src[m * dim + d];
        for (int m = 0; m < M; ++m)
            for (int d = 0; d < dim; ++d)
                x[(2 * m + 1) * dim + d] = 0.5 * (src[m * dim + d] + src[(m + 1) * dim + d]) + sd * gen.normal();
    });
    auto lineage = ens.lineage();
    lineage.push_back(rng);
    return PathEnsemble(g, ens.n_particles(), ens.n_paths(), std::move(pos), std::move(lineage));
}

namespace {

constexpr char kMagic[8] = {'N', 'L', 'S', 'N', 'P', 'A', 'T', 'H'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw InvalidGrid("truncated path dump");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
    const auto n = get<std::uint32_t>(in);
    if (n > 4096) throw InvalidGrid("corrupt path dump string");
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw InvalidGrid("truncated path dump");
    return s;
}

}  // namespace

void dump(const PathEnsemble& ens, std::ostream& out) {
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kVersion);
    put<double>(out, ens.grid().t_horizon);
    put<std::int32_t>(out, ens.grid().n_steps);
    put<double>(out, ens.grid().tau);
    put<std::int32_t>(out, ens.n_particles());
    put<std::int32_t>(out, ens.n_paths());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ens.lineage().size()));
    for (const auto& r : ens.lineage()) {
        put<std::uint64_t>(out, r.seed);
        put<std::uint64_t>(out, r.stream_id);
        put_string(out, r.algorithm_id);
    }
    for (double v : ens.positions()) put<double>(out, v);
}

PathEnsemble restore(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw InvalidGrid("not a path dump");
    if (get<std::uint32_t>(in) != kVersion) throw InvalidGrid("unsupported path dump version");
    TimeGrid g;
    g.t_horizon = get<double>(in);
    g.n_steps = get<std::int32_t>(in);
    g.tau = get<double>(in);
    g.validate();
    const int n = get<std::int32_t>(in);
    const int paths = get<std::int32_t>(in);
    const auto nl = get<std::uint32_t>(in);
    std::vector<RngSpec> lineage(nl);
    for (auto& r : lineage) {
        r.seed = get<std::uint64_t>(in);
        r.stream_id = get<std::uint64_t>(in);
        r.algorithm_id = get_string(in);
    }
    if (n < 1 || paths < 0) throw InvalidGrid("corrupt path dump counts");
    std::vector<double> pos(static_cast<std::size_t>(paths) * (g.n_steps + 1) * n * 3);
    for (double& v : pos) v = get<double>(in);
    return PathEnsemble(g, n, paths, std::move(pos), std::move(lineage));
}

}  // namespace nelson::paths
