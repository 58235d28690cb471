#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "nelson/errors.hpp"
#include "nelson/estimator.hpp"
#include "nelson/paths.hpp"
#include "nelson/rng.hpp"

using namespace nelson;
using namespace nelson::estimator;

namespace {

constexpr double kPi = std::numbers::pi;

paths::TimeGrid grid(int m, double t = 1.0) {
    paths::TimeGrid g;
    g.t_horizon = t;
    g.n_steps = m;
    g.tau = 2.0 * t;
    return g;
}

action::ActionConfig config(double eps, double g, int n, double t = 1.0) {
    action::ActionConfig c;
    c.params.eps = eps;
    c.params.g = g;
    c.params.n_particles = n;
    c.tau = 2.0 * t;
    return c;
}

// Single-coordinate overlap of two packets through the heat kernel of variance 2T, by brute force.
double overlap_1d(double cf, double sf, double ch, double sh, double t) {
    const double var = 2.0 * t;
    const int n = 1200;
    const double lo = -15.0, hi = 15.0, dx = (hi - lo) / n;
    auto packet = [](double x, double c, double s) {
        return std::pow(2.0 * kPi * s * s, -0.25) * std::exp(-(x - c) * (x - c) / (4.0 * s * s));
    };
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = lo + i * dx;
        double inner = 0.0;
        for (int j = 0; j <= n; ++j) {
            const double y = lo + j * dx;
            inner += std::exp(-(y - x) * (y - x) / (2.0 * var)) / std::sqrt(2.0 * kPi * var) * packet(y, ch, sh) * dx;
        }
        total += packet(x, cf, sf) * inner * dx;
    }
    return total;
}

}  // namespace

TEST_CASE("running statistics merge matches sequential accumulation") {
    Philox gen(1, 0);
    RunningStats all, a, b, c;
    for (int i = 0; i < 1000; ++i) {
        const double x = gen.normal() * 3.0 + 1.0;
        all.push(x);
        (i < 200 ? a : i < 700 ? b : c).push(x);
    }
    RunningStats merged;
    merged.merge(a);
    merged.merge(b);
    merged.merge(c);
    CHECK(merged.count == all.count);
    CHECK(merged.mean == doctest::Approx(all.mean).epsilon(1e-12));
    CHECK(merged.variance() == doctest::Approx(all.variance()).epsilon(1e-12));
    RunningStats empty;
    merged.merge(empty);
    CHECK(merged.count == all.count);
}

TEST_CASE("batch means") {
    std::vector<double> lw(64, std::log(2.5)), sign(64, 1.0);
    auto e = batch_means(lw, sign);
    CHECK(e.mean == doctest::Approx(2.5));
    CHECK(e.std_error == doctest::Approx(0.0));
    CHECK(e.n_batches == 32);
    // Huge log weights stay finite on the log scale.
    std::vector<double> big(64, 2000.0);
    e = batch_means(big, sign);
    CHECK(e.log_mean == doctest::Approx(2000.0));
    CHECK(e.rel_error == doctest::Approx(0.0));
    for (int i = 0; i < 32; ++i) sign[i] = -1.0;
    e = batch_means(lw, sign);
    CHECK(std::fabs(e.mean) < 1e-12);
    std::vector<double> few(10, 0.0), fs(10, 1.0);
    CHECK_THROWS_AS(batch_means(few, fs), InvalidParams);
}

TEST_CASE("free overlap closed form") {
    const auto f = TestFunction::gaussian({0, 0, 0, 1, 0, 0}, 1.0);
    CHECK(free_overlap(f, f, 1.0) == doctest::Approx(std::pow(2.0 / 3.0, 3.0)).epsilon(1e-14));
    const auto a = TestFunction::gaussian({0.3, -0.2, 0.5}, 0.7);
    const auto b = TestFunction::gaussian({1.0, 0.4, 0.0}, 1.3);
    const double brute = overlap_1d(0.3, 0.7, 1.0, 1.3, 0.8) * overlap_1d(-0.2, 0.7, 0.4, 1.3, 0.8) *
                         overlap_1d(0.5, 0.7, 0.0, 1.3, 0.8);
    CHECK(free_overlap(a, b, 0.8) == doctest::Approx(brute).epsilon(1e-6));
    CHECK(free_overlap(a, b, 0.8) == doctest::Approx(free_overlap(b, a, 0.8)).epsilon(1e-14));
    const auto callable = TestFunction::callable(3, [](std::span<const double>) { return 1.0; });
    CHECK_THROWS_AS(free_overlap(a, callable, 1.0), ProposalMismatch);
}

TEST_CASE("test functions") {
    const auto f = TestFunction::gaussian({0, 0, 0}, 0.8);
    CHECK(f.l2_norm() == 1.0);
    CHECK(f.integral() == doctest::Approx(std::pow(8.0 * kPi * 0.64, 0.75)));
    const double x[3] = {0.1, 0.2, -0.3};
    CHECK(std::log(f(x)) == doctest::Approx(f.log_value(x)));
}

TEST_CASE("potentials") {
    const double x[6] = {0.5, 0, 0, -0.5, 0, 0};
    CHECK(Potential::zero()(x) == 0.0);
    CHECK(Potential::harmonic(0.3)(x) == doctest::Approx(0.3 * 0.5));
    CHECK(Potential::bounded_well(2.0, 1.0)(x) == doctest::Approx(-4.0 * std::exp(-0.125)));
    CHECK(Potential::yukawa_pairwise(1.5, 2.0)(x) == doctest::Approx(-2.0 * 2.25 / (8.0 * kPi) * std::exp(-2.0)));
    Potential radial;
    radial.kind = Potential::Kind::pairwise_radial;
    radial.radial = [](double r) { return 1.0 / r; };
    CHECK(radial(x) == doctest::Approx(2.0));
    CHECK(radial.singular());
    CHECK_FALSE(radial.bounded());
    CHECK(Potential::bounded_well(1, 1).bounded());
    CHECK(Potential::yukawa_pairwise(1, 1).singular());

    std::vector<double> pos;
    const auto g = grid(8, 0.5);
    for (int m = 0; m <= 8; ++m) pos.insert(pos.end(), x, x + 6);
    const paths::PathEnsemble e(g, 2, 1, pos);
    CHECK(Potential::harmonic(0.3).path_integral(e.view(0), g.dt()) == doctest::Approx(0.15 * 1.0));
}

TEST_CASE("free matrix element agrees with the closed form") {
    const auto f = TestFunction::gaussian({0, 0, 0}, 1.0);
    const auto h = TestFunction::gaussian({0.5, 0, 0}, 0.7);
    const auto e = semigroup_element(f, h, Potential::zero(), config(0.1, 0.0, 1), grid(8), 4000, {3, 0});
    CHECK(std::fabs(e.mean - free_overlap(f, h, 1.0)) < 3.5 * e.std_error);
    CHECK(e.n_samples == 4000);
}

TEST_CASE("estimates are reproducible and independent of threading") {
    const auto f = TestFunction::gaussian({0, 0, 0, 0.5, 0, 0}, 1.0);
    EstimatorOptions one, many;
    one.threads = 1;
    many.threads = 3;
    const auto c = config(0.1, 1.0, 2);
    const auto a = semigroup_element(f, f, Potential::zero(), c, grid(32), 60, {4, 0}, one);
    const auto b = semigroup_element(f, f, Potential::zero(), c, grid(32), 60, {4, 0}, many);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    const auto other = semigroup_element(f, f, Potential::zero(), c, grid(32), 60, {5, 0}, one);
    CHECK(other.mean != a.mean);
}

TEST_CASE("standard error scales like n^-1/2") {
    const auto f = TestFunction::gaussian({0, 0, 0}, 1.0);
    const auto h = TestFunction::gaussian({0.3, 0, 0}, 0.6);
    const auto c = config(0.1, 0.0, 1);
    const auto a = semigroup_element(f, h, Potential::zero(), c, grid(4), 2000, {6, 0});
    const auto b = semigroup_element(f, h, Potential::zero(), c, grid(4), 32000, {7, 0});
    CHECK(a.std_error / b.std_error == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("at g = 0 the estimate ignores the action") {
    const auto f = TestFunction::gaussian({0, 0, 0, 0.5, 0, 0}, 1.0);
    const auto a = semigroup_element(f, f, Potential::zero(), config(0.1, 0.0, 2), grid(16), 40, {8, 0});
    const auto b = semigroup_element(f, f, Potential::zero(), config(0.0, 0.0, 2), grid(16), 40, {8, 0});
    CHECK(a.mean == b.mean);
}

TEST_CASE("swapping f and h") {
    const auto f = TestFunction::gaussian({0, 0, 0}, 1.0);
    const auto h = TestFunction::gaussian({0.8, 0, 0}, 0.6);
    const auto c = config(0.1, 0.0, 1);
    const auto fh = semigroup_element(f, h, Potential::bounded_well(1.0, 1.0), c, grid(32), 8000, {9, 0});
    const auto hf = semigroup_element(h, f, Potential::bounded_well(1.0, 1.0), c, grid(32), 8000, {10, 0});
    CHECK(std::fabs(fh.mean - hf.mean) < 3.0 * std::hypot(fh.std_error, hf.std_error));
}

TEST_CASE("callable right-hand vector") {
    const auto f = TestFunction::gaussian({0, 0, 0}, 1.0);
    const auto h = TestFunction::gaussian({0.4, 0, 0}, 0.9);
    const auto hc = TestFunction::callable(3, [&](std::span<const double> x) { return h(x); });
    const auto c = config(0.1, 0.0, 1);
    const auto a = semigroup_element(f, h, Potential::zero(), c, grid(8), 100, {11, 0});
    const auto b = semigroup_element(f, hc, Potential::zero(), c, grid(8), 100, {11, 0});
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-12));
    CHECK_THROWS_AS(semigroup_element(hc, f, Potential::zero(), c, grid(8), 100, {11, 0}), ProposalMismatch);
    CHECK_THROWS_AS(semigroup_element(f, h, Potential::zero(), config(0.1, 0.0, 2), grid(8), 100, {11, 0}), InvalidParams);
}

TEST_CASE("harmonic ground energy proxy") {
    const double delta = 0.5;  // omega = 1, ground state variance 1/2
    const auto f = TestFunction::gaussian({0, 0, 0}, std::sqrt(0.5));
    const auto pr = ground_energy_proxy(f, Potential::harmonic(delta), config(0.1, 0.0, 1), {grid(128)}, 4000, {12, 0});
    CHECK(harmonic_ground_energy(delta) == doctest::Approx(1.5));
    CHECK(std::fabs(pr[0].value - 1.5) < 3.0 * pr[0].error + 1e-3);
}

TEST_CASE("xi") {
    kernels::ModelParams p;
    p.eps = 0.1;
    const auto g = grid(32, 0.5);
    const auto e = paths::sample_ensemble(g, {{0.2, 0, 0}}, 5, {13, 0});
    XiSpec spec;
    spec.rho1 = {1.0, 0.8};
    spec.rho2 = {0.5, 1.2};
    CHECK(compute_xi(e.view(0), spec, p, g) == 0.0);
    const auto c = xi_constants(spec, p, g.t_horizon);
    CHECK(c.norm1 == doctest::Approx(2.0 * kPi / 0.64).epsilon(1e-8));
    CHECK(c.norm2 == doctest::Approx(2.0 * kPi * 0.25 / 1.44).epsilon(1e-8));
    CHECK(c.cross > 0.0);
    CHECK(c.cross < std::sqrt(c.norm1 * c.norm2));
    CHECK(xi_constants(spec, p, 2.0).cross < c.cross);

    spec.alpha = 0.7;
    spec.beta = -0.4;
    auto p0 = p;
    p0.g = 0.0;
    const double field_only = 0.49 * c.norm1 + 0.16 * c.norm2 - 0.56 * c.cross;
    CHECK(compute_xi(e.view(0), spec, p0, g) == doctest::Approx(field_only));
    // Path terms are bounded by the kernel at the origin, uniformly in the path.
    double bound = 0.0;
    for (int m = 0; m <= g.n_steps; ++m) {
        const double w = (m == 0 || m == g.n_steps) ? 0.5 * g.dt() : g.dt();
        const double s = g.time(m);
        bound += w * (1.4 * std::fabs(kernels::eval_rho_kernel(spec.rho1, p, 0.0, std::fabs(s - 0.5)).value) +
                      0.8 * std::fabs(kernels::eval_rho_kernel(spec.rho2, p, 0.0, std::fabs(s + 0.5)).value));
    }
    for (int k = 0; k < e.n_paths(); ++k)
        CHECK(std::fabs(compute_xi(e.view(k), spec, p, g) - field_only) <= bound * (1.0 + 1e-9));
    spec.rho1.width = 0.0;
    CHECK_THROWS_AS(xi_constants(spec, p, 1.0), ProfileNotAdmissible);
}

TEST_CASE("weak coupling rows share their paths") {
    kernels::ModelParams p;
    p.n_particles = 2;
    p.nu = 1.0;
    p.lambda = 0.0;
    p.g = 1.0;
    p.fourier_norm = kernels::FourierNorm::inverse_cube_two_pi;
    p.dispersion = kernels::Dispersion::massive;
    const auto f = TestFunction::gaussian({0, 0, 0, 0.5, 0, 0}, 0.5);
    const auto rows = weak_coupling_compare(f, f, Potential::zero(), p, {1.0, 16.0}, grid(32), 40, {14, 0});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].reference.mean == rows[1].reference.mean);
    for (const auto& r : rows) CHECK(r.gap == doctest::Approx(r.scaled.mean - r.reference.mean).epsilon(1e-9));
    CHECK(std::fabs(rows[1].gap) < std::fabs(rows[0].gap));
}
