#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "nelson/action.hpp"
#include "nelson/errors.hpp"
#include "nelson/kernels.hpp"
#include "nelson/paths.hpp"

using namespace nelson;
using namespace nelson::action;

namespace {

paths::TimeGrid grid(int m, double tau, double t = 1.0) {
    paths::TimeGrid g;
    g.t_horizon = t;
    g.n_steps = m;
    g.tau = tau;
    return g;
}

ActionConfig config(double eps, int n, double tau) {
    ActionConfig c;
    c.params.eps = eps;
    c.params.n_particles = n;
    c.tau = tau;
    return c;
}

paths::PathEnsemble constant_path(const paths::TimeGrid& g, const std::vector<double>& x) {
    std::vector<double> pos;
    for (int m = 0; m <= g.n_steps; ++m) pos.insert(pos.end(), x.begin(), x.end());
    return paths::PathEnsemble(g, static_cast<int>(x.size()) / 3, 1, pos);
}

// Path with every particle following the trajectory of particle 0 of `e`, path p.
paths::PathEnsemble duplicate_particle(const paths::PathEnsemble& e, int p, int copies) {
    std::vector<double> pos;
    for (int m = 0; m < e.n_times(); ++m)
        for (int k = 0; k < copies; ++k) pos.insert(pos.end(), e.at(p, m, 0), e.at(p, m, 0) + 3);
    return paths::PathEnsemble(e.grid(), copies, 1, pos);
}

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }

}  // namespace

TEST_CASE("constant path: Ito residual equals the missing second-order term") {
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    const double tau = 0.5, T = 1.0;
    const auto g = grid(512, tau, T);
    for (const auto& x : {std::vector<double>{0, 0, 0}, std::vector<double>{0, 0, 0, 0.6, 0.3, 0}}) {
        const auto c = config(0.1, static_cast<int>(x.size()) / 3, tau);
        const auto path = constant_path(g, x);
        const double residual = ito_residual(path, c);
        CHECK(term_Y(path, c) == 0.0);
        // -sum_ij int_0^tau (2T - u) Laplacian phi(x_i - x_j, u) du
        double expected = 0.0;
        const int n = c.params.n_particles;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double d = std::hypot(x[3 * i] - x[3 * j], x[3 * i + 1] - x[3 * j + 1], x[3 * i + 2] - x[3 * j + 2]);
                auto f = [&](double u) { return (2.0 * T - u) * kernels::eval_laplacian_phi(c.params, d, u).value; };
                expected -= GK::integrate(f, 0.0, tau, 10, 1e-10);
            }
        CHECK(std::fabs(residual) > 1e-3);
        CHECK(rel(residual, expected) < 2e-3);
    }
}

TEST_CASE("diagonal and off-diagonal parts partition the naive action") {
    const auto g = grid(64, 0.3);
    const auto e = paths::sample_ensemble(g, {{0, 0, 0, 0.7, 0, 0}}, 4, {1, 0});
    const auto c = config(0.05, 2, g.tau);
    ActionEvaluator ev(c, g);
    for (int p = 0; p < 4; ++p) {
        const auto [dd, od] = ev.split(e.view(p));
        CHECK(dd + od == doctest::Approx(ev.naive(e.view(p))).epsilon(1e-12));
        CHECK(od != 0.0);
    }
}

TEST_CASE("full window has no off-diagonal part") {
    const auto g = grid(64, 2.0);
    const auto e = paths::sample_ensemble(g, {{0, 0, 0, 0.5, 0, 0}}, 2, {2, 0});
    for (double eps : {0.1, 0.0}) {
        ActionEvaluator ev(config(eps, 2, 2.0), g);
        CHECK(ev.full_window());
        CHECK(ev.s_od(e.view(0)) == 0.0);
        const auto b = ev.renormalized(e.view(1));
        CHECK(b.s_od == 0.0);
        CHECK(std::isfinite(b.s_ren));
        if (eps > 0.0) CHECK(b.s_total == doctest::Approx(b.s_dd).epsilon(1e-14));
    }
}

TEST_CASE("identical trajectories scale pair sums by N^2") {
    const auto g = grid(64, 0.5);
    const auto e = paths::sample_ensemble(g, {{0, 0, 0}}, 3, {3, 0});
    for (int p = 0; p < 3; ++p) {
        const auto one = duplicate_particle(e, p, 1);
        const auto two = duplicate_particle(e, p, 2);
        const auto c1 = config(0.1, 1, g.tau), c2 = config(0.1, 2, g.tau);
        CHECK(action_naive(two, c2) == doctest::Approx(4.0 * action_naive(one, c1)).epsilon(1e-12));
        const auto [dd1, od1] = action_split(one, c1);
        const auto [dd2, od2] = action_split(two, c2);
        CHECK(dd2 == doctest::Approx(4.0 * dd1).epsilon(1e-12));
        CHECK(od2 == doctest::Approx(4.0 * od1).epsilon(1e-12));
        CHECK(term_Y(two, c2) == doctest::Approx(4.0 * term_Y(one, c1)).epsilon(1e-12));
        CHECK(term_Z(two, c2) == doctest::Approx(4.0 * term_Z(one, c1)).epsilon(1e-12));
    }
}

TEST_CASE("symmetries of the action") {
    const auto g = grid(64, 0.5);
    const auto e = paths::sample_ensemble(g, {{0, 0, 0, 0.4, 0.2, 0, -0.3, 0, 0.5}}, 1, {4, 0});
    const auto c = config(0.1, 3, g.tau);
    const auto base = action_renormalized(e, c);
    // Relabel particles and translate everything by a fixed vector.
    std::vector<double> moved;
    const int order[3] = {2, 0, 1};
    for (int m = 0; m < e.n_times(); ++m)
        for (int k : order)
            for (int d = 0; d < 3; ++d) moved.push_back(e.at(0, m, k)[d] + (d == 0 ? 1.5 : -0.25));
    const auto other = action_renormalized(paths::PathEnsemble(g, 3, 1, moved), c);
    CHECK(other.s_ren == doctest::Approx(base.s_ren).epsilon(1e-9));
    CHECK(other.s_total == doctest::Approx(base.s_total).epsilon(1e-9));
    CHECK(other.x_term == doctest::Approx(base.x_term).epsilon(1e-9));
    // The action carries no factor of g.
    auto cg = c;
    cg.params.g = 3.0;
    CHECK(action_renormalized(e, cg).s_ren == base.s_ren);
}

TEST_CASE("counterterm") {
    const auto g = grid(32, 0.5, 1.5);
    auto c = config(0.1, 3, g.tau);
    ActionEvaluator ev(c, g);
    CHECK(ev.counterterm() == doctest::Approx(4.0 * 3 * 1.5 * kernels::eval_phi(c.params, 0.0, 0.0).value).epsilon(1e-14));
    CHECK(ev.counterterm() == doctest::Approx(-4.0 * 1.5 * kernels::eval_E(c.params).value).epsilon(1e-12));
    ActionEvaluator ev0(config(0.0, 1, g.tau), g);
    CHECK(std::isnan(ev0.counterterm()));
}

TEST_CASE("Ito residual shrinks under refinement") {
    auto e = paths::sample_ensemble(grid(64, 0.25), {{0, 0, 0, 0.5, 0, 0}}, 8, {5, 0});
    const auto c = config(0.1, 2, 0.25);
    std::vector<double> rms;
    for (int level = 0; level < 3; ++level) {
        ActionEvaluator ev(c, e.grid());
        double r2 = 0.0;
        for (int p = 0; p < e.n_paths(); ++p) r2 += std::pow(ev.ito_residual(e.view(p)), 2);
        rms.push_back(std::sqrt(r2 / e.n_paths()));
        e = paths::refine(e, {6, static_cast<std::uint64_t>(level)});
    }
    CHECK(rms[1] < rms[0]);
    CHECK(rms[2] < rms[1]);
}

TEST_CASE("X obeys the Coulomb bound pathwise") {
    const auto g = grid(128, 0.5);
    const auto e = paths::sample_ensemble(g, {{0, 0, 0, 0.3, 0, 0}}, 50, {7, 0});
    const double a = kernels::coulomb_bound_constant(1.0);
    for (double eps : {0.0, 0.1}) {
        ActionEvaluator ev(config(eps, 2, g.tau), g);
        for (int p = 0; p < e.n_paths(); ++p)
            CHECK(std::fabs(ev.x_term(e.view(p))) <= 4.0 * a * ev.coulomb_integral(e.view(p)));
    }
}

TEST_CASE("routes and preconditions") {
    const auto g = grid(32, 0.5);
    const auto e = paths::sample_ensemble(g, {{0, 0, 0}}, 1, {8, 0});
    auto naive = config(0.0, 1, g.tau);
    naive.route = Route::naive;
    CHECK_THROWS_AS(naive.validate(g), RouteForbidden);
    CHECK_THROWS_AS(action_naive(e, config(0.0, 1, g.tau)), RouteForbidden);
    CHECK_THROWS_AS(ito_residual(e, config(0.0, 1, g.tau)), RouteForbidden);
    auto scaled = config(0.0, 1, g.tau);
    scaled.scaled = true;
    scaled.params.dispersion = kernels::Dispersion::massive;
    scaled.params.nu = 1.0;
    scaled.params.lambda = 0.0;
    CHECK_THROWS_AS(term_Z(e, scaled) + ActionEvaluator(scaled, g).s_od(e.view(0)), RouteForbidden);
    scaled.route = Route::naive;
    CHECK_THROWS_AS(scaled.validate(g), RouteForbidden);
    CHECK_THROWS_AS(config(0.1, 1, 3.0).validate(g), InvalidGrid);

    auto low = config(5e-5, 1, g.tau);
    low.route = Route::naive;
    CHECK(action_renormalized(e, low).naive_below_floor);
}

TEST_CASE("zero-eps renormalized action is finite") {
    const auto g = grid(128, 2.0);
    const auto e = paths::sample_ensemble(g, {{0, 0, 0, 0.5, 0, 0}}, 4, {9, 0});
    ActionEvaluator ev(config(0.0, 2, 2.0), g);
    for (int p = 0; p < e.n_paths(); ++p) {
        const auto b = ev.renormalized(e.view(p));
        CHECK(std::isfinite(b.s_ren));
        CHECK(std::isnan(b.s_dd));
    }
}

TEST_CASE("tabulated and direct kernels give the same action") {
    const auto g = grid(16, 0.5);
    const auto e = paths::sample_ensemble(g, {{0, 0, 0, 0.5, 0, 0}}, 2, {10, 0});
    auto tab = config(0.1, 2, g.tau);
    auto dir = tab;
    dir.mode = KernelMode::direct;
    ActionEvaluator a(tab, g), b(dir, g);
    for (int p = 0; p < e.n_paths(); ++p) {
        const auto x = a.renormalized(e.view(p)), y = b.renormalized(e.view(p));
        CHECK(x.s_dd == doctest::Approx(y.s_dd).epsilon(1e-4));
        CHECK(x.s_od == doctest::Approx(y.s_od).epsilon(1e-4));
        CHECK(x.x_term == doctest::Approx(y.x_term).epsilon(1e-4));
        CHECK(x.y_term == doctest::Approx(y.y_term).epsilon(1e-4).scale(std::fabs(x.s_dd)));
        CHECK(x.z_term == doctest::Approx(y.z_term).epsilon(1e-4));
    }
}

TEST_CASE("drift process") {
    const auto g = grid(32, 0.5);
    const auto e = paths::sample_ensemble(g, {{0, 0, 0, 0.5, 0, 0}}, 1, {11, 0});
    ActionEvaluator ev(config(0.1, 2, g.tau), g);
    const auto d = ev.drift(e.view(0));
    CHECK(d.n_times == 32);
    CHECK(d.values.size() == 32u * 2 * 3);
    // No earlier times contribute at the first node.
    for (int c = 0; c < 3; ++c) CHECK(d.at(0, 0)[c] == 0.0);
    CHECK(d.l2_norm_squared(g.dt()) > 0.0);
}
