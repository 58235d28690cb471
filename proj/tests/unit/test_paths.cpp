#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "nelson/errors.hpp"
#include "nelson/estimator.hpp"
#include "nelson/paths.hpp"
#include "nelson/rng.hpp"

using namespace nelson;
using namespace nelson::paths;

namespace {

TimeGrid grid(int m, double t = 1.0, double tau = 1.0) {
    TimeGrid g;
    g.t_horizon = t;
    g.n_steps = m;
    g.tau = tau;
    return g;
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using Block = std::array<std::uint32_t, 4>;
    CHECK(Philox(0, 0).block(0) == Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox(~0ull, ~0ull).block(~0ull) == Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox(0x299f31d0a4093822ull, 0x0370734413198a2eull).block(0x85a308d3243f6a88ull) ==
          Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("uniform and normal variates") {
    Philox gen(5, 7);
    estimator::RunningStats u, n;
    for (int i = 0; i < 200000; ++i) {
        const double x = gen.uniform();
        REQUIRE(x > 0.0);
        REQUIRE(x < 1.0);
        u.push(x);
        n.push(gen.normal());
    }
    CHECK(u.mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(u.variance() == doctest::Approx(1.0 / 12.0).epsilon(0.01));
    CHECK(std::fabs(n.mean) < 0.01);
    CHECK(n.variance() == doctest::Approx(1.0).epsilon(0.01));
    Philox a(5, 7), b(5, 7), c(5, 8);
    CHECK(a.normal() == b.normal());
    CHECK(Philox(5, 7).uniform() != c.uniform());
}

TEST_CASE("time grid") {
    const auto g = grid(8, 2.0, 1.0);
    CHECK(g.dt() == 0.5);
    CHECK(g.time(0) == -2.0);
    CHECK(g.time(8) == 2.0);
    CHECK(g.tau_steps() == 2);
    CHECK_FALSE(g.full_window());
    CHECK(grid(8, 2.0, 4.0).full_window());
    CHECK(clamp_time(g, 5.0) == 2.0);
    CHECK(clamp_time(g, -5.0) == -2.0);
    CHECK(clamp_time(g, 0.3) == 0.3);
    CHECK_THROWS_AS(grid(6).validate(), InvalidGrid);
    CHECK_THROWS_AS(grid(8, 1.0, 2.5).validate(), InvalidGrid);
    CHECK_THROWS_AS(grid(8, 1.0, 0.0).validate(), InvalidGrid);
    CHECK_THROWS_AS(grid(8, 0.0, 0.0).validate(), InvalidGrid);
    CHECK_NOTHROW(grid(8, 1.0, 2.0).validate());
}

TEST_CASE("ensembles are reproducible and independent of threading") {
    const auto g = grid(64);
    const std::vector<std::vector<double>> starts{{0, 0, 0, 1, 0, 0}};
    const auto a = sample_ensemble(g, starts, 33, {4, 10}, 1);
    const auto b = sample_ensemble(g, starts, 33, {4, 10}, 4);
    CHECK(a.positions() == b.positions());
    CHECK(a.n_particles() == 2);
    CHECK(a.n_times() == 65);
    // Path p is the single path drawn from stream stream_id + p.
    const auto single = sample_ensemble(g, starts, 1, {4, 13});
    CHECK(std::vector<double>(single.path(0).begin(), single.path(0).end()) ==
          std::vector<double>(a.path(3).begin(), a.path(3).end()));
    const auto one = a.extract(3);
    CHECK(one.positions() == single.positions());
    for (int c = 0; c < 6; ++c) CHECK(a.frame(5, 0)[c] == starts[0][c]);
    CHECK_THROWS_AS(sample_ensemble(g, {{0, 0}}, 2, {1, 0}), InvalidGrid);
}

TEST_CASE("increments have variance dt") {
    const auto g = grid(16, 1.0, 1.0);
    const auto e = sample_ensemble(g, {{0, 0, 0}}, 4000, {8, 0});
    estimator::RunningStats s;
    for (int p = 0; p < e.n_paths(); ++p)
        for (int m = 0; m < g.n_steps; ++m)
            for (int c = 0; c < 3; ++c) s.push(e.at(p, m + 1, 0)[c] - e.at(p, m, 0)[c]);
    CHECK(std::fabs(s.mean) < 5.0 * std::sqrt(g.dt() / s.count));
    CHECK(s.variance() == doctest::Approx(g.dt()).epsilon(0.02));
}

TEST_CASE("bridge refinement") {
    const auto g = grid(8, 1.0, 0.5);
    const auto coarse = sample_ensemble(g, {{0, 0, 0}}, 3000, {2, 0});
    const auto fine = refine(coarse, {3, 0}, 1);
    CHECK(fine.grid().n_steps == 16);
    CHECK(fine.grid().tau == g.tau);
    CHECK(fine.refinement_depth() == 1);
    CHECK(refine(coarse, {3, 0}, 3).positions() == fine.positions());
    estimator::RunningStats mid;
    for (int p = 0; p < coarse.n_paths(); ++p)
        for (int m = 0; m <= 8; ++m) {
            for (int c = 0; c < 3; ++c) REQUIRE(fine.at(p, 2 * m, 0)[c] == coarse.at(p, m, 0)[c]);
            if (m < 8)
                for (int c = 0; c < 3; ++c)
                    mid.push(fine.at(p, 2 * m + 1, 0)[c] - 0.5 * (coarse.at(p, m, 0)[c] + coarse.at(p, m + 1, 0)[c]));
        }
    // Bridge midpoint variance is dt_coarse / 4.
    CHECK(mid.variance() == doctest::Approx(g.dt() / 4.0).epsilon(0.03));
}

TEST_CASE("dump and restore") {
    auto e = sample_ensemble(grid(16, 0.5, 0.25), {{0, 0, 0, 1, 1, 1}}, 5, {9, 2});
    e = refine(e, {10, 0});
    std::stringstream buf;
    dump(e, buf);
    const auto r = restore(buf);
    CHECK(r.positions() == e.positions());
    CHECK(r.grid().n_steps == 32);
    CHECK(r.grid().tau == 0.25);
    CHECK(r.lineage().size() == 2);
    CHECK(r.lineage()[1].seed == 10);
    std::stringstream bad("not a dump at all");
    CHECK_THROWS_AS(restore(bad), InvalidGrid);
    std::string s = buf.str();
    std::stringstream cut(s.substr(0, s.size() / 2));
    CHECK_THROWS_AS(restore(cut), InvalidGrid);
}
