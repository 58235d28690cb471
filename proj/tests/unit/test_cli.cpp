#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "nelson/errors.hpp"
#include "oracle.hpp"

using namespace nelson;
using namespace nelson::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("nelson_test_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

}  // namespace

TEST_CASE("defaults parse from an empty object") {
    const auto c = parse_config(Json::object());
    CHECK(c.model.eps == 0.1);
    CHECK(c.route == "decomposed");
    CHECK(c.rng.seed == 1);
    CHECK(command_names().size() == 6);
}

TEST_CASE("strict parsing") {
    CHECK_THROWS_AS(parse_config(Json{{"modle", Json::object()}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json{{"model", {{"epsilon", 0.1}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json{{"model", {{"eps", "small"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json{{"model", {{"dispersion", "relativistic"}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json{{"rng", {{"seed", -3}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json{{"grid", {{"n_steps", 1.5}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json{{"semigroup", {{"potential", {{"kind", "square"}}}}}}), ConfigError);
    CHECK_THROWS_AS(parse_config(Json::array()), ConfigError);
    CHECK_NOTHROW(parse_config(Json{{"rng", {{"seed", 3}}}, {"threads", 2}}));
}

TEST_CASE("snapshot round trip") {
    const Json in = {{"model", {{"eps", 0.01}, {"n_particles", 2}, {"dispersion", "massive"}, {"nu", 1.0}}},
                     {"grid", {{"t_horizon", 0.5}, {"n_steps", 128}}},
                     {"action", {{"tau", 1.0}, {"kernel_mode", "direct"}}},
                     {"rng", {{"seed", 99}, {"stream_id", 7}}},
                     {"semigroup", {{"potential", {{"kind", "harmonic"}, {"delta", 0.5}}}, {"horizons", {0.5, 1.0}}}},
                     {"kato", {{"potentials", {{{"form", "gaussian_well"}, {"depth", 2.0}}}}}}};
    const auto c = parse_config(in);
    const Json snap = to_json(c);
    CHECK(to_json(parse_config(snap)) == snap);
    CHECK(snap["model"]["dispersion"] == "massive");
    CHECK(snap["rng"]["stream_id"] == 7);
    CHECK(c.action_config().mode == action::KernelMode::direct);
    CHECK(c.action_config().tau == 1.0);
}

TEST_CASE("factories") {
    const auto f = make_packet(PacketConfig{{}, 0.8}, 6);
    CHECK(f.dim() == 6);
    CHECK(f.center() == std::vector<double>(6, 0.0));
    CHECK_THROWS_AS(make_packet(PacketConfig{{0, 0}, 1.0}, 3), ConfigError);
    PotentialConfig pc;
    pc.kind = "pairwise_power";
    pc.exponent = 1.0;
    CHECK(make_potential(pc, 2).singular());
    pc.exponent = 2.0;
    CHECK_THROWS_AS(make_potential(pc, 2), PreflightFailed);
    KatoPotentialConfig kc;
    kc.form = "gaussian_well";
    CHECK(kato::kato_criterion(make_kato_potential(kc)).pass);
}

TEST_CASE("FNV-1a digests") {
    const auto dir = scratch_dir("digest");
    fs::create_directories(dir);
    std::ofstream(dir / "empty").close();
    std::ofstream(dir / "a") << "a";
    CHECK(file_digest(dir / "empty") == "cbf29ce484222325");
    CHECK(file_digest(dir / "a") == "af63dc4c8601ec8c");
    fs::remove_all(dir);
}

TEST_CASE("kernels_table rows match the oracle and flag singular points") {
    const auto dir = scratch_dir("kernels");
    const Json cfg = {{"model", {{"lambda", 1.0}}},
                      {"kernels_table", {{"eps", {0.5, 0.0}}, {"x", {0.0, 0.3, 1.2}}, {"t", {0.0, 0.2}}}}};
    const auto s = execute({"kernels_table", cfg, dir});
    CHECK(s.result.exit_code == 0);
    const auto rows = read_csv(dir / "kernels_table.csv");
    REQUIRE(rows.size() == 13);
    CHECK(rows[0][4] == "W[momentum^2]");
    int checked = 0, singular = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double eps = std::stod(rows[i][0]), x = std::stod(rows[i][2]), t = std::stod(rows[i][3]);
        if (rows[i][8] == "SingularPoint") {
            ++singular;
            CHECK(eps == 0.0);
            CHECK(x == 0.0);
            CHECK(t == 0.0);
            continue;
        }
        CHECK(rows[i][8].empty());
        if (eps > 0.0 && checked < 3 && x > 0.0) {
            kernels::ModelParams p;
            p.eps = eps;
            const double w = oracle::oracle_kernel_3d(oracle::Which::W, p, {x, 0, 0}, t).value[0];
            const double phi = oracle::oracle_kernel_3d(oracle::Which::phi, p, {0, -x, 0}, t).value[0];
            CHECK(std::stod(rows[i][4]) == doctest::Approx(w).epsilon(5e-3));
            CHECK(std::stod(rows[i][5]) == doctest::Approx(phi).epsilon(5e-3));
            ++checked;
        }
    }
    CHECK(checked == 3);
    CHECK(singular == 1);
    CHECK(fs::exists(dir / "plot_kernels_table.py"));
    fs::remove_all(dir);
}

TEST_CASE("manifest rerun is bit-identical") {
    const auto a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
    const Json cfg = {{"model", {{"eps", 0.1}}},
                      {"grid", {{"t_horizon", 0.5}, {"n_steps", 16}}},
                      {"action", {{"tau", 1.0}}},
                      {"semigroup", {{"f", {{"center", {0.0, 0.0, 0.0}}}}, {"h", {{"center", {0.2, 0.0, 0.0}}}},
                                     {"n_paths", 64}, {"eps", {0.1, 0.01}}}}};
    RunRequest first{"semigroup", cfg, a};
    first.seed = 4242;
    const auto one = execute(first);
    CHECK(one.manifest["rng"]["seed"] == 4242);
    CHECK(one.manifest["manifest_version"] == kManifestVersion);
    Json loaded = load_json_file((a / "manifest.json").string());
    const auto two = execute({"semigroup", loaded, b});
    REQUIRE(one.result.outputs == two.result.outputs);
    for (const auto& f : one.result.outputs) CHECK(file_digest(a / f) == file_digest(b / f));
    CHECK(one.manifest["outputs"] == two.manifest["outputs"]);
    CHECK_THROWS_AS(execute({"kato", loaded, b}), ConfigError);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("command preconditions") {
    const auto dir = scratch_dir("pre");
    CHECK_THROWS_AS(execute({"ito_check", Json{{"ito_check", {{"eps", 0.0}}}}, dir}), RouteForbidden);
    CHECK_THROWS_AS(execute({"no_such_command", Json::object(), dir}), ConfigError);
    fs::remove_all(dir);
}
