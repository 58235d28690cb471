#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nelson/action.hpp"
#include "nelson/estimator.hpp"
#include "nelson/katoclass.hpp"
#include "nelson/kernels.hpp"
#include "nelson/paths.hpp"
#include "nelson/rng.hpp"

namespace nelson::cli {

using Json = nlohmann::ordered_json;

struct PacketConfig {
    std::vector<double> center;
    double width = 1.0;
};

struct PotentialConfig {
    std::string kind = "zero";  // zero | bounded_well | harmonic | yukawa_pairwise | pairwise_power
    double depth = 0.0;
    double width = 1.0;
    double delta = 0.0;
    double g = 0.0;
    double nu = 0.0;
    double exponent = 1.0;
    double coupling = 1.0;
};

struct KernelsTableConfig {
    std::vector<double> eps{0.1};
    std::vector<double> x{0.5, 1.0, 2.0};
    std::vector<double> t{0.0, 0.5};
};

struct RenormSweepConfig {
    std::vector<double> eps{0.1, 0.01, 0.001};
    int n_paths = 32;
    std::vector<double> start;  // 3N coordinates; empty means particle i at (0.5 i, 0, 0)
};

struct ItoCheckConfig {
    double eps = 0.1;
    int base_steps = 64;
    int levels = 4;
    int n_paths = 32;
    double slope_min = 0.4;
    double slope_max = 0.6;
    std::vector<double> start;
};

struct SemigroupConfig {
    PacketConfig f, h;
    PotentialConfig potential;
    int n_paths = 1000;
    std::string weighting = "renormalized";
    std::vector<double> eps;       // empty means model.eps
    std::vector<double> horizons;  // empty means grid.t_horizon
};

struct YukawaSweepConfig {
    PacketConfig f, h;
    PotentialConfig potential;
    std::vector<double> kappas{1, 2, 4, 8, 16, 32, 64};
    int n_paths = 200;
    std::vector<double> kernel_x{0.5, 1.0, 2.0, 3.0};
};

struct KatoPotentialConfig {
    std::string form = "power";  // power | gaussian_well
    double exponent = 1.0;
    double coupling = 1.0;
    double depth = 1.0;
    double width = 1.0;
    int dim = 3;
};

struct KatoConfig {
    std::vector<KatoPotentialConfig> potentials{KatoPotentialConfig{}};
    std::vector<double> t_list{0.0625, 0.125, 0.25, 0.5, 1.0};
    int n_paths = 1000;
    int n_starts = 27;
    std::vector<double> beta_list{0.0, 0.5, 1.0};
    std::vector<double> tau_list{0.25, 0.5, 1.0};
    int n_steps = 1024;
};

struct RunConfig {
    kernels::ModelParams model;
    kernels::QuadratureSpec quad;
    paths::TimeGrid grid;
    double tau = 1.0;
    std::string route = "decomposed";
    std::string kernel_mode = "table";
    RngSpec rng{1, 0};
    unsigned threads = 0;

    KernelsTableConfig kernels_table;
    RenormSweepConfig renorm_sweep;
    ItoCheckConfig ito_check;
    SemigroupConfig semigroup;
    YukawaSweepConfig yukawa_sweep;
    KatoConfig kato;

    action::ActionConfig action_config() const;
};

// Strict parse: unknown keys, wrong types and invalid enum names throw ConfigError.
RunConfig parse_config(const Json& j);
// Fully specified snapshot including defaults; parse_config(to_json(c)) reproduces c.
Json to_json(const RunConfig& c);

Json load_json_file(const std::string& path);

estimator::TestFunction make_packet(const PacketConfig& p, int dim);
estimator::Potential make_potential(const PotentialConfig& p, int n_particles);
kato::RadialPotentialSpec make_kato_potential(const KatoPotentialConfig& p);

}  // namespace nelson::cli
