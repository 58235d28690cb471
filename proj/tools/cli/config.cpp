#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "nelson/errors.hpp"

namespace nelson::cli {

namespace {

bool is_non_negative_integer(const Json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Object reader that records which keys were consumed; finish() rejects the rest.
class Reader {
public:
    Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json* child(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string& key, double& out) {
        if (const Json* v = child(key)) {
            if (!v->is_number()) throw ConfigError(path(key) + " must be a number");
            out = v->get<double>();
        }
    }

    void integer(const std::string& key, int& out) {
        if (const Json* v = child(key)) {
            if (!v->is_number_integer()) throw ConfigError(path(key) + " must be an integer");
            out = v->get<int>();
        }
    }

    void unsigned_int(const std::string& key, std::uint64_t& out) {
        if (const Json* v = child(key)) {
            if (!is_non_negative_integer(*v)) throw ConfigError(path(key) + " must be a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }

    void string(const std::string& key, std::string& out, std::initializer_list<const char*> allowed) {
        if (const Json* v = child(key)) {
            if (!v->is_string()) throw ConfigError(path(key) + " must be a string");
            out = v->get<std::string>();
            for (const char* a : allowed)
                if (out == a) return;
            std::ostringstream os;
            os << path(key) << " has unknown value '" << out << "' (allowed:";
            for (const char* a : allowed) os << ' ' << a;
            os << ')';
            throw ConfigError(os.str());
        }
    }

    void numbers(const std::string& key, std::vector<double>& out) {
        if (const Json* v = child(key)) {
            if (!v->is_array()) throw ConfigError(path(key) + " must be an array of numbers");
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number()) throw ConfigError(path(key) + " must be an array of numbers");
                out.push_back(e.get<double>());
            }
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key " + path(it.key()));
    }

    std::string path(const std::string& key) const { return where_ + "." + key; }

private:
    const Json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void read_packet(const Json& j, const std::string& where, PacketConfig& p) {
    Reader r(j, where);
    r.numbers("center", p.center);
    r.number("width", p.width);
    r.finish();
}

void read_potential(const Json& j, const std::string& where, PotentialConfig& p) {
    Reader r(j, where);
    r.string("kind", p.kind, {"zero", "bounded_well", "harmonic", "yukawa_pairwise", "pairwise_power"});
    r.number("depth", p.depth);
    r.number("width", p.width);
    r.number("delta", p.delta);
    r.number("g", p.g);
    r.number("nu", p.nu);
    r.number("exponent", p.exponent);
    r.number("coupling", p.coupling);
    r.finish();
}

Json packet_json(const PacketConfig& p) { return Json{{"center", p.center}, {"width", p.width}}; }

Json potential_json(const PotentialConfig& p) {
    return Json{{"kind", p.kind},   {"depth", p.depth}, {"width", p.width},       {"delta", p.delta},
                {"g", p.g},         {"nu", p.nu},       {"exponent", p.exponent}, {"coupling", p.coupling}};
}

const char* dispersion_name(kernels::Dispersion d) { return d == kernels::Dispersion::massive ? "massive" : "massless"; }
const char* norm_name(kernels::FourierNorm n) {
    return n == kernels::FourierNorm::inverse_cube_two_pi ? "inverse_cube_two_pi" : "none";
}
const char* policy_name(kernels::RMaxPolicy p) {
    return p == kernels::RMaxPolicy::max_literal ? "max_literal" : "min_active";
}

}  // namespace

action::ActionConfig RunConfig::action_config() const {
    action::ActionConfig c;
    c.params = model;
    c.quad = quad;
    c.tau = tau;
    c.route = route == "naive" ? action::Route::naive : action::Route::decomposed;
    c.mode = kernel_mode == "direct" ? action::KernelMode::direct : action::KernelMode::table;
    return c;
}

RunConfig parse_config(const Json& j) {
    RunConfig c;
    Reader top(j, "config");

    if (const Json* m = top.child("model")) {
        Reader r(*m, "model");
        r.number("eps", c.model.eps);
        r.number("lambda", c.model.lambda);
        r.number("g", c.model.g);
        r.integer("n_particles", c.model.n_particles);
        r.number("nu", c.model.nu);
        r.number("kappa", c.model.kappa);
        std::string disp = dispersion_name(c.model.dispersion), norm = norm_name(c.model.fourier_norm);
        r.string("dispersion", disp, {"massless", "massive"});
        r.string("fourier_norm", norm, {"none", "inverse_cube_two_pi"});
        c.model.dispersion = disp == "massive" ? kernels::Dispersion::massive : kernels::Dispersion::massless;
        c.model.fourier_norm =
            norm == "inverse_cube_two_pi" ? kernels::FourierNorm::inverse_cube_two_pi : kernels::FourierNorm::none;
        r.finish();
    }
    if (const Json* q = top.child("quadrature")) {
        Reader r(*q, "quadrature");
        r.number("rel_tol", c.quad.rel_tol);
        std::string policy = policy_name(c.quad.r_max_policy);
        r.string("r_max_policy", policy, {"min_active", "max_literal"});
        c.quad.r_max_policy = policy == "max_literal" ? kernels::RMaxPolicy::max_literal : kernels::RMaxPolicy::min_active;
        r.number("oscillation_panel", c.quad.oscillation_panel);
        r.number("small_x_threshold", c.quad.small_x_threshold);
        r.integer("max_panels", c.quad.max_panels);
        r.integer("euler_depth", c.quad.euler_depth);
        r.integer("max_intervals", c.quad.max_intervals);
        r.finish();
    }
    if (const Json* g = top.child("grid")) {
        Reader r(*g, "grid");
        r.number("t_horizon", c.grid.t_horizon);
        r.integer("n_steps", c.grid.n_steps);
        r.finish();
    }
    if (const Json* a = top.child("action")) {
        Reader r(*a, "action");
        r.number("tau", c.tau);
        r.string("route", c.route, {"naive", "decomposed"});
        r.string("kernel_mode", c.kernel_mode, {"table", "direct"});
        r.finish();
    }
    if (const Json* g = top.child("rng")) {
        Reader r(*g, "rng");
        r.unsigned_int("seed", c.rng.seed);
        r.unsigned_int("stream_id", c.rng.stream_id);
        r.finish();
    }
    if (const Json* t = top.child("threads")) {
        if (!is_non_negative_integer(*t)) throw ConfigError("config.threads must be a non-negative integer");
        c.threads = t->get<unsigned>();
    }

    if (const Json* s = top.child("kernels_table")) {
        Reader r(*s, "kernels_table");
        r.numbers("eps", c.kernels_table.eps);
        r.numbers("x", c.kernels_table.x);
        r.numbers("t", c.kernels_table.t);
        r.finish();
    }
    if (const Json* s = top.child("renorm_sweep")) {
        Reader r(*s, "renorm_sweep");
        r.numbers("eps", c.renorm_sweep.eps);
        r.integer("n_paths", c.renorm_sweep.n_paths);
        r.numbers("start", c.renorm_sweep.start);
        r.finish();
    }
    if (const Json* s = top.child("ito_check")) {
        Reader r(*s, "ito_check");
        r.number("eps", c.ito_check.eps);
        r.integer("base_steps", c.ito_check.base_steps);
        r.integer("levels", c.ito_check.levels);
        r.integer("n_paths", c.ito_check.n_paths);
        r.number("slope_min", c.ito_check.slope_min);
        r.number("slope_max", c.ito_check.slope_max);
        r.numbers("start", c.ito_check.start);
        r.finish();
    }
    if (const Json* s = top.child("semigroup")) {
        Reader r(*s, "semigroup");
        if (const Json* f = r.child("f")) read_packet(*f, "semigroup.f", c.semigroup.f);
        if (const Json* h = r.child("h")) read_packet(*h, "semigroup.h", c.semigroup.h);
        if (const Json* p = r.child("potential")) read_potential(*p, "semigroup.potential", c.semigroup.potential);
        r.integer("n_paths", c.semigroup.n_paths);
        r.string("weighting", c.semigroup.weighting, {"renormalized", "unrenormalized"});
        r.numbers("eps", c.semigroup.eps);
        r.numbers("horizons", c.semigroup.horizons);
        r.finish();
    }
    if (const Json* s = top.child("yukawa_sweep")) {
        Reader r(*s, "yukawa_sweep");
        if (const Json* f = r.child("f")) read_packet(*f, "yukawa_sweep.f", c.yukawa_sweep.f);
        if (const Json* h = r.child("h")) read_packet(*h, "yukawa_sweep.h", c.yukawa_sweep.h);
        if (const Json* p = r.child("potential")) read_potential(*p, "yukawa_sweep.potential", c.yukawa_sweep.potential);
        r.numbers("kappas", c.yukawa_sweep.kappas);
        r.integer("n_paths", c.yukawa_sweep.n_paths);
        r.numbers("kernel_x", c.yukawa_sweep.kernel_x);
        r.finish();
    }
    if (const Json* s = top.child("kato")) {
        Reader r(*s, "kato");
        if (const Json* list = r.child("potentials")) {
            if (!list->is_array()) throw ConfigError("kato.potentials must be an array");
            c.kato.potentials.clear();
            for (std::size_t i = 0; i < list->size(); ++i) {
                KatoPotentialConfig p;
                Reader pr((*list)[i], "kato.potentials[" + std::to_string(i) + "]");
                pr.string("form", p.form, {"power", "gaussian_well"});
                pr.number("exponent", p.exponent);
                pr.number("coupling", p.coupling);
                pr.number("depth", p.depth);
                pr.number("width", p.width);
                pr.integer("dim", p.dim);
                pr.finish();
                c.kato.potentials.push_back(p);
            }
        }
        r.numbers("t_list", c.kato.t_list);
        r.integer("n_paths", c.kato.n_paths);
        r.integer("n_starts", c.kato.n_starts);
        r.numbers("beta_list", c.kato.beta_list);
        r.numbers("tau_list", c.kato.tau_list);
        r.integer("n_steps", c.kato.n_steps);
        r.finish();
    }
    top.finish();

    try {
        c.model.validate();
        c.grid.tau = c.tau;
        c.grid.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return c;
}

Json to_json(const RunConfig& c) {
    Json j;
    j["model"] = Json{{"eps", c.model.eps},
                      {"lambda", c.model.lambda},
                      {"g", c.model.g},
                      {"n_particles", c.model.n_particles},
                      {"nu", c.model.nu},
                      {"kappa", c.model.kappa},
                      {"dispersion", dispersion_name(c.model.dispersion)},
                      {"fourier_norm", norm_name(c.model.fourier_norm)}};
    j["quadrature"] = Json{{"rel_tol", c.quad.rel_tol},
                           {"r_max_policy", policy_name(c.quad.r_max_policy)},
                           {"oscillation_panel", c.quad.oscillation_panel},
                           {"small_x_threshold", c.quad.small_x_threshold},
                           {"max_panels", c.quad.max_panels},
                           {"euler_depth", c.quad.euler_depth},
                           {"max_intervals", c.quad.max_intervals}};
    j["grid"] = Json{{"t_horizon", c.grid.t_horizon}, {"n_steps", c.grid.n_steps}};
    j["action"] = Json{{"tau", c.tau}, {"route", c.route}, {"kernel_mode", c.kernel_mode}};
    j["rng"] = Json{{"seed", c.rng.seed}, {"stream_id", c.rng.stream_id}};
    j["threads"] = c.threads;
    j["kernels_table"] = Json{{"eps", c.kernels_table.eps}, {"x", c.kernels_table.x}, {"t", c.kernels_table.t}};
    j["renorm_sweep"] =
        Json{{"eps", c.renorm_sweep.eps}, {"n_paths", c.renorm_sweep.n_paths}, {"start", c.renorm_sweep.start}};
    j["ito_check"] = Json{{"eps", c.ito_check.eps},           {"base_steps", c.ito_check.base_steps},
                          {"levels", c.ito_check.levels},     {"n_paths", c.ito_check.n_paths},
                          {"slope_min", c.ito_check.slope_min}, {"slope_max", c.ito_check.slope_max},
                          {"start", c.ito_check.start}};
    j["semigroup"] = Json{{"f", packet_json(c.semigroup.f)},
                          {"h", packet_json(c.semigroup.h)},
                          {"potential", potential_json(c.semigroup.potential)},
                          {"n_paths", c.semigroup.n_paths},
                          {"weighting", c.semigroup.weighting},
                          {"eps", c.semigroup.eps},
                          {"horizons", c.semigroup.horizons}};
    j["yukawa_sweep"] = Json{{"f", packet_json(c.yukawa_sweep.f)},
                             {"h", packet_json(c.yukawa_sweep.h)},
                             {"potential", potential_json(c.yukawa_sweep.potential)},
                             {"kappas", c.yukawa_sweep.kappas},
                             {"n_paths", c.yukawa_sweep.n_paths},
                             {"kernel_x", c.yukawa_sweep.kernel_x}};
    Json pots = Json::array();
    for (const auto& p : c.kato.potentials)
        pots.push_back(Json{{"form", p.form},
                            {"exponent", p.exponent},
                            {"coupling", p.coupling},
                            {"depth", p.depth},
                            {"width", p.width},
                            {"dim", p.dim}});
    j["kato"] = Json{{"potentials", pots},          {"t_list", c.kato.t_list},       {"n_paths", c.kato.n_paths},
                     {"n_starts", c.kato.n_starts}, {"beta_list", c.kato.beta_list}, {"tau_list", c.kato.tau_list},
                     {"n_steps", c.kato.n_steps}};
    return j;
}

Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

estimator::TestFunction make_packet(const PacketConfig& p, int dim) {
    std::vector<double> center = p.center.empty() ? std::vector<double>(dim, 0.0) : p.center;
    if (static_cast<int>(center.size()) != dim)
        throw ConfigError("packet center needs " + std::to_string(dim) + " coordinates");
    return estimator::TestFunction::gaussian(center, p.width);
}

estimator::Potential make_potential(const PotentialConfig& p, int n_particles) {
    if (p.kind == "bounded_well") return estimator::Potential::bounded_well(p.depth, p.width);
    if (p.kind == "harmonic") return estimator::Potential::harmonic(p.delta);
    if (p.kind == "yukawa_pairwise") return estimator::Potential::yukawa_pairwise(p.g, p.nu);
    if (p.kind == "pairwise_power") return kato::lift_pairwise(kato::RadialPotentialSpec::power(p.exponent, 3, p.coupling), n_particles);
    return estimator::Potential::zero();
}

kato::RadialPotentialSpec make_kato_potential(const KatoPotentialConfig& p) {
    if (p.form == "gaussian_well") {
        const double depth = p.depth, width = p.width;
        return kato::RadialPotentialSpec::bounded(
            [depth, width](double r) { return -depth * std::exp(-r * r / (2.0 * width * width)); }, std::fabs(depth),
            p.dim);
    }
    return kato::RadialPotentialSpec::power(p.exponent, p.dim, p.coupling);
}

}  // namespace nelson::cli
