#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>

#include "nelson/errors.hpp"
#include "nelson/parallel.hpp"

namespace nelson::cli {

namespace fs = std::filesystem;

namespace {


std::string num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string num(int v) { return std::to_string(v); }

std::string join_coords(const std::vector<double>& x) {
    std::string s;
    for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ";" : "") + num(x[i]);
    return s;
}

// One CSV file; the header row carries each column's physical dimension in brackets.
class Csv {
public:
    Csv(const fs::path& dir, const std::string& name, const std::vector<std::string>& header,
        std::vector<std::string>& outputs)
        : out_(dir / name) {
        if (!out_) throw ConfigError("cannot write " + (dir / name).string());
        outputs.push_back(name);
        write(header);
    }

    void write(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

void write_text(const fs::path& dir, const std::string& name, const std::string& body,
                std::vector<std::string>& outputs) {
    std::ofstream out(dir / name);
    if (!out) throw ConfigError("cannot write " + (dir / name).string());
    out << body;
    outputs.push_back(name);
}

std::string plot_script(const std::string& body) {
    return "#!/usr/bin/env python3\n"
           "import csv\n"
           "import os\n"
           "\n"
           "import matplotlib\n"
           "matplotlib.use(\"Agg\")\n"
           "import matplotlib.pyplot as plt\n\n"
           "HERE = os.path.dirname(os.path.abspath(__file__))\n\n\n"
           "def load(name):\n"
           "    with open(os.path.join(HERE, name)) as f:\n"
           "        rows = list(csv.reader(f))\n"
           "    keys = [h.split(\"[\")[0] for h in rows[0]]\n"
           "    return [dict(zip(keys, r)) for r in rows[1:]]\n\n\n" +
           body;
}

// Default start puts particle i at (0.5 i, 0, 0) so that pair kernels at eps = 0 stay finite.
std::vector<double> start_or_default(const std::vector<double>& x, int dim) {
    if (x.empty()) {
        std::vector<double> s(dim, 0.0);
        for (int i = 0; 3 * i < dim; ++i) s[3 * i] = 0.5 * i;
        return s;
    }
    if (static_cast<int>(x.size()) != dim) throw ConfigError("start needs " + std::to_string(dim) + " coordinates");
    return x;
}

// Least-squares slope of y on x with the standard error implied by independent y errors.
std::pair<double, double> ls_slope(const std::vector<double>& x, const std::vector<double>& y,
                                   const std::vector<double>& se) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    for (double v : x) mx += v / n;
    double sxx = 0.0;
    for (double v : x) sxx += (v - mx) * (v - mx);
    double slope = 0.0, var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = (x[i] - mx) / sxx;
        slope += c * y[i];
        if (!se.empty()) var += c * c * se[i] * se[i];
    }
    return {slope, std::sqrt(var)};
}

CommandResult cmd_kernels_table(const RunConfig& c, const fs::path& dir) {
    CommandResult r;
    Csv csv(dir, "kernels_table.csv",
            {"eps[length^2]", "lambda[momentum]", "x_norm[length]", "t[time]", "W[momentum^2]", "phi[momentum]",
             "grad_phi_norm[momentum^2]", "est_error[relative]", "error_code"},
            r.outputs);
    for (double eps : c.kernels_table.eps)
        for (double x : c.kernels_table.x)
            for (double t : c.kernels_table.t) {
                kernels::ModelParams p = c.model;
                p.eps = eps;
                try {
                    p.validate();
                    const auto w = kernels::eval_W(p, x, t, c.quad);
                    const auto phi = kernels::eval_phi(p, x, t, c.quad);
                    const auto g = kernels::eval_grad_phi_coeff(p, x, t, c.quad);
                    auto rel = [](const kernels::KernelValue& v) {
                        return v.value == 0.0 ? v.est_error : std::fabs(v.est_error / v.value);
                    };
                    const double err = std::max({rel(w), rel(phi), x > 0.0 ? rel(g) : 0.0});
                    csv.write({num(eps), num(p.lambda), num(x), num(t), num(w.value), num(phi.value),
                               num(std::fabs(g.value) * x), num(err), ""});
                } catch (const Error& e) {
                    csv.write({num(eps), num(p.lambda), num(x), num(t), "nan", "nan", "nan", "nan", e.code()});
                }
            }
    write_text(dir, "plot_kernels_table.py",
               plot_script("rows = load(\"kernels_table.csv\")\n"
                           "fig, ax = plt.subplots()\n"
                           "for eps in sorted({r[\"eps\"] for r in rows}, key=float):\n"
                           "    for t in sorted({r[\"t\"] for r in rows}, key=float):\n"
                           "        sel = [r for r in rows if r[\"eps\"] == eps and r[\"t\"] == t and not r[\"error_code\"]]\n"
                           "        ax.plot([float(r[\"x_norm\"]) for r in sel], [float(r[\"phi\"]) for r in sel],\n"
                           "                marker=\"o\", label=f\"eps={eps} t={t}\")\n"
                           "ax.set_xlabel(\"|x|\")\n"
                           "ax.set_ylabel(\"phi\")\n"
                           "ax.legend()\n"
                           "fig.savefig(os.path.join(HERE, \"kernels_table.png\"), dpi=120)\n"),
               r.outputs);
    return r;
}

CommandResult cmd_renorm_sweep(const RunConfig& c, const fs::path& dir) {
    CommandResult r;
    const int N = c.model.n_particles;
    const auto& cfg = c.renorm_sweep;
    if (cfg.n_paths < 2) throw ConfigError("renorm_sweep.n_paths must be >= 2");
    paths::TimeGrid grid = c.grid;
    grid.tau = c.tau;
    const auto ens = paths::sample_ensemble(grid, {start_or_default(cfg.start, 3 * N)}, cfg.n_paths, c.rng, c.threads);

    std::vector<double> eps_list = cfg.eps;
    std::sort(eps_list.begin(), eps_list.end(), std::greater<>());
    std::vector<std::vector<action::ActionBreakdown>> all;

    Csv csv(dir, "renorm_sweep.csv",
            {"eps[length^2]", "path_id[1]", "s_total[1]", "s_dd[1]", "s_od[1]", "x_term[1]", "y_term[1]",
             "z_term[1]", "s_ren[1]", "diag_counterterm[1]", "ito_residual[1]"},
            r.outputs);
    for (double eps : eps_list) {
        action::ActionConfig ac = c.action_config();
        ac.params.eps = eps;
        if (eps == 0.0) {
            ac.route = action::Route::decomposed;
            ac.tau = grid.full_window_tau();
        }
        action::ActionEvaluator ev(ac, grid);
        std::vector<action::ActionBreakdown> rows(cfg.n_paths);
        parallel_for(cfg.n_paths, c.threads, [&](std::size_t p) { rows[p] = ev.full(ens.view(static_cast<int>(p))); });
        for (int p = 0; p < cfg.n_paths; ++p) {
            const auto& b = rows[p];
            csv.write({num(eps), num(p), num(b.s_total), num(b.s_dd), num(b.s_od), num(b.x_term), num(b.y_term),
                       num(b.z_term), num(b.s_ren), num(b.diag_counterterm), num(b.ito_residual)});
        }
        all.push_back(std::move(rows));
    }

    Csv sum(dir, "renorm_sweep_summary.csv",
            {"quantity", "eps_a[length^2]", "eps_b[length^2]", "value[1]", "std_error[1]", "reference[1]"},
            r.outputs);
    std::vector<double> lx, ly, lse, pos_eps;
    for (std::size_t k = 0; k < eps_list.size(); ++k) {
        if (eps_list[k] <= 0.0) continue;
        pos_eps.push_back(eps_list[k]);
        estimator::RunningStats st;
        for (const auto& b : all[k]) st.push(b.s_total);
        lx.push_back(std::log(1.0 / eps_list[k]));
        ly.push_back(st.mean);
        lse.push_back(std::sqrt(st.variance() / st.count));
    }
    if (lx.size() >= 2) {
        const auto [slope, se] = ls_slope(lx, ly, lse);
        // Reference: 4 N T times the least-squares slope of phi_eps(0,0) over the same eps values.
        std::vector<double> phis;
        for (std::size_t k = 0; k < eps_list.size(); ++k) {
            if (eps_list[k] <= 0.0) continue;
            kernels::ModelParams p = c.model;
            p.eps = eps_list[k];
            phis.push_back(kernels::eval_phi(p, 0.0, 0.0, c.quad).value);
        }
        const double ref = 4.0 * N * grid.t_horizon * ls_slope(lx, phis, {}).first;
        const double eps_max = pos_eps.front(), eps_min = pos_eps.back();
        sum.write({"s_total_log_slope", num(eps_max), num(eps_min), num(slope), num(se), num(ref)});
        sum.write({"asymptotic_log_slope", num(eps_max), num(eps_min), num(4.0 * N * grid.t_horizon * kernels::c_log),
                   "0", "nan"});
    }
    for (std::size_t k = 0; k + 1 < eps_list.size(); ++k) {
        estimator::RunningStats st;
        for (int p = 0; p < cfg.n_paths; ++p) st.push(all[k + 1][p].s_ren - all[k][p].s_ren);
        sum.write({"s_ren_cauchy_gap", num(eps_list[k]), num(eps_list[k + 1]), num(std::fabs(st.mean)),
                   num(std::sqrt(st.variance() / st.count)), "nan"});
    }
    write_text(dir, "plot_renorm_sweep.py",
               plot_script("rows = load(\"renorm_sweep.csv\")\n"
                           "eps = sorted({r[\"eps\"] for r in rows}, key=float, reverse=True)\n"
                           "fig, ax = plt.subplots()\n"
                           "for key in (\"s_total\", \"s_ren\"):\n"
                           "    xs, ys = [], []\n"
                           "    for e in eps:\n"
                           "        vals = [float(r[key]) for r in rows if r[\"eps\"] == e and r[key] != \"nan\"]\n"
                           "        if vals and float(e) > 0:\n"
                           "            xs.append(float(e))\n"
                           "            ys.append(sum(vals) / len(vals))\n"
                           "    ax.plot(xs, ys, marker=\"o\", label=key)\n"
                           "ax.set_xscale(\"log\")\n"
                           "ax.set_xlabel(\"eps\")\n"
                           "ax.set_ylabel(\"mean action\")\n"
                           "ax.legend()\n"
                           "fig.savefig(os.path.join(HERE, \"renorm_sweep.png\"), dpi=120)\n"),
               r.outputs);
    return r;
}

CommandResult cmd_ito_check(const RunConfig& c, const fs::path& dir) {
    CommandResult r;
    const auto& cfg = c.ito_check;
    if (!(cfg.eps > 0.0)) throw RouteForbidden("the Ito check needs eps > 0");
    if (cfg.levels < 2) throw ConfigError("ito_check.levels must be >= 2");
    if (cfg.n_paths < 2) throw ConfigError("ito_check.n_paths must be >= 2");
    const int N = c.model.n_particles;
    paths::TimeGrid grid = c.grid;
    grid.n_steps = cfg.base_steps;
    grid.tau = c.tau;
    action::ActionConfig ac = c.action_config();
    ac.params.eps = cfg.eps;
    ac.route = action::Route::decomposed;

    auto ens = paths::sample_ensemble(grid, {start_or_default(cfg.start, 3 * N)}, cfg.n_paths, c.rng, c.threads);
    Csv csv(dir, "ito_check.csv",
            {"level[1]", "n_steps[1]", "dt[time]", "rms_residual[1]", "rms_s_dd[1]", "relative_residual[1]"},
            r.outputs);
    std::vector<double> ldt, lres;
    for (int level = 0; level < cfg.levels; ++level) {
        if (level > 0) {
            RngSpec bridge = c.rng;
            bridge.stream_id += static_cast<std::uint64_t>(level) << 32;
            ens = paths::refine(ens, bridge, c.threads);
        }
        action::ActionEvaluator ev(ac, ens.grid());
        std::vector<double> res(cfg.n_paths), sdd(cfg.n_paths);
        parallel_for(cfg.n_paths, c.threads, [&](std::size_t p) {
            const auto b = ev.ito_decomposition(ens.view(static_cast<int>(p)));
            res[p] = b.ito_residual;
            sdd[p] = b.s_dd;
        });
        double r2 = 0.0, d2 = 0.0;
        for (int p = 0; p < cfg.n_paths; ++p) {
            r2 += res[p] * res[p] / cfg.n_paths;
            d2 += sdd[p] * sdd[p] / cfg.n_paths;
        }
        const double rms = std::sqrt(r2), rms_dd = std::sqrt(d2), dt = ens.grid().dt();
        csv.write({num(level), num(ens.grid().n_steps), num(dt), num(rms), num(rms_dd), num(rms / rms_dd)});
        ldt.push_back(std::log(dt));
        lres.push_back(std::log(rms));
    }
    const double slope = ls_slope(ldt, lres, {}).first;
    const bool pass = slope >= cfg.slope_min && slope <= cfg.slope_max;
    Csv fit(dir, "ito_check_fit.csv", {"slope[1]", "slope_min[1]", "slope_max[1]", "pass"}, r.outputs);
    fit.write({num(slope), num(cfg.slope_min), num(cfg.slope_max), pass ? "true" : "false"});
    r.exit_code = pass ? 0 : 1;
    write_text(dir, "plot_ito_check.py",
               plot_script("rows = load(\"ito_check.csv\")\n"
                           "fig, ax = plt.subplots()\n"
                           "ax.loglog([float(r[\"dt\"]) for r in rows], [float(r[\"rms_residual\"]) for r in rows], \"o-\")\n"
                           "ax.set_xlabel(\"dt\")\n"
                           "ax.set_ylabel(\"rms residual\")\n"
                           "fig.savefig(os.path.join(HERE, \"ito_check.png\"), dpi=120)\n"),
               r.outputs);
    return r;
}

CommandResult cmd_semigroup(const RunConfig& c, const fs::path& dir) {
    CommandResult r;
    const auto& cfg = c.semigroup;
    const int dim = 3 * c.model.n_particles;
    const auto f = make_packet(cfg.f, dim);
    const auto h = make_packet(cfg.h, dim);
    const auto pot = make_potential(cfg.potential, c.model.n_particles);
    const std::vector<double> eps_list = cfg.eps.empty() ? std::vector<double>{c.model.eps} : cfg.eps;
    const std::vector<double> horizons = cfg.horizons.empty() ? std::vector<double>{c.grid.t_horizon} : cfg.horizons;
    estimator::EstimatorOptions opt;
    opt.weighting =
        cfg.weighting == "unrenormalized" ? estimator::Weighting::unrenormalized : estimator::Weighting::renormalized;
    opt.threads = c.threads;
    const bool free_case = c.model.g == 0.0 && pot.kind == estimator::Potential::Kind::zero;

    Csv csv(dir, "semigroup.csv",
            {"eps[length^2]", "t_horizon[time]", "n_steps[1]", "weighting", "mean[1]", "std_error[1]", "log_mean[1]",
             "rel_error[1]", "n_samples[1]", "n_batches[1]", "energy_proxy[energy]", "energy_proxy_error[energy]",
             "closed_form[1]", "error_code"},
            r.outputs);
    for (double eps : eps_list)
        for (double T : horizons) {
            paths::TimeGrid grid = c.grid;
            grid.t_horizon = T;
            action::ActionConfig ac = c.action_config();
            ac.params.eps = eps;
            ac.tau = std::min(c.tau, 2.0 * T);
            grid.tau = ac.tau;
            const std::string closed = free_case ? num(estimator::free_overlap(f, h, T)) : "nan";
            try {
                const auto e = estimator::semigroup_element(f, h, pot, ac, grid, cfg.n_paths, c.rng, opt);
                const bool pos = e.mean > 0.0;
                csv.write({num(eps), num(T), num(grid.n_steps), cfg.weighting, num(e.mean), num(e.std_error),
                           num(e.log_mean), num(e.rel_error), num(e.n_samples), num(e.n_batches),
                           pos ? num(-e.log_mean / (2.0 * T)) : "nan", pos ? num(e.rel_error / (2.0 * T)) : "nan",
                           closed, ""});
            } catch (const Error& err) {
                csv.write({num(eps), num(T), num(grid.n_steps), cfg.weighting, "nan", "nan", "nan", "nan", "0", "0",
                           "nan", "nan", closed, err.code()});
            }
        }
    write_text(dir, "plot_semigroup.py",
               plot_script("rows = [r for r in load(\"semigroup.csv\") if not r[\"error_code\"]]\n"
                           "fig, ax = plt.subplots()\n"
                           "for T in sorted({r[\"t_horizon\"] for r in rows}, key=float):\n"
                           "    sel = [r for r in rows if r[\"t_horizon\"] == T]\n"
                           "    ax.errorbar([float(r[\"eps\"]) for r in sel], [float(r[\"mean\"]) for r in sel],\n"
                           "                yerr=[float(r[\"std_error\"]) for r in sel], marker=\"o\", label=f\"T={T}\")\n"
                           "ax.set_xscale(\"symlog\", linthresh=1e-4)\n"
                           "ax.set_xlabel(\"eps\")\n"
                           "ax.set_ylabel(\"(f, e^{-2TH} h)\")\n"
                           "ax.legend()\n"
                           "fig.savefig(os.path.join(HERE, \"semigroup.png\"), dpi=120)\n"),
               r.outputs);
    return r;
}

CommandResult cmd_yukawa_sweep(const RunConfig& c, const fs::path& dir) {
    CommandResult r;
    const auto& cfg = c.yukawa_sweep;
    const int dim = 3 * c.model.n_particles;
    const auto f = make_packet(cfg.f, dim);
    const auto h = make_packet(cfg.h, dim);
    const auto pot = make_potential(cfg.potential, c.model.n_particles);
    estimator::EstimatorOptions opt;
    opt.threads = c.threads;
    paths::TimeGrid grid = c.grid;
    grid.tau = grid.full_window_tau();
    const auto rows = estimator::weak_coupling_compare(f, h, pot, c.model, cfg.kappas, grid, cfg.n_paths, c.rng, opt);

    Csv csv(dir, "yukawa_sweep.csv",
            {"kappa[1]", "scaled_mean[1]", "scaled_std_error[1]", "reference_mean[1]", "reference_std_error[1]",
             "gap[1]", "gap_std_error[1]"},
            r.outputs);
    for (const auto& row : rows)
        csv.write({num(row.kappa), num(row.scaled.mean), num(row.scaled.std_error), num(row.reference.mean),
                   num(row.reference.std_error), num(row.gap), num(row.gap_se)});

    Csv kc(dir, "yukawa_kernel.csv",
           {"kappa[1]", "x_norm[length]", "phi_r_exp[1]", "yukawa_constant[1]", "alt_constant_1_over_4pi[1]",
            "relative_deviation[1]"},
           r.outputs);
    kernels::ModelParams p = c.model;
    p.eps = 0.0;
    p.dispersion = kernels::Dispersion::massive;
    for (double kappa : cfg.kappas)
        for (double x : cfg.kernel_x) {
            p.kappa = kappa;
            const double v = kernels::eval_phi_scaled(p, x, 0.0, c.quad).value * x * std::exp(p.nu * x);
            kc.write({num(kappa), num(x), num(v), num(kernels::yukawa_constant), num(0.25 / std::numbers::pi),
                      num(v / kernels::yukawa_constant - 1.0)});
        }
    write_text(dir, "plot_yukawa_sweep.py",
               plot_script("rows = load(\"yukawa_sweep.csv\")\n"
                           "fig, ax = plt.subplots()\n"
                           "k = [float(r[\"kappa\"]) for r in rows]\n"
                           "ax.errorbar(k, [abs(float(r[\"gap\"])) for r in rows],\n"
                           "            yerr=[float(r[\"gap_std_error\"]) for r in rows], marker=\"o\")\n"
                           "ax.set_xscale(\"log\")\n"
                           "ax.set_yscale(\"log\")\n"
                           "ax.set_xlabel(\"kappa\")\n"
                           "ax.set_ylabel(\"|gap|\")\n"
                           "fig.savefig(os.path.join(HERE, \"yukawa_sweep.png\"), dpi=120)\n"),
               r.outputs);
    return r;
}

CommandResult cmd_kato(const RunConfig& c, const fs::path& dir) {
    CommandResult r;
    const auto& cfg = c.kato;
    Csv crit(dir, "kato_criterion.csv",
             {"potential", "r[length]", "diagnostic[1]", "verdict", "log_slope[1]", "reason"}, r.outputs);
    Csv curve(dir, "kato_mc.csv", {"potential", "t[time]", "value[1]", "std_error[1]", "argmax_start[length]"},
              r.outputs);
    Csv bound(dir, "exp_bound.csv",
              {"potential", "beta[1]", "tau[time]", "value[1]", "std_error[1]", "argmax_start[length]",
               "per_start_means[1]"},
              r.outputs);
    Csv fit(dir, "exp_bound_fit.csv", {"potential", "beta[1]", "intercept[1]", "slope[1/time]", "residual[1]"},
            r.outputs);
    kato::MonteCarloOptions mco;
    mco.n_steps = cfg.n_steps;
    mco.threads = c.threads;
    for (std::size_t k = 0; k < cfg.potentials.size(); ++k) {
        const auto spec = make_kato_potential(cfg.potentials[k]);
        const std::string name = spec.describe();
        const auto v = kato::kato_criterion(spec, c.quad);
        for (std::size_t i = 0; i < v.radii.size(); ++i)
            crit.write({name, num(v.radii[i]), num(v.diagnostic[i]), v.pass ? "pass" : "fail", num(v.log_slope), v.reason});

        RngSpec rng = c.rng;
        rng.stream_id += static_cast<std::uint64_t>(k) << 48;
        for (const auto& pt : kato::kato_mc(spec, cfg.t_list, cfg.n_paths, cfg.n_starts, rng, mco))
            curve.write({name, num(pt.t), num(pt.value), num(pt.std_error), join_coords(pt.argmax_start)});

        if (!v.pass) continue;
        std::vector<double> shifted(spec.dim, 0.0);
        shifted[0] = 0.5;
        const std::vector<std::vector<double>> starts{std::vector<double>(spec.dim, 0.0), shifted};
        std::map<double, std::vector<double>> log_values;
        for (std::size_t i = 0; i < cfg.tau_list.size(); ++i) {
            RngSpec tr = rng;
            tr.stream_id += static_cast<std::uint64_t>(i + 1) << 40;
            for (const auto& row :
                 kato::exp_bound_mc(spec, cfg.beta_list, cfg.tau_list[i], cfg.n_paths, tr, starts, mco)) {
                bound.write({name, num(row.beta), num(row.tau), num(row.value), num(row.std_error),
                             join_coords(row.argmax_start), join_coords(row.per_start)});
                log_values[row.beta].push_back(std::log(row.value));
            }
        }
        if (cfg.tau_list.size() >= 2)
            for (const auto& [beta, ys] : log_values) {
                const auto af = kato::affine_fit(cfg.tau_list, ys);
                fit.write({name, num(beta), num(af.intercept), num(af.slope), num(af.residual)});
            }
    }
    write_text(dir, "plot_kato.py",
               plot_script("rows = load(\"kato_mc.csv\")\n"
                           "fig, ax = plt.subplots()\n"
                           "for name in sorted({r[\"potential\"] for r in rows}):\n"
                           "    sel = [r for r in rows if r[\"potential\"] == name]\n"
                           "    ax.errorbar([float(r[\"t\"]) for r in sel], [float(r[\"value\"]) for r in sel],\n"
                           "                yerr=[float(r[\"std_error\"]) for r in sel], marker=\"o\", label=name)\n"
                           "ax.set_xscale(\"log\")\n"
                           "ax.set_yscale(\"log\")\n"
                           "ax.set_xlabel(\"t\")\n"
                           "ax.set_ylabel(\"sup_x E int_0^t |V(W_s)| ds\")\n"
                           "ax.legend()\n"
                           "fig.savefig(os.path.join(HERE, \"kato.png\"), dpi=120)\n"),
               r.outputs);
    return r;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"kernels_table", "renorm_sweep", "ito_check",
                                                "semigroup",     "yukawa_sweep", "kato"};
    return names;
}

CommandResult run_command(const std::string& name, const RunConfig& config, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    if (name == "kernels_table") return cmd_kernels_table(config, out_dir);
    if (name == "renorm_sweep") return cmd_renorm_sweep(config, out_dir);
    if (name == "ito_check") return cmd_ito_check(config, out_dir);
    if (name == "semigroup") return cmd_semigroup(config, out_dir);
    if (name == "yukawa_sweep") return cmd_yukawa_sweep(config, out_dir);
    if (name == "kato") return cmd_kato(config, out_dir);
    throw ConfigError("unknown command " + name);
}

std::string file_digest(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 14];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

RunSummary execute(const RunRequest& request) {
    Json config_json = request.config;
    if (config_json.is_object() && config_json.contains("manifest_version")) {
        if (!config_json.contains("config") || !config_json.contains("command"))
            throw ConfigError("manifest lacks config or command");
        if (config_json["command"] != request.command)
            throw ConfigError("manifest was written by '" + config_json["command"].get<std::string>() + "', not '" +
                              request.command + "'");
        config_json = config_json["config"];
    }
    RunConfig config = parse_config(config_json);
    if (request.seed) config.rng.seed = *request.seed;
    if (request.threads) config.threads = *request.threads;

    RunSummary s;
    const std::string started = utc_now();
    s.result = run_command(request.command, config, request.out_dir);
    Json files = Json::array();
    for (const auto& f : s.result.outputs)
        files.push_back(Json{{"file", f}, {"fnv1a64", file_digest(request.out_dir / f)}});

    Json m;
    m["manifest_version"] = kManifestVersion;
    m["tool_version"] = kToolVersion;
    m["command"] = request.command;
    m["config"] = to_json(config);
    m["rng"] = Json{{"seed", config.rng.seed}, {"stream_id", config.rng.stream_id}};
    m["started_at"] = started;
    m["finished_at"] = utc_now();
    m["exit_code"] = s.result.exit_code;
    m["outputs"] = files;
    std::ofstream out(request.out_dir / "manifest.json");
    if (!out) throw ConfigError("cannot write manifest");
    out << m.dump(2) << '\n';
    s.manifest = std::move(m);
    return s;
}

}  // namespace nelson::cli
