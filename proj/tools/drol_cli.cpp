#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "drol/drol.hpp"

namespace fs = std::filesystem;
using namespace drol;

namespace {

struct CommonOptions {
    std::string config_path;
    std::string dataset_path;
    std::optional<std::string> env;
    std::optional<std::size_t> k;
    std::optional<double> alpha;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps;
    std::optional<std::string> actor_mode;
    std::string out = "out";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--dataset", o.dataset_path, "dataset file to train on instead of generating one")
        ->check(CLI::ExistingFile);
    cmd->add_option("--env", o.env, "interval_bandit | grid_nav");
    cmd->add_option("--k", o.k, "routing budget K");
    cmd->add_option("--alpha", o.alpha, "critic weight alpha");
    cmd->add_option("--seed", o.seed, "training seed");
    cmd->add_option("--steps", o.steps, "gradient steps");
    cmd->add_option("--actor-mode", o.actor_mode, "drol | pointwise");
    cmd->add_option("--out", o.out, "output directory");
}

TrainConfig resolve_config(const CommonOptions& o) {
    TrainConfig c;
    if (!o.config_path.empty()) {
        std::ifstream is(o.config_path);
        c = parse_config(is);
    }
    if (o.env) c.env = *o.env;
    if (o.k) c.k = *o.k;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.seed) c.seed = *o.seed;
    if (o.steps) c.steps = *o.steps;
    if (o.actor_mode) c.actor_mode = parse_actor_mode(*o.actor_mode);
    c.validate();
    return c;
}

OfflineDataset resolve_dataset(const CommonOptions& o, const TrainConfig& c) {
    return o.dataset_path.empty() ? make_dataset(c) : load_dataset(o.dataset_path);
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    if (!os) throw ContractError("cannot open " + p.string() + " for writing");
    os << text;
}

void write_checkpoint(const fs::path& p, const TrainResult& r) {
    std::vector<NamedNet> nets{{"actor", r.actor}};
    for (std::size_t m = 0; m < r.critic.size(); ++m) {
        nets.push_back({"critic" + std::to_string(m), r.critic.online[m]});
        nets.push_back({"critic_target" + std::to_string(m), r.critic.target[m]});
    }
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ContractError("cannot open " + p.string() + " for writing");
    save_checkpoint(os, nets);
}

int report_halt(const TrainResult& r) {
    if (!r.halted) return 0;
    std::cerr << "run halted: " << r.halt_reason << "\n";
    return 3;
}

int cmd_train(const CommonOptions& o) {
    const TrainConfig c = resolve_config(o);
    const OfflineDataset data = resolve_dataset(o, c);
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "config.txt", to_config_text(c));
    MetricsWriter writer((fs::path(o.out) / "metrics.csv").string());
    const TrainResult r = train(c, data, std::ref(writer));
    write_checkpoint(fs::path(o.out) / "checkpoint.bin", r);
    if (!r.metrics.empty()) {
        const auto& m = r.metrics.back();
        std::printf("step %zu  routed_bc %.6g  eval_return %.6g  support_violation %.4g\n", m.step, m.routed_bc,
                    m.eval_return, m.support_violation);
    }
    return report_halt(r);
}

template <class T>
std::vector<T> parse_list(const std::string& s) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(static_cast<T>(std::stoull(item)));
    if (out.empty()) throw ContractError("empty list '" + s + "'");
    return out;
}

int cmd_sweep(const CommonOptions& o, const std::string& ks, const std::string& seeds, std::size_t threads) {
    const TrainConfig c = resolve_config(o);
    const OfflineDataset data = resolve_dataset(o, c);
    const auto k_values = parse_list<std::size_t>(ks);
    const auto seed_values = parse_list<std::uint64_t>(seeds);
    const SweepReport report = run_sweep(c, k_values, seed_values, data, threads);
    fs::create_directories(o.out);
    std::ofstream os(fs::path(o.out) / "sweep.csv");
    write_sweep_csv(os, report);
    write_sweep_csv(std::cout, report);
    bool any_failed = false;
    for (const auto& run : report.runs) {
        if (!run.failed) continue;
        any_failed = true;
        std::cerr << "K=" << run.k << " seed=" << run.seed << " failed: " << run.error << "\n";
    }
    return any_failed ? 3 : 0;
}

int cmd_trace(const CommonOptions& o, std::size_t max_actions) {
    const TrainConfig c = resolve_config(o);
    const OfflineDataset data = resolve_dataset(o, c);
    const TrainResult r = train(c, data);

    // Probe at the initial state; dataset actions recorded there form the slice.
    const Vec probe = initial_state(data.env);
    std::vector<Vec> actions;
    for (const auto& t : data.transitions) {
        if (actions.size() >= max_actions) break;
        if (squared_distance(t.state, probe) < 1e-12) actions.push_back(t.action);
    }
    if (actions.empty()) throw ContractError("no dataset actions at the probe state");
    BallPrior prior = make_prior(c, data.env, c.seed ^ 0x7ACEULL);
    const VoronoiTrace trace = voronoi_trace(r.checkpoints, prior, c.k, probe, actions);

    nlohmann::json j;
    j["probe_state"] = trace.probe_state;
    j["latents"] = trace.latents;
    j["probe_actions"] = trace.probe_actions;
    j["handoff_events"] = trace.handoff_events();
    j["checkpoints"] = nlohmann::json::array();
    for (std::size_t i = 0; i < trace.steps.size(); ++i)
        j["checkpoints"].push_back(
            {{"step", trace.steps[i]}, {"winners", trace.winners[i]}, {"candidates", trace.candidates[i]}});
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "trace.json", j.dump(1) + "\n");
    std::printf("%zu checkpoints, %zu handoff events\n", trace.steps.size(), trace.handoff_events());
    return report_halt(r);
}

int cmd_oracle(const std::string& out) {
    using namespace drol::theory;
    fs::create_directories(out);
    char buf[512];

    std::ofstream q(fs::path(out) / "quantizer.csv");
    q << "modes,k,radius,allocation,oracle_distortion,numeric_distortion,per_interval_closed_form\n";
    for (std::size_t m = 1; m <= 4; ++m) {
        const auto cfg = QuantizerConfig::evenly_spaced(m, 0.1, 1.0);
        for (std::size_t k = m; k <= m + 4; ++k) {
            const auto opt = optimal_quantizer_bruteforce(cfg, k);
            std::string alloc;
            double closed = 0.0;
            for (std::size_t i = 0; i < opt.allocation.size(); ++i) {
                alloc += (i ? ";" : "") + std::to_string(opt.allocation[i]);
                closed += interval_distortion(cfg.radius, opt.allocation[i]) / static_cast<double>(m);
            }
            std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%s,%.17g,%.17g,%.17g\n", m, k, cfg.radius, alloc.c_str(),
                          opt.distortion, routed_distortion(opt.prototypes, cfg), closed);
            q << buf;
        }
    }

    std::ofstream t(fs::path(out) / "tether.csv");
    t << "alpha,m,a,x_q,minimizer,bias_ratio\n";
    for (double alpha : {0.0, 0.3, 1.0, 3.0, 10.0})
        for (double m : {0.5, 1.0, 2.0, 20.0}) {
            const Vec a{0.0}, xq{1.0};
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,0,1,%.17g,%.17g\n", alpha, m,
                          fixed_tether_minimizer(a, xq, alpha, m)[0], tether_bias_ratio(alpha, m));
            t << buf;
        }

    std::ofstream cv(fs::path(out) / "coverage.csv");
    cv << "p,k,union_bound,exponential_bound,montecarlo,montecarlo_std_error\n";
    for (const Vec& p : {Vec{0.2, 0.2}, Vec{0.2, 0.5}, Vec{0.5, 0.5}, Vec{0.2, 0.2, 0.2}, Vec{0.2, 0.2, 0.5}})
        for (std::size_t k : {1u, 2u, 4u, 8u, 16u, 32u}) {
            std::string ps;
            for (std::size_t i = 0; i < p.size(); ++i) ps += (i ? ";" : "") + std::to_string(p[i]);
            const auto mc = coverage_montecarlo(p, k, 100000, 1);
            std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%.17g,%.17g\n", ps.c_str(), k, coverage_bound(p, k),
                          coverage_exponential_bound(p, k), mc.frequency, mc.std_error);
            cv << buf;
        }
    std::printf("wrote quantizer.csv, tether.csv, coverage.csv to %s\n", out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Routed candidate-set offline actor-critic"};
    app.require_subcommand(1);

    CommonOptions train_opts, sweep_opts, trace_opts;
    auto* train_cmd = app.add_subcommand("train", "train one run, writing metrics.csv and checkpoint.bin");
    add_common(train_cmd, train_opts);

    std::string ks = "1,2,4,8,16,32", seeds = "0,1,2";
    std::size_t threads = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "K x seed sweep, writing sweep.csv");
    add_common(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--ks", ks, "comma-separated K values");
    sweep_cmd->add_option("--seeds", seeds, "comma-separated seeds");
    sweep_cmd->add_option("--threads", threads, "parallel runs (0: hardware concurrency)");

    std::size_t max_actions = 200;
    auto* trace_cmd = app.add_subcommand("trace", "train and export the per-checkpoint routing trace.json");
    add_common(trace_cmd, trace_opts);
    trace_cmd->add_option("--max-actions", max_actions, "dataset actions tracked at the probe state");

    std::string oracle_out = "out";
    auto* oracle_cmd = app.add_subcommand("oracle", "write quantizer, tether, and coverage reference tables");
    oracle_cmd->add_option("--out", oracle_out, "output directory");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train_cmd) return cmd_train(train_opts);
        if (*sweep_cmd) return cmd_sweep(sweep_opts, ks, seeds, threads);
        if (*trace_cmd) return cmd_trace(trace_opts, max_actions);
        if (*oracle_cmd) return cmd_oracle(oracle_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
