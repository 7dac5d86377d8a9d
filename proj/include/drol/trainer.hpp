#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "drol/critic.hpp"
#include "drol/diagnostics.hpp"
#include "drol/envs.hpp"
#include "drol/error.hpp"
#include "drol/latent_prior.hpp"
#include "drol/nn.hpp"
#include "drol/routing_actor.hpp"

namespace drol {

/**
 * All hyperparameters of one training run.
 *
 * Defaults follow the shared settings (Adam 3e-4, batch 256, ensemble of 2,
 * tau 0.005, gamma 0.99, K 16) with desk-scale networks (2 x 64) and a 2e4
 * step budget.
 */
struct TrainConfig {
    // environment + dataset
    std::string env = "interval_bandit";
    std::size_t bandit_modes = 3;
    double bandit_radius = 0.1;
    double bandit_gap = 1.0;
    Vec bandit_weights{0.0, 0.0, 1.0};
    double bandit_curvature = 2.0;
    Vec bandit_offsets;
    double grid_width = 5.0;
    std::size_t dataset_size = 10000;
    std::uint64_t dataset_seed = 0;

    // algorithm
    ActorMode actor_mode = ActorMode::Drol;
    std::size_t k = 16;
    double alpha = 1.0;
    double gamma = 0.99;
    double tau = 0.005;
    double lr = 3e-4;
    std::size_t batch_size = 256;
    std::size_t critic_ensemble = 2;
    QAggregation q_agg = QAggregation::Mean;
    std::size_t hidden_width = 64;
    std::size_t hidden_layers = 2;
    std::size_t latent_dim = 0; // 0: same as the action dimension

    // schedule
    std::size_t steps = 20000;
    std::size_t log_interval = 100;
    std::size_t eval_interval = 1000;
    std::size_t eval_episodes = 50;
    double checkpoint_fraction = 0.05;
    std::uint64_t seed = 0;

    void validate() const {
        require(k >= 1, "K must be at least 1");
        require(alpha >= 0.0, "alpha must be non-negative");
        require(batch_size >= 1, "batch size must be at least 1");
        require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0, 1)");
        require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
        require(lr > 0.0, "learning rate must be positive");
        require(critic_ensemble >= 1, "critic ensemble needs at least one member");
        require(hidden_width >= 1 && hidden_layers >= 1, "networks need at least one hidden layer");
        require(log_interval >= 1 && eval_interval >= 1 && eval_episodes >= 1, "intervals must be positive");
        require(checkpoint_fraction > 0.0 && checkpoint_fraction <= 1.0, "checkpoint fraction must lie in (0, 1]");
        require(dataset_size >= 1, "dataset size must be at least 1");
    }

    std::vector<std::size_t> hidden() const { return std::vector<std::size_t>(hidden_layers, hidden_width); }
};

namespace detail {

inline std::string join(const Vec& v) {
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        if (i) out += ',';
        out += buf;
    }
    return out;
}

inline Vec split_reals(const std::string& s) {
    Vec out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (cell.find_first_not_of(" \t") != std::string::npos) out.push_back(std::stod(cell));
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace detail

/// Set one config field from its textual value; unknown keys are a contract error.
inline void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
    auto u = [&] { return static_cast<std::size_t>(std::stoull(value)); };
    auto d = [&] { return std::stod(value); };
    if (key == "env") c.env = value;
    else if (key == "bandit_modes") c.bandit_modes = u();
    else if (key == "bandit_radius") c.bandit_radius = d();
    else if (key == "bandit_gap") c.bandit_gap = d();
    else if (key == "bandit_weights") c.bandit_weights = detail::split_reals(value);
    else if (key == "bandit_curvature") c.bandit_curvature = d();
    else if (key == "bandit_offsets") c.bandit_offsets = detail::split_reals(value);
    else if (key == "grid_width") c.grid_width = d();
    else if (key == "dataset_size") c.dataset_size = u();
    else if (key == "dataset_seed") c.dataset_seed = std::stoull(value);
    else if (key == "actor_mode") c.actor_mode = parse_actor_mode(value);
    else if (key == "k") c.k = u();
    else if (key == "alpha") c.alpha = d();
    else if (key == "gamma") c.gamma = d();
    else if (key == "tau") c.tau = d();
    else if (key == "lr") c.lr = d();
    else if (key == "batch_size") c.batch_size = u();
    else if (key == "critic_ensemble") c.critic_ensemble = u();
    else if (key == "q_agg") c.q_agg = parse_aggregation(value);
    else if (key == "hidden_width") c.hidden_width = u();
    else if (key == "hidden_layers") c.hidden_layers = u();
    else if (key == "latent_dim") c.latent_dim = u();
    else if (key == "steps") c.steps = u();
    else if (key == "log_interval") c.log_interval = u();
    else if (key == "eval_interval") c.eval_interval = u();
    else if (key == "eval_episodes") c.eval_episodes = u();
    else if (key == "checkpoint_fraction") c.checkpoint_fraction = d();
    else if (key == "seed") c.seed = std::stoull(value);
    else throw ContractError("unknown config key '" + key + "'");
}

/// Parse `key = value` lines; '#' starts a comment.
inline TrainConfig parse_config(std::istream& is, TrainConfig base = {}) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ContractError("config line " + std::to_string(lineno) + " has no '='");
        try {
            set_config_value(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } catch (const std::invalid_argument&) {
            throw ContractError("config line " + std::to_string(lineno) + " has a malformed value");
        }
    }
    return base;
}

inline std::string to_config_text(const TrainConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "env = " << c.env << '\n'
       << "bandit_modes = " << c.bandit_modes << '\n'
       << "bandit_radius = " << c.bandit_radius << '\n'
       << "bandit_gap = " << c.bandit_gap << '\n'
       << "bandit_weights = " << detail::join(c.bandit_weights) << '\n'
       << "bandit_curvature = " << c.bandit_curvature << '\n'
       << "bandit_offsets = " << detail::join(c.bandit_offsets) << '\n'
       << "grid_width = " << c.grid_width << '\n'
       << "dataset_size = " << c.dataset_size << '\n'
       << "dataset_seed = " << c.dataset_seed << '\n'
       << "actor_mode = " << to_string(c.actor_mode) << '\n'
       << "k = " << c.k << '\n'
       << "alpha = " << c.alpha << '\n'
       << "gamma = " << c.gamma << '\n'
       << "tau = " << c.tau << '\n'
       << "lr = " << c.lr << '\n'
       << "batch_size = " << c.batch_size << '\n'
       << "critic_ensemble = " << c.critic_ensemble << '\n'
       << "q_agg = " << to_string(c.q_agg) << '\n'
       << "hidden_width = " << c.hidden_width << '\n'
       << "hidden_layers = " << c.hidden_layers << '\n'
       << "latent_dim = " << c.latent_dim << '\n'
       << "steps = " << c.steps << '\n'
       << "log_interval = " << c.log_interval << '\n'
       << "eval_interval = " << c.eval_interval << '\n'
       << "eval_episodes = " << c.eval_episodes << '\n'
       << "checkpoint_fraction = " << c.checkpoint_fraction << '\n'
       << "seed = " << c.seed << '\n';
    return os.str();
}

inline EnvSpec make_env(const TrainConfig& c) {
    if (c.env == "interval_bandit")
        return make_interval_bandit(c.bandit_modes, c.bandit_radius, c.bandit_gap, c.bandit_weights, c.dataset_seed,
                                    c.bandit_curvature, c.bandit_offsets);
    if (c.env == "grid_nav") return make_grid_nav(c.grid_width, c.dataset_seed);
    throw ContractError("unknown env '" + c.env + "' (expected interval_bandit or grid_nav)");
}

inline OfflineDataset make_dataset(const TrainConfig& c) {
    return generate_dataset(make_env(c), c.dataset_size, c.dataset_seed);
}

struct MetricsRecord {
    std::size_t step = 0;
    double routed_bc = 0.0; // window mean
    double q_term = 0.0;    // window mean
    double td_loss = 0.0;   // window mean
    std::optional<double> cand_pairwise;
    double log10_cand_div = 0.0;
    std::vector<std::size_t> winner_hist; // window counts per candidate index
    double eval_return = 0.0;
    double eval_return_std = 0.0;
    double support_violation = 0.0;
};

inline const char* metrics_header() {
    return "step,routed_bc,q_term,td_loss,cand_pairwise,log10_cand_div,winner_hist,eval_return,eval_return_std,"
           "support_violation";
}

inline std::string metrics_row(const MetricsRecord& m) {
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::string out = std::to_string(m.step);
    out += ',' + num(m.routed_bc) + ',' + num(m.q_term) + ',' + num(m.td_loss) + ',';
    if (m.cand_pairwise) out += num(*m.cand_pairwise);
    out += ',' + num(m.log10_cand_div) + ',';
    for (std::size_t k = 0; k < m.winner_hist.size(); ++k) {
        if (k) out += ';';
        out += std::to_string(m.winner_hist[k]);
    }
    out += ',' + num(m.eval_return) + ',' + num(m.eval_return_std) + ',' + num(m.support_violation);
    return out;
}

struct TrainResult {
    Mlp actor;
    CriticEnsemble critic;
    std::vector<MetricsRecord> metrics;
    std::vector<ActorCheckpoint> checkpoints; // initial actor plus one every checkpoint_fraction of the run
    std::size_t steps_done = 0;
    bool halted = false;
    std::string halt_reason;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

/// Latent prior of a run (R = sqrt(d_a), d_z = d_a unless configured).
inline BallPrior make_prior(const TrainConfig& c, const EnvSpec& env, std::uint64_t seed) {
    return BallPrior::for_action_dim(env.action_dim, seed, c.latent_dim);
}

/**
 * Offline training loop. Each step: sample a minibatch, update the actor on
 * the routed (or pointwise) objective, update the critic toward
 * r + gamma Q_target(s', f(s', z')), then Polyak-average the targets.
 *
 * Fully deterministic given config.seed. A non-finite loss halts the run and
 * returns the parameters from the last logged step.
 */
inline TrainResult train(const TrainConfig& config, const OfflineDataset& dataset, const MetricsSink& sink = {}) {
    config.validate();
    require(!dataset.transitions.empty(), "training needs a non-empty dataset");
    const EnvSpec& env = dataset.env;
    require(dataset.transitions.front().state.size() == env.state_dim &&
                dataset.transitions.front().action.size() == env.action_dim,
            "dataset dimensions do not match its env spec");

    Rng master(config.seed);
    Rng init_rng = master.split();
    Rng batch_rng = master.split();
    BallPrior actor_prior = make_prior(config, env, master.next_u64());
    BallPrior critic_prior = make_prior(config, env, master.next_u64());
    BallPrior diag_prior = make_prior(config, env, master.next_u64());
    const std::uint64_t eval_seed = master.next_u64();

    const auto hidden = config.hidden();
    TrainResult result;
    result.actor = make_actor(env.state_dim, actor_prior.latent_dim(), env.action_dim, hidden, init_rng);
    result.critic = CriticEnsemble::make(env.state_dim, env.action_dim, hidden, config.critic_ensemble, init_rng,
                                         config.lr, config.gamma, config.tau, config.q_agg);
    AdamState actor_optim(config.lr);

    const std::size_t ckpt_every =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.checkpoint_fraction * config.steps)));
    result.checkpoints.push_back({0, result.actor});

    Mlp last_good_actor = result.actor;
    CriticEnsemble last_good_critic = result.critic;
    const Vec probe_state = dataset.transitions.front().state;
    const std::size_t hist_size = config.actor_mode == ActorMode::Drol ? config.k : 1;

    std::vector<Transition> batch(config.batch_size);
    MetricsRecord window;
    window.winner_hist.assign(hist_size, 0);
    std::size_t window_steps = 0;
    std::size_t next_eval = 0;
    EvalResult last_eval;
    bool have_eval = false;

    for (std::size_t step = 1; step <= config.steps; ++step) {
        try {
            for (auto& t : batch) t = dataset.transitions[batch_rng.below(dataset.size())];

            const ActorLossReport report =
                config.actor_mode == ActorMode::Drol
                    ? drol_actor_loss(result.actor, result.critic, batch, actor_prior, config.k, config.alpha)
                    : pointwise_actor_loss(result.actor, result.critic, batch, actor_prior, config.alpha);
            adam_step(result.actor, actor_optim);

            const double td = critic_update(result.critic, result.actor, batch, critic_prior);
            update_targets(result.critic);

            window.routed_bc += report.bc;
            window.q_term += report.q_term;
            window.td_loss += td;
            for (std::size_t w : report.winners) ++window.winner_hist[w];
            ++window_steps;
        } catch (const NumericError& e) {
            result.halted = true;
            result.halt_reason = "step " + std::to_string(step) + ": " + e.what();
            result.actor = std::move(last_good_actor);
            result.critic = std::move(last_good_critic);
            return result;
        }
        result.steps_done = step;

        if (step % ckpt_every == 0 || step == config.steps) {
            if (result.checkpoints.back().step != step) result.checkpoints.push_back({step, result.actor});
        }

        if (step % config.log_interval == 0 || step == config.steps) {
            MetricsRecord rec = window;
            rec.step = step;
            const double n = static_cast<double>(window_steps);
            rec.routed_bc /= n;
            rec.q_term /= n;
            rec.td_loss /= n;

            const CandidateSet probe = generate_candidates(result.actor, probe_state, diag_prior, config.k);
            const CandidateDiagnostics diag = candidate_diagnostics(probe, env.action_dim);
            rec.cand_pairwise = diag.pairwise;
            rec.log10_cand_div = std::log10(std::max(diag.centroid_divergence, 1e-300));

            if (!have_eval || step >= next_eval || step == config.steps) {
                BallPrior eval_prior = make_prior(config, env, eval_seed + step);
                last_eval = evaluate_policy(env, result.actor, eval_prior, config.eval_episodes, eval_seed ^ step);
                have_eval = true;
                next_eval = step + config.eval_interval;
            }
            rec.eval_return = last_eval.mean_return;
            rec.eval_return_std = last_eval.stddev_return;
            rec.support_violation = last_eval.support_violation;

            result.metrics.push_back(rec);
            if (sink) sink(rec);

            window = MetricsRecord{};
            window.winner_hist.assign(hist_size, 0);
            window_steps = 0;
            last_good_actor = result.actor;
            last_good_critic = result.critic;
        }
    }
    return result;
}

/// Writes a metrics CSV, flushing after every row so a halted run keeps its log.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path) : os_(path) {
        if (!os_) throw ContractError("cannot open " + path + " for writing");
        os_ << metrics_header() << '\n';
        os_.flush();
    }

    void operator()(const MetricsRecord& rec) {
        os_ << metrics_row(rec) << '\n';
        os_.flush();
    }

private:
    std::ofstream os_;
};

struct SweepCell {
    std::size_t k = 0;
    std::size_t runs = 0;
    std::size_t failed = 0;
    double bc_mean = 0.0, bc_std = 0.0;
    double return_mean = 0.0, return_std = 0.0;
    double violation_mean = 0.0, violation_std = 0.0;
};

struct SweepRun {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    MetricsRecord final;
};

struct SweepReport {
    std::vector<SweepCell> cells;
    std::vector<SweepRun> runs;
};

/**
 * Cartesian product of K values and seeds over one fixed dataset. Each cell is
 * an independent run with its own RNG stream; a failed run is recorded and the
 * sweep continues.
 */
inline SweepReport run_sweep(const TrainConfig& base, std::span<const std::size_t> k_values,
                             std::span<const std::uint64_t> seeds, const OfflineDataset& dataset,
                             std::size_t threads = 0) {
    require(!k_values.empty() && !seeds.empty(), "sweep needs at least one K and one seed");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

    std::vector<SweepRun> runs;
    for (std::size_t k : k_values)
        for (std::uint64_t s : seeds) runs.push_back({k, s, false, {}, {}});

    auto execute = [&](SweepRun& run) {
        TrainConfig cfg = base;
        cfg.k = run.k;
        cfg.seed = run.seed;
        try {
            TrainResult r = train(cfg, dataset);
            if (r.halted || r.metrics.empty()) {
                run.failed = true;
                run.error = r.halted ? r.halt_reason : "no metrics recorded";
            } else {
                run.final = r.metrics.back();
            }
        } catch (const std::exception& e) {
            run.failed = true;
            run.error = e.what();
        }
    };

    for (std::size_t begin = 0; begin < runs.size(); begin += threads) {
        const std::size_t end = std::min(runs.size(), begin + threads);
        std::vector<std::future<void>> pending;
        for (std::size_t i = begin; i < end; ++i)
            pending.push_back(std::async(threads == 1 ? std::launch::deferred : std::launch::async,
                                         [&, i] { execute(runs[i]); }));
        for (auto& f : pending) f.get();
    }

    SweepReport report;
    for (std::size_t k : k_values) {
        SweepCell cell;
        cell.k = k;
        Vec bc, ret, vio;
        for (const auto& run : runs) {
            if (run.k != k) continue;
            ++cell.runs;
            if (run.failed) {
                ++cell.failed;
                continue;
            }
            bc.push_back(run.final.routed_bc);
            ret.push_back(run.final.eval_return);
            vio.push_back(run.final.support_violation);
        }
        auto stats = [](const Vec& v, double& mean, double& sd) {
            mean = sd = 0.0;
            if (v.empty()) return;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            for (double x : v) sd += (x - mean) * (x - mean);
            sd = std::sqrt(sd / static_cast<double>(v.size()));
        };
        stats(bc, cell.bc_mean, cell.bc_std);
        stats(ret, cell.return_mean, cell.return_std);
        stats(vio, cell.violation_mean, cell.violation_std);
        report.cells.push_back(cell);
    }
    report.runs = std::move(runs);
    return report;
}

inline void write_sweep_csv(std::ostream& os, const SweepReport& report) {
    os << "k,runs,failed,routed_bc_mean,routed_bc_std,eval_return_mean,eval_return_std,support_violation_mean,"
          "support_violation_std\n";
    char buf[512];
    for (const auto& c : report.cells) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", c.k, c.runs, c.failed,
                      c.bc_mean, c.bc_std, c.return_mean, c.return_std, c.violation_mean, c.violation_std);
        os << buf;
    }
}

} // namespace drol
