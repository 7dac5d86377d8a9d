#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "drol/envs.hpp"
#include "drol/error.hpp"

// Dataset file layout:
//   line 1: JSON object {"format": "drol-dataset", "version": 1, "encoding": "csv"|"binary",
//           "env_kind", "d_s", "d_a", "n", "seed", "env": {...}, "mode_labels": [...]}
//   csv:    one record per line: s[0..d_s) a[0..d_a) r s'[0..d_s) done   (comma separated, %.17g)
//   binary: n fixed-width records of (2*d_s + d_a + 2) little-endian f64 in the same field order,
//           done stored as 0.0 / 1.0

namespace drol {

enum class DatasetEncoding { Csv, Binary };

inline nlohmann::json env_to_json(const EnvSpec& env) {
    return {
        {"kind", to_string(env.kind)},
        {"state_dim", env.state_dim},
        {"action_dim", env.action_dim},
        {"action_low", env.action_low},
        {"action_high", env.action_high},
        {"horizon", env.horizon},
        {"seed", env.seed},
        {"centers", env.centers},
        {"mode_radius", env.mode_radius},
        {"reward_weights", env.reward_weights},
        {"curvature", env.curvature},
        {"reward_offsets", env.reward_offsets},
        {"width", env.width},
        {"start", env.start},
        {"goal", env.goal},
        {"behavior_noise", env.behavior_noise},
        {"goal_tolerance", env.goal_tolerance},
    };
}

inline EnvSpec env_from_json(const nlohmann::json& j) {
    EnvSpec env;
    env.kind = parse_env_kind(j.at("kind").get<std::string>());
    env.state_dim = j.at("state_dim").get<std::size_t>();
    env.action_dim = j.at("action_dim").get<std::size_t>();
    env.action_low = j.at("action_low").get<Vec>();
    env.action_high = j.at("action_high").get<Vec>();
    env.horizon = j.at("horizon").get<std::size_t>();
    env.seed = j.at("seed").get<std::uint64_t>();
    env.centers = j.at("centers").get<Vec>();
    env.mode_radius = j.at("mode_radius").get<double>();
    env.reward_weights = j.at("reward_weights").get<Vec>();
    env.curvature = j.at("curvature").get<double>();
    env.reward_offsets = j.at("reward_offsets").get<Vec>();
    env.width = j.at("width").get<double>();
    env.start = j.at("start").get<Vec>();
    env.goal = j.at("goal").get<Vec>();
    env.behavior_noise = j.at("behavior_noise").get<double>();
    env.goal_tolerance = j.at("goal_tolerance").get<double>();
    return env;
}

inline void write_dataset(std::ostream& os, const OfflineDataset& data, DatasetEncoding encoding) {
    const EnvSpec& env = data.env;
    const nlohmann::json header = {
        {"format", "drol-dataset"},
        {"version", 1},
        {"encoding", encoding == DatasetEncoding::Csv ? "csv" : "binary"},
        {"env_kind", to_string(env.kind)},
        {"d_s", env.state_dim},
        {"d_a", env.action_dim},
        {"n", data.size()},
        {"seed", data.seed},
        {"env", env_to_json(env)},
        {"mode_labels", data.mode_labels},
    };
    os << header.dump() << '\n';

    for (const auto& t : data.transitions) {
        require(t.state.size() == env.state_dim && t.next_state.size() == env.state_dim &&
                    t.action.size() == env.action_dim,
                "transition dimensions do not match the dataset header");
        if (encoding == DatasetEncoding::Binary) {
            for (double v : t.state) detail::put_f64(os, v);
            for (double v : t.action) detail::put_f64(os, v);
            detail::put_f64(os, t.reward);
            for (double v : t.next_state) detail::put_f64(os, v);
            detail::put_f64(os, t.done ? 1.0 : 0.0);
            continue;
        }
        char buf[32];
        bool first = true;
        auto field = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            if (!first) os << ',';
            os << buf;
            first = false;
        };
        for (double v : t.state) field(v);
        for (double v : t.action) field(v);
        field(t.reward);
        for (double v : t.next_state) field(v);
        os << ',' << (t.done ? 1 : 0) << '\n';
    }
    if (!os) throw ContractError("failed writing dataset");
}

inline OfflineDataset read_dataset(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ContractError("dataset file is empty");
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "drol-dataset") throw ContractError("not a drol dataset file");

    OfflineDataset data;
    data.env = env_from_json(header.at("env"));
    data.seed = header.at("seed").get<std::uint64_t>();
    data.mode_labels = header.at("mode_labels").get<std::vector<int>>();
    const auto n = header.at("n").get<std::size_t>();
    const auto ds = header.at("d_s").get<std::size_t>();
    const auto da = header.at("d_a").get<std::size_t>();
    require(ds == data.env.state_dim && da == data.env.action_dim, "dataset header dimensions disagree with env");
    const std::string encoding = header.at("encoding").get<std::string>();
    const std::size_t width = 2 * ds + da + 2;

    data.transitions.reserve(n);
    Vec record(width);
    for (std::size_t i = 0; i < n; ++i) {
        if (encoding == "binary") {
            for (auto& v : record) v = detail::get_f64(is);
        } else if (encoding == "csv") {
            if (!std::getline(is, line)) throw ContractError("dataset has fewer records than its header claims");
            std::istringstream fields(line);
            std::string cell;
            std::size_t col = 0;
            while (std::getline(fields, cell, ',')) {
                require(col < width, "dataset record has too many fields");
                record[col++] = std::stod(cell);
            }
            require(col == width, "dataset record has too few fields");
        } else {
            throw ContractError("unknown dataset encoding '" + encoding + "'");
        }
        Transition t;
        auto it = record.begin();
        t.state.assign(it, it + static_cast<std::ptrdiff_t>(ds));
        it += static_cast<std::ptrdiff_t>(ds);
        t.action.assign(it, it + static_cast<std::ptrdiff_t>(da));
        it += static_cast<std::ptrdiff_t>(da);
        t.reward = *it++;
        t.next_state.assign(it, it + static_cast<std::ptrdiff_t>(ds));
        it += static_cast<std::ptrdiff_t>(ds);
        t.done = *it != 0.0;
        data.transitions.push_back(std::move(t));
    }
    return data;
}

inline void save_dataset(const std::string& path, const OfflineDataset& data, DatasetEncoding encoding) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ContractError("cannot open " + path + " for writing");
    write_dataset(os, data, encoding);
}

inline OfflineDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ContractError("cannot open " + path);
    return read_dataset(is);
}

} // namespace drol
