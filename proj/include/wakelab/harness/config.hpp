// Experiment configuration: INI-style sections loaded with Boost.PropertyTree.
#pragma once

#include "../controllers.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace wakelab::harness {

/// Malformed or inconsistent configuration; the message names the offending key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class AgentKind { Hierarchical, Direct };

inline std::string to_string(AgentKind k) { return k == AgentKind::Hierarchical ? "hierarchical" : "direct_rl"; }

struct ExperimentConfig {
    std::size_t n_turbines = 3;
    double spacing_diameters = 5.0;
    std::vector<Point2> positions; ///< overrides the row layout when non-empty
    TurbineSpec turbine;
    WakeParams wake;
    EnvConfig env;
    MPCConfig mpc;
    ::wakelab::sac::SACConfig sac;
    ::wakelab::sac::TrainConfig train;
    AgentKind agent = AgentKind::Hierarchical;
    EstimateRanges estimate;
    double direct_decision_period = 10.0; ///< [s]
    std::size_t safety_window = 1000;     ///< environment steps

    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<double> eval_directions{265.0, 270.0, 275.0};
    double eval_duration = 1000.0; ///< [s]
    std::vector<ControllerKind> controllers{ControllerKind::Greedy, ControllerKind::IdealizedMPC};
    std::string hierarchical_checkpoint;
    std::string direct_checkpoint;
    double simulate_direction = 270.0;

    Farm farm() const {
        Farm f;
        f.layout = positions.empty() ? FarmLayout::row(n_turbines, spacing_diameters * turbine.rotor_diameter)
                                     : FarmLayout{positions};
        f.turbines.assign(f.layout.size(), turbine);
        f.wake = wake;
        return f;
    }

    EnvConfig eval_env() const {
        EnvConfig e = env;
        e.episode_length = eval_duration;
        return e;
    }

    void validate() const {
        auto wrap = [](auto&& fn) {
            try {
                fn();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        };
        if (positions.empty() && n_turbines == 0) throw ConfigError("farm.n_turbines must be >= 1");
        if (positions.empty() && !(spacing_diameters > 0.0)) throw ConfigError("farm.spacing_D must be > 0");
        wrap([&] { turbine.validate(); });
        if (!(wake.k_b > 0.0 && wake.k_a >= 0.0)) throw ConfigError("wake.k_a must be >= 0 and wake.k_b > 0");
        wrap([&] { farm().validate(); });
        wrap([&] { env.validate(); });
        if (mpc.optimizer.max_evaluations < 1) throw ConfigError("mpc.budget must be >= 1");
        if (!(mpc.optimizer.epsilon >= 0.0)) throw ConfigError("mpc.epsilon must be >= 0");
        if (mpc.optimizer.max_level < 1) throw ConfigError("mpc.max_level must be >= 1");
        wrap([&] { mpc.validate(); });
        wrap([&] { sac.validate(); });
        wrap([&] { train.validate(sac); });
        auto check_period = [&](double period, const char* key) {
            const double ratio = period / env.sim_dt;
            if (!(ratio >= 1.0) || std::abs(ratio - std::round(ratio)) > 1e-9)
                throw ConfigError(std::string(key) + " must be a positive multiple of env.sim_dt");
        };
        check_period(mpc.control_interval, "mpc.control_interval");
        check_period(direct_decision_period, "train.direct_decision_period");
        for (const Range* r : {&estimate.direction, &estimate.speed, &estimate.ti})
            if (!(r->max > r->min)) throw ConfigError("estimate ranges must satisfy min < max");
        if (seeds.empty()) throw ConfigError("experiment.seeds must list at least one seed");
        if (eval_directions.empty()) throw ConfigError("experiment.eval_directions must not be empty");
        for (double d : eval_directions)
            if (!std::isfinite(d)) throw ConfigError("experiment.eval_directions contains a non-finite value");
        if (!(eval_duration >= env.sim_dt)) throw ConfigError("experiment.eval_duration must be >= env.sim_dt");
        if (safety_window == 0) throw ConfigError("experiment.safety_window must be >= 1");
    }
};

namespace detail {

template <typename T> T parse_value(const std::string& key, const std::string& text) {
    if constexpr (std::is_unsigned_v<T>) {
        if (text.find('-') != std::string::npos) throw ConfigError("invalid value '" + text + "' for key " + key);
    }
    std::istringstream in(text);
    T v{};
    in >> v;
    if (in.fail() || !(in >> std::ws).eof())
        throw ConfigError("invalid value '" + text + "' for key " + key);
    return v;
}

template <typename T> std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("empty list element in key " + key);
        const auto e = item.find_last_not_of(" \t");
        out.push_back(parse_value<T>(key, item.substr(b, e - b + 1)));
    }
    return out;
}

template <> inline std::string parse_value<std::string>(const std::string&, const std::string& text) { return text; }

class Reader {
public:
    explicit Reader(const boost::property_tree::ptree& tree) : tree_(tree) {}

    template <typename T> void get(const std::string& key, T& dst) {
        if (auto v = raw(key)) dst = parse_value<T>(key, *v);
    }
    template <typename T> void get_list(const std::string& key, std::vector<T>& dst) {
        if (auto v = raw(key)) dst = parse_list<T>(key, *v);
    }
    void get_range(const std::string& min_key, const std::string& max_key, Range& r) {
        get(min_key, r.min);
        get(max_key, r.max);
    }

    /// Every key in the file must have been consumed.
    void reject_unknown() const {
        for (const auto& [section, body] : tree_) {
            if (body.empty() && !body.data().empty()) throw ConfigError("key '" + section + "' must be inside a section");
            for (const auto& [name, value] : body) {
                const std::string key = section + "." + name;
                if (!used_.count(key)) throw ConfigError("unknown configuration key " + key);
            }
        }
    }

    std::optional<std::string> raw(const std::string& key) {
        used_.insert(key);
        const auto dot = key.find('.');
        const auto section = tree_.get_child_optional(key.substr(0, dot));
        if (!section) return std::nullopt;
        const auto value = section->get_child_optional(boost::property_tree::ptree::path_type(key.substr(dot + 1), '\0'));
        if (!value) return std::nullopt;
        return value->data();
    }

private:
    const boost::property_tree::ptree& tree_;
    std::set<std::string> used_;
};

inline std::vector<Point2> parse_positions(const std::string& key, const std::string& text) {
    std::vector<Point2> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ';')) {
        std::istringstream p(item);
        Point2 pt;
        if (!(p >> pt.x >> pt.y) || !(p >> std::ws).eof())
            throw ConfigError("invalid position '" + item + "' in key " + key + " (expected 'x y; x y; ...')");
        out.push_back(pt);
    }
    return out;
}

} // namespace detail

/// Parses an INI stream; absent keys keep their defaults.
inline ExperimentConfig parse_config(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("malformed configuration at line " + std::to_string(e.line()) + ": " + e.message());
    }
    ExperimentConfig c;
    detail::Reader r(tree);

    r.get("farm.n_turbines", c.n_turbines);
    r.get("farm.spacing_D", c.spacing_diameters);
    if (auto v = r.raw("farm.positions")) c.positions = detail::parse_positions("farm.positions", *v);

    r.get("turbine.rotor_diameter", c.turbine.rotor_diameter);
    r.get("turbine.hub_height", c.turbine.hub_height);
    r.get("turbine.rated_power", c.turbine.rated_power);
    r.get("turbine.rated_wind_speed", c.turbine.rated_wind_speed);
    r.get("turbine.cp", c.turbine.cp);
    r.get("turbine.ct", c.turbine.ct);
    r.get("turbine.cos_exponent", c.turbine.cos_exponent);

    r.get("wake.k_a", c.wake.k_a);
    r.get("wake.k_b", c.wake.k_b);
    r.get("wake.deflection_gain", c.wake.deflection_gain);

    r.get("env.sim_dt", c.env.sim_dt);
    r.get("env.wind_speed", c.env.wind_speed_mean);
    r.get_range("env.wind_dir_min", "env.wind_dir_max", c.env.wind_dir_range);
    r.get("env.ti", c.env.ti);
    r.get("env.yaw_rate_limit", c.env.yaw_rate_limit);
    r.get("env.episode_length", c.env.episode_length);
    r.get("env.meander_amplitude", c.env.meander_amplitude);
    r.get("env.meander_timescale", c.env.meander_timescale);
    r.get("env.dir_drift_sd", c.env.dir_drift_sd);
    r.get("env.dir_drift_timescale", c.env.dir_drift_timescale);
    r.get("env.speed_noise_sd", c.env.speed_noise_sd);
    r.get("env.direction_noise_sd", c.env.direction_noise_sd);
    r.get_range("env.obs_speed_min", "env.obs_speed_max", c.env.obs_speed);
    r.get_range("env.obs_direction_min", "env.obs_direction_max", c.env.obs_direction);
    r.get_range("env.obs_yaw_min", "env.obs_yaw_max", c.env.obs_yaw);

    r.get("mpc.t_ah", c.mpc.t_ah);
    r.get("mpc.horizon", c.mpc.horizon);
    r.get("mpc.dt", c.mpc.dt);
    r.get("mpc.r_gamma_max", c.mpc.r_gamma_max);
    r.get("mpc.gamma_max", c.mpc.gamma_max);
    r.get("mpc.gamma_min", c.mpc.gamma_min);
    r.get("mpc.sigmoid_slope", c.mpc.sigmoid_slope);
    r.get("mpc.control_interval", c.mpc.control_interval);
    r.get("mpc.budget", c.mpc.optimizer.max_evaluations);
    r.get("mpc.epsilon", c.mpc.optimizer.epsilon);
    r.get("mpc.max_level", c.mpc.optimizer.max_level);

    r.get_range("estimate.direction_min", "estimate.direction_max", c.estimate.direction);
    r.get_range("estimate.speed_min", "estimate.speed_max", c.estimate.speed);
    r.get_range("estimate.ti_min", "estimate.ti_max", c.estimate.ti);

    r.get("sac.gamma", c.sac.gamma);
    r.get("sac.lr", c.sac.lr);
    r.get("sac.batch_size", c.sac.batch_size);
    r.get("sac.tau", c.sac.tau);
    if (auto v = r.raw("sac.target_entropy")) c.sac.target_entropy = detail::parse_value<double>("sac.target_entropy", *v);
    r.get("sac.warmup", c.sac.warmup);
    r.get("sac.updates_per_step", c.sac.updates_per_step);
    r.get_list("sac.hidden", c.sac.hidden);
    r.get("sac.buffer_capacity", c.sac.buffer_capacity);
    r.get("sac.log_std_min", c.sac.log_std_min);
    r.get("sac.log_std_max", c.sac.log_std_max);

    r.get("train.total_steps", c.train.total_steps);
    r.get("train.n_envs", c.train.n_envs);
    r.get("train.eval_every", c.train.eval_every);
    r.get("train.direct_decision_period", c.direct_decision_period);
    if (auto v = r.raw("train.agent")) {
        if (*v == "hierarchical") c.agent = AgentKind::Hierarchical;
        else if (*v == "direct_rl" || *v == "direct") c.agent = AgentKind::Direct;
        else throw ConfigError("invalid value '" + *v + "' for key train.agent (hierarchical | direct_rl)");
    }

    r.get_list("experiment.seeds", c.seeds);
    r.get_list("experiment.eval_directions", c.eval_directions);
    r.get("experiment.eval_duration", c.eval_duration);
    r.get("experiment.safety_window", c.safety_window);
    r.get("experiment.simulate_direction", c.simulate_direction);
    if (auto v = r.raw("experiment.controllers")) {
        c.controllers.clear();
        for (const auto& name : detail::parse_list<std::string>("experiment.controllers", *v)) {
            try {
                c.controllers.push_back(parse_controller(name));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string(e.what()) + " in key experiment.controllers");
            }
        }
    }
    r.get("experiment.hierarchical_checkpoint", c.hierarchical_checkpoint);
    r.get("experiment.direct_checkpoint", c.direct_checkpoint);

    r.reject_unknown();
    c.validate();
    return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration file " + path);
    return parse_config(in);
}

} // namespace wakelab::harness
