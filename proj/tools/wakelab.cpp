// wakelab command line: simulate, train, evaluate, benchmark, optimize, flow-slice.
#include "wakelab/harness/corpus.hpp"
#include "wakelab/harness/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace wakelab;
using namespace wakelab::harness;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = "wakelab-out";
};

ExperimentConfig load(const Common& c) {
    ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
    if (c.seed) cfg.seeds = {*c.seed};
    cfg.validate();
    return cfg;
}

AgentKind parse_agent(const std::string& s) {
    if (s == "hierarchical") return AgentKind::Hierarchical;
    if (s == "direct_rl" || s == "direct") return AgentKind::Direct;
    throw ConfigError("unknown agent '" + s + "' (hierarchical | direct_rl)");
}

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config_path, "INI configuration file");
    app->add_option("--seed", c.seed, "root seed (overrides experiment.seeds)");
    app->add_option("--out", c.out, "output directory");
}

int cmd_simulate(const Common& c, const std::string& controller, std::optional<double> direction,
                 const std::string& checkpoint) {
    const ExperimentConfig cfg = load(c);
    const ControllerKind kind = [&] {
        try {
            return parse_controller(controller);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string(e.what()) + " for option --controller");
        }
    }();
    std::unique_ptr<Agent> agent;
    PolicyFn policy;
    if (kind == ControllerKind::HierarchicalRLMPC || kind == ControllerKind::DirectRL) {
        const bool hier = kind == ControllerKind::HierarchicalRLMPC;
        std::string path = checkpoint.empty() ? (hier ? cfg.hierarchical_checkpoint : cfg.direct_checkpoint) : checkpoint;
        if (path.empty()) throw ConfigError("--checkpoint is required for controller " + controller);
        agent = load_agent(cfg, hier ? AgentKind::Hierarchical : AgentKind::Direct, path);
        policy = deterministic_policy(*agent);
    }
    auto ctl = make_controller(kind, cfg, policy);
    const std::uint64_t seed = cfg.seeds.front();
    const double wd = direction.value_or(cfg.simulate_direction);
    fs::create_directories(c.out);
    const fs::path path = fs::path(c.out) / episode_file_name(kind, seed, wd);
    std::ofstream csv(path);
    WindFarmEnv env(cfg.farm(), cfg.eval_env());
    const EpisodeSummary s = run_episode(*ctl, env, eval_seed(seed, wd), wd, cfg.safety_window, &csv);
    if (!csv) throw std::runtime_error("failed to write " + path.string());
    std::cout << to_string(kind) << " seed=" << seed << " wd=" << direction_tag(wd) << "  mean power "
              << fmt_short(s.mean_power / 1e6) << " MW  mean reward " << fmt_short(s.mean_reward) << "  max V30 "
              << fmt_short(s.v30_max, 2) << "%\n"
              << "episode written to " << path.string() << "\n";
    return 0;
}

int cmd_train(const Common& c, const std::string& agent_name, bool resume) {
    ExperimentConfig cfg = load(c);
    const AgentKind kind = agent_name.empty() ? cfg.agent : parse_agent(agent_name);
    for (std::uint64_t seed : cfg.seeds) {
        const TrainingOutput out = run_training(cfg, kind, seed, c.out, resume, &std::cout);
        std::cout << run_name(kind, seed) << ": " << out.result.updates << " updates, curve " << out.curve_path.string()
                  << ", checkpoint " << out.checkpoint_path.string() << "\n";
    }
    return 0;
}

int cmd_evaluate(const Common& c, const std::string& agent_name, const std::string& checkpoint) {
    ExperimentConfig cfg = load(c);
    const AgentKind kind = agent_name.empty() ? cfg.agent : parse_agent(agent_name);
    if (checkpoint.empty()) throw ConfigError("--checkpoint is required for evaluate");
    long step = 0;
    auto agent = load_agent(cfg, kind, checkpoint, &step);
    fs::create_directories(c.out);
    const fs::path path = fs::path(c.out) / (to_string(kind) + "_evaluation.csv");
    std::ofstream csv(path);
    csv << "seed,direction,mean_power,greedy_power,gain_vs_greedy,v30_max\n";
    std::printf("%-8s %-9s %14s %14s %10s %8s\n", "seed", "direction", "power_MW", "greedy_MW", "gain_%", "v30_%");
    for (std::uint64_t seed : cfg.seeds) {
        PolicyEvaluator ev(cfg, kind, seed);
        for (const auto& e : ev.evaluate(*agent)) {
            csv << seed << ',' << direction_tag(e.direction) << ',' << fmt(e.agent.mean_power) << ','
                << fmt(e.greedy_power) << ',' << fmt(e.gain) << ',' << fmt(e.agent.v30_max) << '\n';
            std::printf("%-8llu %-9s %14.4f %14.4f %10.3f %8.2f\n", static_cast<unsigned long long>(seed),
                        direction_tag(e.direction).c_str(), e.agent.mean_power / 1e6, e.greedy_power / 1e6, e.gain,
                        e.agent.v30_max);
        }
    }
    if (!csv) throw std::runtime_error("failed to write " + path.string());
    std::cout << "checkpoint step " << step << ", results in " << path.string() << "\n";
    return 0;
}

int cmd_benchmark(const Common& c) {
    const ExperimentConfig cfg = load(c);
    const BenchmarkOutput out = run_benchmark(cfg, c.out, &std::cout);
    std::cout << "results in " << c.out << " (" << out.failed << " failed cells)\n";
    return out.failed == 0 ? 0 : kExitRuntime;
}

int cmd_optimize(std::optional<int> budget) {
    std::printf("%-16s %3s %7s %22s %22s %6s\n", "function", "dim", "budget", "best_value", "reference", "evals");
    for (const auto& fn : optimizer_corpus()) {
        direct::DirectConfig dc;
        dc.max_evaluations = budget.value_or(fn.budget);
        const auto r = direct::minimize(fn.f, fn.dim, dc);
        std::printf("%-16s %3zu %7d %22.15g %22.15g %6d\n", fn.name.c_str(), fn.dim, dc.max_evaluations, r.value,
                    fn.reference, r.evaluations);
    }
    return 0;
}

int cmd_flow_slice(const Common& c, std::vector<double> yaws, std::optional<double> direction, std::size_t nx,
                   std::size_t ny) {
    const ExperimentConfig cfg = load(c);
    const Farm farm = cfg.farm();
    if (yaws.empty()) yaws.assign(farm.size(), 0.0);
    if (yaws.size() != farm.size())
        throw ConfigError("--yaw needs " + std::to_string(farm.size()) + " values, got " + std::to_string(yaws.size()));
    const InflowState inflow{cfg.env.wind_speed_mean, direction.value_or(cfg.simulate_direction), cfg.env.ti};
    double x0 = farm.layout.positions[0].x, x1 = x0, y0 = farm.layout.positions[0].y, y1 = y0;
    for (const auto& p : farm.layout.positions) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    const double d = farm.turbines.front().rotor_diameter;
    fs::create_directories(c.out);
    const fs::path path = fs::path(c.out) / "flow_slice.csv";
    std::ofstream os(path);
    write_flow_slice(os, farm, inflow, yaws, x0 - 2 * d, x1 + 5 * d, y0 - 2 * d, y1 + 2 * d, nx, ny);
    if (!os) throw std::runtime_error("failed to write " + path.string());
    std::cout << "flow slice (" << nx << " x " << ny << ") written to " << path.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wake-steering control laboratory"};
    app.require_subcommand(1);
    Common common;

    auto* simulate = app.add_subcommand("simulate", "roll out one controller for one evaluation episode");
    add_common(simulate, common);
    std::string controller = "greedy", checkpoint, agent;
    std::optional<double> direction;
    simulate->add_option("--controller", controller, "greedy | idealized_mpc | hierarchical | direct_rl");
    simulate->add_option("--direction", direction, "mean wind direction [deg]");
    simulate->add_option("--checkpoint", checkpoint, "trained agent for RL controllers");

    auto* train = app.add_subcommand("train", "train a SAC agent");
    add_common(train, common);
    bool resume = false;
    train->add_option("--agent", agent, "hierarchical | direct_rl");
    train->add_flag("--resume", resume, "continue from the checkpoint in --out");

    auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint against greedy");
    add_common(evaluate, common);
    evaluate->add_option("--agent", agent, "hierarchical | direct_rl");
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

    auto* benchmark = app.add_subcommand("benchmark", "controller x seed x direction grid");
    add_common(benchmark, common);

    auto* optimize = app.add_subcommand("optimize", "run DIRECT on the test-function corpus");
    std::optional<int> budget;
    optimize->add_option("--budget", budget, "override evaluation budget")->check(CLI::PositiveNumber);

    auto* flow = app.add_subcommand("flow-slice", "export hub-height speed on a regular grid");
    add_common(flow, common);
    std::vector<double> yaws;
    std::size_t nx = 200, ny = 80;
    flow->add_option("--yaw", yaws, "per-turbine yaw [deg]")->delimiter(',');
    flow->add_option("--direction", direction, "wind direction [deg]");
    flow->add_option("--nx", nx, "grid points along x")->check(CLI::PositiveNumber);
    flow->add_option("--ny", ny, "grid points along y")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*simulate) return cmd_simulate(common, controller, direction, checkpoint);
        if (*train) return cmd_train(common, agent, resume);
        if (*evaluate) return cmd_evaluate(common, agent, checkpoint);
        if (*benchmark) return cmd_benchmark(common);
        if (*optimize) return cmd_optimize(budget);
        if (*flow) return cmd_flow_slice(common, yaws, direction, nx, ny);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
