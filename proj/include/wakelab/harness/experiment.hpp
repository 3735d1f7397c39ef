// Episode rollouts, the benchmark grid, agent training and checkpoint evaluation.
#pragma once

#include "config.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace wakelab::harness {

namespace fs = std::filesystem;

/// Full-precision number formatting so summaries can be recomputed exactly from CSV.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_short(double v, int precision = 4) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

inline std::string direction_tag(double wd) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", wd);
    return buf;
}

/// Evaluation episodes for the same (seed, direction) share all environment randomness.
inline std::uint64_t eval_seed(std::uint64_t seed, double direction) {
    return derive_seed(seed, "eval-episode", static_cast<std::uint64_t>(std::llround(direction * 1000.0)));
}

struct EpisodeSummary {
    double mean_power = 0.0;  ///< time-mean farm power [W]
    double mean_reward = 0.0;
    double v30_final = 0.0;   ///< V30 of the window at episode end [%]
    double v30_max = 0.0;
    std::size_t steps = 0;
};

/**
 * Episode CSV, one row per environment step after the action:
 * time, true inflow, reward, farm power, then per-turbine yaw, power and
 * measurements, then the MPC estimate (empty for controllers without one).
 */
inline void write_episode_header(std::ostream& os, std::size_t n) {
    os << "time,wd,wind_speed,ti,reward,farm_power";
    for (const char* col : {"yaw", "power", "meas_speed", "meas_wd"})
        for (std::size_t i = 0; i < n; ++i) os << ',' << col << '_' << i;
    os << ",est_wd,est_speed,est_ti\n";
}

inline void write_episode_row(std::ostream& os, const EnvStepResult& r, double farm_power,
                              const std::optional<InflowState>& est) {
    const StepInfo& s = r.info;
    os << fmt(s.time) << ',' << fmt(s.inflow.wind_direction) << ',' << fmt(s.inflow.wind_speed) << ','
       << fmt(s.inflow.turbulence_intensity) << ',' << fmt(r.reward) << ',' << fmt(farm_power);
    for (double v : s.yaw) os << ',' << fmt(v);
    for (double v : s.power) os << ',' << fmt(v);
    for (double v : s.measurements.speed) os << ',' << fmt(v);
    for (double v : s.measurements.direction) os << ',' << fmt(v);
    if (est)
        os << ',' << fmt(est->wind_direction) << ',' << fmt(est->wind_speed) << ',' << fmt(est->turbulence_intensity);
    else
        os << ",,,";
    os << '\n';
}

inline EpisodeSummary run_episode(Controller& controller, WindFarmEnv& env, std::uint64_t seed,
                                  std::optional<double> direction, std::size_t safety_window = 1000,
                                  std::ostream* csv = nullptr) {
    env.reset(seed, direction);
    controller.reset();
    SafetyWindow window(safety_window);
    if (csv) write_episode_header(*csv, env.size());
    EpisodeSummary out;
    double power_sum = 0.0, reward_sum = 0.0;
    for (;;) {
        EnvStepResult r = controller.step(env);
        double farm_power = 0.0;
        for (double p : r.info.power) farm_power += p;
        power_sum += farm_power;
        reward_sum += r.reward;
        window.push(r.info.yaw);
        out.v30_max = std::max(out.v30_max, window.v30());
        ++out.steps;
        if (csv) write_episode_row(*csv, r, farm_power, controller.estimate());
        if (r.done) break;
    }
    out.mean_power = power_sum / static_cast<double>(out.steps);
    out.mean_reward = reward_sum / static_cast<double>(out.steps);
    out.v30_final = window.v30();
    return out;
}

inline double gain_percent(double power, double baseline) { return 100.0 * (power / baseline - 1.0); }

using Agent = sac::SacAgent<float>;

inline std::size_t agent_act_dim(AgentKind kind, std::size_t n_turbines) {
    return kind == AgentKind::Hierarchical ? 3 : n_turbines;
}

inline std::unique_ptr<Agent> make_agent(const ExperimentConfig& cfg, AgentKind kind, std::uint64_t seed) {
    const std::size_t n = cfg.farm().size();
    return std::make_unique<Agent>(3 * n, agent_act_dim(kind, n), cfg.sac, derive_seed(seed, "agent-init"),
                                   derive_seed(seed, "agent-noise"));
}

/// Loads a checkpoint into a fresh agent; returns the saved step through `step`.
inline std::unique_ptr<Agent> load_agent(const ExperimentConfig& cfg, AgentKind kind, const std::string& path,
                                         long* step = nullptr) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    auto agent = make_agent(cfg, kind, 0);
    const long s = agent->load(in);
    if (step) *step = s;
    return agent;
}

inline PolicyFn deterministic_policy(Agent& agent) {
    return [&agent](std::span<const double> obs) { return agent.sample(obs, true).action; };
}

inline std::unique_ptr<Controller> make_controller(ControllerKind kind, const ExperimentConfig& cfg,
                                                   PolicyFn policy = {}) {
    switch (kind) {
    case ControllerKind::Greedy: return std::make_unique<GreedyController>();
    case ControllerKind::IdealizedMPC: return std::make_unique<IdealizedMpcController>(cfg.mpc, cfg.env.sim_dt);
    case ControllerKind::HierarchicalRLMPC:
        if (!policy) throw std::invalid_argument("hierarchical controller needs a trained policy");
        return std::make_unique<HierarchicalController>(std::move(policy), cfg.mpc, cfg.env.sim_dt, cfg.estimate);
    case ControllerKind::DirectRL:
        if (!policy) throw std::invalid_argument("direct RL controller needs a trained policy");
        return std::make_unique<DirectRlController>(std::move(policy), cfg.direct_decision_period);
    }
    throw std::invalid_argument("unknown controller kind");
}

struct ResultRecord {
    ControllerKind kind = ControllerKind::Greedy;
    std::uint64_t seed = 0;
    double direction = 270.0;
    EpisodeSummary summary;
    double gain = 0.0; ///< vs greedy of the same seed and direction [%]
    bool ok = true;
    std::string error;
    double wall_seconds = 0.0;
};

inline std::string episode_file_name(ControllerKind kind, std::uint64_t seed, double direction) {
    return to_string(kind) + "_seed" + std::to_string(seed) + "_wd" + direction_tag(direction) + ".csv";
}

/// Mean over successful cells, per controller, in configuration order.
inline void write_summary_table(std::ostream& os, const std::vector<ResultRecord>& records,
                                const std::vector<ControllerKind>& order) {
    os << "controller       cells  failed  mean_power_MW  gain_vs_greedy_%  max_v30_%\n";
    for (ControllerKind k : order) {
        double power = 0.0, gain = 0.0, v30 = 0.0;
        int ok = 0, failed = 0;
        for (const auto& r : records) {
            if (r.kind != k) continue;
            if (!r.ok) {
                ++failed;
                continue;
            }
            ++ok;
            power += r.summary.mean_power;
            gain += r.gain;
            v30 = std::max(v30, r.summary.v30_max);
        }
        char line[160];
        std::snprintf(line, sizeof line, "%-16s %5d  %6d  %13.4f  %16.3f  %9.3f\n", to_string(k).c_str(), ok + failed,
                      failed, ok ? power / ok / 1e6 : 0.0, ok ? gain / ok : 0.0, v30);
        os << line;
    }
}

struct BenchmarkOutput {
    std::vector<ResultRecord> records;
    std::size_t failed = 0;
};

/**
 * Every configured controller for every (seed, eval direction). Greedy always
 * runs first and is the gain denominator. A failing cell is recorded, not fatal.
 * Files: benchmark.csv, summary.txt, timing.csv and episodes/<cell>.csv.
 */
inline BenchmarkOutput run_benchmark(const ExperimentConfig& cfg, const fs::path& out_dir, std::ostream* log = nullptr) {
    cfg.validate();
    fs::create_directories(out_dir / "episodes");
    std::vector<ControllerKind> kinds{ControllerKind::Greedy};
    for (ControllerKind k : cfg.controllers)
        if (k != ControllerKind::Greedy) kinds.push_back(k);

    std::map<ControllerKind, std::unique_ptr<Agent>> agents;
    auto policy_for = [&](ControllerKind k) -> PolicyFn {
        if (k != ControllerKind::HierarchicalRLMPC && k != ControllerKind::DirectRL) return {};
        if (!agents.count(k)) {
            const bool hier = k == ControllerKind::HierarchicalRLMPC;
            const std::string& path = hier ? cfg.hierarchical_checkpoint : cfg.direct_checkpoint;
            if (path.empty())
                throw ConfigError(std::string("experiment.") + (hier ? "hierarchical" : "direct") +
                                  "_checkpoint is required to benchmark " + to_string(k));
            agents[k] = load_agent(cfg, hier ? AgentKind::Hierarchical : AgentKind::Direct, path);
        }
        return deterministic_policy(*agents[k]);
    };

    BenchmarkOutput out;
    WindFarmEnv env(cfg.farm(), cfg.eval_env());
    for (std::uint64_t seed : cfg.seeds) {
        for (double wd : cfg.eval_directions) {
            std::optional<double> baseline;
            for (ControllerKind k : kinds) {
                ResultRecord rec;
                rec.kind = k;
                rec.seed = seed;
                rec.direction = wd;
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    auto controller = make_controller(k, cfg, policy_for(k));
                    std::ofstream csv(out_dir / "episodes" / episode_file_name(k, seed, wd));
                    rec.summary = run_episode(*controller, env, eval_seed(seed, wd), wd, cfg.safety_window, &csv);
                    if (!csv) throw std::runtime_error("failed to write episode CSV");
                    if (k == ControllerKind::Greedy) baseline = rec.summary.mean_power;
                    if (!baseline) throw std::runtime_error("greedy baseline for this cell failed");
                    rec.gain = gain_percent(rec.summary.mean_power, *baseline);
                } catch (const ConfigError&) {
                    throw;
                } catch (const std::exception& e) {
                    rec.ok = false;
                    rec.error = e.what();
                    ++out.failed;
                }
                rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                if (log)
                    *log << to_string(k) << " seed=" << seed << " wd=" << direction_tag(wd) << ": "
                         << (rec.ok ? "gain " + fmt_short(rec.gain, 3) + "%" : "FAILED (" + rec.error + ")") << "\n";
                out.records.push_back(std::move(rec));
            }
        }
    }

    std::ofstream csv(out_dir / "benchmark.csv");
    csv << "controller,seed,direction,mean_power,mean_reward,gain_vs_greedy,v30_final,v30_max,steps,status\n";
    std::ofstream timing(out_dir / "timing.csv");
    timing << "controller,seed,direction,wall_seconds\n";
    for (const auto& r : out.records) {
        csv << to_string(r.kind) << ',' << r.seed << ',' << direction_tag(r.direction) << ',';
        if (r.ok)
            csv << fmt(r.summary.mean_power) << ',' << fmt(r.summary.mean_reward) << ',' << fmt(r.gain) << ','
                << fmt(r.summary.v30_final) << ',' << fmt(r.summary.v30_max) << ',' << r.summary.steps << ",ok\n";
        else
            csv << ",,,,,,failed\n";
        timing << to_string(r.kind) << ',' << r.seed << ',' << direction_tag(r.direction) << ','
               << fmt_short(r.wall_seconds, 3) << '\n';
    }
    std::ofstream summary(out_dir / "summary.txt");
    write_summary_table(summary, out.records, kinds);
    if (log) write_summary_table(*log, out.records, kinds);
    if (!csv || !summary || !timing) throw std::runtime_error("failed to write benchmark results in " + out_dir.string());
    return out;
}

struct DirectionEval {
    double direction = 270.0;
    EpisodeSummary agent;
    double greedy_power = 0.0;
    double gain = 0.0;
};

/// Deterministic-policy episodes at every eval direction, against greedy on identical noise.
class PolicyEvaluator {
public:
    PolicyEvaluator(const ExperimentConfig& cfg, AgentKind kind, std::uint64_t seed)
        : cfg_(cfg), kind_(kind), seed_(seed), env_(cfg.farm(), cfg.eval_env()) {
        GreedyController greedy;
        for (double wd : cfg_.eval_directions)
            greedy_.push_back(run_episode(greedy, env_, eval_seed(seed_, wd), wd, cfg_.safety_window).mean_power);
    }

    std::vector<DirectionEval> evaluate(Agent& agent) {
        auto controller = make_controller(
            kind_ == AgentKind::Hierarchical ? ControllerKind::HierarchicalRLMPC : ControllerKind::DirectRL, cfg_,
            deterministic_policy(agent));
        std::vector<DirectionEval> out;
        for (std::size_t d = 0; d < cfg_.eval_directions.size(); ++d) {
            DirectionEval e;
            e.direction = cfg_.eval_directions[d];
            e.agent = run_episode(*controller, env_, eval_seed(seed_, e.direction), e.direction, cfg_.safety_window);
            e.greedy_power = greedy_[d];
            e.gain = gain_percent(e.agent.mean_power, e.greedy_power);
            out.push_back(e);
        }
        return out;
    }

private:
    const ExperimentConfig& cfg_;
    AgentKind kind_;
    std::uint64_t seed_;
    WindFarmEnv env_;
    std::vector<double> greedy_;
};

struct CurveRow {
    long step = 0;
    std::string direction; ///< eval direction, or "mean" across directions
    double mean_power = 0.0;
    double mean_reward = 0.0;
    double gain = 0.0;
    double v30 = 0.0;      ///< rolling V30 over training rollouts, mean across task instances
    double eval_v30 = 0.0; ///< max V30 during the evaluation episode
};

inline constexpr const char* kCurveHeader = "step,direction,mean_power,mean_reward,gain_vs_greedy,v30,eval_v30\n";

inline void write_curve_row(std::ostream& os, const CurveRow& r) {
    os << r.step << ',' << r.direction << ',' << fmt(r.mean_power) << ',' << fmt(r.mean_reward) << ','
       << fmt(r.gain) << ',' << fmt(r.v30) << ',' << fmt(r.eval_v30) << '\n';
}

inline std::vector<CurveRow> curve_rows(long step, double train_v30, const std::vector<DirectionEval>& evals) {
    std::vector<CurveRow> rows;
    CurveRow mean{step, "mean", 0.0, 0.0, 0.0, train_v30, 0.0};
    for (const auto& e : evals) {
        rows.push_back({step, direction_tag(e.direction), e.agent.mean_power, e.agent.mean_reward, e.gain, train_v30,
                        e.agent.v30_max});
        mean.mean_power += e.agent.mean_power / static_cast<double>(evals.size());
        mean.mean_reward += e.agent.mean_reward / static_cast<double>(evals.size());
        mean.gain += e.gain / static_cast<double>(evals.size());
        mean.eval_v30 = std::max(mean.eval_v30, e.agent.v30_max);
    }
    rows.push_back(mean);
    return rows;
}

inline std::unique_ptr<sac::RlTask> make_task(const ExperimentConfig& cfg, AgentKind kind) {
    WindFarmEnv env(cfg.farm(), cfg.env);
    if (kind == AgentKind::Hierarchical)
        return std::make_unique<HierarchicalTask>(std::move(env), cfg.mpc, cfg.estimate, cfg.safety_window);
    return std::make_unique<DirectRlTask>(std::move(env), cfg.direct_decision_period, cfg.safety_window);
}

struct TrainingOutput {
    sac::TrainResult result;
    std::vector<CurveRow> curve;
    fs::path curve_path;
    fs::path checkpoint_path;
};

inline std::string run_name(AgentKind kind, std::uint64_t seed) {
    return to_string(kind) + "_seed" + std::to_string(seed);
}

/**
 * Trains one agent and writes <name>_curve.csv plus <name>.ckpt under `out_dir`.
 * With `resume`, parameters and the step counter come from the checkpoint and the
 * curve file is appended to.
 */
inline TrainingOutput run_training(const ExperimentConfig& cfg, AgentKind kind, std::uint64_t seed, const fs::path& out_dir,
                                   bool resume = false, std::ostream* log = nullptr) {
    cfg.validate();
    fs::create_directories(out_dir);
    TrainingOutput out;
    out.curve_path = out_dir / (run_name(kind, seed) + "_curve.csv");
    out.checkpoint_path = out_dir / (run_name(kind, seed) + ".ckpt");

    std::unique_ptr<Agent> agent;
    sac::TrainConfig tc = cfg.train;
    tc.seed = seed;
    tc.checkpoint_path = out.checkpoint_path.string();
    if (resume) {
        agent = load_agent(cfg, kind, out.checkpoint_path.string(), &tc.start_step);
    } else {
        agent = make_agent(cfg, kind, seed);
        tc.start_step = 0;
    }

    std::ofstream curve(out.curve_path, resume ? std::ios::app : std::ios::trunc);
    if (!curve) throw std::runtime_error("cannot open " + out.curve_path.string());
    if (!resume) curve << kCurveHeader;

    PolicyEvaluator evaluator(cfg, kind, seed);
    std::vector<DirectionEval> last;
    const sac::Evaluator<float> eval = [&](Agent& a, long) {
        last = evaluator.evaluate(a);
        return std::vector<double>{};
    };
    const auto on_point = [&](const sac::EvalPoint& p) {
        for (const auto& row : curve_rows(p.step, p.train_safety, last)) {
            write_curve_row(curve, row);
            out.curve.push_back(row);
        }
        curve.flush();
        if (log)
            *log << run_name(kind, seed) << " step " << p.step << ": gain " << fmt_short(out.curve.back().gain, 3)
                 << "%  v30 " << fmt_short(p.train_safety, 3) << "%\n";
    };
    const sac::TaskFactory factory = [&](std::size_t) { return make_task(cfg, kind); };
    out.result = sac::train(*agent, factory, tc, eval, on_point);
    if (!curve) throw std::runtime_error("failed to write " + out.curve_path.string());
    return out;
}

} // namespace wakelab::harness
