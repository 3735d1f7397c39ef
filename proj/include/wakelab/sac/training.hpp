// Off-policy training loop over several independently seeded task instances.
#pragma once

#include "../random.hpp"
#include "sac_agent.hpp"

#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wakelab::sac {

struct TaskStep {
    std::vector<double> observation;
    double reward = 0.0;
    bool terminated = false; ///< true terminal state: no bootstrap
    bool truncated = false;  ///< time limit: reset, but bootstrap
};

/// Episodic MDP seen by the agent.
class RlTask {
public:
    virtual ~RlTask() = default;
    virtual std::size_t obs_dim() const = 0;
    virtual std::size_t act_dim() const = 0;
    virtual std::vector<double> reset(std::uint64_t seed) = 0;
    virtual TaskStep step(std::span<const double> action) = 0;
    /// Rolling yaw-safety percentage, for tasks that drive turbines.
    virtual std::optional<double> safety_metric() const { return std::nullopt; }
};

using TaskFactory = std::function<std::unique_ptr<RlTask>(std::size_t env_index)>;

struct TrainConfig {
    long total_steps = 40'000; ///< agent transitions summed over all task instances
    std::size_t n_envs = 4;
    long eval_every = 5'000;
    std::uint64_t seed = 0;
    std::string checkpoint_path; ///< written at every evaluation when non-empty
    long start_step = 0;         ///< resume point

    void validate(const SACConfig& sac) const {
        if (n_envs == 0) throw std::invalid_argument("train.n_envs must be >= 1");
        if (total_steps < 0) throw std::invalid_argument("train.total_steps must be >= 0");
        if (eval_every <= 0) throw std::invalid_argument("train.eval_every must be > 0");
        if (total_steps < static_cast<long>(sac.warmup) && start_step == 0 && total_steps != 0)
            throw std::invalid_argument("train.total_steps must be >= sac.warmup");
    }
};

/// Evaluation callback result; the trainer adds the step and training-side safety metric.
struct EvalPoint {
    long step = 0;
    double train_safety = 0.0; ///< mean over task instances, 0 when not applicable
    std::vector<double> metrics;
};

struct TrainResult {
    std::vector<EvalPoint> curve;
    long updates = 0;
    long random_actions = 0;
    long steps = 0;
};

template <typename Scalar> using Evaluator = std::function<std::vector<double>(SacAgent<Scalar>&, long step)>;

template <typename Scalar>
void write_checkpoint(const SacAgent<Scalar>& agent, const std::string& path, long step) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open checkpoint file " + path);
    agent.save(os, step);
}

/**
 * Interleaves stepping of all task instances with gradient updates.
 *
 * Steps below `warmup` use uniform random actions; each transition collected
 * after warmup triggers `updates_per_step` updates. The evaluator runs at step 0
 * and every `eval_every` steps.
 */
template <typename Scalar>
TrainResult train(SacAgent<Scalar>& agent, const TaskFactory& factory, const TrainConfig& cfg,
                  const Evaluator<Scalar>& evaluate = {},
                  const std::function<void(const EvalPoint&)>& on_point = {}) {
    const SACConfig& sac = agent.config();
    cfg.validate(sac);
    std::vector<std::unique_ptr<RlTask>> tasks;
    std::vector<std::vector<double>> obs;
    std::vector<std::uint64_t> episode(cfg.n_envs, 0);
    for (std::size_t e = 0; e < cfg.n_envs; ++e) {
        tasks.push_back(factory(e));
        if (tasks.back()->obs_dim() != agent.obs_dim() || tasks.back()->act_dim() != agent.act_dim())
            throw std::invalid_argument("task dimensions do not match the agent");
        obs.push_back(tasks.back()->reset(derive_seed(cfg.seed, "env-episode", e * 1'000'003 + episode[e]++)));
    }
    ReplayBuffer buffer(sac.buffer_capacity, agent.obs_dim(), agent.act_dim());
    std::mt19937_64 sample_rng(derive_seed(cfg.seed, "replay-sampling", static_cast<std::uint64_t>(cfg.start_step)));
    std::mt19937_64 explore_rng(derive_seed(cfg.seed, "warmup-actions", static_cast<std::uint64_t>(cfg.start_step)));
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);

    TrainResult result;
    auto log_point = [&](long step) {
        EvalPoint p;
        p.step = step;
        double safety = 0.0;
        for (const auto& t : tasks) safety += t->safety_metric().value_or(0.0);
        p.train_safety = safety / static_cast<double>(tasks.size());
        if (evaluate) p.metrics = evaluate(agent, step);
        if (!cfg.checkpoint_path.empty()) write_checkpoint(agent, cfg.checkpoint_path, step);
        if (on_point) on_point(p);
        result.curve.push_back(std::move(p));
    };

    long step = cfg.start_step;
    if (cfg.start_step == 0) log_point(step); // a resumed run already logged its start point
    const long warmup = static_cast<long>(sac.warmup);
    while (step < cfg.total_steps) {
        for (std::size_t e = 0; e < cfg.n_envs && step < cfg.total_steps; ++e) {
            std::vector<double> action(agent.act_dim());
            if (step < warmup) {
                for (auto& a : action) a = uniform(explore_rng);
                ++result.random_actions;
            } else {
                action = agent.sample(obs[e]).action;
            }
            TaskStep ts = tasks[e]->step(action);
            buffer.add(obs[e], action, ts.reward, ts.observation, ts.terminated);
            if (ts.terminated || ts.truncated)
                obs[e] = tasks[e]->reset(derive_seed(cfg.seed, "env-episode", e * 1'000'003 + episode[e]++));
            else
                obs[e] = std::move(ts.observation);
            ++step;

            if (step > warmup && buffer.size() >= sac.batch_size) {
                for (int u = 0; u < sac.updates_per_step; ++u) {
                    try {
                        agent.update(buffer.sample(sac.batch_size, sample_rng));
                    } catch (const std::runtime_error&) {
                        if (!cfg.checkpoint_path.empty())
                            write_checkpoint(agent, cfg.checkpoint_path + ".diverged", step);
                        throw;
                    }
                    ++result.updates;
                }
            }
            if (step % cfg.eval_every == 0) log_point(step);
        }
    }
    result.steps = step;
    return result;
}

} // namespace wakelab::sac
