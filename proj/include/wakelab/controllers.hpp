// The four yaw control policies, their RL task wrappers and the V30 safety metric.
#pragma once

#include "sac/training.hpp"
#include "trajectory_mpc.hpp"
#include "windfarm_env.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wakelab {

enum class ControllerKind { Greedy, IdealizedMPC, DirectRL, HierarchicalRLMPC };

inline std::string to_string(ControllerKind k) {
    switch (k) {
    case ControllerKind::Greedy: return "greedy";
    case ControllerKind::IdealizedMPC: return "idealized_mpc";
    case ControllerKind::DirectRL: return "direct_rl";
    case ControllerKind::HierarchicalRLMPC: return "hierarchical";
    }
    return "unknown";
}

inline ControllerKind parse_controller(const std::string& s) {
    if (s == "greedy") return ControllerKind::Greedy;
    if (s == "idealized_mpc" || s == "mpc") return ControllerKind::IdealizedMPC;
    if (s == "direct_rl" || s == "direct") return ControllerKind::DirectRL;
    if (s == "hierarchical" || s == "rl_mpc") return ControllerKind::HierarchicalRLMPC;
    throw std::invalid_argument("unknown controller '" + s + "'");
}

inline constexpr double kV30Threshold = 30.0; // [deg]

/// Rolling window of executed yaw magnitudes over the last `length` environment steps.
class SafetyWindow {
public:
    explicit SafetyWindow(std::size_t length = 1000) : length_(length) {}

    void push(std::span<const double> yaws) {
        std::size_t over = 0;
        for (double g : yaws) over += std::abs(g) > kV30Threshold ? 1 : 0;
        steps_.push_back({over, yaws.size()});
        exceed_ += over;
        cells_ += yaws.size();
        if (steps_.size() > length_) {
            exceed_ -= steps_.front().over;
            cells_ -= steps_.front().count;
            steps_.pop_front();
        }
    }

    std::size_t size() const { return steps_.size(); }
    std::size_t length() const { return length_; }
    bool full() const { return steps_.size() == length_; }

    /// Percentage of turbine-steps with |yaw| > 30 deg; partial windows use their actual length.
    double v30() const { return cells_ == 0 ? 0.0 : 100.0 * static_cast<double>(exceed_) / static_cast<double>(cells_); }

private:
    struct Entry {
        std::size_t over;
        std::size_t count;
    };
    std::size_t length_;
    std::deque<Entry> steps_;
    std::size_t exceed_ = 0;
    std::size_t cells_ = 0;
};

inline double v30(const SafetyWindow& w) { return w.v30(); }

/// Rates [deg/s] homing every yaw to zero, landing exactly when within one step.
inline std::vector<double> greedy_rates(std::span<const double> yaws, double rate_limit, double dt) {
    std::vector<double> rates(yaws.size());
    for (std::size_t i = 0; i < yaws.size(); ++i) rates[i] = std::clamp(-yaws[i] / dt, -rate_limit, rate_limit);
    return rates;
}

/// Normalised yaw-rate actions to rates [deg/s]; over a period dt the increment is a * r_max * dt.
inline std::vector<double> direct_rl_rates(std::span<const double> action, double r_max) {
    std::vector<double> rates(action.size());
    for (std::size_t i = 0; i < action.size(); ++i) rates[i] = std::clamp(action[i], -1.0, 1.0) * r_max;
    return rates;
}

/// Physical ranges the hierarchical agent's normalised actions map onto.
struct EstimateRanges {
    Range direction{250.0, 290.0};
    Range speed{5.0, 15.0};
    Range ti{0.02, 0.20};
};

/// Action order is (wd, U, TI).
inline InflowState estimate_from_action(std::span<const double> action, const EstimateRanges& r) {
    if (action.size() != 3) throw std::invalid_argument("hierarchical action must have 3 components");
    return {denormalize_action(std::clamp(action[1], -1.0, 1.0), r.speed),
            denormalize_action(std::clamp(action[0], -1.0, 1.0), r.direction),
            denormalize_action(std::clamp(action[2], -1.0, 1.0), r.ti)};
}

inline std::vector<double> action_from_estimate(const InflowState& s, const EstimateRanges& r) {
    auto norm = [](double x, Range rg) { return 2.0 * (x - rg.min) / (rg.max - rg.min) - 1.0; };
    return {norm(s.wind_direction, r.direction), norm(s.wind_speed, r.speed), norm(s.turbulence_intensity, r.ti)};
}

/**
 * Runs the back-to-front solve every control interval and serves the planned
 * yaw targets one simulation step at a time.
 */
class MpcExecutor {
public:
    MpcExecutor(MPCConfig cfg, double sim_dt) : cfg_(cfg), sim_dt_(sim_dt) {
        cfg_.validate();
        const double ratio = cfg_.control_interval / sim_dt_;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0)
            throw std::invalid_argument("MPC control interval must be a multiple of sim_dt");
    }

    void reset() {
        plan_ = StepMatrix();
        next_ = 0;
        solves_ = 0;
        failures_ = 0;
    }

    bool needs_solve() const { return next_ >= plan_.rows; }

    /// Solves with the given estimate; on an unusable estimate or optimiser failure the plan holds yaw.
    void replan(const WindFarmEnv& env, const InflowState& estimate) {
        ++solves_;
        last_estimate_ = estimate;
        try {
            MpcSolution sol = solve_back_to_front(env.farm(), env.history(), env.time(), estimate, cfg_, sim_dt_);
            if (sol.degraded) ++failures_;
            plan_ = std::move(sol.commands);
            last_params_ = std::move(sol.params);
        } catch (const std::invalid_argument&) {
            ++failures_;
            hold(env);
        }
        next_ = 0;
    }

    std::span<const double> next_targets() {
        if (needs_solve()) throw std::logic_error("MPC plan exhausted; replan first");
        return plan_.row(next_++);
    }

    std::size_t interval_steps() const { return static_cast<std::size_t>(std::lround(cfg_.control_interval / sim_dt_)); }
    long solves() const { return solves_; }
    long failures() const { return failures_; }
    const InflowState& last_estimate() const { return last_estimate_; }
    const std::vector<BasisParams>& last_params() const { return last_params_; }
    const MPCConfig& config() const { return cfg_; }

private:
    void hold(const WindFarmEnv& env) {
        plan_ = StepMatrix(interval_steps(), env.size());
        for (std::size_t m = 0; m < plan_.rows; ++m)
            std::copy(env.yaws().begin(), env.yaws().end(), plan_.row(m).begin());
        last_params_.assign(env.size(), BasisParams::hold());
    }

    MPCConfig cfg_;
    double sim_dt_;
    StepMatrix plan_;
    std::size_t next_ = 0;
    long solves_ = 0;
    long failures_ = 0;
    InflowState last_estimate_{};
    std::vector<BasisParams> last_params_;
};

/// Deterministic policy used at evaluation time: observation -> normalised action.
using PolicyFn = std::function<std::vector<double>(std::span<const double>)>;

/// One environment step per call; each controller keeps its own decision cadence.
class Controller {
public:
    virtual ~Controller() = default;
    virtual ControllerKind kind() const = 0;
    virtual void reset() {}
    virtual EnvStepResult step(WindFarmEnv& env) = 0;
    /// Inflow estimate fed to the MPC at the last solve, if any.
    virtual std::optional<InflowState> estimate() const { return std::nullopt; }
};

class GreedyController final : public Controller {
public:
    ControllerKind kind() const override { return ControllerKind::Greedy; }
    EnvStepResult step(WindFarmEnv& env) override {
        return env.step_rates(greedy_rates(env.yaws(), env.config().yaw_rate_limit, env.config().sim_dt));
    }
};

class IdealizedMpcController final : public Controller {
public:
    IdealizedMpcController(MPCConfig cfg, double sim_dt) : mpc_(cfg, sim_dt) {}
    ControllerKind kind() const override { return ControllerKind::IdealizedMPC; }
    void reset() override { mpc_.reset(); }
    EnvStepResult step(WindFarmEnv& env) override {
        if (mpc_.needs_solve()) mpc_.replan(env, env.truth().inflow);
        return env.step_targets(mpc_.next_targets());
    }
    std::optional<InflowState> estimate() const override { return mpc_.last_estimate(); }
    const MpcExecutor& executor() const { return mpc_; }

private:
    MpcExecutor mpc_;
};

class HierarchicalController final : public Controller {
public:
    HierarchicalController(PolicyFn policy, MPCConfig cfg, double sim_dt, EstimateRanges ranges = {})
        : policy_(std::move(policy)), mpc_(cfg, sim_dt), ranges_(ranges) {}
    ControllerKind kind() const override { return ControllerKind::HierarchicalRLMPC; }
    void reset() override { mpc_.reset(); }
    EnvStepResult step(WindFarmEnv& env) override {
        if (mpc_.needs_solve()) mpc_.replan(env, estimate_from_action(policy_(env.observation()), ranges_));
        return env.step_targets(mpc_.next_targets());
    }
    std::optional<InflowState> estimate() const override { return mpc_.last_estimate(); }
    const MpcExecutor& executor() const { return mpc_; }

private:
    PolicyFn policy_;
    MpcExecutor mpc_;
    EstimateRanges ranges_;
};

class DirectRlController final : public Controller {
public:
    DirectRlController(PolicyFn policy, double decision_period = 10.0)
        : policy_(std::move(policy)), period_(decision_period) {}
    ControllerKind kind() const override { return ControllerKind::DirectRL; }
    void reset() override { remaining_ = 0; }
    EnvStepResult step(WindFarmEnv& env) override {
        if (remaining_ == 0) {
            rates_ = direct_rl_rates(policy_(env.observation()), env.config().yaw_rate_limit);
            remaining_ = steps_per_decision(period_, env.config().sim_dt);
        }
        --remaining_;
        return env.step_rates(rates_);
    }

    static std::size_t steps_per_decision(double period, double sim_dt) {
        const double ratio = period / sim_dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0)
            throw std::invalid_argument("decision period must be a multiple of sim_dt");
        return static_cast<std::size_t>(std::lround(ratio));
    }

private:
    PolicyFn policy_;
    double period_;
    std::size_t remaining_ = 0;
    std::vector<double> rates_;
};

/// Hierarchical MDP: one agent step = one MPC solve plus a control interval of environment steps.
/// The transition reward is the mean of the per-step rewards over the interval.
class HierarchicalTask final : public sac::RlTask {
public:
    HierarchicalTask(WindFarmEnv env, MPCConfig cfg, EstimateRanges ranges = {}, std::size_t safety_window = 1000)
        : env_(std::move(env)), mpc_(cfg, env_.config().sim_dt), ranges_(ranges), window_(safety_window) {}

    std::size_t obs_dim() const override { return 3 * env_.size(); }
    std::size_t act_dim() const override { return 3; }

    std::vector<double> reset(std::uint64_t seed) override {
        mpc_.reset();
        return env_.reset(seed);
    }

    sac::TaskStep step(std::span<const double> action) override {
        mpc_.replan(env_, estimate_from_action(action, ranges_));
        sac::TaskStep out;
        double reward = 0.0;
        std::size_t n = 0;
        while (!mpc_.needs_solve()) {
            EnvStepResult r = env_.step_targets(mpc_.next_targets());
            window_.push(r.info.yaw);
            reward += r.reward;
            ++n;
            out.observation = std::move(r.observation);
            if (r.done) {
                out.truncated = true;
                break;
            }
        }
        out.reward = reward / static_cast<double>(n);
        return out;
    }

    std::optional<double> safety_metric() const override { return window_.v30(); }
    WindFarmEnv& env() { return env_; }

private:
    WindFarmEnv env_;
    MpcExecutor mpc_;
    EstimateRanges ranges_;
    SafetyWindow window_;
};

/// Direct MDP: one agent step = normalised yaw rates held for the decision period.
class DirectRlTask final : public sac::RlTask {
public:
    DirectRlTask(WindFarmEnv env, double decision_period = 10.0, std::size_t safety_window = 1000)
        : env_(std::move(env)),
          steps_(DirectRlController::steps_per_decision(decision_period, env_.config().sim_dt)),
          window_(safety_window) {}

    std::size_t obs_dim() const override { return 3 * env_.size(); }
    std::size_t act_dim() const override { return env_.size(); }

    std::vector<double> reset(std::uint64_t seed) override { return env_.reset(seed); }

    sac::TaskStep step(std::span<const double> action) override {
        const auto rates = direct_rl_rates(action, env_.config().yaw_rate_limit);
        sac::TaskStep out;
        double reward = 0.0;
        std::size_t n = 0;
        for (std::size_t s = 0; s < steps_; ++s) {
            EnvStepResult r = env_.step_rates(rates);
            window_.push(r.info.yaw);
            reward += r.reward;
            ++n;
            out.observation = std::move(r.observation);
            if (r.done) {
                out.truncated = true;
                break;
            }
        }
        out.reward = reward / static_cast<double>(n);
        return out;
    }

    std::optional<double> safety_metric() const override { return window_.v30(); }
    WindFarmEnv& env() { return env_; }

private:
    WindFarmEnv env_;
    std::size_t steps_;
    SafetyWindow window_;
};

} // namespace wakelab
