// Basis-function yaw trajectories and the back-to-front receding-horizon solve.
#pragma once

#include "delay_model.hpp"
#include "direct_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace wakelab {

/// Two-parameter trajectory shape: o1 sets direction and amplitude, o2 the start time.
struct BasisParams {
    double o1 = 0.5;
    double o2 = 0.0;

    static BasisParams hold() { return {}; }
    bool valid() const { return o1 >= 0.0 && o1 <= 1.0 && o2 >= 0.0 && o2 <= 1.0; }
};

struct MPCConfig {
    double t_ah = 100.0;             ///< trajectory time scale [s]
    double horizon = 500.0;          ///< prediction horizon [s]
    double dt = 5.0;                 ///< prediction step [s]
    double r_gamma_max = 0.5;        ///< [deg/s]
    double gamma_max = 33.0;         ///< [deg]
    double gamma_min = -33.0;        ///< [deg]
    double sigmoid_slope = 50.0;     ///< per degree
    double control_interval = 60.0;  ///< re-solve period [s]
    direct::DirectConfig optimizer{}; ///< budget is per turbine

    std::size_t horizon_steps() const { return static_cast<std::size_t>(std::lround(horizon / dt)); }

    void validate() const {
        if (!(t_ah > 0.0 && horizon >= t_ah)) throw std::invalid_argument("mpc.horizon must be >= mpc.t_ah > 0");
        if (!(dt > 0.0)) throw std::invalid_argument("mpc.dt must be > 0");
        if (!(r_gamma_max > 0.0)) throw std::invalid_argument("mpc.r_gamma_max must be > 0");
        if (!(gamma_min < 0.0 && gamma_max > 0.0)) throw std::invalid_argument("mpc.gamma_min < 0 < mpc.gamma_max required");
        if (!(control_interval > 0.0)) throw std::invalid_argument("mpc.control_interval must be > 0");
        optimizer.validate();
    }
};

inline constexpr double saturate(double x, double a, double b) { return x < a ? a : (x > b ? b : x); }

/// Normalised start time of the ramp.
inline double start_time(double o1, double o2) { return o2 * (1.0 - 2.0 * std::abs(o1 - 0.5)); }

/// Yaw change [deg] at time t after the solve; a rate-limited ramp followed by a plateau.
inline double basis(double o1, double o2, double t, const MPCConfig& cfg) {
    const double half_span = std::abs(o1 - 0.5);
    if (half_span < 1e-9) return 0.0;
    const double ramp = saturate((t / cfg.t_ah - start_time(o1, o2)) / (2.0 * half_span), 0.0, 1.0);
    return 2.0 * (o1 - 0.5) * ramp * cfg.r_gamma_max * cfg.t_ah;
}

inline double basis(const BasisParams& p, double t, const MPCConfig& cfg) { return basis(p.o1, p.o2, t, cfg); }

inline double smooth_step(double x, double slope) { return 0.5 * std::tanh(slope * x) + 0.5; }

/// Multiplier close to 1 inside (gamma_min, gamma_max) and close to 0 outside.
inline double yaw_penalty(double gamma, const MPCConfig& cfg) {
    return smooth_step(cfg.gamma_max - gamma, cfg.sigmoid_slope) *
           smooth_step(gamma - cfg.gamma_min, cfg.sigmoid_slope);
}

/**
 * Receding-horizon energy objective for one inflow estimate and history snapshot.
 *
 * The delay-aware model is prepared once; `cost` can then be called many times
 * by the optimiser.
 */
class MpcProblem {
public:
    MpcProblem(const Farm& farm, const InflowState& estimate, const YawHistory& history, double t_now,
               const MPCConfig& cfg)
        : cfg_(cfg), model_(farm, estimate, history, t_now, cfg.dt),
          current_(model_.current().begin(), model_.current().end()), steps_(cfg.horizon_steps()) {}

    std::size_t size() const { return current_.size(); }
    const std::vector<double>& current_yaws() const { return current_; }
    const PseudoDynamicModel& model() const { return model_; }
    const MPCConfig& config() const { return cfg_; }

    /// Yaw at time t for turbine i under its basis parameters.
    double yaw_at(const BasisParams& p, std::size_t i, double t) const { return current_[i] + basis(p, t, cfg_); }

    StepMatrix plan(std::span<const BasisParams> params) const {
        StepMatrix out(steps_, size());
        for (std::size_t k = 0; k < steps_; ++k)
            for (std::size_t i = 0; i < size(); ++i)
                out(k, i) = yaw_at(params[i], i, static_cast<double>(k + 1) * cfg_.dt);
        return out;
    }

    /// Penalised energy over the horizon [J].
    double cost(std::span<const BasisParams> params) const {
        if (params.size() != size()) throw std::invalid_argument("need one BasisParams per turbine");
        const StepMatrix yaws = plan(params);
        const StepMatrix power = model_.powers(yaws);
        double sum = 0.0;
        for (std::size_t k = 0; k < steps_; ++k)
            for (std::size_t i = 0; i < size(); ++i) sum += power(k, i) * yaw_penalty(yaws(k, i), cfg_);
        return cfg_.dt * sum;
    }

private:
    MPCConfig cfg_;
    PseudoDynamicModel model_;
    std::vector<double> current_;
    std::size_t steps_;
};

inline double mpc_cost(const Farm& farm, std::span<const BasisParams> params, const YawHistory& history,
                       double t_now, const InflowState& estimate, const MPCConfig& cfg) {
    return MpcProblem(farm, estimate, history, t_now, cfg).cost(params);
}

struct MpcSolution {
    std::vector<BasisParams> params;
    StepMatrix commands;     ///< absolute yaw targets at t_now + m*sim_dt, m = 1..interval/sim_dt
    double cost = 0.0;       ///< objective of the returned parameters
    double hold_cost = 0.0;  ///< objective of holding all yaws
    int evaluations = 0;
    bool degraded = false;   ///< optimiser failed; commands hold current yaws
};

/// Called once per objective evaluation with (turbine being optimised, all params, J).
using SolverTrace = std::function<void(std::size_t, std::span<const BasisParams>, double)>;

/**
 * Sequential solve from the most downstream turbine to the most upstream one.
 *
 * Each turbine's (o1, o2) is optimised with DIRECT on the full-farm objective,
 * already-solved turbines fixed at their optimum and the rest holding yaw.
 * Throws std::invalid_argument on an unusable estimate (e.g. zero wind speed).
 */
inline MpcSolution solve_back_to_front(const Farm& farm, const YawHistory& history, double t_now,
                                       const InflowState& estimate, const MPCConfig& cfg, double sim_dt,
                                       const SolverTrace& trace = {}) {
    cfg.validate();
    if (!(sim_dt > 0.0)) throw std::invalid_argument("sim_dt must be > 0");
    const MpcProblem problem(farm, estimate, history, t_now, cfg);
    const std::size_t n = problem.size();

    MpcSolution sol;
    sol.params.assign(n, BasisParams::hold());
    sol.hold_cost = problem.cost(sol.params);
    sol.cost = sol.hold_cost;

    auto order = problem.model().geometry().upstream_order();
    std::reverse(order.begin(), order.end());

    try {
        for (std::size_t turbine : order) {
            std::vector<BasisParams> trial = sol.params;
            const direct::Objective objective = [&](std::span<const double> o) {
                trial[turbine] = {o[0], o[1]};
                const double j = problem.cost(trial);
                if (trace) trace(turbine, trial, j);
                return j;
            };
            const auto result = direct::maximize(objective, 2, cfg.optimizer);
            sol.evaluations += result.evaluations;
            if (result.value >= sol.cost) {
                sol.params[turbine] = {result.x[0], result.x[1]};
                sol.cost = result.value;
            }
        }
    } catch (const std::runtime_error&) {
        sol.params.assign(n, BasisParams::hold());
        sol.cost = sol.hold_cost;
        sol.degraded = true;
    }

    const auto interval_steps = static_cast<std::size_t>(std::lround(cfg.control_interval / sim_dt));
    sol.commands = StepMatrix(interval_steps, n);
    for (std::size_t m = 0; m < interval_steps; ++m)
        for (std::size_t i = 0; i < n; ++i)
            sol.commands(m, i) = std::clamp(problem.yaw_at(sol.params[i], i, static_cast<double>(m + 1) * sim_dt),
                                            -kYawEnvelope, kYawEnvelope);
    return sol;
}

} // namespace wakelab
