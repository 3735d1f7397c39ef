// Transient stochastic farm simulator with yaw actuators, noisy local measurements and
// the normalised-power reward.
#pragma once

#include "delay_model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace wakelab {

struct Range {
    double min = 0.0;
    double max = 1.0;
};

struct EnvConfig {
    double sim_dt = 5.0;                  ///< [s]
    double wind_speed_mean = 10.0;        ///< [m/s]
    Range wind_dir_range{260.0, 280.0};   ///< episode mean direction is drawn from here [deg]
    double ti = 0.07;
    double yaw_rate_limit = 0.5;          ///< [deg/s]
    double episode_length = 1000.0;       ///< [s]
    double meander_amplitude = 26.745;    ///< stationary sd of lateral wake offsets [m], 0.15 D
    double meander_timescale = 60.0;      ///< [s]
    double dir_drift_sd = 1.0;            ///< stationary sd of direction about the episode mean [deg]
    double dir_drift_timescale = 60.0;    ///< [s]
    double speed_noise_sd = 0.3;          ///< [m/s]
    double direction_noise_sd = 2.0;      ///< [deg]
    Range obs_speed{0.0, 15.0};
    Range obs_direction{250.0, 290.0};
    Range obs_yaw{-45.0, 45.0};
    std::uint64_t seed = 0;

    void validate() const {
        if (!(sim_dt > 0.0)) throw std::invalid_argument("env.sim_dt must be > 0");
        if (!(wind_dir_range.max >= wind_dir_range.min)) throw std::invalid_argument("env.wind_dir_range is empty");
        if (!(yaw_rate_limit > 0.0)) throw std::invalid_argument("env.yaw_rate_limit must be > 0");
        if (!(wind_speed_mean > 0.0)) throw std::invalid_argument("env.wind_speed_mean must be > 0");
        if (!(ti > 0.0 && ti < 1.0)) throw std::invalid_argument("env.ti must lie in (0, 1)");
        if (!(episode_length > 0.0)) throw std::invalid_argument("env.episode_length must be > 0");
        if (meander_amplitude < 0.0 || dir_drift_sd < 0.0 || speed_noise_sd < 0.0 || direction_noise_sd < 0.0)
            throw std::invalid_argument("env noise amplitudes must be >= 0");
        if (!(meander_timescale > 0.0 && dir_drift_timescale > 0.0))
            throw std::invalid_argument("env timescales must be > 0");
    }
};

/// Affine map [x_min, x_max] -> [-1, 1], clipped.
inline double normalize(double x, Range r) {
    if (!(r.max > r.min)) throw std::invalid_argument("normalisation range is degenerate");
    return std::clamp(2.0 * (x - r.min) / (r.max - r.min) - 1.0, -1.0, 1.0);
}

/// Affine map [-1, 1] -> [x_min, x_max].
inline double denormalize_action(double a, double x_min, double x_max) {
    if (!(x_max > x_min)) throw std::invalid_argument("denormalisation range is degenerate");
    return (a + 1.0) / 2.0 * (x_max - x_min) + x_min;
}

inline double denormalize_action(double a, Range r) { return denormalize_action(a, r.min, r.max); }

struct Measurements {
    std::vector<double> speed;     ///< [m/s]
    std::vector<double> direction; ///< [deg]
    std::vector<double> yaw;       ///< [deg]
};

/// Interleaved (u, phi, gamma) per turbine, each in [-1, 1].
inline std::vector<double> normalize_obs(const Measurements& m, const EnvConfig& cfg) {
    std::vector<double> obs;
    obs.reserve(3 * m.speed.size());
    for (std::size_t i = 0; i < m.speed.size(); ++i) {
        obs.push_back(normalize(m.speed[i], cfg.obs_speed));
        obs.push_back(normalize(m.direction[i], cfg.obs_direction));
        obs.push_back(normalize(m.yaw[i], cfg.obs_yaw));
    }
    return obs;
}

/// Hidden simulator state. Only the inflow portion may be exposed to the idealised MPC.
struct EnvTruth {
    InflowState inflow;
    double mean_direction = 270.0;
    std::vector<double> meander; ///< lateral wake-centre offsets [m]
};

struct StepInfo {
    std::vector<double> power;     ///< per turbine [W]
    std::vector<double> yaw;       ///< executed yaw after the step [deg]
    InflowState inflow;            ///< true inflow during the step
    Measurements measurements;
    double time = 0.0;             ///< simulated time at the end of the step [s]
};

struct EnvStepResult {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

class WindFarmEnv {
public:
    WindFarmEnv(Farm farm, EnvConfig cfg) : farm_(std::move(farm)), cfg_(cfg) {
        farm_.validate();
        cfg_.validate();
        reset(cfg_.seed);
    }

    const Farm& farm() const { return farm_; }
    const EnvConfig& config() const { return cfg_; }
    std::size_t size() const { return farm_.size(); }
    double time() const { return time_; }
    const std::vector<double>& yaws() const { return yaw_; }
    const YawHistory& history() const { return history_; }
    const EnvTruth& truth() const { return truth_; }
    const StepInfo& last_info() const { return info_; }
    std::vector<double> observation() const { return normalize_obs(info_.measurements, cfg_); }

    /// Power normalisation: unwaked, unyawed power at the mean ambient speed.
    double rated_reference() const { return turbine_power(farm_.turbines.front(), cfg_.wind_speed_mean, 0.0); }

    /**
     * Reinitialises all hidden state from `seed`.
     *
     * With `pinned_direction` the episode mean is fixed (evaluation mode);
     * otherwise it is drawn uniformly from the configured range.
     */
    std::vector<double> reset(std::uint64_t seed, std::optional<double> pinned_direction = std::nullopt) {
        rng_.seed(seed);
        normal_.reset();
        time_ = 0.0;
        yaw_.assign(size(), 0.0);
        history_ = YawHistory(4096);
        history_.record(0.0, yaw_);
        std::uniform_real_distribution<double> dir(cfg_.wind_dir_range.min, cfg_.wind_dir_range.max);
        truth_.mean_direction = pinned_direction ? *pinned_direction : dir(rng_);
        truth_.inflow = {cfg_.wind_speed_mean, truth_.mean_direction, cfg_.ti};
        truth_.meander.assign(size(), 0.0);
        for (auto& m : truth_.meander) m = cfg_.meander_amplitude * normal_(rng_);
        evaluate();
        return observation();
    }

    EnvStepResult step_rates(std::span<const double> rates) {
        if (rates.size() != size()) throw std::invalid_argument("yaw command length must equal turbine count");
        for (double r : rates)
            if (!std::isfinite(r)) throw std::invalid_argument("yaw command contains non-finite values");
        for (std::size_t i = 0; i < size(); ++i) {
            const double r = std::clamp(rates[i], -cfg_.yaw_rate_limit, cfg_.yaw_rate_limit);
            yaw_[i] = std::clamp(yaw_[i] + r * cfg_.sim_dt, -kYawEnvelope, kYawEnvelope);
        }
        time_ += cfg_.sim_dt;
        history_.record(time_, yaw_);
        advance_weather();
        evaluate();
        EnvStepResult out;
        out.observation = observation();
        double total = 0.0;
        for (double p : info_.power) total += p;
        out.reward = total / (static_cast<double>(size()) * rated_reference());
        out.done = time_ >= cfg_.episode_length - 1e-9;
        out.info = info_;
        return out;
    }

    /// Moves each yaw toward an absolute target at no more than the rate limit.
    EnvStepResult step_targets(std::span<const double> targets) {
        if (targets.size() != size()) throw std::invalid_argument("yaw command length must equal turbine count");
        std::vector<double> rates(size());
        for (std::size_t i = 0; i < size(); ++i) {
            if (!std::isfinite(targets[i])) throw std::invalid_argument("yaw command contains non-finite values");
            rates[i] = (targets[i] - yaw_[i]) / cfg_.sim_dt;
        }
        return step_rates(rates);
    }

private:
    static double ou_step(double x, double mean, double sd, double dt, double tau, double noise) {
        const double decay = std::exp(-dt / tau);
        return mean + (x - mean) * decay + sd * std::sqrt(1.0 - decay * decay) * noise;
    }

    void advance_weather() {
        const Range r = cfg_.wind_dir_range;
        double wd = ou_step(truth_.inflow.wind_direction, truth_.mean_direction, cfg_.dir_drift_sd, cfg_.sim_dt,
                            cfg_.dir_drift_timescale, normal_(rng_));
        if (r.max > r.min) {
            if (wd > r.max) wd = 2.0 * r.max - wd;
            if (wd < r.min) wd = 2.0 * r.min - wd;
            wd = std::clamp(wd, r.min, r.max);
        }
        truth_.inflow.wind_direction = wd;
        for (auto& m : truth_.meander)
            m = ou_step(m, 0.0, cfg_.meander_amplitude, cfg_.sim_dt, cfg_.meander_timescale, normal_(rng_));
    }

    void evaluate() {
        const std::size_t n = size();
        const FarmGeometry geom(farm_.layout, truth_.inflow.wind_direction);
        const DelayMatrix dm = compute_delay_matrix(farm_.layout, truth_.inflow, cfg_.sim_dt);
        info_.power.assign(n, 0.0);
        info_.measurements.speed.assign(n, 0.0);
        info_.measurements.direction.assign(n, 0.0);
        info_.measurements.yaw = yaw_;
        std::vector<double> seen(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j)
                seen[j] = j == i ? yaw_[j] : history_.at(time_ - dm.step(j, i) * cfg_.sim_dt)[j];
            const double u = rotor_speed(farm_, geom, truth_.inflow, seen, i, truth_.meander);
            info_.power[i] = turbine_power(farm_.turbines[i], u, yaw_[i]);
            info_.measurements.speed[i] = u + cfg_.speed_noise_sd * normal_(rng_);
            info_.measurements.direction[i] = truth_.inflow.wind_direction + cfg_.direction_noise_sd * normal_(rng_);
        }
        info_.yaw = yaw_;
        info_.inflow = truth_.inflow;
        info_.time = time_;
    }

    Farm farm_;
    EnvConfig cfg_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    double time_ = 0.0;
    std::vector<double> yaw_;
    YawHistory history_;
    EnvTruth truth_;
    StepInfo info_;
};

} // namespace wakelab
