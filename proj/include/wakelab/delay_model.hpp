// Pseudo-dynamic layer: advection delays, executed-yaw history and delay-aware power prediction.
#pragma once

#include "wake_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <span>
#include <stdexcept>
#include <vector>

namespace wakelab {

/// Dense row-major matrix of doubles; rows are usually time steps, columns turbines.
struct StepMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    StepMatrix() = default;
    StepMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

/// Pairwise advection delays; entry (j, i) is the travel time of j's wake to turbine i.
struct DelayMatrix {
    std::size_t n = 0;
    double dt = 5.0;
    std::vector<double> delays; // seconds, row j = source, column i = target
    std::vector<int> steps;

    double delay(std::size_t j, std::size_t i) const { return delays[j * n + i]; }
    int step(std::size_t j, std::size_t i) const { return steps[j * n + i]; }
    int max_step() const { return steps.empty() ? 0 : *std::max_element(steps.begin(), steps.end()); }
};

inline constexpr double kMinAdvectionSpeed = 1e-6;

inline DelayMatrix compute_delay_matrix(const FarmLayout& layout, const InflowState& inflow, double dt) {
    if (!(inflow.wind_speed > kMinAdvectionSpeed))
        throw std::invalid_argument("wind speed must be positive to compute advection delays");
    if (!(dt > 0.0)) throw std::invalid_argument("delay discretisation step must be positive");
    const FlowFrame frame(inflow.wind_direction);
    DelayMatrix dm;
    dm.n = layout.size();
    dm.dt = dt;
    dm.delays.assign(dm.n * dm.n, 0.0);
    dm.steps.assign(dm.n * dm.n, 0);
    for (std::size_t j = 0; j < dm.n; ++j) {
        for (std::size_t i = 0; i < dm.n; ++i) {
            if (i == j) continue;
            const double dx = layout.positions[i].x - layout.positions[j].x;
            const double dy = layout.positions[i].y - layout.positions[j].y;
            const double projected = dx * frame.c + dy * frame.s;
            if (projected <= 0.0) continue;
            dm.delays[j * dm.n + i] = projected / inflow.wind_speed;
            dm.steps[j * dm.n + i] = static_cast<int>(std::lround(dm.delays[j * dm.n + i] / dt));
        }
    }
    return dm;
}

/**
 * Executed yaw vectors with timestamps, oldest first.
 *
 * Lookups are zero-order hold: the latest record at or before the query time.
 * Queries before the first record return the oldest entry, i.e. the farm is
 * assumed to have held its initial yaws indefinitely.
 */
class YawHistory {
public:
    explicit YawHistory(std::size_t capacity = 4096) : capacity_(std::max<std::size_t>(capacity, 1)) {}

    void record(double time, std::span<const double> yaws) {
        if (!records_.empty()) {
            if (time <= records_.back().time) throw std::invalid_argument("yaw history timestamps must increase");
            if (yaws.size() != records_.back().yaws.size())
                throw std::invalid_argument("yaw history vector length changed");
        }
        records_.push_back({time, {yaws.begin(), yaws.end()}});
        while (records_.size() > capacity_) records_.pop_front();
    }

    std::span<const double> at(double time) const {
        if (records_.empty()) throw std::logic_error("yaw history is empty");
        constexpr double eps = 1e-9;
        auto it = std::upper_bound(records_.begin(), records_.end(), time + eps,
                                   [](double t, const Record& r) { return t < r.time; });
        if (it == records_.begin()) return records_.front().yaws;
        return std::prev(it)->yaws;
    }

    std::span<const double> latest() const { return records_.back().yaws; }
    double latest_time() const { return records_.back().time; }
    double oldest_time() const { return records_.front().time; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    std::size_t capacity() const { return capacity_; }

private:
    struct Record {
        double time;
        std::vector<double> yaws;
    };
    std::size_t capacity_;
    std::deque<Record> records_;
};

/// Yaw of every turbine as felt by `target` at step k after `t_origin` (entry j taken at step k - d_{j,target}).
inline std::vector<double> effective_yaws(const YawHistory& history, const DelayMatrix& dm, std::size_t target,
                                          int query_step, double t_origin = 0.0) {
    std::vector<double> out(dm.n);
    for (std::size_t j = 0; j < dm.n; ++j) {
        const int s = query_step - (j == target ? 0 : dm.step(j, target));
        out[j] = history.at(t_origin + s * dm.dt)[j];
    }
    return out;
}

/**
 * Delay-aware power predictor for one inflow estimate.
 *
 * Built once per MPC invocation; `powers` maps a plan (row k-1 holds the yaws at
 * step k) to per-step per-turbine power, reading steps <= 0 from the history.
 */
class PseudoDynamicModel {
public:
    PseudoDynamicModel(const Farm& farm, const InflowState& inflow, const YawHistory& history, double t_now,
                       double dt)
        : farm_(&farm), inflow_((check_inflow(inflow), inflow)), geom_(farm.layout, inflow.wind_direction),
          delays_(compute_delay_matrix(farm.layout, inflow, dt)) {
        const std::size_t n = farm.size();
        const int depth = delays_.max_step();
        past_ = StepMatrix(static_cast<std::size_t>(depth) + 1, n);
        for (int s = 0; s <= depth; ++s) {
            const auto y = history.at(t_now - s * dt);
            if (y.size() != n) throw std::invalid_argument("history yaw vector length must equal turbine count");
            std::copy(y.begin(), y.end(), past_.row(static_cast<std::size_t>(s)).begin());
        }
    }

    const DelayMatrix& delays() const { return delays_; }
    const FarmGeometry& geometry() const { return geom_; }

    /// Current yaws (step 0).
    std::span<const double> current() const { return past_.row(0); }

    StepMatrix powers(const StepMatrix& plan) const {
        const std::size_t n = farm_->size();
        if (plan.cols != n) throw std::invalid_argument("plan width must equal turbine count");
        StepMatrix out(plan.rows, n);
        std::vector<double> seen(n);
        for (std::size_t r = 0; r < plan.rows; ++r) {
            const int k = static_cast<int>(r) + 1;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const int s = k - (j == i ? 0 : delays_.step(j, i));
                    seen[j] = s >= 1 ? plan(static_cast<std::size_t>(s - 1), j) : past_(static_cast<std::size_t>(-s), j);
                }
                const double u = rotor_speed(*farm_, geom_, inflow_, seen, i);
                out(r, i) = turbine_power(farm_->turbines[i], u, plan(r, i));
            }
        }
        return out;
    }

private:
    const Farm* farm_;
    InflowState inflow_;
    FarmGeometry geom_;
    DelayMatrix delays_;
    StepMatrix past_; // row s = yaws s steps before now
};

/// Per-step per-turbine power over a plan of `planned.rows` future steps.
inline StepMatrix horizon_power(const Farm& farm, const InflowState& inflow, const YawHistory& history,
                                const StepMatrix& planned, double t_now, double dt) {
    return PseudoDynamicModel(farm, inflow, history, t_now, dt).powers(planned);
}

} // namespace wakelab
