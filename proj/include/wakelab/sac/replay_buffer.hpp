#pragma once

#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace wakelab::sac {

struct Transition {
    std::vector<double> obs;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;
};

/// Column-major batch view, one transition per column.
struct Batch {
    std::size_t size = 0;
    std::size_t obs_dim = 0;
    std::size_t act_dim = 0;
    std::vector<double> obs;      // obs_dim x size
    std::vector<double> action;   // act_dim x size
    std::vector<double> reward;   // size
    std::vector<double> next_obs; // obs_dim x size
    std::vector<double> done;     // size, 1.0 when terminal
};

/// Fixed-capacity ring buffer with uniform sampling over the filled region.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::size_t obs_dim, std::size_t act_dim)
        : capacity_(capacity), obs_dim_(obs_dim), act_dim_(act_dim) {
        if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
    }

    void add(std::span<const double> obs, std::span<const double> action, double reward,
             std::span<const double> next_obs, bool done) {
        if (obs.size() != obs_dim_ || next_obs.size() != obs_dim_ || action.size() != act_dim_)
            throw std::invalid_argument("transition dimensions do not match the replay buffer");
        Transition t{{obs.begin(), obs.end()}, {action.begin(), action.end()}, reward,
                     {next_obs.begin(), next_obs.end()}, done};
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[cursor_] = std::move(t);
        }
        cursor_ = (cursor_ + 1) % capacity_;
        ++inserted_;
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::size_t inserted() const { return inserted_; }
    const Transition& operator[](std::size_t i) const { return data_.at(i); }

    template <typename Rng> Batch sample(std::size_t batch_size, Rng& rng) const {
        if (data_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
        std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
        std::vector<std::size_t> idx(batch_size);
        for (auto& i : idx) i = pick(rng);
        return gather(idx);
    }

    Batch gather(std::span<const std::size_t> idx) const {
        Batch b;
        b.size = idx.size();
        b.obs_dim = obs_dim_;
        b.act_dim = act_dim_;
        for (std::size_t i : idx) {
            const Transition& t = data_.at(i);
            b.obs.insert(b.obs.end(), t.obs.begin(), t.obs.end());
            b.action.insert(b.action.end(), t.action.begin(), t.action.end());
            b.reward.push_back(t.reward);
            b.next_obs.insert(b.next_obs.end(), t.next_obs.begin(), t.next_obs.end());
            b.done.push_back(t.done ? 1.0 : 0.0);
        }
        return b;
    }

private:
    std::size_t capacity_;
    std::size_t obs_dim_;
    std::size_t act_dim_;
    std::vector<Transition> data_;
    std::size_t cursor_ = 0;
    std::size_t inserted_ = 0;
};

} // namespace wakelab::sac
