// DIRECT (DIviding RECTangles) global minimiser over the unit hypercube.
//
// Canonical Jones scheme: sample the box centre, repeatedly pick the
// potentially-optimal rectangles from the lower-right convex hull of
// (half-diagonal, value) pairs and trisect them along their longest sides.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <span>
#include <stdexcept>
#include <vector>

namespace wakelab::direct {

struct DirectConfig {
    int max_evaluations = 150;
    double epsilon = 1e-4;
    int max_level = 12; ///< smallest side is 3^-max_level

    void validate() const {
        if (max_evaluations < 1) throw std::invalid_argument("direct.max_evaluations must be >= 1");
        if (!(epsilon >= 0.0)) throw std::invalid_argument("direct.epsilon must be >= 0");
        if (max_level < 1) throw std::invalid_argument("direct.max_level must be >= 1");
    }
};

struct Rectangle {
    std::vector<double> center;
    std::vector<int> level; ///< side along d is 3^-level[d]
    double f_value = 0.0;
    double measure = 0.0; ///< half-diagonal norm
    std::size_t id = 0;   ///< creation order

    double side(std::size_t d) const { return std::pow(3.0, -level[d]); }

    double volume() const {
        double v = 1.0;
        for (std::size_t d = 0; d < level.size(); ++d) v *= side(d);
        return v;
    }
};

struct Sample {
    std::vector<double> x;
    double f = 0.0;
};

struct DirectResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    int iterations = 0;
    std::vector<Sample> trace;         ///< every evaluation in order
    std::vector<Rectangle> rectangles; ///< final partition of the box
};

using Objective = std::function<double(std::span<const double>)>;

namespace detail {

inline double half_diagonal(const std::vector<int>& level) {
    // Sorted so rectangles with permuted sides get bitwise identical measures.
    std::vector<int> sorted = level;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (int l : sorted) {
        const double s = std::pow(3.0, -l);
        sum += s * s;
    }
    return 0.5 * std::sqrt(sum);
}

class Search {
public:
    Search(const Objective& f, std::size_t n, const DirectConfig& cfg) : f_(f), n_(n), cfg_(cfg) {}

    DirectResult run() {
        Rectangle root;
        root.center.assign(n_, 0.5);
        root.level.assign(n_, 0);
        root.f_value = evaluate(root.center);
        root.measure = half_diagonal(root.level);
        root.id = next_id_++;
        rects_.push_back(std::move(root));

        while (result_.evaluations < cfg_.max_evaluations) {
            const auto selected = potentially_optimal();
            bool divided_any = false;
            bool out_of_budget = false;
            for (std::size_t idx : selected) {
                const int min_level = *std::min_element(rects_[idx].level.begin(), rects_[idx].level.end());
                if (min_level + 1 > cfg_.max_level) continue;
                const auto dims = longest_dims(rects_[idx]);
                if (result_.evaluations + 2 * static_cast<int>(dims.size()) > cfg_.max_evaluations) {
                    out_of_budget = true;
                    break;
                }
                divide(idx, dims);
                divided_any = true;
            }
            ++result_.iterations;
            if (out_of_budget || !divided_any) break;
        }
        result_.rectangles = rects_;
        return std::move(result_);
    }

private:
    double evaluate(const std::vector<double>& x) {
        const double v = f_(x);
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "DIRECT objective returned non-finite value " << v << " at point (";
            for (std::size_t d = 0; d < x.size(); ++d) msg << (d ? ", " : "") << x[d];
            msg << ")";
            throw std::runtime_error(msg.str());
        }
        ++result_.evaluations;
        result_.trace.push_back({x, v});
        if (v < result_.value) {
            result_.value = v;
            result_.x = x;
        }
        return v;
    }

    std::vector<std::size_t> longest_dims(const Rectangle& r) const {
        const int min_level = *std::min_element(r.level.begin(), r.level.end());
        std::vector<std::size_t> dims;
        for (std::size_t d = 0; d < n_; ++d)
            if (r.level[d] == min_level) dims.push_back(d);
        return dims;
    }

    std::vector<std::size_t> potentially_optimal() const {
        // Best rectangle per distinct measure; ties broken by creation order.
        std::map<double, std::size_t> best;
        for (std::size_t k = 0; k < rects_.size(); ++k) {
            auto [it, inserted] = best.try_emplace(rects_[k].measure, k);
            if (!inserted) {
                const auto& cur = rects_[it->second];
                if (rects_[k].f_value < cur.f_value || (rects_[k].f_value == cur.f_value && rects_[k].id < cur.id))
                    it->second = k;
            }
        }
        std::vector<std::size_t> groups;
        for (const auto& [m, k] : best) groups.push_back(k);

        // Start of the hull: lowest value, larger measure on ties.
        std::size_t start = 0;
        for (std::size_t g = 1; g < groups.size(); ++g)
            if (rects_[groups[g]].f_value <= rects_[groups[start]].f_value) start = g;

        std::vector<std::size_t> hull;
        for (std::size_t g = start; g < groups.size(); ++g) {
            const auto& p = rects_[groups[g]];
            while (hull.size() >= 2) {
                const auto& a = rects_[hull[hull.size() - 2]];
                const auto& b = rects_[hull.back()];
                const double cross = (b.measure - a.measure) * (p.f_value - a.f_value) -
                                     (b.f_value - a.f_value) * (p.measure - a.measure);
                if (cross > 0.0) break;
                hull.pop_back();
            }
            hull.push_back(groups[g]);
        }

        const double f_min = result_.value;
        const double threshold = f_min - cfg_.epsilon * std::abs(f_min);
        std::vector<std::size_t> selected;
        for (std::size_t h = 0; h < hull.size(); ++h) {
            const auto& r = rects_[hull[h]];
            if (h + 1 < hull.size()) {
                const auto& next = rects_[hull[h + 1]];
                const double k = (next.f_value - r.f_value) / (next.measure - r.measure);
                if (r.f_value - k * r.measure > threshold) continue;
            }
            selected.push_back(hull[h]);
        }
        // Larger rectangles first.
        std::reverse(selected.begin(), selected.end());
        return selected;
    }

    void divide(std::size_t idx, const std::vector<std::size_t>& dims) {
        const double delta = rects_[idx].side(dims.front()) / 3.0;
        struct Probe {
            std::size_t dim;
            std::vector<double> plus, minus;
            double f_plus, f_minus;
        };
        std::vector<Probe> probes;
        for (std::size_t d : dims) {
            Probe p{d, rects_[idx].center, rects_[idx].center, 0.0, 0.0};
            p.plus[d] += delta;
            p.minus[d] -= delta;
            p.f_plus = evaluate(p.plus);
            p.f_minus = evaluate(p.minus);
            probes.push_back(std::move(p));
        }
        std::stable_sort(probes.begin(), probes.end(), [](const Probe& a, const Probe& b) {
            return std::min(a.f_plus, a.f_minus) < std::min(b.f_plus, b.f_minus);
        });
        for (auto& p : probes) {
            rects_[idx].level[p.dim] += 1;
            for (auto* side : {&p.plus, &p.minus}) {
                Rectangle child;
                child.center = *side;
                child.level = rects_[idx].level;
                child.f_value = side == &p.plus ? p.f_plus : p.f_minus;
                child.measure = half_diagonal(child.level);
                child.id = next_id_++;
                rects_.push_back(std::move(child));
            }
        }
        rects_[idx].measure = half_diagonal(rects_[idx].level);
    }

    const Objective& f_;
    std::size_t n_;
    DirectConfig cfg_;
    std::vector<Rectangle> rects_;
    std::size_t next_id_ = 0;
    DirectResult result_;
};

} // namespace detail

inline DirectResult minimize(const Objective& objective, std::size_t n, const DirectConfig& cfg = {}) {
    if (n < 1) throw std::invalid_argument("DIRECT dimension must be >= 1");
    cfg.validate();
    return detail::Search(objective, n, cfg).run();
}

inline DirectResult maximize(const Objective& objective, std::size_t n, const DirectConfig& cfg = {}) {
    const Objective negated = [&objective](std::span<const double> x) { return -objective(x); };
    DirectResult r = minimize(negated, n, cfg);
    r.value = -r.value;
    for (auto& s : r.trace) s.f = -s.f;
    for (auto& rect : r.rectangles) rect.f_value = -rect.f_value;
    return r;
}

} // namespace wakelab::direct
