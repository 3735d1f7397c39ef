// Soft actor-critic: squashed-Gaussian actor, twin critics with Polyak targets and
// an auto-tuned entropy temperature.
#pragma once

#include "mlp.hpp"
#include "replay_buffer.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wakelab::sac {

struct SACConfig {
    double gamma = 0.99;
    double lr = 3e-4;
    std::size_t batch_size = 256;
    double tau = 0.005;
    std::optional<double> target_entropy; ///< defaults to -(action dimension)
    std::size_t warmup = 5000;
    int updates_per_step = 1;
    std::vector<int> hidden{256, 256};
    std::size_t buffer_capacity = 1'000'000;
    double log_std_min = -5.0;
    double log_std_max = 2.0;
    double initial_log_alpha = 0.0;

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("sac.gamma must lie in (0, 1)");
        if (!(lr > 0.0)) throw std::invalid_argument("sac.lr must be > 0");
        if (batch_size == 0) throw std::invalid_argument("sac.batch_size must be > 0");
        if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("sac.tau must lie in [0, 1]");
        if (updates_per_step < 0) throw std::invalid_argument("sac.updates_per_step must be >= 0");
        if (hidden.empty()) throw std::invalid_argument("sac.hidden must list at least one layer");
        if (!(log_std_max > log_std_min)) throw std::invalid_argument("sac.log_std range is empty");
    }
};

struct PolicySample {
    std::vector<double> action;
    double log_prob = 0.0;
};

struct UpdateStats {
    double q1_loss = 0.0;
    double q2_loss = 0.0;
    double actor_loss = 0.0;
    double alpha_loss = 0.0;
    double alpha = 0.0;
};

template <typename Scalar> class SacAgent {
public:
    using Mat = Matrix<Scalar>;
    using Net = Mlp<Scalar>;

    struct CriticLoss {
        double value = 0.0; ///< q1 loss + q2 loss
        double q1 = 0.0;
        double q2 = 0.0;
        MlpGrads<Scalar> grad_q1, grad_q2;
    };

    struct ActorLoss {
        double value = 0.0;
        double mean_log_prob = 0.0;
        MlpGrads<Scalar> grad;
    };

    SacAgent(std::size_t obs_dim, std::size_t act_dim, SACConfig cfg, std::uint64_t init_seed,
             std::uint64_t noise_seed)
        : obs_dim_(obs_dim), act_dim_(act_dim), cfg_(std::move(cfg)), noise_rng_(noise_seed) {
        cfg_.validate();
        std::mt19937_64 init(init_seed);
        actor_ = Net(layer_sizes(obs_dim, 2 * act_dim), init);
        q1_ = Net(layer_sizes(obs_dim + act_dim, 1), init);
        q2_ = Net(layer_sizes(obs_dim + act_dim, 1), init);
        q1_target_ = q1_;
        q2_target_ = q2_;
        actor_opt_ = Adam<Scalar>(actor_, cfg_.lr);
        q1_opt_ = Adam<Scalar>(q1_, cfg_.lr);
        q2_opt_ = Adam<Scalar>(q2_, cfg_.lr);
        alpha_opt_ = ScalarAdam(cfg_.lr);
        log_alpha_ = cfg_.initial_log_alpha;
    }

    std::size_t obs_dim() const { return obs_dim_; }
    std::size_t act_dim() const { return act_dim_; }
    const SACConfig& config() const { return cfg_; }
    double alpha() const { return std::exp(log_alpha_); }
    double log_alpha() const { return log_alpha_; }
    void set_log_alpha(double v) { log_alpha_ = v; }
    double target_entropy() const { return cfg_.target_entropy.value_or(-static_cast<double>(act_dim_)); }

    Net& actor() { return actor_; }
    Net& q1() { return q1_; }
    Net& q2() { return q2_; }
    Net& q1_target() { return q1_target_; }
    Net& q2_target() { return q2_target_; }
    const Net& actor() const { return actor_; }

    /// Stochastic (or deterministic tanh(mu)) action in [-1, 1]^act_dim.
    PolicySample sample(std::span<const double> obs, bool deterministic = false) {
        if (obs.size() != obs_dim_) throw std::invalid_argument("observation has wrong dimension");
        Mat x(static_cast<Eigen::Index>(obs_dim_), 1);
        for (std::size_t i = 0; i < obs_dim_; ++i) {
            if (!std::isfinite(obs[i])) throw std::invalid_argument("observation contains non-finite values");
            x(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(obs[i]);
        }
        const Mat out = actor_.forward(x);
        if (!out.allFinite()) {
            std::ostringstream msg;
            msg << "actor produced non-finite output for observation [";
            for (std::size_t i = 0; i < obs_dim_; ++i) msg << (i ? ", " : "") << obs[i];
            msg << "]";
            throw std::runtime_error(msg.str());
        }
        const Mat noise = deterministic ? Mat::Zero(static_cast<Eigen::Index>(act_dim_), 1) : draw_noise(1);
        const Head h = head(out, noise);
        PolicySample s;
        for (std::size_t d = 0; d < act_dim_; ++d)
            s.action.push_back(static_cast<double>(h.action(static_cast<Eigen::Index>(d), 0)));
        s.log_prob = static_cast<double>(h.log_prob(0, 0));
        return s;
    }

    /// log pi(a|s) for a given action strictly inside (-1, 1)^act_dim.
    double log_prob(std::span<const double> obs, std::span<const double> action) const {
        if (obs.size() != obs_dim_ || action.size() != act_dim_) throw std::invalid_argument("wrong dimensions");
        const Mat out = actor_.forward(to_matrix({obs.begin(), obs.end()}, obs_dim_, 1));
        const auto a_dim = static_cast<Eigen::Index>(act_dim_);
        const Scalar lo = static_cast<Scalar>(cfg_.log_std_min), hi = static_cast<Scalar>(cfg_.log_std_max);
        Scalar lp = 0;
        for (Eigen::Index d = 0; d < a_dim; ++d) {
            const Scalar log_std = lo + Scalar(0.5) * (hi - lo) * (std::tanh(out(a_dim + d, 0)) + Scalar(1));
            const Scalar a = static_cast<Scalar>(action[static_cast<std::size_t>(d)]);
            const Scalar xi = (std::atanh(a) - out(d, 0)) / std::exp(log_std);
            lp += log_density(xi, log_std, a);
        }
        return static_cast<double>(lp);
    }

    /// Twin-critic regression loss toward the soft Bellman target; `noise_next` drives a' ~ pi(.|s').
    CriticLoss critic_loss(const Batch& b, const Mat& noise_next) const {
        const Mat obs = to_matrix(b.obs, obs_dim_, b.size);
        const Mat act = to_matrix(b.action, act_dim_, b.size);
        const Mat next = to_matrix(b.next_obs, obs_dim_, b.size);
        const Head nh = head(actor_.forward(next), noise_next);
        const Mat next_in = stack(next, nh.action);
        const Mat tq = q1_target_.forward(next_in).cwiseMin(q2_target_.forward(next_in));
        const Scalar alpha = static_cast<Scalar>(std::exp(log_alpha_));
        Mat y(1, static_cast<Eigen::Index>(b.size));
        for (std::size_t k = 0; k < b.size; ++k) {
            const auto c = static_cast<Eigen::Index>(k);
            y(0, c) = static_cast<Scalar>(b.reward[k]) +
                      static_cast<Scalar>(cfg_.gamma * (1.0 - b.done[k])) * (tq(0, c) - alpha * nh.log_prob(0, c));
        }
        const Mat in = stack(obs, act);
        typename Net::Cache c1, c2;
        const Mat q1 = q1_.forward(in, &c1);
        const Mat q2 = q2_.forward(in, &c2);
        const Scalar n = static_cast<Scalar>(b.size);
        const Mat e1 = q1 - y, e2 = q2 - y;
        CriticLoss out;
        out.q1 = static_cast<double>(e1.squaredNorm() / n);
        out.q2 = static_cast<double>(e2.squaredNorm() / n);
        out.value = out.q1 + out.q2;
        out.grad_q1 = q1_.backward(c1, (Scalar(2) / n) * e1);
        out.grad_q2 = q2_.backward(c2, (Scalar(2) / n) * e2);
        return out;
    }

    /// Reparameterised actor loss mean(alpha * log pi(a|s) - min Q(s, a)) with fixed noise.
    ActorLoss actor_loss(const Batch& b, const Mat& noise) const {
        const Mat obs = to_matrix(b.obs, obs_dim_, b.size);
        typename Net::Cache ca;
        const Mat out = actor_.forward(obs, &ca);
        const Head h = head(out, noise);
        const Mat in = stack(obs, h.action);
        typename Net::Cache c1, c2;
        const Mat q1 = q1_.forward(in, &c1);
        const Mat q2 = q2_.forward(in, &c2);
        const auto bsz = static_cast<Eigen::Index>(b.size);
        const Scalar n = static_cast<Scalar>(b.size);
        const Scalar alpha = static_cast<Scalar>(std::exp(log_alpha_));

        Mat d1 = Mat::Zero(1, bsz), d2 = Mat::Zero(1, bsz);
        double value = 0.0, mean_lp = 0.0;
        for (Eigen::Index k = 0; k < bsz; ++k) {
            const bool first = q1(0, k) <= q2(0, k);
            const Scalar qmin = first ? q1(0, k) : q2(0, k);
            (first ? d1 : d2)(0, k) = Scalar(-1) / n;
            value += static_cast<double>(alpha * h.log_prob(0, k) - qmin);
            mean_lp += static_cast<double>(h.log_prob(0, k));
        }
        Mat din1, din2;
        q1_.backward(c1, d1, &din1, false);
        q2_.backward(c2, d2, &din2, false);
        const auto a_dim = static_cast<Eigen::Index>(act_dim_);
        const Mat d_action = din1.bottomRows(a_dim) + din2.bottomRows(a_dim);

        const Scalar half_span = Scalar(0.5) * static_cast<Scalar>(cfg_.log_std_max - cfg_.log_std_min);
        Mat d_out(2 * a_dim, bsz);
        for (Eigen::Index k = 0; k < bsz; ++k) {
            for (Eigen::Index d = 0; d < a_dim; ++d) {
                const Scalar a = h.action(d, k);
                const Scalar one_minus = Scalar(1) - a * a;
                const Scalar d_u = d_action(d, k) * one_minus +
                                   (alpha / n) * Scalar(2) * a * one_minus / (one_minus + kSquashEps);
                const Scalar d_log_std = d_u * h.std(d, k) * noise(d, k) - alpha / n;
                const Scalar t = std::tanh(out(a_dim + d, k));
                d_out(d, k) = d_u;
                d_out(a_dim + d, k) = d_log_std * half_span * (Scalar(1) - t * t);
            }
        }
        ActorLoss res;
        res.value = value / static_cast<double>(b.size);
        res.mean_log_prob = mean_lp / static_cast<double>(b.size);
        res.grad = actor_.backward(ca, d_out);
        return res;
    }

    /// Temperature loss -alpha * mean(log pi + target entropy) and its derivative w.r.t. log alpha.
    std::pair<double, double> alpha_loss(double mean_log_prob) const {
        const double a = std::exp(log_alpha_);
        const double g = -(mean_log_prob + target_entropy());
        return {a * g, a * g};
    }

    UpdateStats update(const Batch& b) {
        const Mat noise_next = draw_noise(b.size);
        const Mat noise = draw_noise(b.size);
        return update(b, noise_next, noise);
    }

    UpdateStats update(const Batch& b, const Mat& noise_next, const Mat& noise) {
        UpdateStats s;
        const CriticLoss cl = critic_loss(b, noise_next);
        if (!std::isfinite(cl.value)) throw std::runtime_error(divergence("critic", cl.value));
        q1_opt_.step(q1_, cl.grad_q1);
        q2_opt_.step(q2_, cl.grad_q2);
        s.q1_loss = cl.q1;
        s.q2_loss = cl.q2;

        const ActorLoss al = actor_loss(b, noise);
        if (!std::isfinite(al.value)) throw std::runtime_error(divergence("actor", al.value));
        actor_opt_.step(actor_, al.grad);
        s.actor_loss = al.value;

        const auto [aloss, agrad] = alpha_loss(al.mean_log_prob);
        log_alpha_ = alpha_opt_.step(log_alpha_, agrad);
        s.alpha_loss = aloss;
        s.alpha = alpha();

        q1_target_.polyak_from(q1_, static_cast<Scalar>(cfg_.tau));
        q2_target_.polyak_from(q2_, static_cast<Scalar>(cfg_.tau));
        ++updates_;
        return s;
    }

    long updates() const { return updates_; }

    Mat draw_noise(std::size_t columns) {
        Mat m(static_cast<Eigen::Index>(act_dim_), static_cast<Eigen::Index>(columns));
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<Scalar>(normal_(noise_rng_));
        return m;
    }

    /// Self-describing text checkpoint; values in hex-float so reloads are exact.
    void save(std::ostream& os, long step) const {
        os << "wakelab-sac-checkpoint 1\n";
        os << "scalar " << (sizeof(Scalar) == sizeof(float) ? "float" : "double") << "\n";
        os << "obs_dim " << obs_dim_ << "\nact_dim " << act_dim_ << "\nhidden " << cfg_.hidden.size();
        for (int h : cfg_.hidden) os << ' ' << h;
        os << "\nstep " << step << "\nupdates " << updates_ << "\n";
        os << std::hexfloat;
        os << "log_alpha " << log_alpha_ << "\n";
        write_net(os, "actor", actor_);
        write_net(os, "q1", q1_);
        write_net(os, "q2", q2_);
        write_net(os, "q1_target", q1_target_);
        write_net(os, "q2_target", q2_target_);
        os << std::defaultfloat << "end\n";
        if (!os) throw std::runtime_error("failed to write checkpoint");
    }

    /// Restores parameters; returns the saved training step.
    long load(std::istream& is) {
        std::string key, tag;
        int version = 0;
        is >> key >> version;
        if (key != "wakelab-sac-checkpoint" || version != 1) throw std::runtime_error("not a wakelab SAC checkpoint");
        std::string scalar;
        std::size_t od = 0, ad = 0, nh = 0;
        is >> key >> scalar >> key >> od >> key >> ad >> key >> nh;
        std::vector<int> hidden(nh);
        for (auto& h : hidden) is >> h;
        if (od != obs_dim_ || ad != act_dim_ || hidden != cfg_.hidden)
            throw std::runtime_error("checkpoint network shape does not match the agent");
        long step = 0;
        is >> key >> step >> key >> updates_;
        is >> key;
        log_alpha_ = read_double(is);
        read_net(is, "actor", actor_);
        read_net(is, "q1", q1_);
        read_net(is, "q2", q2_);
        read_net(is, "q1_target", q1_target_);
        read_net(is, "q2_target", q2_target_);
        if (!is) throw std::runtime_error("truncated checkpoint");
        return step;
    }

private:
    static constexpr Scalar kSquashEps = Scalar(1e-6);

    struct Head {
        Mat action;   // tanh(u)
        Mat std;      // sigma
        Mat log_prob; // 1 x batch
    };

    std::vector<int> layer_sizes(std::size_t in, std::size_t out) const {
        std::vector<int> s{static_cast<int>(in)};
        s.insert(s.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        s.push_back(static_cast<int>(out));
        return s;
    }

    /// Gaussian log-density of the pre-squash sample plus the tanh change of variables.
    static Scalar log_density(Scalar xi, Scalar log_std, Scalar a) {
        const Scalar log_norm = static_cast<Scalar>(0.5 * std::log(2.0 * std::numbers::pi));
        return -Scalar(0.5) * xi * xi - log_std - log_norm - std::log(Scalar(1) - a * a + kSquashEps);
    }

    Head head(const Mat& out, const Mat& noise) const {
        const auto a_dim = static_cast<Eigen::Index>(act_dim_);
        const Scalar lo = static_cast<Scalar>(cfg_.log_std_min), hi = static_cast<Scalar>(cfg_.log_std_max);
        Head h;
        h.action.resize(a_dim, out.cols());
        h.std.resize(a_dim, out.cols());
        h.log_prob = Mat::Zero(1, out.cols());
        for (Eigen::Index k = 0; k < out.cols(); ++k) {
            for (Eigen::Index d = 0; d < a_dim; ++d) {
                const Scalar log_std = lo + Scalar(0.5) * (hi - lo) * (std::tanh(out(a_dim + d, k)) + Scalar(1));
                const Scalar sd = std::exp(log_std);
                const Scalar xi = noise(d, k);
                const Scalar a = std::tanh(out(d, k) + sd * xi);
                h.std(d, k) = sd;
                h.action(d, k) = a;
                h.log_prob(0, k) += log_density(xi, log_std, a);
            }
        }
        return h;
    }

    static Mat to_matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
        Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t c = 0; c < cols; ++c)
            for (std::size_t r = 0; r < rows; ++r)
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<Scalar>(v[c * rows + r]);
        return m;
    }

    static Mat stack(const Mat& top, const Mat& bottom) {
        Mat m(top.rows() + bottom.rows(), top.cols());
        m << top, bottom;
        return m;
    }

    std::string divergence(const char* which, double value) const {
        std::ostringstream msg;
        msg << "SAC " << which << " loss diverged (" << value << ") after " << updates_ << " updates, alpha "
            << alpha();
        return msg.str();
    }

    static void write_net(std::ostream& os, const char* name, const Net& net) {
        const auto p = net.flat();
        os << "network " << name << ' ' << p.size() << '\n';
        for (double v : p) os << v << '\n';
    }

    static double read_double(std::istream& is) {
        std::string tok;
        is >> tok;
        return std::strtod(tok.c_str(), nullptr);
    }

    static void read_net(std::istream& is, const char* name, Net& net) {
        std::string key, tag;
        std::size_t count = 0;
        is >> key >> tag >> count;
        if (key != "network" || tag != name || count != net.parameter_count())
            throw std::runtime_error(std::string("checkpoint network block mismatch for ") + name);
        std::vector<double> p(count);
        for (auto& v : p) v = read_double(is);
        net.set_flat(p);
    }

    std::size_t obs_dim_;
    std::size_t act_dim_;
    SACConfig cfg_;
    Net actor_, q1_, q2_, q1_target_, q2_target_;
    Adam<Scalar> actor_opt_, q1_opt_, q2_opt_;
    ScalarAdam alpha_opt_;
    double log_alpha_ = 0.0;
    long updates_ = 0;
    std::mt19937_64 noise_rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace wakelab::sac
