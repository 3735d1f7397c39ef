// Fully connected ReLU network with explicit backpropagation and an Adam optimiser.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace wakelab::sac {

template <typename Scalar> using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar> using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Parameter-shaped gradient container.
template <typename Scalar> struct MlpGrads {
    std::vector<Matrix<Scalar>> weights;
    std::vector<Vector<Scalar>> biases;
};

/**
 * Column-batched MLP: inputs are (features x batch), hidden layers use ReLU and
 * the output layer is linear.
 */
template <typename Scalar> class Mlp {
public:
    struct Cache {
        std::vector<Matrix<Scalar>> inputs; ///< input to each layer
        std::vector<Matrix<Scalar>> pre;    ///< pre-activation of each layer
    };

    Mlp() = default;

    /// PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
    Mlp(std::vector<int> sizes, std::mt19937_64& rng) : sizes_(std::move(sizes)) {
        if (sizes_.size() < 2) throw std::invalid_argument("MLP needs at least input and output sizes");
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            const int in = sizes_[l], out = sizes_[l + 1];
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            std::uniform_real_distribution<double> u(-bound, bound);
            Matrix<Scalar> w(out, in);
            Vector<Scalar> b(out);
            for (int r = 0; r < out; ++r)
                for (int c = 0; c < in; ++c) w(r, c) = static_cast<Scalar>(u(rng));
            for (int r = 0; r < out; ++r) b(r) = static_cast<Scalar>(u(rng));
            weights_.push_back(std::move(w));
            biases_.push_back(std::move(b));
        }
    }

    const std::vector<int>& sizes() const { return sizes_; }
    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    std::size_t layers() const { return weights_.size(); }

    Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache = nullptr) const {
        Matrix<Scalar> h = x;
        if (cache) {
            cache->inputs.clear();
            cache->pre.clear();
        }
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            Matrix<Scalar> z = weights_[l] * h;
            z.colwise() += biases_[l];
            if (cache) {
                cache->inputs.push_back(std::move(h));
                cache->pre.push_back(z);
            }
            h = (l + 1 < weights_.size()) ? Matrix<Scalar>(z.cwiseMax(Scalar(0))) : std::move(z);
        }
        return h;
    }

    /// Gradients of a loss given dLoss/dOutput; optionally dLoss/dInput.
    MlpGrads<Scalar> backward(const Cache& cache, const Matrix<Scalar>& d_out, Matrix<Scalar>* d_input = nullptr,
                              bool parameter_grads = true) const {
        MlpGrads<Scalar> g;
        g.weights.resize(weights_.size());
        g.biases.resize(weights_.size());
        Matrix<Scalar> delta = d_out;
        for (std::size_t l = weights_.size(); l-- > 0;) {
            if (l + 1 < weights_.size())
                delta = delta.cwiseProduct((cache.pre[l].array() > Scalar(0)).template cast<Scalar>().matrix());
            if (parameter_grads) {
                g.weights[l].noalias() = delta * cache.inputs[l].transpose();
                g.biases[l] = delta.rowwise().sum();
            }
            if (l > 0 || d_input) {
                Matrix<Scalar> next = weights_[l].transpose() * delta;
                delta = std::move(next);
            }
        }
        if (d_input) *d_input = std::move(delta);
        return g;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
        return n;
    }

    /// Flattened parameters, layer by layer: weights (column-major) then biases.
    std::vector<double> flat() const {
        std::vector<double> out;
        out.reserve(parameter_count());
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            for (Eigen::Index k = 0; k < weights_[l].size(); ++k) out.push_back(weights_[l].data()[k]);
            for (Eigen::Index k = 0; k < biases_[l].size(); ++k) out.push_back(biases_[l].data()[k]);
        }
        return out;
    }

    void set_flat(const std::vector<double>& p) {
        if (p.size() != parameter_count()) throw std::invalid_argument("parameter vector has wrong length");
        std::size_t i = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            for (Eigen::Index k = 0; k < weights_[l].size(); ++k) weights_[l].data()[k] = static_cast<Scalar>(p[i++]);
            for (Eigen::Index k = 0; k < biases_[l].size(); ++k) biases_[l].data()[k] = static_cast<Scalar>(p[i++]);
        }
    }

    static std::vector<double> flatten(const MlpGrads<Scalar>& g) {
        std::vector<double> out;
        for (std::size_t l = 0; l < g.weights.size(); ++l) {
            for (Eigen::Index k = 0; k < g.weights[l].size(); ++k) out.push_back(g.weights[l].data()[k]);
            for (Eigen::Index k = 0; k < g.biases[l].size(); ++k) out.push_back(g.biases[l].data()[k]);
        }
        return out;
    }

    bool all_finite() const {
        for (std::size_t l = 0; l < weights_.size(); ++l)
            if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
        return true;
    }

    /// target <- tau * source + (1 - tau) * target
    void polyak_from(const Mlp& source, Scalar tau) {
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            if (tau == Scalar(1)) {
                weights_[l] = source.weights_[l];
                biases_[l] = source.biases_[l];
            } else if (tau != Scalar(0)) {
                weights_[l] = tau * source.weights_[l] + (Scalar(1) - tau) * weights_[l];
                biases_[l] = tau * source.biases_[l] + (Scalar(1) - tau) * biases_[l];
            }
        }
    }

    std::vector<Matrix<Scalar>>& weights() { return weights_; }
    std::vector<Vector<Scalar>>& biases() { return biases_; }
    const std::vector<Matrix<Scalar>>& weights() const { return weights_; }
    const std::vector<Vector<Scalar>>& biases() const { return biases_; }

private:
    std::vector<int> sizes_;
    std::vector<Matrix<Scalar>> weights_;
    std::vector<Vector<Scalar>> biases_;
};

template <typename Scalar> class Adam {
public:
    Adam() = default;
    Adam(const Mlp<Scalar>& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (std::size_t l = 0; l < net.layers(); ++l) {
            m_.weights.push_back(Matrix<Scalar>::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
            m_.biases.push_back(Vector<Scalar>::Zero(net.biases()[l].size()));
        }
        v_ = m_;
    }

    void step(Mlp<Scalar>& net, const MlpGrads<Scalar>& g) {
        ++t_;
        const Scalar b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
        const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(beta1_, t_));
        const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(beta2_, t_));
        const Scalar lr = static_cast<Scalar>(lr_), eps = static_cast<Scalar>(eps_);
        auto apply = [&](auto& param, const auto& grad, auto& m, auto& v) {
            m = b1 * m + (Scalar(1) - b1) * grad;
            v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
            param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        };
        for (std::size_t l = 0; l < net.layers(); ++l) {
            apply(net.weights()[l], g.weights[l], m_.weights[l], v_.weights[l]);
            apply(net.biases()[l], g.biases[l], m_.biases[l], v_.biases[l]);
        }
    }

    long steps() const { return t_; }
    MlpGrads<Scalar>& first_moment() { return m_; }
    MlpGrads<Scalar>& second_moment() { return v_; }
    void set_steps(long t) { t_ = t; }

private:
    double lr_ = 3e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
    MlpGrads<Scalar> m_, v_;
};

/// Scalar Adam for the log-temperature.
class ScalarAdam {
public:
    explicit ScalarAdam(double lr = 3e-4) : lr_(lr) {}
    double step(double param, double grad) {
        ++t_;
        m_ = 0.9 * m_ + 0.1 * grad;
        v_ = 0.999 * v_ + 0.001 * grad * grad;
        const double mh = m_ / (1.0 - std::pow(0.9, t_));
        const double vh = v_ / (1.0 - std::pow(0.999, t_));
        return param - lr_ * mh / (std::sqrt(vh) + 1e-8);
    }
    double lr_;
    long t_ = 0;
    double m_ = 0.0, v_ = 0.0;
};

} // namespace wakelab::sac
