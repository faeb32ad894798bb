#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cpdm/checkpoint.hpp"
#include "cpdm/data.hpp"
#include "cpdm/diffusion.hpp"
#include "cpdm/nn/unet.hpp"
#include "cpdm/schedule.hpp"

namespace cpdm {

struct TrainConfig {
    int64_t total_steps = 2000;
    int batch_size = 16;
    double learning_rate = 1e-4;
    uint64_t seed = 0;
    int64_t checkpoint_every = 1000;
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    void validate() const {
        detail::require(total_steps >= 0, "train: total_steps must be >= 0");
        detail::require(batch_size >= 1, "train: batch_size must be >= 1");
        detail::require(learning_rate > 0 && learning_rate < 1,
                        "train: learning_rate must be in (0, 1)");
        detail::require(checkpoint_every >= 1,
                        "train: checkpoint_every must be >= 1");
        detail::require(T >= 1, "train: T must be >= 1");
    }
};

struct TrainStepReport {
    int64_t step = 0;
    double loss = 0;
    double grad_norm = 0;
    double wall_time_ms = 0;
};

/// Adam with bias correction; element updates are computed in double and
/// stored back in S. A zero learning rate leaves parameters bit-identical.
template <class S>
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void attach(const std::vector<nn::ParamT<S>*>& params) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i]->size(), S(0));
            v_[i].assign(params[i]->size(), S(0));
        }
        t_ = 0;
    }

    void step(const std::vector<nn::ParamT<S>*>& params) {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (size_t i = 0; i < params.size(); ++i) {
            nn::ParamT<S>& p = *params[i];
            for (size_t j = 0; j < p.size(); ++j) {
                const double g = p.grad[j];
                const double m = b1_ * m_[i][j] + (1.0 - b1_) * g;
                const double v = b2_ * v_[i][j] + (1.0 - b2_) * g * g;
                m_[i][j] = static_cast<S>(m);
                v_[i][j] = static_cast<S>(v);
                p.value[j] = static_cast<S>(
                    p.value[j] - lr_ * (m / c1) / (std::sqrt(v / c2) + eps_));
            }
        }
    }

    int64_t steps_done() const { return t_; }
    double learning_rate() const { return lr_; }

    OptimizerState export_state() const {
        OptimizerState st;
        st.step = t_;
        st.m.resize(m_.size());
        st.v.resize(v_.size());
        for (size_t i = 0; i < m_.size(); ++i) {
            st.m[i].assign(m_[i].begin(), m_[i].end());
            st.v[i].assign(v_[i].begin(), v_[i].end());
        }
        return st;
    }

    void import_state(const OptimizerState& st) {
        t_ = st.step;
        m_.resize(st.m.size());
        v_.resize(st.v.size());
        for (size_t i = 0; i < st.m.size(); ++i) {
            m_[i].assign(st.m[i].begin(), st.m[i].end());
            v_[i].assign(st.v[i].begin(), st.v[i].end());
        }
    }

private:
    double lr_, b1_, b2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<S>> m_, v_;
};

/// One training draw: clean/raw pair plus the sampled timesteps and noise.
template <class S>
struct TrainBatch {
    ImageT<S> x0;  // model space
    ImageT<S> y0;  // model space
    std::vector<int> t;
    TensorT<S> eps;
};

/// Mean squared noise-prediction error of the batch, forward only.
template <class S>
double diffusion_loss(const nn::UNet<S>& model, const TrainBatch<S>& batch,
                      const NoiseSchedule& sched) {
    ImageT<S> xt = q_sample(batch.x0, batch.t, batch.eps, sched);
    TensorT<S> diff;
    const TensorT<S>* diff_ptr = nullptr;
    if (model.config().use_difference_condition) {
        diff = batch.y0.t;
        for (size_t i = 0; i < diff.size(); ++i) diff.v[i] -= xt.t.v[i];
        diff_ptr = &diff;
    }
    TensorT<S> eps_hat = model.forward(xt.t, batch.t, batch.y0.t, diff_ptr, nullptr);
    double acc = 0;
    for (size_t i = 0; i < eps_hat.size(); ++i) {
        const double d = static_cast<double>(eps_hat.v[i]) - batch.eps.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(eps_hat.size());
}

/// Forward plus backward; accumulates parameter gradients (call zero_grad
/// first) and returns the loss.
template <class S>
double diffusion_loss_backward(nn::UNet<S>& model, const TrainBatch<S>& batch,
                               const NoiseSchedule& sched) {
    ImageT<S> xt = q_sample(batch.x0, batch.t, batch.eps, sched);
    TensorT<S> diff;
    const TensorT<S>* diff_ptr = nullptr;
    if (model.config().use_difference_condition) {
        diff = batch.y0.t;
        for (size_t i = 0; i < diff.size(); ++i) diff.v[i] -= xt.t.v[i];
        diff_ptr = &diff;
    }
    typename nn::UNet<S>::Cache cache;
    TensorT<S> eps_hat =
        model.forward(xt.t, batch.t, batch.y0.t, diff_ptr, &cache);

    const double n = static_cast<double>(eps_hat.size());
    double acc = 0;
    TensorT<S> d_out(eps_hat.b, eps_hat.c, eps_hat.h, eps_hat.w);
    for (size_t i = 0; i < eps_hat.size(); ++i) {
        const double d = static_cast<double>(eps_hat.v[i]) - batch.eps.v[i];
        acc += d * d;
        d_out.v[i] = static_cast<S>(2.0 * d / n);
    }
    model.backward(cache, d_out);
    return acc / n;
}

template <class S>
double gradient_norm(const std::vector<nn::ParamT<S>*>& params) {
    double acc = 0;
    for (const nn::ParamT<S>* p : params)
        for (S g : p->grad) acc += static_cast<double>(g) * g;
    return std::sqrt(acc);
}

/// One optimizer step on the given draws. Throws on a non-finite loss.
template <class S>
TrainStepReport train_step(nn::UNet<S>& model, Adam<S>& opt,
                           const TrainBatch<S>& batch,
                           const NoiseSchedule& sched) {
    const auto t0 = std::chrono::steady_clock::now();
    model.zero_grad();
    TrainStepReport rep;
    rep.loss = diffusion_loss_backward(model, batch, sched);
    if (!std::isfinite(rep.loss)) {
        std::string ts;
        for (int t : batch.t) ts += std::to_string(t) + " ";
        throw std::runtime_error("train_step: non-finite loss; t draws: " + ts);
    }
    rep.grad_norm = gradient_norm(model.params());
    opt.step(model.params());
    rep.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    return rep;
}

struct TrainLoopResult {
    std::filesystem::path final_checkpoint;
    int64_t steps_run = 0;
    double last_loss = std::numeric_limits<double>::quiet_NaN();
};

/// Runs the full loop: per-step uniform pair/timestep/noise draws from
/// per-role RNG streams, optimizer updates, CSV logging
/// (step,loss,grad_norm,wall_time_ms) and periodic checkpoints under
/// checkpoint_dir. Resuming from a checkpoint reproduces the unbroken run's
/// draws exactly.
TrainLoopResult train_loop(
    const std::vector<PairedSample>& dataset, const ModelConfig& mcfg,
    const TrainConfig& tcfg, const std::filesystem::path& checkpoint_dir,
    const std::filesystem::path* resume_from = nullptr,
    const std::function<void(const TrainStepReport&)>& on_step = {});

}  // namespace cpdm
