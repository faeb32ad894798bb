#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpdm/nn/ops.hpp"
#include "cpdm/rng.hpp"
#include "cpdm/tensor.hpp"

namespace cpdm {

/// Structural configuration of the noise predictor. The input channel count
/// is derived, never stored: 3 for the noisy image, 3 for the raw conditional
/// image, and 3 more for the difference condition when enabled.
struct ModelConfig {
    int base_channels = 32;
    std::vector<int> channel_multipliers{1, 2, 4};
    int blocks_per_level = 4;
    int time_embed_dim = 128;
    bool use_difference_condition = true;  // off: ablation variants A and C
    bool use_ccm = true;                   // off: ablation variants A and B
    int out_channels = 3;

    int in_channels() const { return 3 * (2 + (use_difference_condition ? 1 : 0)); }
    int levels() const { return static_cast<int>(channel_multipliers.size()); }
    int level_channels(int k) const { return base_channels * channel_multipliers[k]; }

    /// strict_levels enforces the >= 2 level requirement of the public
    /// configuration surface; library code (tests, probes) may run
    /// single-level models.
    void validate(bool strict_levels = false) const {
        detail::require(base_channels >= 1, "config: base_channels must be >= 1");
        detail::require(blocks_per_level >= 1, "config: blocks_per_level must be >= 1");
        detail::require(!channel_multipliers.empty(), "config: channel_multipliers empty");
        for (int m : channel_multipliers)
            detail::require(m >= 1, "config: channel multipliers must be >= 1");
        detail::require(time_embed_dim >= 2 && time_embed_dim % 2 == 0,
                        "config: time_embed_dim must be even and >= 2");
        detail::require(out_channels >= 1, "config: out_channels must be >= 1");
        if (strict_levels)
            detail::require(levels() >= 2, "config: need at least 2 resolution levels");
    }

    bool operator==(const ModelConfig&) const = default;
};

namespace nn {

/// Classic sinusoidal position features for scalar timesteps (1-based).
template <class S>
TensorT<S> sinusoidal_embedding(const std::vector<int>& t, int dim) {
    const int half = dim / 2;
    TensorT<S> out(static_cast<int>(t.size()), dim, 1, 1);
    for (size_t bi = 0; bi < t.size(); ++bi)
        for (int i = 0; i < half; ++i) {
            const double freq =
                (half > 1) ? std::exp(-std::log(10000.0) * i / (half - 1)) : 1.0;
            const double arg = static_cast<double>(t[bi]) * freq;
            out.v[bi * dim + i] = static_cast<S>(std::sin(arg));
            out.v[bi * dim + half + i] = static_cast<S>(std::cos(arg));
        }
    return out;
}

template <class S>
TensorT<S> channel_concat(const std::vector<const TensorT<S>*>& parts) {
    int total_c = 0;
    for (auto* p : parts) total_c += p->c;
    const auto& f = *parts.front();
    TensorT<S> out(f.b, total_c, f.h, f.w);
    const size_t hw = static_cast<size_t>(f.h) * f.w;
    for (int bi = 0; bi < f.b; ++bi) {
        size_t off = 0;
        for (auto* p : parts) {
            const size_t n = static_cast<size_t>(p->c) * hw;
            std::copy_n(p->data() + bi * n, n,
                        out.data() + (static_cast<size_t>(bi) * total_c) * hw + off);
            off += n;
        }
    }
    return out;
}

template <class S>
std::vector<TensorT<S>> channel_split(const TensorT<S>& x,
                                      const std::vector<int>& channels) {
    std::vector<TensorT<S>> parts;
    const size_t hw = static_cast<size_t>(x.h) * x.w;
    int c0 = 0;
    for (int c : channels) {
        TensorT<S> p(x.b, c, x.h, x.w);
        for (int bi = 0; bi < x.b; ++bi)
            std::copy_n(x.data() + (static_cast<size_t>(bi) * x.c + c0) * hw,
                        static_cast<size_t>(c) * hw,
                        p.data() + static_cast<size_t>(bi) * c * hw);
        parts.push_back(std::move(p));
        c0 += c;
    }
    return parts;
}

/// conv-norm-act twice with a residual skip; the time embedding enters as a
/// learned per-channel shift after the first activation.
template <class S>
class ResBlock {
public:
    ResBlock(const std::string& name, int in_ch, int out_ch, int time_dim)
        : conv1_(name + ".conv1", in_ch, out_ch, 3, 1, 1),
          gn1_(name + ".gn1", out_ch),
          tproj_(name + ".tproj", time_dim, out_ch),
          conv2_(name + ".conv2", out_ch, out_ch, 3, 1, 1),
          gn2_(name + ".gn2", out_ch),
          has_skip_(in_ch != out_ch) {
        if (has_skip_)
            skip_ = std::make_unique<Conv2d<S>>(name + ".skip", in_ch, out_ch,
                                                1, 1, 0, /*with_bias=*/false);
    }

    struct Cache {
        typename Conv2d<S>::Cache conv1, conv2, skip;
        typename GroupNorm<S>::Cache gn1, gn2;
        typename SiLU<S>::Cache act1, act2;
        typename Linear<S>::Cache tproj;
    };

    TensorT<S> forward(const TensorT<S>& x, const TensorT<S>& temb,
                       Cache* c) const {
        TensorT<S> h = SiLU<S>::forward(
            gn1_.forward(conv1_.forward(x, c ? &c->conv1 : nullptr),
                         c ? &c->gn1 : nullptr),
            c ? &c->act1 : nullptr);
        TensorT<S> shift = tproj_.forward(temb, c ? &c->tproj : nullptr);
        const size_t hw = static_cast<size_t>(h.h) * h.w;
        for (int bi = 0; bi < h.b; ++bi)
            for (int ci = 0; ci < h.c; ++ci) {
                const S sft = shift.v[static_cast<size_t>(bi) * h.c + ci];
                S* ph = h.data() + (static_cast<size_t>(bi) * h.c + ci) * hw;
                for (size_t i = 0; i < hw; ++i) ph[i] += sft;
            }
        TensorT<S> h2 = SiLU<S>::forward(
            gn2_.forward(conv2_.forward(h, c ? &c->conv2 : nullptr),
                         c ? &c->gn2 : nullptr),
            c ? &c->act2 : nullptr);
        TensorT<S> res = has_skip_
                             ? skip_->forward(x, c ? &c->skip : nullptr)
                             : x;
        for (size_t i = 0; i < h2.size(); ++i) h2.v[i] += res.v[i];
        return h2;
    }

    /// Returns dx; adds this block's time-embedding gradient into dtemb.
    TensorT<S> backward(const Cache& c, const TensorT<S>& dy,
                        TensorT<S>& dtemb) {
        TensorT<S> d2 = SiLU<S>::backward(c.act2, dy);
        TensorT<S> dh = conv2_.backward(c.conv2, gn2_.backward(c.gn2, d2));

        TensorT<S> dshift(dh.b, dh.c, 1, 1);
        const size_t hw = static_cast<size_t>(dh.h) * dh.w;
        for (int bi = 0; bi < dh.b; ++bi)
            for (int ci = 0; ci < dh.c; ++ci) {
                const S* p = dh.data() + (static_cast<size_t>(bi) * dh.c + ci) * hw;
                S acc = S(0);
                for (size_t i = 0; i < hw; ++i) acc += p[i];
                dshift.v[static_cast<size_t>(bi) * dh.c + ci] = acc;
            }
        TensorT<S> dt = tproj_.backward(c.tproj, dshift);
        for (size_t i = 0; i < dtemb.size(); ++i) dtemb.v[i] += dt.v[i];

        TensorT<S> d1 = SiLU<S>::backward(c.act1, dh);
        TensorT<S> dx = conv1_.backward(c.conv1, gn1_.backward(c.gn1, d1));

        if (has_skip_) {
            TensorT<S> ds = skip_->backward(c.skip, dy);
            for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += ds.v[i];
        } else {
            for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += dy.v[i];
        }
        return dx;
    }

    void collect(std::vector<ParamT<S>*>& out) {
        conv1_.collect(out);
        gn1_.collect(out);
        tproj_.collect(out);
        conv2_.collect(out);
        gn2_.collect(out);
        if (has_skip_) skip_->collect(out);
    }

private:
    Conv2d<S> conv1_;
    GroupNorm<S> gn1_;
    Linear<S> tproj_;
    Conv2d<S> conv2_;
    GroupNorm<S> gn2_;
    std::unique_ptr<Conv2d<S>> skip_;
    bool has_skip_;
};

/// Low-level feature pyramid over the raw conditional image: one bias-free
/// conv stage per encoder level, stride 2 from the second stage on, no
/// normalization or activation. A zero input therefore yields zero maps.
template <class S>
class ContentPyramid {
public:
    explicit ContentPyramid(const ModelConfig& cfg) {
        for (int k = 0; k < cfg.levels(); ++k) {
            const int in_ch = (k == 0) ? 3 : cfg.level_channels(k - 1);
            const int stride = (k == 0) ? 1 : 2;
            stages_.emplace_back("ccm.stage" + std::to_string(k), in_ch,
                                 cfg.level_channels(k), 3, stride, 1,
                                 /*with_bias=*/false);
        }
    }

    struct Cache {
        std::vector<typename Conv2d<S>::Cache> stages;
    };

    std::vector<TensorT<S>> forward(const TensorT<S>& y0, Cache* c) const {
        if (c) c->stages.resize(stages_.size());
        std::vector<TensorT<S>> feats;
        const TensorT<S>* prev = &y0;
        for (size_t k = 0; k < stages_.size(); ++k) {
            feats.push_back(
                stages_[k].forward(*prev, c ? &c->stages[k] : nullptr));
            prev = &feats.back();
        }
        return feats;
    }

    /// d_feats[k] is the gradient arriving at each level's map; gradients
    /// w.r.t. y0 are discarded (it is data, not a parameter).
    void backward(const Cache& c, std::vector<TensorT<S>> d_feats) {
        for (int k = static_cast<int>(stages_.size()) - 1; k >= 0; --k) {
            TensorT<S> dprev = stages_[k].backward(c.stages[k], d_feats[k]);
            if (k > 0)
                for (size_t i = 0; i < dprev.size(); ++i)
                    d_feats[k - 1].v[i] += dprev.v[i];
        }
    }

    void collect(std::vector<ParamT<S>*>& out) {
        for (auto& s : stages_) s.collect(out);
    }

private:
    std::vector<Conv2d<S>> stages_;
};

/// Conditional noise predictor: a UNet over the channel-concatenated
/// (x_t, y0 [, y0 - x_t]) input with per-level residual blocks, sinusoidal
/// time embedding, and optional content-pyramid injection into the input of
/// the last encoder block at every level.
template <class S>
class UNet {
public:
    explicit UNet(const ModelConfig& cfg) : cfg_(cfg) {
        cfg_.validate();
        const int L = cfg_.levels();

        time_fc1_ = std::make_unique<Linear<S>>("time.fc1", cfg_.time_embed_dim,
                                                cfg_.time_embed_dim);
        time_fc2_ = std::make_unique<Linear<S>>("time.fc2", cfg_.time_embed_dim,
                                                cfg_.time_embed_dim);
        // Channel counts change at the down/up transitions, so every block of
        // level k (and the injected content features) sees level_channels(k).
        stem_ = std::make_unique<Conv2d<S>>("stem", cfg_.in_channels(),
                                            cfg_.level_channels(0), 3, 1, 1);

        for (int k = 0; k < L; ++k) {
            enc_.emplace_back();
            for (int j = 0; j < cfg_.blocks_per_level; ++j)
                enc_[k].push_back(std::make_unique<ResBlock<S>>(
                    "enc" + std::to_string(k) + ".block" + std::to_string(j),
                    cfg_.level_channels(k), cfg_.level_channels(k),
                    cfg_.time_embed_dim));
            if (k + 1 < L)
                down_.push_back(std::make_unique<Conv2d<S>>(
                    "down" + std::to_string(k), cfg_.level_channels(k),
                    cfg_.level_channels(k + 1), 3, 2, 1));
        }

        if (cfg_.use_ccm) ccm_ = std::make_unique<ContentPyramid<S>>(cfg_);

        for (int k = L - 2; k >= 0; --k) {
            up_.push_back(std::make_unique<Conv2d<S>>(
                "up" + std::to_string(k) + ".conv", cfg_.level_channels(k + 1),
                cfg_.level_channels(k), 3, 1, 1));
            dec_.emplace_back();
            for (int j = 0; j < cfg_.blocks_per_level; ++j) {
                const int in_ch = ((j == 0) ? 2 : 1) * cfg_.level_channels(k);
                dec_.back().push_back(std::make_unique<ResBlock<S>>(
                    "dec" + std::to_string(k) + ".block" + std::to_string(j),
                    in_ch, cfg_.level_channels(k), cfg_.time_embed_dim));
            }
        }

        final_gn_ = std::make_unique<GroupNorm<S>>("final.gn", cfg_.level_channels(0));
        final_conv_ = std::make_unique<Conv2d<S>>("final.conv",
                                                  cfg_.level_channels(0),
                                                  cfg_.out_channels, 3, 1, 1,
                                                  /*with_bias=*/true,
                                                  /*zero_init=*/true);

        time_fc1_->collect(params_);
        time_fc2_->collect(params_);
        stem_->collect(params_);
        for (int k = 0; k < L; ++k) {
            for (auto& b : enc_[k]) b->collect(params_);
            if (k + 1 < L) down_[k]->collect(params_);
        }
        if (ccm_) ccm_->collect(params_);
        for (size_t i = 0; i < dec_.size(); ++i) {
            up_[i]->collect(params_);
            for (auto& b : dec_[i]) b->collect(params_);
        }
        final_gn_->collect(params_);
        final_conv_->collect(params_);
    }

    /// Deterministic for a fixed seed: parameters are drawn in registry
    /// order. The final projection is zero-initialized, so a fresh model
    /// predicts zero noise.
    void init(uint64_t seed) {
        Rng rng = Rng::stream(seed, Rng::Role::Init);
        for (ParamT<S>* p : params_) init_param(*p, rng);
    }

    struct Cache {
        typename Linear<S>::Cache time_fc1, time_fc2;
        typename SiLU<S>::Cache time_act;
        typename Conv2d<S>::Cache stem;
        std::vector<std::vector<typename ResBlock<S>::Cache>> enc, dec;
        std::vector<typename Conv2d<S>::Cache> down, up;
        typename ContentPyramid<S>::Cache ccm;
        typename GroupNorm<S>::Cache final_gn;
        typename SiLU<S>::Cache final_act;
        typename Conv2d<S>::Cache final_conv;
        int batch = 0;
        std::vector<int> skip_channels;
    };

    /// diff must be supplied iff the difference condition is enabled.
    TensorT<S> forward(const TensorT<S>& xt, const std::vector<int>& t,
                       const TensorT<S>& y0, const TensorT<S>* diff,
                       Cache* c) const {
        check_inputs(xt, t, y0, diff);
        const int L = cfg_.levels();
        if (c) {
            c->enc.assign(L, {});
            for (auto& v : c->enc) v.resize(cfg_.blocks_per_level);
            c->dec.assign(dec_.size(), {});
            for (auto& v : c->dec) v.resize(cfg_.blocks_per_level);
            c->down.resize(down_.size());
            c->up.resize(up_.size());
            c->batch = xt.b;
            c->skip_channels.clear();
        }

        TensorT<S> temb = time_embedding(t, c);

        std::vector<const TensorT<S>*> parts{&xt, &y0};
        if (cfg_.use_difference_condition) parts.push_back(diff);
        TensorT<S> x = stem_->forward(channel_concat<S>(parts),
                                      c ? &c->stem : nullptr);

        std::vector<TensorT<S>> ccm_feats;
        if (ccm_) ccm_feats = ccm_->forward(y0, c ? &c->ccm : nullptr);

        std::vector<TensorT<S>> skips;
        for (int k = 0; k < L; ++k) {
            for (int j = 0; j < cfg_.blocks_per_level; ++j) {
                if (ccm_ && j == cfg_.blocks_per_level - 1) {
                    detail::require_same_shape(x, ccm_feats[k], "ccm injection");
                    for (size_t i = 0; i < x.size(); ++i)
                        x.v[i] += ccm_feats[k].v[i];
                }
                x = enc_[k][j]->forward(x, temb,
                                        c ? &c->enc[k][j] : nullptr);
            }
            if (k + 1 < L) {
                skips.push_back(x);
                x = down_[k]->forward(x, c ? &c->down[k] : nullptr);
            }
        }

        for (size_t d = 0; d < dec_.size(); ++d) {
            const int k = L - 2 - static_cast<int>(d);
            x = up_[d]->forward(upsample_nearest2x(x), c ? &c->up[d] : nullptr);
            if (c) c->skip_channels.push_back(x.c);
            x = channel_concat<S>({&x, &skips[k]});
            for (int j = 0; j < cfg_.blocks_per_level; ++j)
                x = dec_[d][j]->forward(x, temb, c ? &c->dec[d][j] : nullptr);
        }

        return final_conv_->forward(
            SiLU<S>::forward(
                final_gn_->forward(x, c ? &c->final_gn : nullptr),
                c ? &c->final_act : nullptr),
            c ? &c->final_conv : nullptr);
    }

    /// Accumulates parameter gradients for the forward pass captured in c.
    void backward(const Cache& c, const TensorT<S>& d_out) {
        const int L = cfg_.levels();
        TensorT<S> dtemb(c.batch, cfg_.time_embed_dim, 1, 1);

        TensorT<S> dx = final_gn_->backward(
            c.final_gn,
            SiLU<S>::backward(c.final_act,
                              final_conv_->backward(c.final_conv, d_out)));

        // Gradient arriving at each stored encoder skip.
        std::vector<TensorT<S>> d_skips(up_.size());
        for (int d = static_cast<int>(dec_.size()) - 1; d >= 0; --d) {
            for (int j = cfg_.blocks_per_level - 1; j >= 0; --j)
                dx = dec_[d][j]->backward(c.dec[d][j], dx, dtemb);
            auto parts = channel_split(
                dx, {c.skip_channels[d], dx.c - c.skip_channels[d]});
            const int k = L - 2 - d;
            d_skips[k] = std::move(parts[1]);
            dx = upsample_nearest2x_backward(
                up_[d]->backward(c.up[d], parts[0]));
        }

        std::vector<TensorT<S>> d_ccm(ccm_ ? L : 0);
        for (int k = L - 1; k >= 0; --k) {
            if (k + 1 < L) {
                dx = down_[k]->backward(c.down[k], dx);
                for (size_t i = 0; i < dx.size(); ++i)
                    dx.v[i] += d_skips[k].v[i];
            }
            for (int j = cfg_.blocks_per_level - 1; j >= 0; --j) {
                dx = enc_[k][j]->backward(c.enc[k][j], dx, dtemb);
                if (ccm_ && j == cfg_.blocks_per_level - 1) d_ccm[k] = dx;
            }
        }
        if (ccm_) ccm_->backward(c.ccm, std::move(d_ccm));

        stem_->backward(c.stem, dx);

        time_fc1_->backward(
            c.time_fc1,
            SiLU<S>::backward(c.time_act,
                              time_fc2_->backward(c.time_fc2, dtemb)));
    }

    /// The per-level content features alone; requires the pyramid.
    std::vector<TensorT<S>> ccm_features(const TensorT<S>& y0) const {
        if (!ccm_)
            throw std::logic_error(
                "ccm_features: model was configured without the content "
                "compensation pyramid");
        return ccm_->forward(y0, nullptr);
    }

    void zero_grad() {
        for (ParamT<S>* p : params_) p->zero_grad();
    }

    const std::vector<ParamT<S>*>& params() const { return params_; }
    std::vector<ParamT<S>*>& params() { return params_; }
    const ModelConfig& config() const { return cfg_; }

    size_t parameter_count() const {
        size_t n = 0;
        for (const ParamT<S>* p : params_) n += p->size();
        return n;
    }

private:
    TensorT<S> time_embedding(const std::vector<int>& t, Cache* c) const {
        TensorT<S> sin_emb = sinusoidal_embedding<S>(t, cfg_.time_embed_dim);
        return time_fc2_->forward(
            SiLU<S>::forward(
                time_fc1_->forward(sin_emb, c ? &c->time_fc1 : nullptr),
                c ? &c->time_act : nullptr),
            c ? &c->time_fc2 : nullptr);
    }

    void check_inputs(const TensorT<S>& xt, const std::vector<int>& t,
                      const TensorT<S>& y0, const TensorT<S>* diff) const {
        detail::require_same_shape(xt, y0, "predict_noise");
        if (cfg_.use_difference_condition) {
            if (!diff)
                throw std::invalid_argument(
                    "predict_noise: difference condition enabled but no "
                    "difference image supplied");
            detail::require_same_shape(xt, *diff, "predict_noise");
        }
        if (static_cast<int>(t.size()) != xt.b)
            throw std::invalid_argument("predict_noise: one timestep per batch "
                                        "element required");
        const int div = 1 << (cfg_.levels() - 1);
        if (xt.h % div != 0 || xt.w % div != 0)
            throw std::invalid_argument(
                "predict_noise: spatial size must be divisible by " +
                std::to_string(div));
    }

    ModelConfig cfg_;
    std::unique_ptr<Linear<S>> time_fc1_, time_fc2_;
    std::unique_ptr<Conv2d<S>> stem_;
    std::vector<std::vector<std::unique_ptr<ResBlock<S>>>> enc_;
    std::vector<std::unique_ptr<Conv2d<S>>> down_;
    std::unique_ptr<ContentPyramid<S>> ccm_;
    std::vector<std::unique_ptr<Conv2d<S>>> up_;
    std::vector<std::vector<std::unique_ptr<ResBlock<S>>>> dec_;
    std::unique_ptr<GroupNorm<S>> final_gn_;
    std::unique_ptr<Conv2d<S>> final_conv_;
    std::vector<ParamT<S>*> params_;
};

}  // namespace nn
}  // namespace cpdm
