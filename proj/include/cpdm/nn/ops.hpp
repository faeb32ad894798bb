#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cpdm/rng.hpp"
#include "cpdm/tensor.hpp"

namespace cpdm::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using RowMat =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class InitKind { FanInNormal, Zero, One };

/// A named trainable array plus its gradient accumulator. Gradients are only
/// touched by backward passes (single training writer); forward passes are
/// const and safe to run concurrently on shared parameters.
template <class S>
struct ParamT {
    std::string name;
    std::vector<int> shape;
    std::vector<S> value;
    std::vector<S> grad;
    InitKind init = InitKind::FanInNormal;
    int fan_in = 1;

    void resize(std::vector<int> shp) {
        shape = std::move(shp);
        size_t n = 1;
        for (int d : shape) n *= static_cast<size_t>(d);
        value.assign(n, S(0));
        grad.assign(n, S(0));
    }
    size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
};

template <class S>
void init_param(ParamT<S>& p, Rng& rng) {
    switch (p.init) {
        case InitKind::Zero:
            std::fill(p.value.begin(), p.value.end(), S(0));
            break;
        case InitKind::One:
            std::fill(p.value.begin(), p.value.end(), S(1));
            break;
        case InitKind::FanInNormal: {
            double stddev = std::sqrt(2.0 / p.fan_in);
            for (auto& x : p.value) x = static_cast<S>(rng.normal() * stddev);
            break;
        }
    }
}

/// 2-D convolution, NCHW, square kernel, zero padding. Forward keeps the
/// im2col matrix in the cache when one is supplied; backward consumes it.
template <class S>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in_ch, int out_ch, int ksize, int stride,
           int pad, bool with_bias = true, bool zero_init = false)
        : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride),
          pad_(pad), has_bias_(with_bias) {
        weight.name = name + ".weight";
        weight.resize({out_ch, in_ch, ksize, ksize});
        weight.fan_in = in_ch * ksize * ksize;
        weight.init = zero_init ? InitKind::Zero : InitKind::FanInNormal;
        if (has_bias_) {
            bias.name = name + ".bias";
            bias.resize({out_ch});
            bias.init = InitKind::Zero;
        }
    }

    struct Cache {
        std::vector<S> cols;  // (in_ch*k*k) x (B*out_h*out_w), column-major
        int batch = 0, in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    };

    int out_hw(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

    TensorT<S> forward(const TensorT<S>& x, Cache* cache) const {
        if (x.c != in_ch_)
            throw std::invalid_argument(weight.name + ": expected " +
                                        std::to_string(in_ch_) +
                                        " input channels, got " +
                                        std::to_string(x.c));
        const int oh = out_hw(x.h), ow = out_hw(x.w);
        const int ikk = in_ch_ * k_ * k_;
        const Eigen::Index ncols =
            static_cast<Eigen::Index>(x.b) * oh * ow;

        std::vector<S> cols_local;
        std::vector<S>& cols = cache ? cache->cols : cols_local;
        cols.assign(static_cast<size_t>(ikk) * ncols, S(0));
        im2col(x, oh, ow, cols.data());
        if (cache) {
            cache->batch = x.b;
            cache->in_h = x.h;
            cache->in_w = x.w;
            cache->out_h = oh;
            cache->out_w = ow;
        }

        Eigen::Map<const RowMat<S>> W(weight.value.data(), out_ch_, ikk);
        Eigen::Map<const Mat<S>> C(cols.data(), ikk, ncols);
        Mat<S> Y = W * C;  // (out_ch, B*oh*ow)

        TensorT<S> out(x.b, out_ch_, oh, ow);
        const size_t ohw = static_cast<size_t>(oh) * ow;
        for (int bi = 0; bi < x.b; ++bi)
            for (int co = 0; co < out_ch_; ++co) {
                const S b0 = has_bias_ ? bias.value[co] : S(0);
                S* dst = out.data() + (static_cast<size_t>(bi) * out_ch_ + co) * ohw;
                for (size_t p = 0; p < ohw; ++p)
                    dst[p] = Y(co, static_cast<Eigen::Index>(bi * ohw + p)) + b0;
            }
        return out;
    }

    TensorT<S> backward(const Cache& cache, const TensorT<S>& dy) {
        const int oh = cache.out_h, ow = cache.out_w;
        const int ikk = in_ch_ * k_ * k_;
        const size_t ohw = static_cast<size_t>(oh) * ow;
        const Eigen::Index ncols =
            static_cast<Eigen::Index>(cache.batch) * oh * ow;

        Mat<S> dY(out_ch_, ncols);
        for (int bi = 0; bi < cache.batch; ++bi)
            for (int co = 0; co < out_ch_; ++co) {
                const S* src =
                    dy.data() + (static_cast<size_t>(bi) * out_ch_ + co) * ohw;
                for (size_t p = 0; p < ohw; ++p)
                    dY(co, static_cast<Eigen::Index>(bi * ohw + p)) = src[p];
            }

        Eigen::Map<const Mat<S>> C(cache.cols.data(), ikk, ncols);
        Eigen::Map<RowMat<S>> dW(weight.grad.data(), out_ch_, ikk);
        dW.noalias() += dY * C.transpose();
        if (has_bias_)
            for (int co = 0; co < out_ch_; ++co)
                bias.grad[co] += dY.row(co).sum();

        Eigen::Map<const RowMat<S>> W(weight.value.data(), out_ch_, ikk);
        Mat<S> dC = W.transpose() * dY;  // (ikk, B*oh*ow)

        TensorT<S> dx(cache.batch, in_ch_, cache.in_h, cache.in_w);
        col2im_add(dC, cache, dx);
        return dx;
    }

    void collect(std::vector<ParamT<S>*>& out) {
        out.push_back(&weight);
        if (has_bias_) out.push_back(&bias);
    }

    ParamT<S> weight;
    ParamT<S> bias;

private:
    void im2col(const TensorT<S>& x, int oh, int ow, S* cols) const {
        const size_t ikk = static_cast<size_t>(in_ch_) * k_ * k_;
        for (int bi = 0; bi < x.b; ++bi)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    S* col = cols + (((static_cast<size_t>(bi) * oh + oy) * ow) + ox) * ikk;
                    const int iy0 = oy * stride_ - pad_;
                    const int ix0 = ox * stride_ - pad_;
                    for (int ci = 0; ci < in_ch_; ++ci)
                        for (int ky = 0; ky < k_; ++ky) {
                            const int iy = iy0 + ky;
                            for (int kx = 0; kx < k_; ++kx) {
                                const int ix = ix0 + kx;
                                S val = S(0);
                                if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                                    val = x.at(bi, ci, iy, ix);
                                col[(static_cast<size_t>(ci) * k_ + ky) * k_ + kx] = val;
                            }
                        }
                }
    }

    void col2im_add(const Mat<S>& dC, const Cache& cache, TensorT<S>& dx) const {
        const int oh = cache.out_h, ow = cache.out_w;
        for (int bi = 0; bi < cache.batch; ++bi)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const Eigen::Index col =
                        (static_cast<Eigen::Index>(bi) * oh + oy) * ow + ox;
                    const int iy0 = oy * stride_ - pad_;
                    const int ix0 = ox * stride_ - pad_;
                    for (int ci = 0; ci < in_ch_; ++ci)
                        for (int ky = 0; ky < k_; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= cache.in_h) continue;
                            for (int kx = 0; kx < k_; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix < 0 || ix >= cache.in_w) continue;
                                dx.at(bi, ci, iy, ix) +=
                                    dC((static_cast<Eigen::Index>(ci) * k_ + ky) * k_ + kx, col);
                            }
                        }
                }
    }

    int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    bool has_bias_ = true;
};

/// Group normalization with per-channel affine. Group count is the largest
/// of {8, 4, 2, 1} dividing the channel count. Statistics accumulate in
/// double regardless of S.
template <class S>
class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(std::string name, int channels) : channels_(channels) {
        for (int g : {8, 4, 2, 1})
            if (channels % g == 0) {
                groups_ = g;
                break;
            }
        gamma.name = name + ".gamma";
        gamma.resize({channels});
        gamma.init = InitKind::One;
        beta.name = name + ".beta";
        beta.resize({channels});
        beta.init = InitKind::Zero;
    }

    struct Cache {
        TensorT<S> xhat;
        std::vector<double> inv_std;  // per (b, group)
    };

    TensorT<S> forward(const TensorT<S>& x, Cache* cache) const {
        const int cpg = channels_ / groups_;
        const size_t hw = static_cast<size_t>(x.h) * x.w;
        const size_t gsize = cpg * hw;

        TensorT<S> xhat(x.b, x.c, x.h, x.w);
        std::vector<double> inv_std(static_cast<size_t>(x.b) * groups_);
        for (int bi = 0; bi < x.b; ++bi)
            for (int g = 0; g < groups_; ++g) {
                const S* px = x.data() + (static_cast<size_t>(bi) * channels_ + g * cpg) * hw;
                double sum = 0.0, sq = 0.0;
                for (size_t i = 0; i < gsize; ++i) {
                    sum += px[i];
                    sq += static_cast<double>(px[i]) * px[i];
                }
                const double mu = sum / gsize;
                const double var = std::max(0.0, sq / gsize - mu * mu);
                const double istd = 1.0 / std::sqrt(var + kEps);
                inv_std[bi * groups_ + g] = istd;
                S* ph = xhat.data() + (static_cast<size_t>(bi) * channels_ + g * cpg) * hw;
                for (size_t i = 0; i < gsize; ++i)
                    ph[i] = static_cast<S>((px[i] - mu) * istd);
            }

        TensorT<S> out(x.b, x.c, x.h, x.w);
        for (int bi = 0; bi < x.b; ++bi)
            for (int ci = 0; ci < channels_; ++ci) {
                const S* ph = xhat.data() + (static_cast<size_t>(bi) * channels_ + ci) * hw;
                S* po = out.data() + (static_cast<size_t>(bi) * channels_ + ci) * hw;
                const S ga = gamma.value[ci], be = beta.value[ci];
                for (size_t i = 0; i < hw; ++i) po[i] = ga * ph[i] + be;
            }
        if (cache) {
            cache->xhat = std::move(xhat);
            cache->inv_std = std::move(inv_std);
        }
        return out;
    }

    TensorT<S> backward(const Cache& cache, const TensorT<S>& dy) {
        const TensorT<S>& xhat = cache.xhat;
        const int cpg = channels_ / groups_;
        const size_t hw = static_cast<size_t>(dy.h) * dy.w;
        const size_t gsize = cpg * hw;

        for (int ci = 0; ci < channels_; ++ci) {
            double dg = 0.0, db = 0.0;
            for (int bi = 0; bi < dy.b; ++bi) {
                const S* pdy = dy.data() + (static_cast<size_t>(bi) * channels_ + ci) * hw;
                const S* ph = xhat.data() + (static_cast<size_t>(bi) * channels_ + ci) * hw;
                for (size_t i = 0; i < hw; ++i) {
                    dg += static_cast<double>(pdy[i]) * ph[i];
                    db += pdy[i];
                }
            }
            gamma.grad[ci] += static_cast<S>(dg);
            beta.grad[ci] += static_cast<S>(db);
        }

        TensorT<S> dx(dy.b, dy.c, dy.h, dy.w);
        for (int bi = 0; bi < dy.b; ++bi)
            for (int g = 0; g < groups_; ++g) {
                // dxhat = dy * gamma; dx = istd*(dxhat - mean(dxhat)
                //                               - xhat*mean(dxhat*xhat))
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (int cj = 0; cj < cpg; ++cj) {
                    const int ci = g * cpg + cj;
                    const S* pdy = dy.data() + (static_cast<size_t>(bi) * channels_ + ci) * hw;
                    const S* ph = xhat.data() + (static_cast<size_t>(bi) * channels_ + ci) * hw;
                    const double ga = gamma.value[ci];
                    for (size_t i = 0; i < hw; ++i) {
                        const double dxh = ga * pdy[i];
                        sum_dxh += dxh;
                        sum_dxh_xh += dxh * ph[i];
                    }
                }
                const double mean_dxh = sum_dxh / gsize;
                const double mean_dxh_xh = sum_dxh_xh / gsize;
                const double istd = cache.inv_std[bi * groups_ + g];
                for (int cj = 0; cj < cpg; ++cj) {
                    const int ci = g * cpg + cj;
                    const S* pdy = dy.data() + (static_cast<size_t>(bi) * channels_ + ci) * hw;
                    const S* ph = xhat.data() + (static_cast<size_t>(bi) * channels_ + ci) * hw;
                    S* pdx = dx.data() + (static_cast<size_t>(bi) * channels_ + ci) * hw;
                    const double ga = gamma.value[ci];
                    for (size_t i = 0; i < hw; ++i)
                        pdx[i] = static_cast<S>(
                            istd * (ga * pdy[i] - mean_dxh - ph[i] * mean_dxh_xh));
                }
            }
        return dx;
    }

    void collect(std::vector<ParamT<S>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }

    ParamT<S> gamma;
    ParamT<S> beta;

private:
    static constexpr double kEps = 1e-5;
    int channels_ = 0, groups_ = 1;
};

/// x * sigmoid(x).
template <class S>
struct SiLU {
    struct Cache {
        TensorT<S> x;
    };

    static TensorT<S> forward(const TensorT<S>& x, Cache* cache) {
        TensorT<S> out(x.b, x.c, x.h, x.w);
        for (size_t i = 0; i < x.size(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(x.v[i])));
            out.v[i] = static_cast<S>(x.v[i] * s);
        }
        if (cache) cache->x = x;
        return out;
    }

    static TensorT<S> backward(const Cache& cache, const TensorT<S>& dy) {
        TensorT<S> dx(dy.b, dy.c, dy.h, dy.w);
        for (size_t i = 0; i < dy.size(); ++i) {
            const double x = cache.x.v[i];
            const double s = 1.0 / (1.0 + std::exp(-x));
            dx.v[i] = static_cast<S>(dy.v[i] * (s * (1.0 + x * (1.0 - s))));
        }
        return dx;
    }
};

/// Fully connected layer on (B, in, 1, 1) tensors.
template <class S>
class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in_dim, int out_dim)
        : in_(in_dim), out_(out_dim) {
        weight.name = name + ".weight";
        weight.resize({out_dim, in_dim});
        weight.fan_in = in_dim;
        bias.name = name + ".bias";
        bias.resize({out_dim});
        bias.init = InitKind::Zero;
    }

    struct Cache {
        TensorT<S> x;
    };

    TensorT<S> forward(const TensorT<S>& x, Cache* cache) const {
        Eigen::Map<const RowMat<S>> X(x.data(), x.b, in_);
        Eigen::Map<const RowMat<S>> W(weight.value.data(), out_, in_);
        TensorT<S> out(x.b, out_, 1, 1);
        Eigen::Map<RowMat<S>> Y(out.data(), x.b, out_);
        Y.noalias() = X * W.transpose();
        for (int bi = 0; bi < x.b; ++bi)
            for (int o = 0; o < out_; ++o) Y(bi, o) += bias.value[o];
        if (cache) cache->x = x;
        return out;
    }

    TensorT<S> backward(const Cache& cache, const TensorT<S>& dy) {
        Eigen::Map<const RowMat<S>> X(cache.x.data(), cache.x.b, in_);
        Eigen::Map<const RowMat<S>> dY(dy.data(), dy.b, out_);
        Eigen::Map<RowMat<S>> dW(weight.grad.data(), out_, in_);
        dW.noalias() += dY.transpose() * X;
        for (int o = 0; o < out_; ++o) bias.grad[o] += dY.col(o).sum();

        Eigen::Map<const RowMat<S>> W(weight.value.data(), out_, in_);
        TensorT<S> dx(dy.b, in_, 1, 1);
        Eigen::Map<RowMat<S>> dX(dx.data(), dy.b, in_);
        dX.noalias() = dY * W;
        return dx;
    }

    void collect(std::vector<ParamT<S>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

    ParamT<S> weight;
    ParamT<S> bias;

private:
    int in_ = 0, out_ = 0;
};

template <class S>
TensorT<S> upsample_nearest2x(const TensorT<S>& x) {
    TensorT<S> out(x.b, x.c, x.h * 2, x.w * 2);
    for (int bi = 0; bi < x.b; ++bi)
        for (int ci = 0; ci < x.c; ++ci)
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx)
                    out.at(bi, ci, y, xx) = x.at(bi, ci, y / 2, xx / 2);
    return out;
}

template <class S>
TensorT<S> upsample_nearest2x_backward(const TensorT<S>& dy) {
    TensorT<S> dx(dy.b, dy.c, dy.h / 2, dy.w / 2);
    for (int bi = 0; bi < dy.b; ++bi)
        for (int ci = 0; ci < dy.c; ++ci)
            for (int y = 0; y < dy.h; ++y)
                for (int xx = 0; xx < dy.w; ++xx)
                    dx.at(bi, ci, y / 2, xx / 2) += dy.at(bi, ci, y, xx);
    return dx;
}

}  // namespace cpdm::nn
