#pragma once

#include <array>
#include <cstddef>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpdm {

/// Dense 4-D tensor in NCHW layout. Vectors (e.g. time embeddings) use
/// shape (B, D, 1, 1); schedule-style columns use (N, 1, 1, 1).
template <class S>
struct TensorT {
    int b = 0, c = 0, h = 0, w = 0;
    std::vector<S> v;

    TensorT() = default;
    TensorT(int b_, int c_, int h_, int w_)
        : b(b_), c(c_), h(h_), w(w_),
          v(static_cast<size_t>(b_) * c_ * h_ * w_, S(0)) {}

    static TensorT full(int b_, int c_, int h_, int w_, S value) {
        TensorT t(b_, c_, h_, w_);
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }

    size_t size() const { return v.size(); }
    bool same_shape(const TensorT& o) const {
        return b == o.b && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const {
        return "(" + std::to_string(b) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + ")";
    }

    S& at(int bi, int ci, int y, int x) {
        return v[((static_cast<size_t>(bi) * c + ci) * h + y) * w + x];
    }
    S at(int bi, int ci, int y, int x) const {
        return v[((static_cast<size_t>(bi) * c + ci) * h + y) * w + x];
    }

    S* data() { return v.data(); }
    const S* data() const { return v.data(); }

    bool all_finite() const {
        for (S x : v)
            if (!std::isfinite(static_cast<double>(x))) return false;
        return true;
    }

    template <class U>
    TensorT<U> cast() const {
        TensorT<U> out(b, c, h, w);
        for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
        return out;
    }
};

using Tensor = TensorT<float>;

/// Pixel-value convention: Model is [-1,1] (network I/O), Metric is [0,1]
/// (files and quality metrics).
enum class Space { Model, Metric };

/// Image batch tagged with its value-range convention. The tag is checked at
/// conversion and metric boundaries; math ops never silently re-range.
template <class S>
struct ImageT {
    TensorT<S> t;
    Space space = Space::Metric;

    ImageT() = default;
    ImageT(TensorT<S> t_, Space s) : t(std::move(t_)), space(s) {}

    int batch() const { return t.b; }
};

using Image = ImageT<float>;

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

template <class S>
void require_same_shape(const TensorT<S>& a, const TensorT<S>& b,
                        const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string("shape mismatch in ") + what +
                                    ": " + a.shape_str() + " vs " +
                                    b.shape_str());
}

template <class S>
void require_space(const ImageT<S>& img, Space expected, const char* what) {
    if (img.space != expected)
        throw std::invalid_argument(std::string(what) +
                                    ": image has the wrong space tag");
}

}  // namespace detail

}  // namespace cpdm
