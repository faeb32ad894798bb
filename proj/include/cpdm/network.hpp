#pragma once

#include "cpdm/nn/unet.hpp"
#include "cpdm/tensor.hpp"

namespace cpdm {

/// Space-checked entry points over the raw network. Library internals
/// (trainer, sampler) work on bare tensors; these wrappers are the public
/// surface for callers holding tagged images.

template <class S>
ImageT<S> predict_noise(const nn::UNet<S>& model, const ImageT<S>& xt,
                        const std::vector<int>& t, const ImageT<S>& y0,
                        const ImageT<S>* diff = nullptr) {
    detail::require_space(xt, Space::Model, "predict_noise");
    detail::require_space(y0, Space::Model, "predict_noise");
    TensorT<S> out = model.forward(xt.t, t, y0.t, diff ? &diff->t : nullptr,
                                   nullptr);
    return {std::move(out), Space::Model};
}

template <class S>
std::vector<TensorT<S>> ccm_extract(const nn::UNet<S>& model,
                                    const ImageT<S>& y0) {
    detail::require_space(y0, Space::Model, "ccm_extract");
    return model.ccm_features(y0.t);
}

using Model = nn::UNet<float>;

}  // namespace cpdm
