#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cpdm/nn/unet.hpp"

namespace cpdm {

/// Adam first/second moments, aligned with the model's parameter registry.
struct OptimizerState {
    int64_t step = 0;
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;

    void match(const std::vector<nn::ParamT<float>*>& params) {
        m.resize(params.size());
        v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            m[i].assign(params[i]->size(), 0.f);
            v[i].assign(params[i]->size(), 0.f);
        }
    }
};

/// Everything a checkpoint records besides the weights themselves.
struct CheckpointInfo {
    ModelConfig model;
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int64_t step = 0;
    uint64_t seed = 0;
};

/// On-disk layout: <dir>/manifest.json plus one raw little-endian float32
/// file per named parameter under <dir>/params/. When optimizer state is
/// included it lands under <dir>/opt_m/ and <dir>/opt_v/ with the same file
/// names. Round-trips are bit-exact.
void save_checkpoint(const std::filesystem::path& dir,
                     const nn::UNet<float>& model, const CheckpointInfo& info,
                     const OptimizerState* opt = nullptr);

struct LoadedCheckpoint {
    CheckpointInfo info;
    std::unique_ptr<nn::UNet<float>> model;
    OptimizerState opt;
    bool has_optimizer = false;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

/// Manifest-only read (cheap compatibility checks).
CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);

}  // namespace cpdm
