#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cpdm/rng.hpp"
#include "cpdm/tensor.hpp"

namespace cpdm {

/// One training pair: raw degraded image y0 and clean reference x0, both in
/// model space after loading.
struct PairedSample {
    std::string id;
    Image y0;
    Image x0;
};

struct ManifestEntry {
    std::string id;
    std::filesystem::path raw;  // relative to root
    std::filesystem::path ref;
};

/// Dataset layout on disk: <root>/raw/<id>.png, <root>/ref/<id>.png and a
/// manifest.json at the root listing pairs and the load-time image size.
struct DatasetManifest {
    std::filesystem::path root;
    int height = 64;
    int width = 64;
    std::vector<ManifestEntry> pairs;
};

DatasetManifest read_manifest(const std::filesystem::path& root);
void write_manifest(const DatasetManifest& m);

/// Decode, resize (bilinear) and normalize every pair, in manifest order.
/// Fails up front if any listed file is missing.
std::vector<PairedSample> load_dataset(const DatasetManifest& m);

/// Synthetic degradation used by the hermetic end-to-end fixture:
/// per-channel exponential attenuation, additive veil of a fixed color, and
/// Gaussian sensor noise. A test fixture, not a calibrated physical model.
struct DegradeParams {
    std::array<double, 3> attenuation{2.0, 0.7, 0.3};
    std::array<double, 3> haze_color{0.10, 0.35, 0.45};
    double haze_strength = 0.35;
    double noise_sigma = 0.01;
    uint64_t seed = 0;

    static DegradeParams identity() {
        return {{0, 0, 0}, {0, 0, 0}, 0.0, 0.0, 0};
    }
    void validate() const;
};

/// y = clamp(x0 * exp(-attenuation) * (1 - haze) + haze_color * haze + noise).
/// Input and output are metric space.
Image synth_degrade(const Image& x0, const DegradeParams& p);

/// Generate n procedural reference images (smooth color fields plus a few
/// geometric shapes), degrade each with per-image jittered parameters, and
/// write the PNG pairs plus manifest under root. Bit-identical for a fixed
/// seed.
DatasetManifest make_synthetic_dataset(const std::filesystem::path& root,
                                       int n, int image_size,
                                       const DegradeParams& p, uint64_t seed);

/// Deterministic permutation of indices [0, n).
std::vector<size_t> shuffled_indices(size_t n, Rng& rng);

}  // namespace cpdm
