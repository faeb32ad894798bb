#include "cpdm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <stdexcept>

#include "cpdm/diffusion.hpp"
#include "cpdm/imageio.hpp"

namespace cpdm {

using nlohmann::json;
namespace fs = std::filesystem;

void DegradeParams::validate() const {
    for (double a : attenuation)
        detail::require(a >= 0.0, "degrade: attenuation must be >= 0");
    for (double h : haze_color)
        detail::require(h >= 0.0 && h <= 1.0, "degrade: haze_color in [0,1]");
    detail::require(haze_strength >= 0.0 && haze_strength < 1.0,
                    "degrade: haze_strength in [0,1)");
    detail::require(noise_sigma >= 0.0, "degrade: noise_sigma must be >= 0");
}

DatasetManifest read_manifest(const fs::path& root) {
    std::ifstream f(root / "manifest.json");
    if (!f)
        throw std::runtime_error("dataset: no manifest.json under " +
                                 root.string());
    json j;
    f >> j;

    DatasetManifest m;
    m.root = root;
    m.height = j.at("image_size").at(0).get<int>();
    m.width = j.at("image_size").at(1).get<int>();
    for (const auto& pj : j.at("pairs"))
        m.pairs.push_back({pj.at("id").get<std::string>(),
                           pj.at("raw").get<std::string>(),
                           pj.at("ref").get<std::string>()});
    return m;
}

void write_manifest(const DatasetManifest& m) {
    json pairs = json::array();
    for (const auto& e : m.pairs)
        pairs.push_back({{"id", e.id},
                         {"raw", e.raw.generic_string()},
                         {"ref", e.ref.generic_string()}});
    json j{{"image_size", {m.height, m.width}}, {"pairs", pairs}};
    std::ofstream f(m.root / "manifest.json");
    if (!f)
        throw std::runtime_error("dataset: cannot write manifest under " +
                                 m.root.string());
    f << j.dump(2) << "\n";
}

std::vector<PairedSample> load_dataset(const DatasetManifest& m) {
    std::set<std::string> ids;
    for (const auto& e : m.pairs) {
        if (!ids.insert(e.id).second)
            throw std::runtime_error("dataset: duplicate id " + e.id);
        for (const auto& rel : {e.raw, e.ref})
            if (!fs::exists(m.root / rel))
                throw std::runtime_error("dataset: missing file " +
                                         (m.root / rel).string());
    }

    std::vector<PairedSample> out;
    out.reserve(m.pairs.size());
    for (const auto& e : m.pairs) {
        Image raw = io::load_png(m.root / e.raw);
        Image ref = io::load_png(m.root / e.ref);
        if (raw.t.h != m.height || raw.t.w != m.width)
            raw = io::resize_bilinear(raw, m.height, m.width);
        if (ref.t.h != m.height || ref.t.w != m.width)
            ref = io::resize_bilinear(ref, m.height, m.width);
        out.push_back(
            {e.id, to_model_space(raw), to_model_space(ref)});
    }
    return out;
}

Image synth_degrade(const Image& x0, const DegradeParams& p) {
    if (x0.space != Space::Metric)
        throw std::invalid_argument("synth_degrade: expects metric space");
    p.validate();

    Rng rng = Rng::stream(p.seed, Rng::Role::Synth);
    Image y = x0;
    for (int bi = 0; bi < y.t.b; ++bi)
        for (int ci = 0; ci < 3; ++ci) {
            const double trans = std::exp(-p.attenuation[ci]) * (1.0 - p.haze_strength);
            const double veil = p.haze_color[ci] * p.haze_strength;
            for (int yy = 0; yy < y.t.h; ++yy)
                for (int xx = 0; xx < y.t.w; ++xx) {
                    double v = x0.t.at(bi, ci, yy, xx) * trans + veil;
                    if (p.noise_sigma > 0) v += rng.normal() * p.noise_sigma;
                    y.t.at(bi, ci, yy, xx) =
                        static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
        }
    return y;
}

namespace {

Image procedural_reference(int size, Rng& rng) {
    Image img{Tensor(1, 3, size, size), Space::Metric};

    // Smooth low-frequency color field.
    for (int ci = 0; ci < 3; ++ci) {
        const double base = 0.25 + 0.5 * rng.uniform();
        struct Wave {
            double amp, fx, fy, phase;
        };
        std::array<Wave, 2> waves;
        for (auto& wv : waves)
            wv = {0.08 + 0.14 * rng.uniform(), 0.5 + 2.0 * rng.uniform(),
                  0.5 + 2.0 * rng.uniform(), 2.0 * M_PI * rng.uniform()};
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                double v = base;
                for (const auto& wv : waves)
                    v += wv.amp * std::sin(2.0 * M_PI *
                                               (wv.fx * x / size +
                                                wv.fy * y / size) +
                                           wv.phase);
                img.t.at(0, ci, y, x) = static_cast<float>(v);
            }
    }

    // A few hard-edged shapes for structure.
    const int n_shapes = 2 + static_cast<int>(rng.uniform_int(0, 3));
    for (int s = 0; s < n_shapes; ++s) {
        const bool circle = rng.uniform() < 0.5;
        std::array<float, 3> color;
        for (auto& c : color) c = static_cast<float>(0.05 + 0.9 * rng.uniform());
        const double cx = rng.uniform() * size, cy = rng.uniform() * size;
        const double r = (0.08 + 0.17 * rng.uniform()) * size;
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                bool inside = circle
                                  ? (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r
                                  : std::abs(x - cx) <= r && std::abs(y - cy) <= r;
                if (inside)
                    for (int ci = 0; ci < 3; ++ci)
                        img.t.at(0, ci, y, x) = color[ci];
            }
    }

    for (auto& v : img.t.v) v = std::clamp(v, 0.f, 1.f);
    return img;
}

DegradeParams jitter_params(const DegradeParams& p, Rng& rng) {
    DegradeParams q = p;
    for (auto& a : q.attenuation) a *= 0.85 + 0.3 * rng.uniform();
    q.haze_strength = std::min(0.95, p.haze_strength * (0.85 + 0.3 * rng.uniform()));
    for (auto& h : q.haze_color)
        h = std::clamp(h + 0.06 * (rng.uniform() - 0.5), 0.0, 1.0);
    q.seed = static_cast<uint64_t>(rng.uniform_int(0, INT64_MAX));
    return q;
}

}  // namespace

DatasetManifest make_synthetic_dataset(const fs::path& root, int n,
                                       int image_size, const DegradeParams& p,
                                       uint64_t seed) {
    detail::require(n >= 1, "make_synthetic_dataset: n must be >= 1");
    detail::require(image_size >= 4, "make_synthetic_dataset: size too small");
    p.validate();

    fs::create_directories(root / "raw");
    fs::create_directories(root / "ref");

    DatasetManifest m;
    m.root = root;
    m.height = m.width = image_size;

    for (int i = 0; i < n; ++i) {
        Rng rng = Rng::stream(seed, Rng::Role::Synth, static_cast<uint64_t>(i));
        char id[32];
        std::snprintf(id, sizeof(id), "img_%04d", i);

        Image ref = io::quantize_u8(procedural_reference(image_size, rng));
        DegradeParams pi = jitter_params(p, rng);
        Image raw = synth_degrade(ref, pi);

        ManifestEntry e{id, fs::path("raw") / (std::string(id) + ".png"),
                        fs::path("ref") / (std::string(id) + ".png")};
        io::save_png(root / e.ref, ref);
        io::save_png(root / e.raw, raw);
        m.pairs.push_back(std::move(e));
    }

    write_manifest(m);
    return m;
}

std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = n; i > 1; --i)
        std::swap(idx[i - 1],
                  idx[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
    return idx;
}

}  // namespace cpdm
