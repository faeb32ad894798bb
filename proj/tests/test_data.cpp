#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cpdm/data.hpp"
#include "cpdm/imageio.hpp"
#include "cpdm/metrics.hpp"

using namespace cpdm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("cpdm_test_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string file_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Image gradient_img(int size) {
    Image img{Tensor(1, 3, size, size), Space::Metric};
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x)
                img.t.at(0, c, y, x) =
                    std::clamp((x + y) / (2.f * size) + 0.2f * c, 0.f, 1.f);
    return img;
}

}  // namespace

TEST_CASE("identity degradation is the identity") {
    auto x = gradient_img(16);
    auto y = synth_degrade(x, DegradeParams::identity());
    CHECK(y.t.v == x.t.v);
}

TEST_CASE("degradation hurts psnr, monotonically in haze") {
    auto x = gradient_img(32);

    DegradeParams p;  // defaults: attenuation + veil + slight noise
    p.attenuation = {2.0, 0.5, 0.1};
    p.haze_color = {0.0, 0.2, 0.3};
    p.haze_strength = 0.3;
    p.noise_sigma = 0.0;
    auto y = synth_degrade(x, p);
    const double d = psnr(y, x);
    CHECK(std::isfinite(d));
    CHECK(d < 20.0);

    DegradeParams q = DegradeParams::identity();
    q.haze_color = {0.1, 0.3, 0.4};
    double prev = std::numeric_limits<double>::infinity();
    for (double h : {0.0, 0.3, 0.6}) {
        q.haze_strength = h;
        const double cur = psnr(synth_degrade(x, q), x);
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("degradation output stays in range and rejects bad params") {
    auto x = gradient_img(16);
    DegradeParams p;
    p.noise_sigma = 0.5;  // lots of noise, exercises the clamp
    auto y = synth_degrade(x, p);
    for (float v : y.t.v) {
        CHECK(v >= 0.f);
        CHECK(v <= 1.f);
    }

    DegradeParams bad;
    bad.haze_strength = 1.0;
    CHECK_THROWS_AS(synth_degrade(x, bad), std::invalid_argument);
    bad = DegradeParams{};
    bad.attenuation[0] = -1;
    CHECK_THROWS_AS(synth_degrade(x, bad), std::invalid_argument);
}

TEST_CASE("synthetic dataset: counts, determinism, identity") {
    TempDir tmp("synth");

    auto m = make_synthetic_dataset(tmp.path / "a", 10, 16, DegradeParams{}, 3);
    CHECK(m.pairs.size() == 10);
    int pngs = 0;
    for (const auto& e : fs::recursive_directory_iterator(tmp.path / "a"))
        if (e.path().extension() == ".png") ++pngs;
    CHECK(pngs == 20);
    CHECK(fs::exists(tmp.path / "a" / "manifest.json"));

    make_synthetic_dataset(tmp.path / "b", 10, 16, DegradeParams{}, 3);
    for (const auto& e : m.pairs) {
        CHECK(file_bytes(tmp.path / "a" / e.raw) ==
              file_bytes(tmp.path / "b" / e.raw));
        CHECK(file_bytes(tmp.path / "a" / e.ref) ==
              file_bytes(tmp.path / "b" / e.ref));
    }

    auto mi = make_synthetic_dataset(tmp.path / "ident", 1, 16,
                                     DegradeParams::identity(), 3);
    CHECK(file_bytes(tmp.path / "ident" / mi.pairs[0].raw) ==
          file_bytes(tmp.path / "ident" / mi.pairs[0].ref));
}

TEST_CASE("load_dataset: shapes, resize, determinism, errors") {
    TempDir tmp("load");
    make_synthetic_dataset(tmp.path / "ds", 3, 32, DegradeParams{}, 17);

    auto m = read_manifest(tmp.path / "ds");
    CHECK(m.height == 32);
    m.height = m.width = 16;  // request resize at load time

    auto samples = load_dataset(m);
    REQUIRE(samples.size() == 3);
    for (const auto& s : samples) {
        CHECK(s.x0.t.c == 3);
        CHECK(s.x0.t.h == 16);
        CHECK(s.x0.t.w == 16);
        CHECK(s.x0.t.same_shape(s.y0.t));
        CHECK(s.x0.space == Space::Model);
        for (float v : s.x0.t.v) {
            CHECK(v >= -1.f - 1e-6f);
            CHECK(v <= 1.f + 1e-6f);
        }
    }

    auto again = load_dataset(m);
    for (size_t i = 0; i < samples.size(); ++i) {
        CHECK(samples[i].id == again[i].id);
        CHECK(samples[i].x0.t.v == again[i].x0.t.v);
        CHECK(samples[i].y0.t.v == again[i].y0.t.v);
    }

    fs::remove(tmp.path / "ds" / m.pairs[1].raw);
    CHECK_THROWS_AS(load_dataset(m), std::runtime_error);
}

TEST_CASE("png round trip and quantization") {
    TempDir tmp("png");
    auto img = io::quantize_u8(gradient_img(16));
    io::save_png(tmp.path / "x.png", img);
    auto back = io::load_png(tmp.path / "x.png");
    REQUIRE(back.t.same_shape(img.t));
    for (size_t i = 0; i < img.t.size(); ++i)
        CHECK(back.t.v[i] == doctest::Approx(img.t.v[i]).epsilon(1e-6));
}

TEST_CASE("seeded shuffle is a permutation") {
    Rng rng(11);
    auto idx = shuffled_indices(100, rng);
    std::vector<bool> seen(100, false);
    for (size_t i : idx) {
        CHECK(!seen[i]);
        seen[i] = true;
    }
    Rng rng2(11);
    CHECK(shuffled_indices(100, rng2) == idx);
}
