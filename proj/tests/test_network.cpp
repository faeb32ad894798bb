#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cpdm/network.hpp"
#include "cpdm/rng.hpp"
#include "cpdm/trainer.hpp"

using namespace cpdm;

namespace {

ModelConfig tiny_cfg() {
    ModelConfig cfg;
    cfg.base_channels = 8;
    cfg.channel_multipliers = {1, 2};
    cfg.blocks_per_level = 2;
    cfg.time_embed_dim = 16;
    return cfg;
}

// Fills every parameter (including the zero-initialized output projection)
// so forward passes are non-degenerate.
template <class S>
void randomize_all(nn::UNet<S>& model, uint64_t seed, double stddev = 0.08) {
    Rng rng(seed);
    for (auto* p : model.params())
        for (auto& v : p->value) v = static_cast<S>(rng.normal() * stddev);
}

template <class S>
struct Inputs {
    TensorT<S> xt, y0, diff;
    std::vector<int> t;
};

template <class S>
Inputs<S> random_inputs(int b, int hw, uint64_t seed, int T = 100) {
    Inputs<S> in;
    Rng rng(seed);
    in.xt = TensorT<S>(b, 3, hw, hw);
    in.y0 = TensorT<S>(b, 3, hw, hw);
    rng.fill_normal(in.xt);
    rng.fill_normal(in.y0);
    in.diff = in.y0;
    for (size_t i = 0; i < in.diff.size(); ++i) in.diff.v[i] -= in.xt.v[i];
    for (int i = 0; i < b; ++i)
        in.t.push_back(1 + static_cast<int>(rng.uniform_int(0, T - 1)));
    return in;
}

bool has_ccm_params(const nn::UNet<float>& m) {
    for (auto* p : m.params())
        if (p->name.rfind("ccm.", 0) == 0) return true;
    return false;
}

}  // namespace

TEST_CASE("output shape and zero-init behaviour") {
    nn::UNet<float> model(tiny_cfg());
    model.init(42);
    auto in = random_inputs<float>(2, 8, 1);
    auto out = model.forward(in.xt, in.t, in.y0, &in.diff, nullptr);
    CHECK(out.b == 2);
    CHECK(out.c == 3);
    CHECK(out.h == 8);
    CHECK(out.w == 8);
    for (float v : out.v) CHECK(v == 0.f);  // zero-initialized projection
}

TEST_CASE("init determinism") {
    nn::UNet<float> a(tiny_cfg()), b(tiny_cfg()), c(tiny_cfg());
    a.init(7);
    b.init(7);
    c.init(8);
    bool all_equal = true, any_diff = false;
    for (size_t i = 0; i < a.params().size(); ++i) {
        all_equal &= a.params()[i]->value == b.params()[i]->value;
        any_diff |= a.params()[i]->value != c.params()[i]->value;
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("forward determinism with fixed parameters") {
    nn::UNet<float> model(tiny_cfg());
    randomize_all(model, 3);
    auto in = random_inputs<float>(2, 8, 4);
    auto o1 = model.forward(in.xt, in.t, in.y0, &in.diff, nullptr);
    auto o2 = model.forward(in.xt, in.t, in.y0, &in.diff, nullptr);
    CHECK(o1.v == o2.v);
}

TEST_CASE("ablation variants are constructible with the expected structure") {
    ModelConfig base = tiny_cfg();

    ModelConfig a = base;  // y0 condition only
    a.use_difference_condition = false;
    a.use_ccm = false;
    ModelConfig b = base;  // + difference condition
    b.use_difference_condition = true;
    b.use_ccm = false;
    ModelConfig c = base;  // + content pyramid instead
    c.use_difference_condition = false;
    c.use_ccm = true;
    ModelConfig d = base;  // full model
    d.use_difference_condition = true;
    d.use_ccm = true;

    CHECK(a.in_channels() == 6);
    CHECK(b.in_channels() == 9);
    CHECK(c.in_channels() == 6);
    CHECK(d.in_channels() == 9);

    nn::UNet<float> ma(a), mb(b), mc(c), md(d);
    CHECK(!has_ccm_params(ma));
    CHECK(!has_ccm_params(mb));
    CHECK(has_ccm_params(mc));
    CHECK(has_ccm_params(md));

    // the difference input is mandatory iff configured
    ma.init(1);
    auto in = random_inputs<float>(1, 8, 5);
    CHECK_NOTHROW(ma.forward(in.xt, in.t, in.y0, nullptr, nullptr));
    md.init(1);
    CHECK_THROWS_AS(md.forward(in.xt, in.t, in.y0, nullptr, nullptr),
                    std::invalid_argument);
}

TEST_CASE("content pyramid: sizes, zero input, and effect on the output") {
    ModelConfig cfg = tiny_cfg();
    cfg.channel_multipliers = {1, 2, 4};
    nn::UNet<float> model(cfg);
    randomize_all(model, 9);

    TensorT<float> y0(1, 3, 16, 16);
    Rng(2).fill_normal(y0);
    auto feats = model.ccm_features(y0);
    REQUIRE(feats.size() == 3);
    const int sizes[3] = {16, 8, 4};
    for (int k = 0; k < 3; ++k) {
        CHECK(feats[k].h == sizes[k]);
        CHECK(feats[k].w == sizes[k]);
        CHECK(feats[k].c == cfg.level_channels(k));
    }

    // bias-free pyramid: zero image maps to zero features
    TensorT<float> zeros(1, 3, 16, 16);
    for (const auto& f : model.ccm_features(zeros))
        for (float v : f.v) CHECK(v == 0.f);

    ModelConfig no_ccm = cfg;
    no_ccm.use_ccm = false;
    nn::UNet<float> plain(no_ccm);
    CHECK_THROWS_AS(plain.ccm_features(y0), std::logic_error);

    // same init seed, pyramid toggled: outputs must differ broadly
    randomize_all(plain, 9);
    auto in = random_inputs<float>(1, 16, 6);
    auto with = model.forward(in.xt, in.t, in.y0, &in.diff, nullptr);
    auto without = plain.forward(in.xt, in.t, in.y0, &in.diff, nullptr);
    int differing = 0;
    for (size_t i = 0; i < with.size(); ++i)
        if (std::abs(with.v[i] - without.v[i]) > 1e-6f) ++differing;
    CHECK(differing >= static_cast<int>(with.size() / 100));
}

TEST_CASE("every probed parameter influences the output") {
    nn::UNet<float> model(tiny_cfg());
    randomize_all(model, 11);
    auto in = random_inputs<float>(1, 8, 7);
    const auto base = model.forward(in.xt, in.t, in.y0, &in.diff, nullptr);

    Rng pick(13);
    auto& params = model.params();
    for (int probe = 0; probe < 20; ++probe) {
        auto* p = params[pick.uniform_int(0, static_cast<int64_t>(params.size()) - 1)];
        const size_t j =
            static_cast<size_t>(pick.uniform_int(0, static_cast<int64_t>(p->size()) - 1));
        const float saved = p->value[j];
        p->value[j] += 0.05f;
        auto out = model.forward(in.xt, in.t, in.y0, &in.diff, nullptr);
        p->value[j] = saved;

        double max_diff = 0;
        for (size_t i = 0; i < out.size(); ++i)
            max_diff = std::max(max_diff,
                                std::abs(static_cast<double>(out.v[i]) - base.v[i]));
        INFO("parameter ", p->name, " element ", j);
        CHECK(max_diff > 1e-9);
    }
}

TEST_CASE("analytic gradients match finite differences on a two-level model") {
    ModelConfig cfg;
    cfg.base_channels = 4;
    cfg.channel_multipliers = {1, 2};
    cfg.blocks_per_level = 1;
    cfg.time_embed_dim = 8;

    nn::UNet<double> model(cfg);
    randomize_all(model, 21, 0.1);

    TrainBatch<double> batch;
    Rng rng(22);
    batch.x0 = {TensorT<double>(1, 3, 8, 8), Space::Model};
    batch.y0 = {TensorT<double>(1, 3, 8, 8), Space::Model};
    rng.fill_normal(batch.x0.t, 0.5);
    rng.fill_normal(batch.y0.t, 0.5);
    batch.t = {37};
    batch.eps = TensorT<double>(1, 3, 8, 8);
    rng.fill_normal(batch.eps);
    const auto sched = NoiseSchedule::linear(100, 1e-4, 0.02);

    model.zero_grad();
    diffusion_loss_backward(model, batch, sched);

    const double h = 1e-4;
    int checked = 0, loose = 0;
    Rng pick(23);
    for (auto* p : model.params()) {
        for (int k = 0; k < 4; ++k) {
            const size_t j = static_cast<size_t>(
                pick.uniform_int(0, static_cast<int64_t>(p->size()) - 1));
            const double saved = p->value[j];
            p->value[j] = saved + h;
            const double up = diffusion_loss(model, batch, sched);
            p->value[j] = saved - h;
            const double down = diffusion_loss(model, batch, sched);
            p->value[j] = saved;

            const double fd = (up - down) / (2 * h);
            const double an = p->grad[j];
            const double rel =
                std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
            INFO("param ", p->name, " element ", j, " analytic ", an, " fd ", fd);
            CHECK(rel < 1e-2);
            if (rel >= 1e-3) ++loose;
            ++checked;
        }
    }
    CHECK(loose <= checked / 20);  // >= 95% tight
}

TEST_CASE("spatial size must fit the level count") {
    ModelConfig cfg = tiny_cfg();
    cfg.channel_multipliers = {1, 2, 4};
    nn::UNet<float> model(cfg);
    model.init(1);
    auto in = random_inputs<float>(1, 6, 8);  // 6 not divisible by 4
    CHECK_THROWS_AS(model.forward(in.xt, in.t, in.y0, &in.diff, nullptr),
                    std::invalid_argument);
}

TEST_CASE("config validation") {
    ModelConfig cfg = tiny_cfg();
    CHECK_NOTHROW(cfg.validate(true));
    cfg.channel_multipliers = {1};
    CHECK_NOTHROW(cfg.validate(false));  // library accepts single level
    CHECK_THROWS_AS(cfg.validate(true), std::invalid_argument);
    cfg.channel_multipliers = {};
    CHECK_THROWS_AS(cfg.validate(false), std::invalid_argument);
    cfg = tiny_cfg();
    cfg.blocks_per_level = 0;
    CHECK_THROWS_AS(cfg.validate(false), std::invalid_argument);
    cfg = tiny_cfg();
    cfg.time_embed_dim = 7;
    CHECK_THROWS_AS(cfg.validate(false), std::invalid_argument);
}
