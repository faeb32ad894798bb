#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cpdm/diffusion.hpp"
#include "cpdm/rng.hpp"

using namespace cpdm;

namespace {

ImageT<double> scalar_img(double v, Space sp = Space::Model) {
    return {TensorT<double>::full(1, 1, 1, 1, v), sp};
}

const NoiseSchedule& two_step() {
    static const auto s = NoiseSchedule::linear(2, 0.1, 0.2);
    return s;
}

}  // namespace

TEST_CASE("q_sample limits") {
    const auto& s = two_step();
    ImageT<double> x0{TensorT<double>::full(2, 3, 4, 4, 0.5), Space::Model};
    TensorT<double> zero(2, 3, 4, 4);
    std::vector<int> t{1, 2};

    auto xt = q_sample(x0, t, zero, s);
    for (int b = 0; b < 2; ++b) {
        const double want = std::sqrt(s.alpha_bar(t[b])) * 0.5;
        for (int c = 0; c < 3; ++c)
            CHECK(xt.t.at(b, c, 0, 0) == doctest::Approx(want).epsilon(1e-12));
    }

    ImageT<double> zero_img{TensorT<double>(2, 3, 4, 4), Space::Model};
    TensorT<double> eps = TensorT<double>::full(2, 3, 4, 4, 1.0);
    auto xe = q_sample(zero_img, t, eps, s);
    for (int b = 0; b < 2; ++b)
        CHECK(xe.t.at(b, 0, 1, 1) ==
              doctest::Approx(std::sqrt(1 - s.alpha_bar(t[b]))).epsilon(1e-12));
}

TEST_CASE("q_sample scalar case, hand-evaluated") {
    // sqrt(0.72)*1 + sqrt(0.28)*1
    auto xt = q_sample(scalar_img(1.0), {2}, TensorT<double>::full(1, 1, 1, 1, 1.0),
                       two_step());
    CHECK(xt.t.v[0] == doctest::Approx(1.3776783996).epsilon(1e-9));
}

TEST_CASE("q_posterior_mean basics") {
    const auto& s = two_step();
    auto m1 = q_posterior_mean(scalar_img(0.37), scalar_img(2.5), {1}, s);
    CHECK(m1.t.v[0] == 0.37);  // t=1 returns x0 exactly

    auto m2 = q_posterior_mean(scalar_img(1.0), scalar_img(1.3776783996), {2}, s);
    CHECK(m2.t.v[0] == doctest::Approx(1.1177141490).epsilon(1e-9));

    auto mz = q_posterior_mean(scalar_img(0.0), scalar_img(0.0), {2}, s);
    CHECK(mz.t.v[0] == 0.0);
}

TEST_CASE("mean_from_eps basics") {
    const auto& s = two_step();
    auto m = mean_from_eps(scalar_img(0.9), {2}, TensorT<double>(1, 1, 1, 1), s);
    CHECK(m.t.v[0] == doctest::Approx(0.9 / std::sqrt(0.8)).epsilon(1e-12));

    // (1/sqrt(0.8)) * (1.3776784 - 0.2/sqrt(0.28)) matches the x0-route value
    auto m2 = mean_from_eps(scalar_img(1.3776783996), {2},
                            TensorT<double>::full(1, 1, 1, 1, 1.0), s);
    CHECK(m2.t.v[0] == doctest::Approx(1.1177141490).epsilon(1e-9));
}

TEST_CASE("eps route equals x0 route over randomized tensors") {
    const auto s = NoiseSchedule::linear(50, 1e-3, 0.05);
    Rng rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        ImageT<double> x0{TensorT<double>(3, 1, 2, 2), Space::Model};
        rng.fill_normal(x0.t);
        TensorT<double> eps(3, 1, 2, 2);
        rng.fill_normal(eps);
        std::vector<int> t{1 + static_cast<int>(rng.uniform_int(0, 49)),
                           1 + static_cast<int>(rng.uniform_int(0, 49)),
                           1 + static_cast<int>(rng.uniform_int(0, 49))};
        auto xt = q_sample(x0, t, eps, s);
        auto a = q_posterior_mean(x0, xt, t, s);
        auto b = mean_from_eps(xt, t, eps, s);
        for (size_t i = 0; i < a.t.size(); ++i)
            CHECK(std::abs(a.t.v[i] - b.t.v[i]) <=
                  1e-5 * std::max({1.0, std::abs(a.t.v[i]), std::abs(b.t.v[i])}));
    }
}

TEST_CASE("marginal statistics of q_sample") {
    const auto s = NoiseSchedule::linear(100, 1e-4, 0.02);
    const int t = 60, N = 10000;
    ImageT<double> x0{TensorT<double>(1, 1, 2, 2), Space::Model};
    x0.t.v = {0.3, -0.7, 0.9, 0.05};
    Rng rng(99);

    std::array<double, 4> sum{}, sumsq{};
    for (int i = 0; i < N; ++i) {
        TensorT<double> eps(1, 1, 2, 2);
        rng.fill_normal(eps);
        auto xt = q_sample(x0, {t}, eps, s);
        for (int j = 0; j < 4; ++j) {
            sum[j] += xt.t.v[j];
            sumsq[j] += xt.t.v[j] * xt.t.v[j];
        }
    }
    const double abar = s.alpha_bar(t);
    for (int j = 0; j < 4; ++j) {
        const double mean = sum[j] / N;
        const double var = sumsq[j] / N - mean * mean;
        CHECK(std::abs(mean - std::sqrt(abar) * x0.t.v[j]) < 4.0 / std::sqrt(N));
        CHECK(var == doctest::Approx(1 - abar).epsilon(0.10));
    }
}

TEST_CASE("space conversions") {
    ImageT<float> metric{Tensor(1, 1, 1, 3), Space::Metric};
    metric.t.v = {0.f, 0.5f, 1.f};
    auto model = to_model_space(metric);
    CHECK(model.space == Space::Model);
    CHECK(model.t.v[0] == -1.f);
    CHECK(model.t.v[1] == 0.f);
    CHECK(model.t.v[2] == 1.f);

    auto back = to_metric_space(model);
    for (int i = 0; i < 3; ++i)
        CHECK(back.t.v[i] == doctest::Approx(metric.t.v[i]).epsilon(1e-7));

    ImageT<float> hot{Tensor(1, 1, 1, 2), Space::Model};
    hot.t.v = {1.2f, -1.4f};
    auto clamped = to_metric_space(hot);
    CHECK(clamped.t.v[0] == 1.f);
    CHECK(clamped.t.v[1] == 0.f);

    CHECK_THROWS_AS(to_model_space(model), std::invalid_argument);
    CHECK_THROWS_AS(to_metric_space(metric), std::invalid_argument);
}

TEST_CASE("purity and validation") {
    const auto& s = two_step();
    ImageT<double> x0{TensorT<double>(2, 1, 2, 2), Space::Model};
    Rng rng(5);
    rng.fill_normal(x0.t);
    TensorT<double> eps(2, 1, 2, 2);
    rng.fill_normal(eps);

    auto a = q_sample(x0, {1, 2}, eps, s);
    auto b = q_sample(x0, {1, 2}, eps, s);
    CHECK(a.t.v == b.t.v);

    TensorT<double> wrong(1, 1, 2, 2);
    CHECK_THROWS_AS(q_sample(x0, {1, 2}, wrong, s), std::invalid_argument);
    CHECK_THROWS_AS(q_sample(x0, {1, 3}, eps, s), std::out_of_range);
    CHECK_THROWS_AS(q_sample(x0, std::vector<int>{1}, eps, s),
                    std::invalid_argument);

    ImageT<double> metric_x0 = x0;
    metric_x0.space = Space::Metric;
    CHECK_THROWS_AS(q_sample(metric_x0, {1, 2}, eps, s), std::invalid_argument);
}
