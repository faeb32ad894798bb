#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cpdm/schedule.hpp"

using cpdm::NoiseSchedule;

namespace {
// Independent product oracle for alpha_bar.
double alpha_bar_oracle(const NoiseSchedule& s, int t) {
    long double prod = 1.0L;
    for (int i = 1; i <= t; ++i) prod *= 1.0L - static_cast<long double>(s.beta(i));
    return static_cast<double>(prod);
}
}  // namespace

TEST_CASE("paper-scale linear schedule invariants") {
    const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
    REQUIRE(s.steps() == 1000);
    CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta(1000) == doctest::Approx(0.02).epsilon(1e-12));

    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) < 1.0);
        if (t > 1) CHECK(s.beta(t) >= s.beta(t - 1));
        CHECK(s.alpha(t) == 1.0 - s.beta(t));
        CHECK(s.alpha_bar(t) > 0.0);
        if (t > 1) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        // recurrence against the stored previous value
        CHECK(s.alpha_bar(t) == doctest::Approx(s.alpha_bar_prev(t) * s.alpha(t))
                                    .epsilon(1e-15));
        CHECK(s.posterior_variance(t) >= 0.0);
        if (t > 1) CHECK(s.posterior_variance(t) > 0.0);
    }
    CHECK(s.alpha_bar(1) < 1.0);
    CHECK(s.alpha_bar_prev(1) == 1.0);
    CHECK(s.posterior_variance(1) == 0.0);

    // cumulative product against an independent long-double evaluation
    for (int t : {1, 2, 10, 500, 999, 1000})
        CHECK(s.alpha_bar(t) ==
              doctest::Approx(alpha_bar_oracle(s, t)).epsilon(1e-12));

    // the chain forgets the signal by t = T
    CHECK(s.alpha_bar(1000) < 1e-4);
}

TEST_CASE("single-step degenerate schedule") {
    const auto s = NoiseSchedule::linear(1, 0.1, 0.2);
    CHECK(s.beta(1) == 0.1);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.posterior_variance(1) == 0.0);
}

TEST_CASE("two-step schedule, hand-evaluated") {
    const auto s = NoiseSchedule::linear(2, 0.1, 0.2);
    CHECK(s.alpha(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha(2) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.72).epsilon(1e-15));
    CHECK(s.posterior_variance(1) == 0.0);
    // (1 - 0.9)(1 - 0.8)/(1 - 0.72)
    CHECK(s.posterior_variance(2) == doctest::Approx(0.0714285714).epsilon(1e-8));
}

TEST_CASE("posterior mean coefficients") {
    const auto s2 = NoiseSchedule::linear(2, 0.1, 0.2);
    auto [cxt, cx0] = s2.posterior_mean_coeffs(2);
    // sqrt(0.8)*0.1/0.28 and sqrt(0.9)*0.2/0.28
    CHECK(cxt == doctest::Approx(0.319438282).epsilon(1e-8));
    CHECK(cx0 == doctest::Approx(0.677630927).epsilon(1e-8));

    auto [c1t, c10] = s2.posterior_mean_coeffs(1);
    CHECK(c1t == 0.0);
    CHECK(c10 == 1.0);

    const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
    auto [ct, c0] = s.posterior_mean_coeffs(1000);
    CHECK(ct > 0.0);
    CHECK(ct < 1.0);
    CHECK(c0 > 0.0);
    CHECK(c0 < 1.0);
}

TEST_CASE("posterior mean routes agree on random scalars") {
    // coef_xt*x_t + coef_x0*x0 must equal the eps-parameterized form
    // (1/sqrt(a))(x_t - (1-a)/sqrt(1-abar) * eps) whenever
    // x_t = sqrt(abar) x0 + sqrt(1-abar) eps.
    const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> td(1, 1000);
    for (int i = 0; i < 1000; ++i) {
        const int t = td(gen);
        const double x0 = nd(gen), eps = nd(gen);
        const double abar = s.alpha_bar(t), a = s.alpha(t);
        const double xt = std::sqrt(abar) * x0 + std::sqrt(1 - abar) * eps;
        auto [cxt, cx0] = s.posterior_mean_coeffs(t);
        const double route_a = cxt * xt + cx0 * x0;
        const double route_b =
            (xt - (1 - a) / std::sqrt(1 - abar) * eps) / std::sqrt(a);
        CHECK(std::abs(route_a - route_b) <=
              1e-5 * std::max({1.0, std::abs(route_a), std::abs(route_b)}));
    }
}

TEST_CASE("construction is deterministic") {
    const auto a = NoiseSchedule::linear(500, 1e-4, 0.02);
    const auto b = NoiseSchedule::linear(500, 1e-4, 0.02);
    CHECK(a.betas() == b.betas());
    CHECK(a.alpha_bars() == b.alpha_bars());
}

TEST_CASE("invalid arguments are rejected") {
    CHECK_THROWS_AS(NoiseSchedule::linear(0, 1e-4, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.02, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.5, 1.0), std::invalid_argument);

    const auto s = NoiseSchedule::linear(10, 1e-4, 0.02);
    CHECK_THROWS_AS(s.beta(0), std::out_of_range);
    CHECK_THROWS_AS(s.beta(11), std::out_of_range);
    CHECK_THROWS_AS(s.posterior_mean_coeffs(11), std::out_of_range);
}
