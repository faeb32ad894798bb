#pragma once

#include <cstddef>
#include <vector>

namespace cpdm {

/// Forward-process noise schedule and the closed-form scalars derived from
/// it. All arrays are computed once in double precision at construction and
/// are immutable afterwards, so a schedule can be shared freely across
/// threads.
///
/// Index convention: the public accessors take t in [1, T], matching the
/// usual presentation; storage is 0-based (entry t-1).
class NoiseSchedule {
public:
    /// betas[t] interpolate linearly from beta_start (t=1) to beta_end (t=T).
    /// Requires T >= 1 and 0 < beta_start <= beta_end < 1.
    static NoiseSchedule linear(int T, double beta_start, double beta_end);

    int steps() const { return T_; }

    double beta(int t) const { return betas_[index(t)]; }
    double alpha(int t) const { return alphas_[index(t)]; }
    double alpha_bar(int t) const { return alpha_bars_[index(t)]; }
    /// alpha_bar(t-1), with the t=1 case defined as 1.
    double alpha_bar_prev(int t) const { return alpha_bar_prev_[index(t)]; }
    /// Variance of the reverse-step posterior; zero at t=1.
    double posterior_variance(int t) const {
        return posterior_variances_[index(t)];
    }

    /// Coefficients (coef_xt, coef_x0) of the posterior mean
    /// coef_xt * x_t + coef_x0 * x_0. At t=1 this is (0, 1).
    std::pair<double, double> posterior_mean_coeffs(int t) const;

    const std::vector<double>& betas() const { return betas_; }
    const std::vector<double>& alpha_bars() const { return alpha_bars_; }

private:
    NoiseSchedule() = default;
    size_t index(int t) const;  // validates 1 <= t <= T

    int T_ = 0;
    std::vector<double> betas_;
    std::vector<double> alphas_;
    std::vector<double> alpha_bars_;
    std::vector<double> alpha_bar_prev_;
    std::vector<double> posterior_variances_;
};

}  // namespace cpdm
