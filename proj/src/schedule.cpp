#include "cpdm/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cpdm {

NoiseSchedule NoiseSchedule::linear(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument(
            "schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.T_ = T;
    s.betas_.resize(T);
    s.alphas_.resize(T);
    s.alpha_bars_.resize(T);
    s.alpha_bar_prev_.resize(T);
    s.posterior_variances_.resize(T);

    for (int i = 0; i < T; ++i) {
        s.betas_[i] = (T == 1) ? beta_start
                               : beta_start + (static_cast<double>(i) / (T - 1)) *
                                                  (beta_end - beta_start);
        s.alphas_[i] = 1.0 - s.betas_[i];
    }

    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        s.alpha_bar_prev_[i] = prod;
        prod *= s.alphas_[i];
        s.alpha_bars_[i] = prod;
        s.posterior_variances_[i] = (1.0 - s.alpha_bar_prev_[i]) *
                                    (1.0 - s.alphas_[i]) /
                                    (1.0 - s.alpha_bars_[i]);
    }
    return s;
}

size_t NoiseSchedule::index(int t) const {
    if (t < 1 || t > T_)
        throw std::out_of_range("schedule: timestep " + std::to_string(t) +
                                " outside [1, " + std::to_string(T_) + "]");
    return static_cast<size_t>(t - 1);
}

std::pair<double, double> NoiseSchedule::posterior_mean_coeffs(int t) const {
    size_t i = index(t);
    double denom = 1.0 - alpha_bars_[i];
    double coef_xt = std::sqrt(alphas_[i]) * (1.0 - alpha_bar_prev_[i]) / denom;
    double coef_x0 = std::sqrt(alpha_bar_prev_[i]) * (1.0 - alphas_[i]) / denom;
    return {coef_xt, coef_x0};
}

}  // namespace cpdm
