#include "cpdm/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cpdm {

namespace {

void require_pair(const Image& a, const Image& b, const char* what) {
    if (a.space != Space::Metric || b.space != Space::Metric)
        throw std::invalid_argument(std::string(what) +
                                    ": metric-space images required");
    detail::require_same_shape(a.t, b.t, what);
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kWin);
    const int half = kWin / 2;
    double sum = 0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2 * kSigma * kSigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// Separable valid-mode Gaussian filter over a (h, w) plane.
std::vector<double> gauss_valid(const std::vector<double>& img, int h, int w,
                                const std::vector<double>& k) {
    const int oh = h - kWin + 1, ow = w - kWin + 1;
    std::vector<double> rows(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < kWin; ++i) s += k[i] * img[y * w + x + i];
            rows[y * ow + x] = s;
        }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < kWin; ++i) s += k[i] * rows[(y + i) * ow + x];
            out[y * ow + x] = s;
        }
    return out;
}

}  // namespace

double mse(const Image& a, const Image& b) {
    require_pair(a, b, "mse");
    double acc = 0;
    for (size_t i = 0; i < a.t.size(); ++i) {
        const double d = static_cast<double>(a.t.v[i]) - b.t.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.t.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / m);
}

double ssim(const Image& a, const Image& b) {
    require_pair(a, b, "ssim");
    if (a.t.h < kWin || a.t.w < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");

    static const std::vector<double> kern = gaussian_kernel();
    const int h = a.t.h, w = a.t.w;
    const size_t hw = static_cast<size_t>(h) * w;

    double total = 0;
    size_t count = 0;
    for (int bi = 0; bi < a.t.b; ++bi)
        for (int ci = 0; ci < a.t.c; ++ci) {
            std::vector<double> x(hw), y(hw), xx(hw), yy(hw), xy(hw);
            const float* pa = a.t.data() + (static_cast<size_t>(bi) * a.t.c + ci) * hw;
            const float* pb = b.t.data() + (static_cast<size_t>(bi) * a.t.c + ci) * hw;
            for (size_t i = 0; i < hw; ++i) {
                x[i] = pa[i];
                y[i] = pb[i];
                xx[i] = x[i] * x[i];
                yy[i] = y[i] * y[i];
                xy[i] = x[i] * y[i];
            }
            auto mu_x = gauss_valid(x, h, w, kern);
            auto mu_y = gauss_valid(y, h, w, kern);
            auto m_xx = gauss_valid(xx, h, w, kern);
            auto m_yy = gauss_valid(yy, h, w, kern);
            auto m_xy = gauss_valid(xy, h, w, kern);
            for (size_t i = 0; i < mu_x.size(); ++i) {
                const double vx = m_xx[i] - mu_x[i] * mu_x[i];
                const double vy = m_yy[i] - mu_y[i] * mu_y[i];
                const double cxy = m_xy[i] - mu_x[i] * mu_y[i];
                const double num = (2 * mu_x[i] * mu_y[i] + kC1) * (2 * cxy + kC2);
                const double den =
                    (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + kC1) * (vx + vy + kC2);
                total += num / den;
                ++count;
            }
        }
    return total / static_cast<double>(count);
}

MetricRow MetricReport::aggregate() const {
    MetricRow agg;
    agg.id = "mean";
    if (per_image.empty()) return agg;
    for (const auto& r : per_image) {
        agg.psnr_db += r.psnr_db;
        agg.ssim += r.ssim;
        agg.mse += r.mse;
    }
    const double n = static_cast<double>(per_image.size());
    agg.psnr_db /= n;
    agg.ssim /= n;
    agg.mse /= n;
    return agg;
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    os << "id,psnr_db,ssim,mse\n";
    auto row = [&os](const MetricRow& r) {
        os << r.id << ',' << std::setprecision(10) << r.psnr_db << ','
           << r.ssim << ',' << r.mse << '\n';
    };
    for (const auto& r : per_image) row(r);
    row(aggregate());
    return os.str();
}

std::string MetricReport::to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(16) << "id" << std::right << std::setw(12)
       << "psnr_db" << std::setw(12) << "ssim" << std::setw(12) << "mse"
       << '\n';
    auto row = [&os](const MetricRow& r) {
        os << std::left << std::setw(16) << r.id << std::right << std::fixed
           << std::setprecision(4) << std::setw(12) << r.psnr_db
           << std::setw(12) << r.ssim << std::setw(12) << std::setprecision(6)
           << r.mse << '\n';
        os.unsetf(std::ios::fixed);
    };
    for (const auto& r : per_image) row(r);
    if (!dataset_name.empty()) os << "dataset: " << dataset_name << '\n';
    row(aggregate());
    return os.str();
}

}  // namespace cpdm
