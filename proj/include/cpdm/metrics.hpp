#pragma once

#include <string>
#include <vector>

#include "cpdm/tensor.hpp"

namespace cpdm {

/// Full-reference quality metrics over metric-space ([0,1]) images, computed
/// in double precision. All three are symmetric in their arguments.

double mse(const Image& a, const Image& b);

/// 10*log10(1/mse) with peak value 1. Identical inputs give +infinity.
double psnr(const Image& a, const Image& b);

/// Mean local structural similarity with an 11x11 Gaussian window
/// (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1; windows are fully inside
/// the image (no padding), each channel scored then averaged. Requires
/// H, W >= 11.
double ssim(const Image& a, const Image& b);

struct MetricRow {
    std::string id;
    double psnr_db = 0;
    double ssim = 0;
    double mse = 0;
};

struct MetricReport {
    std::string dataset_name;
    std::vector<MetricRow> per_image;

    MetricRow aggregate() const;  // arithmetic means, id = "mean"
    std::string to_csv() const;   // columns: id,psnr_db,ssim,mse
    std::string to_table() const;
};

}  // namespace cpdm
