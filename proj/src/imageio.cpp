#include "cpdm/imageio.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

namespace cpdm::io {

Image load_png(const std::filesystem::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty())
        throw std::runtime_error("imageio: cannot decode " + path.string());

    Image img{Tensor(1, 3, bgr.rows, bgr.cols), Space::Metric};
    for (int y = 0; y < bgr.rows; ++y) {
        const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            img.t.at(0, 0, y, x) = row[x][2] / 255.f;  // R
            img.t.at(0, 1, y, x) = row[x][1] / 255.f;  // G
            img.t.at(0, 2, y, x) = row[x][0] / 255.f;  // B
        }
    }
    return img;
}

void save_png(const std::filesystem::path& path, const Image& img) {
    if (img.space != Space::Metric)
        throw std::invalid_argument("imageio: save_png expects a metric-space image");
    if (img.t.b != 1 || img.t.c != 3)
        throw std::invalid_argument("imageio: save_png expects a single 3-channel image");

    cv::Mat bgr(img.t.h, img.t.w, CV_8UC3);
    auto to_u8 = [](float v) {
        const float c = std::min(1.f, std::max(0.f, v));
        return static_cast<unsigned char>(std::lround(c * 255.f));
    };
    for (int y = 0; y < img.t.h; ++y) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.t.w; ++x) {
            row[x][2] = to_u8(img.t.at(0, 0, y, x));
            row[x][1] = to_u8(img.t.at(0, 1, y, x));
            row[x][0] = to_u8(img.t.at(0, 2, y, x));
        }
    }
    if (!cv::imwrite(path.string(), bgr))
        throw std::runtime_error("imageio: cannot write " + path.string());
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    Image out{Tensor(img.t.b, img.t.c, out_h, out_w), img.space};
    for (int bi = 0; bi < img.t.b; ++bi)
        for (int ci = 0; ci < img.t.c; ++ci) {
            cv::Mat src(img.t.h, img.t.w, CV_32F,
                        const_cast<float*>(img.t.data()) +
                            (static_cast<size_t>(bi) * img.t.c + ci) *
                                img.t.h * img.t.w);
            cv::Mat dst(out_h, out_w, CV_32F,
                        out.t.data() + (static_cast<size_t>(bi) * out.t.c + ci) *
                                           out_h * out_w);
            cv::resize(src, dst, {out_w, out_h}, 0, 0, cv::INTER_LINEAR);
        }
    return out;
}

Image quantize_u8(const Image& img) {
    if (img.space != Space::Metric)
        throw std::invalid_argument("imageio: quantize_u8 expects metric space");
    Image out = img;
    for (auto& v : out.t.v) {
        const float c = std::min(1.f, std::max(0.f, v));
        v = std::lround(c * 255.f) / 255.f;
    }
    return out;
}

}  // namespace cpdm::io
