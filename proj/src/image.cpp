#include "crformer/image.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "crformer/errors.hpp"

namespace crformer {
namespace {

void check_image(const Tensor& img, const char* what) {
    const Shape& s = img.shape();
    if (s.size() != 3 || (s[0] != 1 && s[0] != 3) || s[1] <= 0 || s[2] <= 0)
        throw DimensionError(std::string(what) + " expects [1|3,H,W], got " +
                             shape_str(s));
}

}  // namespace

Tensor load_image(const std::string& path) {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str()))
        throw IoError("cannot read PNG '" + path + "': " + png.message);
    png.format = PNG_FORMAT_RGB;
    const int h = static_cast<int>(png.height);
    const int w = static_cast<int>(png.width);
    std::vector<png_byte> buf(static_cast<std::size_t>(PNG_IMAGE_SIZE(png)));
    if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw IoError("cannot decode PNG '" + path + "': " + msg);
    }
    Tensor out = Tensor::zeros({3, h, w});
    std::vector<double>& o = out.data();
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    for (std::int64_t p = 0; p < plane; ++p)
        for (int c = 0; c < 3; ++c)
            o[c * plane + p] = buf[3 * p + c] / 255.0;
    return out;
}

Tensor load_image_gray(const std::string& path) {
    Tensor rgb = load_image(path);
    const int h = rgb.dim(1), w = rgb.dim(2);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::vector<double>& in = rgb.data();
    Tensor out = Tensor::zeros({1, h, w});
    std::vector<double>& o = out.data();
    for (std::int64_t p = 0; p < plane; ++p)
        o[p] = (in[p] + in[plane + p] + in[2 * plane + p]) / 3.0;
    return out;
}

void save_image(const std::string& path, const Tensor& img) {
    check_image(img, "save_image");
    const int channels = img.dim(0), h = img.dim(1), w = img.dim(2);
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::vector<double>& in = img.data();
    std::vector<png_byte> buf(static_cast<std::size_t>(plane) * channels);
    for (std::int64_t p = 0; p < plane; ++p) {
        for (int c = 0; c < channels; ++c) {
            double v = in[c * plane + p];
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            buf[p * channels + c] = static_cast<png_byte>(std::llround(v * 255.0));
        }
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(w);
    png.height = static_cast<png_uint_32>(h);
    png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.c_str(), 0, buf.data(), 0, nullptr))
        throw IoError("cannot write PNG '" + path + "': " + png.message);
}

Tensor crop(const Tensor& img, int top, int left, int h, int w) {
    const Shape& s = img.shape();
    if (s.size() != 3) throw DimensionError("crop expects [C,H,W], got " + shape_str(s));
    if (top < 0 || left < 0 || h <= 0 || w <= 0 || top + h > s[1] || left + w > s[2])
        throw DimensionError("crop window [" + std::to_string(top) + "," +
                             std::to_string(left) + "," + std::to_string(h) + "," +
                             std::to_string(w) + "] outside " + shape_str(s));
    const int channels = s[0];
    const std::int64_t in_plane = static_cast<std::int64_t>(s[1]) * s[2];
    const std::int64_t out_plane = static_cast<std::int64_t>(h) * w;
    const std::vector<double>& in = img.data();
    Tensor out = Tensor::zeros({channels, h, w});
    std::vector<double>& o = out.data();
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < h; ++y)
            std::memcpy(&o[c * out_plane + static_cast<std::int64_t>(y) * w],
                        &in[c * in_plane + static_cast<std::int64_t>(top + y) * s[2] + left],
                        sizeof(double) * static_cast<std::size_t>(w));
    return out;
}

Tensor hflip(const Tensor& img) {
    const Shape& s = img.shape();
    if (s.size() != 3) throw DimensionError("hflip expects [C,H,W], got " + shape_str(s));
    const int channels = s[0], h = s[1], w = s[2];
    const std::int64_t plane = static_cast<std::int64_t>(h) * w;
    const std::vector<double>& in = img.data();
    Tensor out = Tensor::zeros(s);
    std::vector<double>& o = out.data();
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                o[c * plane + static_cast<std::int64_t>(y) * w + x] =
                    in[c * plane + static_cast<std::int64_t>(y) * w + (w - 1 - x)];
    return out;
}

Tensor resize_nearest(const Tensor& img, int out_h, int out_w) {
    const Shape& s = img.shape();
    if (s.size() != 3) throw DimensionError("resize_nearest expects [C,H,W], got " + shape_str(s));
    if (out_h <= 0 || out_w <= 0)
        throw DimensionError("resize_nearest target must be positive");
    const int channels = s[0], h = s[1], w = s[2];
    const std::int64_t in_plane = static_cast<std::int64_t>(h) * w;
    const std::int64_t out_plane = static_cast<std::int64_t>(out_h) * out_w;
    const std::vector<double>& in = img.data();
    Tensor out = Tensor::zeros({channels, out_h, out_w});
    std::vector<double>& o = out.data();
    for (int y = 0; y < out_h; ++y) {
        int sy = static_cast<int>((static_cast<std::int64_t>(y) * h) / out_h);
        for (int x = 0; x < out_w; ++x) {
            int sx = static_cast<int>((static_cast<std::int64_t>(x) * w) / out_w);
            for (int c = 0; c < channels; ++c)
                o[c * out_plane + static_cast<std::int64_t>(y) * out_w + x] =
                    in[c * in_plane + static_cast<std::int64_t>(sy) * w + sx];
        }
    }
    return out;
}

}  // namespace crformer
