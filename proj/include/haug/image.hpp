#pragma once

#include <cstdint>
#include <vector>

#include "haug/tensor.hpp"

namespace haug {

// RGB image, interleaved row-major, values in [0,1]
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> data;  // height * width * 3

    Image() = default;
    Image(int h, int w) : height(h), width(w), data(static_cast<size_t>(h) * w * 3, 0.0f) {}

    float& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    bool empty() const { return data.empty(); }
};

// standard luma weights, used by grayscale / contrast / saturation
inline float luma(float r, float g, float b) {
    return 0.299f * r + 0.587f * g + 0.114f * b;
}

void clamp01(Image& img);

// bilinear sample of the crop box [x0,x0+w) x [y0,y0+h) (source pixels,
// fractional) resized to out_h x out_w
Image crop_resize_bilinear(const Image& src, float x0, float y0, float h, float w, int out_h,
                           int out_w);

// batch of images to an NCHW tensor (channel-planar)
Tensor images_to_tensor(const std::vector<Image>& batch);

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v);
void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b);

}  // namespace haug
