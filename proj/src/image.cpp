#include "haug/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace haug {

void clamp01(Image& img) {
    for (float& v : img.data) v = std::min(1.0f, std::max(0.0f, v));
}

Image crop_resize_bilinear(const Image& src, float x0, float y0, float h, float w, int out_h,
                           int out_w) {
    Image out(out_h, out_w);
    const float sy = h / static_cast<float>(out_h);
    const float sx = w / static_cast<float>(out_w);
    for (int oy = 0; oy < out_h; ++oy) {
        const float fy = y0 + (static_cast<float>(oy) + 0.5f) * sy - 0.5f;
        const int y1 = static_cast<int>(std::floor(fy));
        const float wy = fy - static_cast<float>(y1);
        const int ya = std::clamp(y1, 0, src.height - 1);
        const int yb = std::clamp(y1 + 1, 0, src.height - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const float fx = x0 + (static_cast<float>(ox) + 0.5f) * sx - 0.5f;
            const int x1 = static_cast<int>(std::floor(fx));
            const float wx = fx - static_cast<float>(x1);
            const int xa = std::clamp(x1, 0, src.width - 1);
            const int xb = std::clamp(x1 + 1, 0, src.width - 1);
            for (int c = 0; c < 3; ++c) {
                const float top = src.at(ya, xa, c) + wx * (src.at(ya, xb, c) - src.at(ya, xa, c));
                const float bot = src.at(yb, xa, c) + wx * (src.at(yb, xb, c) - src.at(yb, xa, c));
                out.at(oy, ox, c) = top + wy * (bot - top);
            }
        }
    }
    return out;
}

Tensor images_to_tensor(const std::vector<Image>& batch) {
    if (batch.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
    const int h = batch[0].height, w = batch[0].width;
    std::vector<scalar> data(batch.size() * 3 * static_cast<size_t>(h) * w);
    size_t i = 0;
    for (const Image& img : batch) {
        if (img.height != h || img.width != w)
            throw std::invalid_argument("images_to_tensor: mixed resolutions in batch");
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) data[i++] = static_cast<scalar>(img.at(y, x, c));
    }
    return Tensor::from_data({static_cast<int>(batch.size()), 3, h, w}, std::move(data));
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float d = mx - mn;
    v = mx;
    s = mx > 0.0f ? d / mx : 0.0f;
    if (d <= 0.0f) {
        h = 0.0f;
        return;
    }
    if (mx == r)
        h = (g - b) / d;
    else if (mx == g)
        h = 2.0f + (b - r) / d;
    else
        h = 4.0f + (r - g) / d;
    h /= 6.0f;
    if (h < 0.0f) h += 1.0f;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    if (s <= 0.0f) {
        r = g = b = v;
        return;
    }
    h = h - std::floor(h);
    const float hh = h * 6.0f;
    const int i = std::min(5, static_cast<int>(hh));
    const float f = hh - static_cast<float>(i);
    const float p = v * (1.0f - s);
    const float q = v * (1.0f - s * f);
    const float t = v * (1.0f - s * (1.0f - f));
    switch (i) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
}

}  // namespace haug
