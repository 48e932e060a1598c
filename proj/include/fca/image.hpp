// image.hpp — dense row-major H×W×C double image and a boolean pixel mask.
// Values are kept in [0,1] by convention; nothing here enforces it.
#pragma once

#include <cstdint>
#include <vector>

namespace fca {

struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;  // HWC, row-major

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * w * c, fill) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

struct BoolMask {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> data;

    BoolMask() = default;
    BoolMask(int h, int w, bool fill = false)
        : height(h), width(w),
          data(static_cast<size_t>(h) * w, fill ? 1 : 0) {}

    uint8_t& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }

    size_t count() const {
        size_t n = 0;
        for (uint8_t v : data) n += v ? 1 : 0;
        return n;
    }
};

}  // namespace fca
