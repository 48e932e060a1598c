// layers.hpp — minimal CHW tensor and the two layer types the toy detector
// needs: 2D convolution (im2col + GEMM) and leaky ReLU. Every layer has an
// explicit backward so gradients reach both parameters (training) and the
// input image (the attack).
#pragma once

#include <cstdint>
#include <vector>

#include "fca/rng.hpp"

namespace fca {

struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;  // CHW, row-major

    Tensor3() = default;
    Tensor3(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          data(static_cast<size_t>(c) * h * w, fill) {}

    double& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    size_t size() const { return data.size(); }
};

struct ConvCtx {
    std::vector<double> cols;  // (in_c*k*k) × (out_h*out_w)
    int in_h = 0, in_w = 0;
    int out_h = 0, out_w = 0;
};

struct Conv2d {
    int in_c = 0, out_c = 0, kernel = 3, stride = 1, pad = 1;
    std::vector<double> weight;  // out_c × (in_c*kernel*kernel)
    std::vector<double> bias;    // out_c

    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int k, int s, int p);

    void init_he(Rng& rng);
    int param_count() const;

    Tensor3 forward(const Tensor3& x, ConvCtx* ctx = nullptr) const;
    // dx is computed only when dx != nullptr; dw/db accumulate in place and
    // must be pre-sized like weight/bias.
    void backward(const ConvCtx& ctx, const Tensor3& dy, Tensor3* dx,
                  std::vector<double>* dw, std::vector<double>* db) const;
};

// Slope 0.1 on the negative side; backward keys off the stored input sign.
struct LeakyRelu {
    static constexpr double kSlope = 0.1;
    static Tensor3 forward(const Tensor3& x);
    static Tensor3 backward(const Tensor3& x, const Tensor3& dy);
};

}  // namespace fca
