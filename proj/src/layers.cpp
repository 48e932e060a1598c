#include "fca/layers.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace fca {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

int conv_out_dim(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

void im2col(const Tensor3& x, int kernel, int stride, int pad, int out_h,
            int out_w, std::vector<double>& cols) {
    const int patch = x.channels * kernel * kernel;
    cols.assign(static_cast<size_t>(patch) * out_h * out_w, 0.0);
    const size_t plane = static_cast<size_t>(out_h) * out_w;
    for (int c = 0; c < x.channels; ++c) {
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const int row = (c * kernel + ky) * kernel + kx;
                double* dst = cols.data() + row * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= x.height) {
                        dst += out_w;
                        continue;
                    }
                    for (int ox = 0; ox < out_w; ++ox, ++dst) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < x.width) *dst = x.at(c, iy, ix);
                    }
                }
            }
        }
    }
}

void col2im(const std::vector<double>& cols, int channels, int kernel,
            int stride, int pad, int out_h, int out_w, Tensor3& dx) {
    const size_t plane = static_cast<size_t>(out_h) * out_w;
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < kernel; ++ky) {
            for (int kx = 0; kx < kernel; ++kx) {
                const int row = (c * kernel + ky) * kernel + kx;
                const double* src = cols.data() + row * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= dx.height) {
                        src += out_w;
                        continue;
                    }
                    for (int ox = 0; ox < out_w; ++ox, ++src) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < dx.width) dx.at(c, iy, ix) += *src;
                    }
                }
            }
        }
    }
}

}  // namespace

Conv2d::Conv2d(int in_channels, int out_channels, int k, int s, int p)
    : in_c(in_channels), out_c(out_channels), kernel(k), stride(s), pad(p),
      weight(static_cast<size_t>(out_channels) * in_channels * k * k, 0.0),
      bias(out_channels, 0.0) {}

void Conv2d::init_he(Rng& rng) {
    const int fan_in = in_c * kernel * kernel;
    const double scale = std::sqrt(2.0 / fan_in);
    for (double& w : weight) w = rng.normal() * scale;
    for (double& b : bias) b = 0.0;
}

int Conv2d::param_count() const {
    return static_cast<int>(weight.size() + bias.size());
}

Tensor3 Conv2d::forward(const Tensor3& x, ConvCtx* ctx) const {
    if (x.channels != in_c)
        throw std::logic_error("Conv2d::forward: channel mismatch");
    const int out_h = conv_out_dim(x.height, kernel, stride, pad);
    const int out_w = conv_out_dim(x.width, kernel, stride, pad);
    const int patch = in_c * kernel * kernel;

    std::vector<double> local_cols;
    std::vector<double>& cols = ctx ? ctx->cols : local_cols;
    im2col(x, kernel, stride, pad, out_h, out_w, cols);
    if (ctx) {
        ctx->in_h = x.height;
        ctx->in_w = x.width;
        ctx->out_h = out_h;
        ctx->out_w = out_w;
    }

    Tensor3 y(out_c, out_h, out_w);
    ConstMapMat w_mat(weight.data(), out_c, patch);
    ConstMapMat c_mat(cols.data(), patch, out_h * out_w);
    MapMat y_mat(y.data.data(), out_c, out_h * out_w);
    y_mat.noalias() = w_mat * c_mat;
    for (int oc = 0; oc < out_c; ++oc) y_mat.row(oc).array() += bias[oc];
    return y;
}

void Conv2d::backward(const ConvCtx& ctx, const Tensor3& dy, Tensor3* dx,
                      std::vector<double>* dw, std::vector<double>* db) const {
    const int patch = in_c * kernel * kernel;
    const int pixels = ctx.out_h * ctx.out_w;
    ConstMapMat dy_mat(dy.data.data(), out_c, pixels);

    if (dw) {
        ConstMapMat c_mat(ctx.cols.data(), patch, pixels);
        MapMat dw_mat(dw->data(), out_c, patch);
        dw_mat.noalias() += dy_mat * c_mat.transpose();
    }
    if (db) {
        for (int oc = 0; oc < out_c; ++oc)
            (*db)[oc] += dy_mat.row(oc).sum();
    }
    if (dx) {
        ConstMapMat w_mat(weight.data(), out_c, patch);
        std::vector<double> dcols(static_cast<size_t>(patch) * pixels);
        MapMat dc_mat(dcols.data(), patch, pixels);
        dc_mat.noalias() = w_mat.transpose() * dy_mat;
        *dx = Tensor3(in_c, ctx.in_h, ctx.in_w);
        col2im(dcols, in_c, kernel, stride, pad, ctx.out_h, ctx.out_w, *dx);
    }
}

Tensor3 LeakyRelu::forward(const Tensor3& x) {
    Tensor3 y = x;
    for (double& v : y.data)
        if (v < 0.0) v *= kSlope;
    return y;
}

Tensor3 LeakyRelu::backward(const Tensor3& x, const Tensor3& dy) {
    Tensor3 dx = dy;
    for (size_t i = 0; i < dx.data.size(); ++i)
        if (x.data[i] < 0.0) dx.data[i] *= kSlope;
    return dx;
}

}  // namespace fca
