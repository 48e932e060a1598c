#include "fca/losses.hpp"

#include <cmath>

#include "fca/errors.hpp"

namespace fca {
namespace {

constexpr double kMaxSizeLogit = 40.0;  // must match decode.cpp

}  // namespace

double loss_iou(const std::vector<std::optional<Detection>>& selected,
                const Box& gt) {
    double total = 0.0;
    for (const auto& sel : selected)
        if (sel) total += iou(sel->box, gt);
    return total;
}

double loss_obj(const std::vector<std::optional<Detection>>& selected) {
    double total = 0.0;
    for (const auto& sel : selected)
        if (sel) total += sel->objectness;
    return total;
}

double loss_cls(const std::vector<std::optional<Detection>>& selected,
                int target_class) {
    double total = 0.0;
    for (const auto& sel : selected) {
        if (!sel) continue;
        if (target_class < 0 ||
            target_class >= static_cast<int>(sel->class_probs.size()))
            throw ArgumentError("loss_cls: target class index " +
                                std::to_string(target_class) +
                                " out of range");
        total += sel->class_probs[target_class];
    }
    return total;
}

double loss_smooth(const Image& image, const BoolMask& mask) {
    if (mask.height != image.height || mask.width != image.width)
        throw ArgumentError("loss_smooth: mask/image shape mismatch");
    double total = 0.0;
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!mask.at(y, x)) continue;
            if (y + 1 < image.height && mask.at(y + 1, x))
                for (int c = 0; c < image.channels; ++c) {
                    const double d = image.at(y, x, c) - image.at(y + 1, x, c);
                    total += d * d;
                }
            if (x + 1 < image.width && mask.at(y, x + 1))
                for (int c = 0; c < image.channels; ++c) {
                    const double d = image.at(y, x, c) - image.at(y, x + 1, c);
                    total += d * d;
                }
        }
    }
    return total;
}

Image loss_smooth_grad(const Image& image, const BoolMask& mask) {
    if (mask.height != image.height || mask.width != image.width)
        throw ArgumentError("loss_smooth_grad: mask/image shape mismatch");
    Image grad(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!mask.at(y, x)) continue;
            if (y + 1 < image.height && mask.at(y + 1, x))
                for (int c = 0; c < image.channels; ++c) {
                    const double d =
                        2.0 * (image.at(y, x, c) - image.at(y + 1, x, c));
                    grad.at(y, x, c) += d;
                    grad.at(y + 1, x, c) -= d;
                }
            if (x + 1 < image.width && mask.at(y, x + 1))
                for (int c = 0; c < image.channels; ++c) {
                    const double d =
                        2.0 * (image.at(y, x, c) - image.at(y, x + 1, c));
                    grad.at(y, x, c) += d;
                    grad.at(y, x + 1, c) -= d;
                }
        }
    }
    return grad;
}

double loss_total(const LossTerms& terms, const LossWeights& weights,
                  const LossFlags& flags) {
    if (!flags.any())
        throw ConfigError("loss_total: every loss term is disabled");
    double total = 0.0;
    if (flags.iou) total += weights.alpha * terms.iou;
    if (flags.obj) total += weights.beta * terms.obj;
    if (flags.cls) total += weights.gamma * terms.cls;
    if (flags.smooth) total += weights.mu * terms.smooth;
    return total;
}

std::array<double, 4> iou_box_gradient(const Box& box, const Box& gt) {
    std::array<double, 4> grad = {0.0, 0.0, 0.0, 0.0};
    const double ix0 = std::max(box.x_min, gt.x_min);
    const double iy0 = std::max(box.y_min, gt.y_min);
    const double ix1 = std::min(box.x_max, gt.x_max);
    const double iy1 = std::min(box.y_max, gt.y_max);
    const double iw = ix1 - ix0;
    const double ih = iy1 - iy0;
    if (iw <= 0.0 || ih <= 0.0) return grad;

    const double inter = iw * ih;
    const double uni = box.area() + gt.area() - inter;
    if (uni <= 0.0) return grad;

    const double bw = box.width();
    const double bh = box.height();
    // d(intersection)/d(box coord); active only when the box edge is the
    // binding one.
    const double di[4] = {box.x_min > gt.x_min ? -ih : 0.0,
                          box.y_min > gt.y_min ? -iw : 0.0,
                          box.x_max < gt.x_max ? ih : 0.0,
                          box.y_max < gt.y_max ? iw : 0.0};
    const double da[4] = {-bh, -bw, bh, bw};
    for (int k = 0; k < 4; ++k)
        grad[k] = (di[k] * (uni + inter) - inter * da[k]) / (uni * uni);
    return grad;
}

AttackLossResult attack_loss(const RawPrediction& raw, const Box& gt,
                             int target_class, const Image& composited,
                             const BoolMask& mask, const LossWeights& weights,
                             const LossFlags& flags) {
    if (!flags.any())
        throw ConfigError("attack_loss: every loss term is disabled");

    AttackLossResult result;
    result.draw = RawGrad::zeros_like(raw);
    result.dimage_smooth = Image(composited.height, composited.width,
                                 composited.channels);

    const auto selected = select_target_predictions(
        raw, gt, target_class, composited.height, composited.width);

    // Disabled terms are recorded as exact zeros so the weighted-sum
    // identity holds on every step record.
    if (flags.iou) result.terms.iou = loss_iou(selected, gt);
    if (flags.obj) result.terms.obj = loss_obj(selected);
    if (flags.cls) result.terms.cls = loss_cls(selected, target_class);
    if (flags.smooth) {
        result.terms.smooth = loss_smooth(composited, mask);
        Image sg = loss_smooth_grad(composited, mask);
        for (size_t i = 0; i < sg.data.size(); ++i)
            result.dimage_smooth.data[i] = weights.mu * sg.data[i];
    }
    result.total = loss_total(result.terms, weights, flags);

    // Gradients of the detector-side terms at each selected slot.
    for (size_t s = 0; s < selected.size(); ++s) {
        if (!selected[s]) continue;
        const ScalePrediction& scale = raw.scales[s];
        const int a = selected[s]->anchor_index;
        const int y = selected[s]->cell_y;
        const int x = selected[s]->cell_x;
        const int nc = scale.num_classes;
        Tensor3& dmap = result.draw.scales[s];
        auto draw_at = [&](int field) -> double& {
            return dmap.at(a * (5 + nc) + field, y, x);
        };

        if (flags.obj) {
            const double o = selected[s]->objectness;
            draw_at(kFieldObj) += weights.beta * o * (1.0 - o);
        }
        if (flags.cls) {
            const double p = selected[s]->class_probs[target_class];
            draw_at(kFieldCls0 + target_class) += weights.gamma * p * (1.0 - p);
        }
        if (flags.iou) {
            // Recompute decode intermediates to know which clamps bound.
            const double tx = scale.field(a, kFieldTx, y, x);
            const double ty = scale.field(a, kFieldTy, y, x);
            const double tw = scale.field(a, kFieldTw, y, x);
            const double th = scale.field(a, kFieldTh, y, x);
            const double sx = sigmoid(tx);
            const double sy = sigmoid(ty);
            const double cx = (x + sx) * scale.stride;
            const double cy = (y + sy) * scale.stride;
            const double w =
                scale.anchors_px[a][0] * std::exp(std::min(tw, kMaxSizeLogit));
            const double h =
                scale.anchors_px[a][1] * std::exp(std::min(th, kMaxSizeLogit));
            const double x0u = cx - w / 2, x1u = cx + w / 2;
            const double y0u = cy - h / 2, y1u = cy + h / 2;
            const double ax0 = (x0u > 0.0 && x0u < composited.width) ? 1.0 : 0.0;
            const double ax1 = (x1u > 0.0 && x1u < composited.width) ? 1.0 : 0.0;
            const double ay0 = (y0u > 0.0 && y0u < composited.height) ? 1.0 : 0.0;
            const double ay1 = (y1u > 0.0 && y1u < composited.height) ? 1.0 : 0.0;

            const auto g = iou_box_gradient(selected[s]->box, gt);
            const double dcx = g[0] * ax0 + g[2] * ax1;
            const double dcy = g[1] * ay0 + g[3] * ay1;
            const double dw = 0.5 * (g[2] * ax1 - g[0] * ax0);
            const double dh = 0.5 * (g[3] * ay1 - g[1] * ay0);

            const double dw_dtw = tw < kMaxSizeLogit ? w : 0.0;
            const double dh_dth = th < kMaxSizeLogit ? h : 0.0;
            draw_at(kFieldTx) +=
                weights.alpha * dcx * scale.stride * sx * (1.0 - sx);
            draw_at(kFieldTy) +=
                weights.alpha * dcy * scale.stride * sy * (1.0 - sy);
            draw_at(kFieldTw) += weights.alpha * dw * dw_dtw;
            draw_at(kFieldTh) += weights.alpha * dh * dh_dth;
        }
    }
    return result;
}

}  // namespace fca
