#include "fca/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fca/errors.hpp"

namespace fca {
namespace {

// exp() argument clamp so adversarially large size logits stay finite.
constexpr double kMaxSizeLogit = 40.0;

double clampd(double v, double lo, double hi) {
    return std::min(std::max(v, lo), hi);
}

}  // namespace

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::vector<Detection> decode_scale(const ScalePrediction& scale, int image_h,
                                    int image_w) {
    std::vector<Detection> dets;
    dets.reserve(static_cast<size_t>(scale.grid_h()) * scale.grid_w() *
                 scale.num_anchors);
    for (int y = 0; y < scale.grid_h(); ++y) {
        for (int x = 0; x < scale.grid_w(); ++x) {
            for (int a = 0; a < scale.num_anchors; ++a) {
                const double cx =
                    (x + sigmoid(scale.field(a, kFieldTx, y, x))) * scale.stride;
                const double cy =
                    (y + sigmoid(scale.field(a, kFieldTy, y, x))) * scale.stride;
                const double w =
                    scale.anchors_px[a][0] *
                    std::exp(std::min(scale.field(a, kFieldTw, y, x),
                                      kMaxSizeLogit));
                const double h =
                    scale.anchors_px[a][1] *
                    std::exp(std::min(scale.field(a, kFieldTh, y, x),
                                      kMaxSizeLogit));
                Detection d;
                d.box = Box{clampd(cx - w / 2, 0.0, image_w),
                            clampd(cy - h / 2, 0.0, image_h),
                            clampd(cx + w / 2, 0.0, image_w),
                            clampd(cy + h / 2, 0.0, image_h)};
                d.objectness = sigmoid(scale.field(a, kFieldObj, y, x));
                d.class_probs.resize(scale.num_classes);
                for (int c = 0; c < scale.num_classes; ++c)
                    d.class_probs[c] =
                        sigmoid(scale.field(a, kFieldCls0 + c, y, x));
                d.anchor_index = a;
                d.cell_y = y;
                d.cell_x = x;
                dets.push_back(std::move(d));
            }
        }
    }
    return dets;
}

std::vector<Detection> decode_all(const RawPrediction& raw, int image_h,
                                  int image_w) {
    std::vector<Detection> all;
    for (size_t s = 0; s < raw.scales.size(); ++s) {
        std::vector<Detection> dets = decode_scale(raw.scales[s], image_h,
                                                   image_w);
        for (Detection& d : dets) {
            d.scale_index = static_cast<int>(s);
            all.push_back(std::move(d));
        }
    }
    return all;
}

EncodedBox encode_box(const Box& box, const ScalePrediction& scale, int anchor,
                      int cell_y, int cell_x) {
    const double cx = (box.x_min + box.x_max) / 2.0;
    const double cy = (box.y_min + box.y_max) / 2.0;
    const double fx = cx / scale.stride - cell_x;
    const double fy = cy / scale.stride - cell_y;
    if (fx <= 0.0 || fx >= 1.0 || fy <= 0.0 || fy >= 1.0)
        throw ArgumentError("encode_box: box centre not strictly inside cell");
    auto logit = [](double p) { return std::log(p / (1.0 - p)); };
    EncodedBox e;
    e.tx = logit(fx);
    e.ty = logit(fy);
    e.tw = std::log(box.width() / scale.anchors_px[anchor][0]);
    e.th = std::log(box.height() / scale.anchors_px[anchor][1]);
    return e;
}

std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double iou_threshold, double score_threshold) {
    std::vector<const Detection*> candidates;
    for (const Detection& d : dets)
        if (d.score() >= score_threshold) candidates.push_back(&d);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Detection* a, const Detection* b) {
                         return a->score() > b->score();
                     });
    std::vector<Detection> kept;
    for (const Detection* cand : candidates) {
        bool suppressed = false;
        for (const Detection& k : kept) {
            if (iou(cand->box, k.box) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(*cand);
    }
    return kept;
}

std::vector<std::optional<Detection>> select_target_predictions(
    const RawPrediction& raw, const Box& gt, int target_class, int image_h,
    int image_w) {
    std::vector<std::optional<Detection>> selected(raw.scales.size());
    for (size_t s = 0; s < raw.scales.size(); ++s) {
        const std::vector<Detection> dets =
            decode_scale(raw.scales[s], image_h, image_w);
        double best = -1.0;
        for (const Detection& d : dets) {
            if (iou(d.box, gt) <= 0.0) continue;
            const double value = d.objectness * d.class_probs[target_class];
            if (value > best) {
                best = value;
                selected[s] = d;
                selected[s]->scale_index = static_cast<int>(s);
            }
        }
    }
    return selected;
}

}  // namespace fca
