// decode.hpp — turns raw prediction grids into boxes and back, plus NMS and
// the per-scale target selection the attack losses operate on.
//
// Decoding follows the usual single-stage recipe: box centre is
// (cell + sigmoid(t)) * stride, box size is prior * exp(t), objectness and
// per-class probabilities are independent sigmoids. Boxes are clamped to the
// image rectangle.
#pragma once

#include <optional>
#include <vector>

#include "fca/box.hpp"
#include "fca/detector.hpp"

namespace fca {

double sigmoid(double x);

// All boxes from one scale, in grid scan order: cell row, then cell column,
// then anchor.
std::vector<Detection> decode_scale(const ScalePrediction& scale, int image_h,
                                    int image_w);

// Every scale concatenated, scale 0 first.
std::vector<Detection> decode_all(const RawPrediction& raw, int image_h,
                                  int image_w);

// Inverse of decode for one assignment: given a ground-truth box and a
// (scale, anchor, cell) slot, the raw activations that would decode back to
// it. Used by training targets and round-trip tests.
struct EncodedBox {
    double tx, ty, tw, th;
};
EncodedBox encode_box(const Box& box, const ScalePrediction& scale, int anchor,
                      int cell_y, int cell_x);

// Greedy NMS. Detections with score() < score_threshold are dropped first;
// the rest are taken in descending score order (ties keep the earlier input
// index) and a box is suppressed when its IoU with an already-kept box
// exceeds iou_threshold.
std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double iou_threshold, double score_threshold);

// For each scale: among that scale's decoded boxes overlapping gt (IoU > 0),
// the one maximising objectness * class_probs[target_class]. Scales with no
// overlapping box yield nullopt.
std::vector<std::optional<Detection>> select_target_predictions(
    const RawPrediction& raw, const Box& gt, int target_class, int image_h,
    int image_w);

}  // namespace fca
