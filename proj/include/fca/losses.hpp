// losses.hpp — the adversarial loss suite. Four terms:
//   iou    — sum over scales of IoU(selected box, gt); shrinking overlap
//            pulls predicted boxes off the vehicle.
//   obj    — sum over scales of the selected box's objectness.
//   cls    — sum over scales of the selected box's target-class probability.
//   smooth — squared difference of adjacent composited pixels, restricted to
//            pairs lying inside the vehicle mask; keeps the camouflage
//            printable.
// The attack minimizes the weighted sum. Selection of the per-scale box is
// select_target_predictions (decode.hpp) and is shared by iou/obj/cls.
#pragma once

#include <optional>
#include <vector>

#include "fca/decode.hpp"
#include "fca/detector.hpp"
#include "fca/image.hpp"

namespace fca {

struct LossWeights {
    double alpha = 0.05;  // iou
    double beta = 1.0;    // objectness
    double gamma = 0.5;   // classification
    double mu = 1.0;      // smoothness
};

struct LossFlags {
    bool iou = true;
    bool obj = true;
    bool cls = true;
    bool smooth = true;

    bool any() const { return iou || obj || cls || smooth; }
};

struct LossTerms {
    double iou = 0.0;
    double obj = 0.0;
    double cls = 0.0;
    double smooth = 0.0;
};

double loss_iou(const std::vector<std::optional<Detection>>& selected,
                const Box& gt);
double loss_obj(const std::vector<std::optional<Detection>>& selected);
double loss_cls(const std::vector<std::optional<Detection>>& selected,
                int target_class);

// Pairs where either endpoint is outside the mask are skipped; channels sum.
double loss_smooth(const Image& image, const BoolMask& mask);
Image loss_smooth_grad(const Image& image, const BoolMask& mask);

// Weighted sum of the enabled terms; disabled terms contribute exactly 0.
// Throws ConfigError when every term is disabled.
double loss_total(const LossTerms& terms, const LossWeights& weights,
                  const LossFlags& flags);

// Forward + backward for one composited scene image. draw holds the gradient
// of the weighted detector terms w.r.t. the raw grids; dimage_smooth the
// gradient of the weighted smooth term w.r.t. the image. The two routes are
// combined by the caller after pushing draw through the detector.
struct AttackLossResult {
    LossTerms terms;
    double total = 0.0;
    RawGrad draw;
    Image dimage_smooth;
};

AttackLossResult attack_loss(const RawPrediction& raw, const Box& gt,
                             int target_class, const Image& composited,
                             const BoolMask& mask, const LossWeights& weights,
                             const LossFlags& flags);

// dIoU(box, gt)/d(box coords), subgradient 0 at ties and when disjoint.
// Exposed for finite-difference tests.
std::array<double, 4> iou_box_gradient(const Box& box, const Box& gt);

}  // namespace fca
