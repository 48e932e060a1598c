// detector.hpp — the detector contract the attack and eval code is written
// against, plus the raw-prediction/detection value types shared with decode.
//
// A detector maps an RGB image (values in [0,1]) to per-scale raw prediction
// grids. Decoding those grids into boxes lives in decode.hpp so that every
// adapter with the same head layout shares one decode path.
#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fca/box.hpp"
#include "fca/image.hpp"
#include "fca/layers.hpp"

namespace fca {

// Per-anchor channel layout inside a raw grid: tx, ty, tw, th, objectness
// logit, then one logit per class. Channel index = anchor * (5 + C) + field.
inline constexpr int kFieldTx = 0;
inline constexpr int kFieldTy = 1;
inline constexpr int kFieldTw = 2;
inline constexpr int kFieldTh = 3;
inline constexpr int kFieldObj = 4;
inline constexpr int kFieldCls0 = 5;

struct ScalePrediction {
    int stride = 0;
    int num_anchors = 0;
    int num_classes = 0;
    // Prior box sizes in input pixels, one (w, h) per anchor.
    std::vector<std::array<double, 2>> anchors_px;
    // Shape: (num_anchors * (5 + num_classes)) × grid_h × grid_w.
    Tensor3 map;

    int grid_h() const { return map.height; }
    int grid_w() const { return map.width; }
    double field(int anchor, int f, int y, int x) const {
        return map.at(anchor * (5 + num_classes) + f, y, x);
    }
};

struct RawPrediction {
    std::vector<ScalePrediction> scales;
};

// Gradient w.r.t. each raw grid; same scale order and tensor shapes as the
// RawPrediction it was built from.
struct RawGrad {
    std::vector<Tensor3> scales;

    static RawGrad zeros_like(const RawPrediction& raw) {
        RawGrad g;
        g.scales.reserve(raw.scales.size());
        for (const auto& s : raw.scales)
            g.scales.emplace_back(s.map.channels, s.map.height, s.map.width);
        return g;
    }
    double& field(int scale, int anchor, int f, int num_classes, int y,
                  int x) {
        return scales[scale].at(anchor * (5 + num_classes) + f, y, x);
    }
};

// One decoded box in input-pixel coordinates.
struct Detection {
    Box box;
    double objectness = 0.0;
    std::vector<double> class_probs;
    // Where in the raw grids this box came from; the attack uses these to
    // route loss gradients back to the right logits.
    int scale_index = -1;
    int anchor_index = -1;
    int cell_y = -1;
    int cell_x = -1;

    int class_argmax() const {
        int best = 0;
        for (size_t c = 1; c < class_probs.size(); ++c)
            if (class_probs[c] > class_probs[best]) best = static_cast<int>(c);
        return best;
    }
    double score() const {
        double best = class_probs.empty() ? 0.0 : class_probs[0];
        for (double p : class_probs) best = std::max(best, p);
        return objectness * best;
    }
};

// Handle returned by a traced forward pass: holds whatever activations the
// adapter needs to push a raw-grid gradient back to the input image.
class TracedForward {
  public:
    virtual ~TracedForward() = default;
    virtual const RawPrediction& raw() const = 0;
    virtual Image input_gradient(const RawGrad& upstream) const = 0;
};

class DetectorAdapter {
  public:
    virtual ~DetectorAdapter() = default;

    virtual const std::vector<std::string>& class_names() const = 0;
    // Detectors here take square inputs of a fixed size.
    virtual int input_size() const = 0;

    virtual RawPrediction predict_raw(const Image& image) const = 0;

    virtual bool supports_input_gradient() const = 0;
    // Throws CapabilityError when supports_input_gradient() is false.
    virtual std::unique_ptr<TracedForward> predict_traced(
        const Image& image) const = 0;
};

// Looks up an adapter by registry name ("toy" is built in) and loads its
// weights from checkpoint_path. Throws ConfigError for unknown names.
std::unique_ptr<DetectorAdapter> make_detector(const std::string& name,
                                               const std::string& checkpoint_path);

int class_index_of(const DetectorAdapter& det, const std::string& name);

}  // namespace fca
