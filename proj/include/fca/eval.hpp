// eval.hpp — per-scene detection outcomes and the two headline metrics.
//
// A scene counts as correctly detected when, after NMS, some detection has
// the target class as argmax, IoU with the ground-truth box ≥ 0.5, and
// score ≥ the score threshold. ASR is measured over the scenes that were
// correct with the plain texture: the fraction no longer correct with the
// adversarial one (vanished or flipped to another class).
#pragma once

#include <string>
#include <vector>

#include "fca/decode.hpp"
#include "fca/detector.hpp"
#include "fca/mesh.hpp"
#include "fca/scene.hpp"
#include "fca/texture_atlas.hpp"

namespace fca {

struct EvalConfig {
    double score_threshold = 0.25;
    double nms_iou_threshold = 0.5;
    std::string target_class = "car";
    double iou_threshold = 0.5;  // the "0.5" in P@0.5
};

struct SceneOutcome {
    bool correct = false;
    double best_iou = 0.0;   // best IoU with gt among kept detections
    int best_class = -1;     // argmax class of the best-overlap detection
    double best_score = 0.0;
    int num_detections = 0;  // NMS survivors
};

// Outcome classification from already-decoded, NMS-kept detections.
// Exposed separately so tests can tally hand-built detection lists.
SceneOutcome classify_detections(const std::vector<Detection>& kept,
                                 const Box& gt, int target_class,
                                 double score_threshold, double iou_threshold);

// Renders the scene with the given texture (occluder applied if present),
// runs the detector and NMS, and classifies. Scenes with an empty
// image_path composite onto a uniform background (kEvalBackgroundGray).
inline constexpr double kEvalBackgroundGray = 0.5;
SceneOutcome evaluate_scene(const Mesh& mesh, const Scene& scene,
                            const TextureAtlas& texture,
                            const DetectorAdapter& detector,
                            const EvalConfig& cfg);

// Fraction of scenes correctly detected. Empty scene list → ArgumentError.
double p_at_05(const Mesh& mesh, const std::vector<Scene>& scenes,
               const TextureAtlas& texture, const DetectorAdapter& detector,
               const EvalConfig& cfg);

// Attack success rate; EvalError when no scene is correct with `plain`.
double asr(const Mesh& mesh, const std::vector<Scene>& scenes,
           const TextureAtlas& plain, const TextureAtlas& adv,
           const DetectorAdapter& detector, const EvalConfig& cfg);

}  // namespace fca
