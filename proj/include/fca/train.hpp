// train.hpp — trains the toy detector on plain-texture renders of the
// synthetic scenes until it clears the held-out P@0.5 gate. Standard
// single-stage recipe: per scale, the gt box is assigned to the grid cell
// containing its centre and the prior with the best shape IoU; box offsets
// get a squared-error loss, objectness and classes get BCE, and non-assigned
// anchors at the gt cell whose prior still fits well are ignored rather than
// pushed to zero.
#pragma once

#include <cstdint>
#include <vector>

#include "fca/mesh.hpp"
#include "fca/scene.hpp"
#include "fca/texture_atlas.hpp"
#include "fca/toy_detector.hpp"

namespace fca {

struct TrainConfig {
    int max_epochs = 60;
    int batch_size = 8;
    double learning_rate = 1e-3;
    uint64_t seed = 1;
    double target_p_at_05 = 0.90;  // held-out gate; miss → TrainingError
    double score_threshold = 0.25;
    double nms_iou_threshold = 0.5;
    double lambda_box = 5.0;
    double lambda_obj = 1.0;
    double lambda_noobj = 0.5;
    double lambda_cls = 1.0;
    // Anchors at the gt cell with prior IoU at or above this are ignored by
    // the no-object loss (unless they are the assigned anchor).
    double ignore_prior_iou = 0.5;
    bool verbose = false;
};

struct TrainResult {
    ToyDetector detector;
    std::vector<double> heldout_history;  // P@0.5 after each epoch
    int epochs_run = 0;
    double final_p_at_05 = 0.0;
};

// Deterministic given config.seed. Stops at the first epoch whose held-out
// P@0.5 reaches the target; throws TrainingError with diagnostics when the
// epoch budget runs out first. Scene images must match the detector input
// size (square, multiple of 32).
TrainResult train_toy_detector(const Mesh& mesh, const TextureAtlas& plain,
                               const SceneSet& train_set,
                               const SceneSet& heldout_set,
                               const TrainConfig& config);

}  // namespace fca
