// attack.hpp — the camouflage optimization loop: render the vehicle with the
// current texture into each training scene, composite, run the detector,
// take the adversarial loss, and descend on the paintable texels with Adam
// (projected back into [0,1] after every step). Plus hard-example mining and
// fine-tuning on the mined set.
#pragma once

#include <string>
#include <vector>

#include "fca/detector.hpp"
#include "fca/losses.hpp"
#include "fca/mesh.hpp"
#include "fca/scene.hpp"
#include "fca/texture_atlas.hpp"

namespace fca {

struct AttackConfig {
    LossWeights weights;
    LossFlags flags;
    double learning_rate = 0.01;
    int max_epochs = 5;
    int batch_size = 8;
    uint64_t seed = 0;
    InitMode init_mode = InitMode::Random;  // recorded in checkpoints
    std::string target_class = "car";
    double score_threshold = 0.25;      // used when mining hard examples
    double nms_iou_threshold = 0.5;
    std::string step_log_path;          // JSONL stream; empty = no log
    std::string checkpoint_dir;         // per-epoch checkpoints; empty = none

    // Throws ConfigError on out-of-range values. optimize_texture itself
    // tolerates learning_rate == 0 (a well-defined no-op) so the zero-step
    // identity stays testable; the CLI validates before running.
    void validate() const;
};

struct StepRecord {
    int epoch = 0;
    int batch_index = 0;
    LossTerms terms;        // batch means
    double total = 0.0;
    double grad_norm = 0.0; // L2 norm of the masked texel gradient
};

struct AttackResult {
    TextureAtlas texture;
    std::vector<StepRecord> steps;
};

// Algorithm: for each epoch, shuffle scenes with the seeded stream; for each
// minibatch, average texel gradients over the batch (scene order), take one
// Adam step on paintable texels, clamp to [0,1]. Non-paintable texels stay
// bitwise equal to init. Throws CapabilityError when the detector cannot
// provide input gradients.
AttackResult optimize_texture(const Mesh& mesh, const TextureAtlas& init,
                              const SceneSet& scenes,
                              const DetectorAdapter& detector,
                              const AttackConfig& config);

// Scenes where the vehicle wearing `texture` is still correctly detected
// (attack failures). May be empty.
SceneSet mine_hard_examples(const Mesh& mesh, const SceneSet& scenes,
                            const TextureAtlas& texture,
                            const DetectorAdapter& detector,
                            const AttackConfig& config);

// Continues optimization from `texture` on the hard set for `epochs` epochs
// (0 is a no-op returning the texture unchanged). Empty hard set →
// ArgumentError.
AttackResult finetune_on_hard(const Mesh& mesh, const TextureAtlas& texture,
                              const SceneSet& hard,
                              const DetectorAdapter& detector,
                              const AttackConfig& config, int epochs);

}  // namespace fca
