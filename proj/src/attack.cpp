#include "fca/attack.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "fca/adam.hpp"
#include "fca/errors.hpp"
#include "fca/eval.hpp"
#include "fca/renderer.hpp"
#include "fca/rng.hpp"

namespace fca {

void AttackConfig::validate() const {
    if (learning_rate <= 0.0)
        throw ConfigError("attack: learning_rate must be > 0");
    if (max_epochs < 1) throw ConfigError("attack: max_epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("attack: batch_size must be >= 1");
    if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0 ||
        weights.mu < 0)
        throw ConfigError("attack: loss weights must be >= 0");
    if (!flags.any())
        throw ConfigError("attack: at least one loss term must be enabled");
    if (score_threshold < 0 || score_threshold > 1 || nms_iou_threshold < 0 ||
        nms_iou_threshold > 1)
        throw ConfigError("attack: thresholds must lie in [0,1]");
}

namespace {

nlohmann::json step_to_json(const StepRecord& rec) {
    nlohmann::json j;
    j["epoch"] = rec.epoch;
    j["batch"] = rec.batch_index;
    j["loss_iou"] = rec.terms.iou;
    j["loss_obj"] = rec.terms.obj;
    j["loss_cls"] = rec.terms.cls;
    j["loss_smooth"] = rec.terms.smooth;
    j["loss_total"] = rec.total;
    j["grad_norm"] = rec.grad_norm;
    return j;
}

AttackResult run_optimization(const Mesh& mesh, const TextureAtlas& init,
                              const SceneSet& scenes,
                              const DetectorAdapter& detector,
                              const AttackConfig& config, int epochs) {
    if (!detector.supports_input_gradient())
        throw CapabilityError(
            "attack: detector does not expose input gradients");
    if (scenes.empty())
        throw ArgumentError("attack: scene set is empty");
    const int target_idx = class_index_of(detector, config.target_class);

    AttackResult result;
    result.texture = init;
    TextureAtlas& texture = result.texture;
    const size_t n_elems = texture.texels.size();

    // Per-element (texel×channel) freeze mask for the optimizer.
    std::vector<uint8_t> elem_mask(n_elems, 0);
    for (size_t t = 0; t < texture.texel_count(); ++t)
        if (texture.paintable[t])
            elem_mask[3 * t] = elem_mask[3 * t + 1] = elem_mask[3 * t + 2] = 1;

    // Backgrounds don't change across epochs; load them once. Scenes without
    // an image path (in-memory protocol scenes) get a flat canvas.
    std::vector<Image> backgrounds;
    backgrounds.reserve(scenes.size());
    for (const Scene& scene : scenes.scenes) {
        if (scene.image_path.empty())
            backgrounds.emplace_back(scene.pose.image_h, scene.pose.image_w, 3,
                                     kEvalBackgroundGray);
        else
            backgrounds.push_back(scene.load_background());
    }

    std::ofstream step_log;
    if (!config.step_log_path.empty()) {
        step_log.open(config.step_log_path);
        if (!step_log)
            throw IoError("cannot open step log: " + config.step_log_path);
    }

    Adam adam(n_elems, config.learning_rate);
    Rng root(config.seed);
    std::vector<size_t> order(scenes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    int64_t step_count = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng epoch_rng = root.child(static_cast<uint64_t>(epoch));
        epoch_rng.shuffle(order);

        int batch_index = 0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size), ++batch_index) {
            const size_t end = std::min(
                order.size(), start + static_cast<size_t>(config.batch_size));
            const double batch_n = static_cast<double>(end - start);

            Image grad(texture.height, texture.width, 3);
            LossTerms terms_sum;
            double total_sum = 0.0;
            for (size_t bi = start; bi < end; ++bi) {
                const Scene& scene = scenes.scenes[order[bi]];
                const RenderOutput render =
                    rasterize(mesh, scene.pose, texture);
                const CompositeResult comp =
                    composite_onto(render, backgrounds[order[bi]], scene);
                const auto traced = detector.predict_traced(comp.image);
                const AttackLossResult alr = attack_loss(
                    traced->raw(), scene.gt_box, target_idx, comp.image,
                    comp.mask, config.weights, config.flags);

                Image dimage = traced->input_gradient(alr.draw);
                for (size_t i = 0; i < dimage.data.size(); ++i)
                    dimage.data[i] += alr.dimage_smooth.data[i];
                // Through Eq. 6 the render gradient is the composite gradient
                // gated by the effective mask.
                for (int y = 0; y < dimage.height; ++y)
                    for (int x = 0; x < dimage.width; ++x)
                        if (!comp.mask.at(y, x))
                            for (int c = 0; c < 3; ++c)
                                dimage.at(y, x, c) = 0.0;
                const Image dtex = backward_to_texture(dimage, render);
                for (size_t i = 0; i < grad.data.size(); ++i)
                    grad.data[i] += dtex.data[i];

                terms_sum.iou += alr.terms.iou;
                terms_sum.obj += alr.terms.obj;
                terms_sum.cls += alr.terms.cls;
                terms_sum.smooth += alr.terms.smooth;
                total_sum += alr.total;
            }

            double grad_sq = 0.0;
            for (size_t i = 0; i < grad.data.size(); ++i) {
                grad.data[i] = elem_mask[i] ? grad.data[i] / batch_n : 0.0;
                grad_sq += grad.data[i] * grad.data[i];
            }

            adam.step_masked(texture.texels.data(), grad.data.data(),
                             elem_mask.data(), n_elems);
            for (size_t i = 0; i < n_elems; ++i)
                if (elem_mask[i])
                    texture.texels[i] =
                        std::min(1.0, std::max(0.0, texture.texels[i]));
            ++step_count;

            StepRecord rec;
            rec.epoch = epoch;
            rec.batch_index = batch_index;
            rec.terms.iou = terms_sum.iou / batch_n;
            rec.terms.obj = terms_sum.obj / batch_n;
            rec.terms.cls = terms_sum.cls / batch_n;
            rec.terms.smooth = terms_sum.smooth / batch_n;
            rec.total = total_sum / batch_n;
            rec.grad_norm = std::sqrt(grad_sq);
            if (step_log) step_log << step_to_json(rec).dump() << "\n";
            result.steps.push_back(rec);
        }

        if (!config.checkpoint_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof name, "texture-epoch-%03d.ppm",
                          epoch + 1);
            TextureMeta meta;
            meta.seed = config.seed;
            meta.init_mode = config.init_mode;
            meta.step_count = step_count;
            save_texture_checkpoint(config.checkpoint_dir + "/" + name,
                                    texture, meta);
        }
    }
    return result;
}

}  // namespace

AttackResult optimize_texture(const Mesh& mesh, const TextureAtlas& init,
                              const SceneSet& scenes,
                              const DetectorAdapter& detector,
                              const AttackConfig& config) {
    return run_optimization(mesh, init, scenes, detector, config,
                            config.max_epochs);
}

SceneSet mine_hard_examples(const Mesh& mesh, const SceneSet& scenes,
                            const TextureAtlas& texture,
                            const DetectorAdapter& detector,
                            const AttackConfig& config) {
    EvalConfig ecfg;
    ecfg.score_threshold = config.score_threshold;
    ecfg.nms_iou_threshold = config.nms_iou_threshold;
    ecfg.target_class = config.target_class;

    SceneSet hard;
    hard.manifest_path = scenes.manifest_path;
    hard.split = scenes.split;
    for (const Scene& scene : scenes.scenes) {
        if (!evaluate_scene(mesh, scene, texture, detector, ecfg).correct)
            continue;
        // The mined set is typically saved away from the source manifest,
        // so pin the background path down before the base_dir is lost.
        Scene pinned = scene;
        pinned.image_path = scene.resolved_image_path();
        pinned.base_dir.clear();
        hard.scenes.push_back(pinned);
    }
    return hard;
}

AttackResult finetune_on_hard(const Mesh& mesh, const TextureAtlas& texture,
                              const SceneSet& hard,
                              const DetectorAdapter& detector,
                              const AttackConfig& config, int epochs) {
    if (hard.empty())
        throw ArgumentError("finetune_on_hard: hard-example set is empty");
    if (epochs < 0)
        throw ArgumentError("finetune_on_hard: epochs must be >= 0");
    if (epochs == 0) return AttackResult{texture, {}};
    return run_optimization(mesh, texture, hard, detector, config, epochs);
}

}  // namespace fca
