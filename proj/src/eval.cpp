#include "fca/eval.hpp"

#include "fca/errors.hpp"
#include "fca/renderer.hpp"

namespace fca {

SceneOutcome classify_detections(const std::vector<Detection>& kept,
                                 const Box& gt, int target_class,
                                 double score_threshold, double iou_threshold) {
    SceneOutcome out;
    out.num_detections = static_cast<int>(kept.size());
    bool first = true;
    for (const Detection& d : kept) {
        const double overlap = iou(d.box, gt);
        if (first || overlap > out.best_iou) {
            out.best_iou = overlap;
            out.best_class = d.class_argmax();
            out.best_score = d.score();
            first = false;
        }
        if (d.class_argmax() == target_class && overlap >= iou_threshold &&
            d.score() >= score_threshold)
            out.correct = true;
    }
    return out;
}

SceneOutcome evaluate_scene(const Mesh& mesh, const Scene& scene,
                            const TextureAtlas& texture,
                            const DetectorAdapter& detector,
                            const EvalConfig& cfg) {
    if (scene.pose.image_h != detector.input_size() ||
        scene.pose.image_w != detector.input_size())
        throw ArgumentError(
            "evaluate_scene: scene image size " +
            std::to_string(scene.pose.image_w) + "x" +
            std::to_string(scene.pose.image_h) +
            " does not match detector input size " +
            std::to_string(detector.input_size()));

    const RenderOutput render = rasterize(mesh, scene.pose, texture);
    CompositeResult comp;
    if (scene.image_path.empty()) {
        Image background(scene.pose.image_h, scene.pose.image_w, 3,
                         kEvalBackgroundGray);
        comp = composite_onto(render, background, scene);
    } else {
        comp = composite(render, scene);
    }

    const RawPrediction raw = detector.predict_raw(comp.image);
    const std::vector<Detection> kept =
        nms(decode_all(raw, comp.image.height, comp.image.width),
            cfg.nms_iou_threshold, cfg.score_threshold);
    return classify_detections(kept, scene.gt_box,
                               class_index_of(detector, cfg.target_class),
                               cfg.score_threshold, cfg.iou_threshold);
}

double p_at_05(const Mesh& mesh, const std::vector<Scene>& scenes,
               const TextureAtlas& texture, const DetectorAdapter& detector,
               const EvalConfig& cfg) {
    if (scenes.empty())
        throw ArgumentError("p_at_05: empty scene set");
    int correct = 0;
    for (const Scene& scene : scenes)
        if (evaluate_scene(mesh, scene, texture, detector, cfg).correct)
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(scenes.size());
}

double asr(const Mesh& mesh, const std::vector<Scene>& scenes,
           const TextureAtlas& plain, const TextureAtlas& adv,
           const DetectorAdapter& detector, const EvalConfig& cfg) {
    int before = 0;
    int successes = 0;
    for (const Scene& scene : scenes) {
        if (!evaluate_scene(mesh, scene, plain, detector, cfg).correct)
            continue;
        ++before;
        if (!evaluate_scene(mesh, scene, adv, detector, cfg).correct)
            ++successes;
    }
    if (before == 0)
        throw EvalError("asr: no scene is detected with the plain texture "
                        "(empty before-set)");
    return static_cast<double>(successes) / static_cast<double>(before);
}

}  // namespace fca
