#include "fca/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fca/adam.hpp"
#include "fca/decode.hpp"
#include "fca/errors.hpp"
#include "fca/eval.hpp"
#include "fca/renderer.hpp"
#include "fca/rng.hpp"

namespace fca {
namespace {

double prior_iou(double bw, double bh, double aw, double ah) {
    const double inter = std::min(bw, aw) * std::min(bh, ah);
    return inter / (bw * bh + aw * ah - inter);
}

struct ScaleTarget {
    int cell_x = 0, cell_y = 0, anchor = 0;
    double tgx = 0, tgy = 0, tgw = 0, tgh = 0;
    std::vector<uint8_t> ignore;  // per anchor at the gt cell
};

struct SceneTargets {
    std::vector<ScaleTarget> scales;
};

SceneTargets make_targets(const Box& gt, const ToyDetector& det,
                          double ignore_prior_iou) {
    SceneTargets targets;
    const double cx = (gt.x_min + gt.x_max) / 2.0;
    const double cy = (gt.y_min + gt.y_max) / 2.0;
    const double bw = std::max(gt.width(), 1e-3);
    const double bh = std::max(gt.height(), 1e-3);
    for (int s = 0; s < det.num_scales(); ++s) {
        const auto& anchors = det.anchors(s);
        const int stride = kToyStrides[s];
        const int grid = det.input_size() / stride;
        ScaleTarget t;
        t.cell_x = std::clamp(static_cast<int>(cx / stride), 0, grid - 1);
        t.cell_y = std::clamp(static_cast<int>(cy / stride), 0, grid - 1);
        int best = 0;
        double best_iou = -1.0;
        t.ignore.assign(anchors.size(), 0);
        for (size_t a = 0; a < anchors.size(); ++a) {
            const double pi = prior_iou(bw, bh, anchors[a][0], anchors[a][1]);
            if (pi > best_iou) {
                best_iou = pi;
                best = static_cast<int>(a);
            }
            if (pi >= ignore_prior_iou) t.ignore[a] = 1;
        }
        t.anchor = best;
        t.tgx = std::clamp(cx / stride - t.cell_x, 1e-6, 1.0 - 1e-6);
        t.tgy = std::clamp(cy / stride - t.cell_y, 1e-6, 1.0 - 1e-6);
        t.tgw = std::log(bw / anchors[best][0]);
        t.tgh = std::log(bh / anchors[best][1]);
        targets.scales.push_back(std::move(t));
    }
    return targets;
}

// d/dlogit of BCE-with-logits is sigmoid(logit) - target.
double bce_with_logits(double logit, double target) {
    return std::max(logit, 0.0) - logit * target +
           std::log1p(std::exp(-std::abs(logit)));
}

// Accumulates the per-image loss gradient into draw; returns the loss.
double image_loss_grad(const RawPrediction& raw, const SceneTargets& targets,
                       int target_class, const TrainConfig& cfg,
                       RawGrad& draw) {
    double loss = 0.0;
    for (size_t s = 0; s < raw.scales.size(); ++s) {
        const ScalePrediction& sp = raw.scales[s];
        const ScaleTarget& t = targets.scales[s];
        const int nc = sp.num_classes;
        Tensor3& dmap = draw.scales[s];
        for (int y = 0; y < sp.grid_h(); ++y) {
            for (int x = 0; x < sp.grid_w(); ++x) {
                for (int a = 0; a < sp.num_anchors; ++a) {
                    const bool positive =
                        y == t.cell_y && x == t.cell_x && a == t.anchor;
                    const bool ignored = !positive && y == t.cell_y &&
                                         x == t.cell_x && t.ignore[a];
                    const double o = sp.field(a, kFieldObj, y, x);
                    auto d = [&](int f) -> double& {
                        return dmap.at(a * (5 + nc) + f, y, x);
                    };
                    if (positive) {
                        loss += cfg.lambda_obj * bce_with_logits(o, 1.0);
                        d(kFieldObj) += cfg.lambda_obj * (sigmoid(o) - 1.0);

                        const double tx = sp.field(a, kFieldTx, y, x);
                        const double ty = sp.field(a, kFieldTy, y, x);
                        const double tw = sp.field(a, kFieldTw, y, x);
                        const double th = sp.field(a, kFieldTh, y, x);
                        const double sx = sigmoid(tx), sy = sigmoid(ty);
                        loss += cfg.lambda_box *
                                ((sx - t.tgx) * (sx - t.tgx) +
                                 (sy - t.tgy) * (sy - t.tgy) +
                                 (tw - t.tgw) * (tw - t.tgw) +
                                 (th - t.tgh) * (th - t.tgh));
                        d(kFieldTx) += cfg.lambda_box * 2.0 * (sx - t.tgx) *
                                       sx * (1.0 - sx);
                        d(kFieldTy) += cfg.lambda_box * 2.0 * (sy - t.tgy) *
                                       sy * (1.0 - sy);
                        d(kFieldTw) += cfg.lambda_box * 2.0 * (tw - t.tgw);
                        d(kFieldTh) += cfg.lambda_box * 2.0 * (th - t.tgh);

                        for (int c = 0; c < nc; ++c) {
                            const double lc = sp.field(a, kFieldCls0 + c, y, x);
                            const double tc = c == target_class ? 1.0 : 0.0;
                            loss += cfg.lambda_cls * bce_with_logits(lc, tc);
                            d(kFieldCls0 + c) +=
                                cfg.lambda_cls * (sigmoid(lc) - tc);
                        }
                    } else if (!ignored) {
                        loss += cfg.lambda_noobj * bce_with_logits(o, 0.0);
                        d(kFieldObj) += cfg.lambda_noobj * sigmoid(o);
                    }
                }
            }
        }
    }
    return loss;
}

// Same block order as ToyDetector::param_blocks(): per stage weight then
// bias, then per head weight then bias.
void flatten_grads(const ToyParamGrads& grads, std::vector<double>& flat) {
    flat.clear();
    for (size_t i = 0; i < grads.stage_w.size(); ++i) {
        flat.insert(flat.end(), grads.stage_w[i].begin(), grads.stage_w[i].end());
        flat.insert(flat.end(), grads.stage_b[i].begin(), grads.stage_b[i].end());
    }
    for (size_t i = 0; i < grads.head_w.size(); ++i) {
        flat.insert(flat.end(), grads.head_w[i].begin(), grads.head_w[i].end());
        flat.insert(flat.end(), grads.head_b[i].begin(), grads.head_b[i].end());
    }
}

}  // namespace

TrainResult train_toy_detector(const Mesh& mesh, const TextureAtlas& plain,
                               const SceneSet& train_set,
                               const SceneSet& heldout_set,
                               const TrainConfig& config) {
    if (train_set.empty() || heldout_set.empty())
        throw ArgumentError("train_toy_detector: empty scene split");
    const int input_size = train_set.scenes.front().pose.image_h;
    for (const SceneSet* set : {&train_set, &heldout_set})
        for (const Scene& s : set->scenes)
            if (s.pose.image_h != input_size || s.pose.image_w != input_size)
                throw ArgumentError(
                    "train_toy_detector: scenes must share one square "
                    "image size");

    TrainResult result{ToyDetector(input_size, config.seed), {}, 0, 0.0};
    ToyDetector& det = result.detector;
    const int target_class = class_index_of(det, "car");

    // The plain texture never changes, so composite every scene once.
    auto prepare = [&](const SceneSet& set, std::vector<Image>& images,
                       std::vector<SceneTargets>* targets) {
        images.reserve(set.size());
        for (const Scene& scene : set.scenes) {
            const RenderOutput render = rasterize(mesh, scene.pose, plain);
            images.push_back(composite(render, scene).image);
            if (targets)
                targets->push_back(
                    make_targets(scene.gt_box, det, config.ignore_prior_iou));
        }
    };
    std::vector<Image> train_images, heldout_images;
    std::vector<SceneTargets> train_targets;
    prepare(train_set, train_images, &train_targets);
    prepare(heldout_set, heldout_images, nullptr);

    auto heldout_p05 = [&]() {
        int correct = 0;
        for (size_t i = 0; i < heldout_images.size(); ++i) {
            const RawPrediction raw = det.predict_raw(heldout_images[i]);
            const std::vector<Detection> kept =
                nms(decode_all(raw, input_size, input_size),
                    config.nms_iou_threshold, config.score_threshold);
            if (classify_detections(kept, heldout_set.scenes[i].gt_box,
                                    target_class, config.score_threshold, 0.5)
                    .correct)
                ++correct;
        }
        return static_cast<double>(correct) /
               static_cast<double>(heldout_images.size());
    };

    // One Adam over all parameters, flattened in param_blocks() order.
    std::vector<double*> blocks = det.param_blocks();
    std::vector<size_t> block_sizes = det.param_block_sizes();
    size_t n_params = 0;
    for (size_t n : block_sizes) n_params += n;
    Adam adam(n_params, config.learning_rate);
    std::vector<double> flat_params(n_params), flat_grads;
    auto gather_params = [&]() {
        size_t off = 0;
        for (size_t b = 0; b < blocks.size(); ++b) {
            std::copy(blocks[b], blocks[b] + block_sizes[b],
                      flat_params.begin() + off);
            off += block_sizes[b];
        }
    };
    auto scatter_params = [&]() {
        size_t off = 0;
        for (size_t b = 0; b < blocks.size(); ++b) {
            std::copy(flat_params.begin() + off,
                      flat_params.begin() + off + block_sizes[b], blocks[b]);
            off += block_sizes[b];
        }
    };

    Rng root(config.seed);
    std::vector<size_t> order(train_images.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_p05 = 0.0;
    int best_epoch = -1;
    ToyTape tape;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        Rng epoch_rng = root.child(static_cast<uint64_t>(epoch) + 1);
        epoch_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (size_t start = 0; start < order.size();
             start += static_cast<size_t>(config.batch_size)) {
            const size_t end = std::min(
                order.size(), start + static_cast<size_t>(config.batch_size));
            ToyParamGrads grads = det.zero_grads();
            for (size_t bi = start; bi < end; ++bi) {
                const size_t idx = order[bi];
                const RawPrediction raw = det.forward(train_images[idx], tape);
                RawGrad draw = RawGrad::zeros_like(raw);
                epoch_loss += image_loss_grad(raw, train_targets[idx],
                                              target_class, config, draw);
                det.backward(tape, draw, &grads, nullptr);
            }
            grads.scale(1.0 / static_cast<double>(end - start));
            flatten_grads(grads, flat_grads);
            gather_params();
            adam.step(flat_params.data(), flat_grads.data(), n_params);
            scatter_params();
        }

        const double p05 = heldout_p05();
        result.heldout_history.push_back(p05);
        result.epochs_run = epoch + 1;
        result.final_p_at_05 = p05;
        if (config.verbose)
            std::printf("epoch %d: train loss %.4f, held-out P@0.5 %.4f\n",
                        epoch + 1, epoch_loss / train_images.size(), p05);
        if (p05 > best_p05) {
            best_p05 = p05;
            best_epoch = epoch + 1;
        }
        if (p05 >= config.target_p_at_05) return result;
    }

    std::ostringstream msg;
    msg << "toy detector failed to reach P@0.5 >= " << config.target_p_at_05
        << " within " << config.max_epochs << " epochs (best " << best_p05
        << " at epoch " << best_epoch << ", final " << result.final_p_at_05
        << ", " << train_images.size() << " train / " << heldout_images.size()
        << " held-out scenes)";
    throw TrainingError(msg.str());
}

}  // namespace fca
