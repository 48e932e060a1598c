// The camouflage optimization loop: freeze mask, step records, determinism,
// mining and fine-tuning. Uses small 32x32 scenes and an untrained toy
// detector; the machinery under test does not care about detector quality.
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "fca/attack.hpp"
#include "fca/errors.hpp"
#include "fca/eval.hpp"
#include "fca/mesh.hpp"
#include "fca/scene_gen.hpp"
#include "fca/texture_atlas.hpp"
#include "fca/toy_detector.hpp"

using namespace fca;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "fca-test-attack";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

const Mesh& car() {
    static const Mesh mesh = make_reference_car();
    return mesh;
}

// Shared 32x32 scene set so each test does not regenerate backgrounds.
const SceneSet& scenes() {
    static const SceneSet set = [] {
        SceneGenParams params;
        params.count = 5;
        params.image_h = 32;
        params.image_w = 32;
        params.seed = 11;
        params.ranges.distance_lo = 4.0;
        params.ranges.distance_hi = 7.0;
        return generate_sceneset(car(), params, (test_dir() / "scenes").string());
    }();
    return set;
}

const ToyDetector& detector() {
    static const ToyDetector det(32, 1234);
    return det;
}

TextureAtlas masked_texture(InitMode mode, uint64_t seed) {
    TextureAtlas t = init_texture(mode, 16, 16, seed);
    t.paintable = uv_footprint(car(), 16, 16);
    return t;
}

// Adapter that advertises no input gradients; everything else is irrelevant
// because the attack must bail out before using it.
class NoGradDetector : public DetectorAdapter {
  public:
    const std::vector<std::string>& class_names() const override {
        return kToyClasses;
    }
    int input_size() const override { return 32; }
    RawPrediction predict_raw(const Image&) const override { return {}; }
    bool supports_input_gradient() const override { return false; }
    std::unique_ptr<TracedForward> predict_traced(const Image&) const override {
        throw CapabilityError("no gradients here");
    }
};

}  // namespace

TEST_CASE("a zero learning rate leaves the texture bitwise untouched") {
    const TextureAtlas init = masked_texture(InitMode::Random, 42);
    AttackConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.max_epochs = 1;
    cfg.batch_size = 2;

    const AttackResult res = optimize_texture(car(), init, scenes(), detector(), cfg);
    CHECK(res.texture.texels == init.texels);
    CHECK(res.texture.paintable == init.paintable);
    // ceil(5 scenes / batch 2) = 3 step records.
    CHECK(res.steps.size() == 3u);
}

TEST_CASE("smooth-only loss is stationary at a zero texture") {
    const TextureAtlas init = masked_texture(InitMode::Zero, 0);
    AttackConfig cfg;
    cfg.flags = LossFlags{false, false, false, true};
    cfg.max_epochs = 2;

    const AttackResult res = optimize_texture(car(), init, scenes(), detector(), cfg);
    CHECK(res.texture.texels == init.texels);
    for (const StepRecord& rec : res.steps) {
        CHECK(rec.terms.smooth == 0.0);
        CHECK(rec.total == 0.0);
        CHECK(rec.grad_norm == 0.0);
        CHECK(rec.terms.obj == 0.0);  // disabled terms stay exact zeros
    }
}

TEST_CASE("optimization moves paintable texels only, and keeps them in range") {
    const TextureAtlas init = masked_texture(InitMode::Random, 7);
    size_t frozen = 0, painted = 0;
    for (uint8_t p : init.paintable) (p ? painted : frozen)++;
    REQUIRE(frozen > 0u);
    REQUIRE(painted > 0u);

    AttackConfig cfg;
    cfg.max_epochs = 1;
    const AttackResult res = optimize_texture(car(), init, scenes(), detector(), cfg);

    bool any_changed = false;
    for (size_t t = 0; t < init.texel_count(); ++t)
        for (int c = 0; c < 3; ++c) {
            const double before = init.texels[3 * t + c];
            const double after = res.texture.texels[3 * t + c];
            if (!init.paintable[t]) {
                CHECK(after == before);
            } else {
                CHECK(after >= 0.0);
                CHECK(after <= 1.0);
                if (after != before) any_changed = true;
            }
        }
    CHECK(any_changed);
}

TEST_CASE("step records satisfy the weighted-sum identity") {
    const TextureAtlas init = masked_texture(InitMode::Random, 19);

    SUBCASE("all terms enabled") {
        AttackConfig cfg;
        cfg.max_epochs = 1;
        cfg.weights.alpha = 0.05;
        cfg.weights.beta = 1.0;
        cfg.weights.gamma = 0.5;
        cfg.weights.mu = 1.0;
        const AttackResult res =
            optimize_texture(car(), init, scenes(), detector(), cfg);
        REQUIRE_FALSE(res.steps.empty());
        for (const StepRecord& rec : res.steps) {
            const double recon = cfg.weights.alpha * rec.terms.iou +
                                 cfg.weights.beta * rec.terms.obj +
                                 cfg.weights.gamma * rec.terms.cls +
                                 cfg.weights.mu * rec.terms.smooth;
            CHECK(std::abs(rec.total - recon) <= 1e-6);
            CHECK(rec.terms.smooth > 0.0);  // random texture is not flat
        }
    }

    SUBCASE("objectness only") {
        AttackConfig cfg;
        cfg.max_epochs = 1;
        cfg.flags = LossFlags{false, true, false, false};
        const AttackResult res =
            optimize_texture(car(), init, scenes(), detector(), cfg);
        REQUIRE_FALSE(res.steps.empty());
        for (const StepRecord& rec : res.steps) {
            CHECK(rec.terms.iou == 0.0);
            CHECK(rec.terms.cls == 0.0);
            CHECK(rec.terms.smooth == 0.0);
            CHECK(std::abs(rec.total - cfg.weights.beta * rec.terms.obj) <= 1e-6);
        }
    }
}

TEST_CASE("the optimization is deterministic given the seed") {
    const TextureAtlas init = masked_texture(InitMode::Random, 23);
    AttackConfig cfg;
    cfg.max_epochs = 2;
    cfg.batch_size = 3;
    cfg.seed = 99;

    const AttackResult a = optimize_texture(car(), init, scenes(), detector(), cfg);
    const AttackResult b = optimize_texture(car(), init, scenes(), detector(), cfg);
    CHECK(a.texture.texels == b.texture.texels);
    REQUIRE(a.steps.size() == b.steps.size());
    for (size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].epoch == b.steps[i].epoch);
        CHECK(a.steps[i].batch_index == b.steps[i].batch_index);
        CHECK(a.steps[i].total == b.steps[i].total);
        CHECK(a.steps[i].grad_norm == b.steps[i].grad_norm);
        CHECK(a.steps[i].terms.obj == b.steps[i].terms.obj);
    }

    // A different seed shuffles differently and lands elsewhere.
    cfg.seed = 100;
    const AttackResult c = optimize_texture(car(), init, scenes(), detector(), cfg);
    CHECK(c.texture.texels != a.texture.texels);
}

TEST_CASE("step logs and epoch checkpoints are written when asked") {
    const TextureAtlas init = masked_texture(InitMode::Random, 31);
    AttackConfig cfg;
    cfg.max_epochs = 2;
    cfg.batch_size = 4;
    cfg.seed = 5;
    cfg.init_mode = InitMode::Random;
    cfg.step_log_path = (test_dir() / "steps.jsonl").string();
    const fs::path ckpt_dir = test_dir() / "ckpts";
    fs::create_directories(ckpt_dir);
    cfg.checkpoint_dir = ckpt_dir.string();

    const AttackResult res = optimize_texture(car(), init, scenes(), detector(), cfg);

    std::ifstream log(cfg.step_log_path);
    REQUIRE(log.good());
    std::string line;
    size_t lines = 0;
    while (std::getline(log, line)) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        CHECK(j.contains("epoch"));
        CHECK(j.contains("loss_total"));
        CHECK(j.contains("grad_norm"));
        if (lines == 0) CHECK(j.at("epoch").get<int>() == 0);
        ++lines;
    }
    CHECK(lines == res.steps.size());

    // Per-epoch checkpoints: 16-bit quantized copies of the evolving texture.
    CHECK(fs::exists(ckpt_dir / "texture-epoch-001.ppm"));
    TextureMeta meta;
    const TextureAtlas back =
        load_texture_checkpoint((ckpt_dir / "texture-epoch-002.ppm").string(), &meta);
    CHECK(meta.seed == cfg.seed);
    CHECK(meta.init_mode == InitMode::Random);
    CHECK(meta.step_count == static_cast<int64_t>(res.steps.size()));
    REQUIRE(back.texels.size() == res.texture.texels.size());
    for (size_t i = 0; i < back.texels.size(); ++i)
        CHECK(std::abs(back.texels[i] - res.texture.texels[i]) <= 1.0 / 65535.0);
}

TEST_CASE("mining returns exactly the still-detected scenes, with pinned paths") {
    const TextureAtlas tex = masked_texture(InitMode::Random, 3);
    AttackConfig cfg;

    EvalConfig ecfg;
    ecfg.score_threshold = cfg.score_threshold;
    ecfg.nms_iou_threshold = cfg.nms_iou_threshold;
    ecfg.target_class = cfg.target_class;

    std::vector<const Scene*> expected;
    for (const Scene& s : scenes().scenes)
        if (evaluate_scene(car(), s, tex, detector(), ecfg).correct)
            expected.push_back(&s);

    const SceneSet hard = mine_hard_examples(car(), scenes(), tex, detector(), cfg);
    REQUIRE(hard.size() == expected.size());
    for (size_t i = 0; i < hard.size(); ++i) {
        CHECK(hard.scenes[i].pose.azimuth_deg == expected[i]->pose.azimuth_deg);
        CHECK(hard.scenes[i].pose.distance == expected[i]->pose.distance);
        // Background paths survive without the original manifest directory.
        CHECK(hard.scenes[i].base_dir.empty());
        CHECK(hard.scenes[i].image_path == expected[i]->resolved_image_path());
        CHECK(fs::path(hard.scenes[i].image_path).is_absolute());
    }
}

TEST_CASE("fine-tuning handles the edge cases and continues otherwise") {
    const TextureAtlas tex = masked_texture(InitMode::Random, 77);
    AttackConfig cfg;
    cfg.max_epochs = 1;

    SceneSet empty;
    CHECK_THROWS_AS(finetune_on_hard(car(), tex, empty, detector(), cfg, 1),
                    ArgumentError);
    CHECK_THROWS_AS(finetune_on_hard(car(), tex, scenes(), detector(), cfg, -1),
                    ArgumentError);

    const AttackResult noop = finetune_on_hard(car(), tex, scenes(), detector(), cfg, 0);
    CHECK(noop.texture.texels == tex.texels);
    CHECK(noop.steps.empty());

    const AttackResult tuned = finetune_on_hard(car(), tex, scenes(), detector(), cfg, 2);
    CHECK(tuned.steps.size() == 2u * ((scenes().size() + 7) / 8));
    bool changed = false;
    for (size_t i = 0; i < tex.texels.size(); ++i)
        if (tuned.texture.texels[i] != tex.texels[i]) changed = true;
    CHECK(changed);
}

TEST_CASE("detectors without input gradients are rejected up front") {
    const TextureAtlas tex = masked_texture(InitMode::Random, 1);
    const NoGradDetector stub;
    AttackConfig cfg;
    CHECK_THROWS_AS(optimize_texture(car(), tex, scenes(), stub, cfg),
                    CapabilityError);
}

TEST_CASE("an empty scene set is rejected") {
    const TextureAtlas tex = masked_texture(InitMode::Random, 1);
    AttackConfig cfg;
    SceneSet empty;
    CHECK_THROWS_AS(optimize_texture(car(), tex, empty, detector(), cfg),
                    ArgumentError);
}

TEST_CASE("config validation rejects out-of-range values") {
    AttackConfig ok;
    CHECK_NOTHROW(ok.validate());

    AttackConfig bad = ok;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.learning_rate = -0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    bad = ok;
    bad.max_epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.weights.alpha = -0.05;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.flags = LossFlags{false, false, false, false};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.score_threshold = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ok;
    bad.nms_iou_threshold = -0.2;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
