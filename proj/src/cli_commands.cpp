#include "fca/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fca/attack.hpp"
#include "fca/errors.hpp"
#include "fca/eval.hpp"
#include "fca/image_io.hpp"
#include "fca/mesh.hpp"
#include "fca/protocols.hpp"
#include "fca/renderer.hpp"
#include "fca/scene_gen.hpp"
#include "fca/train.hpp"

namespace fs = std::filesystem;

namespace fca {
namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

std::string iso8601_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Timestamps live here, not in config-echo, so reruns stay byte-identical.
struct RunMeta {
    std::string command;
    std::string started_at = iso8601_now();
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void write(const fs::path& dir) const {
        nlohmann::json j;
        j["command"] = command;
        j["started_at"] = started_at;
        j["finished_at"] = iso8601_now();
        j["duration_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        std::ofstream out(dir / "run-meta.json");
        out << j.dump(2) << "\n";
    }
};

void write_config_echo(const CLI::App& app, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream out(dir / "config-echo");
    if (!out) throw IoError("cannot write config echo in " + dir.string());
    out << app.config_to_str(true, false);
}

Mesh load_mesh_flag(const std::string& path) {
    if (path == "builtin:car") return make_reference_car();
    try {
        return load_mesh(path);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("--mesh: ") + e.what());
    }
}

TextureAtlas load_texture_flag(const std::string& flag,
                               const std::string& path) {
    try {
        return load_texture_checkpoint(path);
    } catch (const std::exception& e) {
        throw ConfigError(flag + ": " + e.what());
    }
}

SceneSet load_manifest_flag(const std::string& flag, const std::string& path) {
    try {
        return load_manifest(path);
    } catch (const std::exception& e) {
        throw ConfigError(flag + ": " + e.what());
    }
}

void envify(CLI::Option* opt, const std::string& name) {
    opt->envname("FCA_" + name);
}

std::vector<double> parse_csv_doubles(const std::string& flag,
                                      const std::string& csv) {
    std::vector<double> values;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            size_t pos = 0;
            values.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(flag + ": cannot parse '" + item +
                              "' as a number");
        }
    }
    if (values.empty()) throw ConfigError(flag + ": empty list");
    return values;
}

LossFlags parse_loss_terms(const std::string& csv) {
    LossFlags flags{false, false, false, false};
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "iou")
            flags.iou = true;
        else if (item == "obj")
            flags.obj = true;
        else if (item == "cls")
            flags.cls = true;
        else if (item == "smooth")
            flags.smooth = true;
        else if (item == "all")
            flags = LossFlags{};
        else if (!item.empty())
            throw ConfigError("--loss-terms: unknown term '" + item +
                              "' (expected iou, obj, cls, smooth, all)");
    }
    if (!flags.any())
        throw ConfigError("--loss-terms: at least one term is required");
    return flags;
}

// ---------------------------------------------------------------------------
// gen-scenes

struct GenScenesArgs {
    std::string out = "out";
    std::string mesh = "builtin:car";
    int count = 500;
    uint64_t seed = 0;
    std::string split = "train";
    int image_size = 96;
    double fov = 45.0;
    double distance_min = 3.0, distance_max = 10.0;
    double elevation_min = 0.0, elevation_max = 50.0;
    double azimuth_min = 0.0, azimuth_max = 360.0;
    std::string backgrounds;
};

int run_gen_scenes(const CLI::App& app, const GenScenesArgs& args) {
    RunMeta meta{"gen-scenes"};
    const Mesh mesh = load_mesh_flag(args.mesh);

    SceneGenParams params;
    params.count = args.count;
    params.seed = args.seed;
    params.split = args.split;
    params.image_h = params.image_w = args.image_size;
    params.fov_deg = args.fov;
    params.ranges.distance_lo = args.distance_min;
    params.ranges.distance_hi = args.distance_max;
    params.ranges.elevation_lo = args.elevation_min;
    params.ranges.elevation_hi = args.elevation_max;
    params.ranges.azimuth_lo = args.azimuth_min;
    params.ranges.azimuth_hi = args.azimuth_max;
    params.backgrounds_dir = args.backgrounds;

    const fs::path dir = fs::path(args.out) / "scenes";
    fs::create_directories(dir);
    const SceneSet set = generate_sceneset(mesh, params, dir.string());
    write_config_echo(app, dir);
    meta.write(dir);
    std::cout << "wrote " << set.size() << " scenes to " << set.manifest_path
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train-detector

struct TrainArgs {
    std::string out = "out";
    std::string mesh = "builtin:car";
    std::string train_manifest;    // defaults derived from --out
    std::string heldout_manifest;
    int epochs = 60;
    int batch_size = 8;
    double lr = 1e-3;
    uint64_t seed = 1;
    double target_p05 = 0.90;
    int texture_size = 256;
    bool verbose = false;
};

int run_train_detector(const CLI::App& app, TrainArgs args) {
    RunMeta meta{"train-detector"};
    if (args.train_manifest.empty())
        args.train_manifest = args.out + "/scenes/manifest-train.jsonl";
    if (args.heldout_manifest.empty())
        args.heldout_manifest = args.out + "/scenes/manifest-heldout.jsonl";

    const Mesh mesh = load_mesh_flag(args.mesh);
    const SceneSet train_set =
        load_manifest_flag("--train-manifest", args.train_manifest);
    const SceneSet heldout_set =
        load_manifest_flag("--heldout-manifest", args.heldout_manifest);
    const TextureAtlas plain =
        make_base_texture(mesh, args.texture_size, args.texture_size);

    TrainConfig config;
    config.max_epochs = args.epochs;
    config.batch_size = args.batch_size;
    config.learning_rate = args.lr;
    config.seed = args.seed;
    config.target_p_at_05 = args.target_p05;
    config.verbose = args.verbose;

    const TrainResult result =
        train_toy_detector(mesh, plain, train_set, heldout_set, config);

    const fs::path dir = fs::path(args.out) / "detector";
    fs::create_directories(dir);
    result.detector.save_checkpoint((dir / "toy.ckpt").string());
    {
        nlohmann::json j;
        j["epochs_run"] = result.epochs_run;
        j["final_p_at_05"] = result.final_p_at_05;
        j["heldout_history"] = result.heldout_history;
        std::ofstream out(dir / "training.json");
        out << j.dump(2) << "\n";
    }
    write_config_echo(app, dir);
    meta.write(dir);
    std::cout << "held-out P@0.5 " << result.final_p_at_05 << " after "
              << result.epochs_run << " epochs; checkpoint "
              << (dir / "toy.ckpt").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// attack

struct AttackArgs {
    std::string out = "out";
    std::string mesh = "builtin:car";
    std::string train_manifest;
    std::string detector_name = "toy";
    std::string detector_checkpoint;
    std::string init = "random";
    int texture_size = 256;
    uint64_t seed = 0;
    double lr = 0.01;
    int epochs = 5;
    int batch_size = 8;
    double alpha = 0.05, beta = 1.0, gamma = 0.5, mu = 1.0;
    std::string loss_terms = "all";
    std::string target_class = "car";
    double score_threshold = 0.25;
    double nms_iou = 0.5;
    bool finetune = false;
    int finetune_epochs = 1;
};

int run_attack(const CLI::App& app, AttackArgs args) {
    RunMeta meta{"attack"};
    if (args.train_manifest.empty())
        args.train_manifest = args.out + "/scenes/manifest-train.jsonl";
    if (args.detector_checkpoint.empty())
        args.detector_checkpoint = args.out + "/detector/toy.ckpt";

    const Mesh mesh = load_mesh_flag(args.mesh);
    const SceneSet scenes =
        load_manifest_flag("--train-manifest", args.train_manifest);
    const auto detector =
        make_detector(args.detector_name, args.detector_checkpoint);

    const fs::path dir = fs::path(args.out) / "textures";
    fs::create_directories(dir);

    AttackConfig config;
    config.weights = LossWeights{args.alpha, args.beta, args.gamma, args.mu};
    config.flags = parse_loss_terms(args.loss_terms);
    config.learning_rate = args.lr;
    config.max_epochs = args.epochs;
    config.batch_size = args.batch_size;
    config.seed = args.seed;
    config.init_mode = init_mode_from_string(args.init);
    config.target_class = args.target_class;
    config.score_threshold = args.score_threshold;
    config.nms_iou_threshold = args.nms_iou;
    config.step_log_path = (dir / "steps.jsonl").string();
    config.checkpoint_dir = dir.string();
    config.validate();

    const TextureAtlas base =
        make_base_texture(mesh, args.texture_size, args.texture_size);
    TextureAtlas init = init_texture(config.init_mode, args.texture_size,
                                     args.texture_size, config.seed, &base);
    init.paintable = uv_footprint(mesh, args.texture_size, args.texture_size);

    const AttackResult result =
        optimize_texture(mesh, init, scenes, *detector, config);
    TextureMeta tmeta;
    tmeta.seed = config.seed;
    tmeta.init_mode = config.init_mode;
    tmeta.step_count = static_cast<int64_t>(result.steps.size());
    save_texture_checkpoint((dir / "adv-texture.ppm").string(), result.texture,
                            tmeta);
    std::cout << "attack finished: " << result.steps.size()
              << " optimizer steps; texture "
              << (dir / "adv-texture.ppm").string() << "\n";

    if (args.finetune) {
        const SceneSet hard =
            mine_hard_examples(mesh, scenes, result.texture, *detector, config);
        save_manifest(hard, (dir / "hard-examples.jsonl").string());
        std::cout << "mined " << hard.size() << " hard examples\n";
        if (!hard.empty() && args.finetune_epochs > 0) {
            AttackConfig ft = config;
            ft.step_log_path = (dir / "steps-finetune.jsonl").string();
            ft.checkpoint_dir.clear();
            const AttackResult tuned = finetune_on_hard(
                mesh, result.texture, hard, *detector, ft, args.finetune_epochs);
            tmeta.step_count += static_cast<int64_t>(tuned.steps.size());
            save_texture_checkpoint((dir / "adv-texture-finetuned.ppm").string(),
                                    tuned.texture, tmeta);
            std::cout << "fine-tuned texture "
                      << (dir / "adv-texture-finetuned.ppm").string() << "\n";
        }
    }

    write_config_echo(app, dir);
    meta.write(dir);
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string out = "out";
    std::string mesh = "builtin:car";
    std::string manifest;
    std::string detector_name = "toy";
    std::string detector_checkpoint;
    std::string texture;
    std::string plain_texture;  // empty = built-in base
    int texture_size = 256;
    std::string target_class = "car";
    double score_threshold = 0.25;
    double nms_iou = 0.5;
    bool metrics = false;
    bool grid = false;
    bool occlusion = false;
    std::string grid_distances = "1.5,3,5,10,15,20";
    std::string grid_elevations = "0,10,20,30,40,50";
    double azimuth_step = 3.0;
    std::string occ_distances = "1.5,3,5,10";
    int image_size = 96;
    double fov = 45.0;
    uint64_t occ_seed = 0;
};

int run_eval(const CLI::App& app, EvalArgs args) {
    RunMeta meta{"eval"};
    if (args.manifest.empty())
        args.manifest = args.out + "/scenes/manifest-heldout.jsonl";
    if (args.detector_checkpoint.empty())
        args.detector_checkpoint = args.out + "/detector/toy.ckpt";
    if (args.texture.empty())
        args.texture = args.out + "/textures/adv-texture.ppm";
    if (!args.metrics && !args.grid && !args.occlusion) args.metrics = true;

    const Mesh mesh = load_mesh_flag(args.mesh);
    const auto detector =
        make_detector(args.detector_name, args.detector_checkpoint);
    const TextureAtlas adv = load_texture_flag("--texture", args.texture);
    const TextureAtlas plain =
        args.plain_texture.empty()
            ? make_base_texture(mesh, adv.height, adv.width)
            : load_texture_flag("--plain-texture", args.plain_texture);

    EvalConfig cfg;
    cfg.score_threshold = args.score_threshold;
    cfg.nms_iou_threshold = args.nms_iou;
    cfg.target_class = args.target_class;

    const fs::path dir = fs::path(args.out) / "reports";
    fs::create_directories(dir);

    if (args.metrics) {
        const SceneSet set = load_manifest_flag("--eval-manifest", args.manifest);
        const double p_plain = p_at_05(mesh, set.scenes, plain, *detector, cfg);
        const double p_adv = p_at_05(mesh, set.scenes, adv, *detector, cfg);
        const double rate = asr(mesh, set.scenes, plain, adv, *detector, cfg);
        nlohmann::json j;
        j["scenes"] = set.size();
        j["p_at_05_plain"] = p_plain;
        j["p_at_05_adv"] = p_adv;
        j["asr"] = rate;
        std::ofstream out(dir / "metrics.json");
        out << j.dump(2) << "\n";
        std::cout << "P@0.5 plain " << p_plain << ", adv " << p_adv << ", ASR "
                  << rate << "\n";
    }
    if (args.grid) {
        GridParams params;
        params.distances = parse_csv_doubles("--grid-distances",
                                             args.grid_distances);
        params.elevations = parse_csv_doubles("--grid-elevations",
                                              args.grid_elevations);
        params.azimuth_step_deg = args.azimuth_step;
        params.image_size = args.image_size;
        params.fov_deg = args.fov;
        const EvalReport report =
            grid_report(mesh, plain, adv, *detector, params, cfg);
        write_report(report, (dir / "grid-report.txt").string(),
                     (dir / "grid-report.json").string());
        std::cout << report_to_text(report);
    }
    if (args.occlusion) {
        OcclusionParams params;
        params.distances = parse_csv_doubles("--occ-distances",
                                             args.occ_distances);
        params.image_size = args.image_size;
        params.fov_deg = args.fov;
        params.seed = args.occ_seed;
        const EvalReport report =
            occlusion_report(mesh, plain, adv, *detector, params, cfg);
        write_report(report, (dir / "occlusion-report.txt").string(),
                     (dir / "occlusion-report.json").string());
        std::cout << report_to_text(report);
    }

    write_config_echo(app, dir);
    meta.write(dir);
    return 0;
}

// ---------------------------------------------------------------------------
// render-debug

struct RenderDebugArgs {
    std::string out = "out";
    std::string mesh = "builtin:car";
    std::string texture;  // empty = base texture
    int texture_size = 256;
    double azimuth = 30.0, elevation = 15.0, distance = 5.0, fov = 45.0;
    int image_size = 96;
    std::string dump_mesh;
    std::string dump_footprint;
};

int run_render_debug(const CLI::App& app, const RenderDebugArgs& args) {
    RunMeta meta{"render-debug"};
    const Mesh mesh = load_mesh_flag(args.mesh);
    const TextureAtlas texture =
        args.texture.empty()
            ? make_base_texture(mesh, args.texture_size, args.texture_size)
            : load_texture_flag("--texture", args.texture);

    CameraPose pose;
    pose.azimuth_deg = args.azimuth;
    pose.elevation_deg = args.elevation;
    pose.distance = args.distance;
    pose.fov_deg = args.fov;
    pose.image_h = pose.image_w = args.image_size;

    const fs::path dir = fs::path(args.out) / "debug";
    fs::create_directories(dir);

    const RenderOutput render = rasterize(mesh, pose, texture);
    write_pnm((dir / "render.ppm").string(), render.image, 8);
    write_mask_pgm((dir / "silhouette.pgm").string(), render.silhouette);

    // Depth normalized to [0,1] over covered pixels for inspection.
    Image depth_vis(pose.image_h, pose.image_w, 1);
    double dmin = 1e300, dmax = -1e300;
    for (int y = 0; y < pose.image_h; ++y)
        for (int x = 0; x < pose.image_w; ++x)
            if (render.covered(y, x)) {
                dmin = std::min(dmin, render.depth.at(y, x, 0));
                dmax = std::max(dmax, render.depth.at(y, x, 0));
            }
    if (dmax > dmin)
        for (int y = 0; y < pose.image_h; ++y)
            for (int x = 0; x < pose.image_w; ++x)
                if (render.covered(y, x))
                    depth_vis.at(y, x, 0) = (render.depth.at(y, x, 0) - dmin) /
                                            (dmax - dmin);
    write_pnm((dir / "depth.pgm").string(), depth_vis, 8);

    Scene scene;
    scene.pose = pose;
    const CompositeResult comp = composite_onto(
        render, Image(pose.image_h, pose.image_w, 3, kEvalBackgroundGray),
        scene);
    write_pnm((dir / "composite.ppm").string(), comp.image, 8);

    const Box gt = silhouette_gt_box(mesh, pose);
    std::cout << "silhouette pixels: " << render.silhouette.count()
              << ", gt box [" << gt.x_min << ", " << gt.y_min << ", "
              << gt.x_max << ", " << gt.y_max << "]\n";

    if (!args.dump_mesh.empty()) write_mesh(mesh, args.dump_mesh);
    if (!args.dump_footprint.empty()) {
        const std::vector<uint8_t> fp =
            uv_footprint(mesh, texture.height, texture.width);
        BoolMask mask(texture.height, texture.width);
        mask.data = fp;
        write_mask_pgm(args.dump_footprint, mask);
    }

    write_config_echo(app, dir);
    meta.write(dir);
    return 0;
}

// ---------------------------------------------------------------------------
// wiring

void add_common(CLI::App* cmd, std::string* out, std::string* mesh,
                int* workers) {
    envify(cmd->add_option("--out", *out, "output root directory"), "OUT");
    envify(cmd->add_option("--mesh", *mesh,
                           "OBJ mesh path, or builtin:car for the reference "
                           "vehicle"),
           "MESH");
    envify(cmd->add_option("--workers", *workers, "max parallel fan-out")
               ->check(CLI::PositiveNumber),
           "WORKERS");
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"full-coverage vehicle camouflage attack pipeline"};
    app.require_subcommand(1);
    // Capture defaults so the config echo serializes every option with a
    // usable value and can be fed back through --config.
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "", "read flag defaults from a TOML/INI file");
    int workers = 1;

    GenScenesArgs gen;
    CLI::App* cmd_gen = app.add_subcommand("gen-scenes",
                                           "synthesize scenes and a manifest");
    add_common(cmd_gen, &gen.out, &gen.mesh, &workers);
    envify(cmd_gen->add_option("--count", gen.count)->check(CLI::PositiveNumber),
           "COUNT");
    envify(cmd_gen->add_option("--seed", gen.seed), "SEED");
    envify(cmd_gen->add_option("--split", gen.split), "SPLIT");
    envify(cmd_gen->add_option("--image-size", gen.image_size)
               ->check(CLI::PositiveNumber),
           "IMAGE_SIZE");
    cmd_gen->add_option("--fov", gen.fov);
    cmd_gen->add_option("--distance-min", gen.distance_min);
    cmd_gen->add_option("--distance-max", gen.distance_max);
    cmd_gen->add_option("--elevation-min", gen.elevation_min);
    cmd_gen->add_option("--elevation-max", gen.elevation_max);
    cmd_gen->add_option("--azimuth-min", gen.azimuth_min);
    cmd_gen->add_option("--azimuth-max", gen.azimuth_max);
    cmd_gen->add_option("--backgrounds", gen.backgrounds,
                        "sample backgrounds from this directory");

    TrainArgs train;
    CLI::App* cmd_train =
        app.add_subcommand("train-detector", "train the toy detector");
    add_common(cmd_train, &train.out, &train.mesh, &workers);
    envify(cmd_train->add_option("--train-manifest", train.train_manifest),
           "TRAIN_MANIFEST");
    envify(cmd_train->add_option("--heldout-manifest", train.heldout_manifest),
           "HELDOUT_MANIFEST");
    envify(cmd_train->add_option("--epochs", train.epochs)
               ->check(CLI::PositiveNumber),
           "EPOCHS");
    cmd_train->add_option("--batch-size", train.batch_size)
        ->check(CLI::PositiveNumber);
    cmd_train->add_option("--lr", train.lr);
    envify(cmd_train->add_option("--seed", train.seed), "SEED");
    cmd_train->add_option("--target-p05", train.target_p05);
    cmd_train->add_option("--texture-size", train.texture_size)
        ->check(CLI::PositiveNumber);
    cmd_train->add_flag("--verbose", train.verbose);

    AttackArgs atk;
    CLI::App* cmd_attack =
        app.add_subcommand("attack", "optimize the camouflage texture");
    add_common(cmd_attack, &atk.out, &atk.mesh, &workers);
    envify(cmd_attack->add_option("--train-manifest", atk.train_manifest),
           "TRAIN_MANIFEST");
    envify(cmd_attack->add_option("--detector", atk.detector_name),
           "DETECTOR");
    envify(cmd_attack->add_option("--detector-checkpoint",
                                  atk.detector_checkpoint),
           "DETECTOR_CHECKPOINT");
    envify(cmd_attack->add_option("--init", atk.init,
                                  "texture init: random, zero, basic"),
           "INIT");
    cmd_attack->add_option("--texture-size", atk.texture_size)
        ->check(CLI::PositiveNumber);
    envify(cmd_attack->add_option("--seed", atk.seed), "SEED");
    cmd_attack->add_option("--lr", atk.lr);
    envify(cmd_attack->add_option("--epochs", atk.epochs), "EPOCHS");
    cmd_attack->add_option("--batch-size", atk.batch_size)
        ->check(CLI::PositiveNumber);
    cmd_attack->add_option("--alpha", atk.alpha, "IoU loss weight");
    cmd_attack->add_option("--beta", atk.beta, "objectness loss weight");
    cmd_attack->add_option("--gamma", atk.gamma, "classification loss weight");
    cmd_attack->add_option("--mu", atk.mu, "smooth loss weight");
    envify(cmd_attack->add_option("--loss-terms", atk.loss_terms,
                                  "comma list of iou,obj,cls,smooth (or all)"),
           "LOSS_TERMS");
    cmd_attack->add_option("--target-class", atk.target_class);
    cmd_attack->add_option("--score-threshold", atk.score_threshold);
    cmd_attack->add_option("--nms-iou", atk.nms_iou);
    cmd_attack->add_flag("--finetune-on-hard", atk.finetune,
                         "mine hard examples and fine-tune on them");
    cmd_attack->add_option("--finetune-epochs", atk.finetune_epochs);

    EvalArgs ev;
    CLI::App* cmd_eval =
        app.add_subcommand("eval", "metrics and protocol reports");
    add_common(cmd_eval, &ev.out, &ev.mesh, &workers);
    envify(cmd_eval->add_option("--eval-manifest", ev.manifest),
           "EVAL_MANIFEST");
    envify(cmd_eval->add_option("--detector", ev.detector_name), "DETECTOR");
    envify(cmd_eval->add_option("--detector-checkpoint", ev.detector_checkpoint),
           "DETECTOR_CHECKPOINT");
    envify(cmd_eval->add_option("--texture", ev.texture), "TEXTURE");
    cmd_eval->add_option("--plain-texture", ev.plain_texture,
                         "plain texture checkpoint (default: built-in base)");
    cmd_eval->add_option("--target-class", ev.target_class);
    cmd_eval->add_option("--score-threshold", ev.score_threshold);
    cmd_eval->add_option("--nms-iou", ev.nms_iou);
    cmd_eval->add_flag("--metrics", ev.metrics,
                       "P@0.5 and ASR over the manifest scenes");
    cmd_eval->add_flag("--grid", ev.grid, "multi-view/distance grid report");
    cmd_eval->add_flag("--occlusion", ev.occlusion,
                       "partial-occlusion report");
    cmd_eval->add_option("--grid-distances", ev.grid_distances);
    cmd_eval->add_option("--grid-elevations", ev.grid_elevations);
    cmd_eval->add_option("--azimuth-step", ev.azimuth_step);
    cmd_eval->add_option("--occ-distances", ev.occ_distances);
    cmd_eval->add_option("--image-size", ev.image_size)
        ->check(CLI::PositiveNumber);
    cmd_eval->add_option("--fov", ev.fov);
    envify(cmd_eval->add_option("--occ-seed", ev.occ_seed), "OCC_SEED");

    RenderDebugArgs dbg;
    CLI::App* cmd_debug = app.add_subcommand(
        "render-debug", "render one pose and dump the intermediates");
    add_common(cmd_debug, &dbg.out, &dbg.mesh, &workers);
    cmd_debug->add_option("--texture", dbg.texture);
    cmd_debug->add_option("--texture-size", dbg.texture_size)
        ->check(CLI::PositiveNumber);
    cmd_debug->add_option("--azimuth", dbg.azimuth);
    cmd_debug->add_option("--elevation", dbg.elevation);
    cmd_debug->add_option("--distance", dbg.distance);
    cmd_debug->add_option("--fov", dbg.fov);
    cmd_debug->add_option("--image-size", dbg.image_size)
        ->check(CLI::PositiveNumber);
    cmd_debug->add_option("--dump-mesh", dbg.dump_mesh,
                          "write the mesh as OBJ to this path");
    cmd_debug->add_option("--dump-footprint", dbg.dump_footprint,
                          "write the paintable-texel mask to this path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (cmd_gen->parsed()) return run_gen_scenes(app, gen);
        if (cmd_train->parsed()) return run_train_detector(app, train);
        if (cmd_attack->parsed()) return run_attack(app, atk);
        if (cmd_eval->parsed()) return run_eval(app, ev);
        if (cmd_debug->parsed()) return run_render_debug(app, dbg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand given\n";
    return 1;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.push_back("fca");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const std::string& s : full) argv.push_back(s.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace fca
