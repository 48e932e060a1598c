#include "fca/protocols.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fca/errors.hpp"

namespace fca {

std::vector<CameraPose> view_grid(const GridParams& params) {
    if (params.distances.empty() || params.elevations.empty())
        throw ArgumentError("view_grid: distances and elevations must be "
                            "non-empty");
    if (params.azimuth_step_deg <= 0.0 ||
        std::fmod(360.0, params.azimuth_step_deg) != 0.0)
        throw ArgumentError("view_grid: azimuth step must divide 360, got " +
                            std::to_string(params.azimuth_step_deg));
    const int n_az = static_cast<int>(std::lround(360.0 / params.azimuth_step_deg));
    std::vector<CameraPose> poses;
    poses.reserve(params.distances.size() * params.elevations.size() * n_az);
    for (double distance : params.distances) {
        for (double elevation : params.elevations) {
            for (int k = 0; k < n_az; ++k) {
                CameraPose pose;
                pose.azimuth_deg = k * params.azimuth_step_deg;
                pose.elevation_deg = elevation;
                pose.distance = distance;
                pose.fov_deg = params.fov_deg;
                pose.image_h = params.image_size;
                pose.image_w = params.image_size;
                poses.push_back(pose);
            }
        }
    }
    return poses;
}

int azimuth_bin(double azimuth_deg) {
    double a = std::fmod(azimuth_deg, 360.0);
    if (a < 0.0) a += 360.0;
    const int bin = static_cast<int>(a / 45.0);
    return bin > 7 ? 7 : bin;  // guards a == 360.0 after fmod rounding
}

std::string azimuth_bin_label(int bin) {
    return std::to_string(bin * 45) + "~" + std::to_string((bin + 1) * 45);
}

namespace {

std::string format_distance(double d) {
    std::ostringstream out;
    out << d;
    return out.str();
}

void finalize_cells(EvalReport& report) {
    report.total_scenes = 0;
    for (ReportCell& cell : report.cells) {
        report.total_scenes += cell.total;
        if (cell.before_detected > 0)
            cell.asr = static_cast<double>(cell.successes) /
                       static_cast<double>(cell.before_detected);
    }
}

}  // namespace

EvalReport grid_report(const Mesh& mesh, const TextureAtlas& plain,
                       const TextureAtlas& adv, const DetectorAdapter& detector,
                       const GridParams& params, const EvalConfig& cfg) {
    const std::vector<CameraPose> poses = view_grid(params);

    EvalReport report;
    report.kind = "grid";
    for (int b = 0; b < 8; ++b) report.row_labels.push_back(azimuth_bin_label(b));
    for (double d : params.distances)
        report.col_labels.push_back(format_distance(d));
    report.cells.resize(report.row_labels.size() * report.col_labels.size());
    for (size_t r = 0; r < report.row_labels.size(); ++r)
        for (size_t c = 0; c < report.col_labels.size(); ++c) {
            report.cell(static_cast<int>(r), static_cast<int>(c)).row_label =
                report.row_labels[r];
            report.cell(static_cast<int>(r), static_cast<int>(c)).col_label =
                report.col_labels[c];
        }

    for (const CameraPose& pose : poses) {
        Scene scene;
        scene.pose = pose;
        scene.gt_box = silhouette_gt_box(mesh, pose);
        scene.split = "protocol";

        const SceneOutcome before =
            evaluate_scene(mesh, scene, plain, detector, cfg);
        const SceneOutcome after =
            evaluate_scene(mesh, scene, adv, detector, cfg);

        int col = -1;
        for (size_t c = 0; c < params.distances.size(); ++c)
            if (params.distances[c] == pose.distance) col = static_cast<int>(c);
        ReportCell& cell = report.cell(azimuth_bin(pose.azimuth_deg), col);
        cell.total += 1;
        if (before.correct) {
            cell.before_detected += 1;
            if (!after.correct) cell.successes += 1;
        }

        OutcomeRecord rec;
        rec.azimuth = pose.azimuth_deg;
        rec.elevation = pose.elevation_deg;
        rec.distance = pose.distance;
        rec.before_correct = before.correct;
        rec.after_correct = after.correct;
        rec.after_best_iou = after.best_iou;
        rec.after_best_class = after.best_class;
        rec.after_best_score = after.best_score;
        report.records.push_back(rec);
    }
    finalize_cells(report);
    return report;
}

std::vector<OcclusionSceneSpec> occlusion_protocol_scenes(
    const Mesh& mesh, const OcclusionParams& params) {
    if (params.distances.empty() || params.elevations.empty() ||
        params.azimuths_per_cell <= 0)
        throw ArgumentError("occlusion_protocol_scenes: empty protocol axis");

    const OcclusionLevel levels[3] = {OcclusionLevel::Small,
                                      OcclusionLevel::Middle,
                                      OcclusionLevel::Large};
    Rng root(params.seed);
    std::vector<OcclusionSceneSpec> specs;
    specs.reserve(3 * params.distances.size() * params.elevations.size() *
                  params.azimuths_per_cell);
    const double az_step = 360.0 / params.azimuths_per_cell;
    uint64_t scene_counter = 0;
    for (int li = 0; li < 3; ++li) {
        for (size_t di = 0; di < params.distances.size(); ++di) {
            for (double elevation : params.elevations) {
                for (int k = 0; k < params.azimuths_per_cell; ++k) {
                    CameraPose pose;
                    pose.azimuth_deg = k * az_step;
                    pose.elevation_deg = elevation;
                    pose.distance = params.distances[di];
                    pose.fov_deg = params.fov_deg;
                    pose.image_h = params.image_size;
                    pose.image_w = params.image_size;

                    Scene base;
                    base.pose = pose;
                    base.gt_box = silhouette_gt_box(mesh, pose);
                    base.split = "protocol";

                    OcclusionSceneSpec spec;
                    spec.level_index = li;
                    spec.distance_index = static_cast<int>(di);
                    spec.scene = synth_occlusion(
                        mesh, base, levels[li],
                        root.child(scene_counter).next_u64());
                    spec.occluded_frac = occluded_fraction(mesh, spec.scene);
                    specs.push_back(std::move(spec));
                    ++scene_counter;
                }
            }
        }
    }
    return specs;
}

EvalReport occlusion_report(const Mesh& mesh, const TextureAtlas& plain,
                            const TextureAtlas& adv,
                            const DetectorAdapter& detector,
                            const OcclusionParams& params,
                            const EvalConfig& cfg) {
    const std::vector<OcclusionSceneSpec> specs =
        occlusion_protocol_scenes(mesh, params);

    EvalReport report;
    report.kind = "occlusion";
    report.row_labels = {"small", "middle", "large"};
    for (double d : params.distances)
        report.col_labels.push_back(format_distance(d));
    report.cells.resize(report.row_labels.size() * report.col_labels.size());
    for (size_t r = 0; r < report.row_labels.size(); ++r)
        for (size_t c = 0; c < report.col_labels.size(); ++c) {
            report.cell(static_cast<int>(r), static_cast<int>(c)).row_label =
                report.row_labels[r];
            report.cell(static_cast<int>(r), static_cast<int>(c)).col_label =
                report.col_labels[c];
        }

    for (const OcclusionSceneSpec& spec : specs) {
        const SceneOutcome before =
            evaluate_scene(mesh, spec.scene, plain, detector, cfg);
        const SceneOutcome after =
            evaluate_scene(mesh, spec.scene, adv, detector, cfg);

        ReportCell& cell = report.cell(spec.level_index, spec.distance_index);
        cell.total += 1;
        if (before.correct) {
            cell.before_detected += 1;
            if (!after.correct) cell.successes += 1;
        }

        OutcomeRecord rec;
        rec.azimuth = spec.scene.pose.azimuth_deg;
        rec.elevation = spec.scene.pose.elevation_deg;
        rec.distance = spec.scene.pose.distance;
        rec.occlusion_level = spec.level_index;
        rec.occluded_frac = spec.occluded_frac;
        rec.before_correct = before.correct;
        rec.after_correct = after.correct;
        rec.after_best_iou = after.best_iou;
        rec.after_best_class = after.best_class;
        rec.after_best_score = after.best_score;
        report.records.push_back(rec);
    }
    finalize_cells(report);
    return report;
}

std::string report_to_text(const EvalReport& report) {
    std::ostringstream out;
    out << "ASR report (" << report.kind << "), " << report.total_scenes
        << " scenes\n";
    const size_t label_w = 12;
    out << std::left << std::setw(label_w)
        << (report.kind == "grid" ? "azimuth" : "occlusion");
    for (const std::string& col : report.col_labels)
        out << std::right << std::setw(9) << ("d=" + col);
    out << "\n";
    for (size_t r = 0; r < report.row_labels.size(); ++r) {
        out << std::left << std::setw(label_w) << report.row_labels[r];
        for (size_t c = 0; c < report.col_labels.size(); ++c) {
            const ReportCell& cell =
                report.cell(static_cast<int>(r), static_cast<int>(c));
            if (cell.asr.has_value()) {
                std::ostringstream v;
                v << std::fixed << std::setprecision(3) << *cell.asr;
                out << std::right << std::setw(9) << v.str();
            } else {
                out << std::right << std::setw(9) << "n/a";
            }
        }
        out << "\n";
    }
    return out.str();
}

nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["kind"] = report.kind;
    j["total_scenes"] = report.total_scenes;
    j["row_labels"] = report.row_labels;
    j["col_labels"] = report.col_labels;
    j["cells"] = nlohmann::json::array();
    for (const ReportCell& cell : report.cells) {
        nlohmann::json c;
        c["row"] = cell.row_label;
        c["col"] = cell.col_label;
        c["total"] = cell.total;
        c["before_detected"] = cell.before_detected;
        c["successes"] = cell.successes;
        if (cell.asr.has_value())
            c["asr"] = *cell.asr;
        else
            c["asr"] = nullptr;
        j["cells"].push_back(c);
    }
    j["records"] = nlohmann::json::array();
    for (const OutcomeRecord& rec : report.records) {
        nlohmann::json r;
        r["azimuth"] = rec.azimuth;
        r["elevation"] = rec.elevation;
        r["distance"] = rec.distance;
        if (rec.occlusion_level >= 0) {
            r["occlusion_level"] = rec.occlusion_level;
            r["occluded_frac"] = rec.occluded_frac;
        }
        r["before_correct"] = rec.before_correct;
        r["after_correct"] = rec.after_correct;
        r["after_best_iou"] = rec.after_best_iou;
        r["after_best_class"] = rec.after_best_class;
        r["after_best_score"] = rec.after_best_score;
        j["records"].push_back(r);
    }
    return j;
}

void write_report(const EvalReport& report, const std::string& text_path,
                  const std::string& json_path) {
    {
        std::ofstream out(text_path);
        if (!out) throw IoError("cannot open report file: " + text_path);
        out << report_to_text(report);
    }
    {
        std::ofstream out(json_path);
        if (!out) throw IoError("cannot open report file: " + json_path);
        out << report_to_json(report).dump(2) << "\n";
    }
}

}  // namespace fca
