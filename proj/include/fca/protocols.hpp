// protocols.hpp — the two standing evaluation protocols and their reports.
//
// View grid: the Cartesian product of distances × elevations × azimuths
// (default 6 × 6 × 120 = 4320 poses), rendered on a plain background and
// grouped into 8 half-open 45° azimuth bins × distances, 90 poses per cell.
//
// Occlusion: distances × 3 occlusion levels, 90 scenes per cell (default
// 4 × 3 × 90 = 1080), each scene carrying a synthesized occluder whose
// occluded-silhouette fraction falls in the level's band.
//
// Cells report ASR over their scenes; a cell whose before-set is empty (the
// detector never found the plain-texture vehicle there) has no ASR and is
// rendered as "n/a".
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fca/camera.hpp"
#include "fca/detector.hpp"
#include "fca/eval.hpp"
#include "fca/mesh.hpp"
#include "fca/scene_gen.hpp"
#include "fca/texture_atlas.hpp"

namespace fca {

struct GridParams {
    std::vector<double> distances = {1.5, 3, 5, 10, 15, 20};
    std::vector<double> elevations = {0, 10, 20, 30, 40, 50};
    double azimuth_step_deg = 3.0;
    double fov_deg = 45.0;
    int image_size = 96;
};

// Poses ordered distance-major, then elevation, then azimuth. Throws
// ArgumentError when the step does not divide 360 or a list is empty.
std::vector<CameraPose> view_grid(const GridParams& params);

// Half-open bins [k*45, (k+1)*45), k in 0..7.
int azimuth_bin(double azimuth_deg);
std::string azimuth_bin_label(int bin);

struct ReportCell {
    std::string row_label;
    std::string col_label;
    int total = 0;
    int before_detected = 0;
    int successes = 0;                // attack successes among before-detected
    std::optional<double> asr;        // nullopt when before_detected == 0
};

struct OutcomeRecord {
    double azimuth = 0.0, elevation = 0.0, distance = 0.0;
    int occlusion_level = -1;         // -1 for the view grid
    double occluded_frac = 0.0;
    bool before_correct = false;
    bool after_correct = false;
    double after_best_iou = 0.0;
    int after_best_class = -1;
    double after_best_score = 0.0;
};

struct EvalReport {
    std::string kind;                 // "grid" | "occlusion"
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<ReportCell> cells;    // row-major
    std::vector<OutcomeRecord> records;
    int total_scenes = 0;

    ReportCell& cell(int row, int col) {
        return cells[static_cast<size_t>(row) * col_labels.size() + col];
    }
    const ReportCell& cell(int row, int col) const {
        return cells[static_cast<size_t>(row) * col_labels.size() + col];
    }
};

EvalReport grid_report(const Mesh& mesh, const TextureAtlas& plain,
                       const TextureAtlas& adv, const DetectorAdapter& detector,
                       const GridParams& params, const EvalConfig& cfg);

struct OcclusionParams {
    std::vector<double> distances = {1.5, 3, 5, 10};
    std::vector<double> elevations = {0, 10, 20, 30, 40, 50};
    int azimuths_per_cell = 15;       // 15 azimuths × 6 elevations = 90 scenes
    double fov_deg = 45.0;
    int image_size = 96;
    uint64_t seed = 0;
};

// One protocol scene: pose + occluder + measured occluded fraction.
struct OcclusionSceneSpec {
    int level_index = 0;              // 0 small, 1 middle, 2 large
    int distance_index = 0;
    Scene scene;
    double occluded_frac = 0.0;
};

// Builds every protocol scene (with occluders) without touching a detector,
// so shape/band properties can be checked cheaply.
std::vector<OcclusionSceneSpec> occlusion_protocol_scenes(
    const Mesh& mesh, const OcclusionParams& params);

EvalReport occlusion_report(const Mesh& mesh, const TextureAtlas& plain,
                            const TextureAtlas& adv,
                            const DetectorAdapter& detector,
                            const OcclusionParams& params,
                            const EvalConfig& cfg);

std::string report_to_text(const EvalReport& report);
nlohmann::json report_to_json(const EvalReport& report);
// Writes the text table and the JSON record file.
void write_report(const EvalReport& report, const std::string& text_path,
                  const std::string& json_path);

}  // namespace fca
