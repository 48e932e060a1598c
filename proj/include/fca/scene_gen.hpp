// scene_gen.hpp — synthetic scene generation: seeded poses, procedural or
// directory-sourced backgrounds, silhouette-derived ground-truth boxes,
// and the occlusion synthesizer for the partial-occlusion protocol.
#pragma once

#include <cstdint>
#include <string>

#include "fca/mesh.hpp"
#include "fca/rng.hpp"
#include "fca/scene.hpp"

namespace fca {

struct PoseRanges {
    double azimuth_lo = 0.0, azimuth_hi = 360.0;
    double elevation_lo = 0.0, elevation_hi = 50.0;
    double distance_lo = 3.0, distance_hi = 10.0;
};

struct SceneGenParams {
    int count = 0;
    PoseRanges ranges;
    double fov_deg = 45.0;
    int image_h = 96;
    int image_w = 96;
    uint64_t seed = 0;
    std::string split = "train";
    // When set, backgrounds are sampled from lossless images in this
    // directory instead of the procedural generator.
    std::string backgrounds_dir;
};

// Deterministic given the seed. Background images are written under
// out_dir/images/ and the manifest to out_dir/manifest-<split>.jsonl.
// Every scene's gt_box is the tight bounding box of the render silhouette
// at its pose.
SceneSet generate_sceneset(const Mesh& mesh, const SceneGenParams& params,
                           const std::string& out_dir);

// Procedural background: vertical sky gradient, ground plane below a
// jittered horizon, and a few distractor rectangles.
Image procedural_background(int height, int width, Rng& rng);

// Tight bounding box of the silhouette at this pose; throws RenderError if
// the silhouette is empty.
Box silhouette_gt_box(const Mesh& mesh, const CameraPose& pose);

enum class OcclusionLevel { Small, Middle, Large };

const char* to_string(OcclusionLevel level);

// Occluded silhouette fraction bands: small (0, 0.30], middle (0.30, 0.70),
// large [0.70, 1).
bool fraction_in_band(double f, OcclusionLevel level);

// Rejection-samples an opaque rectangle over the composited image until the
// occluded fraction of silhouette pixels lands in the level's band (at most
// 100 tries, then OcclusionError). Returns a copy of the scene with the
// occluder attached.
Scene synth_occlusion(const Mesh& mesh, const Scene& scene, OcclusionLevel level,
                      uint64_t seed);

// Occluded fraction of the pose's silhouette under the scene's occluder
// (0 when the scene has none).
double occluded_fraction(const Mesh& mesh, const Scene& scene);

}  // namespace fca
