// scene.hpp — scene records and the mask-based physical transformation
// that blends a rendered vehicle into a background image.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fca/box.hpp"
#include "fca/camera.hpp"
#include "fca/image.hpp"
#include "fca/renderer.hpp"

namespace fca {

enum class MaskSource { RenderSilhouette, ExternalFile };

// Opaque rectangle drawn over the composited image (pixel bounds,
// half-open). Used by the occlusion protocol only; never persisted to a
// manifest.
struct Occluder {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double color[3] = {0.35, 0.32, 0.30};
};

struct Scene {
    std::string image_path;  // background, relative to the manifest directory
    CameraPose pose;
    Box gt_box;
    MaskSource mask_source = MaskSource::RenderSilhouette;
    std::string mask_path;   // external mask, when mask_source says so
    std::string split;       // train | test
    std::optional<Occluder> occluder;

    // Resolved at manifest load; empty means image_path is usable as-is.
    std::string base_dir;

    Image load_background() const;
    BoolMask load_external_mask() const;
    std::string resolved_image_path() const;
};

struct SceneSet {
    std::string manifest_path;
    std::vector<Scene> scenes;
    std::string split;

    size_t size() const { return scenes.size(); }
    bool empty() const { return scenes.empty(); }
};

struct CompositeResult {
    Image image;    // I_adv = m*O + (1-m)*I, occluder painted on top if any
    BoolMask mask;  // effective vehicle mask: m minus occluded pixels
};

// Eq-style mask blend. The gradient of image w.r.t. the render is the mask
// itself, so texel gradients flow only through masked-in, unoccluded pixels.
CompositeResult composite(const RenderOutput& render, const Scene& scene);

// Same blend against an explicit background (used when scenes are
// generated in memory and for pure-background evaluation renders).
CompositeResult composite_onto(const RenderOutput& render, const Image& background,
                               const Scene& scene);

// Manifest: one JSON record per line with fields {image_path, azimuth,
// elevation, distance, fov, x_min, y_min, x_max, y_max, mask_path?, split}.
// Image dimensions come from the referenced image file headers.
void save_manifest(const SceneSet& set, const std::string& path);
SceneSet load_manifest(const std::string& path);

}  // namespace fca
