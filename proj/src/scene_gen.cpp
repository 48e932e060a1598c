#include "fca/scene_gen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "fca/errors.hpp"
#include "fca/image_io.hpp"
#include "fca/renderer.hpp"

namespace fs = std::filesystem;

namespace fca {

Image procedural_background(int height, int width, Rng& rng) {
    Image img(height, width, 3);

    const double sky_top[3] = {rng.uniform(0.25, 0.55), rng.uniform(0.45, 0.75),
                               rng.uniform(0.70, 0.95)};
    const double sky_bot[3] = {rng.uniform(0.60, 0.85), rng.uniform(0.65, 0.90),
                               rng.uniform(0.80, 1.00)};
    const double gnd_top[3] = {rng.uniform(0.35, 0.55), rng.uniform(0.30, 0.50),
                               rng.uniform(0.20, 0.40)};
    const double gnd_bot[3] = {rng.uniform(0.15, 0.35), rng.uniform(0.12, 0.30),
                               rng.uniform(0.08, 0.25)};
    const int horizon = static_cast<int>(height * rng.uniform(0.45, 0.60));

    for (int y = 0; y < height; ++y) {
        const bool sky = y < horizon;
        const double t = sky ? static_cast<double>(y) / std::max(1, horizon)
                             : static_cast<double>(y - horizon) /
                                   std::max(1, height - horizon);
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double a = sky ? sky_top[c] : gnd_top[c];
                const double b = sky ? sky_bot[c] : gnd_bot[c];
                img.at(y, x, c) = a + t * (b - a);
            }
        }
    }

    const int n_rects = 2 + rng.uniform_int(5);
    for (int i = 0; i < n_rects; ++i) {
        const int rw = std::max(2, static_cast<int>(width * rng.uniform(0.05, 0.25)));
        const int rh = std::max(2, static_cast<int>(height * rng.uniform(0.05, 0.25)));
        const int rx = rng.uniform_int(std::max(1, width - rw));
        const int ry = rng.uniform_int(std::max(1, height - rh));
        const double col[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
        for (int y = ry; y < std::min(height, ry + rh); ++y)
            for (int x = rx; x < std::min(width, rx + rw); ++x)
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = col[c];
    }
    return img;
}

Box silhouette_gt_box(const Mesh& mesh, const CameraPose& pose) {
    static const TextureAtlas dummy(1, 1, 0.0);
    const RenderOutput render = rasterize(mesh, pose, dummy);
    int x0 = pose.image_w, x1 = -1, y0 = pose.image_h, y1 = -1;
    for (int y = 0; y < pose.image_h; ++y) {
        for (int x = 0; x < pose.image_w; ++x) {
            if (!render.silhouette.at(y, x)) continue;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) throw RenderError("empty silhouette: vehicle not visible at pose");
    return Box{static_cast<double>(x0), static_cast<double>(y0),
               static_cast<double>(x1 + 1), static_cast<double>(y1 + 1)};
}

namespace {

std::vector<std::string> list_background_files(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".ppm" || ext == ".pnm" || ext == ".pgm")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw ArgumentError("background directory has no PNM images: " + dir);
    return files;
}

}  // namespace

SceneSet generate_sceneset(const Mesh& mesh, const SceneGenParams& params,
                           const std::string& out_dir) {
    if (params.count <= 0) throw ArgumentError("scene count must be positive");
    const PoseRanges& r = params.ranges;
    if (r.azimuth_lo > r.azimuth_hi || r.elevation_lo > r.elevation_hi ||
        r.distance_lo > r.distance_hi || r.distance_lo <= 0.0)
        throw ArgumentError("empty or invalid pose ranges");

    std::vector<std::string> bg_files;
    if (!params.backgrounds_dir.empty())
        bg_files = list_background_files(params.backgrounds_dir);

    fs::create_directories(fs::path(out_dir) / "images");

    Rng root(params.seed);
    SceneSet set;
    set.split = params.split;
    set.manifest_path =
        (fs::path(out_dir) / ("manifest-" + params.split + ".jsonl")).string();

    for (int i = 0; i < params.count; ++i) {
        Rng rng = root.child(static_cast<uint64_t>(i));
        Scene s;
        s.split = params.split;
        s.base_dir = out_dir;
        s.pose.azimuth_deg = std::fmod(rng.uniform(r.azimuth_lo, r.azimuth_hi), 360.0);
        s.pose.elevation_deg = rng.uniform(r.elevation_lo, r.elevation_hi);
        s.pose.distance = rng.uniform(r.distance_lo, r.distance_hi);
        s.pose.fov_deg = params.fov_deg;
        s.pose.image_h = params.image_h;
        s.pose.image_w = params.image_w;

        Image bg;
        if (bg_files.empty()) {
            bg = procedural_background(params.image_h, params.image_w, rng);
        } else {
            bg = read_pnm(bg_files[static_cast<size_t>(rng.uniform_int(
                static_cast<int>(bg_files.size())))]);
            if (bg.height != params.image_h || bg.width != params.image_w)
                throw ValidationError("background image dimensions do not match "
                                      "requested scene size");
        }

        s.gt_box = silhouette_gt_box(mesh, s.pose);

        char name[64];
        std::snprintf(name, sizeof(name), "images/%s-%05d.ppm",
                      params.split.c_str(), i);
        s.image_path = name;
        write_pnm((fs::path(out_dir) / s.image_path).string(), bg, 8);
        set.scenes.push_back(std::move(s));
    }

    save_manifest(set, set.manifest_path);
    return set;
}

const char* to_string(OcclusionLevel level) {
    switch (level) {
        case OcclusionLevel::Small: return "small";
        case OcclusionLevel::Middle: return "middle";
        case OcclusionLevel::Large: return "large";
    }
    return "small";
}

bool fraction_in_band(double f, OcclusionLevel level) {
    switch (level) {
        case OcclusionLevel::Small: return f > 0.0 && f <= 0.30;
        case OcclusionLevel::Middle: return f > 0.30 && f < 0.70;
        case OcclusionLevel::Large: return f >= 0.70 && f < 1.0;
    }
    return false;
}

namespace {

double rect_silhouette_fraction(const BoolMask& sil, size_t sil_count,
                                const Occluder& occ) {
    size_t hit = 0;
    const int y0 = std::max(0, occ.y0), y1 = std::min(sil.height, occ.y1);
    const int x0 = std::max(0, occ.x0), x1 = std::min(sil.width, occ.x1);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            if (sil.at(y, x)) ++hit;
    return sil_count > 0 ? static_cast<double>(hit) / static_cast<double>(sil_count)
                         : 0.0;
}

}  // namespace

Scene synth_occlusion(const Mesh& mesh, const Scene& scene, OcclusionLevel level,
                      uint64_t seed) {
    static const TextureAtlas dummy(1, 1, 0.0);
    const RenderOutput render = rasterize(mesh, scene.pose, dummy);
    const BoolMask& sil = render.silhouette;
    const size_t n_sil = sil.count();
    if (n_sil == 0) throw OcclusionError("silhouette is empty, cannot occlude");

    int bx0 = sil.width, bx1 = -1, by0 = sil.height, by1 = -1;
    for (int y = 0; y < sil.height; ++y)
        for (int x = 0; x < sil.width; ++x)
            if (sil.at(y, x)) {
                bx0 = std::min(bx0, x);
                bx1 = std::max(bx1, x);
                by0 = std::min(by0, y);
                by1 = std::max(by1, y);
            }
    const double bw = bx1 + 1 - bx0, bh = by1 + 1 - by0;

    double target = 0.18;
    if (level == OcclusionLevel::Middle) target = 0.50;
    if (level == OcclusionLevel::Large) target = 0.82;

    Rng rng(seed);
    // Initial scale assumes the silhouette fills roughly 60% of its bbox;
    // each miss re-centers and nudges the scale toward the target band.
    double scale = std::sqrt(target / 0.6);
    const int max_tries = 100;
    for (int t = 0; t < max_tries; ++t) {
        const double cx = rng.uniform(bx0, bx1 + 1.0);
        const double cy = rng.uniform(by0, by1 + 1.0);
        const double hw = 0.5 * scale * bw;
        const double hh = 0.5 * scale * bh;
        Occluder occ;
        occ.x0 = static_cast<int>(std::floor(cx - hw));
        occ.x1 = static_cast<int>(std::ceil(cx + hw));
        occ.y0 = static_cast<int>(std::floor(cy - hh));
        occ.y1 = static_cast<int>(std::ceil(cy + hh));

        const double f = rect_silhouette_fraction(sil, n_sil, occ);
        if (fraction_in_band(f, level)) {
            Scene out = scene;
            out.occluder = occ;
            return out;
        }
        const double adjust = std::sqrt(target / std::max(f, 0.02));
        scale = std::clamp(scale * std::clamp(adjust, 0.6, 1.7), 0.05, 4.0);
    }
    throw OcclusionError(std::string("could not hit the ") + to_string(level) +
                         " occlusion band in 100 tries");
}

double occluded_fraction(const Mesh& mesh, const Scene& scene) {
    if (!scene.occluder) return 0.0;
    static const TextureAtlas dummy(1, 1, 0.0);
    const RenderOutput render = rasterize(mesh, scene.pose, dummy);
    return rect_silhouette_fraction(render.silhouette, render.silhouette.count(),
                                    *scene.occluder);
}

}  // namespace fca
