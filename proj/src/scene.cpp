#include "fca/scene.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fca/errors.hpp"
#include "fca/image_io.hpp"

namespace fs = std::filesystem;

namespace fca {

std::string Scene::resolved_image_path() const {
    if (image_path.empty() || base_dir.empty() ||
        fs::path(image_path).is_absolute())
        return image_path;
    return (fs::path(base_dir) / image_path).string();
}

Image Scene::load_background() const { return read_pnm(resolved_image_path()); }

BoolMask Scene::load_external_mask() const {
    if (mask_source != MaskSource::ExternalFile)
        throw ArgumentError("scene has no external mask");
    std::string p = mask_path;
    if (!base_dir.empty() && !fs::path(p).is_absolute())
        p = (fs::path(base_dir) / p).string();
    return read_mask_pgm(p);
}

namespace {

void apply_occluder(const Occluder& occ, Image& img, BoolMask& mask) {
    const int y0 = std::max(0, occ.y0), y1 = std::min(img.height, occ.y1);
    const int x0 = std::max(0, occ.x0), x1 = std::min(img.width, occ.x1);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = occ.color[c];
            mask.at(y, x) = 0;
        }
    }
}

CompositeResult blend(const RenderOutput& render, const Image& background,
                      const Scene& scene) {
    const Image& O = render.image;
    if (O.height != background.height || O.width != background.width ||
        background.channels != 3)
        throw ArgumentError("composite: render and background dimensions differ");

    BoolMask m;
    if (scene.mask_source == MaskSource::RenderSilhouette) {
        m = render.silhouette;
    } else {
        m = scene.load_external_mask();
        if (m.height != O.height || m.width != O.width)
            throw ArgumentError("composite: external mask dimensions differ");
    }

    CompositeResult result;
    result.image = Image(O.height, O.width, 3);
    for (int y = 0; y < O.height; ++y) {
        for (int x = 0; x < O.width; ++x) {
            const bool in = m.at(y, x) != 0;
            for (int c = 0; c < 3; ++c)
                result.image.at(y, x, c) =
                    in ? O.at(y, x, c) : background.at(y, x, c);
        }
    }
    result.mask = std::move(m);
    if (scene.occluder) apply_occluder(*scene.occluder, result.image, result.mask);
    return result;
}

}  // namespace

CompositeResult composite(const RenderOutput& render, const Scene& scene) {
    return blend(render, scene.load_background(), scene);
}

CompositeResult composite_onto(const RenderOutput& render, const Image& background,
                               const Scene& scene) {
    return blend(render, background, scene);
}

void save_manifest(const SceneSet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    for (const Scene& s : set.scenes) {
        nlohmann::json j;
        j["image_path"] = s.image_path;
        j["azimuth"] = s.pose.azimuth_deg;
        j["elevation"] = s.pose.elevation_deg;
        j["distance"] = s.pose.distance;
        j["fov"] = s.pose.fov_deg;
        j["x_min"] = s.gt_box.x_min;
        j["y_min"] = s.gt_box.y_min;
        j["x_max"] = s.gt_box.x_max;
        j["y_max"] = s.gt_box.y_max;
        if (s.mask_source == MaskSource::ExternalFile) j["mask_path"] = s.mask_path;
        j["split"] = s.split;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("manifest write failed: " + path);
}

SceneSet load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    const std::string dir = fs::path(path).parent_path().string();

    SceneSet set;
    set.manifest_path = path;
    std::string line;
    int line_no = 0;
    int h = -1, w = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Scene s;
        s.base_dir = dir;
        try {
            const nlohmann::json j = nlohmann::json::parse(line);
            s.image_path = j.at("image_path").get<std::string>();
            s.pose.azimuth_deg = j.at("azimuth").get<double>();
            s.pose.elevation_deg = j.at("elevation").get<double>();
            s.pose.distance = j.at("distance").get<double>();
            s.pose.fov_deg = j.at("fov").get<double>();
            s.gt_box = {j.at("x_min").get<double>(), j.at("y_min").get<double>(),
                        j.at("x_max").get<double>(), j.at("y_max").get<double>()};
            if (j.contains("mask_path")) {
                s.mask_source = MaskSource::ExternalFile;
                s.mask_path = j.at("mask_path").get<std::string>();
            }
            s.split = j.value("split", "");
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }

        const PnmHeader hdr = read_pnm_header(s.resolved_image_path());
        s.pose.image_h = hdr.height;
        s.pose.image_w = hdr.width;
        if (h == -1) {
            h = hdr.height;
            w = hdr.width;
        } else if (h != hdr.height || w != hdr.width) {
            throw ValidationError(path + ": scenes disagree on image dimensions");
        }

        if (!(s.gt_box.valid() && s.gt_box.x_min >= 0.0 && s.gt_box.y_min >= 0.0 &&
              s.gt_box.x_max <= w && s.gt_box.y_max <= h))
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": gt_box outside image bounds or empty");
        if (!set.scenes.empty() && s.split != set.scenes.front().split)
            throw ValidationError(path + ": mixed split tags in one manifest");
        set.scenes.push_back(std::move(s));
    }
    if (!set.scenes.empty()) set.split = set.scenes.front().split;
    return set;
}

}  // namespace fca
