#include "fca/texture_atlas.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "fca/errors.hpp"
#include "fca/image.hpp"
#include "fca/image_io.hpp"
#include "fca/rng.hpp"

namespace fca {

const char* to_string(InitMode mode) {
    switch (mode) {
        case InitMode::Random: return "random";
        case InitMode::Zero: return "zero";
        case InitMode::Basic: return "basic";
    }
    return "random";
}

InitMode init_mode_from_string(const std::string& s) {
    if (s == "random") return InitMode::Random;
    if (s == "zero") return InitMode::Zero;
    if (s == "basic") return InitMode::Basic;
    throw ArgumentError("unknown init mode '" + s + "' (random|zero|basic)");
}

TextureAtlas init_texture(InitMode mode, int height, int width, uint64_t seed,
                          const TextureAtlas* base) {
    if (height <= 0 || width <= 0)
        throw ArgumentError("init_texture: shape must be positive");
    switch (mode) {
        case InitMode::Zero:
            return TextureAtlas(height, width, 0.0);
        case InitMode::Random: {
            TextureAtlas atlas(height, width);
            Rng rng(seed);
            for (double& t : atlas.texels) t = rng.uniform();
            return atlas;
        }
        case InitMode::Basic: {
            if (base == nullptr)
                throw ArgumentError("init_texture: basic mode requires a base atlas");
            if (base->height != height || base->width != width)
                throw ArgumentError("init_texture: base atlas shape mismatch");
            return *base;
        }
    }
    throw ArgumentError("init_texture: bad mode");
}

namespace {

// Edge-inclusive barycentric sign test.
bool point_in_triangle(Vec2 p, Vec2 a, Vec2 b, Vec2 c) {
    auto edge = [](Vec2 u, Vec2 v, Vec2 q) {
        return (v.x - u.x) * (q.y - u.y) - (v.y - u.y) * (q.x - u.x);
    };
    double d0 = edge(a, b, p);
    double d1 = edge(b, c, p);
    double d2 = edge(c, a, p);
    bool has_neg = d0 < 0 || d1 < 0 || d2 < 0;
    bool has_pos = d0 > 0 || d1 > 0 || d2 > 0;
    return !(has_neg && has_pos);
}

// Invokes fn(texel_y, texel_x) for every texel holding at least one of the
// 4×4 supersample points inside the face's UV triangle.
template <typename Fn>
void for_each_face_texel(const Face& f, int height, int width, Fn&& fn) {
    const int super = 4;  // supersample factor per texel axis
    const int sw = width * super;
    const int sh = height * super;
    const Vec2 a = f.uv[0], b = f.uv[1], c = f.uv[2];
    double u_lo = std::min({a.x, b.x, c.x});
    double u_hi = std::max({a.x, b.x, c.x});
    double v_lo = std::min({a.y, b.y, c.y});
    double v_hi = std::max({a.y, b.y, c.y});
    int sx0 = std::max(0, static_cast<int>(std::floor(u_lo * sw - 0.5)));
    int sx1 = std::min(sw - 1, static_cast<int>(std::ceil(u_hi * sw)));
    int sy0 = std::max(0, static_cast<int>(std::floor(v_lo * sh - 0.5)));
    int sy1 = std::min(sh - 1, static_cast<int>(std::ceil(v_hi * sh)));
    for (int sy = sy0; sy <= sy1; ++sy) {
        for (int sx = sx0; sx <= sx1; ++sx) {
            Vec2 p{(sx + 0.5) / sw, (sy + 0.5) / sh};
            if (!point_in_triangle(p, a, b, c)) continue;
            fn(std::min(height - 1, sy / super), std::min(width - 1, sx / super));
        }
    }
}

struct Rgb {
    double r, g, b;
};

constexpr Rgb kBodyColor = {0.66, 0.12, 0.14};

Rgb group_color(const std::string& group) {
    auto has_prefix = [&](const char* p) {
        const size_t n = std::strlen(p);
        if (group.size() < n) return false;
        for (size_t i = 0; i < n; ++i)
            if (std::tolower(static_cast<unsigned char>(group[i])) != p[i])
                return false;
        return true;
    };
    if (has_prefix("glass")) return {0.16, 0.20, 0.26};
    if (has_prefix("tire")) return {0.05, 0.05, 0.06};
    if (has_prefix("light")) return {0.95, 0.92, 0.75};
    return kBodyColor;
}

}  // namespace

std::vector<uint8_t> uv_footprint(const Mesh& mesh, int height, int width) {
    if (height <= 0 || width <= 0)
        throw ArgumentError("uv_footprint: shape must be positive");
    std::vector<uint8_t> mask(static_cast<size_t>(height) * width, 0);
    for (const Face& f : mesh.faces) {
        if (!f.paintable) continue;
        for_each_face_texel(f, height, width, [&](int ty, int tx) {
            mask[static_cast<size_t>(ty) * width + tx] = 1;
        });
    }
    return mask;
}

TextureAtlas make_base_texture(int height, int width) {
    TextureAtlas atlas(height, width);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            atlas.at(y, x, 0) = kBodyColor.r;
            atlas.at(y, x, 1) = kBodyColor.g;
            atlas.at(y, x, 2) = kBodyColor.b;
        }
    }
    return atlas;
}

TextureAtlas make_base_texture(const Mesh& mesh, int height, int width) {
    TextureAtlas atlas = make_base_texture(height, width);
    for (const Face& f : mesh.faces) {
        if (f.paintable) continue;
        const Rgb color = group_color(f.group);
        // Paint the triangle's full UV bounding box: faces never share UV
        // cells, so this covers bilinear reads near the triangle edges too.
        const Vec2 a = f.uv[0], b = f.uv[1], c = f.uv[2];
        double u_lo = std::min({a.x, b.x, c.x});
        double u_hi = std::max({a.x, b.x, c.x});
        double v_lo = std::min({a.y, b.y, c.y});
        double v_hi = std::max({a.y, b.y, c.y});
        int tx0 = std::clamp(static_cast<int>(std::floor(u_lo * width - 0.5)), 0, width - 1);
        int tx1 = std::clamp(static_cast<int>(std::ceil(u_hi * width)), 0, width - 1);
        int ty0 = std::clamp(static_cast<int>(std::floor(v_lo * height - 0.5)), 0, height - 1);
        int ty1 = std::clamp(static_cast<int>(std::ceil(v_hi * height)), 0, height - 1);
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                atlas.at(ty, tx, 0) = color.r;
                atlas.at(ty, tx, 1) = color.g;
                atlas.at(ty, tx, 2) = color.b;
            }
        }
    }
    return atlas;
}

void save_texture_checkpoint(const std::string& path, const TextureAtlas& atlas,
                             const TextureMeta& meta) {
    Image img(atlas.height, atlas.width, 3);
    img.data = atlas.texels;
    write_pnm(path, img, 16);

    nlohmann::json j;
    j["height"] = atlas.height;
    j["width"] = atlas.width;
    j["seed"] = meta.seed;
    j["init_mode"] = to_string(meta.init_mode);
    j["step_count"] = meta.step_count;
    std::ofstream out(path + ".json");
    if (!out) throw IoError("cannot write sidecar: " + path + ".json");
    out << j.dump(2) << "\n";
}

TextureAtlas load_texture_checkpoint(const std::string& path, TextureMeta* meta) {
    Image img = read_pnm(path);
    if (img.channels != 3)
        throw IoError("texture checkpoint must be RGB: " + path);
    TextureAtlas atlas(img.height, img.width);
    atlas.texels = img.data;

    std::ifstream in(path + ".json");
    if (!in) throw IoError("missing sidecar: " + path + ".json");
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("height").get<int>() != atlas.height ||
        j.at("width").get<int>() != atlas.width)
        throw IoError("sidecar shape disagrees with image: " + path);
    if (meta != nullptr) {
        meta->seed = j.at("seed").get<uint64_t>();
        meta->init_mode = init_mode_from_string(j.at("init_mode").get<std::string>());
        meta->step_count = j.at("step_count").get<int64_t>();
    }
    return atlas;
}

}  // namespace fca
