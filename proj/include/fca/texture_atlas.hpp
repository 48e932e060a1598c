// texture_atlas.hpp — the optimization variable: a 2D RGB texel grid in
// [0,1] plus the paintable-texel mask derived from the mesh UV layout.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fca/mesh.hpp"

namespace fca {

enum class InitMode { Random, Zero, Basic };

const char* to_string(InitMode mode);
InitMode init_mode_from_string(const std::string& s);

struct TextureAtlas {
    int height = 0;
    int width = 0;
    std::vector<double> texels;      // H×W×3, row-major, values in [0,1]
    std::vector<uint8_t> paintable;  // H×W; 1 = the attack may modify it

    TextureAtlas() = default;
    TextureAtlas(int h, int w, double fill = 0.0)
        : height(h), width(w),
          texels(static_cast<size_t>(h) * w * 3, fill),
          paintable(static_cast<size_t>(h) * w, 1) {}

    double& at(int y, int x, int c) {
        return texels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    double at(int y, int x, int c) const {
        return texels[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    bool texel_paintable(int y, int x) const {
        return paintable[static_cast<size_t>(y) * width + x] != 0;
    }
    size_t texel_count() const { return static_cast<size_t>(height) * width; }
};

// Random: i.i.d. uniform [0,1] from the seeded stream. Zero: all zeros.
// Basic: copy of base (required). The paintable mask starts all-true; the
// caller overwrites it with the mesh footprint before optimizing.
TextureAtlas init_texture(InitMode mode, int height, int width, uint64_t seed,
                          const TextureAtlas* base = nullptr);

// Paintable-texel mask: a texel is paintable iff at least one supersample
// point (4x4 per texel, cell centers) inside a paintable face's UV triangle
// lands in that texel's cell. Edge-inclusive point-in-triangle test.
std::vector<uint8_t> uv_footprint(const Mesh& mesh, int height, int width);

// The reference car's factory paint. The solid overload fills every texel
// with the body color. The mesh-aware overload additionally paints the UV
// regions of non-paintable face groups (glass/tire/light prefixes) with
// their material colors so the plain car looks like a car, not a red blob.
// Used as the "plain" texture for detector training and as the base of the
// basic init mode.
TextureAtlas make_base_texture(int height, int width);
TextureAtlas make_base_texture(const Mesh& mesh, int height, int width);

// Checkpoint: 16-bit PPM next to a JSON sidecar ("<path>.json") carrying
// shape, seed, init mode and step count.
struct TextureMeta {
    uint64_t seed = 0;
    InitMode init_mode = InitMode::Random;
    int64_t step_count = 0;
};
void save_texture_checkpoint(const std::string& path, const TextureAtlas& atlas,
                             const TextureMeta& meta);
TextureAtlas load_texture_checkpoint(const std::string& path,
                                     TextureMeta* meta = nullptr);

}  // namespace fca
