// renderer.hpp — differentiable rasterizer: z-buffered triangle
// rasterization with perspective-correct UV interpolation and bilinear
// atlas sampling.
//
// The rendered color of a covered pixel is exactly the bilinear
// combination of at most 4 texels (no lighting, no antialiasing), so the
// pixel→texel map is a sparse linear operator. rasterize() records it and
// backward_to_texture() applies its transpose to an output gradient.
//
// Camera convention is documented in camera.hpp. Faces with any vertex at
// or behind the near plane (z <= 0.01) are culled, not clipped. Depth ties
// resolve to the lower face index.
#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include "fca/camera.hpp"
#include "fca/image.hpp"
#include "fca/mesh.hpp"
#include "fca/texture_atlas.hpp"

namespace fca {

constexpr double kNearPlane = 0.01;

struct ProjectedVertex {
    double x = 0.0;      // pixel coordinates
    double y = 0.0;
    double depth = 0.0;  // camera-space z, positive in front
    bool behind = false; // at or behind the near plane
};

// Perspective projection of all vertices with look-at at the mesh centroid.
// Throws RenderError for degenerate poses (distance <= near plane, bad fov).
std::vector<ProjectedVertex> project(const Mesh& mesh, const CameraPose& pose);

struct TexelWeight {
    int32_t index = -1;  // flat texel index (row*width + col), -1 = unused
    double weight = 0.0;
};

struct RenderOutput {
    Image image;          // H×W×3, background pixels are 0
    BoolMask silhouette;  // true where a mesh fragment is front-most
    Image depth;          // H×W×1, +inf where empty
    int atlas_height = 0;
    int atlas_width = 0;
    // Per pixel: the bilinear footprint of its texture sample. Weights are
    // nonnegative and sum to 1 on covered pixels (duplicate indices appear
    // where clamp-to-edge collapses the footprint).
    std::vector<std::array<TexelWeight, 4>> pixel_texel_weights;

    bool covered(int y, int x) const { return silhouette.at(y, x) != 0; }
};

RenderOutput rasterize(const Mesh& mesh, const CameraPose& pose,
                       const TextureAtlas& texture);

// Transpose of the recorded pixel→texel map: scatter-adds each covered
// pixel's gradient into its footprint texels. Returns an atlas-shaped
// H_T×W_T×3 gradient image. The caller masks non-paintable texels.
Image backward_to_texture(const Image& output_grad, const RenderOutput& render);

}  // namespace fca
