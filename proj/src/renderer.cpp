#include "fca/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "fca/errors.hpp"

namespace fca {

namespace {

struct CameraBasis {
    Vec3 eye, right, down, forward;
    double focal = 0.0;
};

CameraBasis camera_basis(const Mesh& mesh, const CameraPose& pose) {
    if (!(pose.distance > kNearPlane))
        throw RenderError("degenerate pose: centroid at or behind the near plane");
    if (!(pose.fov_deg > 0.0 && pose.fov_deg < 180.0))
        throw RenderError("fov must lie in (0, 180) degrees");
    if (pose.image_h <= 0 || pose.image_w <= 0)
        throw RenderError("image size must be positive");

    const double deg = 3.14159265358979323846 / 180.0;
    const double az = pose.azimuth_deg * deg;
    const double el = pose.elevation_deg * deg;

    CameraBasis cam;
    const Vec3 center = mesh.centroid();
    const Vec3 offset{std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                      std::sin(el)};
    cam.eye = center + pose.distance * offset;
    cam.forward = normalized(center - cam.eye);

    // Near straight-down views the world-up hint degenerates; fall back to
    // +x so the vehicle length axis stays aligned with the image vertical.
    Vec3 up_hint{0.0, 0.0, 1.0};
    if (std::abs(dot(cam.forward, up_hint)) > 0.999) up_hint = Vec3{1.0, 0.0, 0.0};
    cam.right = normalized(cross(cam.forward, up_hint));
    cam.down = cross(cam.forward, cam.right);
    cam.focal = (pose.image_h / 2.0) / std::tan(0.5 * pose.fov_deg * deg);
    return cam;
}

inline double edge_fn(double ax, double ay, double bx, double by, double px,
                      double py) {
    return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

}  // namespace

std::vector<ProjectedVertex> project(const Mesh& mesh, const CameraPose& pose) {
    const CameraBasis cam = camera_basis(mesh, pose);
    const double cx = pose.image_w / 2.0;
    const double cy = pose.image_h / 2.0;

    std::vector<ProjectedVertex> out(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3 rel = mesh.vertices[i] - cam.eye;
        const double X = dot(rel, cam.right);
        const double Y = dot(rel, cam.down);
        const double Z = dot(rel, cam.forward);
        ProjectedVertex& p = out[i];
        p.depth = Z;
        p.behind = Z <= kNearPlane;
        if (!p.behind) {
            p.x = cx + cam.focal * X / Z;
            p.y = cy + cam.focal * Y / Z;
        }
    }
    return out;
}

RenderOutput rasterize(const Mesh& mesh, const CameraPose& pose,
                       const TextureAtlas& texture) {
    const std::vector<ProjectedVertex> pv = project(mesh, pose);
    const int H = pose.image_h;
    const int W = pose.image_w;
    const double inf = std::numeric_limits<double>::infinity();

    RenderOutput out;
    out.image = Image(H, W, 3, 0.0);
    out.silhouette = BoolMask(H, W, false);
    out.depth = Image(H, W, 1, inf);
    out.atlas_height = texture.height;
    out.atlas_width = texture.width;
    out.pixel_texel_weights.assign(static_cast<size_t>(H) * W, {});

    // Pass 1: z-buffer with perspective-correct UV per pixel.
    std::vector<Vec2> pixel_uv(static_cast<size_t>(H) * W);
    for (const Face& f : mesh.faces) {
        const ProjectedVertex& a = pv[static_cast<size_t>(f.v[0])];
        const ProjectedVertex& b = pv[static_cast<size_t>(f.v[1])];
        const ProjectedVertex& c = pv[static_cast<size_t>(f.v[2])];
        if (a.behind || b.behind || c.behind) continue;

        const double area2 = edge_fn(a.x, a.y, b.x, b.y, c.x, c.y);
        if (area2 == 0.0) continue;
        const double inv_area = 1.0 / area2;

        int x0 = std::max(0, static_cast<int>(std::floor(std::min({a.x, b.x, c.x}) - 0.5)));
        int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max({a.x, b.x, c.x}) - 0.5)));
        int y0 = std::max(0, static_cast<int>(std::floor(std::min({a.y, b.y, c.y}) - 0.5)));
        int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max({a.y, b.y, c.y}) - 0.5)));

        const double iza = 1.0 / a.depth, izb = 1.0 / b.depth, izc = 1.0 / c.depth;
        for (int py = y0; py <= y1; ++py) {
            for (int px = x0; px <= x1; ++px) {
                const double sx = px + 0.5, sy = py + 0.5;
                // Signed barycentric, normalized by the (signed) area so the
                // inside test is orientation-independent.
                double l0 = edge_fn(b.x, b.y, c.x, c.y, sx, sy) * inv_area;
                double l1 = edge_fn(c.x, c.y, a.x, a.y, sx, sy) * inv_area;
                double l2 = edge_fn(a.x, a.y, b.x, b.y, sx, sy) * inv_area;
                if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;

                const double inv_z = l0 * iza + l1 * izb + l2 * izc;
                const double z = 1.0 / inv_z;
                const size_t pi = static_cast<size_t>(py) * W + px;
                if (z >= out.depth.data[pi]) continue;  // strict: ties keep lower face

                out.depth.data[pi] = z;
                out.silhouette.data[pi] = 1;
                const double u = (l0 * iza * f.uv[0].x + l1 * izb * f.uv[1].x +
                                  l2 * izc * f.uv[2].x) * z;
                const double v = (l0 * iza * f.uv[0].y + l1 * izb * f.uv[1].y +
                                  l2 * izc * f.uv[2].y) * z;
                pixel_uv[pi] = Vec2{u, v};
            }
        }
    }

    // Pass 2: bilinear atlas sampling with clamp-to-edge, recording the
    // footprint for the backward pass.
    const int TH = texture.height, TW = texture.width;
    for (int py = 0; py < H; ++py) {
        for (int px = 0; px < W; ++px) {
            const size_t pi = static_cast<size_t>(py) * W + px;
            if (!out.silhouette.data[pi]) continue;
            const Vec2 uv = pixel_uv[pi];

            const double fx = uv.x * TW - 0.5;
            const double fy = uv.y * TH - 0.5;
            const int ix = static_cast<int>(std::floor(fx));
            const int iy = static_cast<int>(std::floor(fy));
            const double wx = fx - ix;
            const double wy = fy - iy;
            const int x0 = std::clamp(ix, 0, TW - 1);
            const int x1 = std::clamp(ix + 1, 0, TW - 1);
            const int yy0 = std::clamp(iy, 0, TH - 1);
            const int yy1 = std::clamp(iy + 1, 0, TH - 1);

            auto& slots = out.pixel_texel_weights[pi];
            slots[0] = {yy0 * TW + x0, (1.0 - wy) * (1.0 - wx)};
            slots[1] = {yy0 * TW + x1, (1.0 - wy) * wx};
            slots[2] = {yy1 * TW + x0, wy * (1.0 - wx)};
            slots[3] = {yy1 * TW + x1, wy * wx};

            for (int ch = 0; ch < 3; ++ch) {
                double acc = 0.0;
                for (const TexelWeight& tw : slots)
                    acc += tw.weight * texture.texels[static_cast<size_t>(tw.index) * 3 + ch];
                out.image.data[pi * 3 + ch] = acc;
            }
        }
    }
    return out;
}

Image backward_to_texture(const Image& output_grad, const RenderOutput& render) {
    if (output_grad.height != render.image.height ||
        output_grad.width != render.image.width || output_grad.channels != 3)
        throw ArgumentError("backward_to_texture: gradient shape mismatch");

    Image tg(render.atlas_height, render.atlas_width, 3, 0.0);
    const size_t pixels = render.pixel_texel_weights.size();
    for (size_t pi = 0; pi < pixels; ++pi) {
        if (!render.silhouette.data[pi]) continue;
        const auto& slots = render.pixel_texel_weights[pi];
        for (const TexelWeight& tw : slots) {
            if (tw.index < 0) continue;
            for (int ch = 0; ch < 3; ++ch)
                tg.data[static_cast<size_t>(tw.index) * 3 + ch] +=
                    tw.weight * output_grad.data[pi * 3 + ch];
        }
    }
    return tg;
}

}  // namespace fca
