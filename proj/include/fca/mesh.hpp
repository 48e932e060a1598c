// mesh.hpp — triangle mesh with per-face-corner UVs and a per-face
// paintable flag.
//
// Conventions:
// - Triangle-only; indices are 0-based in memory (OBJ I/O converts from
//   1-based).
// - UV coordinates live in [0,1]^2; u maps to atlas columns and v to atlas
//   rows directly (row index grows with v, no flip).
// - Faces whose group name starts with "glass", "tire" or "light"
//   (case-insensitive) are not paintable; everything else is.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "fca/vec.hpp"

namespace fca {

struct Face {
    std::array<int, 3> v{};       // vertex indices
    std::array<Vec2, 3> uv{};     // per-corner UV
    bool paintable = true;
    std::string group;            // OBJ group name ("" = default group)
};

struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<Face> faces;

    Vec3 centroid() const;

    // Throws ValidationError on out-of-range indices, UVs outside [0,1],
    // or a mesh with no paintable face.
    void validate() const;
};

bool operator==(const Face& a, const Face& b);
bool operator==(const Mesh& a, const Mesh& b);

// True for group names the paint constraint excludes (glass, tire, lights).
bool group_is_paintable(const std::string& group);

// OBJ subset reader: `v x y z`, `vt u v`, `f a/ta b/tb c/tc` (1-based,
// triangles only), `g name`. Blank lines and '#' comments are skipped;
// common unsupported directives (vn, s, o, mtllib, usemtl) are ignored.
// Parse failures name the offending line number.
Mesh load_mesh(const std::string& path);

// Inverse of load_mesh for the supported subset; load_mesh(write_mesh(M))
// reproduces M field-for-field.
void write_mesh(const Mesh& mesh, const std::string& path);

// Built-in vehicle: a blocky sedan with octagonal wheels, glass cabin
// sides and front light patches. ~160 triangles, length 2 model units
// along +x, width along y, up is +z. Each triangle gets its own inset
// cell in the UV atlas so paintable and frozen texels never share a
// bilinear footprint.
Mesh make_reference_car();

}  // namespace fca
