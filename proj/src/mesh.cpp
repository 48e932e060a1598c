#include "fca/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fca/errors.hpp"

namespace fca {

Vec3 Mesh::centroid() const {
    Vec3 c;
    if (vertices.empty()) return c;
    for (const Vec3& v : vertices) c = c + v;
    return (1.0 / static_cast<double>(vertices.size())) * c;
}

void Mesh::validate() const {
    const int n = static_cast<int>(vertices.size());
    bool any_paintable = false;
    for (size_t i = 0; i < faces.size(); ++i) {
        const Face& f = faces[i];
        for (int k = 0; k < 3; ++k) {
            if (f.v[k] < 0 || f.v[k] >= n)
                throw ValidationError("face " + std::to_string(i) +
                                      " references vertex index " +
                                      std::to_string(f.v[k]) + " of " +
                                      std::to_string(n));
            const Vec2& uv = f.uv[k];
            if (!(uv.x >= 0.0 && uv.x <= 1.0 && uv.y >= 0.0 && uv.y <= 1.0))
                throw ValidationError("face " + std::to_string(i) +
                                      " has UV outside [0,1]");
        }
        any_paintable = any_paintable || f.paintable;
    }
    if (faces.empty()) throw ValidationError("mesh has no faces");
    if (!any_paintable) throw ValidationError("mesh has no paintable face");
}

bool operator==(const Face& a, const Face& b) {
    return a.v == b.v && a.uv == b.uv && a.paintable == b.paintable &&
           a.group == b.group;
}

bool operator==(const Mesh& a, const Mesh& b) {
    return a.vertices == b.vertices && a.faces == b.faces;
}

bool group_is_paintable(const std::string& group) {
    static const char* kExcluded[] = {"glass", "tire", "light"};
    std::string lower(group);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    for (const char* prefix : kExcluded)
        if (lower.rfind(prefix, 0) == 0) return false;
    return true;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line_no,
                             const std::string& what) {
    throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
}

// "a/ta" -> pair of 1-based indices. Triples like a/ta/na are rejected:
// normals are outside the supported subset.
std::pair<int, int> parse_corner(const std::string& token,
                                 const std::string& path, int line_no) {
    size_t slash = token.find('/');
    if (slash == std::string::npos || slash + 1 >= token.size())
        parse_fail(path, line_no, "face corner must be v/vt, got '" + token + "'");
    if (token.find('/', slash + 1) != std::string::npos)
        parse_fail(path, line_no, "face corner with normal index is unsupported");
    try {
        int v = std::stoi(token.substr(0, slash));
        int vt = std::stoi(token.substr(slash + 1));
        return {v, vt};
    } catch (const std::exception&) {
        parse_fail(path, line_no, "bad index in face corner '" + token + "'");
    }
}

}  // namespace

Mesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh file: " + path);

    Mesh mesh;
    std::vector<Vec2> uvs;
    std::string current_group;
    std::string line;
    int line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string key;
        if (!(ss >> key)) continue;  // blank line
        if (key[0] == '#') continue;

        if (key == "v") {
            Vec3 p;
            if (!(ss >> p.x >> p.y >> p.z))
                parse_fail(path, line_no, "vertex needs 3 coordinates");
            mesh.vertices.push_back(p);
        } else if (key == "vt") {
            Vec2 t;
            if (!(ss >> t.x >> t.y))
                parse_fail(path, line_no, "texture coordinate needs 2 values");
            uvs.push_back(t);
        } else if (key == "f") {
            std::array<std::string, 3> tok;
            if (!(ss >> tok[0] >> tok[1] >> tok[2]))
                parse_fail(path, line_no, "face needs 3 corners");
            std::string extra;
            if (ss >> extra)
                parse_fail(path, line_no, "only triangle faces are supported");
            Face f;
            f.group = current_group;
            f.paintable = group_is_paintable(current_group);
            for (int k = 0; k < 3; ++k) {
                auto [vi, ti] = parse_corner(tok[k], path, line_no);
                if (vi < 1 || vi > static_cast<int>(mesh.vertices.size()))
                    throw ValidationError(path + ":" + std::to_string(line_no) +
                                          ": vertex index " + std::to_string(vi) +
                                          " out of range");
                if (ti < 1 || ti > static_cast<int>(uvs.size()))
                    throw ValidationError(path + ":" + std::to_string(line_no) +
                                          ": texture index " + std::to_string(ti) +
                                          " out of range");
                f.v[k] = vi - 1;
                f.uv[k] = uvs[static_cast<size_t>(ti - 1)];
            }
            mesh.faces.push_back(std::move(f));
        } else if (key == "g") {
            std::string name;
            ss >> name;  // empty name resets to the default group
            current_group = name;
        } else if (key == "vn" || key == "s" || key == "o" || key == "mtllib" ||
                   key == "usemtl") {
            // outside the subset, harmless to skip
        } else {
            parse_fail(path, line_no, "unsupported directive '" + key + "'");
        }
    }

    mesh.validate();
    return mesh;
}

void write_mesh(const Mesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.precision(17);

    for (const Vec3& v : mesh.vertices)
        out << "v " << v.x << " " << v.y << " " << v.z << "\n";

    // One vt per face corner, in face order; simple and exact.
    for (const Face& f : mesh.faces)
        for (const Vec2& uv : f.uv) out << "vt " << uv.x << " " << uv.y << "\n";

    std::string current_group;
    bool first = true;
    int vt = 1;
    for (const Face& f : mesh.faces) {
        if (first || f.group != current_group) {
            out << "g " << f.group << "\n";
            current_group = f.group;
            first = false;
        }
        out << "f";
        for (int k = 0; k < 3; ++k) {
            out << " " << (f.v[k] + 1) << "/" << vt;
            ++vt;
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

// Assigns each face its own inset triangle inside a grid cell of the unit
// UV square. cell_margin is the inset fraction on each side.
void pack_uvs_per_face(Mesh& mesh, double cell_margin = 0.15) {
    const int n = static_cast<int>(mesh.faces.size());
    if (n == 0) return;
    const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const double cell = 1.0 / grid;
    for (int i = 0; i < n; ++i) {
        const int cx = i % grid;
        const int cy = i / grid;
        const double x0 = cx * cell + cell_margin * cell;
        const double y0 = cy * cell + cell_margin * cell;
        const double x1 = (cx + 1) * cell - cell_margin * cell;
        const double y1 = (cy + 1) * cell - cell_margin * cell;
        mesh.faces[i].uv = {Vec2{x0, y0}, Vec2{x1, y0}, Vec2{x0, y1}};
    }
}

struct CarBuilder {
    Mesh mesh;

    int vtx(double x, double y, double z) {
        mesh.vertices.push_back({x, y, z});
        return static_cast<int>(mesh.vertices.size()) - 1;
    }

    void tri(int a, int b, int c, const std::string& group) {
        Face f;
        f.v = {a, b, c};
        f.group = group;
        f.paintable = group_is_paintable(group);
        mesh.faces.push_back(std::move(f));
    }

    void quad(int a, int b, int c, int d, const std::string& group) {
        tri(a, b, c, group);
        tri(a, c, d, group);
    }

    // Axis-aligned box given min/max corners; all six sides.
    void box(Vec3 lo, Vec3 hi, const std::string& group) {
        int v000 = vtx(lo.x, lo.y, lo.z), v100 = vtx(hi.x, lo.y, lo.z);
        int v010 = vtx(lo.x, hi.y, lo.z), v110 = vtx(hi.x, hi.y, lo.z);
        int v001 = vtx(lo.x, lo.y, hi.z), v101 = vtx(hi.x, lo.y, hi.z);
        int v011 = vtx(lo.x, hi.y, hi.z), v111 = vtx(hi.x, hi.y, hi.z);
        quad(v000, v010, v110, v100, group);  // bottom
        quad(v001, v101, v111, v011, group);  // top
        quad(v000, v100, v101, v001, group);  // y = lo
        quad(v010, v011, v111, v110, group);  // y = hi
        quad(v000, v001, v011, v010, group);  // x = lo
        quad(v100, v110, v111, v101, group);  // x = hi
    }

    // Octagonal prism with axis along y: wheel at (cx, *, cz).
    void wheel(double cx, double y0, double y1, double cz, double radius) {
        const int kSides = 8;
        std::vector<int> inner(kSides), outer(kSides);
        for (int i = 0; i < kSides; ++i) {
            double a = (i + 0.5) * (2.0 * 3.14159265358979323846 / kSides);
            double x = cx + radius * std::cos(a);
            double z = cz + radius * std::sin(a);
            inner[i] = vtx(x, y0, z);
            outer[i] = vtx(x, y1, z);
        }
        int c0 = vtx(cx, y0, cz);
        int c1 = vtx(cx, y1, cz);
        for (int i = 0; i < kSides; ++i) {
            int j = (i + 1) % kSides;
            quad(inner[i], inner[j], outer[j], outer[i], "tire");
            tri(c0, inner[j], inner[i], "tire");
            tri(c1, outer[i], outer[j], "tire");
        }
    }
};

}  // namespace

Mesh make_reference_car() {
    CarBuilder b;

    // Lower body shell.
    b.box({-1.0, -0.45, 0.12}, {1.0, 0.45, 0.45}, "body");

    // Cabin: roof and front/rear slopes are body, the four walls are glass.
    {
        const double x0 = -0.55, x1 = 0.42, y0 = -0.36, y1 = 0.36;
        const double z0 = 0.45, z1 = 0.74;
        int a0 = b.vtx(x0, y0, z0), a1 = b.vtx(x1, y0, z0);
        int a2 = b.vtx(x1, y1, z0), a3 = b.vtx(x0, y1, z0);
        // roof is slightly shorter than the base so the walls lean inward
        const double rx0 = -0.48, rx1 = 0.30, ry = 0.30;
        int t0 = b.vtx(rx0, -ry, z1), t1 = b.vtx(rx1, -ry, z1);
        int t2 = b.vtx(rx1, ry, z1), t3 = b.vtx(rx0, ry, z1);
        b.quad(t0, t1, t2, t3, "body");               // roof
        b.quad(a0, a1, t1, t0, "glass");              // left wall
        b.quad(a2, a3, t3, t2, "glass");              // right wall
        b.quad(a1, a2, t2, t1, "glass");              // windshield
        b.quad(a3, a0, t0, t3, "glass");              // rear window
    }

    // Hood lip and trunk lip give the silhouette a step at bumper height.
    b.box({0.78, -0.40, 0.45}, {1.0, 0.40, 0.52}, "body");
    b.box({-1.0, -0.40, 0.45}, {-0.82, 0.40, 0.50}, "body");

    // Headlight patches on the front face, slightly proud of the body.
    {
        const double x = 1.001;
        int h0 = b.vtx(x, -0.38, 0.28), h1 = b.vtx(x, -0.20, 0.28);
        int h2 = b.vtx(x, -0.20, 0.40), h3 = b.vtx(x, -0.38, 0.40);
        b.quad(h0, h1, h2, h3, "light_left");
        int g0 = b.vtx(x, 0.20, 0.28), g1 = b.vtx(x, 0.38, 0.28);
        int g2 = b.vtx(x, 0.38, 0.40), g3 = b.vtx(x, 0.20, 0.40);
        b.quad(g0, g1, g2, g3, "light_right");
    }

    // Four wheels; they reach z=0 so the car "stands" on the ground plane.
    const double r = 0.16;
    b.wheel(0.60, -0.50, -0.36, r, r);
    b.wheel(0.60, 0.36, 0.50, r, r);
    b.wheel(-0.60, -0.50, -0.36, r, r);
    b.wheel(-0.60, 0.36, 0.50, r, r);

    pack_uvs_per_face(b.mesh);
    b.mesh.validate();
    return b.mesh;
}

}  // namespace fca
