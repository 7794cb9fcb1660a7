#include "mtlpose/mesh.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mtlpose {

namespace {

// Point k of a ring with `count` segments. When count is a multiple of 4 the
// ring is built from its first quadrant with exact quarter-turn copies, so a
// 90 degree rotation about z permutes the vertices bit-exactly.
Eigen::Vector2d ring_point(int k, int count) {
    if (count % 4 != 0) {
        const double a = 2.0 * std::numbers::pi * k / count;
        return {std::cos(a), std::sin(a)};
    }
    const int quarter = count / 4;
    const int m = k % quarter;
    const double a = 2.0 * std::numbers::pi * m / count;
    Eigen::Vector2d p(m == 0 ? 1.0 : std::cos(a), m == 0 ? 0.0 : std::sin(a));
    for (int q = 0; q < k / quarter; ++q)
        p = Eigen::Vector2d(-p.y(), p.x());
    return p;
}

// Revolves a profile of (radius, z) points about the z axis. Profile points
// with zero radius collapse to a single pole vertex.
TriMesh revolve(const std::vector<Eigen::Vector2d>& profile, int segments, std::string name) {
    TriMesh mesh;
    mesh.name = std::move(name);
    std::vector<std::vector<int>> rings;
    for (const auto& rz : profile) {
        std::vector<int> ring;
        if (rz.x() == 0.0) {
            ring.assign(segments, static_cast<int>(mesh.vertices.size()));
            mesh.vertices.emplace_back(0.0, 0.0, rz.y());
        } else {
            for (int k = 0; k < segments; ++k) {
                ring.push_back(static_cast<int>(mesh.vertices.size()));
                const Eigen::Vector2d p = ring_point(k, segments) * rz.x();
                mesh.vertices.emplace_back(p.x(), p.y(), rz.y());
            }
        }
        rings.push_back(std::move(ring));
    }
    for (std::size_t r = 0; r + 1 < rings.size(); ++r) {
        const auto& a = rings[r];
        const auto& b = rings[r + 1];
        for (int k = 0; k < segments; ++k) {
            const int k1 = (k + 1) % segments;
            if (a[k] != a[k1]) mesh.triangles.push_back({a[k], a[k1], b[k1]});
            if (b[k] != b[k1]) mesh.triangles.push_back({a[k], b[k1], b[k]});
            if (a[k] == a[k1] && b[k] == b[k1])
                throw ConfigError("revolve: consecutive pole points");
        }
    }
    return mesh;
}

TriMesh make_prism(const std::vector<Eigen::Vector2d>& outline, double height, std::string name) {
    // Outline counter-clockwise; caps are fanned from vertex 0, which must see
    // every other outline vertex.
    TriMesh mesh;
    mesh.name = std::move(name);
    const int n = static_cast<int>(outline.size());
    for (const auto& p : outline) mesh.vertices.emplace_back(p.x(), p.y(), -height / 2);
    for (const auto& p : outline) mesh.vertices.emplace_back(p.x(), p.y(), height / 2);
    for (int i = 1; i + 1 < n; ++i) {
        mesh.triangles.push_back({0, i + 1, i});
        mesh.triangles.push_back({n, n + i, n + i + 1});
    }
    for (int i = 0; i < n; ++i) {
        const int j = (i + 1) % n;
        mesh.triangles.push_back({i, j, n + j});
        mesh.triangles.push_back({i, n + j, n + i});
    }
    return mesh;
}

double triangle_area(const TriMesh& m, const std::array<int, 3>& t) {
    return 0.5 * (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]).norm();
}

}  // namespace

std::string_view to_string(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::box: return "box";
        case PrimitiveKind::pyramid: return "pyramid";
        case PrimitiveKind::cylinder: return "cylinder";
        case PrimitiveKind::lshape: return "lshape";
        case PrimitiveKind::bowl: return "bowl";
    }
    return "box";
}

PrimitiveKind primitive_from_string(std::string_view name) {
    for (auto k : {PrimitiveKind::box, PrimitiveKind::pyramid, PrimitiveKind::cylinder,
                   PrimitiveKind::lshape, PrimitiveKind::bowl})
        if (name == to_string(k)) return k;
    throw ConfigError("unknown primitive '" + std::string(name) + "'");
}

SamplingKind default_sampling(PrimitiveKind kind) {
    switch (kind) {
        case PrimitiveKind::box: return SamplingKind::symmetric;
        case PrimitiveKind::cylinder:
        case PrimitiveKind::bowl: return SamplingKind::rotation_invariant;
        default: return SamplingKind::regular;
    }
}

TriMesh make_box(const Vec3& ext, std::string name) {
    TriMesh mesh;
    mesh.name = std::move(name);
    const Vec3 h = ext / 2;
    for (int i = 0; i < 8; ++i)
        mesh.vertices.emplace_back(i & 1 ? h.x() : -h.x(), i & 2 ? h.y() : -h.y(), i & 4 ? h.z() : -h.z());
    mesh.triangles = {{0, 2, 3}, {0, 3, 1},   // -z
                      {4, 5, 7}, {4, 7, 6},   // +z
                      {0, 1, 5}, {0, 5, 4},   // -y
                      {2, 6, 7}, {2, 7, 3},   // +y
                      {0, 4, 6}, {0, 6, 2},   // -x
                      {1, 3, 7}, {1, 7, 5}};  // +x
    return mesh;
}

TriMesh gen_primitive(PrimitiveKind kind, double scale, int tessellation) {
    if (!(scale > 0.0) || scale > kMaxMeshExtent)
        throw ConfigError("primitive scale must be in (0, 0.4] m");
    const bool curved = kind == PrimitiveKind::cylinder || kind == PrimitiveKind::bowl;
    if (curved && tessellation < 3)
        throw ConfigError("tessellation must be >= 3 for curved primitives");

    const double s = scale;
    TriMesh mesh;
    switch (kind) {
        case PrimitiveKind::box:
            // Three distinct extents: within the upper hemisphere only the 180 degree
            // turn about z maps views onto views.
            mesh = make_box(Vec3(0.8 * s, 0.6 * s, s), "box");
            break;
        case PrimitiveKind::pyramid: {
            // Rectangular base with an off-center apex: no rotational symmetry.
            mesh.name = "pyramid";
            mesh.vertices = {{-s / 2, -0.35 * s, -s / 2}, {s / 2, -0.35 * s, -s / 2},
                             {s / 2, 0.35 * s, -s / 2},   {-s / 2, 0.35 * s, -s / 2},
                             {0.2 * s, 0.12 * s, s / 2}};
            mesh.triangles = {{0, 2, 1}, {0, 3, 2}, {0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}};
            break;
        }
        case PrimitiveKind::cylinder:
            mesh = revolve({{0.0, -s / 2}, {0.35 * s, -s / 2}, {0.35 * s, s / 2}, {0.0, s / 2}},
                           tessellation, "cylinder");
            break;
        case PrimitiveKind::lshape: {
            // Unequal arms so the outline has no mirror or rotational symmetry.
            const double a = s / 2;
            std::vector<Eigen::Vector2d> outline = {{-a, -a}, {a, -a}, {a, -a + 0.35 * s},
                                                    {-a + 0.35 * s, -a + 0.35 * s},
                                                    {-a + 0.35 * s, -a + 0.7 * s}, {-a, -a + 0.7 * s}};
            // shift so the bounding box is centered
            for (auto& p : outline) p.y() += 0.15 * s;
            mesh = make_prism(outline, 0.4 * s, "lshape");
            break;
        }
        case PrimitiveKind::bowl: {
            // Spherical-cap shell with a wall: outer surface up to the rim, then
            // the inner surface back down to the inner bottom.
            const double r_out = s / 2;
            const double wall = 0.08 * s;
            const double r_in = r_out - wall;
            const double z_rim = s / 4;
            const int steps = 4;
            std::vector<Eigen::Vector2d> profile;
            for (int i = 0; i <= steps; ++i) {
                const double t = (std::numbers::pi / 2) * i / steps;
                profile.emplace_back(r_out * std::sin(t), z_rim - r_out * std::cos(t));
            }
            for (int i = steps; i >= 0; --i) {
                const double t = (std::numbers::pi / 2) * i / steps;
                profile.emplace_back(r_in * std::sin(t), z_rim - r_in * std::cos(t));
            }
            // flat rim: both rim rings exactly at z_rim
            profile[steps].y() = z_rim;
            profile[steps + 1].y() = z_rim;
            mesh = revolve(profile, tessellation, "bowl");
            // center the bowl vertically: z spans [z_rim - r_out, z_rim]
            for (auto& v : mesh.vertices) v.z() -= z_rim - r_out / 2;
            break;
        }
    }
    validate(mesh);
    return mesh;
}

Vec3 extents(const TriMesh& mesh) {
    if (mesh.vertices.empty()) return Vec3::Zero();
    Vec3 lo = mesh.vertices.front(), hi = lo;
    for (const auto& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return hi - lo;
}

void validate(const TriMesh& mesh) {
    const int nv = static_cast<int>(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        for (int idx : t)
            if (idx < 0 || idx >= nv)
                throw ConfigError("triangle " + std::to_string(i) + " has out-of-range index");
        if (!(triangle_area(mesh, t) > 1e-12))
            throw ConfigError("triangle " + std::to_string(i) + " is degenerate");
    }
    if (extents(mesh).maxCoeff() > kMaxMeshExtent + 1e-12)
        throw ConfigError("mesh '" + mesh.name + "' exceeds the 0.4 m bounding cube");
}

TriMesh parse_mesh(std::string_view text, std::string name) {
    TriMesh mesh;
    mesh.name = std::move(name);
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    struct Face {
        std::vector<long> idx;
        std::size_t line;
    };
    std::vector<Face> faces;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z))
                throw ParseError("malformed vertex: '" + line + "'", line_no);
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            Face f{{}, line_no};
            std::string tok;
            while (ls >> tok) {
                const std::string head = tok.substr(0, tok.find('/'));
                long v = 0;
                const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), v);
                if (ec != std::errc{} || ptr != head.data() + head.size())
                    throw ParseError("malformed face index '" + tok + "'", line_no);
                f.idx.push_back(v);
            }
            if (f.idx.size() < 3)
                throw ParseError("face needs at least 3 vertices", line_no);
            faces.push_back(std::move(f));
        }
    }
    const long nv = static_cast<long>(mesh.vertices.size());
    for (const auto& f : faces) {
        for (long v : f.idx)
            if (v < 1 || v > nv)
                throw ParseError("face index " + std::to_string(v) + " out of range (1.." +
                                     std::to_string(nv) + ")",
                                 f.line);
        for (std::size_t i = 1; i + 1 < f.idx.size(); ++i)
            mesh.triangles.push_back({static_cast<int>(f.idx[0] - 1), static_cast<int>(f.idx[i] - 1),
                                      static_cast<int>(f.idx[i + 1] - 1)});
    }
    validate(mesh);
    return mesh;
}

TriMesh parse_mesh_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mesh file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_mesh(buf.str(), path.stem().string());
}

std::string serialize_mesh(const TriMesh& mesh) {
    std::ostringstream out;
    out.precision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    return out.str();
}

void save_mesh_file(const TriMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write mesh file " + path.string());
    out << serialize_mesh(mesh);
}

}  // namespace mtlpose
