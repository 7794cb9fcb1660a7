#pragma once

// Triangle meshes: procedural test objects and a minimal text mesh reader.

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mtlpose/geometry.hpp"
#include "mtlpose/viewsphere.hpp"

namespace mtlpose {

inline constexpr double kMaxMeshExtent = 0.4;  // meters, edge of the patch bounding cube

struct TriMesh {
    std::vector<Vec3> vertices;  // meters
    std::vector<std::array<int, 3>> triangles;
    std::string name;
};

enum class PrimitiveKind { box, pyramid, cylinder, lshape, bowl };

std::string_view to_string(PrimitiveKind kind);
PrimitiveKind primitive_from_string(std::string_view name);

// Symmetry class of each primitive, used to pick its viewpoint sampling.
// The box has a 180 degree symmetry about z; cylinder and bowl are
// surfaces of revolution.
SamplingKind default_sampling(PrimitiveKind kind);

// Axis-aligned box centered at the origin.
TriMesh make_box(const Vec3& extents, std::string name = "box");

// Closed, origin-centered primitive whose largest extent equals `scale`.
// `tessellation` is the segment count around curved kinds.
TriMesh gen_primitive(PrimitiveKind kind, double scale, int tessellation = 16);

// Throws ConfigError on out-of-range indices, degenerate triangles or an
// extent beyond the bounding cube.
void validate(const TriMesh& mesh);

Vec3 extents(const TriMesh& mesh);

// "v x y z" / "f i j k ..." subset; faces are fan-triangulated.
TriMesh parse_mesh(std::string_view text, std::string name = "mesh");
TriMesh parse_mesh_file(const std::filesystem::path& path);

std::string serialize_mesh(const TriMesh& mesh);
void save_mesh_file(const TriMesh& mesh, const std::filesystem::path& path);

}  // namespace mtlpose
