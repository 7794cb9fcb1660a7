#pragma once

// Viewpoint sampling on a subdivided icosahedron.

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "mtlpose/geometry.hpp"

namespace mtlpose {

struct Icosphere {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    int level = 0;
};

enum class SamplingKind { regular, symmetric, rotation_invariant };

std::string_view to_string(SamplingKind kind);
SamplingKind sampling_kind_from_string(std::string_view name);

struct View {
    Vec3 vertex;  // unit direction from the object towards the camera
    double roll = 0.0;  // radians
};

struct ViewSet {
    std::vector<View> views;
    SamplingKind kind = SamplingKind::regular;
};

// In-plane rotation sweep in degrees, both ends inclusive.
struct RollSweep {
    double start_deg = -45.0;
    double end_deg = 45.0;
    double stride_deg = 15.0;
};

inline constexpr int kMaxIcosphereLevel = 6;
inline constexpr double kHemisphereTol = 1e-9;

// Regular icosahedron with one vertex on the +z pole, subdivided `level` times.
Icosphere build_icosphere(int level);

// Azimuth in [0, 2 pi); vertices on the xz half-plane snap to exactly 0 or pi.
double azimuth(const Vec3& v);

// Vertices with z >= -1e-9, sorted by z descending then azimuth ascending.
std::vector<Vec3> hemisphere(const Icosphere& sphere);

ViewSet inplane_sweep(const std::vector<Vec3>& vertices, double start_deg, double end_deg,
                      double stride_deg);

// Training viewpoints for an object of the given symmetry type.
ViewSet sampling_for(SamplingKind kind, int level, const RollSweep& sweep = {});

// Held-out viewpoints: vertices of sampling_for(kind, level + 1) that are not
// present at `level`, with the same roll rule.
ViewSet test_views_for(SamplingKind kind, int level, const RollSweep& sweep = {});

}  // namespace mtlpose
