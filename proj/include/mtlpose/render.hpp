#pragma once

// Software z-buffer rasterizer producing normalized depth patches.

#include <Eigen/Core>

#include "mtlpose/geometry.hpp"
#include "mtlpose/mesh.hpp"
#include "mtlpose/viewsphere.hpp"

namespace mtlpose {

struct RenderConfig {
    int patch_size = 64;         // pixels
    double camera_distance = 0.6;  // meters, camera to object center
    double cube_half = 0.2;      // meters, half edge of the clipping cube
    double focal = 0.0;          // pixels; 0 selects 1.5 * patch_size

    double focal_px() const { return focal > 0.0 ? focal : 1.5 * patch_size; }
    void validate() const;
};

using PatchArray = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// n x n depth values in [0, 1]; background pixels are exactly 1.
struct DepthPatch {
    PatchArray pixels;
    MaskArray mask;  // true where a surface was hit

    DepthPatch() = default;
    explicit DepthPatch(int n) : pixels(PatchArray::Ones(n, n)), mask(MaskArray::Constant(n, n, false)) {}

    int size() const { return static_cast<int>(pixels.rows()); }
    bool operator==(const DepthPatch& o) const {
        return pixels.rows() == o.pixels.rows() && pixels.cols() == o.pixels.cols() &&
               (pixels == o.pixels).all() && (mask == o.mask).all();
    }
};

struct RenderResult {
    DepthPatch patch;
    bool outside_view = false;  // nothing of the mesh landed in the patch
};

// Renders from an explicit camera; `rotation` columns are the camera axes in
// object coordinates. Depth is normalized around cfg.camera_distance.
RenderResult rasterize_camera(const TriMesh& mesh, const Vec3& eye, const Mat3& rotation,
                              const RenderConfig& cfg);

// Camera at camera_distance * view.vertex, aimed at the origin and rolled.
RenderResult rasterize(const TriMesh& mesh, const View& view, const RenderConfig& cfg);

double occupancy_fraction(const DepthPatch& patch);

}  // namespace mtlpose
