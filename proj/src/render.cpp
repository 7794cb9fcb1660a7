#include "mtlpose/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace mtlpose {

namespace {

constexpr int kSubpixelBits = 8;
constexpr std::int64_t kSubpixel = 1 << kSubpixelBits;
constexpr double kNearPlane = 1e-3;
constexpr double kMaxScreenCoord = 1e6;

struct ScreenVertex {
    std::int64_t x = 0, y = 0;  // fixed point, y grows downwards
    double inv_depth = 0.0;
    bool valid = false;
};

std::int64_t edge(const ScreenVertex& a, const ScreenVertex& b, std::int64_t px, std::int64_t py) {
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

bool top_left(const ScreenVertex& a, const ScreenVertex& b) {
    const std::int64_t dx = b.x - a.x, dy = b.y - a.y;
    return dy < 0 || (dy == 0 && dx > 0);
}

}  // namespace

void RenderConfig::validate() const {
    if (patch_size < 8) throw ConfigError("patch_size must be >= 8");
    if (!(cube_half > 0.0)) throw ConfigError("cube_half must be positive");
    if (!(camera_distance > cube_half)) throw ConfigError("camera_distance must exceed cube_half");
}

RenderResult rasterize_camera(const TriMesh& mesh, const Vec3& eye, const Mat3& rotation,
                              const RenderConfig& cfg) {
    cfg.validate();
    const int n = cfg.patch_size;
    const double f = cfg.focal_px();
    const double c = 0.5 * n;

    std::vector<ScreenVertex> screen(mesh.vertices.size());
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3 pc = rotation.transpose() * (mesh.vertices[i] - eye);
        const double depth = -pc.z();
        if (depth <= kNearPlane) continue;
        const double sx = c + f * pc.x() / depth;
        const double sy = c - f * pc.y() / depth;
        if (std::abs(sx) > kMaxScreenCoord || std::abs(sy) > kMaxScreenCoord) continue;
        screen[i] = {std::llround(sx * kSubpixel), std::llround(sy * kSubpixel), 1.0 / depth, true};
    }

    std::vector<double> zbuf(static_cast<std::size_t>(n) * n, std::numeric_limits<double>::infinity());
    for (const auto& tri : mesh.triangles) {
        ScreenVertex v0 = screen[tri[0]], v1 = screen[tri[1]], v2 = screen[tri[2]];
        if (!v0.valid || !v1.valid || !v2.valid) continue;
        std::int64_t area = edge(v0, v1, v2.x, v2.y);
        if (area == 0) continue;
        if (area < 0) {
            std::swap(v1, v2);
            area = -area;
        }
        const std::int64_t min_x = std::min({v0.x, v1.x, v2.x}), max_x = std::max({v0.x, v1.x, v2.x});
        const std::int64_t min_y = std::min({v0.y, v1.y, v2.y}), max_y = std::max({v0.y, v1.y, v2.y});
        // pixel j has its center at (j + 0.5) in screen units
        auto first_pixel = [](std::int64_t lo) {
            const std::int64_t t = lo - kSubpixel / 2;
            return std::max<std::int64_t>(0, t <= 0 ? 0 : (t + kSubpixel - 1) / kSubpixel);
        };
        auto last_pixel = [n](std::int64_t hi) {
            const std::int64_t t = hi - kSubpixel / 2;
            if (t < 0) return std::int64_t{-1};
            return std::min<std::int64_t>(n - 1, t / kSubpixel);
        };
        const std::int64_t j0 = first_pixel(min_x), j1 = last_pixel(max_x);
        const std::int64_t i0 = first_pixel(min_y), i1 = last_pixel(max_y);
        const bool tl0 = top_left(v1, v2), tl1 = top_left(v2, v0), tl2 = top_left(v0, v1);
        const double inv_area = 1.0 / static_cast<double>(area);
        for (std::int64_t i = i0; i <= i1; ++i) {
            const std::int64_t py = i * kSubpixel + kSubpixel / 2;
            for (std::int64_t j = j0; j <= j1; ++j) {
                const std::int64_t px = j * kSubpixel + kSubpixel / 2;
                const std::int64_t w0 = edge(v1, v2, px, py);
                const std::int64_t w1 = edge(v2, v0, px, py);
                const std::int64_t w2 = edge(v0, v1, px, py);
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                if ((w0 == 0 && !tl0) || (w1 == 0 && !tl1) || (w2 == 0 && !tl2)) continue;
                const double inv_depth = (static_cast<double>(w0) * v0.inv_depth +
                                          static_cast<double>(w1) * v1.inv_depth +
                                          static_cast<double>(w2) * v2.inv_depth) * inv_area;
                const double depth = 1.0 / inv_depth;
                double& z = zbuf[static_cast<std::size_t>(i * n + j)];
                if (depth < z) z = depth;
            }
        }
    }

    RenderResult out{DepthPatch(n), true};
    const double near = cfg.camera_distance - cfg.cube_half;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double z = zbuf[static_cast<std::size_t>(i * n + j)];
            if (!std::isfinite(z)) continue;
            out.patch.mask(i, j) = true;
            out.patch.pixels(i, j) =
                static_cast<float>(std::clamp((z - near) / (2.0 * cfg.cube_half), 0.0, 1.0));
            out.outside_view = false;
        }
    return out;
}

RenderResult rasterize(const TriMesh& mesh, const View& view, const RenderConfig& cfg) {
    const Vec3 eye = cfg.camera_distance * view.vertex;
    return rasterize_camera(mesh, eye, look_at_matrix(eye, view.roll), cfg);
}

double occupancy_fraction(const DepthPatch& patch) {
    if (patch.mask.size() == 0) return 0.0;
    return static_cast<double>(patch.mask.count()) / static_cast<double>(patch.mask.size());
}

}  // namespace mtlpose
