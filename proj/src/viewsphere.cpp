#include "mtlpose/viewsphere.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>

namespace mtlpose {

namespace {

std::vector<Vec3> filter_vertices(const std::vector<Vec3>& hemi, SamplingKind kind) {
    std::vector<Vec3> out;
    for (const Vec3& v : hemi) {
        const double az = azimuth(v);
        switch (kind) {
            case SamplingKind::regular:
                out.push_back(v);
                break;
            case SamplingKind::symmetric:
                if (az < std::numbers::pi) out.push_back(v);
                break;
            case SamplingKind::rotation_invariant:
                if (az == 0.0) out.push_back(v);
                break;
        }
    }
    return out;
}

ViewSet views_for(const std::vector<Vec3>& vertices, SamplingKind kind, const RollSweep& sweep) {
    ViewSet set = kind == SamplingKind::rotation_invariant
                      ? inplane_sweep(vertices, 0.0, 0.0, 1.0)
                      : inplane_sweep(vertices, sweep.start_deg, sweep.end_deg, sweep.stride_deg);
    set.kind = kind;
    return set;
}

}  // namespace

std::string_view to_string(SamplingKind kind) {
    switch (kind) {
        case SamplingKind::regular: return "regular";
        case SamplingKind::symmetric: return "symmetric";
        case SamplingKind::rotation_invariant: return "rotation_invariant";
    }
    return "regular";
}

SamplingKind sampling_kind_from_string(std::string_view name) {
    if (name == "regular") return SamplingKind::regular;
    if (name == "symmetric") return SamplingKind::symmetric;
    if (name == "rotation_invariant") return SamplingKind::rotation_invariant;
    throw ConfigError("unknown sampling kind '" + std::string(name) + "'");
}

Icosphere build_icosphere(int level) {
    if (level < 0 || level > kMaxIcosphereLevel)
        throw ConfigError("icosphere level must be in [0, " + std::to_string(kMaxIcosphereLevel) +
                          "], got " + std::to_string(level));

    Icosphere s;
    const double ring_z = 1.0 / std::sqrt(5.0);
    const double ring_r = 2.0 / std::sqrt(5.0);
    // Rings are built mirror-exact about the xz plane (y -> -y) so that the
    // azimuth-0 meridian survives subdivision with y == 0 exactly.
    auto ring = [&](double offset, double z) {
        std::array<Vec3, 5> r;
        for (int k = 0; k < 3; ++k) {
            const double a = 2.0 * std::numbers::pi * (k + offset) / 5.0;
            r[k] = Vec3(ring_r * std::cos(a), ring_r * std::sin(a), z);
        }
        for (int k = 3; k < 5; ++k) {
            const int m = offset == 0.0 ? 5 - k : 4 - k;
            r[k] = Vec3(r[m].x(), -r[m].y(), z);
        }
        if (offset == 0.0) r[0].y() = 0.0;
        else r[2].y() = 0.0;
        return r;
    };
    s.vertices.emplace_back(0.0, 0.0, 1.0);
    for (const Vec3& v : ring(0.0, ring_z)) s.vertices.push_back(v);
    for (const Vec3& v : ring(0.5, -ring_z)) s.vertices.push_back(v);
    s.vertices.emplace_back(0.0, 0.0, -1.0);

    // Upper ring 1..5, lower ring 6..10 (lower k lies between upper k and k+1).
    for (int k = 0; k < 5; ++k) {
        const int u0 = 1 + k, u1 = 1 + (k + 1) % 5;
        const int l0 = 6 + k, l1 = 6 + (k + 1) % 5;
        s.faces.push_back({0, u0, u1});
        s.faces.push_back({u0, l0, u1});
        s.faces.push_back({u1, l0, l1});
        s.faces.push_back({11, l1, l0});
    }

    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> midpoints;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            if (auto it = midpoints.find(key); it != midpoints.end())
                return it->second;
            const int idx = static_cast<int>(s.vertices.size());
            s.vertices.push_back((s.vertices[a] + s.vertices[b]).normalized());
            midpoints.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(s.faces.size() * 4);
        for (const auto& f : s.faces) {
            const int ab = midpoint(f[0], f[1]);
            const int bc = midpoint(f[1], f[2]);
            const int ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        s.faces = std::move(next);
    }
    s.level = level;
    return s;
}

double azimuth(const Vec3& v) {
    if (std::abs(v.y()) < 1e-12)
        return v.x() >= 0.0 || std::abs(v.x()) < 1e-12 ? 0.0 : std::numbers::pi;
    double a = std::atan2(v.y(), v.x());
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    return a;
}

std::vector<Vec3> hemisphere(const Icosphere& sphere) {
    std::vector<Vec3> out;
    for (const Vec3& v : sphere.vertices)
        if (v.z() >= -kHemisphereTol) out.push_back(v);
    std::stable_sort(out.begin(), out.end(), [](const Vec3& a, const Vec3& b) {
        if (a.z() != b.z()) return a.z() > b.z();
        return azimuth(a) < azimuth(b);
    });
    return out;
}

ViewSet inplane_sweep(const std::vector<Vec3>& vertices, double start_deg, double end_deg,
                      double stride_deg) {
    if (!(stride_deg > 0.0) || start_deg > end_deg)
        throw ConfigError("roll sweep needs stride > 0 and start <= end");
    const int count = static_cast<int>(std::floor((end_deg - start_deg) / stride_deg + 1.0 + 1e-9));
    ViewSet set;
    set.views.reserve(vertices.size() * static_cast<std::size_t>(count));
    for (const Vec3& v : vertices)
        for (int i = 0; i < count; ++i)
            set.views.push_back(View{v, (start_deg + i * stride_deg) * kDegToRad});
    return set;
}

ViewSet sampling_for(SamplingKind kind, int level, const RollSweep& sweep) {
    return views_for(filter_vertices(hemisphere(build_icosphere(level)), kind), kind, sweep);
}

ViewSet test_views_for(SamplingKind kind, int level, const RollSweep& sweep) {
    const auto coarse = filter_vertices(hemisphere(build_icosphere(level)), kind);
    const auto fine = filter_vertices(hemisphere(build_icosphere(level + 1)), kind);
    std::vector<Vec3> fresh;
    for (const Vec3& v : fine) {
        const bool seen = std::any_of(coarse.begin(), coarse.end(),
                                      [&](const Vec3& c) { return (c - v).norm() < 1e-9; });
        if (!seen) fresh.push_back(v);
    }
    return views_for(fresh, kind, sweep);
}

}  // namespace mtlpose
