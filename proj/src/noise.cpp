#include "mtlpose/noise.hpp"

#include <cmath>

namespace mtlpose {

namespace {

constexpr double kSkew = 0.36602540378443864676;    // (sqrt(3) - 1) / 2
constexpr double kUnskew = 0.21132486540518711775;  // (3 - sqrt(3)) / 6

constexpr double kGrad[8][2] = {{1, 1}, {-1, 1}, {1, -1}, {-1, -1}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};

double corner(std::int64_t i, std::int64_t j, double dx, double dy, std::uint64_t seed) {
    double t = 0.5 - dx * dx - dy * dy;
    if (t < 0.0) return 0.0;
    const std::uint64_t h =
        splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(i) * 0x9E3779B97F4A7C15ULL +
                                     static_cast<std::uint64_t>(j)));
    const double* g = kGrad[h & 7];
    t *= t;
    return t * t * (g[0] * dx + g[1] * dy);
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

void NoiseConfig::validate() const {
    if (octaves < 1) throw ConfigError("noise octaves must be >= 1");
    if (!(persistence > 0.0) || persistence > 1.0) throw ConfigError("noise persistence must be in (0, 1]");
}

double simplex2(double x, double y, std::uint64_t seed) {
    const double s = (x + y) * kSkew;
    const auto i = static_cast<std::int64_t>(std::floor(x + s));
    const auto j = static_cast<std::int64_t>(std::floor(y + s));
    const double t = static_cast<double>(i + j) * kUnskew;
    const double x0 = x - (static_cast<double>(i) - t);
    const double y0 = y - (static_cast<double>(j) - t);
    const int i1 = x0 > y0 ? 1 : 0;
    const int j1 = 1 - i1;
    const double x1 = x0 - i1 + kUnskew, y1 = y0 - j1 + kUnskew;
    const double x2 = x0 - 1.0 + 2.0 * kUnskew, y2 = y0 - 1.0 + 2.0 * kUnskew;
    const double sum = corner(i, j, x0, y0, seed) + corner(i + i1, j + j1, x1, y1, seed) +
                       corner(i + 1, j + 1, x2, y2, seed);
    return 70.0 * sum;
}

double fractal(double x, double y, const NoiseConfig& cfg) {
    double sum = 0.0, norm = 0.0, amp = 1.0, freq = cfg.base_frequency;
    for (int o = 0; o < cfg.octaves; ++o) {
        sum += amp * simplex2(freq * x, freq * y, cfg.seed);
        norm += amp;
        amp *= cfg.persistence;
        freq *= 2.0;
    }
    return sum / norm;
}

DepthPatch augment(const DepthPatch& patch, const NoiseConfig& cfg) {
    cfg.validate();
    DepthPatch out = patch;
    const int n = patch.size();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (patch.mask(i, j)) continue;
            const double v = fractal((j + 0.5) / n, (i + 0.5) / n, cfg);
            out.pixels(i, j) = static_cast<float>(0.5 * (v + 1.0));
        }
    return out;
}

std::uint64_t noise_seed(std::uint64_t global_seed, std::uint64_t sample_index, std::uint64_t epoch) {
    return splitmix64(splitmix64(splitmix64(global_seed) ^ sample_index) ^ (epoch * 0xD1B54A32D192ED03ULL));
}

}  // namespace mtlpose
