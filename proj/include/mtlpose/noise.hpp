#pragma once

// Gradient-lattice (simplex) noise and its multi-octave fractal sum, used to
// fill the background of rendered depth patches.

#include <cstdint>

#include "mtlpose/render.hpp"

namespace mtlpose {

struct NoiseConfig {
    int octaves = 4;
    double persistence = 0.5;
    double base_frequency = 4.0;  // cycles per patch width
    std::uint64_t seed = 0;

    void validate() const;
};

// 2D simplex noise in [-1, 1]; lattice gradients are picked by hashing the
// skewed cell coordinates with `seed`.
double simplex2(double x, double y, std::uint64_t seed);

// Persistence-weighted octave sum, normalized by the weight total.
double fractal(double x, double y, const NoiseConfig& cfg);

// Replaces background pixels with (fractal + 1) / 2 sampled at pixel centers
// in patch-normalized coordinates; surface pixels and the mask are kept.
DepthPatch augment(const DepthPatch& patch, const NoiseConfig& cfg);

// Seed for the noise of one sample in one epoch.
std::uint64_t noise_seed(std::uint64_t global_seed, std::uint64_t sample_index, std::uint64_t epoch);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace mtlpose
