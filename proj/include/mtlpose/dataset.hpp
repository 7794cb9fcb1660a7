#pragma once

// Training / database / test splits, triplet and pair mining, batching and
// the binary split file format.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtlpose/mesh.hpp"
#include "mtlpose/noise.hpp"
#include "mtlpose/render.hpp"
#include "mtlpose/viewsphere.hpp"

namespace mtlpose {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) from 53 random bits; independent of the standard
// library's distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

enum class Origin : std::uint8_t { synthetic_clean = 0, synthetic_augmented = 1, heldout = 2 };
enum class SplitRole { train, db, test };

std::string_view to_string(SplitRole role);

struct Sample {
    DepthPatch patch;
    std::uint32_t class_id = 0;
    Eigen::Quaternionf pose = Eigen::Quaternionf::Identity();
    Origin origin = Origin::synthetic_clean;
};

struct DatasetSplit {
    std::vector<Sample> samples;
    SplitRole role = SplitRole::train;
    int patch_size = 0;

    std::size_t size() const { return samples.size(); }
    std::uint32_t class_count() const;
};

struct ObjectSpec {
    TriMesh mesh;
    SamplingKind sampling = SamplingKind::regular;
};

struct SplitConfig {
    int level = 2;
    RollSweep sweep;
    RenderConfig render;
    NoiseConfig noise;
    std::uint64_t seed = 0;
};

struct Splits {
    DatasetSplit train, db, test;
    std::vector<std::string> warnings;
};

// train: clean render at every level-k view followed by its noise-augmented
// twin (indices 2i and 2i+1); db: the clean renders; test: noise-augmented
// renders at the level-(k+1)-only views.
Splits build_splits(const std::vector<ObjectSpec>& objects, const SplitConfig& cfg);

struct Triplet {
    std::size_t anchor = 0, puller = 0, pusher = 0;
};
struct Pair {
    std::size_t anchor = 0, partner = 0;
};
struct PoseTarget {
    std::size_t sample = 0;
    Eigen::Quaternionf pose;
};

struct MiningConfig {
    double pusher_min_angle = 60.0 * kDegToRad;
    double cross_class_probability = 0.5;
    double same_pose_tolerance = 1e-6;  // radians
};

// Per-class index lists and clean/augmented twin lookup over one split.
class TripletMiner {
public:
    explicit TripletMiner(const DatasetSplit& split, MiningConfig cfg = {});

    Triplet mine_triplet(std::size_t anchor, Rng& rng) const;
    std::optional<Pair> mine_pair(std::size_t anchor) const;
    std::optional<std::size_t> twin(std::size_t index) const;

    const DatasetSplit& split() const { return *split_; }
    const MiningConfig& config() const { return cfg_; }

private:
    const DatasetSplit* split_;
    MiningConfig cfg_;
    std::vector<std::vector<std::size_t>> by_class_;
    std::vector<std::optional<std::size_t>> twin_;
};

Triplet mine_triplet(std::size_t anchor, const DatasetSplit& split, Rng& rng, const MiningConfig& cfg = {});
std::optional<Pair> mine_pair(std::size_t anchor, const DatasetSplit& split);

struct Batch {
    std::vector<Triplet> triplets;
    std::vector<Pair> pairs;
    std::vector<PoseTarget> poses;
};

// One triplet, one pair and one pose target per anchor.
Batch make_batch(const TripletMiner& miner, std::span<const std::size_t> anchors, Rng& rng);

// batch_size / 3 anchors drawn without replacement.
Batch make_batch(const DatasetSplit& split, int batch_size, Rng& rng, const MiningConfig& cfg = {});

// Walks every sample of the split exactly once per epoch as anchor, in a
// freshly shuffled order each epoch.
class EpochSampler {
public:
    EpochSampler(const TripletMiner& miner, int batch_size, std::uint64_t seed);

    // Reshuffles the anchor order and advances the epoch counter (first call: 0).
    void begin_epoch();
    Batch next();
    int epoch() const { return epoch_; }
    bool epoch_finished() const { return cursor_ >= order_.size(); }
    std::size_t batches_per_epoch() const;
    Rng& rng() { return rng_; }

private:
    const TripletMiner* miner_;
    std::size_t anchors_per_batch_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    int epoch_ = -1;
};

void save_split(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit load_split(const std::filesystem::path& path, SplitRole role);

}  // namespace mtlpose
