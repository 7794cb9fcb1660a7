#pragma once

// Mini-batch training of the multi-task objective with Adam.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mtlpose/dataset.hpp"
#include "mtlpose/loss.hpp"
#include "mtlpose/net.hpp"
#include "mtlpose/noise.hpp"

namespace mtlpose {

struct TrainConfig {
    NetConfig net;
    LossConfig loss;
    MiningConfig mining;
    NoiseConfig noise;  // seed is ignored; per-sample seeds derive from `seed`
    int epochs = 30;
    int batch_size = 300;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

// Desk preset batch size: 60 when the split is small (fewer than 30000
// samples, under 100 steps per epoch at batch 300), else 300.
inline int desk_batch_size(std::size_t train_samples) { return train_samples < 30000 ? 60 : 300; }

struct EpochLog {
    int epoch = 0;
    double pose = 0, triplets = 0, pairs = 0, total = 0;  // batch means
    double seconds = 0;
};

struct TrainResult {
    Network<float> net;
    std::vector<EpochLog> log;
    // Set when training hit a non-finite loss or gradient; `net` then holds
    // the parameters from the end of the last completed epoch.
    std::optional<std::string> failure;
};

using EpochCallback = std::function<void(const EpochLog&, const Network<float>&)>;

// Every sample of `train` is an anchor once per epoch. Augmented samples get
// a fresh background each epoch, seeded by (seed, sample index, epoch).
TrainResult train_network(const DatasetSplit& train, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace mtlpose
