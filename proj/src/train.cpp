#include "mtlpose/train.hpp"

#include <chrono>
#include <unordered_map>

namespace mtlpose {

TrainResult train_network(const DatasetSplit& train, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.loss.validate();
    cfg.noise.validate();
    if (train.patch_size != cfg.net.input_size)
        throw ConfigError("dataset patch size " + std::to_string(train.patch_size) + " does not match network input " +
                          std::to_string(cfg.net.input_size));
    if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");

    TrainResult result{Network<float>(cfg.net), {}, std::nullopt};
    Network<float>& net = result.net;
    AdamState<float> adam(net.parameter_count(), cfg.learning_rate);
    VecX<float> last_good = net.parameters();

    const TripletMiner miner(train, cfg.mining);
    EpochSampler sampler(miner, cfg.batch_size, splitmix64(cfg.seed ^ 0x5A3C'0000'0000'0001ULL));

    std::vector<VecX<float>> inputs(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) inputs[i] = patch_input<float>(train.samples[i].patch);

    VecX<float> grads(net.parameter_count());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (train.samples[i].origin != Origin::synthetic_augmented) continue;
            NoiseConfig nc = cfg.noise;
            nc.seed = noise_seed(cfg.seed, i, static_cast<std::uint64_t>(epoch) + 1);
            inputs[i] = patch_input<float>(augment(train.samples[i].patch, nc));
        }

        EpochLog log;
        log.epoch = epoch;
        std::size_t batches = 0;
        sampler.begin_epoch();
        while (!sampler.epoch_finished()) {
            const Batch batch = sampler.next();

            std::unordered_map<std::size_t, std::size_t> row_of;
            std::vector<std::size_t> rows;
            auto row = [&](std::size_t sample) {
                auto [it, fresh] = row_of.emplace(sample, rows.size());
                if (fresh) rows.push_back(sample);
                return it->second;
            };

            MtlBatch<float> mb;
            for (const Triplet& t : batch.triplets) {
                const Sample& a = train.samples[t.anchor];
                const Sample& p = train.samples[t.puller];
                const Sample& k = train.samples[t.pusher];
                // Same-class pusher: margin is the anchor-puller angle; other class: gamma.
                const double m = dynamic_margin(a.pose, p.pose, a.class_id, k.class_id, cfg.loss.gamma);
                mb.triplets.push_back({row(t.anchor), row(t.puller), row(t.pusher), static_cast<float>(m)});
            }
            for (const Pair& p : batch.pairs) mb.pairs.push_back({row(p.anchor), row(p.partner)});
            for (const PoseTarget& t : batch.poses) mb.poses.push_back({row(t.sample), t.pose});

            std::vector<Network<float>::Output> outs;
            outs.reserve(rows.size());
            for (std::size_t s : rows) {
                outs.push_back(net.forward(inputs[s]));
                mb.descriptors.push_back(outs.back().descriptor);
                mb.pose_raw.push_back(outs.back().pose_raw);
            }

            MtlResult<float> loss;
            try {
                loss = mtl_loss(mb, cfg.loss);
            } catch (const DomainError& e) {
                result.failure = std::string(e.what()) + " in epoch " + std::to_string(epoch);
                break;
            }
            if (!std::isfinite(loss.total)) {
                result.failure = "non-finite loss in epoch " + std::to_string(epoch);
                break;
            }
            grads.setZero();
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (loss.grad_descriptors[r].isZero(0) && loss.grad_pose_raw[r].isZero(0)) continue;
                net.backward(outs[r].cache, loss.grad_descriptors[r], loss.grad_pose_raw[r], grads);
            }
            try {
                adam_step<float>(adam, net.mutable_parameters(), grads);
            } catch (const TrainingError& e) {
                result.failure = e.what();
                break;
            }
            log.pose += loss.pose;
            log.triplets += loss.triplets;
            log.pairs += loss.pairs;
            log.total += loss.total;
            ++batches;
        }
        if (result.failure || !net.parameters().allFinite()) {
            if (!result.failure) result.failure = "non-finite parameters after epoch " + std::to_string(epoch);
            net.mutable_parameters() = last_good;
            break;
        }
        last_good = net.parameters();
        if (batches > 0) {
            log.pose /= batches;
            log.triplets /= batches;
            log.pairs /= batches;
            log.total /= batches;
        }
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(log);
        if (on_epoch) on_epoch(log, net);
    }
    return result;
}

}  // namespace mtlpose
