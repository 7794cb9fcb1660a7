#include "mtlpose/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "mtlpose/binary_io.hpp"

namespace mtlpose {

namespace {

constexpr std::uint16_t kSplitVersion = 1;
constexpr std::uint64_t kTestNoiseDomain = 0x7E57'0000'0000'0001ULL;

double pose_distance(const Sample& a, const Sample& b) { return angular_error(a.pose, b.pose); }

Sample render_sample(const TriMesh& mesh, const View& view, std::uint32_t class_id, const RenderConfig& rc) {
    Sample s;
    s.patch = rasterize(mesh, view, rc).patch;
    s.class_id = class_id;
    s.pose = look_at_quat(rc.camera_distance * view.vertex, view.roll).cast<float>();
    return s;
}

bool same_mesh(const TriMesh& a, const TriMesh& b) {
    if (a.vertices.size() != b.vertices.size() || a.triangles.size() != b.triangles.size()) return false;
    for (std::size_t i = 0; i < a.vertices.size(); ++i)
        if (a.vertices[i] != b.vertices[i]) return false;
    return a.triangles == b.triangles;
}

}  // namespace

std::string_view to_string(SplitRole role) {
    switch (role) {
        case SplitRole::train: return "train";
        case SplitRole::db: return "db";
        case SplitRole::test: return "test";
    }
    return "train";
}

std::uint32_t DatasetSplit::class_count() const {
    std::uint32_t n = 0;
    for (const auto& s : samples) n = std::max(n, s.class_id + 1);
    return n;
}

Splits build_splits(const std::vector<ObjectSpec>& objects, const SplitConfig& cfg) {
    cfg.render.validate();
    cfg.noise.validate();
    if (cfg.level < 0 || cfg.level >= kMaxIcosphereLevel)
        throw ConfigError("sampling level must be in [0, " + std::to_string(kMaxIcosphereLevel - 1) + "]");
    if (objects.empty()) throw ConfigError("build_splits needs at least one object");

    Splits out;
    out.train.role = SplitRole::train;
    out.db.role = SplitRole::db;
    out.test.role = SplitRole::test;
    out.train.patch_size = out.db.patch_size = out.test.patch_size = cfg.render.patch_size;

    if (objects.size() < 2) out.warnings.push_back("fewer than 2 objects: classification is trivial");
    for (std::size_t a = 0; a < objects.size(); ++a)
        for (std::size_t b = a + 1; b < objects.size(); ++b)
            if (objects[a].sampling == objects[b].sampling && same_mesh(objects[a].mesh, objects[b].mesh))
                out.warnings.push_back("objects " + std::to_string(a) + " and " + std::to_string(b) +
                                       " are identical; classification is ill-posed");

    for (std::size_t c = 0; c < objects.size(); ++c) {
        const auto& obj = objects[c];
        const auto class_id = static_cast<std::uint32_t>(c);
        for (const View& v : sampling_for(obj.sampling, cfg.level, cfg.sweep).views) {
            Sample clean = render_sample(obj.mesh, v, class_id, cfg.render);
            Sample aug = clean;
            NoiseConfig nc = cfg.noise;
            nc.seed = noise_seed(cfg.seed, out.train.samples.size() + 1, 0);
            aug.patch = augment(clean.patch, nc);
            aug.origin = Origin::synthetic_augmented;
            out.db.samples.push_back(clean);
            out.train.samples.push_back(std::move(clean));
            out.train.samples.push_back(std::move(aug));
        }
        for (const View& v : test_views_for(obj.sampling, cfg.level, cfg.sweep).views) {
            Sample s = render_sample(obj.mesh, v, class_id, cfg.render);
            NoiseConfig nc = cfg.noise;
            nc.seed = noise_seed(cfg.seed ^ kTestNoiseDomain, out.test.samples.size(), 0);
            s.patch = augment(s.patch, nc);
            s.origin = Origin::heldout;
            out.test.samples.push_back(std::move(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// mining

TripletMiner::TripletMiner(const DatasetSplit& split, MiningConfig cfg)
    : split_(&split), cfg_(cfg), by_class_(split.class_count()), twin_(split.size()) {
    std::map<std::pair<std::uint32_t, std::array<std::uint32_t, 4>>, std::vector<std::size_t>> by_pose;
    for (std::size_t i = 0; i < split.size(); ++i) {
        const Sample& s = split.samples[i];
        by_class_[s.class_id].push_back(i);
        std::array<std::uint32_t, 4> key{};
        const auto c = to_wxyz(s.pose);
        for (int k = 0; k < 4; ++k) key[k] = std::bit_cast<std::uint32_t>(c(k));
        by_pose[{s.class_id, key}].push_back(i);
    }
    for (const auto& [key, group] : by_pose)
        for (std::size_t i : group) {
            if (split.samples[i].origin == Origin::heldout) continue;
            for (std::size_t j : group)
                if (j != i && split.samples[j].origin != split.samples[i].origin &&
                    split.samples[j].origin != Origin::heldout) {
                    twin_[i] = j;
                    break;
                }
        }
}

std::optional<std::size_t> TripletMiner::twin(std::size_t index) const { return twin_.at(index); }

Triplet TripletMiner::mine_triplet(std::size_t anchor, Rng& rng) const {
    const auto& samples = split_->samples;
    const Sample& a = samples.at(anchor);
    const auto& same = by_class_[a.class_id];

    Triplet t{anchor, anchor, anchor};
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::pair<std::size_t, double>> candidates;
    for (std::size_t j : same) {
        const double d = pose_distance(a, samples[j]);
        if (d <= cfg_.same_pose_tolerance) continue;
        if (d < best) {
            best = d;
            t.puller = j;
        }
        if (d > cfg_.pusher_min_angle) candidates.emplace_back(j, d);
    }
    if (!std::isfinite(best))
        throw ConfigError("class " + std::to_string(a.class_id) + " has a single pose; cannot mine a puller");
    // a same-class pusher must also be farther than the puller
    std::vector<std::size_t> far;
    for (const auto& [j, d] : candidates)
        if (d > best) far.push_back(j);

    const bool cross = uniform01(rng) < cfg_.cross_class_probability;
    if (!cross && !far.empty()) {
        t.pusher = far[uniform_index(rng, far.size())];
        return t;
    }
    const std::size_t others = samples.size() - same.size();
    if (others == 0) throw ConfigError("split has a single class; cannot mine a cross-class pusher");
    // k-th sample outside the anchor's class, walking the class lists in order
    std::size_t k = uniform_index(rng, others);
    for (std::uint32_t c = 0; c < by_class_.size(); ++c) {
        if (c == a.class_id) continue;
        if (k < by_class_[c].size()) {
            t.pusher = by_class_[c][k];
            break;
        }
        k -= by_class_[c].size();
    }
    return t;
}

std::optional<Pair> TripletMiner::mine_pair(std::size_t anchor) const {
    if (split_->samples.at(anchor).origin == Origin::heldout) return std::nullopt;
    if (auto t = twin_[anchor]) return Pair{anchor, *t};
    return std::nullopt;
}

Triplet mine_triplet(std::size_t anchor, const DatasetSplit& split, Rng& rng, const MiningConfig& cfg) {
    return TripletMiner(split, cfg).mine_triplet(anchor, rng);
}

std::optional<Pair> mine_pair(std::size_t anchor, const DatasetSplit& split) {
    return TripletMiner(split).mine_pair(anchor);
}

Batch make_batch(const TripletMiner& miner, std::span<const std::size_t> anchors, Rng& rng) {
    Batch b;
    for (std::size_t a : anchors) {
        b.triplets.push_back(miner.mine_triplet(a, rng));
        if (auto p = miner.mine_pair(a)) b.pairs.push_back(*p);
        b.poses.push_back({a, miner.split().samples[a].pose});
    }
    return b;
}

Batch make_batch(const DatasetSplit& split, int batch_size, Rng& rng, const MiningConfig& cfg) {
    if (batch_size < 3 || batch_size % 3 != 0) throw ConfigError("batch size must be a positive multiple of 3");
    const std::size_t anchors = static_cast<std::size_t>(batch_size) / 3;
    if (split.size() < anchors)
        throw ConfigError("split has " + std::to_string(split.size()) + " samples; batch size " +
                          std::to_string(batch_size) + " needs at least " + std::to_string(anchors));
    std::vector<std::size_t> order(split.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // partial Fisher-Yates: the first `anchors` entries are a uniform draw
    for (std::size_t i = 0; i < anchors; ++i)
        std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);
    order.resize(anchors);
    TripletMiner miner(split, cfg);
    return make_batch(miner, order, rng);
}

EpochSampler::EpochSampler(const TripletMiner& miner, int batch_size, std::uint64_t seed)
    : miner_(&miner), anchors_per_batch_(static_cast<std::size_t>(batch_size) / 3), rng_(seed) {
    if (batch_size < 3 || batch_size % 3 != 0) throw ConfigError("batch size must be a positive multiple of 3");
    const std::size_t n = miner.split().size();
    if (n < anchors_per_batch_)
        throw ConfigError("split has " + std::to_string(n) + " samples; batch size " +
                          std::to_string(batch_size) + " needs at least " + std::to_string(anchors_per_batch_));
    order_.resize(n);
    cursor_ = n;
}

void EpochSampler::begin_epoch() {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    shuffle(order_, rng_);
    cursor_ = 0;
    ++epoch_;
}

Batch EpochSampler::next() {
    if (epoch_finished()) throw ConfigError("epoch exhausted; call begin_epoch()");
    const std::size_t count = std::min(anchors_per_batch_, order_.size() - cursor_);
    const std::span<const std::size_t> anchors(order_.data() + cursor_, count);
    cursor_ += count;
    return make_batch(*miner_, anchors, rng_);
}

std::size_t EpochSampler::batches_per_epoch() const {
    return (order_.size() + anchors_per_batch_ - 1) / anchors_per_batch_;
}

// ---------------------------------------------------------------------------
// split files

void save_split(const DatasetSplit& split, const std::filesystem::path& path) {
    const int n = split.patch_size;
    if (n <= 0 || n > 0xFFFF) throw ConfigError("split patch size out of range");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + path.string());
    io::write_magic(os, "PMD1");
    io::write_le<std::uint16_t>(os, kSplitVersion);
    io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(n));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(split.size()));
    const std::size_t pixels = static_cast<std::size_t>(n) * n;
    std::vector<unsigned char> bits((pixels + 7) / 8);
    for (const Sample& s : split.samples) {
        if (s.patch.size() != n) throw ConfigError("sample patch size differs from split patch size");
        io::write_le<std::uint32_t>(os, s.class_id);
        const auto q = to_wxyz(s.pose);
        for (int k = 0; k < 4; ++k) io::write_le<float>(os, q(k));
        io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.origin));
        std::fill(bits.begin(), bits.end(), 0);
        for (std::size_t p = 0; p < pixels; ++p)
            if (s.patch.mask.data()[p]) bits[p / 8] |= static_cast<unsigned char>(1u << (p % 8));
        os.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
        os.write(reinterpret_cast<const char*>(s.patch.pixels.data()),
                 static_cast<std::streamsize>(pixels * sizeof(float)));
    }
    if (!os) throw ConfigError("write failed for " + path.string());
}

DatasetSplit load_split(const std::filesystem::path& path, SplitRole role) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path.string());
    io::expect_magic(is, "PMD1");
    const auto version = io::read_le<std::uint16_t>(is);
    if (version != kSplitVersion) throw FormatError("unsupported split version " + std::to_string(version));
    const int n = io::read_le<std::uint16_t>(is);
    if (n < 1) throw FormatError("split patch size is zero");
    const auto count = io::read_le<std::uint32_t>(is);

    DatasetSplit split;
    split.role = role;
    split.patch_size = n;
    const std::size_t pixels = static_cast<std::size_t>(n) * n;
    std::vector<unsigned char> bits((pixels + 7) / 8);
    split.samples.reserve(std::min<std::size_t>(count, 1u << 20));
    for (std::uint32_t i = 0; i < count; ++i) {
        Sample s;
        s.class_id = io::read_le<std::uint32_t>(is);
        Eigen::Vector4f q;
        for (int k = 0; k < 4; ++k) q(k) = io::read_le<float>(is);
        s.pose = from_wxyz<float>(q);
        const auto origin = io::read_le<std::uint8_t>(is);
        if (origin > 2) throw FormatError("invalid sample origin " + std::to_string(origin));
        s.origin = static_cast<Origin>(origin);
        io::read_bytes(is, reinterpret_cast<char*>(bits.data()), bits.size());
        s.patch = DepthPatch(n);
        for (std::size_t p = 0; p < pixels; ++p) s.patch.mask.data()[p] = (bits[p / 8] >> (p % 8)) & 1u;
        io::read_bytes(is, reinterpret_cast<char*>(s.patch.pixels.data()), pixels * sizeof(float));
        split.samples.push_back(std::move(s));
    }
    io::expect_eof(is);
    return split;
}

}  // namespace mtlpose
