#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "mtlpose/eval.hpp"
#include "mtlpose/retrieval.hpp"
#include "test_util.hpp"

using namespace mtlpose;

namespace {

const Splits& level1() {
    static const Splits s = test::desk_splits(1, 5);
    return s;
}

DescriptorDB random_db(Rng& rng, int rows, int dim) {
    DescriptorDB db;
    for (int r = 0; r < rows; ++r) {
        Eigen::VectorXf v(dim);
        for (int k = 0; k < dim; ++k) v(k) = static_cast<float>(2 * uniform01(rng) - 1);
        db.push_back(v, static_cast<std::uint32_t>(uniform_index(rng, 5)), test::random_quat(rng).cast<float>());
    }
    return db;
}

// Independent linear scan: double accumulation, strict comparison keeps the
// first minimum.
std::size_t scan(const DescriptorDB& db, const Eigen::VectorXf& q) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < db.size(); ++r) {
        double d = 0;
        for (int k = 0; k < db.dim(); ++k) {
            const double diff = double(db.descriptors(k, Eigen::Index(r))) - double(q(k));
            d += diff * diff;
        }
        if (d < best_d) {
            best_d = d;
            best = r;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("match on a two-row database") {
    DescriptorDB db;
    db.push_back(Eigen::Vector2f(0, 0), 0, Eigen::Quaternionf::Identity());
    db.push_back(Eigen::Vector2f(1, 1), 1, Eigen::Quaternionf(0, 1, 0, 0));
    const Match m = match(db, Eigen::Vector2f(0.1f, 0.0f));
    CHECK(m.class_id == 0);
    CHECK(m.row == 0);
    CHECK(m.distance == doctest::Approx(0.01));
    const Match exact = match(db, Eigen::Vector2f(1, 1));
    CHECK(exact.row == 1);
    CHECK(exact.class_id == 1);
    CHECK(exact.distance == 0.0f);
    CHECK(exact.pose.coeffs() == Eigen::Quaternionf(0, 1, 0, 0).coeffs());
}

TEST_CASE("match ties go to the lowest row") {
    DescriptorDB db;
    db.push_back(Eigen::Vector2f(1, 0), 3, Eigen::Quaternionf::Identity());
    db.push_back(Eigen::Vector2f(0, 1), 4, Eigen::Quaternionf::Identity());
    db.push_back(Eigen::Vector2f(1, 0), 5, Eigen::Quaternionf::Identity());
    CHECK(match(db, Eigen::Vector2f(0, 0)).row == 0);
    CHECK(match(db, Eigen::Vector2f(1, 0)).row == 0);
    CHECK(match(db, Eigen::Vector2f(0.5f, 0.5f)).row == 0);
}

TEST_CASE("match equals an independent linear scan") {
    Rng rng(99);
    DescriptorDB db = random_db(rng, 500, 16);
    // exact duplicates exercise the tie rule
    for (int r : {17, 250, 499}) db.descriptors.col(r) = db.descriptors.col(r - 7);
    std::vector<Eigen::VectorXf> queries;
    for (int t = 0; t < 90; ++t) {
        Eigen::VectorXf q(16);
        for (int k = 0; k < 16; ++k) q(k) = static_cast<float>(2 * uniform01(rng) - 1);
        queries.push_back(q);
    }
    for (int r : {10, 17, 243, 250, 492, 499, 0, 100, 300, 400}) queries.push_back(db.descriptors.col(r));
    for (const auto& q : queries) {
        const Match m = match(db, q);
        const std::size_t expected = scan(db, q);
        CHECK(m.row == expected);
        CHECK(m.class_id == db.classes[expected]);
        CHECK(m.pose.coeffs() == db.poses[expected].coeffs());
        CHECK(m.distance == doctest::Approx((db.descriptors.col(Eigen::Index(expected)) - q).squaredNorm()));
    }
}

TEST_CASE("match is permutation-equivariant") {
    Rng rng(5);
    const DescriptorDB db = random_db(rng, 200, 8);
    std::vector<std::size_t> perm(db.size());
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    DescriptorDB permuted;
    for (std::size_t r : perm) permuted.push_back(db.descriptors.col(Eigen::Index(r)), db.classes[r], db.poses[r]);
    for (int t = 0; t < 50; ++t) {
        Eigen::VectorXf q(8);
        for (int k = 0; k < 8; ++k) q(k) = static_cast<float>(2 * uniform01(rng) - 1);
        CHECK(perm[match(permuted, q).row] == match(db, q).row);
    }
}

TEST_CASE("match errors") {
    CHECK_THROWS_AS(match(DescriptorDB{}, Eigen::Vector2f(0, 0)), ConfigError);
    DescriptorDB db;
    db.push_back(Eigen::Vector2f(0, 0), 0, Eigen::Quaternionf::Identity());
    CHECK_THROWS_AS(match(db, Eigen::Vector3f(0, 0, 0)), ConfigError);
    CHECK_THROWS_AS(db.push_back(Eigen::Vector3f(0, 0, 0), 0, Eigen::Quaternionf::Identity()), ConfigError);
}

TEST_CASE("build_db rows follow the database split") {
    const Network<float> net(desk_preset(2));
    const DatasetSplit& split = level1().db;
    const DescriptorDB db = build_db(net, split);
    REQUIRE(db.size() == split.size());
    CHECK(db.dim() == 64);
    for (std::size_t i = 0; i < split.size(); i += 37) {
        CHECK(db.classes[i] == split.samples[i].class_id);
        CHECK(db.poses[i].coeffs() == split.samples[i].pose.coeffs());
        CHECK(db.descriptors.col(Eigen::Index(i)) == net.forward(split.samples[i].patch).descriptor);
    }
    CHECK(build_db(net, split).descriptors == db.descriptors);

    const auto dir = test::temp_dir("retrieval_weights");
    save_weights(net, dir / "w.pmw");
    CHECK(build_db(load_weights(dir / "w.pmw"), split).descriptors == db.descriptors);

    DatasetSplit wrong = split;
    wrong.patch_size = 64;
    CHECK_THROWS_AS(build_db(net, wrong), ConfigError);
    DatasetSplit empty;
    empty.patch_size = 32;
    CHECK_THROWS_AS(build_db(net, empty), ConfigError);
}

TEST_CASE("database patches retrieve themselves") {
    const Network<float> net(desk_preset(2));
    const DatasetSplit& split = level1().db;
    const DescriptorDB db = build_db(net, split);
    for (std::size_t i = 0; i < split.size(); ++i) {
        const Match m = predict_nn(net, db, split.samples[i].patch);
        CHECK(m.row == i);
        CHECK(m.distance == 0.0f);
        CHECK(m.class_id == split.samples[i].class_id);
    }
}

TEST_CASE("untrained network classifies at least at chance") {
    const Splits& s = level1();
    int at_least = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        const Network<float> net(desk_preset(seed));
        const DescriptorDB db = build_db(net, s.db);
        std::size_t correct = 0;
        for (const Sample& q : s.test.samples) correct += predict_nn(net, db, q.patch).class_id == q.class_id;
        const double acc = double(correct) / s.test.size();
        const double sigma = std::sqrt(0.2 * 0.8 / s.test.size());
        at_least += acc >= 0.2 - 3 * sigma;
        CHECK(acc < 1.0);
    }
    CHECK(at_least == 3);
}

TEST_CASE("regression prediction") {
    const Network<float> net(desk_preset(4));
    for (std::size_t i = 0; i < level1().test.size(); i += 50) {
        const DepthPatch& p = level1().test.samples[i].patch;
        const Eigen::Quaternionf q = predict_regression(net, p);
        CHECK(q.norm() == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(predict_regression(net, p).coeffs() == q.coeffs());
    }
    Network<float> zero(desk_preset(4));
    zero.mutable_parameters().setZero();
    CHECK_THROWS_AS(predict_regression(zero, level1().test.samples[0].patch), DomainError);
}

TEST_CASE("descriptor database file round trip") {
    Rng rng(12);
    const DescriptorDB db = random_db(rng, 40, 6);
    const auto dir = test::temp_dir("pdb");
    save_db(db, dir / "db.pdb");
    const auto bytes = test::read_file(dir / "db.pdb");
    CHECK(bytes.size() == 12 + 40 * (4 + 16 + 6 * 4));
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PDB1");
    const DescriptorDB back = load_db(dir / "db.pdb");
    CHECK(back.descriptors == db.descriptors);
    CHECK(back.classes == db.classes);
    for (std::size_t r = 0; r < db.size(); ++r) CHECK(back.poses[r].coeffs() == db.poses[r].coeffs());

    DescriptorDB empty;
    empty.descriptors.resize(6, 0);
    save_db(empty, dir / "empty.pdb");
    CHECK(load_db(dir / "empty.pdb").size() == 0);
}

TEST_CASE("corrupted descriptor database files") {
    Rng rng(13);
    const auto dir = test::temp_dir("pdb_bad");
    save_db(random_db(rng, 10, 4), dir / "db.pdb");
    const auto bytes = test::read_file(dir / "db.pdb");

    auto bad = bytes;
    bad[1] = 'X';
    test::write_file(dir / "magic.pdb", bad);
    CHECK_THROWS_AS(load_db(dir / "magic.pdb"), FormatError);

    bad = bytes;
    bad[8] = 0;
    bad[9] = 0;
    bad[10] = 0;
    bad[11] = 0;
    test::write_file(dir / "dim.pdb", bad);
    CHECK_THROWS_AS(load_db(dir / "dim.pdb"), FormatError);

    for (std::size_t cut : {std::size_t(2), std::size_t(10), bytes.size() / 2, bytes.size() - 1}) {
        test::write_file(dir / "cut.pdb", std::vector<char>(bytes.begin(), bytes.begin() + std::ptrdiff_t(cut)));
        CAPTURE(cut);
        CHECK_THROWS_AS(load_db(dir / "cut.pdb"), FormatError);
    }
    bad = bytes;
    bad.push_back(0);
    test::write_file(dir / "trailing.pdb", bad);
    CHECK_THROWS_AS(load_db(dir / "trailing.pdb"), FormatError);
    CHECK_THROWS_AS(load_db(dir / "missing.pdb"), ConfigError);
}
