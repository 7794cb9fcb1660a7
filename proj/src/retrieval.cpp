#include "mtlpose/retrieval.hpp"

#include <fstream>
#include <limits>

#include "mtlpose/binary_io.hpp"

namespace mtlpose {

void DescriptorDB::push_back(const Eigen::Ref<const Eigen::VectorXf>& descriptor, std::uint32_t class_id,
                             const Eigen::Quaternionf& pose) {
    if (size() > 0 && descriptor.size() != dim()) throw ConfigError("descriptor dimension mismatch");
    const Eigen::Index n = static_cast<Eigen::Index>(size());
    descriptors.conservativeResize(descriptor.size(), n + 1);
    descriptors.col(n) = descriptor;
    classes.push_back(class_id);
    poses.push_back(pose);
}

DescriptorDB build_db(const Network<float>& net, const DatasetSplit& db_split) {
    if (db_split.size() == 0) throw ConfigError("database split is empty");
    if (db_split.patch_size != net.config().input_size)
        throw ConfigError("database patch size " + std::to_string(db_split.patch_size) +
                          " does not match network input " + std::to_string(net.config().input_size));
    DescriptorDB db;
    db.descriptors.resize(net.descriptor_dim(), static_cast<Eigen::Index>(db_split.size()));
    for (std::size_t i = 0; i < db_split.size(); ++i) {
        const Sample& s = db_split.samples[i];
        db.descriptors.col(static_cast<Eigen::Index>(i)) = net.forward(s.patch).descriptor;
        db.classes.push_back(s.class_id);
        db.poses.push_back(s.pose);
    }
    return db;
}

Match match(const DescriptorDB& db, const Eigen::Ref<const Eigen::VectorXf>& query) {
    if (db.size() == 0) throw ConfigError("match against an empty database");
    if (query.size() != db.dim())
        throw ConfigError("query has " + std::to_string(query.size()) + " dimensions, database " +
                          std::to_string(db.dim()));
    float best = std::numeric_limits<float>::infinity();
    Eigen::Index best_row = 0;
    for (Eigen::Index r = 0; r < db.descriptors.cols(); ++r) {
        const float d = (db.descriptors.col(r) - query).squaredNorm();
        if (d < best) {
            best = d;
            best_row = r;
        }
    }
    const auto row = static_cast<std::size_t>(best_row);
    return {db.classes[row], db.poses[row], best, row};
}

Match predict_nn(const Network<float>& net, const DescriptorDB& db, const DepthPatch& patch) {
    return match(db, net.forward(patch).descriptor);
}

Eigen::Quaternionf predict_regression(const Network<float>& net, const DepthPatch& patch) {
    const auto raw = net.forward(patch).pose_raw;
    return quat_normalize(from_wxyz<float>(raw));
}

void save_db(const DescriptorDB& db, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + path.string());
    io::write_magic(os, "PDB1");
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(db.size()));
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(db.dim()));
    for (std::size_t r = 0; r < db.size(); ++r) {
        io::write_le<std::uint32_t>(os, db.classes[r]);
        const auto q = to_wxyz(db.poses[r]);
        for (int k = 0; k < 4; ++k) io::write_le<float>(os, q(k));
        os.write(reinterpret_cast<const char*>(db.descriptors.col(static_cast<Eigen::Index>(r)).data()),
                 static_cast<std::streamsize>(db.dim() * sizeof(float)));
    }
    if (!os) throw ConfigError("write failed for " + path.string());
}

DescriptorDB load_db(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path.string());
    io::expect_magic(is, "PDB1");
    const auto count = io::read_le<std::uint32_t>(is);
    const auto dim = io::read_le<std::uint32_t>(is);
    if (dim == 0 || dim > (1u << 16)) throw FormatError("implausible descriptor dimension");
    DescriptorDB db;
    db.descriptors.resize(dim, 0);
    std::vector<float> buf(dim);
    for (std::uint32_t r = 0; r < count; ++r) {
        const auto c = io::read_le<std::uint32_t>(is);
        Eigen::Vector4f q;
        for (int k = 0; k < 4; ++k) q(k) = io::read_le<float>(is);
        io::read_bytes(is, reinterpret_cast<char*>(buf.data()), dim * sizeof(float));
        db.push_back(Eigen::Map<const Eigen::VectorXf>(buf.data(), dim), c, from_wxyz<float>(q));
    }
    io::expect_eof(is);
    return db;
}

}  // namespace mtlpose
