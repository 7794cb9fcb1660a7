#pragma once

// Descriptor database and brute-force nearest-neighbor lookup.

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "mtlpose/dataset.hpp"
#include "mtlpose/net.hpp"

namespace mtlpose {

// One column per database row, in database split order.
struct DescriptorDB {
    Eigen::MatrixXf descriptors;  // d x N
    std::vector<std::uint32_t> classes;
    std::vector<Eigen::Quaternionf> poses;

    int dim() const { return static_cast<int>(descriptors.rows()); }
    std::size_t size() const { return classes.size(); }
    void push_back(const Eigen::Ref<const Eigen::VectorXf>& descriptor, std::uint32_t class_id,
                   const Eigen::Quaternionf& pose);
};

DescriptorDB build_db(const Network<float>& net, const DatasetSplit& db_split);

struct Match {
    std::uint32_t class_id = 0;
    Eigen::Quaternionf pose;
    float distance = 0;  // squared Euclidean
    std::size_t row = 0;
};

// Row with the smallest squared distance; ties go to the lowest row index.
Match match(const DescriptorDB& db, const Eigen::Ref<const Eigen::VectorXf>& query);

Match predict_nn(const Network<float>& net, const DescriptorDB& db, const DepthPatch& patch);

// Normalized pose head output.
Eigen::Quaternionf predict_regression(const Network<float>& net, const DepthPatch& patch);

void save_db(const DescriptorDB& db, const std::filesystem::path& path);
DescriptorDB load_db(const std::filesystem::path& path);

}  // namespace mtlpose
