#pragma once

// Pose and classification metrics, the lambda sweep and scalability
// harnesses, and PCA feature export.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mtlpose/dataset.hpp"
#include "mtlpose/net.hpp"
#include "mtlpose/retrieval.hpp"
#include "mtlpose/train.hpp"

namespace mtlpose {

struct EvalConfig {
    std::vector<double> thresholds{10.0, 20.0, 40.0};  // degrees

    void validate() const;
};

struct ClassBreakdown {
    std::uint32_t class_id = 0;
    std::size_t samples = 0;
    std::size_t correct = 0;       // equals samples for regression reports
    double median_error = 0;       // degrees, over pose samples of this class
};

struct EvalReport {
    std::string method;
    std::size_t samples = 0;       // test samples seen
    std::size_t pose_samples = 0;  // samples entering the angular statistics
    double mean = 0, median = 0, stddev = 0;  // degrees; NaN without pose samples
    std::vector<double> thresholds;
    std::vector<double> accuracy;  // fraction of pose samples with error < threshold
    std::optional<double> classification;
    std::vector<ClassBreakdown> per_class;
};

// Angular statistics of the given errors (degrees). Population standard deviation.
EvalReport summarize_errors(const std::vector<double>& errors_deg, const EvalConfig& cfg);

using NnPredictor = std::function<std::pair<std::uint32_t, Eigen::Quaternionf>(const Sample&)>;
using PosePredictor = std::function<Eigen::Quaternionf(const Sample&)>;

// Classification over every test sample; pose statistics and threshold
// accuracies over correctly classified samples only.
EvalReport evaluate_nn(const NnPredictor& predict, const DatasetSplit& test, const EvalConfig& cfg = {});
EvalReport evaluate_nn(const Network<float>& net, const DescriptorDB& db, const DatasetSplit& test,
                       const EvalConfig& cfg = {});

// Pose statistics over every test sample, no classification.
EvalReport evaluate_regression(const PosePredictor& predict, const DatasetSplit& test, const EvalConfig& cfg = {});
EvalReport evaluate_regression(const Network<float>& net, const DatasetSplit& test, const EvalConfig& cfg = {});

std::string report_csv(const EvalReport& report);
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

struct SweepRow {
    double lambda = 0;
    std::uint64_t seed = 0;
    EvalReport nn;
    std::optional<EvalReport> regression;  // absent for lambda = 1
    std::optional<std::string> failure;
};

using SweepCallback = std::function<void(const SweepRow&)>;

// One train + eval per (lambda, seed); the seed drives both initialization
// and training. Everything else comes from `recipe`.
std::vector<SweepRow> lambda_sweep(const Splits& data, const TrainConfig& recipe, const std::vector<double>& lambdas,
                                   const std::vector<std::uint64_t>& seeds, const EvalConfig& eval = {},
                                   const SweepCallback& on_row = {});

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& header_comment = {});

// Restricted to classes [0, count).
DatasetSplit subset_classes(const DatasetSplit& split, std::uint32_t count);

// Median seconds per body over `reps` timed calls after `warmup` untimed
// ones. Calls go round-robin across the bodies, so a drift in machine speed
// affects all of them alike. Each call receives its repetition index.
std::vector<double> interleaved_median_seconds(const std::vector<std::function<void(int)>>& bodies, int reps,
                                               int warmup = 10);

// Median seconds of one forward pass / one match, cycling through the queries.
double time_forward(const Network<float>& net, const DatasetSplit& queries, int reps, int warmup = 10);
double time_match(const DescriptorDB& db, const Eigen::MatrixXf& queries, int reps, int warmup = 10);
// One median per database, timed round-robin.
std::vector<double> time_match(const std::vector<const DescriptorDB*>& dbs, const Eigen::MatrixXf& queries, int reps,
                               int warmup = 10);

struct BenchRow {
    std::uint32_t objects = 0;
    std::size_t db_rows = 0;
    double match_seconds = 0;
    double forward_seconds = 0;
    double nn_median = 0;          // degrees
    double regression_median = 0;  // degrees
};

// One row per object count, each evaluated on the first `count` classes;
// timings of all counts are interleaved.
std::vector<BenchRow> scalability_bench(const Network<float>& net, const DatasetSplit& db, const DatasetSplit& test,
                                        const std::vector<std::uint32_t>& counts, int reps, int warmup = 10);

std::string bench_csv(const std::vector<BenchRow>& rows);

struct Pca {
    Eigen::VectorXd mean;
    Eigen::MatrixXd components;  // d x k, orthonormal columns, leading first
    Eigen::VectorXd explained;   // fraction of total variance per component
};

// Rows of `data` are observations.
Pca pca(const Eigen::MatrixXd& data, int k);

// Writes class, quaternion, descriptor and the three leading PCA coordinates
// per sample. Returns a warning when PCA had to be skipped.
std::optional<std::string> export_features(const Network<float>& net, const DatasetSplit& split,
                                           const std::filesystem::path& path);

}  // namespace mtlpose
