#include "mtlpose/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace mtlpose {

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

void require_samples(const DatasetSplit& test) {
    if (test.size() == 0) throw ConfigError("evaluation split is empty");
}

std::string fmt(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os << std::setprecision(9) << v;
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << text;
    if (!os) throw ConfigError("write failed for " + path.string());
}

// Prevents the optimizer from dropping timed work.
volatile float g_sink = 0;

}  // namespace

void EvalConfig::validate() const {
    if (thresholds.empty()) throw ConfigError("at least one threshold is required");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0)) throw ConfigError("thresholds must be positive");
        if (i > 0 && !(thresholds[i] > thresholds[i - 1])) throw ConfigError("thresholds must be strictly increasing");
    }
}

EvalReport summarize_errors(const std::vector<double>& errors_deg, const EvalConfig& cfg) {
    cfg.validate();
    EvalReport r;
    r.samples = errors_deg.size();
    r.pose_samples = errors_deg.size();
    r.thresholds = cfg.thresholds;
    r.accuracy.assign(cfg.thresholds.size(), 0.0);
    if (errors_deg.empty()) {
        r.mean = r.median = r.stddev = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    const auto n = static_cast<double>(errors_deg.size());
    double sum = 0;
    for (double e : errors_deg) sum += e;
    r.mean = sum / n;
    double ss = 0;
    for (double e : errors_deg) ss += (e - r.mean) * (e - r.mean);
    r.stddev = std::sqrt(ss / n);
    r.median = median_of(errors_deg);
    for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
        const auto hits = std::count_if(errors_deg.begin(), errors_deg.end(),
                                        [&](double e) { return e < cfg.thresholds[t]; });
        r.accuracy[t] = static_cast<double>(hits) / n;
    }
    return r;
}

EvalReport evaluate_nn(const NnPredictor& predict, const DatasetSplit& test, const EvalConfig& cfg) {
    require_samples(test);
    std::vector<double> errors;
    std::map<std::uint32_t, ClassBreakdown> classes;
    std::map<std::uint32_t, std::vector<double>> class_errors;
    std::size_t correct = 0;
    for (const Sample& s : test.samples) {
        const auto [cls, pose] = predict(s);
        auto& b = classes[s.class_id];
        b.class_id = s.class_id;
        ++b.samples;
        if (cls != s.class_id) continue;
        ++correct;
        ++b.correct;
        const double e = angular_error(s.pose, pose) * kRadToDeg;
        errors.push_back(e);
        class_errors[s.class_id].push_back(e);
    }
    EvalReport r = summarize_errors(errors, cfg);
    r.method = "nn";
    r.samples = test.size();
    r.classification = static_cast<double>(correct) / static_cast<double>(test.size());
    for (auto& [id, b] : classes) {
        b.median_error = median_of(class_errors[id]);
        r.per_class.push_back(b);
    }
    return r;
}

EvalReport evaluate_nn(const Network<float>& net, const DescriptorDB& db, const DatasetSplit& test,
                       const EvalConfig& cfg) {
    if (test.patch_size != net.config().input_size) throw ConfigError("test patch size does not match network input");
    return evaluate_nn(
        [&](const Sample& s) {
            const Match m = predict_nn(net, db, s.patch);
            return std::pair{m.class_id, m.pose};
        },
        test, cfg);
}

EvalReport evaluate_regression(const PosePredictor& predict, const DatasetSplit& test, const EvalConfig& cfg) {
    require_samples(test);
    std::vector<double> errors;
    std::map<std::uint32_t, std::vector<double>> class_errors;
    for (const Sample& s : test.samples) {
        const double e = angular_error(s.pose, predict(s)) * kRadToDeg;
        errors.push_back(e);
        class_errors[s.class_id].push_back(e);
    }
    EvalReport r = summarize_errors(errors, cfg);
    r.method = "regression";
    for (auto& [id, e] : class_errors) r.per_class.push_back({id, e.size(), e.size(), median_of(e)});
    return r;
}

EvalReport evaluate_regression(const Network<float>& net, const DatasetSplit& test, const EvalConfig& cfg) {
    if (test.patch_size != net.config().input_size) throw ConfigError("test patch size does not match network input");
    return evaluate_regression([&](const Sample& s) { return predict_regression(net, s.patch); }, test, cfg);
}

std::string report_csv(const EvalReport& r) {
    std::ostringstream os;
    os << "scope,samples,pose_samples,classification,mean_deg,median_deg,std_deg";
    for (double t : r.thresholds) os << ",acc_" << fmt(t);
    os << "\n";
    os << "all," << r.samples << "," << r.pose_samples << ","
       << (r.classification ? fmt(*r.classification) : std::string()) << "," << fmt(r.mean) << ","
       << fmt(r.median) << "," << fmt(r.stddev);
    for (double a : r.accuracy) os << "," << fmt(a);
    os << "\n";
    for (const auto& b : r.per_class) {
        os << "class_" << b.class_id << "," << b.samples << "," << b.correct << ",";
        if (r.classification) os << fmt(static_cast<double>(b.correct) / static_cast<double>(b.samples));
        os << ",," << fmt(b.median_error) << ",";
        for (std::size_t t = 0; t < r.thresholds.size(); ++t) os << ",";
        os << "\n";
    }
    return os.str();
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    write_text(path, report_csv(report));
}

std::vector<SweepRow> lambda_sweep(const Splits& data, const TrainConfig& recipe, const std::vector<double>& lambdas,
                                   const std::vector<std::uint64_t>& seeds, const EvalConfig& eval,
                                   const SweepCallback& on_row) {
    for (double l : lambdas)
        if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("lambda values must lie in [0, 1]");
    eval.validate();
    std::vector<SweepRow> rows;
    for (std::uint64_t seed : seeds) {
        for (double lambda : lambdas) {
            TrainConfig cfg = recipe;
            cfg.loss.lambda = lambda;
            cfg.seed = seed;
            cfg.net.seed = seed;
            TrainResult trained = train_network(data.train, cfg);
            SweepRow row;
            row.lambda = lambda;
            row.seed = seed;
            row.failure = trained.failure;
            const DescriptorDB db = build_db(trained.net, data.db);
            row.nn = evaluate_nn(trained.net, db, data.test, eval);
            if (lambda < 1.0) row.regression = evaluate_regression(trained.net, data.test, eval);
            if (on_row) on_row(row);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& header_comment) {
    std::ostringstream os;
    if (!header_comment.empty()) {
        std::istringstream lines(header_comment);
        for (std::string line; std::getline(lines, line);) os << "# " << line << "\n";
    }
    std::vector<double> thresholds = rows.empty() ? std::vector<double>{} : rows.front().nn.thresholds;
    os << "lambda,seed,nn_classification,nn_mean_deg,nn_median_deg,nn_std_deg";
    for (double t : thresholds) os << ",nn_acc_" << fmt(t);
    os << ",reg_mean_deg,reg_median_deg,reg_std_deg";
    for (double t : thresholds) os << ",reg_acc_" << fmt(t);
    os << ",failure\n";
    for (const auto& r : rows) {
        os << fmt(r.lambda) << "," << r.seed << "," << fmt(r.nn.classification.value_or(std::nan(""))) << ","
           << fmt(r.nn.mean) << "," << fmt(r.nn.median) << "," << fmt(r.nn.stddev);
        for (double a : r.nn.accuracy) os << "," << fmt(a);
        if (r.regression) {
            os << "," << fmt(r.regression->mean) << "," << fmt(r.regression->median) << ","
               << fmt(r.regression->stddev);
            for (double a : r.regression->accuracy) os << "," << fmt(a);
        } else {
            os << ",,,";
            for (std::size_t t = 0; t < thresholds.size(); ++t) os << ",";
        }
        os << "," << (r.failure ? "numerical" : "") << "\n";
    }
    return os.str();
}

DatasetSplit subset_classes(const DatasetSplit& split, std::uint32_t count) {
    DatasetSplit out;
    out.role = split.role;
    out.patch_size = split.patch_size;
    for (const Sample& s : split.samples)
        if (s.class_id < count) out.samples.push_back(s);
    return out;
}

std::vector<double> interleaved_median_seconds(const std::vector<std::function<void(int)>>& bodies, int reps,
                                               int warmup) {
    if (reps < 1) throw ConfigError("timing needs at least one repetition");
    for (int i = 0; i < warmup; ++i)
        for (const auto& body : bodies) body(i);
    std::vector<std::vector<double>> t(bodies.size(), std::vector<double>(static_cast<std::size_t>(reps)));
    for (int i = 0; i < reps; ++i)
        for (std::size_t b = 0; b < bodies.size(); ++b) {
            const auto start = std::chrono::steady_clock::now();
            bodies[b](i);
            t[b][static_cast<std::size_t>(i)] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
    std::vector<double> out;
    for (auto& v : t) out.push_back(median_of(std::move(v)));
    return out;
}

namespace {

std::function<void(int)> forward_body(const Network<float>& net, const std::vector<Eigen::VectorXf>& inputs) {
    if (inputs.empty()) throw ConfigError("no queries to time");
    return [&net, &inputs](int i) {
        const auto out = net.forward(inputs[static_cast<std::size_t>(i) % inputs.size()]);
        g_sink = g_sink + out.pose_raw(0);
    };
}

std::function<void(int)> match_body(const DescriptorDB& db, const Eigen::MatrixXf& queries) {
    if (queries.cols() == 0) throw ConfigError("no queries to time");
    return [&db, &queries](int i) {
        const Match m = match(db, queries.col(i % queries.cols()));
        g_sink = g_sink + m.distance;
    };
}

std::vector<Eigen::VectorXf> network_inputs(const DatasetSplit& split) {
    std::vector<Eigen::VectorXf> inputs;
    for (const Sample& s : split.samples) inputs.push_back(patch_input<float>(s.patch));
    return inputs;
}

}  // namespace

double time_forward(const Network<float>& net, const DatasetSplit& queries, int reps, int warmup) {
    const auto inputs = network_inputs(queries);
    return interleaved_median_seconds({forward_body(net, inputs)}, reps, warmup).front();
}

double time_match(const DescriptorDB& db, const Eigen::MatrixXf& queries, int reps, int warmup) {
    return interleaved_median_seconds({match_body(db, queries)}, reps, warmup).front();
}

std::vector<double> time_match(const std::vector<const DescriptorDB*>& dbs, const Eigen::MatrixXf& queries, int reps,
                               int warmup) {
    std::vector<std::function<void(int)>> bodies;
    for (const DescriptorDB* db : dbs) bodies.push_back(match_body(*db, queries));
    return interleaved_median_seconds(bodies, reps, warmup);
}

std::vector<BenchRow> scalability_bench(const Network<float>& net, const DatasetSplit& db_split,
                                        const DatasetSplit& test, const std::vector<std::uint32_t>& counts,
                                        int reps, int warmup) {
    if (counts.size() < 2) throw ConfigError("scalability benchmark needs at least two object counts");
    if (reps < 100) throw ConfigError("scalability benchmark needs at least 100 repetitions");
    struct Subset {
        DatasetSplit test;
        DescriptorDB db;
        Eigen::MatrixXf queries;
        std::vector<Eigen::VectorXf> inputs;
    };
    std::vector<Subset> subsets;
    for (std::uint32_t count : counts) {
        if (count == 0) throw ConfigError("object count must be positive");
        if (count > db_split.class_count())
            throw ConfigError("object count " + std::to_string(count) + " exceeds the " +
                              std::to_string(db_split.class_count()) + " classes in the database");
        Subset s;
        const DatasetSplit db_sub = subset_classes(db_split, count);
        s.test = subset_classes(test, count);
        if (db_sub.size() == 0 || s.test.size() == 0)
            throw ConfigError("no samples for object count " + std::to_string(count));
        s.db = build_db(net, db_sub);
        s.queries.resize(net.descriptor_dim(), static_cast<Eigen::Index>(s.test.size()));
        for (std::size_t i = 0; i < s.test.size(); ++i)
            s.queries.col(static_cast<Eigen::Index>(i)) = net.forward(s.test.samples[i].patch).descriptor;
        s.inputs = network_inputs(s.test);
        subsets.push_back(std::move(s));
    }
    // all counts timed round-robin
    std::vector<std::function<void(int)>> bodies;
    for (const Subset& s : subsets) bodies.push_back(match_body(s.db, s.queries));
    for (const Subset& s : subsets) bodies.push_back(forward_body(net, s.inputs));
    const std::vector<double> t = interleaved_median_seconds(bodies, reps, warmup);

    std::vector<BenchRow> rows;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        const Subset& s = subsets[c];
        BenchRow row;
        row.objects = counts[c];
        row.db_rows = s.db.size();
        row.match_seconds = t[c];
        row.forward_seconds = t[counts.size() + c];
        row.nn_median = evaluate_nn(net, s.db, s.test).median;
        row.regression_median = evaluate_regression(net, s.test).median;
        rows.push_back(row);
    }
    return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream os;
    os << "objects,db_rows,match_seconds,forward_seconds,nn_median_deg,regression_median_deg\n";
    for (const auto& r : rows)
        os << r.objects << "," << r.db_rows << "," << fmt(r.match_seconds) << "," << fmt(r.forward_seconds) << ","
           << fmt(r.nn_median) << "," << fmt(r.regression_median) << "\n";
    return os.str();
}

Pca pca(const Eigen::MatrixXd& data, int k) {
    if (data.rows() < 3) throw ConfigError("PCA needs at least 3 samples");
    if (k < 1 || k > data.cols()) throw ConfigError("invalid number of principal components");
    Pca out;
    out.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - out.mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw DomainError("eigen-decomposition failed");
    const Eigen::Index d = data.cols();
    // Eigenvalues come in ascending order.
    out.components = eig.eigenvectors().rightCols(k).rowwise().reverse();
    const Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0);
    const double total = vals.sum();
    out.explained.resize(k);
    for (int i = 0; i < k; ++i) out.explained(i) = total > 0 ? vals(d - 1 - i) / total : 0.0;
    return out;
}

std::optional<std::string> export_features(const Network<float>& net, const DatasetSplit& split,
                                           const std::filesystem::path& path) {
    const int d = net.descriptor_dim();
    const auto n = static_cast<Eigen::Index>(split.size());
    Eigen::MatrixXd feats(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        feats.row(i) = net.forward(split.samples[static_cast<std::size_t>(i)].patch).descriptor.cast<double>().transpose();

    std::optional<std::string> warning;
    std::optional<Pca> p;
    const int k = std::min(3, d);
    if (n < 3)
        warning = "fewer than 3 samples, PCA skipped";
    else
        p = pca(feats, k);

    std::ostringstream os;
    os << std::setprecision(9);
    os << "# explained_variance";
    if (p)
        for (int i = 0; i < k; ++i) os << "," << p->explained(i);
    os << "\nclass,qw,qx,qy,qz";
    for (int j = 0; j < d; ++j) os << ",f" << j;
    for (int i = 0; i < k; ++i) os << ",pc" << (i + 1);
    os << "\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        const Sample& s = split.samples[static_cast<std::size_t>(i)];
        const auto q = to_wxyz(s.pose);
        os << s.class_id << "," << q(0) << "," << q(1) << "," << q(2) << "," << q(3);
        for (int j = 0; j < d; ++j) os << "," << feats(i, j);
        if (p) {
            const Eigen::VectorXd proj = p->components.transpose() * (feats.row(i).transpose() - p->mean);
            for (int c = 0; c < k; ++c) os << "," << proj(c);
        } else {
            for (int c = 0; c < k; ++c) os << ",";
        }
        os << "\n";
    }
    write_text(path, os.str());
    return warning;
}

}  // namespace mtlpose
