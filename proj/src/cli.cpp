#include "mtlpose/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtlpose/eval.hpp"
#include "mtlpose/retrieval.hpp"
#include "mtlpose/train.hpp"

namespace mtlpose {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

fs::path default_out() {
    const char* env = std::getenv(kOutDirEnv);
    return env && *env ? fs::path(env) : fs::path(".");
}

fs::path resolve_out(const std::string& flag) {
    fs::path out = flag.empty() ? default_out() : fs::path(flag);
    fs::create_directories(out);
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << text;
    if (!os) throw ConfigError("write failed for " + path.string());
}

json read_json(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open " + path.string());
    return json::parse(is);
}

json to_json(const NetConfig& c) {
    return {{"architecture", std::string(to_string(c.architecture))},
            {"descriptor_dim", c.descriptor_dim},
            {"input_size", c.input_size},
            {"width_divisor", c.width_divisor},
            {"seed", c.seed}};
}

json to_json(const LossConfig& c) { return {{"lambda", c.lambda}, {"gamma", c.gamma}}; }

json to_json(const NoiseConfig& c) {
    return {{"octaves", c.octaves}, {"persistence", c.persistence}, {"base_frequency", c.base_frequency}};
}

json to_json(const RenderConfig& c) {
    return {{"patch_size", c.patch_size},
            {"camera_distance", c.camera_distance},
            {"cube_half", c.cube_half},
            {"focal", c.focal_px()}};
}

json to_json(const EvalConfig& c) { return {{"thresholds", c.thresholds}}; }

json to_json(const TrainConfig& c) {
    return {{"net", to_json(c.net)},
            {"loss", to_json(c.loss)},
            {"noise", to_json(c.noise)},
            {"mining",
             {{"pusher_min_angle_deg", c.mining.pusher_min_angle * kRadToDeg},
              {"cross_class_probability", c.mining.cross_class_probability}}},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"seed", c.seed}};
}

// Dataset-level fields of the run configuration, taken from the manifest.
json dataset_fields(const fs::path& data) {
    json j = {{"dataset", data.string()}};
    const fs::path manifest = data / "manifest.json";
    if (!fs::exists(manifest)) return j;
    const json m = read_json(manifest);
    j["level"] = m.value("level", json());
    json objects = json::array();
    for (const auto& o : m.value("objects", json::array())) objects.push_back(o.value("name", ""));
    j["objects"] = objects;
    return j;
}

NoiseConfig noise_from_manifest(const fs::path& data) {
    NoiseConfig nc;
    const fs::path manifest = data / "manifest.json";
    if (!fs::exists(manifest)) return nc;
    const json m = read_json(manifest);
    if (!m.contains("noise")) return nc;
    const json& n = m["noise"];
    nc.octaves = n.value("octaves", nc.octaves);
    nc.persistence = n.value("persistence", nc.persistence);
    nc.base_frequency = n.value("base_frequency", nc.base_frequency);
    return nc;
}

void write_run_config(const fs::path& out, json cfg) {
    write_text(out / "run_config.json", cfg.dump(2) + "\n");
}

struct TrainFlags {
    std::string preset;
    std::string arch = "baseline";
    int dim = 64;
    double lambda = 0.5;
    double gamma = 10.0;
    int epochs = 30;
    int batch = 0;
    double lr = 1e-3;
    std::uint64_t seed = 0;
};

void add_train_flags(CLI::App* sub, TrainFlags& f, bool with_lambda) {
    sub->add_option("--preset", f.preset, "network preset")->check(CLI::IsMember({"desk"}));
    sub->add_option("--arch", f.arch, "trunk architecture")->check(CLI::IsMember({"baseline", "deeper"}));
    sub->add_option("--dim", f.dim, "descriptor dimension")->check(CLI::PositiveNumber);
    if (with_lambda) sub->add_option("--lambda", f.lambda, "descriptor loss weight")->check(CLI::Range(0.0, 1.0));
    sub->add_option("--gamma", f.gamma, "margin for pushers of another class");
    sub->add_option("--epochs", f.epochs, "training epochs")->check(CLI::NonNegativeNumber);
    sub->add_option("--batch", f.batch, "batch size, a multiple of 3 (default 300, desk preset 60 on small splits)");
    sub->add_option("--lr", f.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    sub->add_option("--seed", f.seed, "initialization and sampling seed");
}

TrainConfig resolve_train(const TrainFlags& f, const DatasetSplit& train, const fs::path& data) {
    TrainConfig cfg;
    const bool desk = f.preset == "desk";
    if (desk) {
        cfg.net = desk_preset(f.seed);
        if (train.patch_size != cfg.net.input_size)
            throw ConfigError("desk preset expects " + std::to_string(cfg.net.input_size) + " px patches, dataset has " +
                              std::to_string(train.patch_size));
    } else {
        cfg.net.input_size = train.patch_size;
    }
    cfg.net.architecture = architecture_from_string(f.arch);
    cfg.net.descriptor_dim = f.dim;
    cfg.net.seed = f.seed;
    cfg.net.validate();
    cfg.loss.lambda = f.lambda;
    cfg.loss.gamma = f.gamma;
    cfg.loss.validate();
    cfg.noise = noise_from_manifest(data);
    cfg.epochs = f.epochs;
    cfg.batch_size = f.batch > 0 ? f.batch : (desk ? desk_batch_size(train.size()) : 300);
    cfg.learning_rate = f.lr;
    cfg.seed = f.seed;
    return cfg;
}

std::string log_csv(const std::vector<EpochLog>& log) {
    std::ostringstream os;
    os << std::setprecision(9) << "epoch,l_pose,l_triplets,l_pairs,l_mtl,seconds\n";
    for (const auto& e : log)
        os << e.epoch << "," << e.pose << "," << e.triplets << "," << e.pairs << "," << e.total << "," << e.seconds
           << "\n";
    return os.str();
}

std::string join_args(const std::vector<std::string>& args) {
    std::string s;
    for (std::size_t i = 1; i < args.size(); ++i) s += (i > 1 ? " " : "") + args[i];
    return s;
}

int cmd_gen(const std::vector<std::string>& objects, int level, std::uint64_t seed, const std::string& out_flag,
            const std::string& preset, int patch, double scale, const RollSweep& sweep) {
    SplitConfig cfg;
    cfg.level = level;
    cfg.seed = seed;
    cfg.sweep = sweep;
    cfg.render.patch_size = patch > 0 ? patch : (preset == "desk" ? desk_preset().input_size : 64);
    cfg.render.validate();

    std::vector<ObjectSpec> specs;
    for (const auto& token : objects) specs.push_back(parse_object(token, scale));
    const Splits splits = build_splits(specs, cfg);
    for (const auto& w : splits.warnings) std::cerr << "warning: " << w << "\n";

    const fs::path out = resolve_out(out_flag);
    save_split(splits.train, out / "train.pmd");
    save_split(splits.db, out / "db.pmd");
    save_split(splits.test, out / "test.pmd");

    json objs = json::array();
    for (std::size_t i = 0; i < specs.size(); ++i)
        objs.push_back({{"class", i},
                        {"name", specs[i].mesh.name},
                        {"source", objects[i]},
                        {"sampling", std::string(to_string(specs[i].sampling))},
                        {"vertices", specs[i].mesh.vertices.size()},
                        {"triangles", specs[i].mesh.triangles.size()}});
    const json manifest = {
        {"objects", objs},
        {"level", level},
        {"rolls", {{"start_deg", sweep.start_deg}, {"end_deg", sweep.end_deg}, {"stride_deg", sweep.stride_deg}}},
        {"render", to_json(cfg.render)},
        {"noise", to_json(cfg.noise)},
        {"seed", seed},
        {"counts", {{"train", splits.train.size()}, {"db", splits.db.size()}, {"test", splits.test.size()}}},
        {"warnings", splits.warnings}};
    write_text(out / "manifest.json", manifest.dump(2) + "\n");

    json objects_json = objects;
    write_run_config(out, {{"command", "gen"},
                           {"dataset", out.string()},
                           {"objects", objects_json},
                           {"level", level},
                           {"seed", seed},
                           {"scale", scale},
                           {"render", to_json(cfg.render)}});
    std::cout << "train " << splits.train.size() << ", db " << splits.db.size() << ", test " << splits.test.size()
              << " samples -> " << out.string() << "\n";
    return kExitOk;
}

int cmd_train(const fs::path& data, const TrainFlags& flags, const std::string& out_flag,
              const std::string& weights_flag) {
    const DatasetSplit train = load_split(data / "train.pmd", SplitRole::train);
    const TrainConfig cfg = resolve_train(flags, train, data);
    const fs::path out = resolve_out(out_flag);
    const fs::path weights = weights_flag.empty() ? out / "weights.pmw" : fs::path(weights_flag);

    const TrainResult result = train_network(train, cfg, [](const EpochLog& e, const Network<float>&) {
        std::cout << "epoch " << e.epoch << "  L_pose " << e.pose << "  L_triplets " << e.triplets << "  L_pairs "
                  << e.pairs << "  L_MTL " << e.total << "  (" << e.seconds << " s)\n";
    });
    save_weights(result.net, weights);
    write_text(out / "train_log.csv", log_csv(result.log));

    json rc = dataset_fields(data);
    rc["command"] = "train";
    rc["weights"] = weights.string();
    rc["train"] = to_json(cfg);
    rc["epochs"] = cfg.epochs;
    rc["seed"] = cfg.seed;
    rc["net"] = to_json(cfg.net);
    rc["loss"] = to_json(cfg.loss);
    if (result.failure) rc["failure"] = *result.failure;
    write_run_config(out, rc);

    if (result.failure) {
        std::cerr << "error: " << *result.failure << "; saved last good weights to " << weights.string() << "\n";
        return kExitNumerical;
    }
    std::cout << "weights -> " << weights.string() << "\n";
    return kExitOk;
}

int cmd_eval(const fs::path& data, const fs::path& weights, const std::string& mode, const std::string& db_flag,
             const std::string& save_db_flag, const EvalConfig& ecfg, bool features, const std::string& out_flag) {
    ecfg.validate();
    const Network<float> net = load_weights(weights);
    const DatasetSplit test = load_split(data / "test.pmd", SplitRole::test);
    if (test.patch_size != net.config().input_size)
        throw ConfigError("weights expect " + std::to_string(net.config().input_size) + " px patches, dataset has " +
                          std::to_string(test.patch_size));
    const fs::path out = resolve_out(out_flag);

    json rc = dataset_fields(data);
    rc["command"] = "eval";
    rc["weights"] = weights.string();
    rc["net"] = to_json(net.config());
    rc["eval"] = to_json(ecfg);
    rc["mode"] = mode;

    if (mode != "regression") {
        DescriptorDB db;
        if (!db_flag.empty()) {
            db = load_db(db_flag);
            if (db.dim() != net.descriptor_dim()) throw ConfigError("database dimension does not match the weights");
        } else {
            db = build_db(net, load_split(data / "db.pmd", SplitRole::db));
        }
        if (!save_db_flag.empty()) save_db(db, save_db_flag);
        const EvalReport r = evaluate_nn(net, db, test, ecfg);
        write_report_csv(r, out / "eval_nn.csv");
        std::cout << "nn: classification " << *r.classification << ", mean " << r.mean << " deg, median " << r.median
                  << " deg\n";
    }
    if (mode != "nn") {
        const EvalReport r = evaluate_regression(net, test, ecfg);
        write_report_csv(r, out / "eval_regression.csv");
        std::cout << "regression: mean " << r.mean << " deg, median " << r.median << " deg\n";
    }
    if (features) {
        if (auto warning = export_features(net, test, out / "features.csv")) std::cerr << "warning: " << *warning << "\n";
    }
    write_run_config(out, rc);
    return kExitOk;
}

int cmd_bench(const fs::path& data, const fs::path& weights, const std::vector<std::uint32_t>& counts, int reps,
              int warmup, const std::string& out_flag) {
    if (counts.size() < 2) throw ConfigError("--counts needs at least two object counts");
    const Network<float> net = load_weights(weights);
    const DatasetSplit db = load_split(data / "db.pmd", SplitRole::db);
    const DatasetSplit test = load_split(data / "test.pmd", SplitRole::test);
    const auto rows = scalability_bench(net, db, test, counts, reps, warmup);
    const fs::path out = resolve_out(out_flag);
    write_text(out / "bench.csv", bench_csv(rows));
    json rc = dataset_fields(data);
    rc["command"] = "bench";
    rc["weights"] = weights.string();
    rc["net"] = to_json(net.config());
    rc["counts"] = counts;
    rc["reps"] = reps;
    rc["warmup"] = warmup;
    write_run_config(out, rc);
    std::cout << bench_csv(rows);
    return kExitOk;
}

int cmd_sweep(const fs::path& data, const TrainFlags& flags, const std::vector<double>& lambdas, int seeds,
              const EvalConfig& ecfg, const std::string& out_flag, const std::string& echo) {
    for (double l : lambdas)
        if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("lambda values must lie in [0, 1]");
    if (seeds < 1) throw ConfigError("--seeds must be positive");
    const Splits splits = load_dataset(data);
    const TrainConfig recipe = resolve_train(flags, splits.train, data);
    std::vector<std::uint64_t> seed_list;
    for (int i = 0; i < seeds; ++i) seed_list.push_back(flags.seed + static_cast<std::uint64_t>(i));

    const auto rows = lambda_sweep(splits, recipe, lambdas, seed_list, ecfg, [](const SweepRow& r) {
        std::cout << "lambda " << r.lambda << " seed " << r.seed << ": nn median " << r.nn.median << " deg";
        if (r.regression) std::cout << ", regression median " << r.regression->median << " deg";
        std::cout << (r.failure ? " (numerical failure)" : "") << "\n";
    });
    const fs::path out = resolve_out(out_flag);
    const json resolved = to_json(recipe);
    write_text(out / "sweep.csv", sweep_csv(rows, "flags: " + echo + "\nrecipe: " + resolved.dump()));

    json rc = dataset_fields(data);
    rc["command"] = "sweep";
    rc["train"] = resolved;
    rc["lambdas"] = lambdas;
    rc["seeds"] = seed_list;
    rc["eval"] = to_json(ecfg);
    rc["epochs"] = recipe.epochs;
    write_run_config(out, rc);
    return kExitOk;
}

}  // namespace

ObjectSpec parse_object(const std::string& token, double scale) {
    std::string name = token;
    std::optional<SamplingKind> sampling;
    if (const auto colon = token.rfind(':'); colon != std::string::npos) {
        sampling = sampling_kind_from_string(token.substr(colon + 1));
        name = token.substr(0, colon);
    }
    ObjectSpec spec;
    PrimitiveKind kind{};
    bool primitive = true;
    try {
        kind = primitive_from_string(name);
    } catch (const ConfigError&) {
        primitive = false;
    }
    if (primitive) {
        spec.mesh = gen_primitive(kind, scale);
        spec.sampling = sampling.value_or(default_sampling(kind));
    } else {
        if (!fs::is_regular_file(name)) throw ConfigError("'" + name + "' is neither a primitive kind nor a mesh file");
        spec.mesh = parse_mesh_file(name);
        validate(spec.mesh);
        spec.sampling = sampling.value_or(SamplingKind::regular);
    }
    return spec;
}

Splits load_dataset(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("dataset directory " + dir.string() + " does not exist");
    Splits s;
    s.train = load_split(dir / "train.pmd", SplitRole::train);
    s.db = load_split(dir / "db.pmd", SplitRole::db);
    s.test = load_split(dir / "test.pmd", SplitRole::test);
    if (s.db.patch_size != s.train.patch_size || s.test.patch_size != s.train.patch_size)
        throw ConfigError("split files disagree on the patch size");
    return s;
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Multi-task pose descriptors from synthetic depth patches"};
    app.require_subcommand(1);

    std::string out;
    std::string preset;
    std::uint64_t seed = 0;

    auto* gen = app.add_subcommand("gen", "render train/db/test splits");
    std::vector<std::string> objects{"box", "pyramid", "cylinder", "lshape", "bowl"};
    int level = 2;
    int patch = 0;
    double scale = kDefaultPrimitiveScale;
    RollSweep sweep;
    gen->add_option("--objects", objects, "kind[:sampling] or mesh path, comma separated")->delimiter(',');
    gen->add_option("--level", level, "icosphere subdivision level")->check(CLI::Range(0, kMaxIcosphereLevel - 1));
    gen->add_option("--seed", seed, "noise seed");
    gen->add_option("--out", out, "output directory");
    gen->add_option("--preset", preset, "patch size preset")->check(CLI::IsMember({"desk"}));
    gen->add_option("--patch-size", patch, "patch edge in pixels")->check(CLI::PositiveNumber);
    gen->add_option("--scale", scale, "largest extent of procedural objects, meters");
    gen->add_option("--roll-start", sweep.start_deg, "first in-plane rotation, degrees");
    gen->add_option("--roll-end", sweep.end_deg, "last in-plane rotation, degrees");
    gen->add_option("--roll-stride", sweep.stride_deg, "in-plane rotation step, degrees");

    std::string data;
    std::string weights;
    TrainFlags tflags;
    auto* train = app.add_subcommand("train", "train the network");
    train->add_option("--data", data, "dataset directory")->required();
    train->add_option("--out", out, "output directory");
    train->add_option("--weights", weights, "weights file (default <out>/weights.pmw)");
    add_train_flags(train, tflags, true);

    std::string mode = "both";
    std::string db_path, save_db_path;
    EvalConfig ecfg;
    bool features = false;
    auto* eval = app.add_subcommand("eval", "evaluate nearest-neighbor retrieval and regression");
    eval->add_option("--data", data, "dataset directory")->required();
    eval->add_option("--weights", weights, "weights file")->required()->check(CLI::ExistingFile);
    eval->add_option("--mode", mode, "nn, regression or both")->check(CLI::IsMember({"nn", "regression", "both"}));
    eval->add_option("--db", db_path, "descriptor database file instead of building from db.pmd")
        ->check(CLI::ExistingFile);
    eval->add_option("--save-db", save_db_path, "write the descriptor database");
    eval->add_option("--thresholds", ecfg.thresholds, "accuracy thresholds, degrees")->delimiter(',');
    eval->add_flag("--features", features, "export test descriptors with PCA coordinates");
    eval->add_option("--out", out, "output directory");

    std::vector<std::uint32_t> counts;
    int reps = 200;
    int warmup = 10;
    auto* bench = app.add_subcommand("bench", "retrieval and regression timing per object count");
    bench->add_option("--data", data, "dataset directory")->required();
    bench->add_option("--weights", weights, "weights file")->required()->check(CLI::ExistingFile);
    bench->add_option("--counts", counts, "object counts, comma separated")->required()->delimiter(',');
    bench->add_option("--reps", reps, "timed repetitions")->check(CLI::Range(100, 1000000));
    bench->add_option("--warmup", warmup, "untimed repetitions")->check(CLI::NonNegativeNumber);
    bench->add_option("--out", out, "output directory");

    std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0};
    int seeds = 3;
    TrainFlags sflags;
    auto* sw = app.add_subcommand("sweep", "train and evaluate over a lambda grid");
    sw->add_option("--data", data, "dataset directory")->required();
    sw->add_option("--lambdas", lambdas, "lambda values, comma separated")->delimiter(',');
    sw->add_option("--seeds", seeds, "number of seeds, counted up from --seed");
    sw->add_option("--thresholds", ecfg.thresholds, "accuracy thresholds, degrees")->delimiter(',');
    sw->add_option("--out", out, "output directory");
    add_train_flags(sw, sflags, false);

    try {
        if (args.empty()) throw CLI::CallForHelp();
        std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) return cmd_gen(objects, level, seed, out, preset, patch, scale, sweep);
        if (*train) return cmd_train(data, tflags, out, weights);
        if (*eval) return cmd_eval(data, weights, mode, db_path, save_db_path, ecfg, features, out);
        if (*bench) return cmd_bench(data, weights, counts, reps, warmup, out);
        if (*sw) return cmd_sweep(data, sflags, lambdas, seeds, ecfg, out, join_args(args));
    } catch (const TrainingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

int run_cli(int argc, const char* const* argv) {
    return run_cli(std::vector<std::string>(argv, argv + argc));
}

}  // namespace mtlpose
