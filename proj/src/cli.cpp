#include "partgraph/cli.hpp"

#include "partgraph/dataset.hpp"
#include "partgraph/errors.hpp"
#include "partgraph/gradcheck.hpp"
#include "partgraph/mesh_io.hpp"
#include "partgraph/pipeline.hpp"
#include "partgraph/rng.hpp"
#include "partgraph/serialization.hpp"
#include "partgraph/synthetic.hpp"
#include "partgraph/textio.hpp"
#include "partgraph/training.hpp"

#include <CLI11.hpp>

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace partgraph {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kInitStream = 0x696e6974;  // model weight init
constexpr std::uint64_t kTestSetStream = 0x74657374; // synth test split

struct ExitWith {
    int code;
};

struct SamplingFlags {
    Scalar threshold = 6.283185307179586476925286766559; // one full turn
    Scalar threshold_scale = 1.0;
    Index max_parts = 32;
    Index points = 250;
    std::string lrf = "pca";
    bool no_angle = false;
    std::uint64_t seed = 0;
    bool area_weighted = false;
    int smoothing = 1;

    SamplerConfig sampler() const {
        SamplerConfig cfg;
        cfg.angle_threshold = threshold;
        cfg.threshold_scale = threshold_scale;
        cfg.max_parts = max_parts;
        cfg.seed = seed;
        cfg.area_weighted_centers = area_weighted;
        return cfg;
    }

    FeatureConfig features() const {
        FeatureConfig cfg;
        cfg.n_points = points;
        cfg.lrf_mode = lrf == "z" ? LrfMode::Z : LrfMode::Pca;
        cfg.include_angle = !no_angle;
        cfg.seed = seed;
        return cfg;
    }
};

void add_sampling_flags(CLI::App* cmd, SamplingFlags& f) {
    cmd->add_option("--threshold", f.threshold,
                    "Accumulated-angle stopping threshold in radians")
        ->capture_default_str();
    cmd->add_option("--threshold-scale", f.threshold_scale,
                    "Multiplier on the stopping threshold")
        ->capture_default_str();
    cmd->add_option("--max-parts", f.max_parts, "Maximum parts sampled per mesh")
        ->capture_default_str();
    cmd->add_option("--points", f.points, "Surface samples per part")->capture_default_str();
    cmd->add_option("--lrf", f.lrf, "Reference-frame mode")
        ->check(CLI::IsMember({"pca", "z"}))
        ->capture_default_str();
    cmd->add_flag("--no-angle-feature", f.no_angle, "Drop the average-angle point feature");
    cmd->add_option("--seed", f.seed, "Base seed for sampling and featurization")
        ->capture_default_str();
    cmd->add_flag("--area-weighted-centers", f.area_weighted,
                  "Draw part centers proportionally to triangle area");
    cmd->add_option("--smoothing-passes", f.smoothing,
                    "Normal smoothing passes before angle computation")
        ->capture_default_str();
}

// Fills in options from `key = value` lines under the [<subcommand>] section
// of an INI-style file. Explicitly passed flags keep their values, so the
// precedence is defaults < config file < command line. Sections addressed to
// other subcommands are skipped, which lets one file configure a whole
// pipeline. Required path options must still come from the command line
// because requiredness is checked before the file is read.
void apply_config_file(CLI::App& cmd, const std::string& path) {
    if (path.empty()) {
        return;
    }
    const auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())) != 0) {
            s.remove_prefix(1);
        }
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())) != 0) {
            s.remove_suffix(1);
        }
        return std::string(s);
    };

    std::map<std::string, std::string> values;
    std::string section;
    std::istringstream lines(read_text_file(path));
    std::string line;
    while (std::getline(lines, line)) {
        const std::string entry = trim(line);
        if (entry.empty() || entry.front() == '#' || entry.front() == ';') {
            continue;
        }
        if (entry.front() == '[' && entry.back() == ']') {
            section = trim(std::string_view(entry).substr(1, entry.size() - 2));
            continue;
        }
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line is not key=value or [section]: '" + entry + "'");
        }
        if (section != cmd.get_name()) {
            continue;
        }
        std::string value = trim(std::string_view(entry).substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
            value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        values[trim(std::string_view(entry).substr(0, eq))] = value;
    }

    for (const auto& [key, value] : values) {
        CLI::Option* opt = cmd.get_option_no_throw("--" + key);
        if (opt == nullptr) {
            throw ConfigError("unknown key '" + key + "' in config section [" + cmd.get_name() +
                              "]");
        }
        if (opt->count() > 0) {
            continue; // an explicit flag wins over the file
        }
        opt->add_result(value);
        opt->run_callback();
    }
}

std::string bool_str(bool b) {
    return b ? "true" : "false";
}

void kv(const std::string& key, const std::string& value) {
    std::cout << "  " << key << " = " << value << '\n';
}

void print_sampling(const SamplingFlags& f) {
    kv("threshold", format_double(f.threshold));
    kv("threshold_scale", format_double(f.threshold_scale));
    kv("max_parts", std::to_string(f.max_parts));
    kv("points", std::to_string(f.points));
    kv("lrf", f.lrf);
    kv("angle_feature", bool_str(!f.no_angle));
    kv("seed", std::to_string(f.seed));
    kv("area_weighted_centers", bool_str(f.area_weighted));
    kv("smoothing_passes", std::to_string(f.smoothing));
}

// "class=factor" items for the per-class threshold override table.
std::map<std::string, Scalar> parse_class_scales(const std::vector<std::string>& items) {
    std::map<std::string, Scalar> out;
    for (const std::string& item : items) {
        const std::size_t eq = item.find('=');
        out[item.substr(0, eq)] = parse_double(item.substr(eq + 1));
    }
    return out;
}

std::string check_class_scale(const std::string& item) {
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
        return "expected class=factor, got '" + item + "'";
    }
    try {
        parse_double(item.substr(eq + 1));
    } catch (const ParseError&) {
        return "factor in '" + item + "' is not a number";
    }
    return {};
}

void print_epoch(const EpochLog& log) {
    std::cout << format_epoch_log(log) << '\n';
}

void print_metrics(const Metrics& metrics, const std::vector<std::string>& class_names) {
    std::cout << "accuracy " << format_double(metrics.accuracy) << '\n';
    std::cout << "class_accuracy " << format_double(metrics.class_accuracy) << '\n';
    std::cout << "confusion (rows: true class, columns: predicted):\n";
    for (Eigen::Index r = 0; r < metrics.confusion.rows(); ++r) {
        std::cout << "  " << class_names[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < metrics.confusion.cols(); ++c) {
            std::cout << '\t' << metrics.confusion(r, c);
        }
        std::cout << '\n';
    }
}

DatasetManifest load_manifest(const std::string& data_dir, const std::string& mapping_file) {
    DatasetManifest manifest = scan_modelnet_layout(data_dir);
    if (!mapping_file.empty()) {
        manifest = apply_class_mapping(manifest,
                                       ClassMapping::parse(read_text_file(mapping_file)));
    }
    return manifest;
}

// ---- synth ----

struct SynthArgs {
    std::string out;
    Index n_train = 10;
    Index n_test = 4;
    std::string rotation = "z";
    Scalar min_scale = 0.2;
    Scalar max_scale = 5.0;
    Scalar occlusion_prob = 0.0;
    std::uint64_t seed = 0;
};

void run_synth(const SynthArgs& a) {
    std::cout << "resolved config (synth):\n";
    kv("out", a.out);
    kv("n_train", std::to_string(a.n_train));
    kv("n_test", std::to_string(a.n_test));
    kv("rotation", a.rotation);
    kv("min_scale", format_double(a.min_scale));
    kv("max_scale", format_double(a.max_scale));
    kv("occlusion_prob", format_double(a.occlusion_prob));
    kv("seed", std::to_string(a.seed));

    SynthConfig cfg;
    cfg.rotation = a.rotation == "none" ? RotationMode::None
                   : a.rotation == "so3" ? RotationMode::SO3
                                         : RotationMode::Z;
    cfg.min_scale = a.min_scale;
    cfg.max_scale = a.max_scale;
    cfg.occlusion_prob = a.occlusion_prob;

    std::size_t written = 0;
    for (const bool is_train : {true, false}) {
        cfg.n_per_class = is_train ? a.n_train : a.n_test;
        cfg.seed = is_train ? a.seed : Rng::mix(a.seed, kTestSetStream);
        const char* split = is_train ? "train" : "test";
        for (const SyntheticObject& obj : generate_synthetic_dataset(cfg)) {
            const fs::path dir = fs::path(a.out) / obj.class_name / split;
            fs::create_directories(dir);
            write_text_file_atomic(dir / (obj.object_id + ".off"), write_off(obj.mesh));
            ++written;
        }
    }
    std::cout << "wrote " << written << " meshes under " << a.out << '\n';
}

// ---- sample ----

struct SampleArgs {
    std::string mesh;
    std::string out;
    std::string label = "unknown";
    SamplingFlags sampling;
};

void run_sample(const SampleArgs& a) {
    std::cout << "resolved config (sample):\n";
    kv("mesh", a.mesh);
    kv("out", a.out);
    kv("label", a.label);
    print_sampling(a.sampling);

    if (a.sampling.max_parts == 0) {
        std::cerr << "warning: --max-parts is 0, the part graph will be empty\n";
    }
    const LoadResult loaded = load_mesh_file(a.mesh);
    if (loaded.degenerate_dropped > 0) {
        std::cerr << "warning: dropped " << loaded.degenerate_dropped
                  << " zero-area triangles\n";
    }
    if (loaded.nonmanifold_edges > 0) {
        std::cerr << "warning: truncated " << loaded.nonmanifold_edges
                  << " non-manifold edges\n";
    }
    const FeaturizedGraph graph =
        featurize_object(loaded.mesh, fs::path(a.mesh).stem().string(), a.label,
                         a.sampling.sampler(), a.sampling.features(), a.sampling.smoothing);
    write_text_file_atomic(a.out, save_part_graph(graph));
    std::cout << "wrote " << a.out << ": " << graph.parts.size() << " parts, "
              << graph.edges.size() << " edges\n";
}

// ---- featurize ----

struct FeaturizeArgs {
    std::string data;
    std::string cache;
    std::string mapping;
    std::string split = "both";
    int jobs = 1;
    std::vector<std::string> class_scales;
    SamplingFlags sampling;
};

void run_featurize(const FeaturizeArgs& a) {
    std::cout << "resolved config (featurize):\n";
    kv("data", a.data);
    kv("cache", a.cache);
    kv("mapping", a.mapping.empty() ? "(none)" : a.mapping);
    kv("split", a.split);
    kv("jobs", std::to_string(a.jobs));
    print_sampling(a.sampling);

    const DatasetManifest manifest = load_manifest(a.data, a.mapping);
    FeaturizeOptions options;
    options.sampler = a.sampling.sampler();
    options.features = a.sampling.features();
    options.smoothing_passes = a.sampling.smoothing;
    options.cache_dir = a.cache;
    options.jobs = a.jobs;
    options.class_threshold_scale = parse_class_scales(a.class_scales);

    for (const Split split : {Split::Train, Split::Test}) {
        if (a.split != "both" && a.split != split_name(split)) {
            continue;
        }
        const auto graphs = featurize_split(manifest, split, options);
        std::cout << "featurized " << graphs.size() << ' ' << split_name(split)
                  << " graphs into " << a.cache << '\n';
    }
}

// ---- train ----

struct TrainArgs {
    std::string data;
    std::string cache;
    std::string mapping;
    std::string out;
    Scalar disconnect = 0.0;
    std::string pooling = "maxpool";
    Index epochs = 50;
    Scalar lr = 1e-3;
    Index batch = 8;
    std::string optimizer = "adam";
    Scalar early_stop_train = 2.0;
    Scalar early_stop_val = 2.0;
    SamplingFlags sampling;
};

void run_train(const TrainArgs& a) {
    std::cout << "resolved config (train):\n";
    kv("data", a.data);
    kv("cache", a.cache.empty() ? "(none)" : a.cache);
    kv("mapping", a.mapping.empty() ? "(none)" : a.mapping);
    kv("out", a.out);
    kv("disconnect", format_double(a.disconnect));
    kv("pooling", a.pooling);
    kv("epochs", std::to_string(a.epochs));
    kv("lr", format_double(a.lr));
    kv("batch", std::to_string(a.batch));
    kv("optimizer", a.optimizer);
    kv("early_stop_train", format_double(a.early_stop_train));
    kv("early_stop_val", format_double(a.early_stop_val));
    print_sampling(a.sampling);

    const DatasetManifest manifest = load_manifest(a.data, a.mapping);
    FeaturizeOptions options;
    options.sampler = a.sampling.sampler();
    options.features = a.sampling.features();
    options.smoothing_passes = a.sampling.smoothing;
    options.cache_dir = a.cache;

    GraphDataset train_set = make_graph_dataset(
        featurize_split(manifest, Split::Train, options), manifest.class_names);
    // The test split doubles as the validation column of the log.
    GraphDataset val_set = make_graph_dataset(featurize_split(manifest, Split::Test, options),
                                              manifest.class_names);

    nn::ModelConfig model_cfg;
    model_cfg.n_classes = static_cast<Index>(manifest.class_names.size());
    model_cfg.in_features = a.sampling.no_angle ? 3 : 4;
    model_cfg.max_parts = a.sampling.max_parts;
    model_cfg.pooling = a.pooling == "singlenode" ? nn::Pooling::SingleNode
                                                  : nn::Pooling::MaxPool;
    nn::PartGnn model(model_cfg);
    model.init_params(Rng::mix(a.sampling.seed, kInitStream));

    TrainConfig train_cfg;
    train_cfg.learning_rate = a.lr;
    train_cfg.optimizer =
        a.optimizer == "sgd-momentum" ? Optimizer::SgdMomentum : Optimizer::Adam;
    train_cfg.batch_size = a.batch;
    train_cfg.epochs = a.epochs;
    train_cfg.disconnect_rate = a.disconnect;
    train_cfg.seed = a.sampling.seed;
    train_cfg.lrf_mode = a.sampling.features().lrf_mode;
    train_cfg.include_angle = !a.sampling.no_angle;
    train_cfg.pooling = model_cfg.pooling;
    train_cfg.threshold_scale_eval = a.sampling.threshold_scale;
    train_cfg.early_stop_train_acc = a.early_stop_train;
    train_cfg.early_stop_val_acc = a.early_stop_val;

    std::cout << "epoch\tloss\ttrain_acc\tval_acc\n";
    const TrainResult result = train(model, train_set, val_set, train_cfg, &print_epoch);

    write_text_file_atomic(a.out, save_checkpoint(checkpoint_from_model(model, train_cfg)));
    std::cout << "wrote checkpoint " << a.out << '\n';
    if (result.diverged) {
        std::cerr << "error: loss went non-finite; " << a.out
                  << " holds the last finite epoch\n";
        throw ExitWith{2};
    }
}

// ---- eval ----

struct EvalArgs {
    std::string data;
    std::string cache;
    std::string mapping;
    std::string checkpoint;
    std::string split = "test";
    int jobs = 1;
    std::vector<std::string> class_scales;
    SamplingFlags sampling;
    bool scale_flag_given = false;
};

void run_eval(const EvalArgs& a) {
    const Checkpoint ckpt = load_checkpoint(read_text_file(a.checkpoint));

    SamplingFlags sampling = a.sampling;
    // The checkpoint knows how its inputs were framed; those fields override
    // the flag defaults. The eval-time threshold scale comes from the
    // checkpoint unless --threshold-scale was given explicitly.
    sampling.lrf = ckpt.train.lrf_mode == LrfMode::Z ? "z" : "pca";
    sampling.no_angle = !ckpt.train.include_angle;
    if (!a.scale_flag_given) {
        sampling.threshold_scale = ckpt.train.threshold_scale_eval;
    }

    std::cout << "resolved config (eval):\n";
    kv("data", a.data);
    kv("cache", a.cache.empty() ? "(none)" : a.cache);
    kv("mapping", a.mapping.empty() ? "(none)" : a.mapping);
    kv("checkpoint", a.checkpoint);
    kv("split", a.split);
    kv("jobs", std::to_string(a.jobs));
    print_sampling(sampling);

    const DatasetManifest manifest = load_manifest(a.data, a.mapping);
    if (static_cast<Index>(manifest.class_names.size()) != ckpt.model.n_classes) {
        throw ShapeMismatchError("checkpoint classifies " +
                                 std::to_string(ckpt.model.n_classes) +
                                 " classes but the dataset has " +
                                 std::to_string(manifest.class_names.size()));
    }

    FeaturizeOptions options;
    options.sampler = sampling.sampler();
    options.features = sampling.features();
    options.smoothing_passes = sampling.smoothing;
    options.cache_dir = a.cache;
    options.jobs = a.jobs;
    options.class_threshold_scale = parse_class_scales(a.class_scales);

    const Split split = a.split == "train" ? Split::Train : Split::Test;
    GraphDataset dataset = make_graph_dataset(featurize_split(manifest, split, options),
                                              manifest.class_names);

    nn::PartGnn model(ckpt.model);
    load_into_model(ckpt, model);
    print_metrics(evaluate(model, dataset), manifest.class_names);

    const Metrics baseline = majority_class_baseline(dataset);
    std::cout << "majority_class_baseline accuracy " << format_double(baseline.accuracy)
              << " class_accuracy " << format_double(baseline.class_accuracy) << '\n';
}

// ---- gradcheck ----

void run_gradcheck(std::uint64_t seed) {
    std::cout << "resolved config (gradcheck):\n";
    kv("seed", std::to_string(seed));
    bool all_ok = true;
    for (const nn::GradCheckResult& r : nn::run_gradient_suite(seed)) {
        std::cout << r.name << '\t' << format_double(r.max_error) << "\t(tolerance "
                  << format_double(r.tolerance) << ")\t" << (r.passed() ? "pass" : "FAIL")
                  << '\n';
        all_ok = all_ok && r.passed();
    }
    if (!all_ok) {
        std::cerr << "error: gradient check failed\n";
        throw ExitWith{2};
    }
}

// ---- inspect ----

struct InspectArgs {
    std::string mesh;
    SamplingFlags sampling;
};

void run_inspect(const InspectArgs& a) {
    std::cout << "resolved config (inspect):\n";
    kv("mesh", a.mesh);
    print_sampling(a.sampling);

    const LoadResult loaded = load_mesh_file(a.mesh);
    std::cout << "vertices " << loaded.mesh.vertices.size() << '\n';
    std::cout << "triangles " << loaded.mesh.triangles.size() << '\n';
    std::cout << "degenerate_dropped " << loaded.degenerate_dropped << '\n';
    std::cout << "nonmanifold_edges " << loaded.nonmanifold_edges << '\n';

    const NormalField smoothed = smooth_normals(loaded.mesh,
                                                compute_triangle_normals(loaded.mesh),
                                                a.sampling.smoothing);
    const AngleField angles = compute_average_angles(loaded.mesh, smoothed);
    const PartGraph graph =
        build_part_graph(sample_parts(loaded.mesh, angles, a.sampling.sampler()));

    std::cout << "parts " << graph.parts.size() << '\n';
    for (std::size_t p = 0; p < graph.parts.size(); ++p) {
        const Part& part = graph.parts[p];
        std::cout << "part " << p << ": center " << part.center_triangle << " triangles "
                  << part.triangles.size() << " accumulated_angle "
                  << format_double(part.accumulated_angle) << '\n';
    }
    std::cout << "edges " << graph.edges.size() << '\n';
    for (const auto& [i, j] : graph.edges) {
        std::cout << "edge " << i << ' ' << j << '\n';
    }
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Part-graph pipeline: mesh decomposition, canonical part features, "
                 "and graph-attention classification"};
    app.require_subcommand(1);

    // Every subcommand accepts --config FILE; keys under the matching
    // [subcommand] section fill in flags the user left unset.
    std::map<CLI::App*, std::string> config_paths;
    const auto with_config = [&config_paths](CLI::App* cmd, auto run) {
        cmd->add_option("--config", config_paths[cmd],
                        "Key=value file; the [" + cmd->get_name() +
                            "] section fills in unset flags");
        cmd->callback([&config_paths, cmd, run] {
            apply_config_file(*cmd, config_paths.at(cmd));
            run();
        });
    };

    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic mesh dataset");
    SynthArgs synth_args;
    synth->add_option("--out", synth_args.out, "Output dataset directory")->required();
    synth->add_option("--n-train", synth_args.n_train, "Training meshes per class")
        ->capture_default_str();
    synth->add_option("--n-test", synth_args.n_test, "Test meshes per class")
        ->capture_default_str();
    synth->add_option("--rotation", synth_args.rotation, "Random rotation applied per object")
        ->check(CLI::IsMember({"none", "z", "so3"}))
        ->capture_default_str();
    synth->add_option("--min-scale", synth_args.min_scale, "Lower bound of the random scale")
        ->capture_default_str();
    synth->add_option("--max-scale", synth_args.max_scale, "Upper bound of the random scale")
        ->capture_default_str();
    synth->add_option("--occlusion-prob", synth_args.occlusion_prob,
                      "Chance of cutting an object with a random half-space")
        ->capture_default_str();
    synth->add_option("--seed", synth_args.seed, "Dataset seed")->capture_default_str();
    with_config(synth, [&] { run_synth(synth_args); });

    auto* sample = app.add_subcommand("sample", "Decompose one mesh into a part-graph file");
    SampleArgs sample_args;
    sample->add_option("--mesh", sample_args.mesh, "Input mesh (.off or ascii .ply)")
        ->required();
    sample->add_option("--out", sample_args.out, "Output part-graph file")->required();
    sample->add_option("--label", sample_args.label, "Class label stored in the file")
        ->capture_default_str();
    add_sampling_flags(sample, sample_args.sampling);
    with_config(sample, [&] { run_sample(sample_args); });

    auto* featurize =
        app.add_subcommand("featurize", "Precompute part graphs for a dataset tree");
    FeaturizeArgs feat_args;
    featurize->add_option("--data", feat_args.data, "Dataset root (<class>/{train,test}/*.off)")
        ->required();
    featurize->add_option("--cache", feat_args.cache, "Directory for part-graph cache files")
        ->required();
    featurize->add_option("--mapping", feat_args.mapping,
                          "Class-mapping file (source<TAB>target, 'ignore' drops)");
    featurize->add_option("--split", feat_args.split, "Which splits to featurize")
        ->check(CLI::IsMember({"train", "test", "both"}))
        ->capture_default_str();
    featurize->add_option("--jobs", feat_args.jobs, "Parallel featurization workers")
        ->capture_default_str();
    featurize
        ->add_option("--threshold-scale-class", feat_args.class_scales,
                     "Per-class threshold multiplier, class=factor (repeatable)")
        ->check(check_class_scale);
    add_sampling_flags(featurize, feat_args.sampling);
    with_config(featurize, [&] { run_featurize(feat_args); });

    auto* train_cmd = app.add_subcommand("train", "Train a classifier on a dataset tree");
    TrainArgs train_args;
    train_cmd->add_option("--data", train_args.data, "Dataset root")->required();
    train_cmd->add_option("--cache", train_args.cache, "Part-graph cache directory");
    train_cmd->add_option("--mapping", train_args.mapping, "Class-mapping file");
    train_cmd->add_option("--out", train_args.out, "Checkpoint output path")->required();
    train_cmd->add_option("--disconnect", train_args.disconnect,
                          "Per-node disconnection rate during training")
        ->capture_default_str();
    train_cmd->add_option("--pooling", train_args.pooling, "Object pooling head")
        ->check(CLI::IsMember({"maxpool", "singlenode"}))
        ->capture_default_str();
    train_cmd->add_option("--epochs", train_args.epochs, "Training epochs")
        ->capture_default_str();
    train_cmd->add_option("--lr", train_args.lr, "Learning rate")->capture_default_str();
    train_cmd->add_option("--batch", train_args.batch, "Graphs per optimizer step")
        ->capture_default_str();
    train_cmd->add_option("--optimizer", train_args.optimizer, "Optimizer")
        ->check(CLI::IsMember({"adam", "sgd-momentum"}))
        ->capture_default_str();
    train_cmd->add_option("--early-stop-train", train_args.early_stop_train,
                          "Stop once train accuracy reaches this (>1 disables)")
        ->capture_default_str();
    train_cmd->add_option("--early-stop-val", train_args.early_stop_val,
                          "Stop once validation accuracy also reaches this (>1 disables)")
        ->capture_default_str();
    add_sampling_flags(train_cmd, train_args.sampling);
    with_config(train_cmd, [&] { run_train(train_args); });

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset tree");
    EvalArgs eval_args;
    eval_cmd->add_option("--data", eval_args.data, "Dataset root")->required();
    eval_cmd->add_option("--cache", eval_args.cache, "Part-graph cache directory");
    eval_cmd->add_option("--mapping", eval_args.mapping, "Class-mapping file");
    eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint to evaluate")
        ->required();
    eval_cmd->add_option("--split", eval_args.split, "Dataset split to evaluate")
        ->check(CLI::IsMember({"train", "test"}))
        ->capture_default_str();
    eval_cmd->add_option("--jobs", eval_args.jobs, "Parallel featurization workers")
        ->capture_default_str();
    eval_cmd
        ->add_option("--threshold-scale-class", eval_args.class_scales,
                     "Per-class threshold multiplier, class=factor (repeatable)")
        ->check(check_class_scale);
    add_sampling_flags(eval_cmd, eval_args.sampling);
    with_config(eval_cmd, [&] {
        // A threshold scale from the flag or the file overrides the one
        // recorded in the checkpoint.
        eval_args.scale_flag_given = eval_cmd->count("--threshold-scale") > 0;
        run_eval(eval_args);
    });

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
    std::uint64_t gradcheck_seed = 0;
    gradcheck->add_option("--seed", gradcheck_seed, "Suite seed")->capture_default_str();
    with_config(gradcheck, [&] { run_gradcheck(gradcheck_seed); });

    auto* inspect = app.add_subcommand("inspect", "Print part statistics for one mesh");
    InspectArgs inspect_args;
    inspect->add_option("--mesh", inspect_args.mesh, "Input mesh (.off or ascii .ply)")
        ->required();
    add_sampling_flags(inspect, inspect_args.sampling);
    with_config(inspect, [&] { run_inspect(inspect_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints help or the usage error
        return code == 0 ? 0 : 1;
    } catch (const ExitWith& e) {
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

} // namespace partgraph
