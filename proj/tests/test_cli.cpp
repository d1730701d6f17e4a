#include <doctest.h>

#include "partgraph/cli.hpp"
#include "partgraph/mesh_io.hpp"
#include "partgraph/serialization.hpp"
#include "partgraph/synthetic.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace partgraph;
namespace fs = std::filesystem;

namespace {

struct TempRoot {
    fs::path path;

    explicit TempRoot(const std::string& name)
        : path(fs::temp_directory_path() / ("partgraph_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    TempRoot(const TempRoot&) = delete;
    TempRoot& operator=(const TempRoot&) = delete;
    ~TempRoot() { fs::remove_all(path); }
};

// Runs the CLI in-process with stdout/stderr redirected into strings.
int run(const std::vector<std::string>& args, std::string* out = nullptr,
        std::string* err = nullptr) {
    std::vector<const char*> argv;
    argv.push_back("partgraph");
    for (const std::string& a : args) {
        argv.push_back(a.c_str());
    }

    std::ostringstream out_stream, err_stream;
    std::streambuf* old_out = std::cout.rdbuf(out_stream.rdbuf());
    std::streambuf* old_err = std::cerr.rdbuf(err_stream.rdbuf());
    const int code = run_cli(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);

    if (out) {
        *out = out_stream.str();
    }
    if (err) {
        *err = err_stream.str();
    }
    return code;
}

bool contains(const std::string& text, const std::string& needle) {
    return text.find(needle) != std::string::npos;
}

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        n += entry.is_regular_file() ? 1 : 0;
    }
    return n;
}

fs::path write_cube(const fs::path& dir) {
    const fs::path file = dir / "cube.off";
    write_text_file_atomic(file, write_off(make_box(0.5, 0.5, 0.5, 1)));
    return file;
}

} // namespace

TEST_CASE("gradcheck passes on a fresh build and exits zero") {
    std::string out;
    CHECK(run({"gradcheck"}, &out) == 0);
    CHECK(contains(out, "resolved config (gradcheck):"));
    CHECK(contains(out, "pass"));
    CHECK(!contains(out, "FAIL"));
}

TEST_CASE("usage errors exit with one and name the problem") {
    std::string err;

    CHECK(run({}, nullptr, &err) == 1); // a subcommand is required

    CHECK(run({"gradcheck", "--bogus"}, nullptr, &err) == 1);
    CHECK(contains(err, "--bogus"));

    CHECK(run({"sample"}, nullptr, &err) == 1);
    CHECK(contains(err, "--mesh"));

    CHECK(run({"frobnicate"}, nullptr, &err) == 1);

    // Constrained choice flags reject unknown values.
    CHECK(run({"train", "--data", "x", "--out", "y", "--pooling", "avg"}, nullptr, &err) == 1);
}

TEST_CASE("help exits zero") {
    std::string out;
    CHECK(run({"--help"}, &out) == 0);
    CHECK(contains(out, "synth"));
    CHECK(contains(out, "gradcheck"));
}

TEST_CASE("runtime failures exit with two") {
    std::string err;
    CHECK(run({"sample", "--mesh", "/nonexistent/mesh.off", "--out", "/tmp/out.graph"},
              nullptr, &err) == 2);
    CHECK(contains(err, "error:"));
}

TEST_CASE("sample with zero max parts warns and writes an empty graph") {
    TempRoot root("zeroparts");
    const fs::path mesh = write_cube(root.path);
    const fs::path out_file = root.path / "cube.graph";

    std::string out, err;
    CHECK(run({"sample", "--mesh", mesh.string(), "--out", out_file.string(), "--max-parts",
               "0"},
              &out, &err) == 0);
    CHECK(contains(out, "resolved config (sample):"));
    CHECK(contains(out, "max_parts = 0"));
    CHECK(contains(err, "warning"));

    const FeaturizedGraph graph = load_part_graph(read_text_file(out_file));
    CHECK(graph.parts.empty());
    CHECK(graph.edges.empty());
}

TEST_CASE("sample writes identical bytes on identical reruns") {
    TempRoot root("samplebytes");
    const fs::path mesh = write_cube(root.path);
    const fs::path first = root.path / "a.graph";
    const fs::path second = root.path / "b.graph";

    const std::vector<std::string> common = {"--mesh", mesh.string(), "--points", "40",
                                             "--max-parts", "8", "--seed", "9"};
    std::vector<std::string> args_a = {"sample", "--out", first.string()};
    args_a.insert(args_a.end(), common.begin(), common.end());
    std::vector<std::string> args_b = {"sample", "--out", second.string()};
    args_b.insert(args_b.end(), common.begin(), common.end());

    REQUIRE(run(args_a) == 0);
    REQUIRE(run(args_b) == 0);
    CHECK(read_text_file(first) == read_text_file(second));

    const FeaturizedGraph graph = load_part_graph(read_text_file(first));
    CHECK(!graph.parts.empty());
    for (const Matrix& part : graph.parts) {
        CHECK(part.rows() == 40);
        CHECK(part.cols() == 4);
    }
}

TEST_CASE("inspect prints mesh and part statistics") {
    TempRoot root("inspect");
    const fs::path mesh = write_cube(root.path);

    std::string out;
    CHECK(run({"inspect", "--mesh", mesh.string()}, &out) == 0);
    CHECK(contains(out, "resolved config (inspect):"));
    CHECK(contains(out, "vertices 8"));
    CHECK(contains(out, "triangles 12"));
    CHECK(contains(out, "parts "));
    CHECK(contains(out, "accumulated_angle"));
}

TEST_CASE("config files fill in flags and explicit flags win") {
    TempRoot root("config");
    const fs::path mesh = write_cube(root.path);
    const fs::path cfg = root.path / "settings.ini";
    write_text_file_atomic(cfg, "[sample]\npoints=30\nmax-parts=6\n");

    // File value applies when the flag is absent.
    const fs::path from_file = root.path / "file.graph";
    std::string out;
    REQUIRE(run({"sample", "--config", cfg.string(), "--mesh", mesh.string(), "--out",
                 from_file.string()},
                &out) == 0);
    CHECK(contains(out, "points = 30"));
    CHECK(contains(out, "max_parts = 6"));
    CHECK(load_part_graph(read_text_file(from_file)).parts[0].rows() == 30);

    // The command line overrides the file.
    const fs::path from_flag = root.path / "flag.graph";
    REQUIRE(run({"sample", "--config", cfg.string(), "--mesh", mesh.string(), "--out",
                 from_flag.string(), "--points", "40"},
                &out) == 0);
    CHECK(contains(out, "points = 40"));
    CHECK(contains(out, "max_parts = 6"));
    CHECK(load_part_graph(read_text_file(from_flag)).parts[0].rows() == 40);
}

TEST_CASE("the full pipeline runs end to end and reproduces byte-exact artifacts") {
    TempRoot root("pipeline");
    const fs::path data = root.path / "data";
    const fs::path cache = root.path / "cache";
    const fs::path ckpt_a = root.path / "model_a.txt";
    const fs::path ckpt_b = root.path / "model_b.txt";

    // synth: 4 classes x (2 train + 1 test).
    std::string out;
    REQUIRE(run({"synth", "--out", data.string(), "--n-train", "2", "--n-test", "1", "--seed",
                 "3"},
                &out) == 0);
    CHECK(contains(out, "resolved config (synth):"));
    CHECK(contains(out, "wrote 12 meshes"));
    CHECK(count_files(data / "box" / "train") == 2);
    CHECK(count_files(data / "sphere" / "test") == 1);

    // synth determinism: a second run with the same seed writes the same bytes.
    const fs::path data_twin = root.path / "data_twin";
    REQUIRE(run({"synth", "--out", data_twin.string(), "--n-train", "2", "--n-test", "1",
                 "--seed", "3"}) == 0);
    CHECK(read_text_file(data / "box" / "train" / "box_0000.off") ==
          read_text_file(data_twin / "box" / "train" / "box_0000.off"));

    const std::vector<std::string> sampling = {"--points", "25", "--max-parts", "4", "--lrf",
                                               "z"};

    // featurize both splits into the cache.
    std::vector<std::string> feat_args = {"featurize", "--data", data.string(), "--cache",
                                          cache.string()};
    feat_args.insert(feat_args.end(), sampling.begin(), sampling.end());
    REQUIRE(run(feat_args, &out) == 0);
    CHECK(contains(out, "resolved config (featurize):"));
    CHECK(contains(out, "featurized 8 train graphs"));
    CHECK(contains(out, "featurized 4 test graphs"));
    CHECK(count_files(cache) == 12);

    // train twice with identical arguments: identical checkpoint bytes.
    std::vector<std::string> train_args = {"train", "--data",  data.string(),
                                           "--cache", cache.string(), "--epochs", "2"};
    train_args.insert(train_args.end(), sampling.begin(), sampling.end());

    std::vector<std::string> train_a = train_args;
    train_a.insert(train_a.end(), {"--out", ckpt_a.string()});
    REQUIRE(run(train_a, &out) == 0);
    CHECK(contains(out, "resolved config (train):"));
    CHECK(contains(out, "epoch\tloss\ttrain_acc\tval_acc"));
    CHECK(contains(out, "\n1\t"));
    CHECK(contains(out, "\n2\t"));
    CHECK(contains(out, "wrote checkpoint"));

    std::vector<std::string> train_b = train_args;
    train_b.insert(train_b.end(), {"--out", ckpt_b.string()});
    REQUIRE(run(train_b) == 0);
    CHECK(read_text_file(ckpt_a) == read_text_file(ckpt_b));

    const Checkpoint ckpt = load_checkpoint(read_text_file(ckpt_a));
    CHECK(ckpt.model.n_classes == 4);
    CHECK(ckpt.train.epochs == 2);

    // eval prints metrics, the confusion matrix, and the baseline.
    std::vector<std::string> eval_args = {"eval", "--data", data.string(), "--cache",
                                          cache.string(), "--checkpoint", ckpt_a.string()};
    eval_args.insert(eval_args.end(), sampling.begin(), sampling.end());
    REQUIRE(run(eval_args, &out) == 0);
    CHECK(contains(out, "resolved config (eval):"));
    CHECK(contains(out, "accuracy "));
    CHECK(contains(out, "class_accuracy "));
    CHECK(contains(out, "confusion"));
    CHECK(contains(out, "box"));
    CHECK(contains(out, "majority_class_baseline"));

    // eval against a dataset with a different class count: runtime error.
    fs::remove_all(data / "cone");
    fs::remove_all(data / "sphere");
    std::string err;
    CHECK(run(eval_args, &out, &err) == 2);
    CHECK(contains(err, "error:"));
    CHECK(contains(err, "classes"));
}
