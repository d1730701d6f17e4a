#include "partgraph/dataset.hpp"

#include "partgraph/errors.hpp"
#include "partgraph/mesh_io.hpp"
#include "partgraph/rng.hpp"
#include "partgraph/serialization.hpp"
#include "partgraph/textio.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

namespace partgraph {

namespace fs = std::filesystem;

std::string split_name(Split split) {
    switch (split) {
    case Split::Train:
        return "train";
    case Split::Val:
        return "val";
    default:
        return "test";
    }
}

DatasetManifest scan_modelnet_layout(const fs::path& root) {
    DatasetManifest manifest;
    manifest.root = root;
    if (!fs::exists(root)) {
        throw ConfigError("dataset root '" + root.string() + "' does not exist");
    }

    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) {
            class_dirs.push_back(entry.path());
        }
    }
    std::sort(class_dirs.begin(), class_dirs.end());

    for (const fs::path& class_dir : class_dirs) {
        const std::string label = class_dir.filename().string();
        bool any_split = false;
        for (const Split split : {Split::Train, Split::Test}) {
            const fs::path split_dir = class_dir / split_name(split);
            if (!fs::exists(split_dir)) {
                continue;
            }
            any_split = true;
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(split_dir)) {
                if (entry.is_regular_file() && entry.path().extension() == ".off") {
                    files.push_back(entry.path());
                }
            }
            std::sort(files.begin(), files.end());
            for (const fs::path& file : files) {
                manifest.entries.push_back({file, label, split});
            }
        }
        if (!any_split) {
            throw MissingSplitError("class directory '" + class_dir.string() +
                                    "' has neither a train nor a test subdirectory");
        }
        manifest.class_names.push_back(label);
    }
    return manifest;
}

ClassMapping ClassMapping::parse(std::string_view text) {
    ClassMapping mapping;
    LineReader reader(text);
    std::string_view line;
    while (reader.next(line)) {
        const std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos) {
            throw ParseError("class mapping line needs 'source<TAB>target': '" +
                             std::string(line) + "'");
        }
        auto trim = [](std::string_view s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
                s.remove_prefix(1);
            }
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
                s.remove_suffix(1);
            }
            return s;
        };
        const std::string source{trim(line.substr(0, tab))};
        const std::string target{trim(line.substr(tab + 1))};
        if (source.empty() || target.empty()) {
            throw ParseError("class mapping line has an empty field: '" + std::string(line) +
                             "'");
        }
        if (!mapping.table.emplace(source, target).second) {
            throw ParseError("class '" + source + "' mapped twice");
        }
    }
    return mapping;
}

DatasetManifest apply_class_mapping(const DatasetManifest& manifest,
                                    const ClassMapping& mapping) {
    DatasetManifest out;
    out.root = manifest.root;
    std::set<std::string> classes;
    for (const DatasetEntry& entry : manifest.entries) {
        const auto it = mapping.table.find(entry.label);
        const std::string target = (it == mapping.table.end()) ? entry.label : it->second;
        if (target == ClassMapping::kIgnore) {
            continue;
        }
        out.entries.push_back({entry.file, target, entry.split});
        classes.insert(target);
    }
    out.class_names.assign(classes.begin(), classes.end());
    return out;
}

namespace {

FeaturizedGraph featurize_entry(const DatasetEntry& entry, const FeaturizeOptions& options) {
    const std::string bytes = read_text_file(entry.file);

    SamplerConfig sampler = options.sampler;
    FeatureConfig features = options.features;
    const auto it = options.class_threshold_scale.find(entry.label);
    if (it != options.class_threshold_scale.end()) {
        sampler.threshold_scale *= it->second;
    }
    // Content-derived seeds: the result depends on the mesh and the config,
    // never on dataset position or worker assignment.
    const std::uint64_t content = fnv1a64(bytes);
    sampler.seed = Rng::mix(options.sampler.seed, content);
    features.seed = Rng::mix(options.features.seed, content);

    const std::string key = cache_key(bytes, sampler, features, options.smoothing_passes);
    const fs::path cache_file =
        options.cache_dir.empty()
            ? fs::path()
            : options.cache_dir / (entry.file.stem().string() + "." + key + ".graph");
    if (!cache_file.empty() && fs::exists(cache_file)) {
        return load_part_graph(read_text_file(cache_file));
    }

    const LoadResult loaded = load_mesh(bytes, MeshFormat::Off);
    FeaturizedGraph graph = featurize_object(loaded.mesh, entry.file.stem().string(),
                                             entry.label, sampler, features,
                                             options.smoothing_passes);
    if (!cache_file.empty()) {
        fs::create_directories(options.cache_dir);
        write_text_file_atomic(cache_file, save_part_graph(graph));
    }
    return graph;
}

} // namespace

std::vector<FeaturizedGraph> featurize_split(const DatasetManifest& manifest, Split split,
                                             const FeaturizeOptions& options) {
    std::vector<const DatasetEntry*> selected;
    for (const DatasetEntry& entry : manifest.entries) {
        if (entry.split == split) {
            selected.push_back(&entry);
        }
    }

    std::vector<FeaturizedGraph> out(selected.size());
    const int jobs = std::max(1, options.jobs);
    if (jobs == 1 || selected.size() <= 1) {
        for (std::size_t i = 0; i < selected.size(); ++i) {
            out[i] = featurize_entry(*selected[i], options);
        }
        return out;
    }

    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= selected.size()) {
                return;
            }
            try {
                out[i] = featurize_entry(*selected[i], options);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(jobs, static_cast<int>(selected.size()));
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back(worker);
    }
    for (std::thread& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
    return out;
}

} // namespace partgraph
