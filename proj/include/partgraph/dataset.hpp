#pragma once

#include "partgraph/part_features.hpp"
#include "partgraph/part_sampling.hpp"
#include "partgraph/pipeline.hpp"
#include "partgraph/types.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace partgraph {

enum class Split { Train, Val, Test };

std::string split_name(Split split);

struct DatasetEntry {
    std::filesystem::path file;
    std::string label;
    Split split = Split::Train;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<DatasetEntry> entries;
    std::vector<std::string> class_names; // sorted, unique
};

// Walks root/<class>/{train,test}/*.off. Directory and file order are
// sorted, so the manifest is stable across filesystems. A class directory
// missing both split subdirectories raises MissingSplitError.
DatasetManifest scan_modelnet_layout(const std::filesystem::path& root);

// Many-to-one class rename table; mapping a class to "ignore" drops it.
struct ClassMapping {
    std::map<std::string, std::string> table;

    static constexpr const char* kIgnore = "ignore";

    // Lines of `source<TAB>target`; '#' comments and blank lines skipped.
    static ClassMapping parse(std::string_view text);
};

// Renames entry labels through the mapping (absent sources keep their name),
// drops ignored entries, and rebuilds class_names from what survives.
DatasetManifest apply_class_mapping(const DatasetManifest& manifest, const ClassMapping& mapping);

struct FeaturizeOptions {
    SamplerConfig sampler;
    FeatureConfig features;
    int smoothing_passes = 1;
    std::filesystem::path cache_dir; // empty: no caching
    int jobs = 1;
    // Per-class multipliers on the sampling threshold, layered over
    // sampler.threshold_scale for classes listed here.
    std::map<std::string, Scalar> class_threshold_scale;
};

// Featurizes every entry of the chosen split, in manifest order. Per-object
// sampling and feature seeds are derived from the mesh bytes, so results are
// independent of dataset position and worker count. Cache files keyed by
// content + config are reused when present and written atomically otherwise.
std::vector<FeaturizedGraph> featurize_split(const DatasetManifest& manifest, Split split,
                                             const FeaturizeOptions& options);

} // namespace partgraph
