#pragma once

#include "partgraph/nn/model.hpp"
#include "partgraph/pipeline.hpp"
#include "partgraph/training.hpp"
#include "partgraph/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace partgraph {

// Versioned structured-text formats. Every number is written in its
// shortest exactly-reparsing decimal form, so save/load is a bit-exact
// round trip and equal inputs produce byte-identical files.

inline constexpr int kPartGraphVersion = 1;
inline constexpr int kCheckpointVersion = 1;

std::string save_part_graph(const FeaturizedGraph& graph);
FeaturizedGraph load_part_graph(std::string_view text);

struct Checkpoint {
    int version = kCheckpointVersion;
    nn::ModelConfig model;
    TrainConfig train;
    std::vector<std::pair<std::string, Matrix>> params;
    std::vector<std::pair<std::string, Matrix>> state; // batch-norm running stats
};

// Snapshots the model's parameters and running statistics.
Checkpoint checkpoint_from_model(nn::PartGnn& model, const TrainConfig& train_cfg);

// Copies a checkpoint into a model built from the same ModelConfig; array
// names and shapes are validated against the model's registry.
void load_into_model(const Checkpoint& ckpt, nn::PartGnn& model);

std::string save_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::string_view text);

// FNV-1a, used for content-derived seeds and cache keys. Pass a previous
// result as `basis` to chain several buffers into one hash.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 14695981039346656037ull);

// Hash of mesh bytes + sampling config + feature config, as fixed-width hex.
// Any change to the mesh or either config changes the key.
std::string cache_key(std::string_view mesh_bytes, const SamplerConfig& sampler,
                      const FeatureConfig& features, int smoothing_passes);

} // namespace partgraph
