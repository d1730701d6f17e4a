#pragma once

#include "partgraph/mesh.hpp"
#include "partgraph/part_features.hpp"
#include "partgraph/part_sampling.hpp"
#include "partgraph/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace partgraph {

class Rng;

// A mesh reduced to its classifier input: canonical per-part point sets plus
// the part-overlap edges. This is also the on-disk part-graph payload.
struct FeaturizedGraph {
    std::string object_id;
    std::string label;
    SamplerConfig sampler;
    FeatureConfig features;
    std::vector<Matrix> parts; // each n_points x 4 (or x 3 without the angle)
    std::vector<std::pair<Index, Index>> edges;
};

// Mesh -> parts -> canonical point sets, with one normal-smoothing pass in
// between. The mesh must have its adjacency built already.
FeaturizedGraph featurize_object(const TriangleMesh& mesh, const std::string& object_id,
                                 const std::string& label, const SamplerConfig& sampler_cfg,
                                 const FeatureConfig& feature_cfg, int smoothing_passes = 1);

// Stacks every part of the graph into the (n_parts * n_points) x f matrix
// the classifier consumes, in part order.
Matrix stack_parts(const FeaturizedGraph& graph);

// Simulated occlusion for evaluation: removes round(fraction * n_parts)
// parts chosen uniformly without replacement, keeping at least one, and
// drops/reindexes the edges accordingly.
FeaturizedGraph delete_parts(const FeaturizedGraph& graph, Scalar fraction, Rng& rng);

} // namespace partgraph
