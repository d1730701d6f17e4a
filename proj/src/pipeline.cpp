#include "partgraph/pipeline.hpp"

#include "partgraph/errors.hpp"
#include "partgraph/rng.hpp"

#include <algorithm>
#include <cmath>

namespace partgraph {

FeaturizedGraph featurize_object(const TriangleMesh& mesh, const std::string& object_id,
                                 const std::string& label, const SamplerConfig& sampler_cfg,
                                 const FeatureConfig& feature_cfg, int smoothing_passes) {
    const NormalField raw = compute_triangle_normals(mesh);
    const NormalField smoothed = smooth_normals(mesh, raw, smoothing_passes);
    const AngleField angles = compute_average_angles(mesh, smoothed);

    PartGraph graph = build_part_graph(sample_parts(mesh, angles, sampler_cfg));
    const std::vector<PartPointSet> sets =
        featurize_parts(graph.parts, mesh, smoothed, angles, feature_cfg);

    FeaturizedGraph out;
    out.object_id = object_id;
    out.label = label;
    out.sampler = sampler_cfg;
    out.features = feature_cfg;
    out.parts.reserve(sets.size());
    for (const PartPointSet& set : sets) {
        out.parts.push_back(set.points);
    }
    out.edges = std::move(graph.edges);
    return out;
}

Matrix stack_parts(const FeaturizedGraph& graph) {
    if (graph.parts.empty()) {
        throw EmptyGraphError("graph '" + graph.object_id + "' has no parts");
    }
    const Eigen::Index n = graph.parts.front().rows();
    const Eigen::Index f = graph.parts.front().cols();
    Matrix stacked(static_cast<Eigen::Index>(graph.parts.size()) * n, f);
    for (std::size_t p = 0; p < graph.parts.size(); ++p) {
        if (graph.parts[p].rows() != n || graph.parts[p].cols() != f) {
            throw ShapeMismatchError("graph '" + graph.object_id + "' has ragged part shapes");
        }
        stacked.middleRows(static_cast<Eigen::Index>(p) * n, n) = graph.parts[p];
    }
    return stacked;
}

FeaturizedGraph delete_parts(const FeaturizedGraph& graph, Scalar fraction, Rng& rng) {
    const std::size_t total = graph.parts.size();
    if (total == 0) {
        throw EmptyGraphError("cannot delete parts from an empty graph");
    }
    std::size_t n_delete =
        static_cast<std::size_t>(std::llround(fraction * static_cast<Scalar>(total)));
    n_delete = std::min(n_delete, total - 1); // always keep one part

    // Partial Fisher-Yates: the first n_delete entries are the victims.
    std::vector<Index> order(total);
    for (std::size_t i = 0; i < total; ++i) {
        order[i] = static_cast<Index>(i);
    }
    for (std::size_t i = 0; i < n_delete; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.next_below(total - i));
        std::swap(order[i], order[j]);
    }

    std::vector<Index> remap(total, -1);
    FeaturizedGraph out;
    out.object_id = graph.object_id;
    out.label = graph.label;
    out.sampler = graph.sampler;
    out.features = graph.features;

    std::vector<Index> kept(order.begin() + static_cast<std::ptrdiff_t>(n_delete), order.end());
    std::sort(kept.begin(), kept.end());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        remap[static_cast<std::size_t>(kept[i])] = static_cast<Index>(i);
        out.parts.push_back(graph.parts[static_cast<std::size_t>(kept[i])]);
    }
    for (const auto& [a, b] : graph.edges) {
        const Index na = remap[static_cast<std::size_t>(a)];
        const Index nb = remap[static_cast<std::size_t>(b)];
        if (na >= 0 && nb >= 0) {
            out.edges.emplace_back(std::min(na, nb), std::max(na, nb));
        }
    }
    std::sort(out.edges.begin(), out.edges.end());
    return out;
}

} // namespace partgraph
