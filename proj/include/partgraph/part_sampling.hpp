#pragma once

#include "partgraph/mesh.hpp"
#include "partgraph/types.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace partgraph {

// A connected triangle subset grown ring-by-ring from a seed triangle.
struct Part {
    Index center_triangle = -1;
    std::vector<Index> triangles; // BFS discovery order, center first
    Scalar accumulated_angle = 0.0;
};

// Nodes are parts; an edge means the two parts share at least one triangle.
// Self-loops are implied for every node and never stored.
struct PartGraph {
    std::vector<Part> parts;
    std::vector<std::pair<Index, Index>> edges; // i < j, sorted, unique
};

struct SamplerConfig {
    Scalar angle_threshold = 6.283185307179586476925286766559; // 2*pi
    Index max_parts = 32;
    std::uint64_t seed = 0;
    Scalar threshold_scale = 1.0; // test-time multiplier on the threshold
    bool area_weighted_centers = false;
};

// Grows parts by seeded BFS: pick a uniformly random triangle not owned by
// any earlier part, expand whole one-ring fronts, add each newly visited
// triangle's average angle to the accumulator, and stop after the ring that
// pushes it to angle_threshold * threshold_scale (or when the frontier dies).
// BFS may walk into triangles owned by other parts; only centers must be
// fresh. Deterministic for equal inputs.
std::vector<Part> sample_parts(const TriangleMesh& mesh, const AngleField& angles,
                               const SamplerConfig& cfg);

PartGraph build_part_graph(std::vector<Part> parts);

} // namespace partgraph
