#include "partgraph/part_sampling.hpp"

#include "partgraph/errors.hpp"
#include "partgraph/rng.hpp"

#include <algorithm>
#include <cstddef>

namespace partgraph {

namespace {

Index draw_center(const std::vector<Index>& eligible, const TriangleMesh& mesh,
                  const SamplerConfig& cfg, Rng& rng) {
    if (!cfg.area_weighted_centers) {
        return eligible[rng.next_below(eligible.size())];
    }
    Scalar total = 0.0;
    for (Index t : eligible) {
        total += mesh.triangle_area(t);
    }
    const Scalar u = rng.next_double() * total;
    Scalar acc = 0.0;
    for (Index t : eligible) {
        acc += mesh.triangle_area(t);
        if (u < acc) {
            return t;
        }
    }
    return eligible.back();
}

Part grow_part(const TriangleMesh& mesh, const AngleField& angles, Index center,
               Scalar threshold, std::vector<char>& visited) {
    Part part;
    part.center_triangle = center;
    part.triangles.push_back(center);
    part.accumulated_angle = angles.avg_angle[static_cast<std::size_t>(center)];
    visited[static_cast<std::size_t>(center)] = 1;

    std::vector<Index> frontier{center};
    std::vector<Index> next_ring;
    while (part.accumulated_angle < threshold && !frontier.empty()) {
        next_ring.clear();
        for (Index t : frontier) {
            for (Index n : mesh.adjacency[static_cast<std::size_t>(t)]) {
                if (!visited[static_cast<std::size_t>(n)]) {
                    visited[static_cast<std::size_t>(n)] = 1;
                    next_ring.push_back(n);
                }
            }
        }
        for (Index t : next_ring) {
            part.triangles.push_back(t);
            part.accumulated_angle += angles.avg_angle[static_cast<std::size_t>(t)];
        }
        frontier = next_ring;
    }

    for (Index t : part.triangles) {
        visited[static_cast<std::size_t>(t)] = 0;
    }
    return part;
}

} // namespace

std::vector<Part> sample_parts(const TriangleMesh& mesh, const AngleField& angles,
                               const SamplerConfig& cfg) {
    const Index n = mesh.triangle_count();
    if (n == 0) {
        throw EmptyMeshError("cannot sample parts of an empty mesh");
    }

    Rng rng(cfg.seed);
    const Scalar threshold = cfg.angle_threshold * cfg.threshold_scale;
    std::vector<char> owned(static_cast<std::size_t>(n), 0);
    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    std::vector<Index> eligible;
    std::vector<Part> parts;

    while (static_cast<Index>(parts.size()) < cfg.max_parts) {
        eligible.clear();
        for (Index t = 0; t < n; ++t) {
            if (!owned[static_cast<std::size_t>(t)]) {
                eligible.push_back(t);
            }
        }
        if (eligible.empty()) {
            break;
        }
        const Index center = draw_center(eligible, mesh, cfg, rng);
        Part part = grow_part(mesh, angles, center, threshold, visited);
        for (Index t : part.triangles) {
            owned[static_cast<std::size_t>(t)] = 1;
        }
        parts.push_back(std::move(part));
    }
    return parts;
}

PartGraph build_part_graph(std::vector<Part> parts) {
    PartGraph graph;
    graph.parts = std::move(parts);

    // Invert part membership per triangle; co-listed parts share a triangle.
    Index max_triangle = -1;
    for (const Part& p : graph.parts) {
        for (Index t : p.triangles) {
            max_triangle = std::max(max_triangle, t);
        }
    }
    std::vector<std::vector<Index>> owners(static_cast<std::size_t>(max_triangle + 1));
    for (std::size_t p = 0; p < graph.parts.size(); ++p) {
        for (Index t : graph.parts[p].triangles) {
            owners[static_cast<std::size_t>(t)].push_back(static_cast<Index>(p));
        }
    }
    for (const auto& list : owners) {
        for (std::size_t a = 0; a < list.size(); ++a) {
            for (std::size_t b = a + 1; b < list.size(); ++b) {
                graph.edges.emplace_back(std::min(list[a], list[b]), std::max(list[a], list[b]));
            }
        }
    }
    std::sort(graph.edges.begin(), graph.edges.end());
    graph.edges.erase(std::unique(graph.edges.begin(), graph.edges.end()), graph.edges.end());
    return graph;
}

} // namespace partgraph
