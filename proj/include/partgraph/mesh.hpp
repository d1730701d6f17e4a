#pragma once

#include "partgraph/types.hpp"

#include <cstddef>
#include <vector>

namespace partgraph {

// Indexed triangle mesh with edge-based triangle adjacency.
//
// Invariants held after construction through build_adjacency():
//  - every triangle references valid vertices and has nonzero area,
//  - adjacency is symmetric with degree <= 3 (one entry per shared edge),
//  - each undirected edge connects at most two triangles; meshes violating
//    that are either rejected (strict) or truncated to the two largest
//    incident triangles (lenient).
struct TriangleMesh {
    std::vector<Vector3> vertices;
    std::vector<Triangle> triangles;
    std::vector<std::vector<Index>> adjacency;

    Index vertex_count() const { return static_cast<Index>(vertices.size()); }
    Index triangle_count() const { return static_cast<Index>(triangles.size()); }

    Vector3 triangle_cross(Index t) const {
        const Triangle& tri = triangles[static_cast<std::size_t>(t)];
        const Vector3& a = vertices[static_cast<std::size_t>(tri[0])];
        const Vector3& b = vertices[static_cast<std::size_t>(tri[1])];
        const Vector3& c = vertices[static_cast<std::size_t>(tri[2])];
        return (b - a).cross(c - a);
    }

    Scalar triangle_area(Index t) const { return 0.5 * triangle_cross(t).norm(); }
};

struct NormalField {
    std::vector<Vector3> triangle_normals;
    std::vector<Vector3> vertex_normals;
    bool smoothed = false;
};

// Per-triangle mean arccos-angle to the edge neighbors, in [0, pi].
// Triangles without neighbors get 0.
struct AngleField {
    std::vector<Scalar> avg_angle;
};

// Rebuilds mesh.adjacency from the triangle list. Returns the number of
// non-manifold edges found (edges with more than two incident triangles).
// In strict mode those throw NonManifoldError; otherwise the edge is kept
// between its two largest-area triangles only. Neighbor order is
// deterministic: edges in triangle-local order, partners by ascending index.
std::size_t build_adjacency(TriangleMesh& mesh, bool strict = false);

NormalField compute_triangle_normals(const TriangleMesh& mesh);

// One low-pass smoothing pass: vertex normals from incident-triangle
// averages, then triangle normals from their three vertex normals. When an
// average cancels out (norm < 1e-12), the element keeps its raw normal.
NormalField smooth_normals(const TriangleMesh& mesh, const NormalField& raw, int passes = 1);

AngleField compute_average_angles(const TriangleMesh& mesh, const NormalField& normals);

} // namespace partgraph
