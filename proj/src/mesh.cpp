#include "partgraph/mesh.hpp"

#include "partgraph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <utility>

namespace partgraph {

namespace {

std::uint64_t edge_key(Index a, Index b) {
    if (a > b) {
        std::swap(a, b);
    }
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

} // namespace

std::size_t build_adjacency(TriangleMesh& mesh, bool strict) {
    const std::size_t n = mesh.triangles.size();
    std::unordered_map<std::uint64_t, std::vector<Index>> edge_triangles;
    edge_triangles.reserve(n * 3);
    for (std::size_t t = 0; t < n; ++t) {
        const Triangle& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e) {
            edge_triangles[edge_key(tri[e], tri[(e + 1) % 3])].push_back(static_cast<Index>(t));
        }
    }

    std::size_t nonmanifold = 0;
    for (auto& [key, tris] : edge_triangles) {
        (void)key;
        if (tris.size() <= 2) {
            continue;
        }
        ++nonmanifold;
        if (strict) {
            throw NonManifoldError("edge shared by " + std::to_string(tris.size()) + " triangles");
        }
        // Keep the two largest-area incident triangles on this edge.
        std::sort(tris.begin(), tris.end(), [&](Index a, Index b) {
            const Scalar aa = mesh.triangle_area(a);
            const Scalar ab = mesh.triangle_area(b);
            if (aa != ab) {
                return aa > ab;
            }
            return a < b;
        });
        tris.resize(2);
        std::sort(tris.begin(), tris.end());
    }

    mesh.adjacency.assign(n, {});
    for (std::size_t t = 0; t < n; ++t) {
        const Triangle& tri = mesh.triangles[t];
        auto& neighbors = mesh.adjacency[t];
        for (int e = 0; e < 3; ++e) {
            const auto& tris = edge_triangles[edge_key(tri[e], tri[(e + 1) % 3])];
            // A truncated non-manifold edge may no longer include t.
            if (std::find(tris.begin(), tris.end(), static_cast<Index>(t)) == tris.end()) {
                continue;
            }
            for (Index other : tris) {
                if (other == static_cast<Index>(t)) {
                    continue;
                }
                if (std::find(neighbors.begin(), neighbors.end(), other) == neighbors.end()) {
                    neighbors.push_back(other);
                }
            }
        }
    }
    return nonmanifold;
}

NormalField compute_triangle_normals(const TriangleMesh& mesh) {
    NormalField field;
    field.smoothed = false;
    field.triangle_normals.reserve(mesh.triangles.size());
    for (Index t = 0; t < mesh.triangle_count(); ++t) {
        const Vector3 cross = mesh.triangle_cross(t);
        const Scalar norm = cross.norm();
        if (norm < 1e-12) {
            throw DegenerateTriangleError("triangle " + std::to_string(t) + " has zero area");
        }
        field.triangle_normals.push_back(cross / norm);
    }
    return field;
}

NormalField smooth_normals(const TriangleMesh& mesh, const NormalField& raw, int passes) {
    const std::size_t nt = mesh.triangles.size();
    const std::size_t nv = mesh.vertices.size();

    std::vector<std::vector<Index>> incident(nv);
    for (std::size_t t = 0; t < nt; ++t) {
        for (Index v : mesh.triangles[t]) {
            incident[static_cast<std::size_t>(v)].push_back(static_cast<Index>(t));
        }
    }

    NormalField out;
    out.smoothed = true;
    out.triangle_normals = raw.triangle_normals;
    out.vertex_normals.assign(nv, Vector3::UnitZ());

    for (int pass = 0; pass < passes; ++pass) {
        for (std::size_t v = 0; v < nv; ++v) {
            if (incident[v].empty()) {
                continue; // unreferenced vertex, placeholder normal stays
            }
            Vector3 sum = Vector3::Zero();
            for (Index t : incident[v]) {
                sum += out.triangle_normals[static_cast<std::size_t>(t)];
            }
            const Scalar norm = sum.norm();
            if (norm < 1e-12) {
                // Opposing normals cancelled; keep a raw incident normal.
                out.vertex_normals[v] = out.triangle_normals[static_cast<std::size_t>(incident[v][0])];
            } else {
                out.vertex_normals[v] = sum / norm;
            }
        }
        for (std::size_t t = 0; t < nt; ++t) {
            Vector3 sum = Vector3::Zero();
            for (Index v : mesh.triangles[t]) {
                sum += out.vertex_normals[static_cast<std::size_t>(v)];
            }
            const Scalar norm = sum.norm();
            if (norm < 1e-12) {
                out.triangle_normals[t] = raw.triangle_normals[t];
            } else {
                out.triangle_normals[t] = sum / norm;
            }
        }
    }
    return out;
}

AngleField compute_average_angles(const TriangleMesh& mesh, const NormalField& normals) {
    AngleField field;
    field.avg_angle.assign(mesh.triangles.size(), 0.0);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& neighbors = mesh.adjacency[t];
        if (neighbors.empty()) {
            continue;
        }
        Scalar sum = 0.0;
        for (Index j : neighbors) {
            const Scalar d = normals.triangle_normals[t].dot(
                normals.triangle_normals[static_cast<std::size_t>(j)]);
            sum += std::acos(std::clamp(d, -1.0, 1.0));
        }
        field.avg_angle[t] = sum / static_cast<Scalar>(neighbors.size());
    }
    return field;
}

} // namespace partgraph
