#include "partgraph/synthetic.hpp"

#include "partgraph/errors.hpp"
#include "partgraph/rng.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <unordered_map>
#include <utility>

namespace partgraph {

namespace {

constexpr Scalar kPi = 3.14159265358979323846;

// Shared face-edge vertices must weld, and the face grids compute their
// coordinates from the same lerp, so the double bit patterns agree exactly.
struct VertexKey {
    std::uint64_t x, y, z;
    bool operator<(const VertexKey& o) const {
        return std::tie(x, y, z) < std::tie(o.x, o.y, o.z);
    }
};

VertexKey key_of(const Vector3& v) {
    VertexKey k;
    std::memcpy(&k.x, &v.x(), sizeof k.x);
    std::memcpy(&k.y, &v.y(), sizeof k.y);
    std::memcpy(&k.z, &v.z(), sizeof k.z);
    return k;
}

class VertexPool {
public:
    explicit VertexPool(TriangleMesh& mesh) : mesh_(mesh) {}

    Index add(const Vector3& v) {
        const auto [it, fresh] = seen_.try_emplace(key_of(v), Index(mesh_.vertices.size()));
        if (fresh) {
            mesh_.vertices.push_back(v);
        }
        return it->second;
    }

private:
    TriangleMesh& mesh_;
    std::map<VertexKey, Index> seen_;
};

Scalar lerp(Scalar lo, Scalar hi, int i, int n) {
    return lo + (hi - lo) * (static_cast<Scalar>(i) / static_cast<Scalar>(n));
}

void finish(TriangleMesh& mesh) {
    build_adjacency(mesh);
}

std::string pad4(Index i) {
    std::string s = std::to_string(i);
    while (s.size() < 4) {
        s.insert(s.begin(), '0');
    }
    return s;
}

} // namespace

const std::array<std::string, 4>& synthetic_class_names() {
    static const std::array<std::string, 4> names{"box", "cylinder", "cone", "sphere"};
    return names;
}

TriangleMesh make_box(Scalar hx, Scalar hy, Scalar hz, int grid) {
    TriangleMesh mesh;
    VertexPool pool(mesh);
    // axis = fixed coordinate, side = its sign; (u, v) walk the other two.
    for (int axis = 0; axis < 3; ++axis) {
        for (int side = -1; side <= 1; side += 2) {
            const int ua = (axis + 1) % 3;
            const int va = (axis + 2) % 3;
            const Scalar half[3] = {hx, hy, hz};
            auto corner = [&](int i, int j) {
                Vector3 p;
                p[axis] = side * half[axis];
                p[ua] = lerp(-half[ua], half[ua], i, grid);
                p[va] = lerp(-half[va], half[va], j, grid);
                return p;
            };
            for (int i = 0; i < grid; ++i) {
                for (int j = 0; j < grid; ++j) {
                    const Index a = pool.add(corner(i, j));
                    const Index b = pool.add(corner(i + 1, j));
                    const Index c = pool.add(corner(i + 1, j + 1));
                    const Index d = pool.add(corner(i, j + 1));
                    // Winding flips with the face side to keep normals outward.
                    if (side > 0) {
                        mesh.triangles.push_back({a, b, c});
                        mesh.triangles.push_back({a, c, d});
                    } else {
                        mesh.triangles.push_back({a, c, b});
                        mesh.triangles.push_back({a, d, c});
                    }
                }
            }
        }
    }
    finish(mesh);
    return mesh;
}

TriangleMesh make_cylinder(Scalar radius, Scalar height, int segments, int rings) {
    TriangleMesh mesh;
    // rings+1 circles of `segments` vertices, bottom to top, then the two
    // cap centers.
    for (int r = 0; r <= rings; ++r) {
        const Scalar z = lerp(-height / 2, height / 2, r, rings);
        for (int s = 0; s < segments; ++s) {
            const Scalar ang = 2 * kPi * s / segments;
            mesh.vertices.emplace_back(radius * std::cos(ang), radius * std::sin(ang), z);
        }
    }
    const Index bottom_center = Index(mesh.vertices.size());
    mesh.vertices.emplace_back(0, 0, -height / 2);
    const Index top_center = Index(mesh.vertices.size());
    mesh.vertices.emplace_back(0, 0, height / 2);

    auto ring_vertex = [&](int r, int s) { return Index(r) * segments + (s % segments); };
    for (int r = 0; r < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            const Index a = ring_vertex(r, s);
            const Index b = ring_vertex(r, s + 1);
            const Index c = ring_vertex(r + 1, s + 1);
            const Index d = ring_vertex(r + 1, s);
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    }
    for (int s = 0; s < segments; ++s) {
        mesh.triangles.push_back({bottom_center, ring_vertex(0, s + 1), ring_vertex(0, s)});
        mesh.triangles.push_back({top_center, ring_vertex(rings, s), ring_vertex(rings, s + 1)});
    }
    finish(mesh);
    return mesh;
}

TriangleMesh make_cone(Scalar radius, Scalar height, int segments, int rings) {
    TriangleMesh mesh;
    // `rings` circles shrinking toward the apex (the apex itself is a single
    // vertex), plus the base center. Base sits at z = 0, apex at z = height.
    for (int r = 0; r < rings; ++r) {
        const Scalar t = static_cast<Scalar>(r) / static_cast<Scalar>(rings);
        const Scalar z = height * t;
        const Scalar rad = radius * (1 - t);
        for (int s = 0; s < segments; ++s) {
            const Scalar ang = 2 * kPi * s / segments;
            mesh.vertices.emplace_back(rad * std::cos(ang), rad * std::sin(ang), z);
        }
    }
    const Index apex = Index(mesh.vertices.size());
    mesh.vertices.emplace_back(0, 0, height);
    const Index base_center = Index(mesh.vertices.size());
    mesh.vertices.emplace_back(0, 0, 0);

    auto ring_vertex = [&](int r, int s) { return Index(r) * segments + (s % segments); };
    for (int r = 0; r + 1 < rings; ++r) {
        for (int s = 0; s < segments; ++s) {
            const Index a = ring_vertex(r, s);
            const Index b = ring_vertex(r, s + 1);
            const Index c = ring_vertex(r + 1, s + 1);
            const Index d = ring_vertex(r + 1, s);
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    }
    for (int s = 0; s < segments; ++s) {
        mesh.triangles.push_back({ring_vertex(rings - 1, s), ring_vertex(rings - 1, s + 1), apex});
        mesh.triangles.push_back({base_center, ring_vertex(0, s + 1), ring_vertex(0, s)});
    }
    finish(mesh);
    return mesh;
}

TriangleMesh make_icosphere(Scalar radius, int subdivisions) {
    // Icosahedron, then midpoint subdivision with projection to the sphere.
    const Scalar phi = (1 + std::sqrt(Scalar(5))) / 2;
    std::vector<Vector3> verts = {
        {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1},
    };
    std::vector<Triangle> tris = {
        {0, 11, 5}, {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };
    for (int step = 0; step < subdivisions; ++step) {
        std::map<std::pair<Index, Index>, Index> midpoints;
        auto midpoint = [&](Index a, Index b) {
            const auto key = std::minmax(a, b);
            const auto [it, fresh] = midpoints.try_emplace(key, Index(verts.size()));
            if (fresh) {
                verts.push_back((verts[a] + verts[b]) / 2);
            }
            return it->second;
        };
        std::vector<Triangle> next;
        next.reserve(tris.size() * 4);
        for (const Triangle& t : tris) {
            const Index ab = midpoint(t[0], t[1]);
            const Index bc = midpoint(t[1], t[2]);
            const Index ca = midpoint(t[2], t[0]);
            next.push_back({t[0], ab, ca});
            next.push_back({t[1], bc, ab});
            next.push_back({t[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }

    TriangleMesh mesh;
    mesh.vertices.reserve(verts.size());
    for (const Vector3& v : verts) {
        mesh.vertices.push_back(v.normalized() * radius);
    }
    mesh.triangles = std::move(tris);
    finish(mesh);
    return mesh;
}

TriangleMesh make_primitive(int class_index, Rng& rng) {
    switch (class_index) {
    case 0:
        return make_box(rng.next_uniform(0.4, 1.4), rng.next_uniform(0.4, 1.4),
                        rng.next_uniform(0.4, 1.4), 4);
    case 1:
        return make_cylinder(rng.next_uniform(0.4, 1.2), rng.next_uniform(1.0, 3.0), 16, 4);
    case 2:
        return make_cone(rng.next_uniform(0.5, 1.5), rng.next_uniform(1.0, 3.0), 16, 4);
    case 3:
        return make_icosphere(rng.next_uniform(0.5, 1.5), 2);
    default:
        throw ConfigError("synthetic class index out of range");
    }
}

Matrix3 rotation_z(Scalar angle) {
    Matrix3 r = Matrix3::Identity();
    const Scalar c = std::cos(angle);
    const Scalar s = std::sin(angle);
    r(0, 0) = c;
    r(0, 1) = -s;
    r(1, 0) = s;
    r(1, 1) = c;
    return r;
}

Matrix3 random_rotation_z(Rng& rng) {
    return rotation_z(rng.next_uniform(0.0, 2 * kPi));
}

Matrix3 random_rotation_so3(Rng& rng) {
    // A normalized 4-gaussian is uniform on S^3, hence uniform over SO(3).
    Eigen::Quaternion<Scalar> q;
    do {
        q = Eigen::Quaternion<Scalar>(rng.next_gaussian(), rng.next_gaussian(),
                                      rng.next_gaussian(), rng.next_gaussian());
    } while (q.norm() < 1e-6);
    q.normalize();
    return q.toRotationMatrix();
}

void transform_mesh(TriangleMesh& mesh, const Matrix3& rotation, Scalar scale) {
    for (Vector3& v : mesh.vertices) {
        v = scale * (rotation * v);
    }
}

TriangleMesh cut_halfspace(const TriangleMesh& mesh, const Vector3& normal, Scalar offset) {
    TriangleMesh out;
    out.vertices = mesh.vertices;
    for (const Triangle& t : mesh.triangles) {
        const Vector3 centroid =
            (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3;
        if (normal.dot(centroid) <= offset) {
            out.triangles.push_back(t);
        }
    }
    if (out.triangles.empty()) {
        // Degenerate plane choice; keep the closest triangle so the mesh
        // stays non-empty.
        const Triangle* best = nullptr;
        Scalar best_proj = 0;
        for (const Triangle& t : mesh.triangles) {
            const Vector3 centroid =
                (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3;
            const Scalar proj = normal.dot(centroid);
            if (!best || proj < best_proj) {
                best = &t;
                best_proj = proj;
            }
        }
        out.triangles.push_back(*best);
    }
    build_adjacency(out);
    return out;
}

std::vector<SyntheticObject> generate_synthetic_dataset(const SynthConfig& cfg) {
    std::vector<SyntheticObject> out;
    const auto& names = synthetic_class_names();
    for (std::size_t c = 0; c < names.size(); ++c) {
        for (Index i = 0; i < cfg.n_per_class; ++i) {
            const std::uint64_t stream = (static_cast<std::uint64_t>(c) << 32) |
                                         static_cast<std::uint64_t>(i);
            Rng rng(Rng::mix(cfg.seed, stream));

            SyntheticObject obj;
            obj.class_name = names[c];
            obj.object_id = names[c] + "_" + pad4(i);
            obj.mesh = make_primitive(static_cast<int>(c), rng);

            Matrix3 rot = Matrix3::Identity();
            if (cfg.rotation == RotationMode::Z) {
                rot = random_rotation_z(rng);
            } else if (cfg.rotation == RotationMode::SO3) {
                rot = random_rotation_so3(rng);
            }
            const Scalar scale = rng.next_uniform(cfg.min_scale, cfg.max_scale);
            transform_mesh(obj.mesh, rot, scale);

            if (cfg.occlusion_prob > 0 && rng.next_double() < cfg.occlusion_prob) {
                Vector3 n(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
                if (n.norm() < 1e-9) {
                    n = Vector3::UnitX();
                }
                n.normalize();
                std::vector<Scalar> projections;
                projections.reserve(obj.mesh.triangles.size());
                for (const Triangle& t : obj.mesh.triangles) {
                    const Vector3 centroid = (obj.mesh.vertices[t[0]] + obj.mesh.vertices[t[1]] +
                                              obj.mesh.vertices[t[2]]) /
                                             3;
                    projections.push_back(n.dot(centroid));
                }
                std::sort(projections.begin(), projections.end());
                const Scalar q = rng.next_uniform(0.55, 0.8);
                const auto idx = static_cast<std::size_t>(
                    q * static_cast<Scalar>(projections.size() - 1));
                obj.mesh = cut_halfspace(obj.mesh, n, projections[idx]);
            }
            out.push_back(std::move(obj));
        }
    }
    return out;
}

} // namespace partgraph
