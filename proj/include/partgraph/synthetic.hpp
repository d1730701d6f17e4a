#pragma once

#include "partgraph/mesh.hpp"
#include "partgraph/types.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace partgraph {

class Rng;

enum class RotationMode { None, Z, SO3 };

struct SynthConfig {
    Index n_per_class = 10;
    std::uint64_t seed = 0;
    RotationMode rotation = RotationMode::Z;
    Scalar min_scale = 0.2;
    Scalar max_scale = 5.0;
    Scalar occlusion_prob = 0.0; // chance an object loses a half-space slice
};

struct SyntheticObject {
    TriangleMesh mesh;
    std::string class_name;
    std::string object_id; // "<class>_<index>", stable across runs
};

const std::array<std::string, 4>& synthetic_class_names(); // box, cylinder, cone, sphere

// Closed primitives with adjacency built. Grid/segment counts control the
// triangle budget; all stay in the low hundreds at the defaults used here.
TriangleMesh make_box(Scalar half_x, Scalar half_y, Scalar half_z, int grid);
TriangleMesh make_cylinder(Scalar radius, Scalar height, int segments, int rings);
TriangleMesh make_cone(Scalar radius, Scalar height, int segments, int rings);
TriangleMesh make_icosphere(Scalar radius, int subdivisions);

// One primitive of the given class (0..3) with dimensions drawn from rng,
// centered at the origin and unrotated.
TriangleMesh make_primitive(int class_index, Rng& rng);

Matrix3 rotation_z(Scalar angle);
Matrix3 random_rotation_z(Rng& rng);
Matrix3 random_rotation_so3(Rng& rng); // uniform via normalized quaternion

void transform_mesh(TriangleMesh& mesh, const Matrix3& rotation, Scalar scale);

// Drops every triangle whose centroid lies on the positive side of the plane
// (normal . x > offset); at least one triangle always survives. Adjacency is
// rebuilt on the result.
TriangleMesh cut_halfspace(const TriangleMesh& mesh, const Vector3& normal, Scalar offset);

// Deterministic per (seed, class, index): each object draws from its own
// stream, so set size and generation order never shift existing objects.
std::vector<SyntheticObject> generate_synthetic_dataset(const SynthConfig& cfg);

} // namespace partgraph
