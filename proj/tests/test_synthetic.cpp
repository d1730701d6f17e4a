#include <doctest.h>

#include "partgraph/mesh.hpp"
#include "partgraph/rng.hpp"
#include "partgraph/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

using namespace partgraph;

namespace {

constexpr Scalar kPi = 3.14159265358979323846;

// Divergence theorem: for a closed, outward-oriented surface the signed
// tetrahedron volumes sum to the enclosed volume. Wrong winding or holes
// show up immediately as a wrong total.
Scalar signed_volume(const TriangleMesh& mesh) {
    Scalar total = 0;
    for (const Triangle& t : mesh.triangles) {
        const Vector3& a = mesh.vertices[t[0]];
        const Vector3& b = mesh.vertices[t[1]];
        const Vector3& c = mesh.vertices[t[2]];
        total += a.dot(b.cross(c)) / 6.0;
    }
    return total;
}

void check_closed_manifold(TriangleMesh mesh) {
    CHECK(build_adjacency(mesh) == 0);
    for (const auto& neighbors : mesh.adjacency) {
        CHECK(neighbors.size() == 3);
    }
    // Closed genus-0 surface: V - E + F = 2 with E = 3F/2.
    const auto v = static_cast<long long>(mesh.vertex_count());
    const auto f = static_cast<long long>(mesh.triangle_count());
    CHECK(f % 2 == 0);
    CHECK(v - f / 2 == 2);
    for (Index t = 0; t < mesh.triangle_count(); ++t) {
        CHECK(mesh.triangle_area(t) > 0.0);
    }
}

bool same_vertices(const TriangleMesh& a, const TriangleMesh& b) {
    if (a.vertex_count() != b.vertex_count()) {
        return false;
    }
    for (Index i = 0; i < a.vertex_count(); ++i) {
        if (a.vertices[i] != b.vertices[i]) {
            return false;
        }
    }
    return true;
}

bool same_triangles(const TriangleMesh& a, const TriangleMesh& b) {
    return a.triangles == b.triangles;
}

} // namespace

TEST_CASE("the synthetic classes are box, cylinder, cone, sphere") {
    const auto& names = synthetic_class_names();
    REQUIRE(names.size() == 4);
    CHECK(names[0] == "box");
    CHECK(names[1] == "cylinder");
    CHECK(names[2] == "cone");
    CHECK(names[3] == "sphere");
}

TEST_CASE("every primitive is a closed manifold with positive areas") {
    check_closed_manifold(make_box(0.7, 0.5, 0.9, 4));
    check_closed_manifold(make_cylinder(0.8, 2.0, 16, 4));
    check_closed_manifold(make_cone(1.0, 2.0, 16, 4));
    check_closed_manifold(make_icosphere(1.0, 2));
}

TEST_CASE("signed volumes match the analytic solids") {
    // Exact for the box; the curved primitives are inscribed, so their
    // chordal volume sits just below the analytic value.
    const Scalar box = signed_volume(make_box(0.7, 0.5, 0.9, 4));
    CHECK(box == doctest::Approx(8 * 0.7 * 0.5 * 0.9).epsilon(1e-12));

    const Scalar cylinder = signed_volume(make_cylinder(0.8, 2.0, 16, 4));
    const Scalar cylinder_exact = kPi * 0.8 * 0.8 * 2.0;
    CHECK(cylinder < cylinder_exact);
    CHECK(cylinder > 0.9 * cylinder_exact);

    const Scalar cone = signed_volume(make_cone(1.0, 2.0, 16, 4));
    const Scalar cone_exact = kPi * 1.0 * 1.0 * 2.0 / 3.0;
    CHECK(cone < cone_exact);
    CHECK(cone > 0.9 * cone_exact);

    const Scalar sphere = signed_volume(make_icosphere(1.0, 2));
    const Scalar sphere_exact = 4.0 / 3.0 * kPi;
    CHECK(sphere < sphere_exact);
    CHECK(sphere > 0.9 * sphere_exact);
}

TEST_CASE("primitive extents land where the constructors promise") {
    const TriangleMesh cyl = make_cylinder(0.8, 2.0, 16, 4);
    Scalar zmin = 1e30, zmax = -1e30, rmax = 0;
    for (const Vector3& v : cyl.vertices) {
        zmin = std::min(zmin, v.z());
        zmax = std::max(zmax, v.z());
        rmax = std::max(rmax, std::hypot(v.x(), v.y()));
    }
    CHECK(zmin == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(zmax == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rmax == doctest::Approx(0.8).epsilon(1e-12));

    const TriangleMesh cone = make_cone(1.0, 2.0, 16, 4);
    zmin = 1e30;
    zmax = -1e30;
    rmax = 0;
    for (const Vector3& v : cone.vertices) {
        zmin = std::min(zmin, v.z());
        zmax = std::max(zmax, v.z());
        rmax = std::max(rmax, std::hypot(v.x(), v.y()));
    }
    CHECK(zmin == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(zmax == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(rmax == doctest::Approx(1.0).epsilon(1e-12));

    const TriangleMesh sphere = make_icosphere(1.5, 2);
    for (const Vector3& v : sphere.vertices) {
        CHECK(v.norm() == doctest::Approx(1.5).epsilon(1e-12));
    }
}

TEST_CASE("rotation helpers produce proper rotations") {
    const Matrix3 quarter = rotation_z(kPi / 2);
    CHECK((quarter * Vector3::UnitX() - Vector3::UnitY()).norm() < 1e-12);
    CHECK((quarter * Vector3::UnitZ() - Vector3::UnitZ()).norm() < 1e-12);

    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
        const Matrix3 rz = random_rotation_z(rng);
        CHECK((rz * rz.transpose() - Matrix3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(rz.determinant() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((rz * Vector3::UnitZ() - Vector3::UnitZ()).norm() < 1e-12);

        const Matrix3 r = random_rotation_so3(rng);
        CHECK((r * r.transpose() - Matrix3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("transform_mesh rotates rigidly and scales norms") {
    TriangleMesh mesh = make_box(0.7, 0.5, 0.9, 2);
    const TriangleMesh original = mesh;
    Rng rng(3);
    const Matrix3 r = random_rotation_so3(rng);
    const Scalar scale = 2.5;
    transform_mesh(mesh, r, scale);

    REQUIRE(mesh.vertex_count() == original.vertex_count());
    for (Index i = 0; i < mesh.vertex_count(); ++i) {
        CHECK(mesh.vertices[i].norm() ==
              doctest::Approx(scale * original.vertices[i].norm()).epsilon(1e-10));
    }
    // Rigid + uniform scale: pairwise distances all multiply by the scale.
    for (Index i = 1; i < std::min<Index>(mesh.vertex_count(), 6); ++i) {
        const Scalar before = (original.vertices[i] - original.vertices[0]).norm();
        const Scalar after = (mesh.vertices[i] - mesh.vertices[0]).norm();
        CHECK(after == doctest::Approx(scale * before).epsilon(1e-10));
    }
    CHECK(same_triangles(mesh, original));
}

TEST_CASE("cut_halfspace keeps exactly the triangles behind the plane") {
    const TriangleMesh mesh = make_icosphere(1.0, 1);
    const Vector3 n = Vector3::UnitZ();
    const Scalar offset = 0.2;
    const TriangleMesh cut = cut_halfspace(mesh, n, offset);

    CHECK(cut.vertex_count() == mesh.vertex_count());
    CHECK(cut.triangle_count() < mesh.triangle_count());
    CHECK(cut.triangle_count() > 0);
    CHECK(cut.adjacency.size() == cut.triangles.size());

    std::size_t behind = 0;
    for (const Triangle& t : mesh.triangles) {
        const Vector3 centroid =
            (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3;
        if (n.dot(centroid) <= offset) {
            ++behind;
        }
    }
    CHECK(cut.triangle_count() == Index(behind));
    for (const Triangle& t : cut.triangles) {
        const Vector3 centroid =
            (cut.vertices[t[0]] + cut.vertices[t[1]] + cut.vertices[t[2]]) / 3;
        CHECK(n.dot(centroid) <= offset);
    }
}

TEST_CASE("cut_halfspace never empties the mesh") {
    const TriangleMesh mesh = make_box(0.5, 0.5, 0.5, 1);
    // Plane far below everything: every centroid is on the dropped side, and
    // the closest triangle survives as the fallback.
    const TriangleMesh cut = cut_halfspace(mesh, Vector3::UnitZ(), -10.0);
    REQUIRE(cut.triangle_count() == 1);
    // The survivor is the one whose centroid sits lowest along the normal.
    Scalar lowest = 1e30;
    for (const Triangle& t : mesh.triangles) {
        const Vector3 centroid =
            (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3;
        lowest = std::min(lowest, centroid.z());
    }
    const Triangle& kept = cut.triangles[0];
    const Vector3 centroid =
        (cut.vertices[kept[0]] + cut.vertices[kept[1]] + cut.vertices[kept[2]]) / 3;
    CHECK(centroid.z() == doctest::Approx(lowest).epsilon(1e-12));
}

TEST_CASE("generation is deterministic per seed and varies across seeds") {
    SynthConfig cfg;
    cfg.n_per_class = 2;
    cfg.seed = 7;
    cfg.rotation = RotationMode::SO3;
    cfg.occlusion_prob = 0.5;

    const auto run1 = generate_synthetic_dataset(cfg);
    const auto run2 = generate_synthetic_dataset(cfg);
    REQUIRE(run1.size() == run2.size());
    for (std::size_t i = 0; i < run1.size(); ++i) {
        CHECK(run1[i].object_id == run2[i].object_id);
        CHECK(run1[i].class_name == run2[i].class_name);
        CHECK(same_vertices(run1[i].mesh, run2[i].mesh));
        CHECK(same_triangles(run1[i].mesh, run2[i].mesh));
    }

    cfg.seed = 8;
    const auto other = generate_synthetic_dataset(cfg);
    bool any_differ = false;
    for (std::size_t i = 0; i < run1.size(); ++i) {
        if (!same_vertices(run1[i].mesh, other[i].mesh)) {
            any_differ = true;
        }
    }
    CHECK(any_differ);
}

TEST_CASE("objects arrive class-major with zero-padded stable ids") {
    SynthConfig cfg;
    cfg.n_per_class = 3;
    const auto objects = generate_synthetic_dataset(cfg);
    REQUIRE(objects.size() == 12);

    const auto& names = synthetic_class_names();
    for (std::size_t c = 0; c < names.size(); ++c) {
        for (Index i = 0; i < cfg.n_per_class; ++i) {
            const auto& obj = objects[c * 3 + static_cast<std::size_t>(i)];
            CHECK(obj.class_name == names[c]);
            CHECK(obj.object_id == names[c] + "_000" + std::to_string(i));
            CHECK(obj.mesh.triangle_count() > 0);
            CHECK(obj.mesh.adjacency.size() == obj.mesh.triangles.size());
        }
    }
}

TEST_CASE("growing the set never changes already-generated objects") {
    SynthConfig small;
    small.n_per_class = 2;
    small.seed = 21;
    SynthConfig large = small;
    large.n_per_class = 5;

    const auto few = generate_synthetic_dataset(small);
    const auto many = generate_synthetic_dataset(large);

    std::map<std::string, const SyntheticObject*> by_id;
    for (const auto& obj : many) {
        by_id[obj.object_id] = &obj;
    }
    for (const auto& obj : few) {
        REQUIRE(by_id.count(obj.object_id) == 1);
        const SyntheticObject& twin = *by_id[obj.object_id];
        CHECK(same_vertices(obj.mesh, twin.mesh));
        CHECK(same_triangles(obj.mesh, twin.mesh));
    }
}

TEST_CASE("a degenerate scale range pins the scale exactly") {
    SynthConfig unit;
    unit.n_per_class = 1;
    unit.seed = 5;
    unit.rotation = RotationMode::None;
    unit.min_scale = 1.0;
    unit.max_scale = 1.0;
    SynthConfig doubled = unit;
    doubled.min_scale = 2.0;
    doubled.max_scale = 2.0;

    const auto base = generate_synthetic_dataset(unit);
    const auto twice = generate_synthetic_dataset(doubled);
    REQUIRE(base.size() == twice.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        REQUIRE(base[i].mesh.vertex_count() == twice[i].mesh.vertex_count());
        for (Index v = 0; v < base[i].mesh.vertex_count(); ++v) {
            // Doubling is exact in floating point, so this is bitwise.
            CHECK(twice[i].mesh.vertices[v] == 2.0 * base[i].mesh.vertices[v]);
        }
    }
}

TEST_CASE("occlusion trims triangles and nothing else") {
    SynthConfig plain;
    plain.n_per_class = 4;
    plain.seed = 13;
    plain.occlusion_prob = 0.0;
    SynthConfig occluded = plain;
    occluded.occlusion_prob = 1.0;

    const auto whole = generate_synthetic_dataset(plain);
    const auto cut = generate_synthetic_dataset(occluded);
    REQUIRE(whole.size() == cut.size());

    std::size_t strictly_smaller = 0;
    for (std::size_t i = 0; i < whole.size(); ++i) {
        CHECK(same_vertices(whole[i].mesh, cut[i].mesh));
        CHECK(cut[i].mesh.triangle_count() <= whole[i].mesh.triangle_count());
        CHECK(cut[i].mesh.triangle_count() > 0);
        if (cut[i].mesh.triangle_count() < whole[i].mesh.triangle_count()) {
            ++strictly_smaller;
        }
    }
    // The cut quantile keeps 55-80% of triangles, so essentially every
    // object must shrink; demand it for at least three quarters.
    CHECK(strictly_smaller * 4 >= whole.size() * 3);
}
