#include <doctest.h>

#include "partgraph/errors.hpp"
#include "partgraph/mesh.hpp"
#include "partgraph/rng.hpp"
#include "partgraph/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

using namespace partgraph;

namespace {

constexpr double kPi = 3.14159265358979323846;

TriangleMesh single_triangle() {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    mesh.triangles = {{0, 1, 2}};
    build_adjacency(mesh);
    return mesh;
}

// Two triangles sharing the edge (0,0,0)-(1,0,0), folded to a 90 degree
// dihedral: normals +Z and +Y.
TriangleMesh hinge_mesh() {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    mesh.triangles = {{0, 1, 2}, {1, 0, 3}};
    build_adjacency(mesh);
    return mesh;
}

// n x n quad grid in the XY plane, all normals +Z.
TriangleMesh planar_grid(int n) {
    TriangleMesh mesh;
    for (int j = 0; j <= n; ++j) {
        for (int i = 0; i <= n; ++i) {
            mesh.vertices.push_back({double(i), double(j), 0.0});
        }
    }
    auto vid = [n](int i, int j) { return Index(j * (n + 1) + i); };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            mesh.triangles.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
            mesh.triangles.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    }
    build_adjacency(mesh);
    return mesh;
}

TriangleMesh unit_cube() { return make_box(0.5, 0.5, 0.5, 1); }

Matrix3 sample_rotation(std::uint64_t seed) {
    Rng rng(seed);
    return random_rotation_so3(rng);
}

} // namespace

TEST_CASE("adjacency is symmetric with degree at most three") {
    const TriangleMesh cube = unit_cube();
    REQUIRE(cube.triangle_count() == 12);
    REQUIRE(cube.vertex_count() == 8);
    for (std::size_t t = 0; t < cube.adjacency.size(); ++t) {
        CHECK(cube.adjacency[t].size() == 3); // closed surface: every edge interior
        for (Index n : cube.adjacency[t]) {
            const auto& back = cube.adjacency[static_cast<std::size_t>(n)];
            CHECK(std::count(back.begin(), back.end(), Index(t)) == 1);
        }
    }
}

TEST_CASE("lone triangle has no neighbors") {
    const TriangleMesh mesh = single_triangle();
    CHECK(mesh.adjacency[0].empty());
}

TEST_CASE("an edge shared by three triangles is rejected in strict mode") {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, -1, 0}};
    // All three triangles contain the edge 0-1; areas 0.5, 0.5, 0.5.
    mesh.triangles = {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}};
    CHECK_THROWS_AS(build_adjacency(mesh, true), NonManifoldError);

    const std::size_t bad = build_adjacency(mesh, false);
    CHECK(bad == 1);
    // Lenient mode keeps the edge between two triangles only.
    std::size_t degree_sum = 0;
    for (const auto& adj : mesh.adjacency) {
        degree_sum += adj.size();
    }
    CHECK(degree_sum == 2);
}

TEST_CASE("triangle normals follow the winding order") {
    TriangleMesh mesh = single_triangle();
    NormalField normals = compute_triangle_normals(mesh);
    CHECK(normals.triangle_normals[0].isApprox(Vector3(0, 0, 1), 1e-12));
    CHECK_FALSE(normals.smoothed);

    mesh.triangles[0] = {0, 2, 1};
    normals = compute_triangle_normals(mesh);
    CHECK(normals.triangle_normals[0].isApprox(Vector3(0, 0, -1), 1e-12));
}

TEST_CASE("triangle normals rotate with the mesh") {
    const Matrix3 R = sample_rotation(17);
    TriangleMesh mesh = single_triangle();
    for (Vector3& v : mesh.vertices) {
        v = R * v;
    }
    const NormalField normals = compute_triangle_normals(mesh);
    CHECK((normals.triangle_normals[0] - R * Vector3(0, 0, 1)).norm() < 1e-9);
}

TEST_CASE("smoothing is a fixed point on a flat surface") {
    const TriangleMesh grid = planar_grid(4);
    const NormalField raw = compute_triangle_normals(grid);
    const NormalField smooth = smooth_normals(grid, raw);
    CHECK(smooth.smoothed);
    REQUIRE(smooth.triangle_normals.size() == raw.triangle_normals.size());
    for (std::size_t t = 0; t < raw.triangle_normals.size(); ++t) {
        CHECK((smooth.triangle_normals[t] - raw.triangle_normals[t]).norm() < 1e-12);
    }
}

TEST_CASE("smoothing an isolated triangle returns its own normal") {
    const TriangleMesh mesh = single_triangle();
    const NormalField raw = compute_triangle_normals(mesh);
    const NormalField smooth = smooth_normals(mesh, raw);
    CHECK((smooth.triangle_normals[0] - raw.triangle_normals[0]).norm() < 1e-12);
}

TEST_CASE("smoothing keeps normals unit length and reduces the sharpest crease") {
    for (const TriangleMesh& mesh : {unit_cube(), make_icosphere(1.0, 1)}) {
        const NormalField raw = compute_triangle_normals(mesh);
        const NormalField smooth = smooth_normals(mesh, raw);
        for (const Vector3& n : smooth.triangle_normals) {
            CHECK(std::abs(n.norm() - 1.0) < 1e-9);
        }
        for (const Vector3& n : smooth.vertex_normals) {
            CHECK(std::abs(n.norm() - 1.0) < 1e-9);
        }

        auto max_crease = [&](const NormalField& field) {
            double worst = 0.0;
            for (Index t = 0; t < mesh.triangle_count(); ++t) {
                for (Index n : mesh.adjacency[static_cast<std::size_t>(t)]) {
                    const double d = field.triangle_normals[static_cast<std::size_t>(t)].dot(
                        field.triangle_normals[static_cast<std::size_t>(n)]);
                    worst = std::max(worst, std::acos(std::clamp(d, -1.0, 1.0)));
                }
            }
            return worst;
        };
        CHECK(max_crease(smooth) <= max_crease(raw) + 1e-12);
    }
}

TEST_CASE("average angle of a right-angle hinge is pi/2 on both sides") {
    const TriangleMesh mesh = hinge_mesh();
    const NormalField normals = compute_triangle_normals(mesh);
    const AngleField angles = compute_average_angles(mesh, normals);
    REQUIRE(angles.avg_angle.size() == 2);
    CHECK(angles.avg_angle[0] == doctest::Approx(kPi / 2).epsilon(1e-12));
    CHECK(angles.avg_angle[1] == doctest::Approx(kPi / 2).epsilon(1e-12));
}

TEST_CASE("average angles vanish on a flat surface") {
    const TriangleMesh grid = planar_grid(3);
    const NormalField normals = compute_triangle_normals(grid);
    const AngleField angles = compute_average_angles(grid, normals);
    for (double a : angles.avg_angle) {
        CHECK(a == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("every cube triangle averages one flat and two perpendicular neighbors") {
    const TriangleMesh cube = unit_cube();
    const NormalField normals = compute_triangle_normals(cube);
    const AngleField angles = compute_average_angles(cube, normals);
    // Each triangle: one coplanar face partner (angle 0) and two neighbors on
    // perpendicular faces (angle pi/2) -> mean pi/3.
    for (double a : angles.avg_angle) {
        CHECK(a == doctest::Approx(kPi / 3).epsilon(1e-12));
    }
}

TEST_CASE("a neighborless triangle gets average angle zero") {
    const TriangleMesh mesh = single_triangle();
    const NormalField normals = compute_triangle_normals(mesh);
    const AngleField angles = compute_average_angles(mesh, normals);
    CHECK(angles.avg_angle[0] == 0.0);
}

TEST_CASE("average angles are rotation and scale invariant") {
    const TriangleMesh cube = unit_cube();
    const AngleField base = compute_average_angles(cube, compute_triangle_normals(cube));

    TriangleMesh moved = cube;
    const Matrix3 R = sample_rotation(23);
    for (Vector3& v : moved.vertices) {
        v = 3.7 * (R * v);
    }
    const AngleField turned = compute_average_angles(moved, compute_triangle_normals(moved));
    REQUIRE(turned.avg_angle.size() == base.avg_angle.size());
    for (std::size_t t = 0; t < base.avg_angle.size(); ++t) {
        CHECK(turned.avg_angle[t] == doctest::Approx(base.avg_angle[t]).epsilon(1e-7));
    }
}
