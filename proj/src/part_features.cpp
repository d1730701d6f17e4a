#include "partgraph/part_features.hpp"

#include "partgraph/errors.hpp"
#include "partgraph/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace partgraph {

namespace {

Vector3 mean_position(const std::vector<SurfacePoint>& points) {
    Vector3 sum = Vector3::Zero();
    for (const SurfacePoint& p : points) {
        sum += p.position;
    }
    return sum / static_cast<Scalar>(points.size());
}

Vector3 mean_normal(const std::vector<SurfacePoint>& points) {
    Vector3 sum = Vector3::Zero();
    for (const SurfacePoint& p : points) {
        sum += p.normal;
    }
    return sum / static_cast<Scalar>(points.size());
}

// Largest-eigenvalue direction of the point covariance; shared by the PCA
// frame and the Z-frame fallback for vertical mean normals.
void covariance_eigen(const std::vector<SurfacePoint>& points, Vector3& eigenvalues_desc,
                      Matrix3& eigenvectors_desc) {
    const Vector3 mu = mean_position(points);
    Matrix3 cov = Matrix3::Zero();
    for (const SurfacePoint& p : points) {
        const Vector3 d = p.position - mu;
        cov += d * d.transpose();
    }
    cov /= static_cast<Scalar>(points.size());

    Eigen::SelfAdjointEigenSolver<Matrix3> solver(cov);
    // Eigen returns ascending eigenvalues; flip to descending.
    for (int k = 0; k < 3; ++k) {
        eigenvalues_desc[k] = solver.eigenvalues()[2 - k];
        eigenvectors_desc.col(k) = solver.eigenvectors().col(2 - k);
    }
}

Vector3 skew_disambiguated(const std::vector<SurfacePoint>& points, const Vector3& mu,
                           Vector3 axis) {
    Scalar skew = 0.0;
    for (const SurfacePoint& p : points) {
        const Scalar proj = axis.dot(p.position - mu);
        skew += proj * proj * proj;
    }
    if (std::abs(skew) >= 1e-9) {
        return skew >= 0.0 ? axis : Vector3(-axis);
    }
    // Skew-free set: make the largest-magnitude component positive.
    int major = 0;
    axis.cwiseAbs().maxCoeff(&major);
    return axis[major] >= 0.0 ? axis : Vector3(-axis);
}

} // namespace

std::vector<SurfacePoint> sample_surface_points(const Part& part, const TriangleMesh& mesh,
                                                const NormalField& normals,
                                                const AngleField& angles,
                                                const FeatureConfig& cfg,
                                                std::uint64_t point_seed) {
    std::vector<Scalar> cumulative;
    cumulative.reserve(part.triangles.size());
    Scalar total = 0.0;
    for (Index t : part.triangles) {
        total += mesh.triangle_area(t);
        cumulative.push_back(total);
    }
    if (total < 1e-18) {
        throw ZeroAreaError("part has zero total area");
    }

    Rng rng(point_seed);
    std::vector<SurfacePoint> out;
    out.reserve(static_cast<std::size_t>(cfg.n_points));
    for (Index i = 0; i < cfg.n_points; ++i) {
        const Scalar u = rng.next_double() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t pick = std::min(
            static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
        const Index t = part.triangles[pick];

        const Triangle& tri = mesh.triangles[static_cast<std::size_t>(t)];
        const Vector3& a = mesh.vertices[static_cast<std::size_t>(tri[0])];
        const Vector3& b = mesh.vertices[static_cast<std::size_t>(tri[1])];
        const Vector3& c = mesh.vertices[static_cast<std::size_t>(tri[2])];
        const Scalar r1 = std::sqrt(rng.next_double());
        const Scalar r2 = rng.next_double();
        SurfacePoint p;
        p.position = (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c;
        p.normal = normals.triangle_normals[static_cast<std::size_t>(t)];
        p.avg_angle = angles.avg_angle[static_cast<std::size_t>(t)];
        out.push_back(p);
    }
    return out;
}

LRFrame compute_pca_lrf(const std::vector<SurfacePoint>& points) {
    Vector3 eigenvalues;
    Matrix3 eigenvectors;
    covariance_eigen(points, eigenvalues, eigenvectors);

    // Tied smallest eigenvalues leave the z direction arbitrary; hand over
    // to the Z frame instead of picking one.
    const Scalar scale = std::max(eigenvalues[0], Scalar(1e-300));
    if ((eigenvalues[1] - eigenvalues[2]) / scale < 1e-9) {
        LRFrame frame = compute_z_lrf(points);
        frame.degenerate = true;
        return frame;
    }

    LRFrame frame;
    frame.origin = mean_position(points);

    Vector3 z = eigenvectors.col(2);
    if (z.dot(mean_normal(points)) < 0.0) {
        z = -z;
    }
    Vector3 x = skew_disambiguated(points, frame.origin, eigenvectors.col(0));
    x = (x - x.dot(z) * z).normalized();
    const Vector3 y = z.cross(x);

    frame.axes.row(0) = x;
    frame.axes.row(1) = y;
    frame.axes.row(2) = z;
    return frame;
}

LRFrame compute_z_lrf(const std::vector<SurfacePoint>& points) {
    LRFrame frame;
    frame.origin = mean_position(points);

    const Vector3 z = Vector3::UnitZ();
    const Vector3 mn = mean_normal(points);
    Vector3 horizontal = mn - mn.dot(z) * z;
    if (horizontal.norm() < 1e-9) {
        // Vertical mean normal: use the major covariance axis instead.
        Vector3 eigenvalues;
        Matrix3 eigenvectors;
        covariance_eigen(points, eigenvalues, eigenvectors);
        Vector3 major = eigenvectors.col(0);
        horizontal = major - major.dot(z) * z;
        if (horizontal.norm() < 1e-9) {
            horizontal = Vector3::UnitX();
        }
    }
    const Vector3 x = horizontal.normalized();
    const Vector3 y = z.cross(x);

    frame.axes.row(0) = x;
    frame.axes.row(1) = y;
    frame.axes.row(2) = z;
    return frame;
}

PartPointSet canonicalize(const std::vector<SurfacePoint>& points, const LRFrame& lrf,
                          const FeatureConfig& cfg) {
    const Index n = static_cast<Index>(points.size());
    const Index cols = cfg.include_angle ? 4 : 3;
    PartPointSet set;
    set.lrf = lrf;
    set.points.resize(n, cols);

    Scalar max_norm = 0.0;
    for (Index i = 0; i < n; ++i) {
        const Vector3 local = lrf.axes * (points[static_cast<std::size_t>(i)].position - lrf.origin);
        set.points(i, 0) = local.x();
        set.points(i, 1) = local.y();
        set.points(i, 2) = local.z();
        max_norm = std::max(max_norm, local.norm());
    }
    if (max_norm >= 1e-12) {
        set.points.leftCols(3) /= max_norm;
    }
    if (cfg.include_angle) {
        for (Index i = 0; i < n; ++i) {
            set.points(i, 3) = points[static_cast<std::size_t>(i)].avg_angle;
        }
    }
    return set;
}

std::vector<PartPointSet> featurize_parts(const std::vector<Part>& parts,
                                          const TriangleMesh& mesh, const NormalField& normals,
                                          const AngleField& angles, const FeatureConfig& cfg) {
    std::vector<PartPointSet> sets;
    sets.reserve(parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const std::uint64_t part_seed = Rng::mix(cfg.seed, static_cast<std::uint64_t>(p));
        const auto raw = sample_surface_points(parts[p], mesh, normals, angles, cfg, part_seed);
        const LRFrame lrf = cfg.lrf_mode == LrfMode::Pca ? compute_pca_lrf(raw)
                                                         : compute_z_lrf(raw);
        PartPointSet set = canonicalize(raw, lrf, cfg);
        set.part_index = static_cast<Index>(p);
        sets.push_back(std::move(set));
    }
    return sets;
}

} // namespace partgraph
