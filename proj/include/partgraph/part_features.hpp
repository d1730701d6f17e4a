#pragma once

#include "partgraph/mesh.hpp"
#include "partgraph/part_sampling.hpp"
#include "partgraph/types.hpp"

#include <cstdint>
#include <vector>

namespace partgraph {

enum class LrfMode { Pca, Z };

// Right-handed orthonormal frame; rows of `axes` are the x, y, z directions.
struct LRFrame {
    Vector3 origin = Vector3::Zero();
    Matrix3 axes = Matrix3::Identity();
    bool degenerate = false; // PCA fell back to the Z frame (isotropic set)
};

// Fixed-size canonical representation of one part: rows are (x, y, z) in LRF
// coordinates rescaled to the unit sphere, plus the source triangle's average
// angle when the angle feature is enabled.
struct PartPointSet {
    Matrix points; // n_points x 4 (or x 3 without the angle column)
    LRFrame lrf;
    Index part_index = -1;
};

struct FeatureConfig {
    Index n_points = 250;
    LrfMode lrf_mode = LrfMode::Pca;
    bool include_angle = true;
    std::uint64_t seed = 0;
};

// One surface sample: position, smoothed normal of the source triangle, and
// that triangle's average angle.
struct SurfacePoint {
    Vector3 position;
    Vector3 normal;
    Scalar avg_angle;
};

// Draws cfg.n_points samples over the part, triangles weighted by area and
// positions uniform within each triangle (square-root barycentric map).
std::vector<SurfacePoint> sample_surface_points(const Part& part, const TriangleMesh& mesh,
                                                const NormalField& normals,
                                                const AngleField& angles,
                                                const FeatureConfig& cfg,
                                                std::uint64_t point_seed);

// PCA frame: z follows the smallest covariance eigenvector flipped along the
// mean normal, x follows the largest one with its sign fixed by the skew of
// the point projections, y = z cross x. Near-isotropic sets (two smallest
// eigenvalues tied within 1e-9 relative) fall back to the Z frame and are
// flagged.
LRFrame compute_pca_lrf(const std::vector<SurfacePoint>& points);

// Vertical frame: z is the global Z axis, x the horizontal component of the
// mean normal (PCA major axis, then global X, when that degenerates).
LRFrame compute_z_lrf(const std::vector<SurfacePoint>& points);

PartPointSet canonicalize(const std::vector<SurfacePoint>& points, const LRFrame& lrf,
                          const FeatureConfig& cfg);

// Full per-object featurization: one PartPointSet per part, per-part seeds
// derived from cfg.seed so parts can be processed in any order.
std::vector<PartPointSet> featurize_parts(const std::vector<Part>& parts,
                                          const TriangleMesh& mesh, const NormalField& normals,
                                          const AngleField& angles, const FeatureConfig& cfg);

} // namespace partgraph
