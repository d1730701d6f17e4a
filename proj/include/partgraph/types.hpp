#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry> // cross products and quaternions

#include <array>
#include <cstdint>
#include <vector>

namespace partgraph {

using Scalar = double;
using Index = std::int64_t;

using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Vertex-index triple of one triangle, counter-clockwise for outward normals.
using Triangle = std::array<Index, 3>;

} // namespace partgraph
