// Shared vector aliases.
#pragma once

#include <vector>

#include <Eigen/Core>

namespace searchmpc {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Mat42 = Eigen::Matrix<double, 4, 2>;

/// Sequence of planar points or inputs, one 2-vector per time step.
using Vec2Seq = std::vector<Vec2>;

}  // namespace searchmpc
