#pragma once

#include <Eigen/Core>

namespace enor {

/// Space-time field: one row per time frame, one column per grid point.
using Field = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace enor
