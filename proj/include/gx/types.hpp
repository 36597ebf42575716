#pragma once

#include <Eigen/Core>

namespace gx {

using Index = Eigen::Index;

template <typename S>
using ArrayT = Eigen::Array<S, Eigen::Dynamic, 1>;

// Path ensembles are row-major: one contiguous row per path.
template <typename S>
using PathMatT = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Array = ArrayT<double>;
using PathMat = PathMatT<double>;

using ConstArrayMap = Eigen::Map<const Array>;

}  // namespace gx
