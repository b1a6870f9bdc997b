#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace eai {

// Named view into a parameter tensor. Registries list tensors in a fixed
// declaration order; checkpoints and the optimizer both iterate that order.
struct NamedTensor {
  std::string name;
  Eigen::MatrixXd* tensor;
};

using Registry = std::vector<NamedTensor>;

}  // namespace eai
