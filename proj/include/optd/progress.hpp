#pragma once

#include <functional>
#include <string>

#include "optd/core.hpp"

namespace optd {

/// One outer-iteration progress record, shared by the limit-problem solvers.
struct IterationRecord {
  std::string method;
  long iteration = 0;
  Index activeSize = 0;   // |M_P|, surviving candidates
  Index workingSize = 0;  // |M-bar| for colgen, support size for FW
  double z = 0;           // max(0, max kappa - n) over the active set
  double objective = 0;   // ln det(X U X^T)
  double gap = 0;
};

using ProgressSink = std::function<void(const IterationRecord&)>;

/// Single-line JSON rendering of a progress record.
std::string to_json_line(const IterationRecord& rec);

}  // namespace optd
