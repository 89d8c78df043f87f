#pragma once

#include <array>
#include <vector>

namespace dacapo {

inline constexpr int kFeatureDim = 16;
inline constexpr int kClassCount = 8;

struct Sample {
  std::array<float, kFeatureDim> features{};
  int true_label = -1;     // generator ground truth, used only for metrics
  int teacher_label = -1;  // -1 while unlabeled
  double timestamp = 0.0;

  bool labeled() const { return teacher_label >= 0; }
};

using SampleSet = std::vector<Sample>;

}  // namespace dacapo
