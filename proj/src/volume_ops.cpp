#include "mipseg/volume_ops.hpp"

#include <algorithm>

namespace mipseg {

ScalarVolume normalize_intensity(const ScalarVolume& volume) {
  const auto values = volume.values();
  if (values.empty()) throw Error(ErrorCode::kDegenerateRange, "empty volume");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) {
    throw Error(ErrorCode::kDegenerateRange, "cannot normalize a constant volume");
  }
  const double range = hi - lo;
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = (values[i] - lo) / range;
    out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return ScalarVolume(volume.dims(), volume.spacing(), std::move(out));
}

int center_offset(int from, int to, CenterPolicy policy) {
  const int diff = from - to;
  // diff > 0: crop, start reading at diff/2. diff < 0: pad, source index is
  // negative for the leading pad planes.
  const int half = policy == CenterPolicy::kExtraAfter
                       ? (diff >= 0 ? diff / 2 : -((-diff) / 2))
                       : (diff >= 0 ? (diff + 1) / 2 : -((-diff + 1) / 2));
  return half;
}

}  // namespace mipseg
