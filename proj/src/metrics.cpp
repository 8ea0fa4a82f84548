#include "mipseg/metrics.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "mipseg/distance.hpp"
#include "mipseg/parallel.hpp"

namespace mipseg {
namespace {

constexpr int kCenter = 13;

int cube_index(int dx, int dy, int dz) { return (dx + 1) + 3 * (dy + 1) + 9 * (dz + 1); }

struct NeighborhoodTables {
  std::array<std::vector<int>, 27> adj26;  // among the 26 neighbors
  std::array<std::vector<int>, 27> adj6;   // among the 18 neighbors
  std::array<bool, 27> in_n18{};
  std::array<int, 6> faces{};

  NeighborhoodTables() {
    auto offset = [](int k) { return std::array<int, 3>{k % 3 - 1, k / 3 % 3 - 1, k / 9 - 1}; };
    int f = 0;
    for (int k = 0; k < 27; ++k) {
      if (k == kCenter) continue;
      const auto a = offset(k);
      const int nonzero = (a[0] != 0) + (a[1] != 0) + (a[2] != 0);
      in_n18[k] = nonzero <= 2;
      if (nonzero == 1) faces[f++] = k;
    }
    for (int k = 0; k < 27; ++k) {
      if (k == kCenter) continue;
      for (int m = 0; m < 27; ++m) {
        if (m == kCenter || m == k) continue;
        const auto a = offset(k);
        const auto b = offset(m);
        const int dx = std::abs(a[0] - b[0]);
        const int dy = std::abs(a[1] - b[1]);
        const int dz = std::abs(a[2] - b[2]);
        if (dx > 1 || dy > 1 || dz > 1) continue;
        adj26[k].push_back(m);
        if (dx + dy + dz == 1 && in_n18[k] && in_n18[m]) adj6[k].push_back(m);
      }
    }
  }
};

const NeighborhoodTables& tables() {
  static const NeighborhoodTables t;
  return t;
}

bool bit(std::uint32_t n, int k) { return (n >> k) & 1u; }

std::uint32_t gather_neighborhood(const BinaryVolume& m, const Coord& c) {
  std::uint32_t n = 0;
  const Dims& d = m.dims();
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = c.x + dx, y = c.y + dy, z = c.z + dz;
        if (d.contains(x, y, z) && m.at(x, y, z)) n |= 1u << cube_index(dx, dy, dz);
      }
    }
  }
  return n;
}

int neighbor_count(std::uint32_t n) {
  return std::popcount(n & ~(1u << kCenter));
}

const std::array<Coord, 6> kDirections = {
    Coord{0, 0, 1}, Coord{0, 0, -1}, Coord{0, 1, 0}, Coord{0, -1, 0}, Coord{1, 0, 0}, Coord{-1, 0, 0}};

// Deletable: border in `dir`, not an end point, simple.
bool deletable(const BinaryVolume& m, const Coord& c, const Coord& dir) {
  const Coord q{c.x + dir.x, c.y + dir.y, c.z + dir.z};
  if (m.dims().contains(q) && m.at(q)) return false;
  const std::uint32_t n = gather_neighborhood(m, c);
  if (neighbor_count(n) <= 1) return false;
  return is_simple_point(n);
}

}  // namespace

bool is_simple_point(std::uint32_t n) {
  const auto& t = tables();
  // Object: 26-components among the 26 neighbors must number exactly one.
  std::uint32_t seen = 0;
  int fg_components = 0;
  std::array<int, 27> stack{};
  for (int k = 0; k < 27; ++k) {
    if (k == kCenter || !bit(n, k) || bit(seen, k)) continue;
    ++fg_components;
    if (fg_components > 1) return false;
    int top = 0;
    stack[top++] = k;
    seen |= 1u << k;
    while (top > 0) {
      const int v = stack[--top];
      for (int w : t.adj26[v]) {
        if (bit(n, w) && !bit(seen, w)) {
          seen |= 1u << w;
          stack[top++] = w;
        }
      }
    }
  }
  if (fg_components != 1) return false;
  // Background: 6-components in N18 touching a face neighbor must number one.
  seen = 0;
  int bg_components = 0;
  for (int k : t.faces) {
    if (bit(n, k) || bit(seen, k)) continue;
    ++bg_components;
    if (bg_components > 1) return false;
    int top = 0;
    stack[top++] = k;
    seen |= 1u << k;
    while (top > 0) {
      const int v = stack[--top];
      for (int w : t.adj6[v]) {
        if (!bit(n, w) && !bit(seen, w)) {
          seen |= 1u << w;
          stack[top++] = w;
        }
      }
    }
  }
  return bg_components == 1;
}

double dsc(const BinaryVolume& a, const BinaryVolume& b) {
  require_same_dims(a, b, "dsc");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) throw Error(ErrorCode::kUndefinedMetric, "DSC is undefined for two empty masks");
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

BinaryVolume skeletonize(const BinaryVolume& mask) {
  BinaryVolume m(mask.dims(), mask.spacing(), std::uint8_t{0});
  std::vector<Index> members;
  for (Index i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      m[i] = 1;
      members.push_back(i);
    }
  }
  if (members.empty()) throw Error(ErrorCode::kEmptySet, "cannot skeletonize an empty mask");
  const Dims& dims = m.dims();
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Coord& dir : kDirections) {
      std::vector<Index> candidates;
      for (Index i : members) {
        if (m[i] && deletable(m, dims.coord(i), dir)) candidates.push_back(i);
      }
      // Re-check each candidate against the partially thinned object.
      for (Index i : candidates) {
        if (deletable(m, dims.coord(i), dir)) {
          m[i] = 0;
          changed = true;
        }
      }
    }
    std::erase_if(members, [&](Index i) { return m[i] == 0; });
  }
  return m;
}

std::size_t count_components(const BinaryVolume& mask) {
  const Dims& dims = mask.dims();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<Index> stack;
  std::size_t components = 0;
  for (Index s = 0; s < mask.size(); ++s) {
    if (!mask[s] || seen[s]) continue;
    ++components;
    seen[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      const Coord c = dims.coord(stack.back());
      stack.pop_back();
      for (int dz = -1; dz <= 1; ++dz) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const Coord q{c.x + dx, c.y + dy, c.z + dz};
            if (!dims.contains(q)) continue;
            const Index qi = dims.linear(q);
            if (mask[qi] && !seen[qi]) {
              seen[qi] = 1;
              stack.push_back(qi);
            }
          }
        }
      }
    }
  }
  return components;
}

double cldice(const BinaryVolume& pred, const BinaryVolume& gt) {
  require_same_dims(pred, gt, "cldice");
  const BinaryVolume sp = skeletonize(pred);
  const BinaryVolume sg = skeletonize(gt);
  std::size_t sp_n = 0, sp_in = 0, sg_n = 0, sg_in = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (sp[i]) {
      ++sp_n;
      sp_in += gt[i] != 0;
    }
    if (sg[i]) {
      ++sg_n;
      sg_in += pred[i] != 0;
    }
  }
  const double precision = static_cast<double>(sp_in) / static_cast<double>(sp_n);
  const double sensitivity = static_cast<double>(sg_in) / static_cast<double>(sg_n);
  if (precision + sensitivity == 0.0) return 0.0;
  return 2.0 * precision * sensitivity / (precision + sensitivity);
}

double ahd(const BinaryVolume& a, const BinaryVolume& b) {
  require_same_dims(a, b, "ahd");
  const VoxelSet sa = VoxelSet::from_mask(a);
  const VoxelSet sb = VoxelSet::from_mask(b);
  if (sa.empty() || sb.empty()) {
    throw Error(ErrorCode::kEmptySet, "AHD needs two nonempty masks");
  }
  auto directed = [&](const VoxelSet& from, const VoxelSet& to) {
    const DistanceField d = distance_to_set(a.dims(), to, a.spacing());
    const auto& idx = from.indices();
    return stable_sum(idx.size(), [&](std::size_t k) { return d[idx[k]]; }) /
           static_cast<double>(idx.size());
  };
  return 0.5 * (directed(sa, sb) + directed(sb, sa));
}

MetricReport evaluate(const BinaryVolume& pred, const BinaryVolume& gt) {
  require_same_dims(pred, gt, "evaluate");
  MetricReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    r.tp += p && g;
    r.fp += p && !g;
    r.fn += !p && g;
  }
  r.dsc = dsc(pred, gt);
  r.cldice = cldice(pred, gt);
  r.ahd = ahd(pred, gt);
  return r;
}

}  // namespace mipseg
