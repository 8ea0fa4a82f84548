#include "mipseg/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mipseg/parallel.hpp"

namespace mipseg {
namespace {

double class_prob(const ProbabilityVolume& prob, Index i, int cls) {
  const double p = prob[i];
  return cls == 1 ? p : 1.0 - p;
}

double set_mean(const VoxelSet& set, const std::function<double(Index)>& value) {
  const auto& idx = set.indices();
  return stable_sum(idx.size(), [&](std::size_t k) { return value(idx[k]); }) /
         static_cast<double>(idx.size());
}

std::vector<std::uint8_t> membership(std::size_t n, const VoxelSet& set) {
  std::vector<std::uint8_t> m(n, 0);
  for (Index i : set) m[i] = 1;
  return m;
}

void check_inside(const VoxelSet& set, std::size_t n, const char* what) {
  if (!set.empty() && set.indices().back() >= n) {
    throw Error(ErrorCode::kOutOfRange, std::string(what) + " has voxels outside the volume");
  }
}

std::array<std::size_t, 3> class_counts(const LabelVolume& labels) {
  std::array<std::size_t, 3> c{};
  for (Label l : labels.values()) ++c[static_cast<std::size_t>(l)];
  return c;
}

}  // namespace

void RefineConfig::validate() const {
  if (passes < 2) throw Error(ErrorCode::kInvalidArgument, "K must be at least 2");
  if (!(sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be nonnegative");
  if (!disable_priors) {
    for (double v : {d_th1, d_th2, eps1, eps2}) {
      if (!(v > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "prior thresholds must be positive");
      }
    }
  }
}

LabelSets label_sets(const LabelVolume& labels, const VoxelSet& conflicts) {
  check_inside(conflicts, labels.size(), "conflict list");
  return {set_union(VoxelSet::where(labels, Label::kBackground), conflicts),
          set_union(VoxelSet::where(labels, Label::kForeground), conflicts)};
}

LatentSets latent_sets(const LabelSets& sets, const ProbabilityVolume& prob) {
  for (int cls : {0, 1}) {
    if (sets.of(cls).empty()) {
      throw Error(ErrorCode::kEmptyClass, std::string("labeled set is empty for class ") +
                                              (cls == 0 ? "background" : "foreground"));
    }
    check_inside(sets.of(cls), prob.size(), "label set");
  }
  LatentSets out;
  for (int cls : {0, 1}) {
    out.t[cls] = set_mean(sets.of(cls), [&](Index i) { return class_prob(prob, i, cls); });
  }
  std::vector<Index> star[2];
  for (Index i : sets.labeled()) {
    const int cls = argmax_class(prob[i]);
    if (class_prob(prob, i, cls) > out.t[cls]) star[cls].push_back(i);
  }
  out.s0_star = VoxelSet(std::move(star[0]));
  out.s1_star = VoxelSet(std::move(star[1]));
  return out;
}

ClState count_and_joint(const LabelSets& sets, const LatentSets& latent) {
  ClState st;
  st.t = latent.t;
  st.labeled = sets.labeled().size();
  std::array<std::size_t, 2> row{};
  for (int i : {0, 1}) {
    for (int j : {0, 1}) {
      st.intersections[i][j] = set_intersection(sets.of(i), latent.of(j)).size();
      row[i] += st.intersections[i][j];
    }
  }
  if (row[0] == 0 && row[1] == 0) {
    throw Error(ErrorCode::kDegenerateConfidentLearning,
                "no labeled voxel falls in a latent set; confident learning is undefined");
  }
  // A row with no latent evidence is zero and carries no normalization mass.
  double total = 0.0;
  std::size_t total_count = 0;
  for (int i : {0, 1}) {
    if (row[i] == 0) continue;
    const double size = static_cast<double>(sets.of(i).size());
    for (int j : {0, 1}) {
      st.count_matrix[i][j] =
          static_cast<double>(st.intersections[i][j]) / static_cast<double>(row[i]) * size;
      total += st.count_matrix[i][j];
    }
    total_count += sets.of(i).size();
  }
  for (int i : {0, 1}) {
    for (int j : {0, 1}) st.joint[i][j] = st.count_matrix[i][j] / total;
  }
  // |Ω_L| * Q̂[i][1-i] = |Ω_L| * c * |S_i| / (row_i * Σ|S_k|), all integers:
  // floor it exactly instead of through the rounded doubles above.
  for (int i : {0, 1}) {
    if (row[i] == 0) continue;
    const auto num = static_cast<unsigned __int128>(st.labeled) * st.intersections[i][1 - i] *
                     sets.of(i).size();
    const auto den = static_cast<unsigned __int128>(row[i]) * total_count;
    st.quota[i] = static_cast<std::size_t>(num / den);
  }
  return st;
}

Removals pbnr_remove(const LabelSets& sets, const ProbabilityVolume& prob,
                     const LatentSets& latent, const ClState& state) {
  Removals out;
  const VoxelSet conflicts = sets.conflicts();
  for (int i : {0, 1}) {
    const VoxelSet candidates = set_intersection(sets.of(i), latent.of(1 - i));
    struct Ranked {
      double margin;
      Index index;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(candidates.size());
    for (Index p : candidates) {
      ranked.push_back({class_prob(prob, p, 1 - i) - class_prob(prob, p, i), p});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      return a.margin != b.margin ? a.margin > b.margin : a.index < b.index;
    });
    const std::size_t take = std::min(state.quota[i], ranked.size());
    std::vector<Index> removed;
    removed.reserve(take);
    for (std::size_t k = 0; k < take; ++k) removed.push_back(ranked[k].index);
    if (take > 0) out.cutoff_margin[i] = ranked[take - 1].margin;
    out.pruned[i] = take;
    out.by_class[i] = set_union(VoxelSet(std::move(removed)), conflicts);
  }
  return out;
}

AddSets cl_add(const ScalarVolume& volume, const Removals& removals,
               const DistanceField& distance_to_fg, double v_ave, const RefineConfig& cfg) {
  require_same_dims(volume, distance_to_fg, "cl_add");
  AddSets out;
  std::vector<Index> to_bg;
  for (Index p : removals.by_class[1]) {
    if (cfg.disable_priors || volume[p] < cfg.eps1 * v_ave) to_bg.push_back(p);
  }
  std::vector<Index> to_fg;
  for (Index p : removals.by_class[0]) {
    if (cfg.disable_priors || distance_to_fg[p] < cfg.d_th1) to_fg.push_back(p);
  }
  out.by_class[0] = VoxelSet(std::move(to_bg));
  out.by_class[1] = VoxelSet(std::move(to_fg));
  return out;
}

AddSets cl_add(const ScalarVolume& volume, const Removals& removals, const VoxelSet& s1,
               double v_ave, const RefineConfig& cfg) {
  return cl_add(volume, removals, distance_to_set(volume.dims(), s1), v_ave, cfg);
}

double binary_entropy_bits(double p_fg) {
  double u = 0.0;
  for (double m : {1.0 - p_fg, p_fg}) {
    if (m > 0.0) u -= m * std::log2(m);
  }
  return u;
}

McAggregate mc_aggregate(const ProbabilityVolume& clean, std::span<const ProbabilityVolume> passes) {
  if (passes.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "at least two prediction passes are required");
  }
  for (const auto& p : passes) require_same_dims(clean, p, "prediction pass");
  const std::size_t n = clean.size();
  std::vector<float> mean(n);
  Grid<double> entropy(clean.dims(), clean.spacing(), 0.0);
  const double k = static_cast<double>(passes.size());
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double sum = 0.0;
      for (const auto& pass : passes) sum += pass[i];
      const double m = std::clamp(sum / k, 0.0, 1.0);
      mean[i] = static_cast<float>(m);
      entropy[i] = binary_entropy_bits(m);
    }
  });
  return {ProbabilityVolume(clean.dims(), clean.spacing(), std::move(mean)), std::move(entropy)};
}

UeResult ue_add(const LabelSets& sets, const ScalarVolume& volume, const ProbabilityVolume& clean,
                const McAggregate& mc, const DistanceField& distance_to_fg, double v_ave,
                const RefineConfig& cfg) {
  require_same_dims(volume, clean, "ue_add");
  require_same_dims(volume, mc.mean, "ue_add");
  require_same_dims(volume, distance_to_fg, "ue_add");
  const auto labeled = membership(volume.size(), sets.labeled());

  std::vector<Index> agree[2];
  for (Index i = 0; i < volume.size(); ++i) {
    if (labeled[i]) continue;
    const int y = argmax_class(clean[i]);
    if (y == argmax_class(mc.mean[i])) agree[y].push_back(i);
  }
  UeResult out;
  for (int cls : {0, 1}) {
    out.agreeing[cls] = agree[cls].size();
    if (agree[cls].empty()) continue;
    const VoxelSet group(std::move(agree[cls]));
    const double u_ave = set_mean(group, [&](Index i) { return mc.entropy[i]; });
    out.u_ave[cls] = u_ave;
    std::vector<Index> added;
    for (Index p : group) {
      if (!(mc.entropy[p] < u_ave)) continue;
      const bool prior = cfg.disable_priors ||
                         (cls == 0 ? volume[p] < cfg.eps2 * v_ave : distance_to_fg[p] < cfg.d_th2);
      if (prior) added.push_back(p);
    }
    out.adds.by_class[cls] = VoxelSet(std::move(added));
  }
  return out;
}

RefineResult refine_round(const LabelVolume& labels, const VoxelSet& conflicts,
                          const ScalarVolume& volume, const ProbabilityVolume& clean,
                          std::span<const ProbabilityVolume> passes, double v_ave,
                          const RefineConfig& cfg) {
  cfg.validate();
  require_same_dims(labels, volume, "refine_round");
  require_same_dims(labels, clean, "refine_round");
  if (passes.size() != static_cast<std::size_t>(cfg.passes)) {
    throw Error(ErrorCode::kInvalidArgument, "config expects " + std::to_string(cfg.passes) +
                                                 " passes, got " + std::to_string(passes.size()));
  }
  if (!(v_ave > 0.0) || !std::isfinite(v_ave)) {
    throw Error(ErrorCode::kInvalidArgument, "v_ave must be positive and finite");
  }
  for (Index c : conflicts) {
    if (c < labels.size() && labels[c] != Label::kUnlabeled) {
      throw Error(ErrorCode::kInvalidArgument, "conflict voxels must be unlabeled in the label volume");
    }
  }

  RefineResult result;
  RefinementReport& rep = result.report;
  rep.counts_before = class_counts(labels);

  const LabelSets sets = label_sets(labels, conflicts);
  rep.conflicts = sets.conflicts().size();
  const LatentSets latent = latent_sets(sets, clean);
  const DistanceField dist = distance_to_set(labels.dims(), sets.s1);

  Removals removals;
  try {
    rep.cl = count_and_joint(sets, latent);
    removals = pbnr_remove(sets, clean, latent, rep.cl);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateConfidentLearning) throw;
    // No latent evidence: nothing is pruned, conflicts still leave both classes.
    rep.cl_degenerate = true;
    rep.cl.t = latent.t;
    rep.cl.labeled = sets.labeled().size();
    removals.by_class = {sets.conflicts(), sets.conflicts()};
  }
  rep.cutoff_margin = removals.cutoff_margin;
  rep.pruned = removals.pruned;
  const AddSets add1 = cl_add(volume, removals, dist, v_ave, cfg);

  const McAggregate mc = mc_aggregate(clean, passes);
  const UeResult ue = ue_add(sets, volume, clean, mc, dist, v_ave, cfg);
  rep.u_ave = ue.u_ave;
  rep.agreeing = ue.agreeing;

  std::array<VoxelSet, 2> refined;
  for (int i : {0, 1}) {
    rep.removed[i] = removals.by_class[i].size();
    rep.add_cl[i] = add1.by_class[i].size();
    rep.add_ue[i] = ue.adds.by_class[i].size();
    refined[i] = set_union(
        set_difference(set_union(sets.of(i), add1.by_class[i]), removals.by_class[i]),
        ue.adds.by_class[i]);
  }
  if (!set_intersection(refined[0], refined[1]).empty()) {
    throw std::logic_error("refined classes overlap");
  }

  result.labels = LabelVolume(labels.dims(), labels.spacing(), Label::kUnlabeled);
  for (Index i : refined[0]) result.labels[i] = Label::kBackground;
  for (Index i : refined[1]) result.labels[i] = Label::kForeground;
  rep.counts_after = class_counts(result.labels);
  return result;
}

}  // namespace mipseg
