#include "mipseg/serialization.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <string>

namespace mipseg {
namespace {

void check_keys(const Json& j, const char* what, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be a JSON object");
  }
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!keys.count(item.key())) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string("unknown key '") + item.key() + "' in " + what);
    }
  }
}

template <class T>
void read_opt(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

template <class T, std::size_t N>
Json pair_json(const std::array<T, N>& a) {
  Json out = Json::array();
  for (const auto& v : a) out.push_back(v);
  return out;
}

}  // namespace

void to_json(Json& j, const GrowConfig& c) {
  j = Json{{"alpha", c.alpha}, {"connectivity", static_cast<int>(c.connectivity)}};
}

void from_json(const Json& j, GrowConfig& c) {
  check_keys(j, "grow config", {"alpha", "connectivity"});
  read_opt(j, "alpha", c.alpha);
  int conn = static_cast<int>(c.connectivity);
  read_opt(j, "connectivity", conn);
  if (conn != 6 && conn != 26) throw Error(ErrorCode::kInvalidArgument, "connectivity must be 6 or 26");
  c.connectivity = static_cast<Connectivity>(conn);
}

void to_json(Json& j, const BackgroundConfig& c) {
  j = Json{{"beta_coef", c.beta_coef}, {"gamma_coef", c.gamma_coef}, {"eta_coef", c.eta_coef}};
}

void from_json(const Json& j, BackgroundConfig& c) {
  check_keys(j, "background config", {"beta_coef", "gamma_coef", "eta_coef"});
  read_opt(j, "beta_coef", c.beta_coef);
  read_opt(j, "gamma_coef", c.gamma_coef);
  read_opt(j, "eta_coef", c.eta_coef);
}

void to_json(Json& j, const RefineConfig& c) {
  j = Json{{"K", c.passes},         {"sigma", c.sigma}, {"mu", c.mu},
           {"d_th1", c.d_th1},      {"d_th2", c.d_th2}, {"eps1", c.eps1},
           {"eps2", c.eps2},        {"disable_priors", c.disable_priors}};
}

void from_json(const Json& j, RefineConfig& c) {
  check_keys(j, "refine config",
             {"K", "sigma", "mu", "d_th1", "d_th2", "eps1", "eps2", "disable_priors"});
  read_opt(j, "K", c.passes);
  read_opt(j, "sigma", c.sigma);
  read_opt(j, "mu", c.mu);
  read_opt(j, "d_th1", c.d_th1);
  read_opt(j, "d_th2", c.d_th2);
  read_opt(j, "eps1", c.eps1);
  read_opt(j, "eps2", c.eps2);
  read_opt(j, "disable_priors", c.disable_priors);
}

void to_json(Json& j, const OracleConfig& c) {
  j = Json{{"quality", c.quality}, {"pass_noise", c.pass_noise}, {"seed", c.seed}};
}

void from_json(const Json& j, OracleConfig& c) {
  check_keys(j, "oracle config", {"quality", "pass_noise", "seed"});
  read_opt(j, "quality", c.quality);
  read_opt(j, "pass_noise", c.pass_noise);
  read_opt(j, "seed", c.seed);
}

void to_json(Json& j, const PipelineConfig& c) {
  j = Json{{"phantom", c.phantom},
           {"volume", c.volume},
           {"mask", c.mask},
           {"ground_truth", c.ground_truth},
           {"probability", c.probability},
           {"passes", c.passes},
           {"axis", to_string(c.axis)},
           {"normalize", c.normalize},
           {"grow", c.grow},
           {"background", c.background},
           {"refine", c.refine},
           {"oracle", c.oracle},
           {"rounds", c.rounds},
           {"output_dir", c.output_dir}};
}

void from_json(const Json& j, PipelineConfig& c) {
  check_keys(j, "pipeline config",
             {"phantom", "volume", "mask", "ground_truth", "probability", "passes", "axis",
              "normalize", "grow", "background", "refine", "oracle", "rounds", "output_dir"});
  read_opt(j, "phantom", c.phantom);
  read_opt(j, "volume", c.volume);
  read_opt(j, "mask", c.mask);
  read_opt(j, "ground_truth", c.ground_truth);
  read_opt(j, "probability", c.probability);
  read_opt(j, "passes", c.passes);
  std::string axis = to_string(c.axis);
  read_opt(j, "axis", axis);
  c.axis = parse_axis(axis);
  read_opt(j, "normalize", c.normalize);
  if (j.contains("grow")) from_json(j.at("grow"), c.grow);
  if (j.contains("background")) from_json(j.at("background"), c.background);
  if (j.contains("refine")) from_json(j.at("refine"), c.refine);
  if (j.contains("oracle")) from_json(j.at("oracle"), c.oracle);
  read_opt(j, "rounds", c.rounds);
  read_opt(j, "output_dir", c.output_dir);
}

void to_json(Json& j, const PhantomSpec& s) {
  Json tubes = Json::array();
  for (const auto& t : s.tubes) tubes.push_back(Json{{"points", t.points}, {"radii", t.radii}});
  j = Json{{"dims", {s.dims.nx, s.dims.ny, s.dims.nz}},
           {"spacing", {s.spacing.sx, s.spacing.sy, s.spacing.sz}},
           {"tubes", tubes},
           {"vessel_intensity", {s.vessel.lo, s.vessel.hi}},
           {"background_intensity", {s.background.lo, s.background.hi}},
           {"noise_std", s.noise_std},
           {"seed", s.seed}};
}

void from_json(const Json& j, PhantomSpec& s) {
  check_keys(j, "phantom spec",
             {"dims", "spacing", "tubes", "vessel_intensity", "background_intensity", "noise_std",
              "seed"});
  std::array<int, 3> dims{s.dims.nx, s.dims.ny, s.dims.nz};
  read_opt(j, "dims", dims);
  s.dims = {dims[0], dims[1], dims[2]};
  std::array<double, 3> spacing{s.spacing.sx, s.spacing.sy, s.spacing.sz};
  read_opt(j, "spacing", spacing);
  s.spacing = {spacing[0], spacing[1], spacing[2]};
  std::array<double, 2> range{s.vessel.lo, s.vessel.hi};
  read_opt(j, "vessel_intensity", range);
  s.vessel = {range[0], range[1]};
  range = {s.background.lo, s.background.hi};
  read_opt(j, "background_intensity", range);
  s.background = {range[0], range[1]};
  read_opt(j, "noise_std", s.noise_std);
  read_opt(j, "seed", s.seed);
  if (auto it = j.find("tubes"); it != j.end()) {
    s.tubes.clear();
    for (const auto& tj : *it) {
      check_keys(tj, "tube", {"points", "radii", "radius"});
      Tube t;
      read_opt(tj, "points", t.points);
      if (tj.contains("radius")) {
        t.radii = {tj.at("radius").get<double>()};
      } else {
        read_opt(tj, "radii", t.radii);
      }
      s.tubes.push_back(std::move(t));
    }
  }
}

void to_json(Json& j, const RefinementReport& r) {
  j = Json{{"cl_degenerate", r.cl_degenerate},
           {"labeled", r.cl.labeled},
           {"self_confidence", pair_json(r.cl.t)},
           {"intersections", {pair_json(r.cl.intersections[0]), pair_json(r.cl.intersections[1])}},
           {"count_matrix", {pair_json(r.cl.count_matrix[0]), pair_json(r.cl.count_matrix[1])}},
           {"joint", {pair_json(r.cl.joint[0]), pair_json(r.cl.joint[1])}},
           {"quota", pair_json(r.cl.quota)},
           {"cutoff_margin", {optional_number(r.cutoff_margin[0]), optional_number(r.cutoff_margin[1])}},
           {"conflicts", r.conflicts},
           {"pruned", pair_json(r.pruned)},
           {"removed", pair_json(r.removed)},
           {"added_cl", pair_json(r.add_cl)},
           {"added_ue", pair_json(r.add_ue)},
           {"u_ave", {optional_number(r.u_ave[0]), optional_number(r.u_ave[1])}},
           {"agreeing_unlabeled", pair_json(r.agreeing)},
           {"counts_before", {{"background", r.counts_before[0]},
                              {"foreground", r.counts_before[1]},
                              {"unlabeled", r.counts_before[2]}}},
           {"counts_after", {{"background", r.counts_after[0]},
                             {"foreground", r.counts_after[1]},
                             {"unlabeled", r.counts_after[2]}}}};
}

void to_json(Json& j, const MetricReport& r) {
  j = Json{{"dsc", r.dsc}, {"cldice", r.cldice}, {"ahd", r.ahd},
           {"tp", r.tp},   {"fp", r.fp},         {"fn", r.fn}};
}

void to_json(Json& j, const ConflictFile& c) {
  Json coords = Json::array();
  for (Index i : c.conflicts) {
    const Coord p = c.dims.coord(i);
    coords.push_back({p.x, p.y, p.z});
  }
  j = Json{{"v_ave", c.v_ave}, {"dims", {c.dims.nx, c.dims.ny, c.dims.nz}}, {"conflicts", coords}};
}

void from_json(const Json& j, ConflictFile& c) {
  check_keys(j, "conflict file", {"v_ave", "dims", "conflicts"});
  read_opt(j, "v_ave", c.v_ave);
  std::array<int, 3> dims{};
  read_opt(j, "dims", dims);
  c.dims = {dims[0], dims[1], dims[2]};
  validate_dims(c.dims);
  std::vector<std::array<int, 3>> coords;
  read_opt(j, "conflicts", coords);
  std::vector<Index> idx;
  for (const auto& p : coords) {
    if (!c.dims.contains(p[0], p[1], p[2])) {
      throw Error(ErrorCode::kOutOfRange, "conflict coordinate outside dims");
    }
    idx.push_back(c.dims.linear(p[0], p[1], p[2]));
  }
  c.conflicts = VoxelSet(std::move(idx));
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, "invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace mipseg
