#include "tbdp/io.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tbdp/bellman.hpp"

namespace tbdp {

namespace {

using nlohmann::json;

[[noreturn]] void schema_fail(const std::string& section,
                              const std::string& what) {
  fail(ErrorKind::validation, section + ": " + what);
}

const json& require(const json& j, const char* key,
                    const std::string& section) {
  auto it = j.find(key);
  if (it == j.end()) schema_fail(section, std::string("missing key '") + key + "'");
  return *it;
}

Cost cost_from_json(const json& j, const std::string& section) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return Cost::inf();
    schema_fail(section, "cost strings must be \"inf\"");
  }
  if (!j.is_number()) schema_fail(section, "cost must be a number or \"inf\"");
  return Cost(j.get<double>());
}

json cost_to_json(Cost c) {
  if (c.is_inf()) return json("inf");
  return json(c.value());
}

std::vector<Cost> costs_from_json(const json& j, const std::string& section) {
  if (!j.is_array()) schema_fail(section, "expected an array of costs");
  std::vector<Cost> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(cost_from_json(e, section));
  return out;
}

json costs_to_json(const std::vector<Cost>& v) {
  json out = json::array();
  for (Cost c : v) out.push_back(cost_to_json(c));
  return out;
}

Distribution distribution_from_json(const json& j,
                                    const std::string& section) {
  if (!j.is_array() || j.empty())
    schema_fail(section, "expected a non-empty probability array");
  std::vector<double> probs;
  probs.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) schema_fail(section, "probabilities must be numbers");
    probs.push_back(e.get<double>());
  }
  try {
    return Distribution(std::move(probs));
  } catch (const SolverError& e) {
    schema_fail(section, e.what());
  }
}

json distribution_to_json(const Distribution& d) {
  json out = json::array();
  for (int i = 0; i < d.size(); ++i) out.push_back(d[i]);
  return out;
}

std::vector<int> ints_from_json(const json& j, const std::string& section) {
  if (!j.is_array()) schema_fail(section, "expected an integer array");
  std::vector<int> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number_integer()) schema_fail(section, "entries must be integers");
    out.push_back(e.get<int>());
  }
  return out;
}

std::vector<FiniteSpace> spaces_from_json(const json& j,
                                          const std::string& section) {
  std::vector<FiniteSpace> out;
  for (int n : ints_from_json(j, section)) {
    if (n < 1) schema_fail(section, "space sizes must be >= 1");
    out.push_back(FiniteSpace(n));
  }
  return out;
}

json spaces_to_json(const std::vector<FiniteSpace>& spaces) {
  json out = json::array();
  for (const FiniteSpace& s : spaces) out.push_back(s.size);
  return out;
}

StageSpaces stage_spaces_from_json(const json& j) {
  StageSpaces spaces;
  spaces.controls = spaces_from_json(require(j, "controls", "spaces"),
                                     "spaces.controls");
  spaces.uncertainties = spaces_from_json(
      require(j, "uncertainties", "spaces"), "spaces.uncertainties");
  spaces.validate();
  return spaces;
}

std::vector<StochasticKernel> kernels_from_json(const json& j,
                                                const StageSpaces& spaces) {
  if (!j.is_array()) schema_fail("kernels", "expected an array");
  std::vector<StochasticKernel> out;
  for (const auto& k : j) {
    std::string section = "kernels[" + std::to_string(out.size()) + "]";
    int stage = require(k, "stage", section).get<int>();
    std::string rep = require(k, "rep", section).get<std::string>();
    std::vector<Distribution> rows;
    for (const auto& r : require(k, "rows", section))
      rows.push_back(distribution_from_json(r, section + ".rows"));
    if (rep == "white_noise") {
      if (rows.size() != 1) schema_fail(section, "white_noise takes one row");
      out.push_back(StochasticKernel::white(stage, rows[0]));
    } else if (rep == "markov1") {
      out.push_back(StochasticKernel::markov(stage, std::move(rows)));
    } else if (rep == "full_table") {
      out.push_back(StochasticKernel::full(stage, std::move(rows)));
    } else {
      schema_fail(section, "unknown kernel rep '" + rep + "'");
    }
    out.back().validate(spaces);
  }
  return out;
}

json kernels_to_json(const std::vector<StochasticKernel>& kernels) {
  json out = json::array();
  for (const StochasticKernel& k : kernels) {
    json e;
    e["stage"] = k.stage();
    switch (k.rep()) {
      case StochasticKernel::Rep::white_noise: e["rep"] = "white_noise"; break;
      case StochasticKernel::Rep::markov1: e["rep"] = "markov1"; break;
      case StochasticKernel::Rep::full_table: e["rep"] = "full_table"; break;
      case StochasticKernel::Rep::reduced_via_map:
        fail(ErrorKind::representation,
             "map-keyed kernels have no file form");
    }
    json rows = json::array();
    for (const Distribution& r : k.all_rows())
      rows.push_back(distribution_to_json(r));
    e["rows"] = std::move(rows);
    out.push_back(std::move(e));
  }
  return out;
}

Criterion criterion_from_json(const json& j) {
  std::string rep = require(j, "rep", "criterion").get<std::string>();
  Criterion c;
  if (rep == "full_table") {
    c = Criterion::from_table(
        costs_from_json(require(j, "values", "criterion"), "criterion.values"));
  } else if (rep == "final_state") {
    c = Criterion::from_final_state(
        ints_from_json(require(j, "theta", "criterion"), "criterion.theta"),
        require(j, "state_size", "criterion").get<int>(),
        costs_from_json(require(j, "values", "criterion"),
                        "criterion.values"));
  } else if (rep == "additive") {
    c.rep = Criterion::Rep::additive;
    for (const auto& t : require(j, "theta", "criterion"))
      c.theta.push_back(ints_from_json(t, "criterion.theta"));
    c.state_sizes = ints_from_json(require(j, "state_sizes", "criterion"),
                                   "criterion.state_sizes");
    for (const auto& t : require(j, "stage_costs", "criterion"))
      c.stage_costs.push_back(costs_from_json(t, "criterion.stage_costs"));
    c.final_cost = costs_from_json(require(j, "final_cost", "criterion"),
                                   "criterion.final_cost");
  } else {
    schema_fail("criterion", "unknown rep '" + rep + "'");
  }
  return c;
}

json criterion_to_json(const Criterion& c) {
  json out;
  switch (c.rep) {
    case Criterion::Rep::full_table:
      out["rep"] = "full_table";
      out["values"] = costs_to_json(c.full);
      break;
    case Criterion::Rep::final_state:
      out["rep"] = "final_state";
      out["theta"] = c.theta_final;
      out["state_size"] = c.final_state_size;
      out["values"] = costs_to_json(c.final_values);
      break;
    case Criterion::Rep::additive: {
      out["rep"] = "additive";
      out["theta"] = c.theta;
      out["state_sizes"] = c.state_sizes;
      json sc = json::array();
      for (const auto& t : c.stage_costs) sc.push_back(costs_to_json(t));
      out["stage_costs"] = std::move(sc);
      out["final_cost"] = costs_to_json(c.final_cost);
      break;
    }
  }
  return out;
}

NoiseProcessSpec noise_from_json(const json& j) {
  NoiseProcessSpec spec;
  std::string rep = require(j, "rep", "noise_process").get<std::string>();
  spec.spaces = spaces_from_json(require(j, "spaces", "noise_process"),
                                 "noise_process.spaces");
  if (rep == "white_noise") {
    spec.rep = NoiseProcessSpec::Rep::white_noise;
    for (const auto& m : require(j, "marginals", "noise_process"))
      spec.marginals.push_back(
          distribution_from_json(m, "noise_process.marginals"));
  } else if (rep == "joint_table") {
    spec.rep = NoiseProcessSpec::Rep::joint_table;
    for (const auto& p : require(j, "joint", "noise_process")) {
      if (!p.is_number())
        schema_fail("noise_process.joint", "entries must be numbers");
      spec.joint.push_back(p.get<double>());
    }
  } else if (rep == "day_independent") {
    spec.rep = NoiseProcessSpec::Rep::day_independent;
    const json& clk = require(j, "clock", "noise_process");
    spec.clock.days = require(clk, "days", "noise_process.clock").get<int>();
    spec.clock.minutes =
        require(clk, "minutes", "noise_process.clock").get<int>();
    for (const auto& d : require(j, "day_joint", "noise_process")) {
      std::vector<double> block;
      for (const auto& p : d) block.push_back(p.get<double>());
      spec.day_joint.push_back(std::move(block));
    }
  } else {
    schema_fail("noise_process", "unknown rep '" + rep + "'");
  }
  spec.validate();
  return spec;
}

json noise_to_json(const NoiseProcessSpec& spec) {
  json out;
  out["spaces"] = spaces_to_json(spec.spaces);
  switch (spec.rep) {
    case NoiseProcessSpec::Rep::white_noise: {
      out["rep"] = "white_noise";
      json m = json::array();
      for (const Distribution& d : spec.marginals)
        m.push_back(distribution_to_json(d));
      out["marginals"] = std::move(m);
      break;
    }
    case NoiseProcessSpec::Rep::joint_table:
      out["rep"] = "joint_table";
      out["joint"] = spec.joint;
      break;
    case NoiseProcessSpec::Rep::day_independent:
      out["rep"] = "day_independent";
      out["clock"] = {{"days", spec.clock.days},
                      {"minutes", spec.clock.minutes}};
      out["day_joint"] = spec.day_joint;
      break;
  }
  return out;
}

ReductionMap reduction_map_from_json(const json& j, const StageSpaces& spaces,
                                     int stage, const std::string& section) {
  if (j.contains("builtin")) {
    std::string name = j["builtin"].get<std::string>();
    if (name == "identity") return ReductionMap::identity(spaces, stage);
    if (name == "last_uncertainty")
      return ReductionMap::last_uncertainty(spaces, stage);
    if (name == "running_sum") return ReductionMap::running_sum(spaces, stage);
    if (name == "dam_stock") {
      int x_max = require(j, "x_max", section).get<int>();
      std::vector<int> grid =
          ints_from_json(require(j, "turbine_grid", section), section);
      return ReductionMap::from_rule(
          spaces, stage, x_max + 1, [x_max, grid](const History& h) {
            int x = h.entries[0] <= x_max ? h.entries[0] : x_max;
            for (size_t k = 1; k + 1 < h.entries.size(); k += 2) {
              int q = grid.at(h.entries[k]);
              int a = h.entries[k + 1];
              int n = std::min(x_max, x - q + a);
              x = n < 0 ? 0 : n;
            }
            return x;
          });
    }
    schema_fail(section, "unknown builtin '" + name + "'");
  }
  ReductionMap m;
  m.stage = stage;
  m.state_space = FiniteSpace(require(j, "state_size", section).get<int>());
  m.table = ints_from_json(require(j, "table", section), section + ".table");
  m.validate(spaces);
  return m;
}

Reduction reduction_from_json(const json& j, const StageSpaces& spaces,
                              const BlockSchedule& schedule) {
  const json& thetas = require(j, "theta", "reduction");
  if (thetas.size() != schedule.boundaries.size())
    schema_fail("reduction", "need one theta per schedule boundary");
  std::vector<ReductionMap> maps;
  for (size_t i = 0; i < thetas.size(); ++i)
    maps.push_back(reduction_map_from_json(
        thetas[i], spaces, schedule.boundaries[i],
        "reduction.theta[" + std::to_string(i) + "]"));
  Reduction red = Reduction::from_maps(spaces, schedule, std::move(maps));
  if (j.contains("dynamics")) {
    red.dynamics.clear();
    for (const auto& d : j["dynamics"])
      red.dynamics.push_back(ints_from_json(d, "reduction.dynamics"));
  }
  return red;
}

json reduction_to_json(const Reduction& red) {
  json out;
  json thetas = json::array();
  for (const ReductionMap& m : red.theta) {
    json t;
    t["state_size"] = m.state_space.size;
    t["table"] = m.table;
    thetas.push_back(std::move(t));
  }
  out["theta"] = std::move(thetas);
  out["dynamics"] = red.dynamics;
  return out;
}

DhdCriterion dhd_criterion_from_json(const json& j) {
  std::string rep = require(j, "rep", "dhd.criterion").get<std::string>();
  DhdCriterion c;
  if (rep == "full_table") {
    c.rep = DhdCriterion::Rep::full_table;
    c.full = costs_from_json(require(j, "values", "dhd.criterion"),
                             "dhd.criterion.values");
  } else if (rep == "additive") {
    c.rep = DhdCriterion::Rep::additive;
    for (const auto& t : require(j, "theta", "dhd.criterion"))
      c.theta.push_back(ints_from_json(t, "dhd.criterion.theta"));
    c.state_sizes = ints_from_json(require(j, "state_sizes", "dhd.criterion"),
                                   "dhd.criterion.state_sizes");
    for (const auto& t : require(j, "stage_costs", "dhd.criterion"))
      c.stage_costs.push_back(costs_from_json(t, "dhd.criterion.stage_costs"));
    c.final_cost = costs_from_json(require(j, "final_cost", "dhd.criterion"),
                                   "dhd.criterion.final_cost");
  } else {
    schema_fail("dhd.criterion", "unknown rep '" + rep + "'");
  }
  return c;
}

json dhd_criterion_to_json(const DhdCriterion& c) {
  json out;
  if (c.rep == DhdCriterion::Rep::full_table) {
    out["rep"] = "full_table";
    out["values"] = costs_to_json(c.full);
  } else {
    out["rep"] = "additive";
    out["theta"] = c.theta;
    out["state_sizes"] = c.state_sizes;
    json sc = json::array();
    for (const auto& t : c.stage_costs) sc.push_back(costs_to_json(t));
    out["stage_costs"] = std::move(sc);
    out["final_cost"] = costs_to_json(c.final_cost);
  }
  return out;
}

DhdProblem dhd_from_json(const json& j) {
  DhdProblem p;
  p.horizon = require(j, "horizon", "dhd").get<int>();
  p.head_uncertainty =
      FiniteSpace(require(j, "head_uncertainty", "dhd").get<int>());
  p.head_controls = spaces_from_json(require(j, "head_controls", "dhd"),
                                     "dhd.head_controls");
  p.uncertainties = spaces_from_json(require(j, "uncertainties", "dhd"),
                                     "dhd.uncertainties");
  p.tail_controls = spaces_from_json(require(j, "tail_controls", "dhd"),
                                     "dhd.tail_controls");
  for (const auto& k : require(j, "kernels", "dhd")) {
    DhdKernel kern;
    kern.white = require(k, "white", "dhd.kernels").get<bool>();
    for (const auto& r : require(k, "rows", "dhd.kernels"))
      kern.rows.push_back(distribution_from_json(r, "dhd.kernels.rows"));
    p.kernels.push_back(std::move(kern));
  }
  p.criterion = dhd_criterion_from_json(require(j, "criterion", "dhd"));
  p.validate();
  return p;
}

json dhd_to_json(const DhdProblem& p) {
  json out;
  out["horizon"] = p.horizon;
  out["head_uncertainty"] = p.head_uncertainty.size;
  out["head_controls"] = spaces_to_json(p.head_controls);
  out["uncertainties"] = spaces_to_json(p.uncertainties);
  out["tail_controls"] = spaces_to_json(p.tail_controls);
  json kernels = json::array();
  for (const DhdKernel& k : p.kernels) {
    json e;
    e["white"] = k.white;
    json rows = json::array();
    for (const Distribution& r : k.rows)
      rows.push_back(distribution_to_json(r));
    e["rows"] = std::move(rows);
    kernels.push_back(std::move(e));
  }
  out["kernels"] = std::move(kernels);
  out["criterion"] = dhd_criterion_to_json(p.criterion);
  return out;
}

DhdReduction dhd_reduction_from_json(const json& j, const DhdProblem& p) {
  DhdReduction red;
  const json& thetas = require(j, "theta", "dhd_reduction");
  for (size_t s = 0; s < thetas.size(); ++s) {
    DhdReductionMap m;
    m.stage = static_cast<int>(s);
    m.state_space = FiniteSpace(
        require(thetas[s], "state_size", "dhd_reduction.theta").get<int>());
    m.table = ints_from_json(require(thetas[s], "table", "dhd_reduction.theta"),
                             "dhd_reduction.theta.table");
    red.theta.push_back(std::move(m));
  }
  for (const auto& d : require(j, "dynamics", "dhd_reduction"))
    red.dynamics.push_back(ints_from_json(d, "dhd_reduction.dynamics"));
  (void)p;
  return red;
}

json dhd_reduction_to_json(const DhdReduction& red) {
  json out;
  json thetas = json::array();
  for (const DhdReductionMap& m : red.theta) {
    json t;
    t["state_size"] = m.state_space.size;
    t["table"] = m.table;
    thetas.push_back(std::move(t));
  }
  out["theta"] = std::move(thetas);
  out["dynamics"] = red.dynamics;
  return out;
}

ProblemFile problem_from_json(const json& j) {
  ProblemFile file;
  file.version = require(j, "version", "(root)").get<int>();
  if (file.version != 1) schema_fail("version", "unsupported version");
  std::string family = require(j, "family", "(root)").get<std::string>();
  if (family == "flat") file.family = ProblemFile::Family::flat;
  else if (family == "two_scale") file.family = ProblemFile::Family::two_scale;
  else if (family == "dhd") file.family = ProblemFile::Family::dhd;
  else schema_fail("family", "unknown family '" + family + "'");

  if (file.family == ProblemFile::Family::dhd) {
    if (j.contains("kernels") || j.contains("noise_process") ||
        j.contains("spaces"))
      schema_fail("(root)", "dhd family takes only the dhd section");
    file.dhd = dhd_from_json(require(j, "dhd", "(root)"));
    if (j.contains("dhd_reduction"))
      file.dhd_reduction =
          dhd_reduction_from_json(j["dhd_reduction"], *file.dhd);
  } else {
    StageSpaces spaces = stage_spaces_from_json(require(j, "spaces", "(root)"));
    bool has_kernels = j.contains("kernels");
    bool has_noise = j.contains("noise_process");
    if (has_kernels == has_noise)
      schema_fail("(root)",
                  "exactly one of {kernels, noise_process} must be present");
    std::vector<StochasticKernel> kernels;
    if (has_kernels) {
      kernels = kernels_from_json(j["kernels"], spaces);
    } else {
      file.noise_process = noise_from_json(j["noise_process"]);
      if (file.noise_process->spaces.size() != spaces.uncertainties.size())
        schema_fail("noise_process", "stage count != spaces.uncertainties");
      for (size_t s = 0; s < spaces.uncertainties.size(); ++s)
        if (file.noise_process->spaces[s].size !=
            spaces.uncertainties[s].size)
          schema_fail("noise_process",
                      "space size mismatch at stage " + std::to_string(s));
      NoiseKernels nk = kernels_from_noise_process(*file.noise_process);
      kernels = std::move(nk.kernels);
      file.noise_zero_rows = nk.zero_probability_rows;
    }
    Criterion criterion = criterion_from_json(require(j, "criterion", "(root)"));
    file.flat = ProblemSpec{std::move(spaces), std::move(kernels),
                            std::move(criterion)};
    file.flat->validate();

    if (file.family == ProblemFile::Family::two_scale) {
      const json& clk = require(j, "clock", "(root)");
      TwoScaleClock clock{require(clk, "days", "clock").get<int>(),
                          require(clk, "minutes", "clock").get<int>()};
      clock.validate();
      if (clock.flat_horizon() != file.flat->horizon())
        schema_fail("clock", "flat horizon != (D+1)(M+1)");
      file.clock = clock;
    }

    if (j.contains("schedule")) {
      BlockSchedule schedule;
      for (int b : ints_from_json(j["schedule"], "schedule"))
        schedule.boundaries.push_back(b);
      schedule.validate(file.flat->horizon());
      file.schedule = schedule;
    }
    if (j.contains("reduction")) {
      BlockSchedule schedule =
          file.clock ? day_boundary_schedule(*file.clock)
                     : (file.schedule ? *file.schedule
                                      : BlockSchedule::unit(file.flat->horizon()));
      file.reduction =
          reduction_from_json(j["reduction"], file.flat->spaces, schedule);
    }
  }
  if (j.contains("reduced_criterion"))
    file.reduced_criterion =
        costs_from_json(j["reduced_criterion"], "reduced_criterion");
  return file;
}

json problem_to_json(const ProblemFile& file) {
  json j;
  j["version"] = file.version;
  switch (file.family) {
    case ProblemFile::Family::flat: j["family"] = "flat"; break;
    case ProblemFile::Family::two_scale: j["family"] = "two_scale"; break;
    case ProblemFile::Family::dhd: j["family"] = "dhd"; break;
  }
  if (file.family == ProblemFile::Family::dhd) {
    j["dhd"] = dhd_to_json(*file.dhd);
    if (file.dhd_reduction)
      j["dhd_reduction"] = dhd_reduction_to_json(*file.dhd_reduction);
  } else {
    json spaces;
    spaces["controls"] = spaces_to_json(file.flat->spaces.controls);
    spaces["uncertainties"] = spaces_to_json(file.flat->spaces.uncertainties);
    j["spaces"] = std::move(spaces);
    if (file.noise_process) {
      j["noise_process"] = noise_to_json(*file.noise_process);
    } else {
      j["kernels"] = kernels_to_json(file.flat->kernels);
    }
    j["criterion"] = criterion_to_json(file.flat->criterion);
    if (file.clock)
      j["clock"] = {{"days", file.clock->days},
                    {"minutes", file.clock->minutes}};
    if (file.schedule) j["schedule"] = file.schedule->boundaries;
    if (file.reduction) j["reduction"] = reduction_to_json(*file.reduction);
  }
  if (file.reduced_criterion)
    j["reduced_criterion"] = costs_to_json(*file.reduced_criterion);
  return j;
}

}  // namespace

ProblemFile parse_problem_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::validation, std::string("problem file: ") + e.what());
  }
  return problem_from_json(j);
}

ProblemFile parse_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::usage, "cannot open problem file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_problem_text(buf.str());
}

std::string serialize_problem(const ProblemFile& file) {
  return problem_to_json(file).dump(2) + "\n";
}

std::string instance_digest(const ProblemFile& file) {
  const std::string text = serialize_problem(file);
  unsigned long long h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", h);
  return std::string(buf);
}

namespace {

json value_table_json(const std::vector<Cost>& values,
                      const std::vector<int>& argmin, bool full) {
  json out;
  out["count"] = values.size();
  long long inf_count = 0;
  Cost lo = Cost::inf();
  Cost hi(0.0);
  bool any_finite = false;
  for (Cost c : values) {
    if (c.is_inf()) {
      ++inf_count;
      continue;
    }
    if (!any_finite || c < lo) lo = c;
    if (!any_finite || hi < c) hi = c;
    any_finite = true;
  }
  out["infinite"] = inf_count;
  if (any_finite) {
    out["min"] = cost_to_json(lo);
    out["max"] = cost_to_json(hi);
  }
  if (full || values.size() <= 64) {
    out["values"] = costs_to_json(values);
    if (!argmin.empty()) out["policy"] = argmin;
  }
  return out;
}

json history_values_json(const std::vector<ValueFunction>& vfs, bool full) {
  json out = json::array();
  for (const ValueFunction& vf : vfs) {
    json e = value_table_json(vf.values, vf.argmin, full);
    e["stage"] = vf.stage;
    e["domain"] = vf.domain == ValueFunction::Domain::history
                      ? "history"
                      : "reduced_state";
    out.push_back(std::move(e));
  }
  return out;
}

struct Verification {
  double max_delta = 0.0;
  bool ran = false;
  void record(double d) {
    ran = true;
    if (d > max_delta) max_delta = d;
  }
};

SolveOptions solve_options(const CommandOptions& o) {
  SolveOptions s;
  s.table_budget = o.budget;
  s.enumeration_cap = o.budget;
  s.threads = o.threads;
  return s;
}

[[noreturn]] void usage_fail(const std::string& what) {
  fail(ErrorKind::usage, what);
}

json run_solve_history(const ProblemFile& file, const CommandOptions& o) {
  if (!file.flat) usage_fail("solve-history needs a flat or two_scale problem");
  auto vfs = solve_history_dp(*file.flat, solve_options(o));
  json out;
  out["value_functions"] = history_values_json(vfs, o.full);
  out["value_at_origin"] = cost_to_json(vfs[0].values.at(0));
  return out;
}

json run_solve_reduced(const ProblemFile& file, const CommandOptions& o,
                       Verification& verify) {
  if (!file.flat || !file.reduction)
    usage_fail("solve-reduced needs a flat problem with a reduction section");
  BlockSchedule schedule = file.schedule
                               ? *file.schedule
                               : BlockSchedule::unit(file.flat->horizon());
  if (!file.reduced_criterion)
    usage_fail("solve-reduced needs a reduced_criterion section");
  ReducedSolve solve = solve_reduced_dp(*file.flat, schedule, *file.reduction,
                                        *file.reduced_criterion);
  auto vfs = solve_history_dp(*file.flat, solve_options(o));
  for (size_t i = 0; i < schedule.boundaries.size(); ++i) {
    int t = schedule.boundaries[i];
    const ReductionMap& theta = file.reduction->theta[i];
    long long hN = file.flat->spaces.history_count(t);
    for (long long h = 0; h < hN; ++h)
      verify.record(cost_gap(vfs[t].values[h],
                             solve.boundary_values[i].values[theta.table[h]]));
  }
  json out;
  json tables = json::array();
  for (const ValueFunction& vf : solve.boundary_values) {
    json e = value_table_json(vf.values, vf.argmin, o.full);
    e["stage"] = vf.stage;
    e["domain"] = "reduced_state";
    tables.push_back(std::move(e));
  }
  out["boundary_values"] = std::move(tables);
  out["lifting_max_delta"] = verify.max_delta;
  return out;
}

json run_solve_2ts(const ProblemFile& file, const CommandOptions& o,
                   Verification& verify) {
  if (file.family != ProblemFile::Family::two_scale || !file.reduction ||
      !file.reduced_criterion)
    usage_fail(
        "solve-2ts needs a two_scale problem with reduction and "
        "reduced_criterion sections");
  TwoScaleProblem problem{*file.clock, *file.flat};
  ReducedSolve solve =
      solve_two_timescale(problem, *file.reduction, *file.reduced_criterion);
  auto vfs = solve_history_dp(*file.flat, solve_options(o));
  for (int d = 0; d <= file.clock->days + 1; ++d) {
    int t = d * (file.clock->minutes + 1);
    const ReductionMap& theta = file.reduction->theta[d];
    long long hN = file.flat->spaces.history_count(t);
    for (long long h = 0; h < hN; ++h)
      verify.record(cost_gap(vfs[t].values[h],
                             solve.boundary_values[d].values[theta.table[h]]));
  }
  json out;
  json tables = json::array();
  for (const ValueFunction& vf : solve.boundary_values) {
    json e = value_table_json(vf.values, vf.argmin, o.full);
    e["stage"] = vf.stage;
    e["domain"] = "reduced_state";
    tables.push_back(std::move(e));
  }
  out["slow_scale_values"] = std::move(tables);
  out["lifting_max_delta"] = verify.max_delta;
  return out;
}

json run_solve_dhd(const ProblemFile& file, const CommandOptions& o,
                   Verification& verify) {
  if (!file.dhd) usage_fail("solve-dhd needs a dhd problem");
  auto vfs = solve_dhd_history(*file.dhd);
  json out;
  json tables = json::array();
  for (const DhdValueFunction& vf : vfs) {
    json e = value_table_json(vf.values, vf.head_argmin, o.full);
    e["stage"] = vf.stage;
    tables.push_back(std::move(e));
  }
  out["value_functions"] = std::move(tables);
  if (file.dhd_reduction) {
    std::vector<Cost> reduced_criterion =
        file.reduced_criterion ? *file.reduced_criterion : std::vector<Cost>{};
    auto reduced = solve_dhd(*file.dhd, *file.dhd_reduction, reduced_criterion);
    for (int s = 0; s <= file.dhd->horizon; ++s) {
      long long hN = file.dhd->head_count(s);
      for (long long h = 0; h < hN; ++h)
        verify.record(cost_gap(
            vfs[s].values[h],
            reduced[s].values[file.dhd_reduction->theta[s].table[h]]));
    }
    json rt = json::array();
    for (const DhdValueFunction& vf : reduced) {
      json e = value_table_json(vf.values, vf.head_argmin, o.full);
      e["stage"] = vf.stage;
      rt.push_back(std::move(e));
    }
    out["reduced_values"] = std::move(rt);
    out["lifting_max_delta"] = verify.max_delta;
  }
  return out;
}

json run_check_reduction(const ProblemFile& file, int* exit_status) {
  json out;
  if (file.dhd) {
    if (!file.dhd_reduction)
      usage_fail("check-reduction needs a dhd_reduction section");
    auto ce = check_dhd_reduction(*file.dhd, *file.dhd_reduction);
    auto derived = ce ? DhdDeriveResult{}
                      : derive_dhd_kernels(*file.dhd, *file.dhd_reduction);
    if (!ce && !derived.ok()) ce = derived.counterexample;
    out["compatible"] = !ce.has_value();
    if (ce) {
      out["counterexample"] = {{"block", ce->block},
                               {"history", ce->history_index},
                               {"segment", ce->segment_index},
                               {"other_history", ce->other_history_index},
                               {"detail", ce->detail}};
      *exit_status = 1;
    }
    return out;
  }
  if (!file.flat || !file.reduction)
    usage_fail("check-reduction needs a reduction section");
  BlockSchedule schedule =
      file.clock ? day_boundary_schedule(*file.clock)
                 : (file.schedule ? *file.schedule
                                  : BlockSchedule::unit(file.flat->horizon()));
  auto ce = check_state_reduction(*file.reduction, schedule, *file.flat);
  if (!ce) {
    auto derived = derive_reduced_kernels(*file.reduction, schedule, *file.flat);
    if (!derived.ok()) ce = derived.counterexample;
  }
  out["compatible"] = !ce.has_value();
  if (ce) {
    out["counterexample"] = {{"block", ce->block},
                             {"history", ce->history_index},
                             {"segment", ce->segment_index},
                             {"other_history", ce->other_history_index},
                             {"detail", ce->detail}};
    *exit_status = 1;
  }
  return out;
}

json run_oracle(const ProblemFile& file, const CommandOptions& o,
                Verification& verify) {
  if (!file.flat) usage_fail("oracle needs a flat or two_scale problem");
  SolveOptions opts = solve_options(o);
  auto vfs = solve_history_dp(*file.flat, opts);
  const StageSpaces& spaces = file.flat->spaces;
  json out;
  double brute_delta = 0.0;
  long long h0N = spaces.history_count(0);
  for (long long h = 0; h < h0N; ++h) {
    Cost oracle =
        brute_force_value(0, spaces.history_at(0, h), *file.flat, opts);
    double d = cost_gap(vfs[0].values[h], oracle);
    if (d > brute_delta) brute_delta = d;
    verify.record(d);
  }
  out["brute_force_max_delta"] = brute_delta;
  if (file.noise_process) {
    double adapted_delta = 0.0;
    for (long long h = 0; h < h0N; ++h) {
      Cost oracle =
          adapted_value_oracle(0, spaces.history_at(0, h), *file.flat, opts);
      double d = cost_gap(vfs[0].values[h], oracle);
      if (d > adapted_delta) adapted_delta = d;
      verify.record(d);
    }
    out["adapted_max_delta"] = adapted_delta;
  }
  return out;
}

}  // namespace

CommandResult run_command(const CommandOptions& options) {
  CommandResult result;
  json report;
  auto started = std::chrono::steady_clock::now();
  try {
    ProblemFile file = options.problem_text.empty()
                           ? parse_problem(options.problem_path)
                           : parse_problem_text(options.problem_text);
    report["command"] = options.command;
    report["digest"] = instance_digest(file);
    if (file.noise_zero_rows) report["zero_probability_rows"] = true;
    Verification verify;
    int exit_status = 0;
    if (options.command == "solve-history") {
      report["result"] = run_solve_history(file, options);
    } else if (options.command == "solve-reduced") {
      report["result"] = run_solve_reduced(file, options, verify);
    } else if (options.command == "solve-2ts") {
      report["result"] = run_solve_2ts(file, options, verify);
    } else if (options.command == "solve-dhd") {
      report["result"] = run_solve_dhd(file, options, verify);
    } else if (options.command == "check-reduction") {
      report["result"] = run_check_reduction(file, &exit_status);
    } else if (options.command == "oracle") {
      report["result"] = run_oracle(file, options, verify);
    } else if (options.command == "report") {
      report["result"] = {{"canonical", serialize_problem(file)}};
    } else {
      usage_fail("unknown command: " + options.command);
    }
    if (verify.ran) {
      report["verification"] = {{"max_delta", verify.max_delta},
                                {"tolerance", options.tolerance}};
      if (verify.max_delta > options.tolerance) exit_status = 1;
    }
    report["status"] = exit_status == 0 ? "pass"
                       : exit_status == 1 ? "verification_failure"
                                          : "error";
    result.exit_status = exit_status;
  } catch (const SolverError& e) {
    report["error"] = e.what();
    switch (e.kind()) {
      case ErrorKind::capacity:
        report["status"] = "capacity";
        result.exit_status = 3;
        break;
      default:
        report["status"] = "usage";
        result.exit_status = 2;
        break;
    }
  }
  result.report = report.dump(2) + "\n";
  // Wall time goes to stderr so reports stay byte-identical across runs.
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - started)
                     .count();
  std::fprintf(stderr, "wall_time_ms=%lld\n", static_cast<long long>(elapsed));
  if (!options.out_path.empty()) {
    std::ofstream out(options.out_path);
    if (!out) {
      std::fprintf(stderr, "cannot write report to %s\n",
                   options.out_path.c_str());
      result.exit_status = 2;
      return result;
    }
    out << result.report;
  }
  return result;
}

}  // namespace tbdp
