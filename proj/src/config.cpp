#include "scaffopt/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "scaffopt/elasticity.hpp"
#include "scaffopt/toml.hpp"

namespace scaffopt {

namespace {

[[noreturn]] void fail(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config key '" + key + "': " + why);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf);
  // keep floats recognizable as floats in the output
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

IsotropicMaterial MaterialSpec::resolve(const std::string& key) const {
  const bool has_young = young.has_value() || poisson.has_value();
  const bool has_lame = mu.has_value() || lambda.has_value();
  if (has_young && has_lame) fail(key, "specify either (E, nu) or (mu, lambda), not both");
  if (has_young) {
    if (!young || !poisson) fail(key, "E and nu must be given together");
    if (!(*young > 0.0)) fail(key + ".E", "Young's modulus must be positive");
    if (!(*poisson > 0.0 && *poisson < 0.5)) {
      fail(key + ".nu", "Poisson ratio must lie in (0, 1/2)");
    }
    return from_young_poisson(*young, *poisson);
  }
  if (has_lame) {
    if (!mu || !lambda) fail(key, "mu and lambda must be given together");
    if (!(*mu > 0.0)) fail(key + ".mu", "mu must be positive");
    if (!(*lambda > 0.0)) fail(key + ".lambda", "lambda must be positive");
    return IsotropicMaterial(*mu, *lambda);
  }
  fail(key, "material parameters are missing");
}

void ExperimentConfig::validate() const {
  if (dimension != 2 && dimension != 3) fail("dimension", "must be 2 or 3");
  if (schedule.empty()) fail("schedule", "must contain at least one mesh size");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i] < 3) fail("schedule", "mesh sizes need at least 3 nodes per axis");
    if (i > 0) {
      if (schedule[i] <= schedule[i - 1]) fail("schedule", "must be strictly increasing");
      if ((schedule[i] - 1) % (schedule[i - 1] - 1) != 0) {
        fail("schedule", "each (N-1) must be a multiple of the previous one");
      }
    }
  }
  if (loads.empty()) fail("loads", "at least one load case is required");
  const auto& allowed = canonical_load_labels(dimension);
  std::set<std::string> seen;
  for (const auto& label : loads) {
    if (std::find(allowed.begin(), allowed.end(), label) == allowed.end()) {
      fail("loads", "'" + label + "' is not a valid load in " + std::to_string(dimension) + "D");
    }
    if (!seen.insert(label).second) fail("loads", "'" + label + "' appears twice");
  }
  if (beta == 0.0) fail("beta", "must be nonzero");
  if (!(eta >= 0.0)) fail("eta", "must be >= 0");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta", "must lie in (0, 1)");
  if (!(p >= 1.0)) fail("p", "must be >= 1");
  if (!(q_max >= 1.0)) fail("q_max", "must be >= 1");
  if (tile < 1) fail("tile", "must be >= 1");
  if (interpolation != "linear" && interpolation != "quadratic") {
    fail("interpolation", "must be 'linear' or 'quadratic'");
  }
  phase0.resolve("phase0");
  phase1.resolve("phase1");
  if (!(cg_tol > 0.0)) fail("solver.cg_tol", "must be positive");
  if (cg_max_iter_factor < 1) fail("solver.cg_max_iter_factor", "must be >= 1");
  if (max_iterations < 0) fail("optimizer.max_iterations", "must be >= 0");
  if (!(grad_tol > 0.0)) fail("optimizer.grad_tol", "must be positive");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) fail("optimizer.armijo_c", "must lie in (0, 1)");
  if (!(step_shrink > 0.0 && step_shrink < 1.0)) {
    fail("optimizer.step_shrink", "must lie in (0, 1)");
  }
  if (!(box > 1.0)) fail("optimizer.box", "must exceed 1");
  if (max_backtracks < 1) fail("optimizer.max_backtracks", "must be >= 1");
  if (sweep) {
    if (sweep->values.empty()) fail("sweep.values", "must not be empty");
    const std::set<std::string> sweepable = {"eta", "p", "q_max", "delta",
                                             "phase0.E", "phase1.E"};
    if (!sweepable.count(sweep->key)) fail("sweep.key", "'" + sweep->key + "' cannot be swept");
  }
}

std::vector<std::string> preset_names() {
  return {"equal-3compr",      "equal-2compr-1shear", "equal-1compr-2shear",
          "eta-sweep",         "p-sweep",             "young-sweep",
          "bone-polymer",      "2d-2compr"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.phase0.young = 10.0;
  cfg.phase0.poisson = 0.25;
  cfg.phase1.young = 10.0;
  cfg.phase1.poisson = 0.25;
  cfg.output_dir = "out/" + name;

  if (name == "equal-3compr") {
    cfg.loads = {"A11", "A22", "A33"};
  } else if (name == "equal-2compr-1shear") {
    cfg.loads = {"A11", "A22", "A23"};
  } else if (name == "equal-1compr-2shear") {
    cfg.loads = {"A11", "A12", "A13"};
  } else if (name == "eta-sweep") {
    cfg.loads = {"A12", "A13", "A23"};
    cfg.sweep = SweepSpec{"eta", {2.0, 4.0, 10.0}};
  } else if (name == "p-sweep") {
    cfg.loads = {"A11", "A22", "A23"};
    cfg.sweep = SweepSpec{"p", {2.0, 4.0, 8.0, 16.0}};
  } else if (name == "young-sweep") {
    cfg.loads = {"A11", "A22", "A23"};
    cfg.eta = 1.0;
    cfg.sweep = SweepSpec{"phase0.E", {20.0, 40.0, 80.0, 160.0, 320.0}};
  } else if (name == "bone-polymer") {
    // phase 0 is the polymer scaffold, phase 1 the regrown bone; only the
    // stiffness ratio 15 is prescribed, absolute moduli are our choice
    cfg.loads = {"A11", "A12", "A13"};
    cfg.phase0.young = 10.0;
    cfg.phase0.poisson = 0.3;
    cfg.phase1.young = 150.0;
    cfg.phase1.poisson = 0.1;
  } else if (name == "2d-2compr") {
    cfg.dimension = 2;
    cfg.loads = {"A11", "A22"};
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'; available: " + [] {
      std::string all;
      for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
      return all;
    }());
  }
  return cfg;
}

namespace {

struct KeyReader {
  toml::Table table;
  std::set<std::string> consumed;

  const toml::Value* find(const std::string& key) {
    auto it = table.find(key);
    if (it == table.end()) return nullptr;
    consumed.insert(key);
    return &it->second;
  }

  void read_double(const std::string& key, double& out) {
    if (const toml::Value* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->as_number();
    }
  }
  void read_opt_double(const std::string& key, std::optional<double>& out) {
    if (const toml::Value* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->as_number();
    }
  }
  void read_int(const std::string& key, int& out) {
    if (const toml::Value* v = find(key)) {
      if (v->kind != toml::Value::Kind::kInt) fail(key, "expected an integer");
      out = static_cast<int>(v->integer);
    }
  }
  void read_uint64(const std::string& key, std::uint64_t& out) {
    if (const toml::Value* v = find(key)) {
      if (v->kind != toml::Value::Kind::kInt || v->integer < 0) {
        fail(key, "expected a non-negative integer");
      }
      out = static_cast<std::uint64_t>(v->integer);
    }
  }
  void read_string(const std::string& key, std::string& out) {
    if (const toml::Value* v = find(key)) out = v->as_string();
  }
  void read_int_array(const std::string& key, std::vector<int>& out) {
    if (const toml::Value* v = find(key)) {
      if (v->kind != toml::Value::Kind::kArray) fail(key, "expected an array");
      out.clear();
      for (const auto& e : v->array) {
        if (e.kind != toml::Value::Kind::kInt) fail(key, "expected integers");
        out.push_back(static_cast<int>(e.integer));
      }
    }
  }
  void read_double_array(const std::string& key, std::vector<double>& out) {
    if (const toml::Value* v = find(key)) {
      if (v->kind != toml::Value::Kind::kArray) fail(key, "expected an array");
      out.clear();
      for (const auto& e : v->array) {
        if (!e.is_number()) fail(key, "expected numbers");
        out.push_back(e.as_number());
      }
    }
  }
  void read_string_array(const std::string& key, std::vector<std::string>& out) {
    if (const toml::Value* v = find(key)) {
      if (v->kind != toml::Value::Kind::kArray) fail(key, "expected an array");
      out.clear();
      for (const auto& e : v->array) out.push_back(e.as_string());
    }
  }

  void reject_unknown() const {
    for (const auto& [key, value] : table) {
      if (!consumed.count(key)) {
        throw std::invalid_argument("unknown config key '" + key + "' (line " +
                                    std::to_string(value.line) + ")");
      }
    }
  }
};

void read_material(KeyReader& r, const std::string& section, MaterialSpec& spec) {
  r.read_opt_double(section + ".E", spec.young);
  r.read_opt_double(section + ".nu", spec.poisson);
  r.read_opt_double(section + ".mu", spec.mu);
  r.read_opt_double(section + ".lambda", spec.lambda);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  KeyReader reader{toml::parse(text), {}};

  ExperimentConfig cfg;
  if (const toml::Value* v = reader.find("preset")) {
    cfg = preset_config(v->as_string());
  }
  // overriding a preset's material replaces it outright
  const bool phase0_given = reader.table.count("phase0.E") || reader.table.count("phase0.nu") ||
                            reader.table.count("phase0.mu") || reader.table.count("phase0.lambda");
  const bool phase1_given = reader.table.count("phase1.E") || reader.table.count("phase1.nu") ||
                            reader.table.count("phase1.mu") || reader.table.count("phase1.lambda");
  if (phase0_given) cfg.phase0 = MaterialSpec{};
  if (phase1_given) cfg.phase1 = MaterialSpec{};

  reader.read_int("dimension", cfg.dimension);
  reader.read_int_array("schedule", cfg.schedule);
  reader.read_string_array("loads", cfg.loads);
  reader.read_double("beta", cfg.beta);
  reader.read_double("eta", cfg.eta);
  reader.read_double("delta", cfg.delta);
  reader.read_double("p", cfg.p);
  reader.read_double("q_max", cfg.q_max);
  reader.read_uint64("seed", cfg.seed);
  reader.read_string("output_dir", cfg.output_dir);
  reader.read_int("tile", cfg.tile);
  reader.read_opt_double("isosurface_level", cfg.isosurface_level);
  reader.read_string("interpolation", cfg.interpolation);
  read_material(reader, "phase0", cfg.phase0);
  read_material(reader, "phase1", cfg.phase1);
  reader.read_double("solver.cg_tol", cfg.cg_tol);
  reader.read_int("solver.cg_max_iter_factor", cfg.cg_max_iter_factor);
  reader.read_int("optimizer.max_iterations", cfg.max_iterations);
  reader.read_double("optimizer.grad_tol", cfg.grad_tol);
  reader.read_double("optimizer.armijo_c", cfg.armijo_c);
  reader.read_double("optimizer.step_shrink", cfg.step_shrink);
  reader.read_double("optimizer.box", cfg.box);
  reader.read_int("optimizer.max_backtracks", cfg.max_backtracks);

  std::string sweep_key = cfg.sweep ? cfg.sweep->key : "";
  std::vector<double> sweep_values = cfg.sweep ? cfg.sweep->values : std::vector<double>{};
  reader.read_string("sweep.key", sweep_key);
  reader.read_double_array("sweep.values", sweep_values);
  if (!sweep_key.empty() != !sweep_values.empty()) {
    fail("sweep", "sweep.key and sweep.values must be given together");
  }
  cfg.sweep = sweep_key.empty() ? std::nullopt
                                : std::make_optional(SweepSpec{sweep_key, sweep_values});

  reader.reject_unknown();
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "dimension = " << cfg.dimension << "\n";
  out << "schedule = [";
  for (std::size_t i = 0; i < cfg.schedule.size(); ++i) {
    out << (i ? ", " : "") << cfg.schedule[i];
  }
  out << "]\n";
  out << "loads = [";
  for (std::size_t i = 0; i < cfg.loads.size(); ++i) {
    out << (i ? ", " : "") << '"' << cfg.loads[i] << '"';
  }
  out << "]\n";
  out << "beta = " << format_double(cfg.beta) << "\n";
  out << "eta = " << format_double(cfg.eta) << "\n";
  out << "delta = " << format_double(cfg.delta) << "\n";
  out << "p = " << format_double(cfg.p) << "\n";
  out << "q_max = " << format_double(cfg.q_max) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "output_dir = \"" << cfg.output_dir << "\"\n";
  out << "tile = " << cfg.tile << "\n";
  if (cfg.isosurface_level) {
    out << "isosurface_level = " << format_double(*cfg.isosurface_level) << "\n";
  }
  out << "interpolation = \"" << cfg.interpolation << "\"\n";
  const auto write_material = [&](const char* name, const MaterialSpec& m) {
    out << "[" << name << "]\n";
    if (m.young) out << "E = " << format_double(*m.young) << "\n";
    if (m.poisson) out << "nu = " << format_double(*m.poisson) << "\n";
    if (m.mu) out << "mu = " << format_double(*m.mu) << "\n";
    if (m.lambda) out << "lambda = " << format_double(*m.lambda) << "\n";
  };
  write_material("phase0", cfg.phase0);
  write_material("phase1", cfg.phase1);
  out << "[solver]\n";
  out << "cg_tol = " << format_double(cfg.cg_tol) << "\n";
  out << "cg_max_iter_factor = " << cfg.cg_max_iter_factor << "\n";
  out << "[optimizer]\n";
  out << "max_iterations = " << cfg.max_iterations << "\n";
  out << "grad_tol = " << format_double(cfg.grad_tol) << "\n";
  out << "armijo_c = " << format_double(cfg.armijo_c) << "\n";
  out << "step_shrink = " << format_double(cfg.step_shrink) << "\n";
  out << "box = " << format_double(cfg.box) << "\n";
  out << "max_backtracks = " << cfg.max_backtracks << "\n";
  if (cfg.sweep) {
    out << "[sweep]\n";
    out << "key = \"" << cfg.sweep->key << "\"\n";
    out << "values = [";
    for (std::size_t i = 0; i < cfg.sweep->values.size(); ++i) {
      out << (i ? ", " : "") << format_double(cfg.sweep->values[i]);
    }
    out << "]\n";
  }
  return out.str();
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  // FNV-1a over the canonical serialization
  const std::string text = serialize_config(cfg);
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

namespace {

void apply_sweep_value(ExperimentConfig& cfg, const std::string& key, double value) {
  if (key == "eta") {
    cfg.eta = value;
  } else if (key == "p") {
    cfg.p = value;
  } else if (key == "q_max") {
    cfg.q_max = value;
  } else if (key == "delta") {
    cfg.delta = value;
  } else if (key == "phase0.E") {
    cfg.phase0.young = value;
  } else if (key == "phase1.E") {
    cfg.phase1.young = value;
  } else {
    fail("sweep.key", "'" + key + "' cannot be swept");
  }
}

std::string sweep_label(const std::string& key, double value) {
  std::ostringstream label;
  label << key << "=" << value;
  return label.str();
}

}  // namespace

std::vector<std::pair<std::string, ExperimentConfig>> expand_sweep(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, ExperimentConfig>> out;
  if (!cfg.sweep) {
    out.emplace_back("", cfg);
    return out;
  }
  for (double value : cfg.sweep->values) {
    ExperimentConfig run = cfg;
    run.sweep.reset();
    apply_sweep_value(run, cfg.sweep->key, value);
    const std::string label = sweep_label(cfg.sweep->key, value);
    run.output_dir = cfg.output_dir + "/" + label;
    run.validate();
    out.emplace_back(label, run);
  }
  return out;
}

}  // namespace scaffopt
