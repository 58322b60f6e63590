#include "civi/harness/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>

namespace civi::harness {

namespace {

/// Reads keys from one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  void number(const char* key, double& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(where(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  void integer(const char* key, Index& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
      out = v->get<Index>();
    }
  }
  void unsigned_integer(const char* key, std::uint64_t& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0)) {
        throw ConfigError(where(key) + ": expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void boolean(const char* key, bool& out) {
    if (const Json* v = take(key)) {
      if (!v->is_boolean()) throw ConfigError(where(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void string(const char* key, std::string& out) {
    if (const Json* v = take(key)) {
      if (!v->is_string()) throw ConfigError(where(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  void optional_number(const char* key, std::optional<double>& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number()) throw ConfigError(where(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  /// Passes the raw value and its path to `fn`.
  void custom(const char* key, const std::function<void(const Json&, const std::string&)>& fn) {
    if (const Json* v = take(key)) fn(*v, where(key));
  }

  /// Throws on the first key that was never read.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(where(it.key().c_str()) + ": unknown key");
    }
  }

 private:
  const Json* take(const char* key) {
    used_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  [[nodiscard]] std::string where() const { return path_.empty() ? "config" : path_; }
  [[nodiscard]] std::string where(const char* key) const {
    return path_.empty() ? std::string(key) : path_ + "." + key;
  }

  const Json& obj_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<Index> index_list(const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array of integers");
  std::vector<Index> out;
  for (const Json& e : v) {
    if (!e.is_number_integer()) throw ConfigError(path + ": expected an array of integers");
    out.push_back(e.get<Index>());
  }
  return out;
}

diffcore::FactorKind parse_factor_kind(const std::string& name) {
  if (name == "diagonal") return diffcore::FactorKind::kDiagonal;
  if (name == "cholesky") return diffcore::FactorKind::kCholesky;
  throw ConfigError("unknown covariance '" + name + "' (expected diagonal, cholesky)");
}

std::string factor_name(diffcore::FactorKind kind) {
  return kind == diffcore::FactorKind::kDiagonal ? "diagonal" : "cholesky";
}

void read_schedule(RunConfig& c, const Json& v, const std::string& path) {
  Section s(v, path);
  solver::ScheduleConfig& sc = c.schedule;
  s.number("c_alpha", sc.c_alpha);
  s.number("c_beta", sc.c_beta);
  s.number("c1", sc.c1);
  s.number("c2", sc.c2);
  s.number("c3", sc.c3);
  s.number("c_gamma", sc.c_gamma);
  s.number("mu", sc.mu);
  s.number("xi", sc.xi);
  s.integer("d_t", sc.d_t);
  s.custom("sketch_mode", [&](const Json& x, const std::string& p) {
    if (!x.is_string()) throw ConfigError(p + ": expected a string");
    sc.sketch_mode = sketch::parse_sketch_mode(x.get<std::string>());
  });
  s.custom("batch_growth", [&](const Json& x, const std::string& p) {
    if (!x.is_string()) throw ConfigError(p + ": expected a string");
    sc.batch_growth = solver::parse_batch_growth(x.get<std::string>());
  });
  s.integer("chunks", sc.chunks);
  s.integer("rotation_period", sc.rotation_period);
  s.boolean("frozen", sc.frozen);
  s.finish();
}

void read_groups(RunConfig& c, const Json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path + ": expected an array");
  c.groups.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    Section s(v[i], path + "[" + std::to_string(i) + "]");
    GroupSpec g;
    s.string("group", g.group);
    s.integer("begin", g.begin);
    s.integer("end", g.end);
    s.optional_number("c_alpha", g.c_alpha);
    s.optional_number("c_gamma", g.c_gamma);
    s.finish();
    c.groups.push_back(g);
  }
}

void read_model(RunConfig& c, const Json& v, const std::string& path) {
  Section s(v, path);
  sivi::SemiImplicitModel& m = c.model;
  s.integer("eps_dim", m.eps_dim);
  s.number("eps_variance", m.eps_variance);
  s.integer("z_dim", m.z_dim);
  s.custom("hidden", [&](const Json& x, const std::string& p) { m.mean_net.hidden = index_list(x, p); });
  s.custom("activation", [&](const Json& x, const std::string& p) {
    if (!x.is_string()) throw ConfigError(p + ": expected a string");
    m.mean_net.activation = diffcore::parse_activation(x.get<std::string>());
  });
  s.custom("covariance", [&](const Json& x, const std::string& p) {
    if (!x.is_string()) throw ConfigError(p + ": expected a string");
    m.cov_kind = parse_factor_kind(x.get<std::string>());
  });
  s.number("init_log_std", m.init_log_std);
  s.finish();
  m.mean_net.input_dim = m.eps_dim;
  m.mean_net.output_dim = m.z_dim;
}

void read_toy(RunConfig& c, const Json& v, const std::string& path) {
  Section s(v, path);
  ToyOptions& t = c.toy;
  s.string("target", t.target);
  s.integer("grid", t.grid);
  s.custom("extent", [&](const Json& x, const std::string& p) {
    if (!x.is_array() || x.size() != 4) throw ConfigError(p + ": expected [xmin, xmax, ymin, ymax]");
    for (std::size_t i = 0; i < 4; ++i) {
      if (!x[i].is_number()) throw ConfigError(p + ": expected numbers");
      t.extent[i] = x[i].get<double>();
    }
  });
  s.integer("kde_samples", t.kde_samples);
  s.integer("eval_samples", t.eval_samples);
  s.integer("dump_samples", t.dump_samples);
  s.finish();
}

void read_blr(RunConfig& c, const Json& v, const std::string& path) {
  Section s(v, path);
  BlrOptions& b = c.blr;
  s.string("preset", b.preset);
  s.string("data", b.data);
  s.boolean("standardize", b.standardize);
  s.integer("synthetic_rows", b.synthetic_rows);
  s.integer("synthetic_dim", b.synthetic_dim);
  s.unsigned_integer("synthetic_seed", b.synthetic_seed);
  s.number("prior_variance", b.prior_variance);
  s.integer("mcmc_steps", b.mcmc_steps);
  s.integer("posterior_samples", b.posterior_samples);
  s.finish();
}

void read_bias_rate(RunConfig& c, const Json& v, const std::string& path) {
  Section s(v, path);
  BiasRateOptions& b = c.bias_rate;
  s.integer("n", b.n);
  s.integer("repetitions", b.repetitions);
  s.custom("checkpoints", [&](const Json& x, const std::string& p) { b.checkpoints = index_list(x, p); });
  s.number("theta0", b.theta0);
  s.number("sigma", b.sigma);
  s.finish();
}

void read_recurrence(RunConfig& c, const Json& v, const std::string& path) {
  Section s(v, path);
  RecurrenceCase& r = c.recurrence;
  s.number("c_eta", r.c_eta);
  s.number("c_zeta", r.c_zeta);
  s.number("a", r.a);
  s.number("b", r.b);
  s.number("c1", r.c1);
  s.number("c2", r.c2);
  s.number("a1", r.a1);
  s.integer("horizon", r.horizon);
  s.finish();
}

void read_gradcheck(RunConfig& c, const Json& v, const std::string& path) {
  Section s(v, path);
  s.integer("trials", c.gradcheck.trials);
  s.number("tolerance", c.gradcheck.tolerance);
  s.number("step", c.gradcheck.step);
  s.finish();
}

/// Constant batches K1, K2 (smoothing reuses K2), sparse sketch over the
/// whole sampled support.
void table_schedule(RunConfig& c, double k1, double k2, double c_alpha, double c_beta,
                    double c_gamma, Index iterations) {
  solver::ScheduleConfig& s = c.schedule;
  s.batch_growth = solver::BatchGrowth::kConstant;
  s.c1 = k1;
  s.c2 = k2;
  s.c3 = k2;
  s.c_alpha = c_alpha;
  s.c_beta = c_beta;
  s.c_gamma = c_gamma;
  s.mu = 0.999;
  s.sketch_mode = sketch::SketchMode::kSparse;
  s.d_t = static_cast<Index>(k1);
  s.iterations = iterations;
}

void toy_defaults(RunConfig& c, const std::string& target) {
  c.toy.target = target;
  c.output = solver::OutputMode::kFinal;
  if (target == "two-modal") {
    table_schedule(c, 100, 1000, 3e-4, 0.99, 0.9, 200);
  } else if (target == "star") {
    table_schedule(c, 200, 2000, 2e-4, 0.999, 0.9, 300);
  } else if (target == "banana") {
    table_schedule(c, 200, 2000, 3e-4, 0.999, 1.0, 300);
    c.toy.extent = {-4.0, 4.0, -12.0, 3.0};
  } else {
    throw ConfigError("toy target must be two-modal, star or banana, got '" + target + "'");
  }
}

void blr_defaults(RunConfig& c, const std::string& preset) {
  c.blr.preset = preset;
  c.output = solver::OutputMode::kFinal;
  sivi::SemiImplicitModel& m = c.model;
  m.eps_variance = 100.0;
  m.cov_kind = diffcore::FactorKind::kCholesky;
  m.mean_net.hidden = {200, 200};
  m.eps_dim = 3;
  GroupSpec cov{"cov", 0, 0, std::nullopt, std::nullopt};
  if (preset == "spam" || preset == "synthetic") {
    table_schedule(c, 50, 500, 1.5e-4, 0.999, 0.7, 600);
    cov.c_alpha = 0.2;
    cov.c_gamma = 0.6;
  } else if (preset == "nodal") {
    table_schedule(c, 200, 2000, 1.7e-4, 0.99, 0.75, 600);
    cov.c_alpha = 1.7e-4;
    cov.c_gamma = 0.85;
  } else if (preset == "waveform") {
    table_schedule(c, 100, 1000, 3e-4, 0.999, 0.85, 3000);
    cov.c_alpha = 2.5e-4;
    cov.c_gamma = 0.85;
    m.eps_dim = 10;
  } else {
    throw ConfigError("blr preset must be spam, nodal, waveform or synthetic, got '" + preset + "'");
  }
  c.groups = {cov};
  m.z_dim = c.blr.synthetic_dim;
  m.mean_net.input_dim = m.eps_dim;
  m.mean_net.output_dim = m.z_dim;
}

}  // namespace

Experiment parse_experiment(const std::string& name) {
  if (name == "toy") return Experiment::kToy;
  if (name == "blr") return Experiment::kBlr;
  if (name == "bias-rate") return Experiment::kBiasRate;
  if (name == "gradcheck") return Experiment::kGradcheck;
  if (name == "recurrence") return Experiment::kRecurrence;
  throw ConfigError("unknown experiment '" + name +
                    "' (expected toy, blr, bias-rate, gradcheck, recurrence)");
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::kToy: return "toy";
    case Experiment::kBlr: return "blr";
    case Experiment::kBiasRate: return "bias-rate";
    case Experiment::kGradcheck: return "gradcheck";
    case Experiment::kRecurrence: return "recurrence";
  }
  return "toy";
}

void RecurrenceCase::validate() const {
  if (!(a > 0.0 && a <= 1.0)) throw ConfigError("recurrence: a must lie in (0, 1]");
  const double gap = b - a;
  if (gap > -1.0 && gap < 0.0) throw ConfigError("recurrence: b - a must lie outside (-1, 0)");
  if (!(c_eta > 1.0 + gap)) throw ConfigError("recurrence: c_eta must exceed 1 + b - a");
  if (!(c_zeta >= 0.0)) throw ConfigError("recurrence: c_zeta must be non-negative");
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw ConfigError("recurrence: c1 and c2 must be non-negative");
  if (!std::isfinite(a1)) throw ConfigError("recurrence: a1 must be finite");
  if (horizon < 1) throw ConfigError("recurrence: horizon must be at least 1");
}

Json RunConfig::to_json() const {
  const solver::ScheduleConfig& s = schedule;
  Json groups_json = Json::array();
  for (const GroupSpec& g : groups) {
    Json e{{"group", g.group}, {"begin", g.begin}, {"end", g.end}};
    if (g.c_alpha) e["c_alpha"] = *g.c_alpha;
    if (g.c_gamma) e["c_gamma"] = *g.c_gamma;
    groups_json.push_back(e);
  }
  return Json{
      {"experiment", harness::to_string(experiment)},
      {"seed", seed},
      {"iterations", s.iterations},
      {"deterministic", deterministic},
      {"output", solver::to_string(output)},
      {"pool_size", pool_size},
      {"schedule",
       {{"c_alpha", s.c_alpha},
        {"c_beta", s.c_beta},
        {"c1", s.c1},
        {"c2", s.c2},
        {"c3", s.c3},
        {"c_gamma", s.c_gamma},
        {"mu", s.mu},
        {"xi", s.xi},
        {"d_t", s.d_t},
        {"sketch_mode", sketch::to_string(s.sketch_mode)},
        {"batch_growth", solver::to_string(s.batch_growth)},
        {"chunks", s.chunks},
        {"rotation_period", s.rotation_period},
        {"frozen", s.frozen}}},
      {"groups", groups_json},
      {"model",
       {{"eps_dim", model.eps_dim},
        {"eps_variance", model.eps_variance},
        {"z_dim", model.z_dim},
        {"hidden", model.mean_net.hidden},
        {"activation", diffcore::to_string(model.mean_net.activation)},
        {"covariance", factor_name(model.cov_kind)},
        {"init_log_std", model.init_log_std}}},
      {"toy",
       {{"target", toy.target},
        {"grid", toy.grid},
        {"extent", toy.extent},
        {"kde_samples", toy.kde_samples},
        {"eval_samples", toy.eval_samples},
        {"dump_samples", toy.dump_samples}}},
      {"blr",
       {{"preset", blr.preset},
        {"data", blr.data},
        {"standardize", blr.standardize},
        {"synthetic_rows", blr.synthetic_rows},
        {"synthetic_dim", blr.synthetic_dim},
        {"synthetic_seed", blr.synthetic_seed},
        {"prior_variance", blr.prior_variance},
        {"mcmc_steps", blr.mcmc_steps},
        {"posterior_samples", blr.posterior_samples}}},
      {"bias_rate",
       {{"n", bias_rate.n},
        {"repetitions", bias_rate.repetitions},
        {"checkpoints", bias_rate.checkpoints},
        {"theta0", bias_rate.theta0},
        {"sigma", bias_rate.sigma}}},
      {"recurrence",
       {{"c_eta", recurrence.c_eta},
        {"c_zeta", recurrence.c_zeta},
        {"a", recurrence.a},
        {"b", recurrence.b},
        {"c1", recurrence.c1},
        {"c2", recurrence.c2},
        {"a1", recurrence.a1},
        {"horizon", recurrence.horizon}}},
      {"gradcheck",
       {{"trials", gradcheck.trials}, {"tolerance", gradcheck.tolerance}, {"step", gradcheck.step}}}};
}

std::string RunConfig::hash() const {
  const std::string text = to_json().dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig default_config(Experiment experiment, const std::string& selector) {
  RunConfig c;
  c.experiment = experiment;
  switch (experiment) {
    case Experiment::kToy:
      toy_defaults(c, selector.empty() ? "two-modal" : selector);
      break;
    case Experiment::kBlr:
      blr_defaults(c, selector.empty() ? "synthetic" : selector);
      break;
    case Experiment::kBiasRate: {
      solver::ScheduleConfig& s = c.schedule;
      s.batch_growth = solver::BatchGrowth::kTheorem;
      s.c_alpha = 0.01;
      s.c_beta = 0.9;
      s.c1 = s.c2 = s.c3 = 1.0;
      s.c_gamma = 0.9;
      s.mu = 0.999;
      s.d_t = 0;
      s.iterations = 10000;
      break;
    }
    case Experiment::kGradcheck:
    case Experiment::kRecurrence:
      break;
  }
  return c;
}

void apply_json(RunConfig& c, const Json& patch) {
  Section s(patch, "");
  s.custom("experiment", [&](const Json& x, const std::string& p) {
    if (!x.is_string()) throw ConfigError(p + ": expected a string");
    if (parse_experiment(x.get<std::string>()) != c.experiment) {
      throw ConfigError(p + ": file is for '" + x.get<std::string>() + "' but '" +
                        harness::to_string(c.experiment) + "' was requested");
    }
  });
  s.unsigned_integer("seed", c.seed);
  s.integer("iterations", c.schedule.iterations);
  if (c.schedule.iterations < 1) throw ConfigError("iterations: must be at least 1");
  s.boolean("deterministic", c.deterministic);
  s.custom("output", [&](const Json& x, const std::string& p) {
    if (!x.is_string()) throw ConfigError(p + ": expected a string");
    c.output = solver::parse_output_mode(x.get<std::string>());
  });
  s.integer("pool_size", c.pool_size);
  s.custom("schedule", [&](const Json& x, const std::string& p) { read_schedule(c, x, p); });
  s.custom("groups", [&](const Json& x, const std::string& p) { read_groups(c, x, p); });
  s.custom("model", [&](const Json& x, const std::string& p) { read_model(c, x, p); });
  s.custom("toy", [&](const Json& x, const std::string& p) { read_toy(c, x, p); });
  s.custom("blr", [&](const Json& x, const std::string& p) { read_blr(c, x, p); });
  s.custom("bias_rate", [&](const Json& x, const std::string& p) { read_bias_rate(c, x, p); });
  s.custom("recurrence", [&](const Json& x, const std::string& p) { read_recurrence(c, x, p); });
  s.custom("gradcheck", [&](const Json& x, const std::string& p) { read_gradcheck(c, x, p); });
  s.finish();
}

RunConfig config_from_json(Experiment experiment, const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config: expected an object");
  std::string selector;
  const char* section = experiment == Experiment::kToy ? "toy" : "blr";
  const char* field = experiment == Experiment::kToy ? "target" : "preset";
  if ((experiment == Experiment::kToy || experiment == Experiment::kBlr) && doc.contains(section) &&
      doc[section].is_object() && doc[section].contains(field) && doc[section][field].is_string()) {
    selector = doc[section][field].get<std::string>();
  }
  RunConfig c = default_config(experiment, selector);
  apply_json(c, doc);
  return c;
}

RunConfig load_config(Experiment experiment, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(experiment, doc);
}

solver::ScheduleConfig resolve_schedule(const RunConfig& config, const sivi::SemiImplicitModel& model) {
  solver::ScheduleConfig s = config.schedule;
  s.groups.clear();
  for (const GroupSpec& g : config.groups) {
    solver::GroupOverride o;
    if (g.group == "mean") {
      o.begin = model.mean_group().begin;
      o.end = model.mean_group().end;
    } else if (g.group == "cov") {
      o.begin = model.cov_group().begin;
      o.end = model.cov_group().end;
    } else if (g.group.empty()) {
      o.begin = g.begin;
      o.end = g.end;
    } else {
      throw ConfigError("groups: unknown group '" + g.group + "' (expected mean, cov or a range)");
    }
    o.c_alpha = g.c_alpha;
    o.c_gamma = g.c_gamma;
    s.groups.push_back(o);
  }
  return s;
}

}  // namespace civi::harness
