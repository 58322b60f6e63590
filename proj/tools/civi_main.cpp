#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "civi/harness/config.hpp"
#include "civi/harness/experiments.hpp"
#include "civi/sivi/blr.hpp"

namespace {

using civi::harness::Experiment;
using civi::harness::Json;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<civi::Index> iters;
  bool deterministic = false;
};

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw civi::ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw civi::ConfigError("'" + path + "': " + e.what());
  }
}

civi::harness::RunConfig build_config(Experiment e, const std::string& config_path, Json overlay,
                                      const Globals& g) {
  Json doc = config_path.empty() ? Json::object() : read_json_file(config_path);
  if (!doc.is_object()) throw civi::ConfigError("config: expected an object");
  doc.merge_patch(overlay);
  civi::harness::RunConfig config = civi::harness::config_from_json(e, doc);
  if (g.seed) config.seed = *g.seed;
  if (g.iters) config.schedule.iterations = *g.iters;
  if (g.deterministic) config.deterministic = true;
  return config;
}

civi::harness::IterationHook progress(civi::Index total) {
  const civi::Index every = std::max<civi::Index>(1, total / 10);
  return [every, total](const civi::solver::IterationRecord& r) {
    if (r.t % every == 0 || r.t == total) {
      std::fprintf(stderr, "t=%lld/%lld loss=%.6g |grad|=%.3g alpha=%.3g\n", static_cast<long long>(r.t),
                   static_cast<long long>(total), r.loss, r.grad_norm, r.alpha);
    }
  };
}

int finish(const Json& report, bool ok) {
  std::cout << report.dump(2) << '\n';
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CI-VI: compositional semi-implicit variational inference experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_option("--iters", g.iters, "Iteration budget (overrides the config)")->check(CLI::PositiveNumber);
  app.add_flag("--deterministic", g.deterministic, "Zero wall-clock columns for byte-exact re-runs");

  std::string config_path;
  std::string out_dir;
  std::string target;
  std::string data;
  std::string preset;
  std::string case_path;
  std::string manifest;

  CLI::App* toy = app.add_subcommand("toy", "Fit a toy two-dimensional target");
  toy->add_option("--target", target, "two-modal, star or banana")->required();
  toy->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  toy->add_option("--out", out_dir, "Output directory")->default_val("runs/toy");

  CLI::App* blr = app.add_subcommand("blr", "Bayesian logistic regression against an MCMC oracle");
  blr->add_option("--data", data, "Headerless CSV, label last (synthetic when omitted)")->check(CLI::ExistingFile);
  blr->add_option("--preset", preset, "spam, nodal, waveform or synthetic");
  blr->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  blr->add_option("--out", out_dir, "Output directory")->default_val("runs/blr");

  CLI::App* bias = app.add_subcommand("bias-rate", "Gradient-error decay on the lognormal fixture");
  bias->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  bias->add_option("--out", out_dir, "Output directory")->default_val("runs/bias-rate");

  CLI::App* grad = app.add_subcommand("gradcheck", "Finite-difference sweep over every differentiable op");
  grad->add_option("--config", config_path, "JSON config")->check(CLI::ExistingFile);
  grad->add_option("--out", out_dir, "Output directory")->default_val("runs/gradcheck");

  CLI::App* rec = app.add_subcommand("recurrence", "Iterate the step-size recurrence and check its bound");
  rec->add_option("--case", case_path, "JSON with c_eta, c_zeta, a, b, c1, c2, a1, horizon")
      ->check(CLI::ExistingFile);
  rec->add_option("--out", out_dir, "Output directory")->default_val("runs/recurrence");

  civi::Index rows = 200;
  civi::Index dim = 2;
  CLI::App* synth = app.add_subcommand("synth-blr", "Write a synthetic logistic-regression dataset");
  synth->add_option("--rows", rows, "Number of rows")->check(CLI::PositiveNumber);
  synth->add_option("--dim", dim, "Number of features")->check(CLI::PositiveNumber);
  synth->add_option("--out", out_dir, "CSV path")->required();

  CLI::App* rerun = app.add_subcommand("rerun", "Re-run a manifest and compare its trajectory");
  rerun->add_option("--manifest", manifest, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
  rerun->add_option("--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*toy) {
      const auto config = build_config(Experiment::kToy, config_path, Json{{"toy", {{"target", target}}}}, g);
      return finish(civi::harness::run_experiment(config, out_dir, progress(config.schedule.iterations)), true);
    }
    if (*blr) {
      Json overlay = Json::object();
      if (!data.empty()) overlay["blr"]["data"] = data;
      if (!preset.empty()) overlay["blr"]["preset"] = preset;
      const auto config = build_config(Experiment::kBlr, config_path, overlay, g);
      return finish(civi::harness::run_experiment(config, out_dir, progress(config.schedule.iterations)), true);
    }
    if (*bias) {
      const auto config = build_config(Experiment::kBiasRate, config_path, Json::object(), g);
      return finish(civi::harness::run_experiment(config, out_dir), true);
    }
    if (*grad) {
      const auto config = build_config(Experiment::kGradcheck, config_path, Json::object(), g);
      const Json report = civi::harness::run_experiment(config, out_dir);
      return finish(report, report.at("pass").get<bool>());
    }
    if (*rec) {
      Json overlay = Json::object();
      if (!case_path.empty()) overlay["recurrence"] = read_json_file(case_path);
      const auto config = build_config(Experiment::kRecurrence, "", overlay, g);
      const Json report = civi::harness::run_experiment(config, out_dir);
      return finish(report, report.at("holds").get<bool>());
    }
    if (*synth) {
      const civi::sivi::BlrDataset ds = civi::sivi::synthesize_blr(rows, dim, g.seed.value_or(1));
      civi::sivi::write_blr_csv(ds, out_dir);
      std::cerr << "wrote " << rows << " rows to " << out_dir << '\n';
      return 0;
    }
    if (*rerun) {
      const civi::harness::RerunResult r = civi::harness::rerun_manifest(manifest, out_dir);
      Json report{{"identical", r.identical}, {"compared", r.compared}, {"report", r.report}};
      return finish(report, r.identical);
    }
  } catch (const civi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const civi::solver::SolverError& e) {
    std::cerr << "solver error: " << e.what() << " (checkpoint written next to the trajectory)\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
