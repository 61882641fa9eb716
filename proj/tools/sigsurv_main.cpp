// sigsurv command-line front end: simulate, fit, cv, evaluate, predict, diagnose.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sigsurv/dataset_io.hpp"
#include "sigsurv/diagnostics.hpp"
#include "sigsurv/error.hpp"
#include "sigsurv/fit.hpp"
#include "sigsurv/metrics.hpp"
#include "sigsurv/serialize.hpp"
#include "sigsurv/simulate.hpp"

namespace fs = std::filesystem;
using namespace sigsurv;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct DataArgs {
  std::string dataset;
  std::string records;
  std::string split;
  std::string part = "test";
};

struct Common {
  std::string out = ".";
  std::uint64_t seed = 0;
  int quad_substeps = 4;
};

void add_data_args(CLI::App* cmd, DataArgs& d, bool with_split) {
  cmd->add_option("--dataset", d.dataset,
                  "Directory with longitudinal.csv and records.csv, or the longitudinal file")
      ->required();
  cmd->add_option("--records", d.records, "Records file when --dataset names a file");
  if (with_split) {
    cmd->add_option("--split", d.split, "split.json written by fit/cv");
    cmd->add_option("--part", d.part, "Which part of the split to use")
        ->check(CLI::IsMember({"train", "test"}));
  }
}

Dataset load_data(const DataArgs& d) {
  fs::path lon = d.dataset, rec = d.records;
  if (fs::is_directory(lon)) {
    rec = lon / "records.csv";
    lon = lon / "longitudinal.csv";
  } else if (rec.empty()) {
    throw ValidationError("--records is required when --dataset is a file");
  }
  Dataset data = load_dataset(lon, rec);
  if (d.split.empty()) return data;
  const Json split = read_json(d.split);
  const auto idx = split.at(d.part).get<std::vector<std::size_t>>();
  if (split.at("n").get<std::size_t>() != data.size())
    throw ValidationError("split file does not match the dataset size");
  if (idx.empty()) throw ValidationError("split part '" + d.part + "' is empty");
  return data.subset(idx);
}

Json data_config(const DataArgs& d) {
  return Json{{"dataset", d.dataset}, {"records", d.records}, {"split", d.split}, {"part", d.part}};
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (!fs::is_directory(p)) throw DataError(DataErrorKind::kIo, "cannot create output directory " + dir);
  return p;
}

void write_manifest(const fs::path& out, const std::string& command, const Json& config,
                    const std::vector<std::string>& outputs, const Json& summary) {
  Json m;
  m["command"] = command;
  m["config"] = config;
  m["config_hash"] = config_hash(Json{{"command", command}, {"config", config}});
  m["outputs"] = outputs;
  m["summary"] = summary;
  write_json(out / "manifest.json", m);
}

std::vector<double> parse_times(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw ValidationError("--times: cannot parse '" + cell + "'");
    }
  }
  return out;
}

// ---- simulate ----

struct SimArgs {
  std::string gen = "ou";
  std::size_t n = 0;
  std::size_t keep_every = 1;
  int grid_points = 0;
  int depth = 2;
  bool per_step_noise = false;
  bool raw_dose = false;
};

int cmd_simulate(const SimArgs& a, const Common& c) {
  const fs::path out = prepare_out(c.out);
  Json config{{"gen", a.gen}, {"seed", c.seed}, {"keep_every", a.keep_every}};
  Simulation sim;
  std::vector<std::string> outputs{"longitudinal.csv", "records.csv"};
  if (a.gen == "ou") {
    OUConfig cfg;
    cfg.seed = c.seed;
    cfg.keep_every = a.keep_every;
    cfg.per_step_noise = a.per_step_noise;
    if (a.n) cfg.n = a.n;
    if (a.grid_points) cfg.grid_points = a.grid_points;
    config.update(Json{{"n", cfg.n}, {"grid_points", cfg.grid_points},
                       {"per_step_noise", cfg.per_step_noise}});
    sim = ou_hitting_dataset(cfg);
  } else if (a.gen == "tumor") {
    TumorConfig cfg;
    cfg.seed = c.seed;
    cfg.keep_every = a.keep_every;
    cfg.absolute_drug = !a.raw_dose;
    if (a.n) cfg.n = a.n;
    if (a.grid_points) cfg.grid_points = a.grid_points;
    config.update(Json{{"n", cfg.n}, {"grid_points", cfg.grid_points},
                       {"absolute_drug", cfg.absolute_drug}});
    sim = tumor_growth_dataset(cfg);
  } else {
    ThinningConfig cfg;
    cfg.seed = c.seed;
    cfg.depth = a.depth;
    if (a.n) cfg.n = a.n;
    if (a.grid_points) cfg.grid_points = a.grid_points;
    config.update(Json{{"n", cfg.n}, {"grid_points", cfg.grid_points}, {"depth", cfg.depth},
                       {"truth_seed", cfg.truth_seed}});
    const CoxSigParams truth = thinning_truth(cfg);
    sim = thinning_dataset(cfg, truth);
    write_json(out / "truth.json", model_to_json(truth));
    outputs.push_back("truth.json");
  }
  save_dataset(sim.data, out / "longitudinal.csv", out / "records.csv");
  const double cens = sim.data.censoring_rate();
  const double obs = sim.data.mean_observation_count();
  write_manifest(out, "simulate", config, outputs,
                 Json{{"records", sim.data.size()}, {"censoring_rate", cens},
                      {"mean_observations", obs}});
  std::printf("records %zu  censoring rate %.4f  mean observations %.2f\n", sim.data.size(), cens,
              obs);
  return 0;
}

// ---- fit / cv ----

struct FitArgs {
  DataArgs data;
  std::string method = "coxsig";
  int depth = 2;
  double eta1 = 0.0;
  double eta2 = 0.0;
  double gamma = 0.1;
  double train_fraction = 0.8;
  int epochs = 50;
  int max_iters = 2000;
  std::string solver = "ista";
  std::string grid_file;
  double delta_t = 0.0;
};

Json split_json(std::size_t n, const std::vector<std::size_t>& train,
                const std::vector<std::size_t>& test, double frac, std::uint64_t seed) {
  return Json{{"n", n}, {"train_fraction", frac}, {"seed", seed}, {"train", train}, {"test", test}};
}

// Train part of the data; writes split.json.
Dataset training_part(const Dataset& all, double frac, std::uint64_t seed, const fs::path& out) {
  if (!(frac > 0.0 && frac <= 1.0)) throw ValidationError("--train-fraction must be in (0, 1]");
  std::vector<std::size_t> train, test;
  if (frac == 1.0) {
    for (std::size_t i = 0; i < all.size(); ++i) train.push_back(i);
  } else {
    std::tie(train, test) = split_indices(all.size(), frac, seed);
  }
  write_json(out / "split.json", split_json(all.size(), train, test, frac, seed));
  return all.subset(train);
}

Json fit_config(const FitArgs& a, const Common& c) {
  return Json{{"data", data_config(a.data)},     {"method", a.method},
              {"depth", a.depth},                {"eta1", a.eta1},
              {"eta2", a.eta2},                  {"gamma", a.gamma},
              {"train_fraction", a.train_fraction}, {"seed", c.seed},
              {"quad_substeps", c.quad_substeps}, {"epochs", a.epochs},
              {"max_iters", a.max_iters}, {"solver", a.solver}};
}

// "fast": diagonal preconditioning plus monotone FISTA; same minimizer.
void apply_solver(const FitArgs& a, ElasticNetConfig& pen) {
  pen.precondition = a.solver == "fast";
  pen.accelerate = a.solver == "fast";
}

int cmd_fit(const FitArgs& a, const Common& c) {
  const fs::path out = prepare_out(c.out);
  const Dataset train = training_part(load_data(a.data), a.train_fraction, c.seed, out);
  QuadratureConfig quad;
  quad.substeps = c.quad_substeps;
  ElasticNetConfig pen;
  pen.eta1 = a.eta1;
  pen.eta2 = a.eta2;
  pen.gamma = a.gamma;
  pen.max_iters = a.max_iters;
  apply_solver(a, pen);
  std::vector<std::string> outputs{"model.json", "split.json"};
  Json summary;
  IntensityModel model;
  if (a.method == "ncde") {
    AdamConfig cfg;
    cfg.epochs = a.epochs;
    const NCDEFit fit = fit_ncde(train, cfg, c.seed);
    write_loss_csv(out / "loss.csv", fit.epoch_loss);
    outputs.push_back("loss.csv");
    summary["final_loss"] = fit.epoch_loss.empty() ? Json(nullptr) : Json(fit.epoch_loss.back());
    model = fit.params;
  } else {
    const CoxSigFit fit = a.method == "cox-baseline"
                              ? fit_baseline_cox(train, pen, quad, a.depth)
                              : fit_coxsig(train, a.depth, a.method == "coxsig+", pen, quad);
    write_trace_csv(out / "trace.csv", fit.trace);
    outputs.push_back("trace.csv");
    summary["converged"] = fit.converged;
    summary["iterations"] = fit.trace.empty() ? 0 : fit.trace.back().iter;
    summary["objective"] = fit.trace.empty() ? Json(nullptr) : Json(fit.trace.back().objective);
    model = fit.params;
  }
  summary["train_nll"] = neg_log_likelihood(model, train, quad);
  write_json(out / "model.json", model_to_json(model));
  write_manifest(out, "fit", fit_config(a, c), outputs, summary);
  std::printf("%s fit on %zu records  train NLL %.6f\n", a.method.c_str(), train.size(),
              summary["train_nll"].get<double>());
  return 0;
}

CVGrid load_grid(const std::string& file) {
  if (file.empty()) return CVGrid::standard();
  const Json j = read_json(file);
  CVGrid g;
  try {
    g.eta1 = j.at("eta1").get<std::vector<double>>();
    g.eta2 = j.at("eta2").get<std::vector<double>>();
    g.depths = j.at("depths").get<std::vector<int>>();
    if (j.contains("train_fraction")) g.train_fraction = j.at("train_fraction").get<double>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("grid file: ") + e.what());
  }
  g.check();
  return g;
}

int cmd_cv(const FitArgs& a, const Common& c) {
  if (a.method != "coxsig" && a.method != "coxsig+")
    throw ValidationError("cv supports --method coxsig and coxsig+ only");
  if (!(a.delta_t > 0.0)) throw ValidationError("cv needs a positive --delta-t");
  const fs::path out = prepare_out(c.out);
  const Dataset train = training_part(load_data(a.data), a.train_fraction, c.seed, out);
  const CVGrid grid = load_grid(a.grid_file);
  CVOptions opt;
  opt.plus = a.method == "coxsig+";
  opt.pen.gamma = a.gamma;
  opt.pen.max_iters = a.max_iters;
  apply_solver(a, opt.pen);
  opt.quad.substeps = c.quad_substeps;
  opt.dt = a.delta_t;
  const CVResult res = cross_validate(train, grid, opt, c.seed);
  write_cv_csv(out / "cv.csv", res.table);
  write_trace_csv(out / "trace.csv", res.refit.trace);
  const IntensityModel model = res.refit.params;
  write_json(out / "model.json", model_to_json(model));
  Json config = fit_config(a, c);
  config["grid"] = Json{{"eta1", grid.eta1}, {"eta2", grid.eta2}, {"depths", grid.depths},
                        {"train_fraction", grid.train_fraction}};
  config["delta_t"] = a.delta_t;
  write_manifest(out, "cv", config, {"model.json", "split.json", "cv.csv", "trace.csv"},
                 Json{{"best", {{"eta1", res.best.eta1},
                                {"eta2", res.best.eta2},
                                {"depth", res.best.depth},
                                {"score", optional_number(res.best.score)}}}});
  std::printf("best depth %d  eta1 %g  eta2 %g  score %s\n", res.best.depth, res.best.eta1,
              res.best.eta2, res.best.score ? std::to_string(*res.best.score).c_str() : "undefined");
  return 0;
}

// ---- evaluate / predict ----

struct EvalArgs {
  DataArgs data;
  std::string model;
  double delta_t = 0.0;
  std::string times;
};

std::vector<double> eval_times(const EvalArgs& a, const Dataset& data) {
  return a.times.empty() ? default_eval_times(data) : parse_times(a.times);
}

Json eval_config(const EvalArgs& a, const Common& c, const std::vector<double>& times) {
  return Json{{"data", data_config(a.data)}, {"model", a.model},  {"delta_t", a.delta_t},
              {"times", times},              {"quad_substeps", c.quad_substeps}};
}

int cmd_evaluate(const EvalArgs& a, const Common& c) {
  if (!(a.delta_t > 0.0)) throw ValidationError("evaluate needs a positive --delta-t");
  const fs::path out = prepare_out(c.out);
  const Dataset data = load_data(a.data);
  const IntensityModel model = model_from_json(read_json(a.model));
  const auto times = eval_times(a, data);
  EvaluationOptions opt;
  opt.quad.substeps = c.quad_substeps;
  const MetricReport rep = evaluate_model(model, data, times, a.delta_t, opt);
  write_json(out / "metrics.json", to_json(rep));
  write_metrics_csv(out / "metrics.csv", rep);
  const auto avg = to_json(rep)["average"];
  write_manifest(out, "evaluate", eval_config(a, c, times), {"metrics.json", "metrics.csv"}, avg);
  std::printf("C-index %s  Brier %s  (averaged over %zu times)\n",
              avg["c_index"]["value"].dump().c_str(), avg["brier"]["value"].dump().c_str(),
              times.size());
  return 0;
}

int cmd_predict(const EvalArgs& a, const Common& c) {
  if (!(a.delta_t > 0.0)) throw ValidationError("predict needs a positive --delta-t");
  const fs::path out = prepare_out(c.out);
  const Dataset data = load_data(a.data);
  const IntensityModel model = model_from_json(read_json(a.model));
  const auto times = eval_times(a, data);
  QuadratureConfig quad;
  quad.substeps = c.quad_substeps;
  std::ofstream csv(out / "survival.csv", std::ios::binary);
  if (!csv) throw DataError(DataErrorKind::kIo, "cannot write survival.csv");
  csv << "id,t,dt,survival\n";
  std::vector<std::vector<double>> preds;
  for (double t : times) preds.push_back(survival_predictions(model, data, t, a.delta_t, quad));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t k = 0; k < times.size(); ++k)
      csv << data.records[i].id << ',' << format_double(times[k]) << ','
          << format_double(a.delta_t) << ',' << format_double(preds[k][i]) << '\n';
  csv.close();
  write_manifest(out, "predict", eval_config(a, c, times), {"survival.csv"},
                 Json{{"records", data.size()}});
  std::printf("wrote %zu survival curves\n", data.size());
  return 0;
}

// ---- diagnose ----

struct DiagArgs {
  DataArgs data;
  std::string model;
  std::string truth;
  int panels = 16;
};

int cmd_diagnose(const DiagArgs& a, const Common& c) {
  const fs::path out = prepare_out(c.out);
  const Dataset data = load_data(a.data);
  const IntensityModel model = model_from_json(read_json(a.model));
  Json report;
  bool all_pass = true;
  if (!a.truth.empty()) {
    const IntensityModel truth = model_from_json(read_json(a.truth));
    const auto div = empirical_divergences(truth, model, data, a.panels);
    const auto sw = pinsker_sandwich_check(div, empirical_constants(div));
    report["divergences"] = to_json(div);
    report["sandwich"] = to_json(sw);
    all_pass = all_pass && sw.pass;
  }
  if (const auto* p = std::get_if<CoxSigParams>(&model)) {
    double worst = 0.0;
    std::size_t longest = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& r = data.records[i];
      const auto path = embed_fill_forward(r.path, r.event_time);
      worst = std::max(worst, factorial_decay_ratio(path, r.event_time, p->depth));
      if (r.path.size() > data.records[longest].path.size()) longest = i;
    }
    const bool decay_ok = worst <= 1.0 + 1e-12;
    report["factorial_decay"] = Json{{"pass", decay_ok}, {"max_ratio", worst}};
    all_pass = all_pass && decay_ok;
    const auto& dense = data.records[longest].path;
    int levels = 0;
    while ((std::size_t{1} << (levels + 1)) < dense.size() && levels < 6) ++levels;
    if (levels >= 3 && static_cast<int>(dense.channels()) + 1 == p->channels) {
      const auto disc = discretization_check(dense, p->alpha, p->depth, levels);
      report["discretization"] = to_json(disc);
      report["discretization"]["record"] = data.records[longest].id;
      all_pass = all_pass && disc.bound_holds;
    }
  }
  report["pass"] = all_pass;
  write_json(out / "diagnostics.json", report);
  write_manifest(out, "diagnose",
                 Json{{"data", data_config(a.data)}, {"model", a.model}, {"truth", a.truth},
                      {"panels", a.panels}},
                 {"diagnostics.json"}, Json{{"pass", all_pass}});
  std::printf("diagnostics %s\n", all_pass ? "pass" : "FAIL");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sigsurv: signature-based dynamic survival analysis"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", common.out, "Output directory");
    cmd->add_option("--seed", common.seed, "Random seed");
    cmd->add_option("--quad-substeps", common.quad_substeps, "Trapezoid panels per interval")
        ->check(CLI::PositiveNumber);
  };

  SimArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  add_common(simulate);
  simulate->add_option("--gen", sim.gen, "Generator")
      ->check(CLI::IsMember({"ou", "tumor", "thinning"}));
  simulate->add_option("-n,--n", sim.n, "Number of records (generator default when 0)");
  simulate->add_option("--keep-every", sim.keep_every, "Keep every k-th grid sample");
  simulate->add_option("--grid-points", sim.grid_points, "Simulation grid size");
  simulate->add_option("--depth", sim.depth, "Truth depth for the thinning generator");
  simulate->add_flag("--per-step-noise", sim.per_step_noise, "OU: unscaled Brownian term per step");
  simulate->add_flag("--raw-dose", sim.raw_dose, "Tumor: use the signed fBm as dose");

  FitArgs fa;
  auto add_fit = [&](CLI::App* cmd) {
    add_common(cmd);
    add_data_args(cmd, fa.data, false);
    cmd->add_option("--method", fa.method)
        ->check(CLI::IsMember({"coxsig", "coxsig+", "ncde", "cox-baseline"}));
    cmd->add_option("--gamma", fa.gamma, "Elastic-net mixing");
    cmd->add_option("--train-fraction", fa.train_fraction, "Share of records used for training");
    cmd->add_option("--max-iters", fa.max_iters, "Proximal gradient iteration cap");
    cmd->add_option("--solver", fa.solver,
                    "ista, or fast (preconditioned, accelerated; same optimum)")
        ->check(CLI::IsMember({"ista", "fast"}));
  };
  auto* fit = app.add_subcommand("fit", "Fit one model");
  add_fit(fit);
  fit->add_option("--depth", fa.depth, "Signature depth");
  fit->add_option("--eta1", fa.eta1, "Penalty on alpha");
  fit->add_option("--eta2", fa.eta2, "Penalty on beta");
  fit->add_option("--epochs", fa.epochs, "NCDE epochs");
  auto* cv = app.add_subcommand("cv", "Cross-validate penalties and depth, then refit");
  add_fit(cv);
  cv->add_option("--grid-file", fa.grid_file, "JSON grid {eta1, eta2, depths}");
  cv->add_option("--delta-t", fa.delta_t, "Prediction window of the validation metric")->required();

  EvalArgs ea;
  auto add_eval = [&](CLI::App* cmd) {
    add_common(cmd);
    add_data_args(cmd, ea.data, true);
    cmd->add_option("--model", ea.model, "model.json")->required();
    cmd->add_option("--delta-t", ea.delta_t, "Prediction window")->required();
    cmd->add_option("--times", ea.times, "Comma-separated times (default: event percentiles)");
  };
  auto* evaluate = app.add_subcommand("evaluate", "Time-dependent metrics of a model");
  add_eval(evaluate);
  auto* predict = app.add_subcommand("predict", "Conditional survival curves per record");
  add_eval(predict);

  DiagArgs da;
  auto* diagnose = app.add_subcommand("diagnose", "Numerical checks of a fitted model");
  add_common(diagnose);
  add_data_args(diagnose, da.data, true);
  diagnose->add_option("--model", da.model, "model.json")->required();
  diagnose->add_option("--truth", da.truth, "Ground-truth model.json (simulated data)");
  diagnose->add_option("--panels", da.panels, "Quadrature sub-panels per interval")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*simulate) return cmd_simulate(sim, common);
    if (*fit) return cmd_fit(fa, common);
    if (*cv) return cmd_cv(fa, common);
    if (*evaluate) return cmd_evaluate(ea, common);
    if (*predict) return cmd_predict(ea, common);
    if (*diagnose) return cmd_diagnose(da, common);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}
