#include "sigsurv/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "sigsurv/dataset_io.hpp"
#include "sigsurv/error.hpp"

namespace sigsurv {

namespace {

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string csv_optional(std::optional<double> v) { return v ? format_double(*v) : ""; }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(DataErrorKind::kIo, "cannot write " + path.string());
  return out;
}

Json averaged(const AveragedValue& a) {
  return Json{{"value", optional_number(a.value)}, {"used", a.used}, {"skipped", a.skipped}};
}

template <class T>
std::vector<T> get_vector(const Json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw ValidationError(std::string("model json: missing array '") + key + "'");
  return j.at(key).get<std::vector<T>>();
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const Json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

Json model_to_json(const IntensityModel& model) {
  if (const auto* p = std::get_if<CoxSigParams>(&model)) {
    return Json{{"kind", "coxsig"}, {"channels", p->channels}, {"depth", p->depth},
                {"plus", p->plus},  {"alpha", p->alpha},       {"beta", p->beta}};
  }
  const auto& n = std::get<NCDEIntensityParams>(model);
  return Json{{"kind", "ncde"},
              {"latent", n.field.latent_dim()},
              {"channels", n.field.channels()},
              {"layers", n.field.layer_sizes()},
              {"weights", n.field.flat()},
              {"alpha", n.alpha},
              {"beta", n.beta},
              {"standardizer", {{"mean", n.standardizer.mean}, {"scale", n.standardizer.scale}}}};
}

IntensityModel model_from_json(const Json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "coxsig") {
      CoxSigParams p;
      p.channels = j.at("channels").get<int>();
      p.depth = j.at("depth").get<int>();
      p.plus = j.at("plus").get<bool>();
      p.alpha = get_vector<double>(j, "alpha");
      p.beta = get_vector<double>(j, "beta");
      p.check();
      return p;
    }
    if (kind == "ncde") {
      const auto layers = get_vector<int>(j, "layers");
      if (layers.size() < 2) throw ValidationError("model json: ncde needs at least 2 layers");
      NCDEIntensityParams n;
      const std::vector<int> hidden(layers.begin() + 1, layers.end() - 1);
      n.field = NeuralField(j.at("latent").get<int>(), j.at("channels").get<int>(), hidden, 0);
      if (n.field.layer_sizes() != layers)
        throw ValidationError("model json: layer sizes do not match latent/channels");
      const auto w = get_vector<double>(j, "weights");
      if (w.size() != n.field.parameter_count())
        throw ValidationError("model json: weight count does not match the layers");
      n.field.set_flat(w);
      n.alpha = get_vector<double>(j, "alpha");
      n.beta = get_vector<double>(j, "beta");
      n.standardizer.mean = get_vector<double>(j.at("standardizer"), "mean");
      n.standardizer.scale = get_vector<double>(j.at("standardizer"), "scale");
      n.check();
      return n;
    }
    throw ValidationError("model json: unknown kind '" + kind + "'");
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("model json: ") + e.what());
  }
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataErrorKind::kIo, "cannot read " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError(DataErrorKind::kParse, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Json optional_number(std::optional<double> v) {
  return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}

Json to_json(const MetricReport& rep) {
  Json points = Json::array();
  for (const auto& p : rep.points)
    points.push_back({{"t", p.ep.t},
                      {"dt", p.ep.dt},
                      {"c_index", optional_number(p.c_index)},
                      {"brier", optional_number(p.brier)},
                      {"weighted_brier", optional_number(p.weighted_brier)},
                      {"auc", optional_number(p.auc)},
                      {"at_risk", p.at_risk},
                      {"comparable_pairs", p.comparable_pairs},
                      {"wbs_excluded", p.wbs_excluded}});
  return Json{{"points", points},
              {"average",
               {{"c_index", averaged(rep.avg_c_index)},
                {"brier", averaged(rep.avg_brier)},
                {"weighted_brier", averaged(rep.avg_weighted_brier)},
                {"auc", averaged(rep.avg_auc)}}}};
}

Json to_json(const DivergenceTriple& t) {
  return Json{{"kl", number(t.kl)},
              {"tv", number(t.tv)},
              {"d2", number(t.d2)},
              {"max_cum_model", number(t.max_cum_model)},
              {"max_cum_truth", number(t.max_cum_truth)},
              {"max_log_gap", number(t.max_log_gap)}};
}

Json to_json(const SandwichCheck& s) {
  return Json{{"pass", s.pass},
              {"c1", number(s.constants.c1)},
              {"c2", number(s.constants.c2)},
              {"lower_slack", number(s.lower_slack)},
              {"upper_slack", number(s.upper_slack)}};
}

Json to_json(const DiscretizationReport& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"mesh", row.mesh}, {"error", row.error}, {"bound", number(row.bound)}});
  return Json{{"rows", rows}, {"slope", r.slope}, {"bound_holds", r.bound_holds}};
}

Json to_json(const DecompositionResult& r) {
  return Json{{"mean", r.mean}, {"se", r.se}, {"replicates", r.replicates}};
}

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace) {
  auto out = open_out(path);
  out << "iter,objective,step\n";
  for (const auto& r : trace)
    out << r.iter << ',' << format_double(r.objective) << ',' << format_double(r.step) << '\n';
}

void write_loss_csv(const std::filesystem::path& path, std::span<const double> epoch_loss) {
  auto out = open_out(path);
  out << "epoch,loss\n";
  for (std::size_t k = 0; k < epoch_loss.size(); ++k)
    out << k + 1 << ',' << format_double(epoch_loss[k]) << '\n';
}

void write_cv_csv(const std::filesystem::path& path, std::span<const CVEntry> table) {
  auto out = open_out(path);
  out << "depth,eta1,eta2,score\n";
  for (const auto& e : table)
    out << e.depth << ',' << format_double(e.eta1) << ',' << format_double(e.eta2) << ','
        << csv_optional(e.score) << '\n';
}

void write_metrics_csv(const std::filesystem::path& path, const MetricReport& rep) {
  auto out = open_out(path);
  out << "t,dt,c_index,brier,weighted_brier,auc,at_risk,comparable_pairs\n";
  for (const auto& p : rep.points)
    out << format_double(p.ep.t) << ',' << format_double(p.ep.dt) << ',' << csv_optional(p.c_index)
        << ',' << csv_optional(p.brier) << ',' << csv_optional(p.weighted_brier) << ','
        << csv_optional(p.auc) << ',' << p.at_risk << ',' << p.comparable_pairs << '\n';
}

}  // namespace sigsurv
