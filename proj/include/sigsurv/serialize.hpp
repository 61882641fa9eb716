#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "json.hpp"
#include "sigsurv/diagnostics.hpp"
#include "sigsurv/fit.hpp"
#include "sigsurv/intensity.hpp"
#include "sigsurv/metrics.hpp"

namespace sigsurv {

using Json = nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view bytes);

/// 16 hex digits of FNV-1a over the compact dump of `config`.
std::string config_hash(const Json& config);

/// {"kind": "coxsig" | "ncde", ...}. NCDE weights are one flat array plus
/// the layer sizes needed to rebuild the network.
Json model_to_json(const IntensityModel& model);
IntensityModel model_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline. Non-finite numbers become null.
void write_json(const std::filesystem::path& path, const Json& j);

Json to_json(const MetricReport& rep);
Json to_json(const DivergenceTriple& t);
Json to_json(const SandwichCheck& s);
Json to_json(const DiscretizationReport& r);
Json to_json(const DecompositionResult& r);

Json optional_number(std::optional<double> v);

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> trace);
void write_loss_csv(const std::filesystem::path& path, std::span<const double> epoch_loss);
void write_cv_csv(const std::filesystem::path& path, std::span<const CVEntry> table);
void write_metrics_csv(const std::filesystem::path& path, const MetricReport& rep);

}  // namespace sigsurv
