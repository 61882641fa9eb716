#include "sigsurv/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

#include "sigsurv/error.hpp"

namespace sigsurv {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    auto b = cell.find_first_not_of(" \t\r");
    auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
    if (lower == "nan" || lower == "inf" || lower == "-inf")
      throw DataError(DataErrorKind::kNonFinite, where + ": non-finite value '" + s + "'");
    throw DataError(DataErrorKind::kParse, where + ": cannot parse '" + s + "'");
  }
  if (!std::isfinite(v))
    throw DataError(DataErrorKind::kNonFinite, where + ": non-finite value '" + s + "'");
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read_table(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError(DataErrorKind::kIo, "cannot open " + file.string());
  Table t;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header) {
      if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
        line = line.substr(3);  // UTF-8 BOM
      t.header = split_line(line);
      have_header = true;
      continue;
    }
    auto cells = split_line(line);
    if (cells.size() != t.header.size())
      throw DataError(DataErrorKind::kParse, file.string() + ":" + std::to_string(lineno) +
                                                 ": expected " +
                                                 std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw DataError(DataErrorKind::kMissingColumn, file.string() + ": empty file");
  return t;
}

void require_column(const Table& t, std::size_t pos, const std::string& name,
                    const std::filesystem::path& file) {
  if (t.header.size() <= pos || t.header[pos] != name)
    throw DataError(DataErrorKind::kMissingColumn,
                    file.string() + ": missing column '" + name + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw ValidationError("format_double: conversion failed");
  return std::string(buf, ptr);
}

Dataset load_dataset(const std::filesystem::path& longitudinal_file,
                     const std::filesystem::path& records_file) {
  const Table lon = read_table(longitudinal_file);
  const Table rec = read_table(records_file);
  require_column(lon, 0, "id", longitudinal_file);
  require_column(lon, 1, "time", longitudinal_file);
  require_column(rec, 0, "id", records_file);
  require_column(rec, 1, "event_time", records_file);
  require_column(rec, 2, "event", records_file);

  Dataset data;
  data.feature_names.assign(lon.header.begin() + 2, lon.header.end());
  data.static_names.assign(rec.header.begin() + 3, rec.header.end());
  const std::size_t d = data.feature_names.size();
  const std::size_t s = data.static_names.size();

  struct Obs {
    double time;
    std::vector<double> values;
  };
  std::map<std::string, std::vector<Obs>> by_id;
  for (std::size_t r = 0; r < lon.rows.size(); ++r) {
    const auto& row = lon.rows[r];
    const std::string where = longitudinal_file.string() + " row " + std::to_string(r + 1);
    Obs o{parse_double(row[1], where), std::vector<double>(d)};
    for (std::size_t j = 0; j < d; ++j) o.values[j] = parse_double(row[2 + j], where);
    by_id[row[0]].push_back(std::move(o));
  }

  std::map<std::string, bool> seen;
  for (std::size_t r = 0; r < rec.rows.size(); ++r) {
    const auto& row = rec.rows[r];
    const std::string where = records_file.string() + " row " + std::to_string(r + 1);
    const std::string& id = row[0];
    if (seen.count(id))
      throw DataError(DataErrorKind::kIdMismatch, where + ": duplicate id '" + id + "'");
    seen[id] = true;
    auto it = by_id.find(id);
    if (it == by_id.end())
      throw DataError(DataErrorKind::kIdMismatch,
                      where + ": id '" + id + "' has no longitudinal rows");
    auto& obs = it->second;
    std::stable_sort(obs.begin(), obs.end(),
                     [](const Obs& a, const Obs& b) { return a.time < b.time; });
    for (std::size_t k = 1; k < obs.size(); ++k)
      if (!(obs[k].time > obs[k - 1].time))
        throw DataError(DataErrorKind::kNonMonotoneTimes,
                        "id '" + id + "': repeated observation time");

    SurvivalRecord record;
    record.id = id;
    const double origin = obs.front().time;
    const double raw_event_time = parse_double(row[1], where);
    if (obs.back().time > raw_event_time)
      throw DataError(DataErrorKind::kObservationAfterEvent,
                      "id '" + id + "': observation after event");
    record.event_time = raw_event_time - origin;
    const std::string& ev = row[2];
    if (ev == "1") record.event = true;
    else if (ev == "0") record.event = false;
    else throw DataError(DataErrorKind::kParse, where + ": event must be 0 or 1");
    record.statics.resize(s);
    for (std::size_t j = 0; j < s; ++j) record.statics[j] = parse_double(row[3 + j], where);

    std::vector<double> times, values;
    times.reserve(obs.size());
    values.reserve(obs.size() * d);
    for (const auto& o : obs) {
      times.push_back(o.time - origin);
      values.insert(values.end(), o.values.begin(), o.values.end());
    }
    record.path = SampledPath(std::move(times), std::move(values), d);
    record.validate();
    data.horizon = std::max(data.horizon, record.event_time);
    data.records.push_back(std::move(record));
  }
  for (const auto& [id, obs] : by_id)
    if (!seen.count(id))
      throw DataError(DataErrorKind::kIdMismatch,
                      "id '" + id + "' has longitudinal rows but no record");
  data.validate();
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& longitudinal_file,
                  const std::filesystem::path& records_file) {
  std::ofstream lon(longitudinal_file);
  std::ofstream rec(records_file);
  if (!lon || !rec) throw DataError(DataErrorKind::kIo, "cannot write dataset files");
  lon << "id,time";
  for (const auto& n : data.feature_names) lon << ',' << n;
  lon << '\n';
  rec << "id,event_time,event";
  for (const auto& n : data.static_names) rec << ',' << n;
  rec << '\n';
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    const std::string id = r.id.empty() ? std::to_string(i) : r.id;
    for (std::size_t k = 0; k < r.path.size(); ++k) {
      lon << id << ',' << format_double(r.path.time(k));
      for (double v : r.path.row(k)) lon << ',' << format_double(v);
      lon << '\n';
    }
    rec << id << ',' << format_double(r.event_time) << ',' << (r.event ? 1 : 0);
    for (double w : r.statics) rec << ',' << format_double(w);
    rec << '\n';
  }
  if (!lon || !rec) throw DataError(DataErrorKind::kIo, "write failed");
}

}  // namespace sigsurv
