#pragma once

#include <filesystem>
#include <string>

#include "sigsurv/timeseries.hpp"

namespace sigsurv {

/// Reads the two-file format:
///   longitudinal: id,time,<feature columns...>
///   records:      id,event_time,event,<static columns...>
/// Rows may appear in any order. Each record's clock is shifted so that its
/// first observation is at time 0.
Dataset load_dataset(const std::filesystem::path& longitudinal_file,
                     const std::filesystem::path& records_file);

/// Writes the same format; doubles use shortest round-trip formatting so
/// save -> load reproduces every value bit for bit.
void save_dataset(const Dataset& data, const std::filesystem::path& longitudinal_file,
                  const std::filesystem::path& records_file);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace sigsurv
