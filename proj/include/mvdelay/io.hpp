#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvdelay/model.hpp"

namespace mvdelay {

/// Code version and config hash stamped into every output file.
struct Provenance {
  std::string version;
  std::string config_sha256;
};

/// Numeric table. Columns listed in integer_columns are written as integers,
/// all others in scientific notation with 17 significant digits.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> integer_columns;

  void add(std::vector<double> row);
};

std::string format_csv(const CsvTable& table, const Provenance& provenance);
void write_csv(const std::filesystem::path& path, const CsvTable& table, const Provenance& provenance);

/// Writes j (an object) with a "provenance" member added.
void write_json(const std::filesystem::path& path, nlohmann::json j, const Provenance& provenance);

/// {"format": "mvdelay-snapshot", "version": 1, "time", "dim", "points",
///  "grid": {...}, "segments": [[...], ...]}
nlohmann::json snapshot_to_json(const ParticleCloud& cloud);
ParticleCloud snapshot_from_json(const nlohmann::json& j);

}  // namespace mvdelay
