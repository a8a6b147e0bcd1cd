#include "mvdelay/io.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

namespace mvdelay {

void CsvTable::add(std::vector<double> row) {
  if (row.size() != header.size()) throw Error("csv: row width does not match the header");
  rows.push_back(std::move(row));
}

std::string format_csv(const CsvTable& table, const Provenance& provenance) {
  std::string out = fmt::format("# mvdelay {} config={}\n", provenance.version, provenance.config_sha256);
  std::vector<bool> integer(table.header.size(), false);
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    integer[c] = std::find(table.integer_columns.begin(), table.integer_columns.end(), table.header[c]) !=
                 table.integer_columns.end();
    out += (c ? "," : "") + table.header[c];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += integer[c] ? fmt::format("{}", static_cast<long long>(row[c])) : fmt::format("{:.16e}", row[c]);
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table, const Provenance& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << format_csv(table, provenance);
}

void write_json(const std::filesystem::path& path, nlohmann::json j, const Provenance& provenance) {
  j["provenance"] = {{"version", provenance.version}, {"config_sha256", provenance.config_sha256}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

nlohmann::json snapshot_to_json(const ParticleCloud& cloud) {
  nlohmann::json segments = nlohmann::json::array();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto v = cloud.segment(i).values();
    segments.push_back(std::vector<double>(v.begin(), v.end()));
  }
  const auto& g = cloud.grid();
  return {{"format", "mvdelay-snapshot"},
          {"version", 1},
          {"time", cloud.time()},
          {"dim", cloud.dim()},
          {"points", cloud.points()},
          {"grid", {{"h", g.step_h}, {"delay_steps", g.delay_steps}, {"horizon_steps", g.horizon_steps}}},
          {"segments", std::move(segments)}};
}

ParticleCloud snapshot_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "mvdelay-snapshot" || j.value("version", 0) != 1)
    throw Error("snapshot: unsupported format or version");
  TimeGrid grid;
  grid.step_h = j.at("grid").at("h").get<double>();
  grid.delay_steps = j.at("grid").at("delay_steps").get<std::size_t>();
  grid.horizon_steps = j.at("grid").at("horizon_steps").get<std::size_t>();
  const auto dim = j.at("dim").get<std::size_t>();
  std::vector<double> flat;
  for (const auto& seg : j.at("segments")) {
    const auto v = seg.get<std::vector<double>>();
    flat.insert(flat.end(), v.begin(), v.end());
  }
  return ParticleCloud(grid, dim, std::move(flat), j.at("time").get<double>());
}

}  // namespace mvdelay
