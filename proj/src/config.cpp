#include "mvdelay/config.hpp"

#include <fstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "mvdelay/registry.hpp"

namespace mvdelay {

using nlohmann::json;

TimeGrid grid_from_json(const json& j) {
  TimeGrid grid;
  grid.step_h = j.at("h").get<double>();
  grid.delay_steps = j.value("delay_steps", std::size_t{0});
  grid.horizon_steps = j.value("horizon_steps", std::size_t{0});
  grid.validate();
  return grid;
}

InitialSampler initial_from_json(const json& j, std::size_t dim) {
  InitialSampler sampler;
  const auto name = j.value("name", std::string("point"));
  if (name == "point") {
    sampler.kind = InitialSampler::Kind::point;
  } else if (name == "gaussian") {
    sampler.kind = InitialSampler::Kind::gaussian;
  } else if (name == "brownian_history") {
    sampler.kind = InitialSampler::Kind::brownian_history;
  } else {
    throw Error("unknown initial sampler '" + name + "'");
  }
  const json params = j.value("params", json::object());
  sampler.location.assign(dim, 0.0);
  if (params.contains("location")) {
    const auto& loc = params.at("location");
    if (loc.is_number()) {
      sampler.location.assign(dim, loc.get<double>());
    } else {
      sampler.location = loc.get<std::vector<double>>();
    }
  }
  sampler.scale = params.value("scale", sampler.kind == InitialSampler::Kind::point ? 0.0 : 1.0);
  return sampler;
}

Scenario scenario_from_json(const json& j) {
  try {
    Scenario s;
    s.grid = grid_from_json(j.at("grid"));
    s.model = model_from_json(j.at("model"));
    s.n_particles = j.value("n_particles", std::size_t{1});
    s.initial = initial_from_json(j.value("initial", json::object()), s.model.dim);
    s.seed = j.value("seed", std::uint64_t{0});
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("scenario: ") + e.what());
  }
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("cannot parse '" + path.string() + "': " + e.what());
  }
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  std::string out;
  for (unsigned int i = 0; i < length; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string config_hash(const json& j) { return sha256_hex(j.dump()); }

}  // namespace mvdelay
