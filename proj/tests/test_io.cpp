#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "generators.hpp"
#include "mvdelay/config.hpp"
#include "mvdelay/io.hpp"

using namespace mvdelay;

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("config_hash ignores formatting and key order") {
  const auto a = nlohmann::json::parse(R"({"b": 1, "a": [1, 2]})");
  const auto b = nlohmann::json::parse("{\n  \"a\": [1,2],\n  \"b\": 1\n}");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(nlohmann::json::parse(R"({"b": 2, "a": [1, 2]})")));
}

TEST_CASE("CSV layout") {
  CsvTable t{{"step", "value"}, {}, {"step"}};
  t.add({3.0, 0.1});
  t.add({4.0, -2.5e-300});
  const auto text = format_csv(t, {"1.2.3", "abc"});
  CHECK(text ==
        "# mvdelay 1.2.3 config=abc\n"
        "step,value\n"
        "3,1.0000000000000001e-01\n"
        "4,-2.5000000000000000e-300\n");
  CHECK_THROWS_AS(t.add({1.0}), Error);
}

TEST_CASE("JSON output carries provenance") {
  const auto dir = std::filesystem::temp_directory_path() / "mvdelay_io_test";
  std::filesystem::create_directories(dir);
  write_json(dir / "x.json", {{"a", 1}}, {"9.9.9", "ff"});
  std::ifstream in(dir / "x.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["a"] == 1);
  CHECK(j["provenance"]["version"] == "9.9.9");
  CHECK(j["provenance"]["config_sha256"] == "ff");
  std::filesystem::remove_all(dir);
}

TEST_CASE("snapshot round trip") {
  gen::Gen g(8);
  const auto cloud = g.cloud(gen::grid(0.01, 3), 2, 4).with_time(0.37);
  const auto j = snapshot_to_json(cloud);
  CHECK(j["format"] == "mvdelay-snapshot");
  CHECK(snapshot_from_json(j) == cloud);
  CHECK(snapshot_from_json(nlohmann::json::parse(j.dump())) == cloud);
  auto bad = j;
  bad["version"] = 99;
  CHECK_THROWS_AS(snapshot_from_json(bad), Error);
}

TEST_CASE("load_json_file errors") {
  CHECK_THROWS_AS(load_json_file("/nonexistent/file.json"), Error);
  const auto path = std::filesystem::temp_directory_path() / "mvdelay_bad.json";
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_json_file(path), Error);
  std::filesystem::remove(path);
}
