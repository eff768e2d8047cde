#include <doctest.h>

#include <fstream>

#include "specflow/config.hpp"

using namespace specflow;

TEST_CASE("built-in defaults equal configs/default.json") {
    const Config file = load_config(SPECFLOW_SOURCE_DIR "/configs/default.json");
    CHECK(to_json(file) == to_json(Config::defaults()));
    CHECK(config_fingerprint(file) == config_fingerprint(Config::defaults()));
}

TEST_CASE("resolved json round trips") {
    const nlohmann::json j = to_json(Config::defaults());
    CHECK(to_json(config_from_json(j)) == j);
    CHECK(config_from_json(nlohmann::json::object()).runtime.replan == 12);
}

TEST_CASE("unknown keys report their path") {
    nlohmann::json j = {{"runtime", {{"verifier", {{"delat", 0.1}}}}}};
    CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("/runtime/verifier/delat"), ConfigError);
}

TEST_CASE("type mismatches report their path") {
    nlohmann::json j = {{"runtime", {{"replan", "twelve"}}}};
    CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("/runtime/replan"), ConfigError);
}

TEST_CASE("invalid values are config errors") {
    nlohmann::json j = {{"runtime", {{"replan", 0}}}};
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    nlohmann::json k = {{"bench", {{"speeds", {"warp"}}}}};
    CHECK_THROWS_AS(config_from_json(k), ConfigError);
}

TEST_CASE("fingerprint ignores key order and io, tracks semantics") {
    const nlohmann::json a = nlohmann::json::parse(R"({"runtime":{"replan":12,"verifier":{"delta":0.15}}})");
    const nlohmann::json b = nlohmann::json::parse(R"({"runtime":{"verifier":{"delta":1.5e-1},"replan":12}})");
    CHECK(config_fingerprint(config_from_json(a)) == config_fingerprint(config_from_json(b)));
    Config c = Config::defaults();
    c.out_dir = "/elsewhere";
    CHECK(config_fingerprint(c) == config_fingerprint(Config::defaults()));
    c.runtime.verifier.delta = 0.2;
    CHECK(config_fingerprint(c) != config_fingerprint(Config::defaults()));
}

TEST_CASE("method labels") {
    const MethodSpec m = MethodSpec::parse("flash/flash_triton");
    CHECK(m.mode == RunMode::flash);
    CHECK(m.label() == "flash/flash_triton");
    CHECK_THROWS(MethodSpec::parse("flash"));
    CHECK(parse_grid("verifier") == GridKind::verifier);
    CHECK_THROWS(parse_grid("everything"));
}

TEST_CASE("malformed file") {
    const auto path = std::filesystem::temp_directory_path() / "specflow_bad_config.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_AS(load_config(path), ConfigError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}
