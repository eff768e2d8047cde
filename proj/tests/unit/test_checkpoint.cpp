#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "fixtures.hpp"
#include "specflow/checkpoint.hpp"

using namespace specflow;

namespace {

Checkpoint small() {
    Checkpoint c;
    c.meta_json = R"({"kind":"test"})";
    Eigen::MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, 6.5;
    c.put("m", m);
    c.put("v", Eigen::VectorXd(Eigen::VectorXd::LinSpaced(4, -1, 1)));
    return c;
}

}  // namespace

TEST_CASE("container round trip") {
    const Checkpoint c = decode_checkpoint(encode_checkpoint(small()));
    CHECK(c.meta_json == R"({"kind":"test"})");
    CHECK(c.matrix("m")(1, 2) == 6.5);
    CHECK(c.vector("v")(3) == 1.0);
    CHECK(c.contains("v"));
    CHECK_FALSE(c.contains("w"));
    CHECK_THROWS_AS(c.at("w"), CheckpointError);
}

TEST_CASE("truncated and corrupted files are refused") {
    const auto bytes = encode_checkpoint(small());
    for (std::size_t cut : {std::size_t{3}, std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
        std::vector<std::uint8_t> t(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        CHECK_THROWS_AS(decode_checkpoint(t), CheckpointError);
    }
    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    CHECK_THROWS_WITH_AS(decode_checkpoint(flipped), doctest::Contains("checksum"), CheckpointError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_WITH_AS(decode_checkpoint(magic), doctest::Contains("magic"), CheckpointError);
}

TEST_CASE("format version mismatch names both versions") {
    auto bytes = encode_checkpoint(small());
    bytes[8] = 9;  // version follows the 8-byte magic
    CHECK_THROWS_WITH_AS(decode_checkpoint(bytes), doctest::Contains("version 9"), CheckpointError);
}

TEST_CASE("models round trip to bit-identical outputs") {
    const PolicyModels models = fixtures::conveyor_models(4, 12);
    const auto dir = std::filesystem::temp_directory_path() / "specflow_test_ckpt";
    std::filesystem::create_directories(dir);
    const auto path = dir / "models.ckpt";
    save_checkpoint(pack_models(models, R"({"note":"x"})"), path);
    const Checkpoint loaded_ckpt = load_checkpoint(path);
    CHECK(nlohmann::json::parse(loaded_ckpt.meta_json).at("note") == "x");
    const PolicyModels loaded = unpack_models(loaded_ckpt);

    Rng rng(8);
    const Observation obs = fixtures::random_obs(rng, 1);
    const ConditioningCache a = models.main.encode_context(obs);
    const ConditioningCache b = loaded.main.encode_context(obs);
    CHECK(a.embedding == b.embedding);
    const ActionChunk noisy(gaussian_matrix(12, 3, rng), conveyor_layout(), ActionSpace::standardized);
    CHECK(models.main.velocity(noisy, 0.3, a, obs.robot_state).values() ==
          loaded.main.velocity(noisy, 0.3, b, obs.robot_state).values());
    REQUIRE(loaded.draft.has_value());
    CHECK(models.draft->propose(obs).values() == loaded.draft->propose(obs).values());
    CHECK(loaded.actions.mean() == models.actions.mean());

    PolicyModels no_draft{models.main, std::nullopt, models.actions};
    CHECK_FALSE(unpack_models(pack_models(no_draft)).draft.has_value());
    std::filesystem::remove_all(dir);
}

TEST_CASE("missing file is a checkpoint error") {
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/specflow.ckpt"), CheckpointError);
}
