#include <doctest.h>

#include <filesystem>

#include "specflow/checkpoint.hpp"
#include "specflow/pipeline.hpp"

using namespace specflow;

TEST_CASE("dataset save/load rebuilds identical pairs") {
    Config cfg = Config::defaults();
    cfg.dataset.episodes = 4;
    const Dataset ds = generate_dataset(cfg.env, cfg.dataset, 3);
    const auto dir = std::filesystem::temp_directory_path() / "specflow_test_pipeline";
    std::filesystem::create_directories(dir);
    const ArtifactPaths paths = ArtifactPaths::in(dir);
    save_dataset(ds, paths.dataset);
    const Dataset back = load_dataset(paths.dataset, cfg.dataset);
    REQUIRE(back.demos.size() == ds.demos.size());
    CHECK(back.demos[2].actions == ds.demos[2].actions);
    CHECK(back.demos[2].executed == ds.demos[2].executed);
    CHECK(back.demos[1].seed == ds.demos[1].seed);
    REQUIRE(back.pairs.size() == ds.pairs.size());
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
        CHECK(back.pairs[i].target == ds.pairs[i].target);
        CHECK(back.pairs[i].obs.world_features == ds.pairs[i].obs.world_features);
    }
    CHECK(back.actions.std() == ds.actions.std());
    std::filesystem::remove_all(dir);
}

TEST_CASE("obtain_models without training refuses a missing checkpoint") {
    Config cfg = Config::defaults();
    cfg.out_dir = std::filesystem::temp_directory_path() / "specflow_test_empty";
    std::filesystem::remove_all(cfg.out_dir);
    CHECK_THROWS_AS(obtain_models(cfg, false, nullptr), CheckpointError);
}

TEST_CASE("training provenance carries the fingerprint and seeds") {
    const Config cfg = Config::defaults();
    const auto meta = nlohmann::json::parse(training_meta(cfg));
    CHECK(meta.at("fingerprint") == config_fingerprint(cfg));
    CHECK(meta.at("seeds").at("main") == cfg.main.seed);
}
