#include <doctest.h>

#include "specflow/latency.hpp"

using namespace specflow;

TEST_CASE("built-in profile totals") {
    CHECK(round_cost(builtin_profile("torch"), RoundPath::full) == doctest::Approx(58.0).epsilon(1e-12));
    CHECK(round_cost(builtin_profile("triton"), RoundPath::full) == doctest::Approx(39.7).epsilon(1e-12));
    CHECK(round_cost(builtin_profile("flash"), RoundPath::flash) == doctest::Approx(17.9).epsilon(1e-12));
    CHECK(round_cost(builtin_profile("flash_triton"), RoundPath::flash) == doctest::Approx(7.8).epsilon(1e-12));
    CHECK(round_cost(builtin_profile("flash"), RoundPath::full) == doctest::Approx(58.0).epsilon(1e-12));
    CHECK_THROWS(round_cost(builtin_profile("torch"), RoundPath::flash));
    CHECK_THROWS(builtin_profile("tensorrt"));
    CHECK(builtin_profile_names().size() == 4);
}

TEST_CASE("negative stage costs are rejected") {
    CostProfile p = builtin_profile("flash");
    p.flash->verify = -1.0;
    CHECK_THROWS(p.validate());
    p = builtin_profile("torch");
    p.full.prefill = -0.5;
    CHECK_THROWS(p.validate());
}

TEST_CASE("stall ticks round up and tolerate representation error") {
    const LatencyCoupling c;  // 10 ms
    CHECK(stall_ticks(0.0, c) == 0);
    CHECK(stall_ticks(58.0, c) == 6);
    CHECK(stall_ticks(39.7, c) == 4);
    CHECK(stall_ticks(7.8, c) == 1);
    CHECK(stall_ticks(20.0, c) == 2);
    CHECK(stall_ticks(20.000001, c) == 3);
    CHECK(stall_ticks(0.1 + 0.2, LatencyCoupling{0.3}) == 1);
    CHECK_THROWS(stall_ticks(-1.0, c));
    CHECK_THROWS(stall_ticks(1.0, LatencyCoupling{0.0}));
}

TEST_CASE("blended latency") {
    const CostProfile p = builtin_profile("flash_triton");
    const BlendedLatency none = blended_latency(0.0, 0.0, p, 12);
    CHECK(none.latency_ms == doctest::Approx(39.7));
    CHECK(none.per_action_ms == doctest::Approx(39.7 / 12));
    const BlendedLatency all = blended_latency(1.0, 1.0, p, 12);
    CHECK(all.latency_ms == doctest::Approx(7.8));
    const BlendedLatency mix = blended_latency(0.5, 0.5, p, 12);
    CHECK(mix.latency_ms == doctest::Approx(0.5 * 7.8 + 0.5 * 39.7));
    CHECK(mix.per_action_ms == doctest::Approx(mix.latency_ms / 9.0));
    CHECK_THROWS(blended_latency(1.5, 0.5, p, 12));
    CHECK_THROWS(blended_latency(0.5, 0.5, p, 0));
    CHECK_THROWS(blended_latency(0.5, 0.5, builtin_profile("torch"), 12));
}
