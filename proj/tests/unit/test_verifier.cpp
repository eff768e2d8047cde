#include <doctest.h>

#include <vector>

#include "fixtures.hpp"
#include "specflow/oracle.hpp"
#include "specflow/phase.hpp"
#include "specflow/verifier.hpp"

using namespace specflow;

namespace {

int leading_run(const std::vector<double>& d, double delta) {
    int n = 0;
    for (double x : d) {
        if (!(x <= delta)) break;
        ++n;
    }
    return n;
}

ActionChunk chunk_with_gripper(std::vector<double> g) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.size()), 3);
    for (std::size_t i = 0; i < g.size(); ++i) m(static_cast<Eigen::Index>(i), 2) = g[i];
    return ActionChunk(m, ChannelLayout{}, ActionSpace::standardized);
}

}  // namespace

TEST_CASE("prefix length over every pass/fail pattern at H=8") {
    for (int mask = 0; mask < 256; ++mask) {
        std::vector<double> d(8);
        for (int h = 0; h < 8; ++h) d[static_cast<std::size_t>(h)] = (mask >> h) & 1 ? 0.2 : 0.1;
        CHECK(prefix_length(d, 0.15) == leading_run(d, 0.15));
    }
}

TEST_CASE("prefix length edge cases") {
    CHECK(prefix_length(std::vector<double>{}, 0.1) == 0);
    CHECK(prefix_length(std::vector<double>{0.1, 0.1}, 0.1) == 2);  // inclusive threshold
    CHECK(prefix_length(std::vector<double>{0.0, 0.2, 0.0}, 0.1) == 1);
    CHECK(prefix_length(std::vector<double>{0.0, 0.0}, 0.0) == 2);
}

TEST_CASE("evenly spaced timesteps") {
    const auto t = evenly_spaced_timesteps(2);
    REQUIRE(t.size() == 2);
    CHECK(t[0] == doctest::Approx(1.0 / 3.0));
    CHECK(t[1] == doctest::Approx(2.0 / 3.0));
    CHECK(evenly_spaced_timesteps(1)[0] == 0.5);
    CHECK_THROWS(evenly_spaced_timesteps(0));
}

TEST_CASE("verifier config validation") {
    VerifierConfig c;
    CHECK_NOTHROW(c.validate());
    c.timesteps = {0.5, 0.4};
    CHECK_THROWS(c.validate());
    c.timesteps = {0.0};
    CHECK_THROWS(c.validate());
    c.timesteps = {1.0};
    CHECK_THROWS(c.validate());
    c.timesteps = {0.5};
    c.delta = -0.1;
    CHECK_THROWS(c.validate());
}

TEST_CASE("straight-line oracle accepts the whole draft") {
    Rng rng(31);
    const ActionChunk draft(gaussian_matrix(50, 3, rng), ChannelLayout{}, ActionSpace::standardized);
    const StraightLineField field(draft);
    for (int k : {1, 2, 4}) {
        VerifierConfig cfg;
        cfg.timesteps = evenly_spaced_timesteps(k);
        const VerifierReport r = verify(field, draft, ConditioningCache{}, Eigen::VectorXd::Zero(3), cfg, 1, 77);
        CHECK(r.prefix == 50);
        CHECK(r.distances.maxCoeff() <= 1e-9);
        CHECK(r.branch_prefixes.size() == static_cast<std::size_t>(k));
        CHECK(r.velocity_evaluations == k);
    }
}

TEST_CASE("prefix is the minimum over branches") {
    Rng rng(32);
    const ActionChunk target(gaussian_matrix(10, 3, rng), ChannelLayout{}, ActionSpace::standardized);
    Eigen::MatrixXd off = target.values();
    off(6, 0) += 1.0;  // draft leaves the oracle path at step 7
    const ActionChunk draft(off, ChannelLayout{}, ActionSpace::standardized);
    const StraightLineField field(target);
    VerifierConfig cfg;
    cfg.timesteps = {0.25, 0.5, 0.75};
    const VerifierReport r = verify(field, draft, ConditioningCache{}, Eigen::VectorXd::Zero(3), cfg, 1, 3);
    for (int lk : r.branch_prefixes) CHECK(lk == 6);
    CHECK(r.prefix == 6);
    // Straight-line reconstruction returns the target, so distances are the draft error.
    CHECK(r.distances(0, 6) == doctest::Approx(1.0));
}

TEST_CASE("shared noise makes parallel and serial verification identical") {
    Rng rng(33);
    const fixtures::PolicyShape shape = fixtures::tiny_shape(8);
    const FlowPolicy field(shape, FlowPolicy::Architecture{{5}, {7}}, rng);
    const ConditioningCache cache = field.encode_context(fixtures::random_obs(rng));
    const ActionChunk draft(gaussian_matrix(8, 3, rng), shape.layout, ActionSpace::standardized);
    VerifierConfig serial;
    serial.timesteps = evenly_spaced_timesteps(4);
    serial.delta = 0.8;
    VerifierConfig parallel = serial;
    parallel.parallel = true;
    const Eigen::VectorXd s = Eigen::VectorXd::Zero(3);
    const VerifierReport a = verify(field, draft, cache, s, serial, 1, 1234);
    const VerifierReport b = verify(field, draft, cache, s, parallel, 1, 1234);
    CHECK(a.distances == b.distances);
    CHECK(a.prefix == b.prefix);
    CHECK(a.noise_seed == 1234);
}

TEST_CASE("verify rejects raw drafts") {
    const ActionChunk raw = ActionChunk::zeros(4, ChannelLayout{}, ActionSpace::raw);
    const StraightLineField field(ActionChunk::zeros(4, ChannelLayout{}, ActionSpace::standardized));
    CHECK_THROWS(verify(field, raw, ConditioningCache{}, Eigen::VectorXd::Zero(3), VerifierConfig{}, 1, 0));
}

TEST_CASE("reconstruction at tau on the oracle path is exact") {
    Rng rng(34);
    const ActionChunk target(gaussian_matrix(5, 3, rng), ChannelLayout{}, ActionSpace::standardized);
    const ActionChunk noise(gaussian_matrix(5, 3, rng), ChannelLayout{}, ActionSpace::standardized);
    const StraightLineField field(target);
    const ActionChunk mid = interpolate(target, noise, 0.4);
    CHECK((mid.values() - (0.4 * target.values() + 0.6 * noise.values())).cwiseAbs().maxCoeff() < 1e-15);
    const ActionChunk rec = reconstruct_endpoint(field, target, noise, 0.4, ConditioningCache{}, Eigen::VectorXd::Zero(3));
    CHECK((rec.values() - target.values()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gripper switch detection") {
    const ActionChunk open = chunk_with_gripper({-1, -1, -1, -1});
    const ActionChunk late = chunk_with_gripper({-1, -1, -1, 1});
    const ActionChunk zero = chunk_with_gripper({-1, 0, -1, -1});
    std::vector<const ActionChunk*> one{&open};
    CHECK_FALSE(detect_gripper_switch(one, -1));
    CHECK(detect_gripper_switch(one, 1));
    std::vector<const ActionChunk*> two{&open, &late};
    CHECK(detect_gripper_switch(two, -1));
    CHECK_FALSE(detect_gripper_switch(two, -1, 3));  // outside the window
    std::vector<const ActionChunk*> z{&zero};
    CHECK(detect_gripper_switch(z, -1));  // zero counts as a switch
    CHECK_THROWS(detect_gripper_switch(one, 0));
    CHECK(gripper_sign(0.3) == 1);
    CHECK(gripper_sign(0.0) == -1);
}
