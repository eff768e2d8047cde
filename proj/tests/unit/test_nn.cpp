#include <doctest.h>

#include <cmath>

#include "specflow/nn.hpp"

using namespace specflow;
using namespace specflow::nn;

namespace {

// L = 0.5 * sum(out .* out * coeff) for a fixed coefficient matrix.
double probe_loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& coeff) {
    const Eigen::MatrixXd y = forward(net, x);
    return 0.5 * (y.array().square() * coeff.array()).sum();
}

}  // namespace

TEST_CASE("mlp shapes and parameter count") {
    Rng rng(1);
    const Mlp net = make_mlp({4, 8, 3}, rng);
    CHECK(net.input_size() == 4);
    CHECK(net.output_size() == 3);
    CHECK(net.parameter_count() == 4 * 8 + 8 + 8 * 3 + 3);
    CHECK(flatten_parameters(net).size() == static_cast<Eigen::Index>(net.parameter_count()));
}

TEST_CASE("parameters flatten and assign round trip") {
    Rng rng(2);
    Mlp net = make_mlp({3, 5, 2}, rng);
    const Eigen::VectorXd p = flatten_parameters(net);
    Mlp other = make_zero_mlp({3, 5, 2});
    assign_parameters(other, p);
    CHECK(flatten_parameters(other) == p);
    CHECK_THROWS(assign_parameters(other, Eigen::VectorXd::Zero(3)));
}

TEST_CASE("backward matches central differences") {
    Rng rng(5);
    Mlp net = make_mlp({5, 7, 6, 3}, rng);
    const Eigen::MatrixXd x = gaussian_matrix(5, 4, rng);
    const Eigen::MatrixXd coeff = gaussian_matrix(3, 4, rng);

    Tape tape;
    const Eigen::MatrixXd y = forward(net, x, &tape);
    Eigen::MatrixXd input_grad;
    const Gradients g = backward(net, tape, y.cwiseProduct(coeff), &input_grad);
    const Eigen::VectorXd analytic = flatten_gradients(g);

    const Eigen::VectorXd p = flatten_parameters(net);
    const double h = 1e-6;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        Eigen::VectorXd q = p;
        q(i) += h;
        assign_parameters(net, q);
        const double up = probe_loss(net, x, coeff);
        q(i) -= 2 * h;
        assign_parameters(net, q);
        const double down = probe_loss(net, x, coeff);
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(numeric - analytic(i)) / std::max(1e-3, std::abs(numeric) + std::abs(analytic(i))));
    }
    assign_parameters(net, p);
    CHECK(worst < 1e-6);

    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            Eigen::MatrixXd xp = x, xm = x;
            xp(r, c) += h;
            xm(r, c) -= h;
            const double numeric = (probe_loss(net, xp, coeff) - probe_loss(net, xm, coeff)) / (2 * h);
            CHECK(input_grad(r, c) == doctest::Approx(numeric).epsilon(1e-5));
        }
    }
}

TEST_CASE("single-sample forward agrees with batch forward") {
    Rng rng(6);
    const Mlp net = make_mlp({4, 6, 2}, rng);
    const Eigen::MatrixXd x = gaussian_matrix(4, 3, rng);
    const Eigen::MatrixXd y = forward(net, x);
    for (int c = 0; c < 3; ++c) {
        const Eigen::VectorXd yc = forward(net, Eigen::VectorXd(x.col(c)));
        CHECK((yc - y.col(c)).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("adamw first step matches hand computation") {
    Mlp net = make_zero_mlp({1, 1});
    net.weights[0](0, 0) = 2.0;
    net.biases[0](0) = -1.0;
    AdamWParams p{0.1, 0.5, 0.9, 0.999, 1e-8};
    AdamW opt(net, p);
    Gradients g = Gradients::zeros_like(net);
    g.weights[0](0, 0) = 0.4;
    g.biases[0](0) = -3.0;
    opt.step(net, g);
    // Bias-corrected moments equal g and g^2 on step 1, so the update is sign(g).
    const double w = 2.0 - 0.1 * (0.4 / (0.4 + 1e-8) + 0.5 * 2.0);
    const double b = -1.0 - 0.1 * (-3.0 / (3.0 + 1e-8) + 0.5 * -1.0);
    CHECK(net.weights[0](0, 0) == doctest::Approx(w).epsilon(1e-12));
    CHECK(net.biases[0](0) == doctest::Approx(b).epsilon(1e-12));
    CHECK(opt.step_count() == 1);
}

TEST_CASE("adamw decay acts with zero gradient") {
    Mlp net = make_zero_mlp({1, 1});
    net.weights[0](0, 0) = 1.0;
    AdamW opt(net, AdamWParams{0.1, 0.2});
    const Gradients g = Gradients::zeros_like(net);
    opt.step(net, g);
    CHECK(net.weights[0](0, 0) == doctest::Approx(1.0 - 0.1 * 0.2).epsilon(1e-12));
}

TEST_CASE("adamw minimises a quadratic") {
    Rng rng(8);
    Mlp net = make_mlp({2, 1}, rng);
    AdamW opt(net, AdamWParams{0.05, 0.0});
    for (int i = 0; i < 2000; ++i) {
        Gradients g = Gradients::zeros_like(net);
        g.weights[0] = 2.0 * (net.weights[0] - Eigen::MatrixXd::Constant(1, 2, 3.0));
        g.biases[0] = 2.0 * (net.biases[0] - Eigen::VectorXd::Constant(1, -1.0));
        opt.step(net, g);
    }
    CHECK(net.weights[0](0, 0) == doctest::Approx(3.0).epsilon(1e-3));
    CHECK(net.biases[0](0) == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("cosine schedule endpoints") {
    CHECK(cosine_schedule(0, 100, 0.1) == doctest::Approx(1.0));
    CHECK(cosine_schedule(100, 100, 0.1) == doctest::Approx(0.1));
    CHECK(cosine_schedule(50, 100, 0.0) == doctest::Approx(0.5));
}
