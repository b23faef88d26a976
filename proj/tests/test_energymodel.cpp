#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "poseagent/energy_net.hpp"
#include "test_util.hpp"

using namespace poseagent;

namespace {

FeatureVector random_features(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FeatureVector f;
    f.times_refined = u(rng);
    f.last_move_distance = 2.0 * u(rng);
    f.mean_pool_distance = 2.0 * u(rng);
    f.inlier_fraction = u(rng);
    f.mean_inlier_residual = u(rng);
    return f;
}

double loss_value(const EnergyNet& net, const FeatureVector& f, double ue, double up) {
    auto [e, ep] = forward(net, f);
    return ue * e + up * ep;
}

}  // namespace

TEST_CASE("zero network outputs zero energies") {
    EnergyNet net = make_zero_energy_net(16);
    FeatureVector f;
    f.inlier_fraction = 0.5;
    auto [e, ep] = forward(net, f);
    CHECK(e == 0.0);
    CHECK(ep == 0.0);
}

TEST_CASE("outputs are bounded by the final layer") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        EnergyNet net = make_energy_net(16, 1000 + trial);
        FeatureVector f = random_features(rng);
        auto [e, ep] = forward(net, f);
        const double bound_e = net.w3.row(0).cwiseAbs().sum() + std::abs(net.b3(0));
        const double bound_ep = net.w3.row(1).cwiseAbs().sum() + std::abs(net.b3(1));
        CHECK(std::abs(e) <= bound_e);
        CHECK(std::abs(ep) <= bound_ep);
    }
}

TEST_CASE("seeded forward pass matches the pinned snapshot") {
    EnergyNet net = make_energy_net(16, 987654321);
    FeatureVector f;
    f.times_refined = 1.0 / 3.0;
    f.last_move_distance = 0.25;
    f.mean_pool_distance = 0.75;
    f.inlier_fraction = 0.4;
    f.mean_inlier_residual = 0.6;
    auto [e, ep] = forward(net, f);
    CHECK(e == Catch::Approx(-0.064337326685861285).margin(1e-15));
    CHECK(ep == Catch::Approx(-0.048995207265717253).margin(1e-15));
}

TEST_CASE("forward is bit-stable") {
    std::mt19937_64 rng(33);
    EnergyNet net = make_energy_net(16, 5);
    FeatureVector f = random_features(rng);
    auto [e1, ep1] = forward(net, f);
    auto [e2, ep2] = forward(net, f);
    CHECK(e1 == e2);
    CHECK(ep1 == ep2);
}

TEST_CASE("backward matches central finite differences") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double h = 1e-5;
    for (int trial = 0; trial < 100; ++trial) {
        EnergyNet net = make_energy_net(16, 2000 + trial);
        FeatureVector f = random_features(rng);
        const double ue = u(rng);
        const double up = u(rng);

        Eigen::VectorXd analytic = backward(net, f, ue, up);
        Eigen::VectorXd theta = flatten(net);
        double max_rel = 0.0;
        for (Eigen::Index j = 0; j < theta.size(); ++j) {
            Eigen::VectorXd tp = theta, tm = theta;
            tp(j) += h;
            tm(j) -= h;
            EnergyNet np = net, nm = net;
            set_parameters(np, tp);
            set_parameters(nm, tm);
            const double fd = (loss_value(np, f, ue, up) - loss_value(nm, f, ue, up)) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(analytic(j)), 1e-10});
            max_rel = std::max(max_rel, std::abs(fd - analytic(j)) / denom);
        }
        REQUIRE(max_rel < 1e-5);
    }
}

TEST_CASE("backward is linear in the upstream") {
    std::mt19937_64 rng(43);
    EnergyNet net = make_energy_net(16, 77);
    FeatureVector f = random_features(rng);

    Eigen::VectorXd zero = backward(net, f, 0.0, 0.0);
    CHECK(zero.cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd a = backward(net, f, 0.7, -0.2);
    Eigen::VectorXd b = backward(net, f, -0.3, 0.9);
    Eigen::VectorXd sum = backward(net, f, 0.4, 0.7);
    CHECK((a + b - sum).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("flatten and set_parameters round-trip") {
    EnergyNet net = make_energy_net(16, 123);
    Eigen::VectorXd theta = flatten(net);
    CHECK(theta.size() == net.parameter_count());
    EnergyNet other = make_zero_energy_net(16);
    set_parameters(other, theta);
    CHECK((flatten(other) - theta).cwiseAbs().maxCoeff() == 0.0);

    Eigen::VectorXd wrong(theta.size() + 1);
    CHECK_THROWS_AS(set_parameters(other, wrong), ShapeMismatch);
}

TEST_CASE("featurize on a fresh hypothesis") {
    SceneConfig config;
    config.model = make_random_model(64, 1.0, 12345);
    SyntheticScene scene = generate_scene(config, 50);
    HypothesisPool pool = sample_hypothesis_pool(scene, 8, 1);
    FeatureVector f = featurize(scene, pool, 0, pool.hypotheses[0], nullptr, 0, 3,
                                default_inlier_threshold(scene));
    CHECK(f.times_refined == 0.0);
    CHECK(f.last_move_distance == 0.0);
    CHECK(f.mean_pool_distance > 0.0);
}

TEST_CASE("featurize at the truth pose of a noiseless scene") {
    SceneConfig config;
    config.model = make_random_model(64, 1.0, 12345);
    config.noise_sigma_frac = 0.0;
    config.outlier_rate = 0.4;
    SyntheticScene scene = generate_scene(config, 51);
    HypothesisPool pool = sample_hypothesis_pool(scene, 4, 2);

    int inlier_pixels = 0;
    for (const auto& pixel : scene.pixels)
        if (!pixel.is_outlier) ++inlier_pixels;

    FeatureVector f = featurize(scene, pool, 0, scene.truth, nullptr, 0, 3,
                                default_inlier_threshold(scene));
    CHECK(f.inlier_fraction ==
          Catch::Approx(static_cast<double>(inlier_pixels) / scene.pixels.size()).margin(1e-12));
    CHECK(f.mean_inlier_residual == 0.0);
}

TEST_CASE("identical poses share the pool-distance feature") {
    SceneConfig config;
    config.model = make_random_model(64, 1.0, 12345);
    SyntheticScene scene = generate_scene(config, 52);
    HypothesisPool pool = sample_hypothesis_pool(scene, 6, 3);
    pool.hypotheses[2] = pool.hypotheses[5];
    std::vector<double> distances = mean_pool_distances(pool, scene.model);
    CHECK(distances[2] == Catch::Approx(distances[5]).epsilon(1e-12));
}
