#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "poseagent/refine.hpp"
#include "poseagent/rng.hpp"

namespace poseagent {

inline constexpr int kFeatureCount = 5;

/// Context features of one hypothesis, all dimensionless: refinement count
/// scaled by tau_max, distances in model diameters, residuals in units of
/// the inlier threshold.
struct FeatureVector {
    double times_refined = 0.0;
    double last_move_distance = 0.0;
    double mean_pool_distance = 0.0;
    double inlier_fraction = 0.0;
    double mean_inlier_residual = 0.0;

    Eigen::Matrix<double, kFeatureCount, 1> to_vector() const {
        Eigen::Matrix<double, kFeatureCount, 1> v;
        v << times_refined, last_move_distance, mean_pool_distance, inlier_fraction,
            mean_inlier_residual;
        return v;
    }
};

/// Fully connected scoring network: 5 inputs, two tanh hidden layers, two
/// linear outputs (E for refinement selection, E' for the final decision).
/// Both heads share every hidden layer.
struct EnergyNet {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;

    int hidden() const { return static_cast<int>(b1.size()); }
    int parameter_count() const {
        return static_cast<int>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() +
                                b3.size());
    }
};

/// Per-thread forward/backward call tallies, for tests that pin the
/// network-call budget of the efficient gradient path.
struct NetCallCounts {
    std::uint64_t forward = 0;
    std::uint64_t backward = 0;
};

inline NetCallCounts& net_call_counts() {
    thread_local NetCallCounts counts;
    return counts;
}

inline EnergyNet make_zero_energy_net(int hidden = 16) {
    EnergyNet net;
    net.w1 = Eigen::MatrixXd::Zero(hidden, kFeatureCount);
    net.b1 = Eigen::VectorXd::Zero(hidden);
    net.w2 = Eigen::MatrixXd::Zero(hidden, hidden);
    net.b2 = Eigen::VectorXd::Zero(hidden);
    net.w3 = Eigen::MatrixXd::Zero(2, hidden);
    net.b3 = Eigen::VectorXd::Zero(2);
    return net;
}

// Canonical parameter ordering: w1 row-major, b1, w2 row-major, b2,
// w3 row-major, b3. Flatten and unflatten below must stay in lockstep
// with each other and with the serialization format.

namespace detail {

template <class Fn>
inline void for_each_parameter(EnergyNet& net, Fn&& fn) {
    for (Eigen::Index r = 0; r < net.w1.rows(); ++r)
        for (Eigen::Index c = 0; c < net.w1.cols(); ++c) fn(net.w1(r, c));
    for (Eigen::Index r = 0; r < net.b1.size(); ++r) fn(net.b1(r));
    for (Eigen::Index r = 0; r < net.w2.rows(); ++r)
        for (Eigen::Index c = 0; c < net.w2.cols(); ++c) fn(net.w2(r, c));
    for (Eigen::Index r = 0; r < net.b2.size(); ++r) fn(net.b2(r));
    for (Eigen::Index r = 0; r < net.w3.rows(); ++r)
        for (Eigen::Index c = 0; c < net.w3.cols(); ++c) fn(net.w3(r, c));
    for (Eigen::Index r = 0; r < net.b3.size(); ++r) fn(net.b3(r));
}

}  // namespace detail

/// Small symmetric init keeps the starting policy near uniform.
inline EnergyNet make_energy_net(int hidden, std::uint64_t seed) {
    EnergyNet net = make_zero_energy_net(hidden);
    Rng rng(splitmix64(seed));
    detail::for_each_parameter(net, [&](double& p) { p = uniform_range(rng, -0.1, 0.1); });
    return net;
}

inline Eigen::VectorXd flatten(const EnergyNet& net) {
    Eigen::VectorXd theta(net.parameter_count());
    Eigen::Index i = 0;
    detail::for_each_parameter(const_cast<EnergyNet&>(net),
                               [&](double& p) { theta(i++) = p; });
    return theta;
}

inline void set_parameters(EnergyNet& net, const Eigen::VectorXd& theta) {
    if (theta.size() != net.parameter_count())
        throw ShapeMismatch("parameter vector length does not match network layout");
    Eigen::Index i = 0;
    detail::for_each_parameter(net, [&](double& p) { p = theta(i++); });
}

/// Deterministic forward pass; returns (E, E').
inline std::pair<double, double> forward(const EnergyNet& net, const FeatureVector& features) {
    ++net_call_counts().forward;
    const Eigen::Matrix<double, kFeatureCount, 1> x = features.to_vector();
    const Eigen::VectorXd h1 = ((net.w1 * x + net.b1).array().tanh()).matrix();
    const Eigen::VectorXd h2 = ((net.w2 * h1 + net.b2).array().tanh()).matrix();
    const Eigen::Vector2d out = net.w3 * h2 + net.b3;
    return {out(0), out(1)};
}

/// Reverse-mode gradient of (upstream_e · E + upstream_e_prime · E') with
/// respect to every parameter, accumulated into `grad` in canonical order.
inline void accumulate_backward(const EnergyNet& net, const FeatureVector& features,
                                double upstream_e, double upstream_e_prime,
                                Eigen::VectorXd& grad) {
    if (grad.size() != net.parameter_count())
        throw ShapeMismatch("gradient vector length does not match network layout");
    ++net_call_counts().backward;

    const Eigen::Matrix<double, kFeatureCount, 1> x = features.to_vector();
    const Eigen::VectorXd h1 = ((net.w1 * x + net.b1).array().tanh()).matrix();
    const Eigen::VectorXd h2 = ((net.w2 * h1 + net.b2).array().tanh()).matrix();

    const Eigen::Vector2d delta3(upstream_e, upstream_e_prime);
    const Eigen::VectorXd d2 =
        (net.w3.transpose() * delta3).cwiseProduct((1.0 - h2.array().square()).matrix());
    const Eigen::VectorXd d1 =
        (net.w2.transpose() * d2).cwiseProduct((1.0 - h1.array().square()).matrix());

    const Eigen::Index h = net.b1.size();
    Eigen::Index i = 0;
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < kFeatureCount; ++c) grad(i++) += d1(r) * x(c);
    for (Eigen::Index r = 0; r < h; ++r) grad(i++) += d1(r);
    for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index c = 0; c < h; ++c) grad(i++) += d2(r) * h1(c);
    for (Eigen::Index r = 0; r < h; ++r) grad(i++) += d2(r);
    for (Eigen::Index r = 0; r < 2; ++r)
        for (Eigen::Index c = 0; c < h; ++c) grad(i++) += delta3(r) * h2(c);
    for (Eigen::Index r = 0; r < 2; ++r) grad(i++) += delta3(r);
}

inline Eigen::VectorXd backward(const EnergyNet& net, const FeatureVector& features,
                                double upstream_e, double upstream_e_prime) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.parameter_count());
    accumulate_backward(net, features, upstream_e, upstream_e_prime, grad);
    return grad;
}

/// Mean vertex-distance (in diameters) from pool entry `index` to every
/// other entry; a static per-hypothesis context feature.
inline double mean_pool_distance(const HypothesisPool& pool, int index, const ObjectModel& model) {
    const int n = pool.pool_size();
    if (n <= 1) return 0.0;
    double sum = 0.0;
    for (int b = 0; b < n; ++b) {
        if (b == index) continue;
        sum += vertex_distance_error(pool.hypotheses[static_cast<std::size_t>(index)],
                                     pool.hypotheses[static_cast<std::size_t>(b)], model);
    }
    return sum / (static_cast<double>(n - 1) * model.diameter);
}

inline std::vector<double> mean_pool_distances(const HypothesisPool& pool, const ObjectModel& model) {
    std::vector<double> out(static_cast<std::size_t>(pool.pool_size()));
    for (int a = 0; a < pool.pool_size(); ++a)
        out[static_cast<std::size_t>(a)] = mean_pool_distance(pool, a, model);
    return out;
}

/// Hot-path featurization with the pool-distance feature precomputed.
inline FeatureVector featurize(const SyntheticScene& scene, double pool_distance_diam,
                               const Pose& pose, double last_move_distance, int tau, int tau_max,
                               double inlier_threshold) {
    FeatureVector f;
    f.times_refined = tau_max > 0 ? static_cast<double>(tau) / static_cast<double>(tau_max) : 0.0;
    f.last_move_distance = tau > 0 ? last_move_distance / scene.model.diameter : 0.0;
    f.mean_pool_distance = pool_distance_diam;

    int count = 0;
    double residual_sum = 0.0;
    for (const auto& pixel : scene.pixels) {
        const double r = (pose.apply(pixel.object_coord) - pixel.camera_coord).norm();
        if (r < inlier_threshold) {
            ++count;
            residual_sum += r;
        }
    }
    f.inlier_fraction = static_cast<double>(count) / static_cast<double>(scene.pixels.size());
    f.mean_inlier_residual =
        count > 0 ? residual_sum / (static_cast<double>(count) * inlier_threshold) : 0.0;
    return f;
}

/// Convenience form matching the hypothesis-state contract: pose is the
/// current pose of pool entry `index`, `history` the refinement that
/// produced it (null for a fresh hypothesis).
inline FeatureVector featurize(const SyntheticScene& scene, const HypothesisPool& pool, int index,
                               const Pose& pose, const RefinementResult* history, int tau,
                               int tau_max, double inlier_threshold) {
    return featurize(scene, mean_pool_distance(pool, index, scene.model), pose,
                     history != nullptr ? history->moved_distance : 0.0, tau, tau_max,
                     inlier_threshold);
}

}  // namespace poseagent
