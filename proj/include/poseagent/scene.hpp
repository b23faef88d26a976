#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "poseagent/errors.hpp"
#include "poseagent/geometry.hpp"
#include "poseagent/rng.hpp"

namespace poseagent {

/// Per-pixel synthetic prediction: stands in for a learned object-coordinate
/// regressor. `is_outlier` is generator ground truth and never shown to the agent.
struct PixelPrediction {
    double object_prob = 0.0;
    Eigen::Vector3d object_coord = Eigen::Vector3d::Zero();
    Eigen::Vector3d camera_coord = Eigen::Vector3d::Zero();
    bool is_outlier = false;
};

struct SyntheticScene {
    Pose truth;
    ObjectModel model;
    std::vector<PixelPrediction> pixels;
    double noise_sigma = 0.0;
    double outlier_rate = 0.0;
    std::int64_t scene_id = 0;
};

struct SceneConfig {
    int pixel_count = 1000;
    double noise_sigma_frac = 0.025;  // in units of model diameter
    double outlier_rate = 0.78;
    double translation_range = 1.0;
    // Object-probability distributions. The overlap between the two Beta
    // laws sets how often hypothesis sampling picks up an outlier pixel,
    // which in turn controls the fraction of recoverable hypotheses.
    double inlier_prob_alpha = 4.0;
    double inlier_prob_beta = 3.0;
    double outlier_prob_alpha = 3.0;
    double outlier_prob_beta = 4.0;
    double clutter_spread_frac = 0.75;  // clutter half-width, × model diameter
    ObjectModel model;                  // required; see make_random_model
};

struct HypothesisPool {
    std::vector<Pose> hypotheses;
    int pool_size() const { return static_cast<int>(hypotheses.size()); }
};

/// Seeded random point-cloud model, used when no model file is supplied.
inline ObjectModel make_random_model(int vertex_count, double scale, std::uint64_t seed) {
    if (vertex_count < 4) throw ConfigError("model needs at least 4 vertices");
    Rng rng(splitmix64(seed));
    std::vector<Eigen::Vector3d> vertices;
    vertices.reserve(static_cast<std::size_t>(vertex_count));
    for (int i = 0; i < vertex_count; ++i) {
        vertices.emplace_back(uniform_range(rng, -0.5 * scale, 0.5 * scale),
                              uniform_range(rng, -0.5 * scale, 0.5 * scale),
                              uniform_range(rng, -0.5 * scale, 0.5 * scale));
    }
    return make_object_model(std::move(vertices));
}

namespace detail {

inline Eigen::Matrix3d random_rotation(Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
    q.normalize();
    return q.toRotationMatrix();
}

inline double beta_draw(Rng& rng, double alpha, double beta) {
    std::gamma_distribution<double> ga(alpha, 1.0);
    std::gamma_distribution<double> gb(beta, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    const double s = x + y;
    return s > 0.0 ? x / s : 0.5;
}

inline void bounding_box(const ObjectModel& model, Eigen::Vector3d& lo, Eigen::Vector3d& hi) {
    lo = model.vertices.front();
    hi = model.vertices.front();
    for (const auto& v : model.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
}

}  // namespace detail

inline void validate(const SceneConfig& config) {
    if (config.pixel_count < 50) throw ConfigError("scene.pixel_count must be >= 50");
    if (config.noise_sigma_frac < 0.0) throw ConfigError("scene.noise_sigma_frac must be >= 0");
    if (config.outlier_rate < 0.0 || config.outlier_rate >= 1.0)
        throw ConfigError("scene.outlier_rate must be in [0,1)");
    if (config.model.vertices.empty()) throw ConfigError("scene config has no object model");
}

/// Generates a scene with a uniformly drawn ground-truth pose. Inlier pixels
/// carry a true object coordinate (a model vertex) and its noisy camera-space
/// observation; outlier pixels carry unrelated uniform draws with low
/// object probability. Deterministic given (config, seed).
inline SyntheticScene generate_scene(const SceneConfig& config, std::uint64_t seed,
                                     std::int64_t scene_id = 0) {
    validate(config);
    Rng rng(splitmix64(seed));
    std::normal_distribution<double> gauss(0.0, 1.0);

    SyntheticScene scene;
    scene.scene_id = scene_id;
    scene.model = config.model;
    scene.noise_sigma = config.noise_sigma_frac * config.model.diameter;
    scene.outlier_rate = config.outlier_rate;
    scene.truth.rotation = detail::random_rotation(rng);
    scene.truth.translation =
        Eigen::Vector3d(uniform_range(rng, -config.translation_range, config.translation_range),
                        uniform_range(rng, -config.translation_range, config.translation_range),
                        uniform_range(rng, -config.translation_range, config.translation_range));

    Eigen::Vector3d box_lo, box_hi;
    detail::bounding_box(config.model, box_lo, box_hi);
    Eigen::Vector3d object_center = scene.truth.apply(0.5 * (box_lo + box_hi));
    const double spread = config.clutter_spread_frac * config.model.diameter;

    scene.pixels.reserve(static_cast<std::size_t>(config.pixel_count));
    const std::size_t vertex_count = config.model.vertices.size();
    for (int i = 0; i < config.pixel_count; ++i) {
        PixelPrediction pixel;
        pixel.is_outlier = uniform01(rng) < config.outlier_rate;
        if (pixel.is_outlier) {
            for (int k = 0; k < 3; ++k)
                pixel.object_coord[k] = uniform_range(rng, box_lo[k], box_hi[k]);
            for (int k = 0; k < 3; ++k)
                pixel.camera_coord[k] =
                    object_center[k] + uniform_range(rng, -spread, spread);
            pixel.object_prob = detail::beta_draw(rng, config.outlier_prob_alpha, config.outlier_prob_beta);
        } else {
            const auto vi = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(vertex_count));
            pixel.object_coord = config.model.vertices[std::min(vi, vertex_count - 1)];
            Eigen::Vector3d noise(gauss(rng), gauss(rng), gauss(rng));
            pixel.camera_coord = scene.truth.apply(pixel.object_coord) + scene.noise_sigma * noise;
            pixel.object_prob = detail::beta_draw(rng, config.inlier_prob_alpha, config.inlier_prob_beta);
        }
        scene.pixels.push_back(pixel);
    }
    return scene;
}

/// One weighted pixel draw proportional to object probability, skipping
/// banned indices. `total` must equal the sum of unbanned weights.
inline int draw_weighted_pixel(const SyntheticScene& scene, const std::vector<char>& banned,
                               double total, Rng& rng) {
    const double u = uniform01(rng) * total;
    double cum = 0.0;
    int last_valid = -1;
    for (std::size_t i = 0; i < scene.pixels.size(); ++i) {
        if (banned[i]) continue;
        cum += scene.pixels[i].object_prob;
        last_valid = static_cast<int>(i);
        if (u < cum) return last_valid;
    }
    return last_valid;
}

/// Samples N pose hypotheses: three distinct pixels drawn by object
/// probability, solved with Kabsch; degenerate triples are redrawn, up to
/// 100 consecutive times before giving up.
inline HypothesisPool sample_hypothesis_pool(const SyntheticScene& scene, int n, std::uint64_t seed) {
    if (n < 1) throw ConfigError("hypothesis pool size must be >= 1");
    int positive = 0;
    double total_weight = 0.0;
    for (const auto& p : scene.pixels) {
        if (p.object_prob > 0.0) ++positive;
        total_weight += p.object_prob;
    }
    if (positive < 3) throw ConfigError("scene has fewer than 3 pixels with positive object probability");

    Rng rng(splitmix64(seed));
    HypothesisPool pool;
    pool.hypotheses.reserve(static_cast<std::size_t>(n));
    std::vector<char> banned(scene.pixels.size(), 0);

    int consecutive_failures = 0;
    while (pool.pool_size() < n) {
        std::fill(banned.begin(), banned.end(), 0);
        double remaining = total_weight;
        std::vector<Correspondence> triple;
        triple.reserve(3);
        for (int k = 0; k < 3; ++k) {
            const int idx = draw_weighted_pixel(scene, banned, remaining, rng);
            banned[static_cast<std::size_t>(idx)] = 1;
            remaining -= scene.pixels[static_cast<std::size_t>(idx)].object_prob;
            triple.push_back({scene.pixels[static_cast<std::size_t>(idx)].object_coord,
                              scene.pixels[static_cast<std::size_t>(idx)].camera_coord});
        }
        try {
            pool.hypotheses.push_back(kabsch(triple));
            consecutive_failures = 0;
        } catch (const DegenerateInput&) {
            if (++consecutive_failures >= 100)
                throw SamplingExhausted("100 consecutive degenerate hypothesis draws");
        }
    }
    return pool;
}

}  // namespace poseagent
