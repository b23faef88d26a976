#pragma once

#include <vector>

#include "poseagent/geometry.hpp"
#include "poseagent/scene.hpp"

namespace poseagent {

struct RefinementResult {
    Pose refined_pose;
    int steps_used = 0;                // m^t, the budget this call consumes
    std::vector<int> inlier_counts;    // one entry per inner probe
    double moved_distance = 0.0;       // vertex distance between input and output pose
};

/// 2.5 sigma of the scene noise; falls back to a sliver of the model
/// diameter for noise-free scenes where any positive threshold is exact.
inline double default_inlier_threshold(const SyntheticScene& scene) {
    return scene.noise_sigma > 0.0 ? 2.5 * scene.noise_sigma : 1e-6 * scene.model.diameter;
}

/// Indices of pixels whose predicted object coordinate, mapped by `pose`,
/// lands within `inlier_threshold` of the observed camera coordinate.
inline std::vector<int> find_inliers(const SyntheticScene& scene, const Pose& pose,
                                     double inlier_threshold) {
    if (!(inlier_threshold > 0.0)) throw ConfigError("inlier_threshold must be > 0");
    std::vector<int> inliers;
    for (std::size_t i = 0; i < scene.pixels.size(); ++i) {
        const auto& pixel = scene.pixels[i];
        if ((pose.apply(pixel.object_coord) - pixel.camera_coord).norm() < inlier_threshold)
            inliers.push_back(static_cast<int>(i));
    }
    return inliers;
}

/// Iterated inlier re-fit: find inliers, Kabsch on them, repeat until the
/// inlier count stops strictly increasing or m_max steps are spent. Each
/// attempted re-fit costs one step, including re-fits that cannot run
/// because fewer than three (or degenerate) inliers were found — the agent
/// is charged for the attempt either way.
inline RefinementResult refine(const SyntheticScene& scene, const Pose& pose, int m_max,
                               double inlier_threshold) {
    if (m_max < 1) throw ConfigError("m_max must be >= 1");
    RefinementResult result;
    result.refined_pose = pose;

    int previous_count = -1;
    while (true) {
        const std::vector<int> inliers = find_inliers(scene, result.refined_pose, inlier_threshold);
        const int count = static_cast<int>(inliers.size());
        result.inlier_counts.push_back(count);
        if (previous_count >= 0 && count <= previous_count) break;
        previous_count = count;

        if (count >= 3) {
            std::vector<Correspondence> correspondences;
            correspondences.reserve(inliers.size());
            for (int idx : inliers)
                correspondences.push_back({scene.pixels[static_cast<std::size_t>(idx)].object_coord,
                                           scene.pixels[static_cast<std::size_t>(idx)].camera_coord});
            try {
                result.refined_pose = kabsch(correspondences);
            } catch (const DegenerateInput&) {
                // pose unchanged for this step
            }
        }
        if (++result.steps_used >= m_max) break;
    }

    result.moved_distance = vertex_distance_error(pose, result.refined_pose, scene.model);
    return result;
}

}  // namespace poseagent
