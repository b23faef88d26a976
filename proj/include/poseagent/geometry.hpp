#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "poseagent/errors.hpp"

namespace poseagent {

/// Rigid transform mapping object-frame points into the camera frame.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    static Pose identity() { return Pose{}; }

    Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
};

inline Eigen::Vector3d apply_pose(const Pose& pose, const Eigen::Vector3d& p) {
    return pose.apply(p);
}

/// outer ∘ inner: apply `inner` first, then `outer`.
inline Pose compose(const Pose& outer, const Pose& inner) {
    Pose out;
    out.rotation = outer.rotation * inner.rotation;
    out.translation = outer.rotation * inner.translation + outer.translation;
    return out;
}

inline Pose inverse(const Pose& pose) {
    Pose out;
    out.rotation = pose.rotation.transpose();
    out.translation = -(out.rotation * pose.translation);
    return out;
}

/// Projects the rotation back onto SO(3) via SVD. Used after long
/// refinement chains to keep accumulated round-off out of the invariants.
inline Pose orthonormalized(const Pose& pose) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(pose.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
    Pose out = pose;
    out.rotation = svd.matrixU() * d * svd.matrixV().transpose();
    return out;
}

/// Angle in radians of the relative rotation between two rotation matrices.
/// atan2 of the skew/trace parts keeps full precision near zero, where
/// the plain acos formula bottoms out around sqrt(machine epsilon).
inline double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
    const Eigen::Matrix3d r = a.transpose() * b;
    const Eigen::Vector3d axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    const double sin_angle = 0.5 * axis.norm();
    const double cos_angle = 0.5 * (r.trace() - 1.0);
    return std::atan2(sin_angle, cos_angle);
}

/// A predicted object-frame point paired with its observed camera-frame point.
struct Correspondence {
    Eigen::Vector3d object_point;
    Eigen::Vector3d camera_point;
};

/// Point-cloud object model; diameter is the maximum pairwise vertex distance.
struct ObjectModel {
    std::vector<Eigen::Vector3d> vertices;
    double diameter = 0.0;
};

inline double compute_diameter(const std::vector<Eigen::Vector3d>& vertices) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i)
        for (std::size_t j = i + 1; j < vertices.size(); ++j)
            d2 = std::max(d2, (vertices[i] - vertices[j]).squaredNorm());
    return std::sqrt(d2);
}

namespace detail {

/// Singular values (descending) of the centered 3×N point matrix. Taken on
/// the matrix itself, not its scatter, so exact duplicates and collinear
/// sets register at machine precision rather than sqrt(eps).
template <class GetPoint>
inline Eigen::Vector3d centered_singular_values(std::size_t n, GetPoint&& point) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < n; ++i) centroid += point(i);
    centroid /= static_cast<double>(n);
    Eigen::Matrix3Xd centered(3, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        centered.col(static_cast<Eigen::Index>(i)) = point(i) - centroid;
    Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
    return svd.singularValues();
}

}  // namespace detail

/// Builds a model, validating ≥4 non-coplanar vertices and positive diameter.
inline ObjectModel make_object_model(std::vector<Eigen::Vector3d> vertices) {
    if (vertices.size() < 4) throw ConfigError("object model needs at least 4 vertices");
    const Eigen::Vector3d sv = detail::centered_singular_values(
        vertices.size(), [&](std::size_t i) { return vertices[i]; });
    if (sv(0) <= 0.0 || sv(2) < 1e-9 * sv(0))
        throw ConfigError("object model vertices are coplanar");
    ObjectModel model;
    model.vertices = std::move(vertices);
    model.diameter = compute_diameter(model.vertices);
    if (!(model.diameter > 0.0)) throw ConfigError("object model diameter must be positive");
    return model;
}

/// Least-squares rigid transform mapping object points onto camera points.
///
/// Centers both point sets, takes the SVD of the cross-covariance and
/// corrects the sign of the smallest singular direction so the result is
/// always a proper rotation, even for mirrored or near-planar inputs.
inline Pose kabsch(std::span<const Correspondence> correspondences) {
    const std::size_t n = correspondences.size();
    if (n < 3) throw DegenerateInput("kabsch needs at least 3 correspondences");

    Eigen::Vector3d obj_centroid = Eigen::Vector3d::Zero();
    Eigen::Vector3d cam_centroid = Eigen::Vector3d::Zero();
    for (const auto& c : correspondences) {
        obj_centroid += c.object_point;
        cam_centroid += c.camera_point;
    }
    obj_centroid /= static_cast<double>(n);
    cam_centroid /= static_cast<double>(n);

    Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();    // Σ (q-q̄)(p-p̄)ᵀ
    for (const auto& c : correspondences) {
        const Eigen::Vector3d p = c.object_point - obj_centroid;
        const Eigen::Vector3d q = c.camera_point - cam_centroid;
        cross += q * p.transpose();
    }

    // Collinear object points leave the rotation underdetermined.
    const Eigen::Vector3d sv = detail::centered_singular_values(
        n, [&](std::size_t i) { return correspondences[i].object_point; });
    if (sv(0) <= 0.0 || sv(1) < 1e-9 * sv(0))
        throw DegenerateInput("kabsch: collinear object points");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;

    Pose pose;
    pose.rotation = svd.matrixU() * d * svd.matrixV().transpose();
    pose.translation = cam_centroid - pose.rotation * obj_centroid;
    return pose;
}

inline Pose kabsch(const std::vector<Correspondence>& correspondences) {
    return kabsch(std::span<const Correspondence>(correspondences));
}

/// Mean distance between model vertices mapped by the two poses.
inline double vertex_distance_error(const Pose& estimate, const Pose& truth, const ObjectModel& model) {
    double sum = 0.0;
    for (const auto& v : model.vertices) sum += (estimate.apply(v) - truth.apply(v)).norm();
    return sum / static_cast<double>(model.vertices.size());
}

/// Standard point-distance correctness criterion: mean vertex error below a
/// fraction of the model diameter.
inline bool is_pose_correct(const Pose& estimate, const Pose& truth, const ObjectModel& model,
                            double threshold_fraction = 0.1) {
    return vertex_distance_error(estimate, truth, model) < threshold_fraction * model.diameter;
}

}  // namespace poseagent
