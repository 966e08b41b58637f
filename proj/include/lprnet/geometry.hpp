#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>

namespace lprnet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat4 = Eigen::Matrix4d;

struct PointCloud;

// se(3) twist: (w1, w2, w3) rotation in radians, (v1, v2, v3) translation in meters.
struct Twist {
    Vec6 xi = Vec6::Zero();

    Twist() = default;
    explicit Twist(const Vec6& v) : xi(v) {}
    Twist(double w1, double w2, double w3, double v1, double v2, double v3) {
        xi << w1, w2, w3, v1, v2, v3;
    }

    Vec3 omega() const { return xi.head<3>(); }
    Vec3 vel() const { return xi.tail<3>(); }
    double norm() const { return xi.norm(); }
    bool finite() const { return xi.allFinite(); }
};

// Rigid transform p -> R*p + t. Rotation kept orthonormal.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

    Mat4 homogeneous() const {
        Mat4 h = Mat4::Identity();
        h.topLeftCorner<3, 3>() = rotation;
        h.topRightCorner<3, 1>() = translation;
        return h;
    }
};

// The six 4x4 basis matrices of se(3). Ordering is fixed:
// generators 0..2 rotate about x, y, z; generators 3..5 translate along x, y, z.
const std::array<Mat4, 6>& se3_generators();

Mat3 skew(const Vec3& w);

// Closed-form exponential map (Rodrigues rotation, closed-form V matrix for the
// translation). Twists with ||omega|| < 1e-8 take the series branch.
// Throws std::invalid_argument on non-finite input.
RigidTransform se3_exp(const Twist& twist);

// Inverse of se3_exp. Requires rotation angle < pi; throws std::domain_error
// within 1e-6 of the branch cut.
Twist se3_log(const RigidTransform& transform);

// compose(a, b): apply b first, then a (homogeneous matrix product a*b).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform invert(const RigidTransform& t);

// Projects the rotation back onto SO(3); used after long composition chains.
RigidTransform reorthonormalize(const RigidTransform& t);

// Applies R*p + t to every point; attributes and point order are preserved.
PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud);

// 12-number row-major text form of the 3x4 matrix [R | t], full precision.
std::string transform_to_text(const RigidTransform& t);
RigidTransform transform_from_text(const std::string& text);

}  // namespace lprnet
