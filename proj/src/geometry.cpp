#include "lprnet/geometry.hpp"

#include "lprnet/cloud.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace lprnet {

Mat3 skew(const Vec3& w) {
    Mat3 m;
    m << 0, -w.z(), w.y(),
         w.z(), 0, -w.x(),
         -w.y(), w.x(), 0;
    return m;
}

const std::array<Mat4, 6>& se3_generators() {
    static const std::array<Mat4, 6> gens = [] {
        std::array<Mat4, 6> g;
        for (auto& m : g) m.setZero();
        // rotations about x, y, z
        g[0](1, 2) = -1; g[0](2, 1) = 1;
        g[1](0, 2) = 1;  g[1](2, 0) = -1;
        g[2](0, 1) = -1; g[2](1, 0) = 1;
        // translations along x, y, z
        g[3](0, 3) = 1;
        g[4](1, 3) = 1;
        g[5](2, 3) = 1;
        return g;
    }();
    return gens;
}

static constexpr double kSmallAngle = 1e-8;

RigidTransform se3_exp(const Twist& twist) {
    if (!twist.finite()) throw std::invalid_argument("se3_exp: non-finite twist");
    const Vec3 w = twist.omega();
    const Vec3 v = twist.vel();
    const double theta = w.norm();
    const Mat3 W = skew(w);
    const Mat3 W2 = W * W;

    Mat3 R, V;
    if (theta < kSmallAngle) {
        R = Mat3::Identity() + W + 0.5 * W2;
        V = Mat3::Identity() + 0.5 * W + (1.0 / 6.0) * W2;
    } else {
        const double t2 = theta * theta;
        const double s = std::sin(theta);
        const double c = std::cos(theta);
        R = Mat3::Identity() + (s / theta) * W + ((1.0 - c) / t2) * W2;
        V = Mat3::Identity() + ((1.0 - c) / t2) * W + ((theta - s) / (t2 * theta)) * W2;
    }
    RigidTransform out;
    out.rotation = R;
    out.translation = V * v;
    return out;
}

Twist se3_log(const RigidTransform& transform) {
    const Mat3& R = transform.rotation;
    const double cos_theta = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    if (theta >= M_PI - 1e-6)
        throw std::domain_error("se3_log: rotation angle at the pi branch cut");

    Vec3 w;
    Mat3 Vinv;
    const Vec3 vee(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
    if (theta < kSmallAngle) {
        w = 0.5 * vee;
        const Mat3 W = skew(w);
        Vinv = Mat3::Identity() - 0.5 * W + (1.0 / 12.0) * W * W;
    } else {
        w = (theta / (2.0 * std::sin(theta))) * vee;
        const Mat3 W = skew(w);
        const double t2 = theta * theta;
        const double a = std::sin(theta) / theta;
        const double b = (1.0 - std::cos(theta)) / t2;
        Vinv = Mat3::Identity() - 0.5 * W + ((1.0 - a / (2.0 * b)) / t2) * W * W;
    }
    Twist out;
    out.xi.head<3>() = w;
    out.xi.tail<3>() = Vinv * transform.translation;
    return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

RigidTransform invert(const RigidTransform& t) {
    RigidTransform out;
    out.rotation = t.rotation.transpose();
    out.translation = -(out.rotation * t.translation);
    return out;
}

RigidTransform reorthonormalize(const RigidTransform& t) {
    Eigen::JacobiSVD<Mat3> svd(t.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 R = svd.matrixU() * svd.matrixV().transpose();
    if (R.determinant() < 0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1;
        R = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    RigidTransform out;
    out.rotation = R;
    out.translation = t.translation;
    return out;
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
    PointCloud out = cloud;
    for (auto& p : out.points) p = t.rotation * p + t.translation;
    return out;
}

std::string transform_to_text(const RigidTransform& t) {
    char buf[64];
    std::string out;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            const double v = (c < 3) ? t.rotation(r, c) : t.translation(r);
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            if (!out.empty()) out += ' ';
            out += buf;
        }
    }
    return out;
}

RigidTransform transform_from_text(const std::string& text) {
    std::istringstream in(text);
    double vals[12];
    for (double& v : vals) {
        if (!(in >> v)) throw std::invalid_argument("transform text: expected 12 numbers");
    }
    RigidTransform t;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) t.rotation(r, c) = vals[r * 4 + c];
        t.translation(r) = vals[r * 4 + 3];
    }
    return t;
}

}  // namespace lprnet
