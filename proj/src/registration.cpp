#include "lprnet/registration.hpp"

#include "lprnet/errors.hpp"
#include "lprnet/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lprnet {

void ICLKConfig::validate() const {
    if (!(step > 0.0)) throw std::invalid_argument("iclk config: step must be positive");
    if (max_iterations < 1) {
        throw std::invalid_argument("iclk config: max_iterations must be at least 1");
    }
    if (!(tolerance > 0.0)) throw std::invalid_argument("iclk config: tolerance must be positive");
    if (!(svd_cutoff > 0.0)) {
        throw std::invalid_argument("iclk config: svd_cutoff must be positive");
    }
}

namespace {

RigidTransform from_generator_step(int i, double t) {
    Vec6 xi = Vec6::Zero();
    xi[i] = t;
    return se3_exp(Twist(xi));
}

Eigen::VectorXd checked_eval(const FeatureMap& feature, const PointCloud& cloud,
                             const char* where) {
    Eigen::VectorXd v = feature.eval(cloud);
    if (v.size() != feature.dimension) {
        throw FeatureFault(std::string(where) + ": feature returned " + std::to_string(v.size()) +
                           " values, map declares " + std::to_string(feature.dimension));
    }
    if (!v.allFinite()) {
        throw FeatureFault(std::string(where) + ": feature produced non-finite values");
    }
    return v;
}

// world = denorm ∘ H_normalized ∘ norm, with norm(p) = (p - c)/s
RigidTransform denormalize_transform(const RigidTransform& h, const NormRecord& rec) {
    RigidTransform out;
    out.rotation = h.rotation;
    out.translation = rec.scale * h.translation + rec.centroid - h.rotation * rec.centroid;
    return out;
}

}  // namespace

FeatureMap analytic_moment_feature(int order) {
    if (order < 1 || order > 3) {
        throw std::invalid_argument("analytic_moment_feature: order must be 1, 2, or 3");
    }
    const int dims[] = {0, 3, 9, 19};
    FeatureMap f;
    f.dimension = dims[order];
    f.has_closed_form_jacobian = true;
    f.eval = [order, dim = f.dimension](const PointCloud& cloud) {
        if (cloud.points.empty()) {
            throw std::invalid_argument("moment feature: empty cloud");
        }
        const double n = double(cloud.points.size());
        Vec3 c = Vec3::Zero();
        for (const auto& p : cloud.points) c += p;
        c /= n;
        Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
        out.head<3>() = c;
        if (order >= 2) {
            for (const auto& p : cloud.points) {
                const Vec3 d = p - c;
                out[3] += d.x() * d.x();
                out[4] += d.y() * d.y();
                out[5] += d.z() * d.z();
                out[6] += d.x() * d.y();
                out[7] += d.x() * d.z();
                out[8] += d.y() * d.z();
            }
            out.segment<6>(3) /= n;
        }
        if (order >= 3) {
            for (const auto& p : cloud.points) {
                const Vec3 d = p - c;
                const double x = d.x(), y = d.y(), z = d.z();
                out[9] += x * x * x;
                out[10] += y * y * y;
                out[11] += z * z * z;
                out[12] += x * x * y;
                out[13] += x * x * z;
                out[14] += y * y * x;
                out[15] += y * y * z;
                out[16] += z * z * x;
                out[17] += z * z * y;
                out[18] += x * y * z;
            }
            out.segment<10>(9) /= n;
        }
        return out;
    };
    return f;
}

template <typename T>
FeatureMap learned_feature(const Model<T>& model, std::uint64_t patch_seed) {
    FeatureMap f;
    f.dimension = model.config.hidden_dim;
    f.has_closed_form_jacobian = false;
    const Model<T>* held = &model;
    f.eval = [held, patch_seed](const PointCloud& cloud) {
        const std::vector<T> v = global_feature(*held, cloud, patch_seed);
        Eigen::VectorXd out(Eigen::Index(v.size()));
        for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = double(v[std::size_t(i)]);
        return out;
    };
    return f;
}

Eigen::MatrixXd feature_jacobian(const FeatureMap& feature, const PointCloud& target,
                                 const ICLKConfig& cfg) {
    cfg.validate();
    Eigen::MatrixXd j(feature.dimension, 6);
    const Eigen::VectorXd base =
        cfg.central_differences ? Eigen::VectorXd()
                                : checked_eval(feature, target, "feature_jacobian");
    for (int i = 0; i < 6; ++i) {
        const PointCloud minus =
            apply_transform(from_generator_step(i, -cfg.step), target);
        const Eigen::VectorXd f_minus = checked_eval(feature, minus, "feature_jacobian");
        if (cfg.central_differences) {
            const PointCloud plus =
                apply_transform(from_generator_step(i, cfg.step), target);
            const Eigen::VectorXd f_plus = checked_eval(feature, plus, "feature_jacobian");
            j.col(i) = (f_minus - f_plus) / (2.0 * cfg.step);
        } else {
            j.col(i) = (f_minus - base) / cfg.step;
        }
    }
    return j;
}

RegistrationResult iclk_register(const PointCloud& source, const PointCloud& target,
                                 const FeatureMap& feature, const ICLKConfig& cfg) {
    cfg.validate();
    if (source.points.empty() || target.points.empty()) {
        throw std::invalid_argument("iclk_register: clouds must be non-empty");
    }

    const NormRecord rec = pair_union_record(source, target);
    const PointCloud src_n = apply_norm(source, rec);
    const PointCloud tgt_n = apply_norm(target, rec);

    const Eigen::MatrixXd j = feature_jacobian(feature, tgt_n, cfg);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sigma = svd.singularValues();
    const double sigma_max = sigma.size() > 0 ? sigma[0] : 0.0;
    const double cut = cfg.svd_cutoff * sigma_max;
    int rank = 0;
    for (Eigen::Index i = 0; i < sigma.size(); ++i) rank += sigma[i] > cut ? 1 : 0;

    RegistrationResult result;
    result.rank_deficient = rank < 6;

    Eigen::VectorXd inv_sigma = Eigen::VectorXd::Zero(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma[i] > cut) inv_sigma[i] = 1.0 / sigma[i];
    }
    const auto pinv_apply = [&](const Eigen::VectorXd& r) -> Vec6 {
        return svd.matrixV() * inv_sigma.asDiagonal() * (svd.matrixU().transpose() * r);
    };

    const Eigen::VectorXd f_target = checked_eval(feature, tgt_n, "iclk_register");
    RigidTransform h = RigidTransform::identity();
    Eigen::VectorXd residual =
        checked_eval(feature, apply_transform(h, src_n), "iclk_register") - f_target;
    // An increment is accepted only if it lowers the feature residual; a full
    // step that overshoots is halved a few times before giving up.  Accepted
    // residual histories are therefore strictly decreasing, and the returned
    // estimate is the best iterate rather than wherever the last step landed.
    constexpr int kMaxBacktracks = 8;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        const Vec6 xi = pinv_apply(residual);
        if (xi.norm() < cfg.tolerance) {
            result.residual_norms.push_back(residual.norm());
            result.xi_norms.push_back(xi.norm());
            h = reorthonormalize(compose(se3_exp(Twist(xi)), h));
            result.iterations += 1;
            result.converged = true;
            break;
        }
        double alpha = 1.0;
        bool accepted = false;
        RigidTransform h_next;
        Eigen::VectorXd residual_next;
        for (int attempt = 0; attempt <= kMaxBacktracks; ++attempt) {
            h_next = reorthonormalize(compose(se3_exp(Twist(alpha * xi)), h));
            residual_next =
                checked_eval(feature, apply_transform(h_next, src_n), "iclk_register") -
                f_target;
            if (residual_next.norm() < residual.norm()) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;  // no descent along the increment: stationary
        result.residual_norms.push_back(residual.norm());
        result.xi_norms.push_back(alpha * xi.norm());
        result.iterations += 1;
        h = h_next;
        residual = std::move(residual_next);
        if (alpha * xi.norm() < cfg.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.transform = denormalize_transform(h, rec);
    return result;
}

RegistrationResult icp_register(const PointCloud& source, const PointCloud& target,
                                int max_iterations, double tolerance) {
    if (source.points.empty() || target.points.empty()) {
        throw std::invalid_argument("icp_register: clouds must be non-empty");
    }
    if (max_iterations < 1) {
        throw std::invalid_argument("icp_register: max_iterations must be at least 1");
    }
    const KdTree tree(target.points);
    const std::size_t n = source.points.size();

    RegistrationResult result;
    RigidTransform h = RigidTransform::identity();
    double prev_mse = std::numeric_limits<double>::infinity();
    Eigen::Matrix3Xd moved(3, Eigen::Index(n));
    Eigen::Matrix3Xd matched(3, Eigen::Index(n));
    for (int it = 0; it < max_iterations; ++it) {
        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3 p = h.apply(source.points[i]);
            const KdTree::Hit hit = tree.nearest(p);
            moved.col(Eigen::Index(i)) = p;
            matched.col(Eigen::Index(i)) = target.points[hit.index];
            mse += hit.d2;
        }
        mse /= double(n);
        result.residual_norms.push_back(std::sqrt(mse));

        const Mat4 fit = Eigen::umeyama(moved, matched, false);
        RigidTransform delta;
        delta.rotation = fit.topLeftCorner<3, 3>();
        delta.translation = fit.topRightCorner<3, 1>();
        h = reorthonormalize(compose(delta, h));
        Vec6 xi = Vec6::Zero();
        xi.head<3>() = Eigen::AngleAxisd(delta.rotation).angle() *
                       Eigen::AngleAxisd(delta.rotation).axis();
        xi.tail<3>() = delta.translation;
        result.xi_norms.push_back(xi.norm());
        result.iterations += 1;

        if (std::abs(prev_mse - mse) < tolerance) {
            result.converged = true;
            break;
        }
        prev_mse = mse;
    }
    result.transform = h;
    return result;
}

template FeatureMap learned_feature<float>(const Model<float>&, std::uint64_t);
template FeatureMap learned_feature<double>(const Model<double>&, std::uint64_t);

}  // namespace lprnet
