#pragma once

#include "lprnet/cloud.hpp"
#include "lprnet/geometry.hpp"
#include "lprnet/network.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace lprnet {

// Callable feature contract: cloud -> fixed-dimension descriptor, deterministic
// for fixed inputs.
struct FeatureMap {
    int dimension = 0;
    bool has_closed_form_jacobian = false;
    std::function<Eigen::VectorXd(const PointCloud&)> eval;
};

struct ICLKConfig {
    double step = 1e-2;          // twist perturbation: radians / normalized meters
    int max_iterations = 50;
    double tolerance = 1e-7;     // convergence threshold on the increment norm
    double svd_cutoff = 1e-6;    // relative singular-value cutoff for the pseudo-inverse
    bool central_differences = true;

    void validate() const;
};

struct RegistrationResult {
    RigidTransform transform;            // world coordinates, maps source onto target
    int iterations = 0;
    std::vector<double> xi_norms;        // one increment norm per iteration
    std::vector<double> residual_norms;  // feature residual per iteration
    bool converged = false;
    bool rank_deficient = false;         // Jacobian rank below 6 at the cutoff
};

// Centered coordinate moments up to the given order (1: centroid; 2: + the six
// second moments; 3: + the ten third moments). Smooth, rotation- and
// translation-sensitive, with closed-form derivatives for oracle checks.
FeatureMap analytic_moment_feature(int order);

// Wraps a trained model's global feature. The model must outlive the map; all
// evaluations share one patch seed so the patch structure stays frozen across
// the iterations of a registration run.
template <typename T>
FeatureMap learned_feature(const Model<T>& model, std::uint64_t patch_seed = kDefaultPatchSeed);

// D x 6 feature Jacobian on the target: column i differences F over the twist
// perturbation exp(-t * G_i) (forward by default off, central when configured).
Eigen::MatrixXd feature_jacobian(const FeatureMap& feature, const PointCloud& target,
                                 const ICLKConfig& cfg);

// Inverse-compositional alignment minimizing the feature residual over SE(3).
RegistrationResult iclk_register(const PointCloud& source, const PointCloud& target,
                                 const FeatureMap& feature, const ICLKConfig& cfg);

// Classic point-to-point ICP baseline (nearest neighbors + closed-form rigid
// fit per iteration).
RegistrationResult icp_register(const PointCloud& source, const PointCloud& target,
                                int max_iterations = 50, double tolerance = 1e-9);

}  // namespace lprnet
