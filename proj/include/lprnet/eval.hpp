#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lprnet/cloud.hpp"
#include "lprnet/geometry.hpp"
#include "lprnet/network.hpp"
#include "lprnet/registration.hpp"

namespace lprnet {

// One-directional nearest-neighbor RMSE: sqrt of the mean, over points of
// the registered source, of the squared distance to the nearest target
// point.  Not symmetric in its arguments.  Throws std::invalid_argument
// when either cloud is empty.
double rmse_nn(const PointCloud& registered_source, const PointCloud& target);

// Frobenius norm of the difference of the two 4x4 homogeneous matrices, so
// rotation and translation errors share one dimensionless norm.
double transform_frobenius(const RigidTransform& a, const RigidTransform& b);

// Transform error for a single pair.  The default ("literal") form is
// sqrt(‖ΔT‖_F); the norm inside the mean is not squared, so the set form
// below is sqrt of the mean of unsquared norms.  squared_form switches to
// the conventional root-mean-square (per-pair value ‖ΔT‖_F).
double rmse_t(const RigidTransform& estimated, const RigidTransform& ground_truth,
              bool squared_form = false);

// The set form over per-pair Frobenius norms: sqrt(mean of norms), or
// sqrt(mean of squared norms) when squared_form.  Throws
// std::invalid_argument on an empty set.
double rmse_t_set(const std::vector<double>& frobenius_norms, bool squared_form = false);

// Mean absolute difference of per-cell maximum elevation between the two
// clouds' rasterized surface models, over cells occupied in BOTH grids.
// Cells partition the horizontal plane with the given edge length.  Throws
// std::invalid_argument for cell <= 0 or an empty cloud, and
// UndefinedMetricError when no cell is co-occupied.
double dsm_diff(const PointCloud& a, const PointCloud& b, double cell = 1.0);

// One evaluated pair, serializable as a single JSON line.
struct EvalReport {
    std::string pair_id;
    std::string method_id;
    std::string config_hash;
    double rmse_nn = 0.0;
    double rmse_t = 0.0;
    double dsm_mean_abs_diff = 0.0;

    // All metrics must be finite and >= 0.
    void validate() const;
};

std::string eval_report_json(const EvalReport& report);

// FNV-1a 64-bit fingerprint of a configuration string, as fixed-width hex.
std::string config_fingerprint(const std::string& text);

// One ablation row: a network layout plus the checkpoint that should hold
// its trained weights.
struct AblationVariant {
    std::string name;
    NetworkConfig network;
    std::string checkpoint_path;
};

// The five standard rows, from weakest to fullest: single-scale sampling
// with position-only tokens and the shared-MLP mixer, then transformer
// variants adding feature tokens, then multi-scale sampling with
// everything on.  Checkpoints live at <checkpoint_dir>/<name>.ckpt.
std::vector<AblationVariant> standard_ablation_variants(const NetworkConfig& base,
                                                        const std::string& checkpoint_dir);

struct AblationRow {
    std::string variant;
    double mean_rmse_t = 0.0;       // set-form transform error over the manifest
    std::size_t pairs_evaluated = 0;
    bool absent = false;            // checkpoint missing; no numbers fabricated
};

struct AblationTable {
    std::vector<AblationRow> rows;
};

// Registers every manifest pair with each variant's trained features and
// reports the set-form transform error per variant.  A variant whose
// checkpoint file is missing is listed as absent.  Deterministic given the
// manifest and checkpoints.
AblationTable run_ablation_suite(const std::vector<AblationVariant>& variants,
                                 const std::string& manifest_path, const ICLKConfig& reg);

// "variant,mean_rmse_t,pairs" CSV; absent variants carry the word "absent".
std::string ablation_csv(const AblationTable& table);

// Two whitespace-separated columns (variant, value), absent rows skipped.
std::string ablation_plot_text(const AblationTable& table);

}  // namespace lprnet
