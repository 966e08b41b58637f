#include "lprnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "lprnet/checkpoint.hpp"
#include "lprnet/errors.hpp"
#include "lprnet/kdtree.hpp"
#include "lprnet/simdata.hpp"

namespace lprnet {

double rmse_nn(const PointCloud& registered_source, const PointCloud& target) {
    if (registered_source.points.empty() || target.points.empty())
        throw std::invalid_argument("rmse_nn: both clouds must be non-empty");
    const KdTree tree(target.points);
    double sum = 0.0;
    for (const Vec3& p : registered_source.points) {
        sum += tree.nearest(p).d2;
    }
    return std::sqrt(sum / static_cast<double>(registered_source.points.size()));
}

double transform_frobenius(const RigidTransform& a, const RigidTransform& b) {
    return (a.homogeneous() - b.homogeneous()).norm();
}

double rmse_t(const RigidTransform& estimated, const RigidTransform& ground_truth,
              bool squared_form) {
    const double f = transform_frobenius(estimated, ground_truth);
    return squared_form ? f : std::sqrt(f);
}

double rmse_t_set(const std::vector<double>& frobenius_norms, bool squared_form) {
    if (frobenius_norms.empty()) throw std::invalid_argument("rmse_t_set: empty pair set");
    double sum = 0.0;
    for (const double f : frobenius_norms) {
        if (!(f >= 0.0) || !std::isfinite(f))
            throw std::invalid_argument("rmse_t_set: norms must be finite and >= 0");
        sum += squared_form ? f * f : f;
    }
    return std::sqrt(sum / static_cast<double>(frobenius_norms.size()));
}

namespace {

std::map<std::pair<long long, long long>, double> rasterize_max(const PointCloud& cloud,
                                                                double cell) {
    std::map<std::pair<long long, long long>, double> grid;
    for (const Vec3& p : cloud.points) {
        const std::pair<long long, long long> key{
            static_cast<long long>(std::floor(p.x() / cell)),
            static_cast<long long>(std::floor(p.y() / cell))};
        const auto it = grid.find(key);
        if (it == grid.end()) {
            grid.emplace(key, p.z());
        } else {
            it->second = std::max(it->second, p.z());
        }
    }
    return grid;
}

}  // namespace

double dsm_diff(const PointCloud& a, const PointCloud& b, double cell) {
    if (!(cell > 0.0) || !std::isfinite(cell))
        throw std::invalid_argument("dsm_diff: cell must be positive");
    if (a.points.empty() || b.points.empty())
        throw std::invalid_argument("dsm_diff: both clouds must be non-empty");
    const auto grid_a = rasterize_max(a, cell);
    const auto grid_b = rasterize_max(b, cell);
    double sum = 0.0;
    std::size_t shared = 0;
    for (const auto& [key, za] : grid_a) {
        const auto it = grid_b.find(key);
        if (it == grid_b.end()) continue;
        sum += std::abs(za - it->second);
        ++shared;
    }
    if (shared == 0)
        throw UndefinedMetricError("dsm_diff: the clouds occupy no common cells");
    return sum / static_cast<double>(shared);
}

void EvalReport::validate() const {
    const double metrics[] = {rmse_nn, rmse_t, dsm_mean_abs_diff};
    for (const double m : metrics) {
        if (!std::isfinite(m) || m < 0.0)
            throw std::invalid_argument("eval report: metrics must be finite and >= 0");
    }
}

std::string eval_report_json(const EvalReport& report) {
    report.validate();
    const nlohmann::json j = {{"pair_id", report.pair_id},
                              {"method_id", report.method_id},
                              {"config_hash", report.config_hash},
                              {"rmse_nn", report.rmse_nn},
                              {"rmse_t", report.rmse_t},
                              {"dsm_mean_abs_diff", report.dsm_mean_abs_diff}};
    return j.dump();
}

std::string config_fingerprint(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<AblationVariant> standard_ablation_variants(const NetworkConfig& base,
                                                        const std::string& checkpoint_dir) {
    struct Row {
        const char* name;
        bool multi_scale;
        Embedding embedding;
        Integrator integrator;
    };
    const Row rows[] = {
        {"single-pos-mlp", false, Embedding::kPositionOnly, Integrator::kSharedMLP},
        {"single-pos-attn", false, Embedding::kPositionOnly, Integrator::kTransformer},
        {"single-feat-attn", false, Embedding::kFeatureOnly, Integrator::kTransformer},
        {"single-both-attn", false, Embedding::kBoth, Integrator::kTransformer},
        {"multi-both-attn", true, Embedding::kBoth, Integrator::kTransformer},
    };
    std::vector<AblationVariant> variants;
    for (const Row& row : rows) {
        AblationVariant v;
        v.name = row.name;
        v.network = base;
        v.network.level_fractions = row.multi_scale ? std::vector<double>{1.0, 0.5, 0.25}
                                                    : std::vector<double>{1.0};
        v.network.embedding = row.embedding;
        v.network.integrator = row.integrator;
        v.checkpoint_path =
            (std::filesystem::path(checkpoint_dir) / (v.name + std::string(".ckpt"))).string();
        variants.push_back(std::move(v));
    }
    return variants;
}

namespace {

template <typename T>
double variant_mean_rmse_t(const AblationVariant& variant,
                           const std::vector<CheckpointRecord>& records,
                           const std::vector<PairEntry>& entries, const ICLKConfig& reg) {
    Model<T> model = init_model<T>(variant.network, 0);
    load_model_params(model, records);
    const FeatureMap feature = learned_feature(model);
    std::vector<double> norms;
    norms.reserve(entries.size());
    for (const PairEntry& entry : entries) {
        const PointCloud source = load_xyz(entry.source_path);
        const PointCloud target = load_xyz(entry.target_path);
        const RegistrationResult result = iclk_register(source, target, feature, reg);
        norms.push_back(transform_frobenius(result.transform, entry.gt));
    }
    return rmse_t_set(norms);
}

}  // namespace

AblationTable run_ablation_suite(const std::vector<AblationVariant>& variants,
                                 const std::string& manifest_path, const ICLKConfig& reg) {
    const std::vector<PairEntry> entries = load_pair_manifest(manifest_path);
    if (entries.empty()) throw std::invalid_argument("ablation suite: manifest lists no pairs");
    AblationTable table;
    for (const AblationVariant& variant : variants) {
        AblationRow row;
        row.variant = variant.name;
        if (!std::filesystem::exists(variant.checkpoint_path)) {
            row.absent = true;
            table.rows.push_back(std::move(row));
            continue;
        }
        const std::vector<CheckpointRecord> records = load_checkpoint(variant.checkpoint_path);
        if (records.empty())
            throw IntegrityError("ablation suite: empty checkpoint " + variant.checkpoint_path);
        row.mean_rmse_t = records.front().dtype == 0
                              ? variant_mean_rmse_t<float>(variant, records, entries, reg)
                              : variant_mean_rmse_t<double>(variant, records, entries, reg);
        row.pairs_evaluated = entries.size();
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string ablation_csv(const AblationTable& table) {
    std::string out = "variant,mean_rmse_t,pairs\n";
    char buf[64];
    for (const AblationRow& row : table.rows) {
        if (row.absent) {
            out += row.variant + ",absent,0\n";
            continue;
        }
        std::snprintf(buf, sizeof(buf), "%.17g,%zu", row.mean_rmse_t, row.pairs_evaluated);
        out += row.variant + "," + buf + "\n";
    }
    return out;
}

std::string ablation_plot_text(const AblationTable& table) {
    std::string out;
    char buf[48];
    for (const AblationRow& row : table.rows) {
        if (row.absent) continue;
        std::snprintf(buf, sizeof(buf), " %.17g\n", row.mean_rmse_t);
        out += row.variant + buf;
    }
    return out;
}

}  // namespace lprnet
