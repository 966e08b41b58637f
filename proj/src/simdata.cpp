#include "lprnet/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "lprnet/errors.hpp"
#include "lprnet/rng.hpp"
#include "lprnet/sampling.hpp"

namespace lprnet {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 random_unit_axis(rng::Engine& e) {
    for (;;) {
        const Vec3 g(rng::normal(e), rng::normal(e), rng::normal(e));
        const double n = g.norm();
        if (n > 1e-6) return g / n;
    }
}

Vec3 random_in_ball(rng::Engine& e, double radius) {
    for (;;) {
        const Vec3 p(rng::uniform(e, -radius, radius), rng::uniform(e, -radius, radius),
                     rng::uniform(e, -radius, radius));
        if (p.norm() <= radius) return p;
    }
}

// Removes exactly `quota` points.  Contiguous mode erases the quota nearest
// points around a uniformly chosen member of the cloud (ties broken by
// index); dropout mode erases a uniform random subset.  Surviving points
// keep their original order.
PointCloud occlude(const PointCloud& base, std::size_t quota, bool contiguous, rng::Engine& e) {
    const std::size_t n = base.points.size();
    std::vector<char> removed(n, 0);
    if (contiguous) {
        const Vec3 anchor = base.points[static_cast<std::size_t>(rng::below(e, n))];
        std::vector<std::pair<double, std::size_t>> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = {(base.points[i] - anchor).squaredNorm(), i};
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(quota),
                          order.end());
        for (std::size_t i = 0; i < quota; ++i) removed[order[i].second] = 1;
    } else {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < quota; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng::below(e, n - i));
            std::swap(idx[i], idx[j]);
            removed[idx[i]] = 1;
        }
    }
    PointCloud out;
    out.points.reserve(n - quota);
    for (std::size_t i = 0; i < n; ++i)
        if (!removed[i]) out.points.push_back(base.points[i]);
    return out;
}

// ---- procedural scenes ------------------------------------------------
//
// Each scene allocates its point budget across parts with cumulative
// rounding, so the counts always sum to exactly `count`.

std::vector<std::size_t> split_budget(std::size_t count, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    std::vector<std::size_t> out(weights.size());
    double cum = 0.0;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        cum += weights[i];
        const auto upto =
            static_cast<std::size_t>(std::llround(static_cast<double>(count) * cum / total));
        out[i] = upto - assigned;
        assigned = upto;
    }
    return out;
}

// A flat ground square with a handful of box-shaped buildings; dominated by
// one horizontal plane.
PointCloud scene_plane_boxes(std::size_t count, rng::Engine& e) {
    struct Box {
        double cx, cy, hx, hy, h;
    };
    std::vector<Box> boxes;
    for (int i = 0; i < 5; ++i) {
        Box b;
        b.cx = rng::uniform(e, -14.0, 14.0);
        b.cy = rng::uniform(e, -14.0, 14.0);
        b.hx = rng::uniform(e, 1.5, 4.0);
        b.hy = rng::uniform(e, 1.5, 4.0);
        b.h = rng::uniform(e, 3.0, 9.0);
        boxes.push_back(b);
    }
    std::vector<double> weights{0.55};
    for (const Box& b : boxes) {
        const double sides = 2.0 * b.h * (2.0 * b.hx) + 2.0 * b.h * (2.0 * b.hy);
        const double top = (2.0 * b.hx) * (2.0 * b.hy);
        weights.push_back(0.45 * (sides + top));
    }
    // Normalize the box weights among themselves so ground keeps its share.
    double box_total = 0.0;
    for (std::size_t i = 1; i < weights.size(); ++i) box_total += weights[i];
    for (std::size_t i = 1; i < weights.size(); ++i)
        weights[i] = box_total > 0.0 ? 0.45 * weights[i] / box_total : 0.0;
    const std::vector<std::size_t> budget = split_budget(count, weights);

    PointCloud out;
    out.points.reserve(count);
    for (std::size_t i = 0; i < budget[0]; ++i)
        out.points.emplace_back(rng::uniform(e, -20.0, 20.0), rng::uniform(e, -20.0, 20.0), 0.0);
    for (std::size_t bi = 0; bi < boxes.size(); ++bi) {
        const Box& b = boxes[bi];
        const double ax = 2.0 * b.h * (2.0 * b.hx);  // two x-facing walls
        const double ay = 2.0 * b.h * (2.0 * b.hy);  // two y-facing walls
        const double at = (2.0 * b.hx) * (2.0 * b.hy);
        const double total = ax + ay + at;
        for (std::size_t i = 0; i < budget[bi + 1]; ++i) {
            const double pick = rng::uniform(e, 0.0, total);
            double x, y, z;
            if (pick < ax) {
                x = b.cx + (rng::below(e, 2) ? b.hx : -b.hx);
                y = b.cy + rng::uniform(e, -b.hy, b.hy);
                z = rng::uniform(e, 0.0, b.h);
            } else if (pick < ax + ay) {
                x = b.cx + rng::uniform(e, -b.hx, b.hx);
                y = b.cy + (rng::below(e, 2) ? b.hy : -b.hy);
                z = rng::uniform(e, 0.0, b.h);
            } else {
                x = b.cx + rng::uniform(e, -b.hx, b.hx);
                y = b.cy + rng::uniform(e, -b.hy, b.hy);
                z = b.h;
            }
            out.points.emplace_back(x, y, z);
        }
    }
    return out;
}

// Semi-axes of the library ellipsoid; a uniform solid ellipsoid has
// per-axis central second moment (semi_axis^2) / 5.
constexpr double kEllipsoidA = 12.0;
constexpr double kEllipsoidB = 8.0;
constexpr double kEllipsoidC = 5.0;

PointCloud scene_ellipsoid(std::size_t count, rng::Engine& e) {
    PointCloud out;
    out.points.reserve(count);
    while (out.points.size() < count) {
        const Vec3 u(rng::uniform(e, -1.0, 1.0), rng::uniform(e, -1.0, 1.0),
                     rng::uniform(e, -1.0, 1.0));
        if (u.squaredNorm() > 1.0) continue;
        out.points.emplace_back(kEllipsoidA * u.x(), kEllipsoidB * u.y(), kEllipsoidC * u.z());
    }
    return out;
}

// A heightfield with one curving ridge; elongated along x.
PointCloud scene_ridge_terrain(std::size_t count, rng::Engine& e) {
    PointCloud out;
    out.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double x = rng::uniform(e, -25.0, 25.0);
        const double y = rng::uniform(e, -25.0, 25.0);
        const double crest = y - 3.0 * std::sin(x / 8.0);
        const double z = 6.0 * std::exp(-crest * crest / 18.0) +
                         0.6 * std::sin(x / 3.0) * std::cos(y / 4.0);
        out.points.emplace_back(x, y, z);
    }
    return out;
}

// Two tall cylinders on a ground slab; strongly vertical.
PointCloud scene_two_towers(std::size_t count, rng::Engine& e) {
    const double radius = 3.0;
    const double height = 30.0;
    const double centers[2] = {-10.0, 10.0};
    const double lateral = 2.0 * kPi * radius * height;
    const double cap = kPi * radius * radius;
    const std::vector<std::size_t> budget = split_budget(count, {0.5, 0.25, 0.25});

    PointCloud out;
    out.points.reserve(count);
    for (std::size_t i = 0; i < budget[0]; ++i)
        out.points.emplace_back(rng::uniform(e, -20.0, 20.0), rng::uniform(e, -15.0, 15.0), 0.0);
    for (int t = 0; t < 2; ++t) {
        const double cx = centers[t];
        for (std::size_t i = 0; i < budget[static_cast<std::size_t>(t) + 1]; ++i) {
            const double theta = rng::uniform(e, 0.0, 2.0 * kPi);
            if (rng::uniform(e, 0.0, lateral + cap) < lateral) {
                out.points.emplace_back(cx + radius * std::cos(theta), radius * std::sin(theta),
                                        rng::uniform(e, 0.0, height));
            } else {
                const double r = radius * std::sqrt(rng::uniform(e));
                out.points.emplace_back(cx + r * std::cos(theta), r * std::sin(theta), height);
            }
        }
    }
    return out;
}

std::string pair_dir_name(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pair_%04zu", index);
    return buf;
}

}  // namespace

void SimPairSpec::validate() const {
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
        throw std::invalid_argument("noise_sigma must be finite and >= 0");
    if (!(occlusion_rate >= 0.0 && occlusion_rate < 1.0))
        throw std::invalid_argument("occlusion_rate must lie in [0, 1)");
    if (!(rot_max_deg >= 0.0) || !std::isfinite(rot_max_deg))
        throw std::invalid_argument("rot_max_deg must be finite and >= 0");
    if (!(trans_max >= 0.0) || !std::isfinite(trans_max))
        throw std::invalid_argument("trans_max must be finite and >= 0");
}

SimPair generate_pair(const PointCloud& base, const SimPairSpec& spec) {
    spec.validate();
    const std::size_t n = base.points.size();
    if (n == 0) throw std::invalid_argument("generate_pair: base cloud is empty");

    const auto quota =
        static_cast<std::size_t>(std::llround(spec.occlusion_rate * static_cast<double>(n)));
    if (quota >= n)
        throw std::invalid_argument("generate_pair: occlusion would remove every point (" +
                                    std::to_string(quota) + " of " + std::to_string(n) + ")");

    SimPair pair;
    pair.target = base;

    // Independent streams per effect: disabling one never shifts the others.
    rng::Engine occ_rng(derive_seed(spec.seed, "occlude", 0));
    rng::Engine tf_rng(derive_seed(spec.seed, "transform", 0));
    rng::Engine noise_rng(derive_seed(spec.seed, "noise", 0));

    PointCloud kept =
        quota > 0 ? occlude(base, quota, spec.contiguous_occlusion, occ_rng) : base;

    const double angle = rng::uniform(tf_rng, 0.0, spec.rot_max_deg * kPi / 180.0);
    const Vec3 axis = spec.vertical_axis_only ? Vec3(0.0, 0.0, 1.0) : random_unit_axis(tf_rng);
    RigidTransform move;
    move.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    move.translation = random_in_ball(tf_rng, spec.trans_max);

    pair.source = apply_transform(move, kept);
    for (Vec3& p : pair.source.points) {
        p.x() += spec.noise_sigma * rng::normal(noise_rng);
        p.y() += spec.noise_sigma * rng::normal(noise_rng);
        p.z() += spec.noise_sigma * rng::normal(noise_rng);
    }

    pair.gt = invert(move);
    return pair;
}

PointCloud base_cloud_library(const std::string& name, std::size_t count, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("base_cloud_library: count must be positive");
    rng::Engine e(derive_seed(seed, "scene", 0));
    PointCloud out;
    if (name == "plane+boxes") {
        out = scene_plane_boxes(count, e);
    } else if (name == "ellipsoid") {
        out = scene_ellipsoid(count, e);
    } else if (name == "ridge-terrain") {
        out = scene_ridge_terrain(count, e);
    } else if (name == "two-towers") {
        out = scene_two_towers(count, e);
    } else {
        throw std::invalid_argument("base_cloud_library: unknown scene \"" + name + "\"");
    }
    return out;
}

const std::vector<std::string>& base_cloud_names() {
    static const std::vector<std::string> names{"plane+boxes", "ellipsoid", "ridge-terrain",
                                                "two-towers"};
    return names;
}

void PairSetConfig::validate() const {
    spec.validate();
    if (points == 0) throw std::invalid_argument("pair set: points must be positive");
    if (pairs == 0) throw std::invalid_argument("pair set: pairs must be positive");
    bool known = false;
    for (const std::string& n : base_cloud_names()) known = known || n == base_name;
    if (!known) throw std::invalid_argument("pair set: unknown base scene \"" + base_name + "\"");
}

std::string write_pair_set(const PairSetConfig& cfg, const std::string& directory) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(directory);

    nlohmann::json manifest;
    manifest["base"] = cfg.base_name;
    manifest["points"] = cfg.points;
    manifest["spec"] = {{"noise_sigma", cfg.spec.noise_sigma},
                        {"occlusion_rate", cfg.spec.occlusion_rate},
                        {"rot_max_deg", cfg.spec.rot_max_deg},
                        {"trans_max", cfg.spec.trans_max},
                        {"contiguous_occlusion", cfg.spec.contiguous_occlusion},
                        {"vertical_axis_only", cfg.spec.vertical_axis_only},
                        {"seed", cfg.spec.seed}};
    manifest["pairs"] = nlohmann::json::array();

    for (std::size_t i = 0; i < cfg.pairs; ++i) {
        const PointCloud base =
            base_cloud_library(cfg.base_name, cfg.points, derive_seed(cfg.spec.seed, "base", i));
        SimPairSpec spec = cfg.spec;
        spec.seed = derive_seed(cfg.spec.seed, "pair", i);
        const SimPair pair = generate_pair(base, spec);

        const std::string rel = pair_dir_name(i);
        fs::create_directories(fs::path(directory) / rel);
        const std::string src_rel = rel + "/source.xyz";
        const std::string tgt_rel = rel + "/target.xyz";
        save_xyz(pair.source, (fs::path(directory) / src_rel).string());
        save_xyz(pair.target, (fs::path(directory) / tgt_rel).string());

        manifest["pairs"].push_back({{"id", i},
                                     {"source", src_rel},
                                     {"target", tgt_rel},
                                     {"gt", transform_to_text(pair.gt)}});
    }

    const std::string manifest_path = (fs::path(directory) / "manifest.json").string();
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + manifest_path);
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("short write on manifest: " + manifest_path);
    return manifest_path;
}

std::vector<PairEntry> load_pair_manifest(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest: " + manifest_path);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& ex) {
        throw IntegrityError("manifest " + manifest_path + ": " + ex.what());
    }
    if (!manifest.contains("pairs") || !manifest["pairs"].is_array())
        throw IntegrityError("manifest " + manifest_path + ": missing \"pairs\" array");

    const fs::path root = fs::path(manifest_path).parent_path();
    std::vector<PairEntry> entries;
    for (const nlohmann::json& item : manifest["pairs"]) {
        try {
            PairEntry entry;
            entry.source_path = (root / item.at("source").get<std::string>()).string();
            entry.target_path = (root / item.at("target").get<std::string>()).string();
            entry.gt = transform_from_text(item.at("gt").get<std::string>());
            entries.push_back(std::move(entry));
        } catch (const nlohmann::json::exception& ex) {
            throw IntegrityError("manifest " + manifest_path + ": bad pair entry: " + ex.what());
        }
    }
    return entries;
}

}  // namespace lprnet
