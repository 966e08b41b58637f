#pragma once

#include "lprnet/cloud.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lprnet {

// Patches over a parent cloud: centers, per-patch index groups, the sampling
// level each patch was grouped on, and visibility bits (false = masked).
struct PatchSet {
    std::vector<Vec3> centers;                         // M x 3, world coordinates
    std::vector<std::vector<std::uint32_t>> groups;    // M lists of k parent indices
    std::vector<std::vector<Vec3>> local_points;       // M lists of k center-relative points
    std::vector<int> scale_label;                      // per-patch level index
    std::vector<std::uint8_t> visible;                 // 1 = visible, 0 = masked

    std::size_t num_patches() const { return centers.size(); }
    std::size_t num_masked() const;
    std::string debug_dump() const;
};

enum class MaskStrategy { kRandom, kBlock, kHybrid };

MaskStrategy mask_strategy_from_name(const std::string& name);

// Farthest point sampling. The first index is drawn uniformly from the seed;
// each later pick maximizes the min distance to the chosen set, ties resolved
// to the lowest index. Deterministic given (cloud, m, seed).
std::vector<std::uint32_t> fps(const PointCloud& cloud, std::size_t m, std::uint64_t seed);

// k nearest neighbors of the query, ascending by (distance, index).
std::vector<std::uint32_t> knn(const PointCloud& cloud, const Vec3& query, std::size_t k);

// Nested FPS levels: one FPS run, level l = the first round(fraction_l * N)
// selections, so every coarser level is a subset of the finer ones.
// Fractions must lie in (0, 1] and be non-ascending.
std::vector<std::vector<std::uint32_t>> multi_scale_fps(const PointCloud& cloud,
                                                        const std::vector<double>& level_fractions,
                                                        std::uint64_t seed);

// FPS centers on the full cloud; per-patch level assigned round-robin over a
// seeded shuffle; the k group members come from KNN inside the patch's level.
PatchSet build_patches(const PointCloud& cloud, std::size_t num_patches, std::size_t patch_size,
                       const std::vector<double>& level_fractions, std::uint64_t seed);

// Exactly round(mask_ratio * M) entries set to masked.
// random: uniform without replacement. block: a seed patch plus its nearest
// patch centers until the quota is met. hybrid: half the quota by block,
// the remainder by random.
std::vector<std::uint8_t> generate_mask(std::size_t num_patches, double mask_ratio,
                                        MaskStrategy strategy,
                                        const std::vector<Vec3>& centers, std::uint64_t seed);

// Purpose-split RNG stream derivation, shared by training and masking so that
// toggling one consumer never shifts another.
std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose, std::uint64_t index);

}  // namespace lprnet
