#include "lprnet/sampling.hpp"

#include "lprnet/kdtree.hpp"
#include "lprnet/kernels.hpp"
#include "lprnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace lprnet {

std::uint64_t derive_seed(std::uint64_t base, std::string_view purpose, std::uint64_t index) {
    // FNV-1a over the purpose tag, then splitmix64-style finalization
    std::uint64_t h = 1469598103934665603ull;
    for (char c : purpose) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    std::uint64_t x = base ^ h ^ (index * 0x9e3779b97f4a7c15ull);
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::size_t PatchSet::num_masked() const {
    std::size_t n = 0;
    for (std::uint8_t v : visible) n += (v == 0);
    return n;
}

std::string PatchSet::debug_dump() const {
    std::ostringstream out;
    out << "patches " << num_patches() << " masked " << num_masked() << "\n";
    for (std::size_t i = 0; i < num_patches(); ++i) {
        out << "patch " << i << " level " << scale_label[i] << (visible[i] ? " visible" : " masked")
            << " center " << centers[i].x() << " " << centers[i].y() << " " << centers[i].z()
            << " k " << groups[i].size() << "\n";
    }
    return out.str();
}

MaskStrategy mask_strategy_from_name(const std::string& name) {
    if (name == "random") return MaskStrategy::kRandom;
    if (name == "block") return MaskStrategy::kBlock;
    if (name == "hybrid") return MaskStrategy::kHybrid;
    throw std::invalid_argument("unknown mask strategy: " + name);
}

std::vector<std::uint32_t> fps(const PointCloud& cloud, std::size_t m, std::uint64_t seed) {
    const std::size_t n = cloud.points.size();
    if (m < 1 || m > n) throw std::invalid_argument("fps: m must be in [1, N]");

    rng::Engine engine(seed);
    std::vector<std::uint32_t> selected;
    selected.reserve(m);
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());

    std::uint32_t current = static_cast<std::uint32_t>(rng::below(engine, n));
    selected.push_back(current);
    min_d2[current] = -1.0;  // below any real distance, so it never wins again

    while (selected.size() < m) {
        const auto step = kernels::fps_update_argmax(cloud.points.data(), n,
                                                     cloud.points[current], min_d2.data());
        current = static_cast<std::uint32_t>(step.argmax);
        selected.push_back(current);
        min_d2[current] = -1.0;
    }
    return selected;
}

std::vector<std::uint32_t> knn(const PointCloud& cloud, const Vec3& query, std::size_t k) {
    if (k > cloud.points.size()) throw std::invalid_argument("knn: k exceeds point count");
    const KdTree tree(cloud.points);
    const auto hits = tree.knn(query, k);
    std::vector<std::uint32_t> out(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) out[i] = hits[i].index;
    return out;
}

std::vector<std::vector<std::uint32_t>> multi_scale_fps(const PointCloud& cloud,
                                                        const std::vector<double>& level_fractions,
                                                        std::uint64_t seed) {
    if (level_fractions.empty())
        throw std::invalid_argument("multi_scale_fps: empty fraction list");
    for (std::size_t i = 0; i < level_fractions.size(); ++i) {
        if (level_fractions[i] <= 0.0 || level_fractions[i] > 1.0)
            throw std::invalid_argument("multi_scale_fps: fractions must lie in (0, 1]");
        if (i > 0 && level_fractions[i] > level_fractions[i - 1])
            throw std::invalid_argument("multi_scale_fps: fractions must be descending");
    }
    const std::size_t n = cloud.points.size();
    std::vector<std::size_t> sizes(level_fractions.size());
    for (std::size_t i = 0; i < sizes.size(); ++i)
        sizes[i] = std::max<std::size_t>(1, std::size_t(std::llround(level_fractions[i] * double(n))));

    // one continued FPS run; every level is a prefix of the same selection order
    const auto order = fps(cloud, sizes.front(), seed);
    std::vector<std::vector<std::uint32_t>> levels(sizes.size());
    for (std::size_t l = 0; l < sizes.size(); ++l)
        levels[l].assign(order.begin(), order.begin() + sizes[l]);
    return levels;
}

PatchSet build_patches(const PointCloud& cloud, std::size_t num_patches, std::size_t patch_size,
                       const std::vector<double>& level_fractions, std::uint64_t seed) {
    const std::size_t n = cloud.points.size();
    if (num_patches < 1 || num_patches > n)
        throw std::invalid_argument("build_patches: num_patches must be in [1, N]");

    const auto levels = multi_scale_fps(cloud, level_fractions, derive_seed(seed, "ms-levels", 0));
    if (patch_size > levels.back().size())
        throw std::invalid_argument("build_patches: patch_size exceeds the coarsest level");

    const auto center_idx = fps(cloud, num_patches, derive_seed(seed, "fps-centers", 0));

    // round-robin level assignment over a seeded shuffle of the patch order
    std::vector<std::size_t> perm(num_patches);
    std::iota(perm.begin(), perm.end(), 0);
    rng::Engine assign_rng(derive_seed(seed, "level-assign", 0));
    rng::shuffle(assign_rng, perm);
    std::vector<int> level_of(num_patches);
    for (std::size_t i = 0; i < num_patches; ++i)
        level_of[perm[i]] = static_cast<int>(i % levels.size());

    std::vector<KdTree> level_trees;
    level_trees.reserve(levels.size());
    for (const auto& level : levels) {
        std::vector<Vec3> pts(level.size());
        for (std::size_t i = 0; i < level.size(); ++i) pts[i] = cloud.points[level[i]];
        level_trees.emplace_back(pts);
    }

    PatchSet set;
    set.centers.resize(num_patches);
    set.groups.resize(num_patches);
    set.local_points.resize(num_patches);
    set.scale_label = level_of;
    set.visible.assign(num_patches, 1);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(num_patches); ++pi) {
        const Vec3 center = cloud.points[center_idx[pi]];
        const int lvl = level_of[pi];
        const auto hits = level_trees[lvl].knn(center, patch_size);
        set.centers[pi] = center;
        auto& group = set.groups[pi];
        auto& local = set.local_points[pi];
        group.resize(hits.size());
        local.resize(hits.size());
        for (std::size_t j = 0; j < hits.size(); ++j) {
            group[j] = levels[lvl][hits[j].index];
            local[j] = cloud.points[group[j]] - center;
        }
    }
    return set;
}

std::vector<std::uint8_t> generate_mask(std::size_t num_patches, double mask_ratio,
                                        MaskStrategy strategy,
                                        const std::vector<Vec3>& centers, std::uint64_t seed) {
    if (mask_ratio < 0.0 || mask_ratio >= 1.0)
        throw std::invalid_argument("generate_mask: mask_ratio must lie in [0, 1)");
    const std::size_t quota = std::size_t(std::llround(mask_ratio * double(num_patches)));
    std::vector<std::uint8_t> visible(num_patches, 1);
    if (quota == 0) return visible;

    rng::Engine engine(seed);

    auto mask_block = [&](std::size_t block_quota) {
        const std::size_t seed_patch = rng::below(engine, num_patches);
        // the block is the seed center plus its nearest centers until the quota is met
        std::vector<std::pair<double, std::uint32_t>> by_dist(num_patches);
        for (std::size_t i = 0; i < num_patches; ++i)
            by_dist[i] = {(centers[i] - centers[seed_patch]).squaredNorm(),
                          static_cast<std::uint32_t>(i)};
        std::sort(by_dist.begin(), by_dist.end());
        for (std::size_t i = 0; i < block_quota; ++i) visible[by_dist[i].second] = 0;
    };

    auto mask_random = [&](std::size_t random_quota) {
        std::vector<std::uint32_t> pool;
        pool.reserve(num_patches);
        for (std::size_t i = 0; i < num_patches; ++i)
            if (visible[i]) pool.push_back(static_cast<std::uint32_t>(i));
        for (std::size_t taken = 0; taken < random_quota; ++taken) {
            const std::size_t j = taken + rng::below(engine, pool.size() - taken);
            std::swap(pool[taken], pool[j]);
            visible[pool[taken]] = 0;
        }
    };

    switch (strategy) {
        case MaskStrategy::kRandom:
            mask_random(quota);
            break;
        case MaskStrategy::kBlock:
            if (centers.size() != num_patches)
                throw std::invalid_argument("generate_mask: block strategy needs centers");
            mask_block(quota);
            break;
        case MaskStrategy::kHybrid: {
            if (centers.size() != num_patches)
                throw std::invalid_argument("generate_mask: hybrid strategy needs centers");
            const std::size_t block_quota = quota / 2;
            mask_block(block_quota);
            mask_random(quota - block_quota);
            break;
        }
    }
    return visible;
}

}  // namespace lprnet
