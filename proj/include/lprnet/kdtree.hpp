#pragma once

#include "lprnet/geometry.hpp"

#include <cstdint>
#include <vector>

namespace lprnet {

// Static 3D KD-tree over a point set. Queries are bit-equal to a brute-force
// scan: candidates are ordered by (squared distance, index) and subtrees are
// pruned only when the split plane is strictly farther than the current worst,
// so equal-distance ties always resolve to the lowest index.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(const std::vector<Vec3>& points);

    std::size_t size() const { return pts_.size(); }

    struct Hit {
        double d2;
        std::uint32_t index;
    };

    // k nearest neighbors, ascending by (d2, index). k must be <= size().
    std::vector<Hit> knn(const Vec3& query, std::size_t k) const;

    // Nearest single neighbor.
    Hit nearest(const Vec3& query) const;

private:
    struct Node {
        double split = 0.0;
        int axis = -1;            // -1 marks a leaf
        std::uint32_t left = 0;   // child node ids, or [begin,end) range for leaves
        std::uint32_t right = 0;
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<Vec3> pts_;           // in original order; queries index into this
    std::vector<std::uint32_t> order_; // permutation grouped by leaf
    std::vector<Node> nodes_;
    std::uint32_t root_ = 0;

    static constexpr std::uint32_t kLeafSize = 16;

    template <typename Visitor>
    void search(std::uint32_t node_id, const Vec3& q, Visitor& visit) const;
};

}  // namespace lprnet
