#include "lprnet/kdtree.hpp"

#include "lprnet/kernels.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace lprnet {

KdTree::KdTree(const std::vector<Vec3>& points) : pts_(points) {
    order_.resize(pts_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!pts_.empty()) {
        nodes_.reserve(2 * pts_.size() / kLeafSize + 8);
        root_ = build(0, static_cast<std::uint32_t>(pts_.size()));
    }
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(pts_[order_[i]]);
        hi = hi.cwiseMax(pts_[order_[i]]);
    }
    const Vec3 extent = hi - lo;
    int axis = 0;
    extent.maxCoeff(&axis);

    const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= kLeafSize || extent[axis] <= 0.0) {
        nodes_[id].axis = -1;
        nodes_[id].left = begin;
        nodes_[id].right = end;
        return id;
    }

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return pts_[a][axis] < pts_[b][axis]; });
    const double split = pts_[order_[mid]][axis];

    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

namespace {

struct Cand {
    double d2;
    std::uint32_t idx;
};

// strict "better" ordering: smaller distance wins, ties go to the lower index
inline bool better(const Cand& a, const Cand& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.idx < b.idx);
}

}  // namespace

template <typename Visitor>
void KdTree::search(std::uint32_t node_id, const Vec3& q, Visitor& visit) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
        for (std::uint32_t i = node.left; i < node.right; ++i) {
            const std::uint32_t idx = order_[i];
            visit.offer(kernels::sqdist3(q.data(), pts_[idx].data()), idx);
        }
        return;
    }
    const double delta = q[node.axis] - node.split;
    const std::uint32_t near_side = delta < 0 ? node.left : node.right;
    const std::uint32_t far_side = delta < 0 ? node.right : node.left;
    search(near_side, q, visit);
    // Equal plane distance may still hide a lower-index tie, so the far side
    // is pruned only on strict inequality.
    if (!(visit.full() && delta * delta > visit.worst_d2())) search(far_side, q, visit);
}

std::vector<KdTree::Hit> KdTree::knn(const Vec3& query, std::size_t k) const {
    if (k > pts_.size()) throw std::invalid_argument("KdTree::knn: k exceeds point count");
    if (k == 0) return {};

    struct KnnVisitor {
        std::size_t k;
        std::vector<Cand> heap;  // max-heap, worst candidate on top

        bool full() const { return heap.size() == k; }
        double worst_d2() const { return heap.front().d2; }
        void offer(double d2, std::uint32_t idx) {
            const Cand c{d2, idx};
            if (heap.size() < k) {
                heap.push_back(c);
                std::push_heap(heap.begin(), heap.end(), better);
            } else if (better(c, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), better);
                heap.back() = c;
                std::push_heap(heap.begin(), heap.end(), better);
            }
        }
    } visitor{k, {}};
    visitor.heap.reserve(k);

    search(root_, query, visitor);

    std::sort(visitor.heap.begin(), visitor.heap.end(), better);
    std::vector<Hit> out(visitor.heap.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {visitor.heap[i].d2, visitor.heap[i].idx};
    return out;
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
    if (pts_.empty()) throw std::invalid_argument("KdTree::nearest: empty tree");

    struct Nn1Visitor {
        Cand best{std::numeric_limits<double>::infinity(), 0};
        bool seen = false;

        bool full() const { return seen; }
        double worst_d2() const { return best.d2; }
        void offer(double d2, std::uint32_t idx) {
            const Cand c{d2, idx};
            if (!seen || better(c, best)) {
                best = c;
                seen = true;
            }
        }
    } visitor;

    search(root_, query, visitor);
    return {visitor.best.d2, visitor.best.idx};
}

}  // namespace lprnet
