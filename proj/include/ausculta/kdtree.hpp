#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace ausculta {

/// Exact nearest-neighbor search over a fixed set of 3D points. Median-split
/// tree on the widest axis, leaves hold small buckets. Queries are exact by
/// construction (branch-and-bound with true distances); ties break toward the
/// lowest point index so results are deterministic.
class KdTree {
 public:
  struct Hit {
    int index = -1;
    double distance = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;

  explicit KdTree(const std::vector<Eigen::Vector3d>& points) : points_(points) {
    if (points_.empty()) return;
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(points_.size() / kLeafSize * 2 + 2);
    root_ = build(0, static_cast<int>(points_.size()));
  }

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }

  Hit nearest(const Eigen::Vector3d& q) const {
    if (points_.empty()) throw std::invalid_argument("KdTree::nearest: empty point set");
    Hit best;
    search(root_, q, -1, best);
    return best;
  }

  /// k nearest neighbors sorted by (distance, index); `skip_index` excludes one
  /// point (used when querying a cloud against itself).
  std::vector<Hit> knearest(const Eigen::Vector3d& q, int k, int skip_index = -1) const {
    if (points_.empty()) throw std::invalid_argument("KdTree::knearest: empty point set");
    if (k < 1) throw std::invalid_argument("KdTree::knearest: k must be >= 1");
    KnnState state;
    state.k = k;
    state.skip = skip_index;
    search_knn(root_, q, state);
    std::sort(state.heap.begin(), state.heap.end(), [](const Hit& a, const Hit& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
    });
    return state.heap;
  }

 private:
  static constexpr int kLeafSize = 8;

  struct Node {
    double split = 0.0;
    int axis = -1;  // -1 marks a leaf
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range in order_
  };

  int build(int begin, int end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }
    Eigen::Vector3d lo = points_[order_[begin]], hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                       const double da = points_[a][axis], db = points_[b][axis];
                       return da != db ? da < db : a < b;
                     });
    node.axis = axis;
    node.split = points_[order_[mid]][axis];
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void consider(int idx, const Eigen::Vector3d& q, int skip, Hit& best) const {
    if (idx == skip) return;
    const double d = (points_[idx] - q).norm();
    if (d < best.distance || (d == best.distance && idx < best.index)) {
      best.distance = d;
      best.index = idx;
    }
  }

  void search(int node_id, const Eigen::Vector3d& q, int skip, Hit& best) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) consider(order_[i], q, skip, best);
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search(near, q, skip, best);
    if (std::abs(delta) <= best.distance) search(far, q, skip, best);
  }

  struct KnnState {
    int k = 1;
    int skip = -1;
    std::vector<Hit> heap;  // max-heap on (distance, index)

    static bool heap_less(const Hit& a, const Hit& b) {
      return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
    }

    double worst() const {
      return static_cast<int>(heap.size()) < k ? std::numeric_limits<double>::infinity()
                                               : heap.front().distance;
    }

    void offer(int idx, double d) {
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back({idx, d});
        std::push_heap(heap.begin(), heap.end(), heap_less);
        return;
      }
      const Hit& top = heap.front();
      if (d < top.distance || (d == top.distance && idx < top.index)) {
        std::pop_heap(heap.begin(), heap.end(), heap_less);
        heap.back() = {idx, d};
        std::push_heap(heap.begin(), heap.end(), heap_less);
      }
    }
  };

  void search_knn(int node_id, const Eigen::Vector3d& q, KnnState& state) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int idx = order_[i];
        if (idx == state.skip) continue;
        state.offer(idx, (points_[idx] - q).norm());
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search_knn(near, q, state);
    if (std::abs(delta) <= state.worst()) search_knn(far, q, state);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace ausculta
