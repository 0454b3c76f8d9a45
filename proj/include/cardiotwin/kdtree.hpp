#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cardiotwin/mesh.hpp"

namespace cardiotwin {

/// Static 3-d tree over a point set for radius and nearest-neighbour queries.
/// Stores point ids, not copies of caller indices: query results refer to
/// the positions passed at construction (or to `ids` when given).
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);
  KdTree(std::span<const Vec3> points, std::span<const std::uint32_t> ids);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }

  /// Appends the ids of all points with |p - q| <= radius to `out`
  /// (unordered).
  void radius_search(const Vec3& q, double radius, std::vector<std::uint32_t>& out) const;

  /// True if some point lies within `radius` of q.
  bool any_within(const Vec3& q, double radius) const;

  /// Id of the nearest point; `dist` receives the distance. Requires !empty().
  std::uint32_t nearest(const Vec3& q, double* dist = nullptr) const;

 private:
  struct Node {
    double split = 0.0;
    std::uint32_t begin = 0, end = 0;  // range into order_
    std::int32_t left = -1, right = -1;
    std::uint8_t axis = 0;
    Vec3 lo, hi;  // bounding box of the subtree
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> pts_;           // permuted positions
  std::vector<std::uint32_t> ids_;  // id of each permuted position
  std::vector<Node> nodes_;
};

}  // namespace cardiotwin
