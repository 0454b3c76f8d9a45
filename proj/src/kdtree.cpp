#include "cardiotwin/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace cardiotwin {
namespace {

constexpr std::uint32_t kLeafSize = 12;

double box_distance_sq(const Vec3& q, const Vec3& lo, const Vec3& hi) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    double d = 0.0;
    if (q[k] < lo[k])
      d = lo[k] - q[k];
    else if (q[k] > hi[k])
      d = q[k] - hi[k];
    d2 += d * d;
  }
  return d2;
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points) {
  std::vector<std::uint32_t> ids(points.size());
  std::iota(ids.begin(), ids.end(), 0u);
  *this = KdTree(points, ids);
}

KdTree::KdTree(std::span<const Vec3> points, std::span<const std::uint32_t> ids)
    : pts_(points.begin(), points.end()), ids_(ids.begin(), ids.end()) {
  if (pts_.empty()) return;
  nodes_.reserve(2 * pts_.size() / kLeafSize + 2);
  build(0, static_cast<std::uint32_t>(pts_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    node.lo = node.lo.cwiseMin(pts_[i]);
    node.hi = node.hi.cwiseMax(pts_[i]);
  }
  auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return index;

  Eigen::Index axis;
  (node.hi - node.lo).maxCoeff(&axis);
  std::uint32_t mid = begin + (end - begin) / 2;

  // Sort a permutation so positions and ids stay paired.
  std::vector<std::uint32_t> perm(end - begin);
  std::iota(perm.begin(), perm.end(), begin);
  std::nth_element(perm.begin(), perm.begin() + (mid - begin), perm.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
                     return ids_[a] < ids_[b];
                   });
  std::vector<Vec3> p(perm.size());
  std::vector<std::uint32_t> id(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    p[i] = pts_[perm[i]];
    id[i] = ids_[perm[i]];
  }
  std::copy(p.begin(), p.end(), pts_.begin() + begin);
  std::copy(id.begin(), id.end(), ids_.begin() + begin);

  nodes_[index].axis = static_cast<std::uint8_t>(axis);
  nodes_[index].split = pts_[mid][axis];
  std::int32_t left = build(begin, mid);
  std::int32_t right = build(mid, end);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

void KdTree::radius_search(const Vec3& q, double radius, std::vector<std::uint32_t>& out) const {
  if (nodes_.empty()) return;
  const double r2 = radius * radius;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (box_distance_sq(q, n.lo, n.hi) > r2) continue;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i)
        if ((pts_[i] - q).squaredNorm() <= r2) out.push_back(ids_[i]);
      continue;
    }
    stack[top++] = n.left;
    stack[top++] = n.right;
  }
}

bool KdTree::any_within(const Vec3& q, double radius) const {
  if (nodes_.empty()) return false;
  const double r2 = radius * radius;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (box_distance_sq(q, n.lo, n.hi) > r2) continue;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i)
        if ((pts_[i] - q).squaredNorm() <= r2) return true;
      continue;
    }
    stack[top++] = n.left;
    stack[top++] = n.right;
  }
  return false;
}

std::uint32_t KdTree::nearest(const Vec3& q, double* dist) const {
  double best = std::numeric_limits<double>::infinity();
  std::uint32_t best_id = 0;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (box_distance_sq(q, n.lo, n.hi) > best) continue;
    if (n.left < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        double d2 = (pts_[i] - q).squaredNorm();
        if (d2 < best || (d2 == best && ids_[i] < best_id)) {
          best = d2;
          best_id = ids_[i];
        }
      }
      continue;
    }
    // Visit the nearer child last so it is popped first.
    bool go_left = q[n.axis] < n.split;
    stack[top++] = go_left ? n.right : n.left;
    stack[top++] = go_left ? n.left : n.right;
  }
  if (dist) *dist = std::sqrt(best);
  return best_id;
}

}  // namespace cardiotwin
