#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <vector>

namespace mccf {

using Vec3 = std::array<double, 3>;

inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Static 3-D k-d tree over labelled points. Exact nearest neighbor with
// ties broken by the lowest label, so queries match a brute-force scan.
class KdTree3 {
 public:
  KdTree3() = default;

  KdTree3(std::vector<Vec3> points, std::vector<std::uint64_t> labels)
      : points_(std::move(points)), labels_(std::move(labels)) {
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!order_.empty()) build(0, order_.size(), 0);
  }

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }

  struct Hit {
    std::uint64_t label = 0;
    double dist_sq = std::numeric_limits<double>::infinity();
  };

  // Nearest point to `query`, optionally excluding one label.
  Hit nearest(const Vec3& query, std::uint64_t exclude_label = kNoExclude) const {
    Hit best;
    if (!order_.empty()) search(0, order_.size(), 0, query, exclude_label, best);
    return best;
  }

  static constexpr std::uint64_t kNoExclude = ~std::uint64_t{0};

 private:
  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= 1) return;
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(lo),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(hi),
                     [&](std::size_t a, std::size_t b) {
                       return points_[a][static_cast<std::size_t>(axis)] <
                              points_[b][static_cast<std::size_t>(axis)];
                     });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void consider(std::size_t idx, const Vec3& query, std::uint64_t exclude, Hit& best) const {
    if (labels_[idx] == exclude) return;
    const double d = squared_distance(points_[idx], query);
    if (d < best.dist_sq || (d == best.dist_sq && labels_[idx] < best.label)) {
      best.dist_sq = d;
      best.label = labels_[idx];
    }
  }

  void search(std::size_t lo, std::size_t hi, int axis, const Vec3& query, std::uint64_t exclude,
              Hit& best) const {
    if (hi <= lo) return;
    const std::size_t mid = (lo + hi) / 2;
    consider(order_[mid], query, exclude, best);
    const double delta =
        query[static_cast<std::size_t>(axis)] - points_[order_[mid]][static_cast<std::size_t>(axis)];
    const int next = (axis + 1) % 3;
    if (delta < 0.0) {
      search(lo, mid, next, query, exclude, best);
      if (delta * delta <= best.dist_sq) search(mid + 1, hi, next, query, exclude, best);
    } else {
      search(mid + 1, hi, next, query, exclude, best);
      if (delta * delta <= best.dist_sq) search(lo, mid, next, query, exclude, best);
    }
  }

  std::vector<Vec3> points_;
  std::vector<std::uint64_t> labels_;
  std::vector<std::size_t> order_;
};

}  // namespace mccf
