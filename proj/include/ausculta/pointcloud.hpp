#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ausculta/geometry.hpp"
#include "ausculta/kdtree.hpp"

namespace ausculta {

/// Pinhole camera parameters, pixels.
struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("intrinsics: focal lengths must be positive");
    if (cx < 0 || cx >= width || cy < 0 || cy >= height)
      throw std::invalid_argument("intrinsics: principal point outside image");
  }
};

struct ImageRGB {
  int width = 0, height = 0;
  std::vector<std::array<std::uint8_t, 3>> pixels;

  ImageRGB() = default;
  ImageRGB(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0})
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::array<std::uint8_t, 3>& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  const std::array<std::uint8_t, 3>& at(int u, int v) const {
    return pixels[static_cast<std::size_t>(v) * width + u];
  }
  bool inside(int u, int v) const { return u >= 0 && u < width && v >= 0 && v < height; }
};

/// Depth map in mm; 0 encodes an invalid pixel.
struct DepthImage {
  int width = 0, height = 0;
  std::vector<float> mm;

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), mm(static_cast<std::size_t>(w) * h, 0.0f) {}

  float& at(int u, int v) { return mm[static_cast<std::size_t>(v) * width + u]; }
  float at(int u, int v) const { return mm[static_cast<std::size_t>(v) * width + u]; }
};

/// One capture: color, depth, intrinsics, and the camera-to-base pose the
/// robot reported at capture time.
struct RGBDFrame {
  ImageRGB color;
  DepthImage depth;
  CameraIntrinsics intrinsics;
  RigidTransform capture_pose;

  void validate() const {
    intrinsics.validate();
    if (color.width != depth.width || color.height != depth.height)
      throw std::invalid_argument("frame: color and depth dimensions differ");
    if (color.width != intrinsics.width || color.height != intrinsics.height)
      throw std::invalid_argument("frame: image dimensions disagree with intrinsics");
    if (!capture_pose.is_valid(1e-6)) throw std::invalid_argument("frame: invalid capture pose");
  }
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<std::array<std::uint8_t, 3>> colors;  // empty or one per point
  std::string frame_tag;

  std::size_t size() const { return points.size(); }
  bool has_colors() const { return !colors.empty(); }

  void validate() const {
    if (!colors.empty() && colors.size() != points.size())
      throw std::invalid_argument("cloud: color count differs from point count");
    for (const auto& p : points)
      if (!p.allFinite()) throw std::invalid_argument("cloud: non-finite coordinate");
  }
};

/// Inverse pinhole projection of every valid depth pixel, camera frame.
inline PointCloud deproject(const RGBDFrame& frame) {
  frame.validate();
  PointCloud cloud;
  cloud.frame_tag = "camera";
  cloud.points.reserve(frame.depth.mm.size());
  cloud.colors.reserve(frame.depth.mm.size());
  const auto& K = frame.intrinsics;
  for (int v = 0; v < frame.depth.height; ++v) {
    for (int u = 0; u < frame.depth.width; ++u) {
      const double d = frame.depth.at(u, v);
      if (d <= 0) continue;
      cloud.points.emplace_back((u - K.cx) * d / K.fx, (v - K.cy) * d / K.fy, d);
      cloud.colors.push_back(frame.color.at(u, v));
    }
  }
  return cloud;
}

inline PointCloud transform_cloud(const PointCloud& cloud, const RigidTransform& T,
                                  std::string frame_tag = "transformed") {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const auto& p : cloud.points) out.points.push_back(T.apply(p));
  out.colors = cloud.colors;
  out.frame_tag = std::move(frame_tag);
  return out;
}

/// One centroid per occupied voxel. Output order follows the lexicographic
/// order of voxel indices so results do not depend on hashing details.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel_mm) {
  if (voxel_mm <= 0) throw std::invalid_argument("voxel_downsample: voxel size must be positive");
  struct Acc {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Vector3d color_sum = Eigen::Vector3d::Zero();
    int count = 0;
  };
  std::map<std::array<std::int64_t, 3>, Acc> voxels;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[i];
    const std::array<std::int64_t, 3> key = {static_cast<std::int64_t>(std::floor(p.x() / voxel_mm)),
                                             static_cast<std::int64_t>(std::floor(p.y() / voxel_mm)),
                                             static_cast<std::int64_t>(std::floor(p.z() / voxel_mm))};
    Acc& acc = voxels[key];
    acc.sum += p;
    if (cloud.has_colors())
      acc.color_sum += Eigen::Vector3d(cloud.colors[i][0], cloud.colors[i][1], cloud.colors[i][2]);
    ++acc.count;
  }
  PointCloud out;
  out.frame_tag = cloud.frame_tag;
  out.points.reserve(voxels.size());
  if (cloud.has_colors()) out.colors.reserve(voxels.size());
  for (const auto& [key, acc] : voxels) {
    out.points.push_back(acc.sum / acc.count);
    if (cloud.has_colors()) {
      const Eigen::Vector3d c = acc.color_sum / acc.count;
      out.colors.push_back({static_cast<std::uint8_t>(std::lround(c.x())),
                            static_cast<std::uint8_t>(std::lround(c.y())),
                            static_cast<std::uint8_t>(std::lround(c.z()))});
    }
  }
  return out;
}

/// Exact nearest neighbor in `cloud`; thin wrapper kept for callers that do a
/// single query. Build a KdTree directly when querying repeatedly.
inline KdTree::Hit nearest_neighbor(const PointCloud& cloud, const Eigen::Vector3d& query) {
  if (cloud.points.empty()) throw std::invalid_argument("nearest_neighbor: empty cloud");
  return KdTree(cloud.points).nearest(query);
}

/// Removes points whose mean distance to their k nearest neighbors exceeds
/// (global mean + std_ratio * global std). Clouds smaller than k+1 points are
/// returned unchanged.
inline PointCloud remove_statistical_outliers(const PointCloud& cloud, int k = 20,
                                              double std_ratio = 2.0) {
  if (k < 1) throw std::invalid_argument("remove_statistical_outliers: k must be >= 1");
  const std::size_t n = cloud.points.size();
  if (n < static_cast<std::size_t>(k) + 1) return cloud;

  const KdTree tree(cloud.points);
  std::vector<double> mean_dist(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hits = tree.knearest(cloud.points[i], k, static_cast<int>(i));
    double sum = 0.0;
    for (const auto& h : hits) sum += h.distance;
    mean_dist[i] = sum / k;
  }
  double mean = 0.0;
  for (double d : mean_dist) mean += d;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double d : mean_dist) var += (d - mean) * (d - mean);
  var /= static_cast<double>(n);
  // Relative epsilon keeps equal-density clouds intact when the spread of
  // mean distances is pure floating-point jitter.
  const double threshold = mean + std_ratio * std::sqrt(var) + 1e-9 * (1.0 + mean);

  PointCloud out;
  out.frame_tag = cloud.frame_tag;
  for (std::size_t i = 0; i < n; ++i) {
    if (mean_dist[i] > threshold) continue;
    out.points.push_back(cloud.points[i]);
    if (cloud.has_colors()) out.colors.push_back(cloud.colors[i]);
  }
  return out;
}

inline PointCloud concatenate(const PointCloud& a, const PointCloud& b) {
  PointCloud out = a;
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  const bool colors = a.has_colors() && b.has_colors();
  if (colors)
    out.colors.insert(out.colors.end(), b.colors.begin(), b.colors.end());
  else
    out.colors.clear();
  return out;
}

}  // namespace ausculta
