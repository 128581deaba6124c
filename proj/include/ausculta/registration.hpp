#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ausculta/geometry.hpp"
#include "ausculta/kdtree.hpp"
#include "ausculta/pointcloud.hpp"

namespace ausculta {

/// Candidate correspondences for one surface pair (i, j).
struct CorrespondenceSet {
  int surface_i = 0;
  int surface_j = 0;
  std::vector<std::pair<int, int>> pairs;  // (index in P_i, index in P_j)
};

/// Per-correspondence robust weights, flattened across all correspondence
/// sets in set order. Every weight lies in (0, 1].
struct LineProcess {
  std::vector<double> weights;
};

/// Multi-way registration input. Surfaces must already be expressed in the
/// robot-base frame (capture-pose feedback); the solver estimates residual
/// refinement poses on top of that, anchoring surface 0.
struct MultiwayProblem {
  std::vector<PointCloud> surfaces;
  double lambda = 1.0;         // odometry-term weight on consecutive pairs
  double max_corr_dist = 25.0; // correspondence gate, mm
  double mu_init = 0.0;        // robust scale, mm^2; 0 means max_corr_dist^2
  double mu_floor = 1.0;       // mm^2
  double mu_divisor = 2.0;
  int mu_interval = 4;         // iterations between anneal steps
  int max_iterations = 64;
  double twist_tolerance = 1e-6;
  int merge_filter_k = 20;
  double merge_filter_std_ratio = 2.0;

  void validate() const {
    if (surfaces.size() < 2)
      throw std::invalid_argument("multiway: need at least 2 surfaces");
    if (lambda < 0) throw std::invalid_argument("multiway: lambda must be >= 0");
    if (max_corr_dist <= 0) throw std::invalid_argument("multiway: max_corr_dist must be positive");
    if (mu_floor <= 0 || mu_divisor <= 1.0 || mu_interval < 1)
      throw std::invalid_argument("multiway: invalid annealing schedule");
    if (mu_init < 0) throw std::invalid_argument("multiway: mu_init must be >= 0");
  }
};

struct RegistrationResult {
  std::vector<RigidTransform> poses;
  Eigen::VectorXd stacked_update;        // final iteration's stacked twists, 6 per surface
  std::vector<double> objective_history; // one entry per iteration
  std::vector<double> mu_history;        // annealing scale used at each iteration
  PointCloud merged;
  int iterations = 0;
  bool no_correspondences = false;
  bool damped_solve = false;
};

/// Mutual nearest-neighbor pairs between P_i and P_j under the current poses,
/// gated at max_corr_dist. Deterministic: pairs come out sorted by the index
/// in P_i.
inline CorrespondenceSet find_correspondences(const PointCloud& Pi, const PointCloud& Pj,
                                              const RigidTransform& Ti, const RigidTransform& Tj,
                                              double max_corr_dist, int i = 0, int j = 1) {
  CorrespondenceSet set;
  set.surface_i = i;
  set.surface_j = j;
  if (Pi.points.empty() || Pj.points.empty()) return set;

  std::vector<Eigen::Vector3d> a(Pi.points.size()), b(Pj.points.size());
  for (std::size_t k = 0; k < Pi.points.size(); ++k) a[k] = Ti.apply(Pi.points[k]);
  for (std::size_t k = 0; k < Pj.points.size(); ++k) b[k] = Tj.apply(Pj.points[k]);
  const KdTree tree_a(a), tree_b(b);

  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto to_b = tree_b.nearest(a[k]);
    if (to_b.distance > max_corr_dist) continue;
    const auto back = tree_a.nearest(b[to_b.index]);
    if (back.index == static_cast<int>(k))
      set.pairs.emplace_back(static_cast<int>(k), to_b.index);
  }
  return set;
}

/// All pairwise correspondence sets (i < j) under the current poses.
inline std::vector<CorrespondenceSet> find_all_correspondences(
    const MultiwayProblem& problem, const std::vector<RigidTransform>& poses) {
  std::vector<CorrespondenceSet> sets;
  const int n = static_cast<int>(problem.surfaces.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      sets.push_back(find_correspondences(problem.surfaces[i], problem.surfaces[j], poses[i],
                                          poses[j], problem.max_corr_dist, i, j));
  return sets;
}

/// Squared residuals of every correspondence, flattened in set order.
inline std::vector<double> squared_residuals(const std::vector<CorrespondenceSet>& sets,
                                             const std::vector<PointCloud>& surfaces,
                                             const std::vector<RigidTransform>& poses) {
  std::vector<double> out;
  for (const auto& set : sets) {
    for (const auto& [pi, qj] : set.pairs) {
      const Eigen::Vector3d r = poses[set.surface_i].apply(surfaces[set.surface_i].points[pi]) -
                                poses[set.surface_j].apply(surfaces[set.surface_j].points[qj]);
      out.push_back(r.squaredNorm());
    }
  }
  return out;
}

/// Closed-form minimizer of the robustified objective over the line process:
/// l = (mu / (mu + r^2))^2 for each squared residual.
inline LineProcess update_line_process(const std::vector<double>& squared_residuals_mm2,
                                       double mu) {
  if (mu <= 0) throw std::invalid_argument("update_line_process: mu must be positive");
  LineProcess lp;
  lp.weights.reserve(squared_residuals_mm2.size());
  for (double r2 : squared_residuals_mm2) {
    const double w = mu / (mu + r2);
    lp.weights.push_back(w * w);
  }
  return lp;
}

/// Robust penalty paired with the line process: Psi(l) = mu*(sqrt(l)-1)^2.
inline double line_process_penalty(double l, double mu) {
  const double s = std::sqrt(l) - 1.0;
  return mu * s * s;
}

/// Joint objective: lambda times the unit-weight consecutive-pair term plus,
/// for every pair, the weighted data term and the line-process penalty.
inline double evaluate_objective(const MultiwayProblem& problem,
                                 const std::vector<CorrespondenceSet>& sets,
                                 const std::vector<RigidTransform>& poses, const LineProcess& lp,
                                 double mu) {
  double energy = 0.0;
  std::size_t flat = 0;
  for (const auto& set : sets) {
    const bool consecutive = set.surface_j == set.surface_i + 1;
    for (const auto& [pi, qj] : set.pairs) {
      const Eigen::Vector3d r = poses[set.surface_i].apply(problem.surfaces[set.surface_i].points[pi]) -
                                poses[set.surface_j].apply(problem.surfaces[set.surface_j].points[qj]);
      const double r2 = r.squaredNorm();
      const double l = lp.weights[flat++];
      energy += l * r2 + line_process_penalty(l, mu);
      if (consecutive) energy += problem.lambda * r2;
    }
  }
  return energy;
}

struct PoseUpdate {
  std::vector<RigidTransform> poses;
  Eigen::VectorXd stacked_twists;  // 6 entries per surface, surface 0 pinned to zero
  bool damped = false;
};

/// One Gauss-Newton step on all free poses: builds the weighted normal
/// equations of the linearized residuals and applies the resulting twists.
/// Surface 0 is the gauge anchor and never moves. `relative_damping` scales an
/// extra diagonal term used by the caller's backtracking; rank-deficient
/// systems additionally self-damp and set `damped`.
inline PoseUpdate solve_pose_update(const MultiwayProblem& problem,
                                    const std::vector<CorrespondenceSet>& sets,
                                    const std::vector<RigidTransform>& poses, const LineProcess& lp,
                                    double relative_damping = 0.0) {
  const int n = static_cast<int>(problem.surfaces.size());
  const int dof = 6 * (n - 1);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dof, dof);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dof);

  auto jacobian = [](const Eigen::Vector3d& p, double sign) {
    Eigen::Matrix<double, 3, 6> J;
    Eigen::Matrix3d skew;
    skew << 0, -p.z(), p.y(), p.z(), 0, -p.x(), -p.y(), p.x(), 0;
    J.leftCols<3>() = -sign * skew;
    J.rightCols<3>() = sign * Eigen::Matrix3d::Identity();
    return J;
  };

  std::size_t flat = 0;
  std::size_t total_pairs = 0;
  for (const auto& set : sets) {
    const bool consecutive = set.surface_j == set.surface_i + 1;
    const int bi = (set.surface_i - 1) * 6;  // negative for the anchored surface
    const int bj = (set.surface_j - 1) * 6;
    for (const auto& [pi, qj] : set.pairs) {
      ++total_pairs;
      const Eigen::Vector3d p = poses[set.surface_i].apply(problem.surfaces[set.surface_i].points[pi]);
      const Eigen::Vector3d q = poses[set.surface_j].apply(problem.surfaces[set.surface_j].points[qj]);
      const Eigen::Vector3d r = p - q;
      const double w = lp.weights[flat++] + (consecutive ? problem.lambda : 0.0);
      if (w <= 0) continue;
      const Eigen::Matrix<double, 3, 6> Ji = jacobian(p, +1.0);
      const Eigen::Matrix<double, 3, 6> Jj = jacobian(q, -1.0);
      if (bi >= 0) {
        H.block<6, 6>(bi, bi) += w * Ji.transpose() * Ji;
        g.segment<6>(bi) += w * Ji.transpose() * r;
      }
      H.block<6, 6>(bj, bj) += w * Jj.transpose() * Jj;
      g.segment<6>(bj) += w * Jj.transpose() * r;
      if (bi >= 0) {
        const Eigen::Matrix<double, 6, 6> Hij = w * Ji.transpose() * Jj;
        H.block<6, 6>(bi, bj) += Hij;
        H.block<6, 6>(bj, bi) += Hij.transpose();
      }
    }
  }
  if (total_pairs == 0)
    throw std::invalid_argument("solve_pose_update: no correspondences to optimize");

  const double diag_scale = std::max(H.diagonal().maxCoeff(), 1.0);
  if (relative_damping > 0.0)
    H.diagonal().array() += relative_damping * diag_scale;

  PoseUpdate update;
  Eigen::VectorXd xi = H.ldlt().solve(-g);
  // Rank-deficient or otherwise unreliable solve: retry with diagonal damping.
  if (!xi.allFinite() || (H * xi + g).norm() > 1e-6 * std::max(1.0, g.norm())) {
    Eigen::MatrixXd Hd = H;
    Hd.diagonal().array() += 1e-8 * diag_scale;
    xi = Hd.ldlt().solve(-g);
    update.damped = true;
    if (!xi.allFinite()) xi.setZero();
  }

  update.stacked_twists = Eigen::VectorXd::Zero(6 * n);
  update.stacked_twists.tail(dof) = xi;
  update.poses = poses;
  for (int m = 1; m < n; ++m) {
    const TwistVector t = TwistVector::from_vector(xi.segment<6>((m - 1) * 6));
    update.poses[m] = apply_twist(t, poses[m]);
  }
  return update;
}

/// Alternates the closed-form line-process update with damped Gauss-Newton
/// pose steps while annealing mu from max_corr_dist^2 down to mu_floor.
/// Correspondences are recomputed at every anneal step. The merged cloud is
/// the pose-aligned concatenation of the inputs after statistical outlier
/// removal.
inline RegistrationResult multiway_register(const MultiwayProblem& problem) {
  problem.validate();
  const int n = static_cast<int>(problem.surfaces.size());

  RegistrationResult result;
  result.poses.assign(n, RigidTransform::identity());
  result.stacked_update = Eigen::VectorXd::Zero(6 * n);

  double mu = problem.mu_init > 0 ? problem.mu_init : problem.max_corr_dist * problem.max_corr_dist;
  mu = std::max(mu, problem.mu_floor);
  auto sets = find_all_correspondences(problem, result.poses);
  auto pair_count = [&]() {
    std::size_t c = 0;
    for (const auto& s : sets) c += s.pairs.size();
    return c;
  };

  if (pair_count() == 0) {
    result.no_correspondences = true;
  } else {
    int phase_iters = 0;
    for (int it = 0; it < problem.max_iterations; ++it) {
      if (phase_iters == problem.mu_interval && mu > problem.mu_floor) {
        mu = std::max(mu / problem.mu_divisor, problem.mu_floor);
        sets = find_all_correspondences(problem, result.poses);
        phase_iters = 0;
        if (pair_count() == 0) break;
      }

      const auto res2 = squared_residuals(sets, problem.surfaces, result.poses);
      const LineProcess lp = update_line_process(res2, mu);
      const double before = evaluate_objective(problem, sets, result.poses, lp, mu);

      PoseUpdate update = solve_pose_update(problem, sets, result.poses, lp);
      double after = evaluate_objective(problem, sets, update.poses, lp, mu);
      double damping = 0.0;
      int tries = 0;
      while (after > before + 1e-12 * (1.0 + before) && tries < 10) {
        damping = damping == 0.0 ? 1e-4 : damping * 10.0;
        update = solve_pose_update(problem, sets, result.poses, lp, damping);
        after = evaluate_objective(problem, sets, update.poses, lp, mu);
        ++tries;
      }
      if (after > before + 1e-12 * (1.0 + before)) {
        // No acceptable step; stand still this iteration.
        update.poses = result.poses;
        update.stacked_twists.setZero();
        after = before;
      }
      result.damped_solve = result.damped_solve || update.damped || damping > 0.0;

      result.poses = update.poses;
      result.stacked_update = update.stacked_twists;
      result.objective_history.push_back(after);
      result.mu_history.push_back(mu);
      ++result.iterations;
      ++phase_iters;

      double max_twist = 0.0;
      for (int m = 0; m < n; ++m)
        max_twist = std::max(max_twist,
                             TwistVector::from_vector(update.stacked_twists.segment<6>(6 * m)).max_abs());
      if (max_twist < problem.twist_tolerance) {
        if (mu <= problem.mu_floor) break;
        mu = std::max(mu / problem.mu_divisor, problem.mu_floor);
        sets = find_all_correspondences(problem, result.poses);
        phase_iters = 0;
        if (pair_count() == 0) break;
      }
    }
  }

  PointCloud merged;
  for (int i = 0; i < n; ++i) {
    const PointCloud aligned = transform_cloud(problem.surfaces[i], result.poses[i], "base");
    merged = i == 0 ? aligned : concatenate(merged, aligned);
  }
  merged.frame_tag = "base";
  result.merged =
      remove_statistical_outliers(merged, problem.merge_filter_k, problem.merge_filter_std_ratio);
  return result;
}

}  // namespace ausculta
