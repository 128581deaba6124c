#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace ausculta {

/// Rigid-body transform in SE(3): p_out = rotation * p_in + translation.
/// All lengths are millimeters throughout the codebase.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  static RigidTransform from_translation(const Eigen::Vector3d& t) {
    RigidTransform T;
    T.translation = t;
    return T;
  }

  static RigidTransform from_translation(double x, double y, double z) {
    return from_translation(Eigen::Vector3d(x, y, z));
  }

  static RigidTransform rotation_about(const Eigen::Vector3d& axis, double rad) {
    RigidTransform T;
    T.rotation = Eigen::AngleAxisd(rad, axis.normalized()).toRotationMatrix();
    return T;
  }

  static RigidTransform rotation_x(double rad) { return rotation_about(Eigen::Vector3d::UnitX(), rad); }
  static RigidTransform rotation_y(double rad) { return rotation_about(Eigen::Vector3d::UnitY(), rad); }
  static RigidTransform rotation_z(double rad) { return rotation_about(Eigen::Vector3d::UnitZ(), rad); }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d M = Eigen::Matrix4d::Identity();
    M.topLeftCorner<3, 3>() = rotation;
    M.topRightCorner<3, 1>() = translation;
    return M;
  }

  /// Orthonormal with determinant +1, up to `tol`.
  bool is_valid(double tol = 1e-9) const {
    const Eigen::Matrix3d err = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
    return err.cwiseAbs().maxCoeff() <= tol && std::abs(rotation.determinant() - 1.0) <= tol &&
           translation.allFinite();
  }
};

/// Nearest rotation matrix in the Frobenius sense (polar factor via SVD).
inline Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& M) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return R;
}

inline RigidTransform orthonormalized(const RigidTransform& T) {
  return {nearest_rotation(T.rotation), T.translation};
}

/// Applies B first, then A.
inline RigidTransform compose(const RigidTransform& A, const RigidTransform& B) {
  RigidTransform C;
  C.rotation = nearest_rotation(A.rotation * B.rotation);
  C.translation = A.rotation * B.translation + A.translation;
  return C;
}

inline RigidTransform invert(const RigidTransform& T) {
  RigidTransform inv;
  inv.rotation = T.rotation.transpose();
  inv.translation = -(inv.rotation * T.translation);
  return inv;
}

/// LiDAR-frame point expressed in robot-base coordinates: p_B = T_EB * T_LE * p_L.
inline Eigen::Vector3d chain_to_base(const Eigen::Vector3d& p_lidar, const RigidTransform& T_EB,
                                     const RigidTransform& T_LE) {
  return T_EB.apply(T_LE.apply(p_lidar));
}

/// LiDAR-frame point expressed in stethoscope coordinates: p_S = T_SE^{-1} * T_LE * p_L.
inline Eigen::Vector3d chain_to_stethoscope(const Eigen::Vector3d& p_lidar, const RigidTransform& T_SE,
                                            const RigidTransform& T_LE) {
  return invert(T_SE).apply(T_LE.apply(p_lidar));
}

/// Small-motion parameterization of a pose update: rotation (rad) about x, y, z
/// followed by translation (mm). Valid as a linearization only for small
/// magnitudes; the solver renormalizes the rotation after applying one.
struct TwistVector {
  double alpha = 0.0;  // rotation about x
  double beta = 0.0;   // rotation about y
  double gamma = 0.0;  // rotation about z
  double a = 0.0;      // translation x
  double b = 0.0;      // translation y
  double c = 0.0;      // translation z

  /// First-order update matrix: identity plus the skew of (alpha, beta, gamma)
  /// and the translation column.
  Eigen::Matrix4d linearized_matrix() const {
    Eigen::Matrix4d M = Eigen::Matrix4d::Identity();
    M(0, 1) = -gamma;
    M(0, 2) = beta;
    M(1, 0) = gamma;
    M(1, 2) = -alpha;
    M(2, 0) = -beta;
    M(2, 1) = alpha;
    M(0, 3) = a;
    M(1, 3) = b;
    M(2, 3) = c;
    return M;
  }

  double max_abs() const {
    return std::max({std::abs(alpha), std::abs(beta), std::abs(gamma), std::abs(a), std::abs(b),
                     std::abs(c)});
  }

  Eigen::Matrix<double, 6, 1> as_vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << alpha, beta, gamma, a, b, c;
    return v;
  }

  static TwistVector from_vector(const Eigen::Matrix<double, 6, 1>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
};

/// Left-multiplies the linearized update onto T_prev and projects the rotation
/// block back to the nearest rotation.
inline RigidTransform apply_twist(const TwistVector& xi, const RigidTransform& T_prev) {
  const Eigen::Matrix4d M = xi.linearized_matrix() * T_prev.matrix();
  RigidTransform T;
  T.rotation = nearest_rotation(M.topLeftCorner<3, 3>());
  T.translation = M.topRightCorner<3, 1>();
  return T;
}

}  // namespace ausculta
