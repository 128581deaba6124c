#include <catch2/catch_amalgamated.hpp>

#include "ausculta/geometry.hpp"
#include "test_util.hpp"

using ausculta::RigidTransform;
using ausculta::TwistVector;
using Eigen::Vector3d;

namespace {

double max_abs_diff(const Eigen::Matrix3d& A, const Eigen::Matrix3d& B) {
  return (A - B).cwiseAbs().maxCoeff();
}

bool approx_identity(const RigidTransform& T, double tol = 1e-9) {
  return max_abs_diff(T.rotation, Eigen::Matrix3d::Identity()) <= tol &&
         T.translation.cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

TEST_CASE("compose: identity and inverse cases") {
  auto gen = testutil::rng(11);
  const RigidTransform T = testutil::random_pose(gen);

  const RigidTransform left = compose(RigidTransform::identity(), T);
  CHECK(max_abs_diff(left.rotation, T.rotation) <= 1e-12);
  CHECK((left.translation - T.translation).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK(approx_identity(compose(T, invert(T))));
  CHECK(approx_identity(compose(invert(T), T)));
}

TEST_CASE("compose: two quarter turns equal a half turn") {
  const RigidTransform q = RigidTransform::rotation_z(M_PI / 2.0);
  const RigidTransform half = compose(q, q);
  // Exact half-turn rotation matrix as the oracle.
  Eigen::Matrix3d expected;
  expected << -1, 0, 0, 0, -1, 0, 0, 0, 1;
  CHECK(max_abs_diff(half.rotation, expected) <= 1e-12);
}

TEST_CASE("invert: trivial cases") {
  CHECK(approx_identity(invert(RigidTransform::identity())));

  const RigidTransform t = RigidTransform::from_translation(1, 2, 3);
  const RigidTransform ti = invert(t);
  CHECK((ti.translation - Vector3d(-1, -2, -3)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("invert: involution over random poses") {
  auto gen = testutil::rng(12);
  for (int i = 0; i < 100; ++i) {
    const RigidTransform T = testutil::random_pose(gen);
    const RigidTransform back = invert(invert(T));
    CHECK(max_abs_diff(back.rotation, T.rotation) <= 1e-9);
    CHECK((back.translation - T.translation).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("chain_to_base examples") {
  const Vector3d origin(0, 0, 0);
  CHECK(ausculta::chain_to_base(origin, RigidTransform::identity(), RigidTransform::identity())
            .isZero(1e-12));

  const Vector3d p(10, 0, 0);
  const RigidTransform T_LE = RigidTransform::from_translation(0, 0, 100);
  const Vector3d out = ausculta::chain_to_base(p, RigidTransform::identity(), T_LE);
  CHECK((out - Vector3d(10, 0, 100)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("chain_to_base round-trips through the inverse chain") {
  auto gen = testutil::rng(13);
  for (int i = 0; i < 20; ++i) {
    const RigidTransform T_EB = testutil::random_pose(gen);
    const RigidTransform T_LE = testutil::random_pose(gen);
    const Vector3d p = testutil::random_vector(gen, 200.0);
    const Vector3d base = ausculta::chain_to_base(p, T_EB, T_LE);
    const Vector3d back = invert(T_LE).apply(invert(T_EB).apply(base));
    CHECK((back - p).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("chain_to_stethoscope examples") {
  const Vector3d p(4, -5, 6);
  const RigidTransform id = RigidTransform::identity();
  CHECK((ausculta::chain_to_stethoscope(p, id, id) - p).cwiseAbs().maxCoeff() <= 1e-12);

  auto gen = testutil::rng(14);
  const RigidTransform T = testutil::random_pose(gen);
  // T_SE == T_LE collapses the chain.
  CHECK((ausculta::chain_to_stethoscope(p, T, T) - p).cwiseAbs().maxCoeff() <= 1e-9);

  // Two-step oracle: invert(T_SE) applied to (T_LE applied to p).
  for (int i = 0; i < 20; ++i) {
    const RigidTransform T_SE = testutil::random_pose(gen);
    const RigidTransform T_LE = testutil::random_pose(gen);
    const Vector3d q = testutil::random_vector(gen, 200.0);
    const Vector3d expected = invert(T_SE).apply(T_LE.apply(q));
    CHECK((ausculta::chain_to_stethoscope(q, T_SE, T_LE) - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("apply_twist: zero twist returns the previous pose") {
  auto gen = testutil::rng(15);
  const RigidTransform T = testutil::random_pose(gen);
  const RigidTransform out = ausculta::apply_twist(TwistVector{}, T);
  CHECK(max_abs_diff(out.rotation, T.rotation) <= 1e-12);
  CHECK((out.translation - T.translation).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("apply_twist: pure translation row") {
  const TwistVector xi{0, 0, 0, 1, 0, 0};
  const RigidTransform out = ausculta::apply_twist(xi, RigidTransform::identity());
  CHECK(max_abs_diff(out.rotation, Eigen::Matrix3d::Identity()) <= 1e-12);
  CHECK((out.translation - Vector3d(1, 0, 0)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("apply_twist: small rotation matches the exact rotation oracle") {
  const TwistVector xi{0, 0, 1e-3, 0, 0, 0};
  const RigidTransform out = ausculta::apply_twist(xi, RigidTransform::identity());
  const Eigen::Matrix3d exact = RigidTransform::rotation_z(1e-3).rotation;
  CHECK(max_abs_diff(out.rotation, exact) <= 1e-6);
}

TEST_CASE("apply_twist: quadratic convergence to the exponential map") {
  // Fixed unit direction mixing rotation and translation; scaled down a
  // log-spaced sweep. The first-order update must stay within C*m^2 of the
  // exact exponential.
  const Eigen::Matrix<double, 6, 1> dir =
      (Eigen::Matrix<double, 6, 1>() << 0.4, -0.5, 0.3, 0.5, 0.2, -0.47).finished().normalized();
  for (double m : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    const TwistVector xi = TwistVector::from_vector(m * dir);
    const RigidTransform approx = ausculta::apply_twist(xi, RigidTransform::identity());
    const RigidTransform exact = testutil::exact_exp(xi);
    const double err = std::max(max_abs_diff(approx.rotation, exact.rotation),
                                (approx.translation - exact.translation).cwiseAbs().maxCoeff());
    CHECK(err <= 1.0 * m * m);
  }
}

TEST_CASE("rotation outputs stay orthonormal") {
  auto gen = testutil::rng(16);
  for (int i = 0; i < 50; ++i) {
    const RigidTransform A = testutil::random_pose(gen);
    const RigidTransform B = testutil::random_pose(gen);
    const RigidTransform C = compose(A, B);
    CHECK(max_abs_diff(C.rotation * C.rotation.transpose(), Eigen::Matrix3d::Identity()) <= 1e-9);

    const TwistVector xi = TwistVector::from_vector(0.05 * Eigen::Matrix<double, 6, 1>::Random());
    const RigidTransform D = ausculta::apply_twist(xi, A);
    CHECK(max_abs_diff(D.rotation * D.rotation.transpose(), Eigen::Matrix3d::Identity()) <= 1e-9);
    CHECK(std::abs(D.rotation.determinant() - 1.0) <= 1e-9);
  }
}
