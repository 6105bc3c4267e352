#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "uavnav/rng.hpp"
#include "uavnav/vehicle.hpp"

namespace uavnav {
namespace {

constexpr double kPi = std::numbers::pi;

TEST(DecodeAction, GridCorners) {
  EXPECT_EQ(decode_action(0), (Command{0.0, -kPi / 2}));
  EXPECT_EQ(decode_action(7), (Command{1.0, 0.0}));
  EXPECT_EQ(decode_action(14), (Command{2.0, kPi / 2}));
}

TEST(DecodeAction, BijectionAndRange) {
  for (int a = 0; a < kNumActions; ++a) EXPECT_EQ(encode_action(decode_action(a)), a);
  EXPECT_THROW(decode_action(-1), ContractViolation);
  EXPECT_THROW(decode_action(15), ContractViolation);
  EXPECT_THROW(encode_action({0.5, 0.0}), ContractViolation);
}

TEST(WrapAngle, HalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double w = wrap_angle(rng.uniform(-50, 50));
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
  }
}

TEST(Integrate, ClosedFormCases) {
  const VehicleState spin = integrate({0, 0, 0}, {0, kPi / 2}, 1.0);
  EXPECT_EQ(spin.x, 0.0);
  EXPECT_EQ(spin.y, 0.0);
  EXPECT_DOUBLE_EQ(spin.yaw, kPi / 2);

  const VehicleState line = integrate({0, 0, 0}, {1, 0}, 0.2);
  EXPECT_DOUBLE_EQ(line.x, 0.2);
  EXPECT_EQ(line.y, 0.0);
  EXPECT_EQ(line.yaw, 0.0);

  const VehicleState arc = integrate({0, 0, 0}, {1, kPi / 2}, 1.0);
  EXPECT_NEAR(arc.x, 2 / kPi, 1e-15);
  EXPECT_NEAR(arc.y, 2 / kPi, 1e-15);
  EXPECT_NEAR(arc.yaw, kPi / 2, 1e-15);
}

TEST(Integrate, RejectsNonPositiveDt) {
  EXPECT_THROW(integrate({}, {1, 0}, 0.0), ContractViolation);
}

TEST(Integrate, ChordNeverExceedsArcLength) {
  Rng rng(2);
  for (int i = 0; i < 2000; ++i) {
    const VehicleState s{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-kPi, kPi)};
    const Command c = decode_action(static_cast<int>(rng.below(15)));
    const double dt = rng.uniform(0.01, 3.0);
    const VehicleState n = integrate(s, c, dt);
    EXPECT_LE(std::hypot(n.x - s.x, n.y - s.y), c.forward_velocity * dt + 1e-12);
  }
}

TEST(Integrate, SmallYawRateApproachesStraightLine) {
  // The exact arc drifts sideways by v * w * dt^2 / 2 relative to the line:
  // 5e-9 m for v = 1, |w| = 1e-6, dt = 0.1.
  for (double w : {1e-6, -1e-6}) {
    const VehicleState s{1.0, -2.0, 0.7};
    const VehicleState arc = integrate(s, {1.0, w}, 0.1);
    const VehicleState line = integrate(s, {1.0, 0.0}, 0.1);
    EXPECT_NEAR(arc.x, line.x, 1e-8);
    EXPECT_NEAR(arc.y, line.y, 1e-8);
  }
  // At the stock dt = 0.2 and top speed the drift is 4e-8 m and matches the closed form.
  const VehicleState arc = integrate({0, 0, 0}, {2.0, 1e-6}, 0.2);
  EXPECT_NEAR(arc.y, 2.0 * 1e-6 * 0.04 / 2, 1e-15);
  EXPECT_NEAR(arc.x, 0.4, 1e-12);
}

TEST(Integrate, TwoHalfStepsEqualOneStep) {
  Rng rng(4);
  for (int i = 0; i < 2000; ++i) {
    const VehicleState s{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-kPi, kPi)};
    const Command c = decode_action(static_cast<int>(rng.below(15)));
    const double dt = 0.2;
    const VehicleState one = integrate(s, c, dt);
    const VehicleState two = integrate(integrate(s, c, dt / 2), c, dt / 2);
    EXPECT_NEAR(one.x, two.x, 1e-12);
    EXPECT_NEAR(one.y, two.y, 1e-12);
    EXPECT_NEAR(std::remainder(one.yaw - two.yaw, 2 * kPi), 0.0, 1e-12);
  }
}

}  // namespace
}  // namespace uavnav
