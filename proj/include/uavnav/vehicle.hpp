#ifndef UAVNAV_VEHICLE_HPP
#define UAVNAV_VEHICLE_HPP

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "uavnav/errors.hpp"
#include "uavnav/geometry.hpp"

namespace uavnav {

/// Planar pose of the quadrotor at fixed altitude. yaw is kept in (-pi, pi].
struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  Vec2 position() const { return {x, y}; }
  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Velocity setpoint held for one control interval.
struct Command {
  double forward_velocity = 0.0;  // m/s
  double yaw_rate = 0.0;          // rad/s
  friend bool operator==(const Command&, const Command&) = default;
};

inline constexpr std::array<double, 3> kForwardVelocities = {0.0, 1.0, 2.0};
inline constexpr std::array<double, 5> kYawRates = {
    -std::numbers::pi / 2, -std::numbers::pi / 4, 0.0, std::numbers::pi / 4, std::numbers::pi / 2};
inline constexpr int kNumActions = static_cast<int>(kForwardVelocities.size() * kYawRates.size());

/// Flattened index into the velocity x yaw-rate grid, 0..14.
using ActionIndex = int;

/// index = 5 * velocity_slot + yaw_rate_slot.
inline Command decode_action(ActionIndex a) {
  if (a < 0 || a >= kNumActions)
    throw ContractViolation("action index " + std::to_string(a) + " outside [0, 14]");
  return {kForwardVelocities[static_cast<std::size_t>(a / 5)],
          kYawRates[static_cast<std::size_t>(a % 5)]};
}

/// Inverse of decode_action. Only exact grid values are accepted.
inline ActionIndex encode_action(const Command& c) {
  for (std::size_t v = 0; v < kForwardVelocities.size(); ++v) {
    for (std::size_t w = 0; w < kYawRates.size(); ++w) {
      if (kForwardVelocities[v] == c.forward_velocity && kYawRates[w] == c.yaw_rate)
        return static_cast<ActionIndex>(v * kYawRates.size() + w);
    }
  }
  throw ContractViolation("command is not on the action grid");
}

/// Exact constant-twist integration over `dt` seconds.
///
/// The chord of an arc with heading change 2h has length v*dt*sin(h)/h and
/// points along yaw + h, which is well conditioned as the yaw rate goes to 0.
inline VehicleState integrate(const VehicleState& s, const Command& c, double dt) {
  if (!(dt > 0.0)) throw ContractViolation("integrate: dt must be positive");
  const double v = c.forward_velocity;
  const double w = c.yaw_rate;
  double chord = v * dt;
  double half_turn = 0.0;
  if (std::abs(w) >= 1e-9) {
    half_turn = 0.5 * w * dt;
    chord *= std::sin(half_turn) / half_turn;
  }
  const double dir = s.yaw + half_turn;
  return {s.x + chord * std::cos(dir), s.y + chord * std::sin(dir), wrap_angle(s.yaw + w * dt)};
}

}  // namespace uavnav

#endif  // UAVNAV_VEHICLE_HPP
