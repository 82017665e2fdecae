#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "ergodic/error.hpp"
#include "ergodic/rng.hpp"

namespace ergodic::cartpole {

struct State {
    double cart_position = 0.0;
    double cart_velocity = 0.0;
    double pole_angle = 0.0;
    double pole_angular_velocity = 0.0;

    std::array<double, 4> as_array() const
    {
        return {cart_position, cart_velocity, pole_angle, pole_angular_velocity};
    }
    bool finite() const
    {
        return std::isfinite(cart_position) && std::isfinite(cart_velocity) && std::isfinite(pole_angle) &&
               std::isfinite(pole_angular_velocity);
    }
    State operator-() const
    {
        return {-cart_position, -cart_velocity, -pole_angle, -pole_angular_velocity};
    }
    friend bool operator==(const State&, const State&) = default;
};

/// Classic-control constants.
struct Params {
    double gravity = 9.8;
    double cart_mass = 1.0;
    double pole_mass = 0.1;
    double pole_half_length = 0.5;
    double force_magnitude = 10.0;
    double dt = 0.02;
    double angle_threshold = 12.0 * 2.0 * std::numbers::pi / 360.0;
    double position_threshold = 2.4;

    void validate() const
    {
        detail::require(gravity > 0 && cart_mass > 0 && pole_mass > 0 && pole_half_length > 0 &&
                            force_magnitude > 0 && dt > 0 && angle_threshold > 0 && position_threshold > 0,
                        "cartpole: all parameters must be positive");
    }
};

enum class Action : int { left = 0, right = 1 };

struct StepResult {
    State next;
    double reward = 1.0;
    bool terminated = false;
};

inline State reset(std::uint64_t seed, std::uint64_t stream = 0)
{
    Engine engine = make_engine(seed, stream);
    std::uniform_real_distribution<double> dist(-0.05, 0.05);
    State s;
    s.cart_position = dist(engine);
    s.cart_velocity = dist(engine);
    s.pole_angle = dist(engine);
    s.pole_angular_velocity = dist(engine);
    return s;
}

inline bool out_of_bounds(const State& s, const Params& p)
{
    return std::abs(s.cart_position) > p.position_threshold || std::abs(s.pole_angle) > p.angle_threshold;
}

/// One explicit-Euler step under an arbitrary horizontal force. Exposed for
/// tests that need zero force.
inline State integrate(const State& s, double force, const Params& p)
{
    if (!s.finite())
        throw DomainError("cartpole: non-finite state");
    const double total_mass = p.cart_mass + p.pole_mass;
    const double polemass_length = p.pole_mass * p.pole_half_length;
    const double cos_theta = std::cos(s.pole_angle);
    const double sin_theta = std::sin(s.pole_angle);

    const double temp =
        (force + polemass_length * s.pole_angular_velocity * s.pole_angular_velocity * sin_theta) / total_mass;
    const double theta_acc =
        (p.gravity * sin_theta - cos_theta * temp) /
        (p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos_theta * cos_theta / total_mass));
    const double x_acc = temp - polemass_length * theta_acc * cos_theta / total_mass;

    State next;
    next.cart_position = s.cart_position + p.dt * s.cart_velocity;
    next.cart_velocity = s.cart_velocity + p.dt * x_acc;
    next.pole_angle = s.pole_angle + p.dt * s.pole_angular_velocity;
    next.pole_angular_velocity = s.pole_angular_velocity + p.dt * theta_acc;
    return next;
}

inline StepResult step(const State& s, Action action, const Params& p = {})
{
    const double force = action == Action::right ? p.force_magnitude : -p.force_magnitude;
    StepResult result;
    result.next = integrate(s, force, p);
    result.reward = 1.0;
    result.terminated = out_of_bounds(result.next, p);
    return result;
}

/// Kinetic plus potential energy of the cart and a uniform rod pivoting at
/// the cart (potential zero at the pivot height).
inline double mechanical_energy(const State& s, const Params& p)
{
    const double l = p.pole_half_length;
    const double m = p.pole_mass;
    const double kinetic = 0.5 * (p.cart_mass + m) * s.cart_velocity * s.cart_velocity +
                           m * l * std::cos(s.pole_angle) * s.cart_velocity * s.pole_angular_velocity +
                           (2.0 / 3.0) * m * l * l * s.pole_angular_velocity * s.pole_angular_velocity;
    const double potential = m * p.gravity * l * std::cos(s.pole_angle);
    return kinetic + potential;
}

} // namespace ergodic::cartpole
