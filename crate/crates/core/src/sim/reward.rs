//! Payoff, net reward and the depots' fixed assignment rule.

use std::collections::VecDeque;

use super::{PayloadRequest, Point};

/// Quadratic distance coefficient of the payoff (concave, so negative).
pub const Q1: f64 = -0.0167;
/// Linear distance coefficient of the payoff.
pub const Q2: f64 = 1.0;
/// Flag-fall coefficient, multiplied by the payload size.
pub const Q3: f64 = 2.0;
/// Travel cost per unit distance from the vehicle to the chosen depot.
pub const Q4: f64 = 0.2;
/// Net reward for travelling to a depot that had nothing suitable.
pub const INVALID_DEPOT_PENALTY: f64 = -5.0;

/// Distance at which the payoff curve peaks, `-Q2 / (2 Q1)`.
pub fn payoff_vertex() -> f64 {
    -Q2 / (2.0 * Q1)
}

/// Maximum payoff for carrying a payload of size `capacity` between two points.
pub fn payoff(origin: Point, destination: Point, capacity: u8) -> f64 {
    payoff_for_distance(origin.distance(destination), capacity)
}

pub fn payoff_for_distance(distance: f64, capacity: u8) -> f64 {
    Q1 * distance * distance + Q2 * distance + Q3 * f64::from(capacity)
}

/// Reward a vehicle at `vehicle_pos` earns for choosing the depot at
/// `depot_pos`, given what the depot handed out.
pub fn net_reward(vehicle_pos: Point, depot_pos: Point, assigned: Option<&PayloadRequest>) -> f64 {
    match assigned {
        Some(p) => p.payoff - Q4 * vehicle_pos.distance(depot_pos),
        None if vehicle_pos == depot_pos => 0.0,
        None => INVALID_DEPOT_PENALTY,
    }
}

/// First-fit over the FIFO queue: removes and returns the earliest request
/// the vehicle can carry. Remaining requests keep their order.
pub fn assign_payload(vehicle_capacity: u8, queue: &mut VecDeque<PayloadRequest>) -> Option<PayloadRequest> {
    let idx = queue.iter().position(|p| p.capacity <= vehicle_capacity)?;
    queue.remove(idx)
}
