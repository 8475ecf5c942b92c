//! Nonlinear rigid-body truth model.
//!
//! The simulated robot is a single rigid body with quaternion orientation,
//! integrated by semi-implicit Euler at a fine physics rate. Unlike the
//! controller's model it keeps the full nonlinear rotation dynamics
//! (world-frame inertia, gyroscopic torque) and the true mass, including
//! scheduled payload additions the controller is never told about. Stance
//! feet are pinned world anchors; swing feet teleport to their planned
//! touchdown targets when the gait puts them back on the ground.

use crate::srb::{RobotState, GRAVITY, INPUT_DIM};
use nalgebra::{Matrix3, SVector, UnitQuaternion, Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Per-group standard deviations of the measurement noise. Zeroing a field
/// makes that group exact; the random stream consumed is the same either
/// way, so runs with different noise settings stay comparable per seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasurementNoise {
    /// Euler angles (rad).
    pub angles: f64,
    /// Position (m).
    pub position: f64,
    /// Angular velocity (rad/s).
    pub rates: f64,
    /// Linear velocity (m/s).
    pub velocity: f64,
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self {
            angles: 1e-3,
            position: 1e-3,
            rates: 1e-3,
            velocity: 1e-3,
        }
    }
}

impl MeasurementNoise {
    pub fn zero() -> Self {
        Self {
            angles: 0.0,
            position: 0.0,
            rates: 0.0,
            velocity: 0.0,
        }
    }
}

/// Ground-truth world state.
#[derive(Debug, Clone)]
pub struct SimWorld {
    /// True body mass (kg), excluding scheduled payloads.
    pub mass: f64,
    /// Body-frame inertia (kg m^2).
    pub inertia: Matrix3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// World-frame angular velocity (rad/s).
    pub omega: Vector3<f64>,
    /// World-frame foot contact points; only meaningful for stance legs.
    pub foot_anchors: [Vector3<f64>; 4],
    /// Body-frame hip offsets used to place touchdowns.
    pub hip_offsets: [Vector3<f64>; 4],
    pub ground_height: f64,
    /// (time s, added mass kg); each entry applies from its time onward.
    pub payload_schedule: Vec<(f64, f64)>,
    pub physics_dt: f64,
    pub time: f64,
    prev_stance: [bool; 4],
}

impl SimWorld {
    /// Robot standing level at `height` with all feet anchored under the
    /// hips on flat ground.
    pub fn standing(
        mass: f64,
        inertia: Matrix3<f64>,
        hip_offsets: [Vector3<f64>; 4],
        height: f64,
        physics_dt: f64,
    ) -> Self {
        assert!(mass > 0.0 && height > 0.0 && physics_dt > 0.0);
        let position = Vector3::new(0.0, 0.0, height);
        let mut anchors = [Vector3::zeros(); 4];
        for (anchor, hip) in anchors.iter_mut().zip(hip_offsets.iter()) {
            *anchor = Vector3::new(hip.x, hip.y, 0.0);
        }
        Self {
            mass,
            inertia,
            orientation: UnitQuaternion::identity(),
            position,
            velocity: Vector3::zeros(),
            omega: Vector3::zeros(),
            foot_anchors: anchors,
            hip_offsets,
            ground_height: 0.0,
            payload_schedule: Vec::new(),
            physics_dt,
            time: 0.0,
            prev_stance: [true; 4],
        }
    }

    /// Mass currently carried: body plus every payload already dropped on.
    pub fn total_mass(&self) -> f64 {
        let payload: f64 = self
            .payload_schedule
            .iter()
            .filter(|(t, _)| self.time >= *t)
            .map(|(_, m)| m)
            .sum();
        self.mass + payload
    }

    /// Re-anchors legs that just touched down: nominal under-hip position
    /// plus a capture-point-style correction from the velocity error.
    pub fn update_contacts(&mut self, stance: &[bool; 4], v_cmd: Vector2<f64>, stance_time: f64) {
        for leg in 0..4 {
            if stance[leg] && !self.prev_stance[leg] {
                let hip_world = self.position + self.orientation * self.hip_offsets[leg];
                let k_capture =
                    ((self.position.z - self.ground_height).max(0.0) / GRAVITY).sqrt();
                let correction = v_cmd * (0.5 * stance_time)
                    + (self.velocity.xy() - v_cmd) * k_capture;
                self.foot_anchors[leg] = Vector3::new(
                    hip_world.x + correction.x,
                    hip_world.y + correction.y,
                    self.ground_height,
                );
            }
        }
        self.prev_stance = *stance;
    }

    /// One semi-implicit Euler step under the given ground reaction forces;
    /// forces on non-stance legs are ignored.
    pub fn physics_step(&mut self, grfs: &SVector<f64, INPUT_DIM>, stance: &[bool; 4]) {
        let dt = self.physics_dt;
        let m = self.total_mass();
        let mut force = Vector3::new(0.0, 0.0, -m * GRAVITY);
        let mut torque = Vector3::zeros();
        for leg in 0..4 {
            if !stance[leg] {
                continue;
            }
            let f = Vector3::new(grfs[3 * leg], grfs[3 * leg + 1], grfs[3 * leg + 2]);
            force += f;
            let r = self.foot_anchors[leg] - self.position;
            torque += r.cross(&f);
        }

        self.velocity += force * (dt / m);
        self.position += self.velocity * dt;

        let r_mat = self.orientation.to_rotation_matrix();
        let i_world = r_mat * self.inertia * r_mat.transpose();
        let momentum = i_world * self.omega;
        let omega_dot = i_world
            .try_inverse()
            .expect("inertia must stay invertible")
            * (torque - self.omega.cross(&momentum));
        self.omega += omega_dot * dt;
        self.orientation = UnitQuaternion::from_scaled_axis(self.omega * dt) * self.orientation;
        self.orientation.renormalize();
        self.time += dt;
    }

    /// Noise-free state in the controller's representation.
    pub fn true_state(&self) -> RobotState {
        let (roll, pitch, yaw) = self.orientation.euler_angles();
        RobotState {
            theta: Vector3::new(roll, pitch, yaw),
            p: self.position,
            omega: self.omega,
            v: self.velocity,
        }
    }

    /// Noisy measurement; always consumes exactly 12 normal draws.
    pub fn measure<R: Rng>(&self, noise: &MeasurementNoise, rng: &mut R) -> RobotState {
        let truth = self.true_state();
        let mut draws = [0.0_f64; 12];
        for d in draws.iter_mut() {
            *d = StandardNormal.sample(rng);
        }
        RobotState {
            theta: truth.theta + Vector3::new(draws[0], draws[1], draws[2]) * noise.angles,
            p: truth.p + Vector3::new(draws[3], draws[4], draws[5]) * noise.position,
            omega: truth.omega + Vector3::new(draws[6], draws[7], draws[8]) * noise.rates,
            v: truth.v + Vector3::new(draws[9], draws[10], draws[11]) * noise.velocity,
        }
    }

    /// Divergence monitor: too low or tipped too far.
    pub fn fell_over(&self, min_height: f64, max_tilt: f64) -> bool {
        let (roll, pitch, _) = self.orientation.euler_angles();
        self.position.z - self.ground_height < min_height
            || roll.abs() > max_tilt
            || pitch.abs() > max_tilt
    }
}
