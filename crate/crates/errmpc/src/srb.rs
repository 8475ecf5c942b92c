//! Linearised single-rigid-body dynamics.
//!
//! The robot body is modelled as one rigid body driven by ground reaction
//! forces at the four feet, with leg dynamics ignored. The 13-element state
//! stacks Euler angles (Z-Y-X convention), world position, world angular
//! velocity, world linear velocity and a constant gravity entry that turns
//! the affine gravity term into a linear one:
//!
//! ```text
//! x = [roll pitch yaw | px py pz | wx wy wz | vx vy vz | g]
//! ```
//!
//! For small roll and pitch the Euler-angle rates reduce to the yaw-only
//! rotation of the angular velocity, which keeps the continuous dynamics
//! linear in the state given the current yaw and foot positions. Forward
//! Euler discretisation (`A = I + A_c dt`, `B = B_c dt`) is accurate enough
//! at control timesteps of a few tens of milliseconds and keeps matrix
//! construction allocation-free.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use thiserror::Error;

/// Gravitational acceleration baked into the constant state entry (m/s^2).
pub const GRAVITY: f64 = 9.81;

/// Number of state entries.
pub const STATE_DIM: usize = 13;
/// Number of input entries (four 3-vector ground reaction forces).
pub const INPUT_DIM: usize = 12;

#[derive(Debug, Error)]
pub enum SrbError {
    #[error("inertia matrix is singular or not positive definite")]
    SingularInertia,
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
}

/// Rigid-body state in world coordinates.
///
/// The gravity entry is not stored: it is a constant appended by
/// [`RobotState::to_vector`] and ignored by [`RobotState::from_vector`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RobotState {
    /// Euler angles `[roll, pitch, yaw]` (rad, Z-Y-X convention).
    pub theta: Vector3<f64>,
    /// CoM position (m).
    pub p: Vector3<f64>,
    /// Angular velocity in the world frame (rad/s).
    pub omega: Vector3<f64>,
    /// Linear velocity in the world frame (m/s).
    pub v: Vector3<f64>,
}

impl RobotState {
    /// Packs the state into the 13-vector used by the prediction matrices.
    pub fn to_vector(&self) -> SVector<f64, STATE_DIM> {
        let mut x = SVector::<f64, STATE_DIM>::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.theta);
        x.fixed_rows_mut::<3>(3).copy_from(&self.p);
        x.fixed_rows_mut::<3>(6).copy_from(&self.omega);
        x.fixed_rows_mut::<3>(9).copy_from(&self.v);
        x[12] = GRAVITY;
        x
    }

    /// Unpacks a 13-vector, dropping the constant gravity entry.
    pub fn from_vector(x: &SVector<f64, STATE_DIM>) -> Self {
        Self {
            theta: x.fixed_rows::<3>(0).into(),
            p: x.fixed_rows::<3>(3).into(),
            omega: x.fixed_rows::<3>(6).into(),
            v: x.fixed_rows::<3>(9).into(),
        }
    }
}

/// Inertial parameters and contact geometry behind one linearisation.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Body mass (kg).
    pub mass: f64,
    /// Rotational inertia about the CoM in the body frame (kg m^2).
    pub inertia: Matrix3<f64>,
    /// Foot positions relative to the CoM, world frame (m).
    pub foot_positions: [Vector3<f64>; 4],
}

/// Discrete-time prediction matrices `x_{t+1} = A x_t + B u_t`.
#[derive(Debug, Clone)]
pub struct DiscreteDynamics {
    pub a_mat: SMatrix<f64, STATE_DIM, STATE_DIM>,
    pub b_mat: SMatrix<f64, STATE_DIM, INPUT_DIM>,
    pub dt: f64,
}

impl DiscreteDynamics {
    /// Evaluates one prediction step. The gravity entry propagates through
    /// the identity row of `a_mat`, so the returned state needs no special
    /// handling.
    pub fn step(&self, x: &RobotState, u: &SVector<f64, INPUT_DIM>) -> RobotState {
        let next = self.a_mat * x.to_vector() + self.b_mat * u;
        RobotState::from_vector(&next)
    }
}

/// Skew-symmetric matrix such that `skew(r) * f = r x f`.
fn skew(r: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -r.z, r.y,
        r.z, 0.0, -r.x,
        -r.y, r.x, 0.0,
    )
}

/// Rotation about the world vertical by `yaw`.
fn rot_z(yaw: f64) -> Matrix3<f64> {
    let (s, c) = yaw.sin_cos();
    Matrix3::new(
        c, -s, 0.0,
        s, c, 0.0,
        0.0, 0.0, 1.0,
    )
}

/// Continuous-time dynamics matrices for the current yaw and contact
/// geometry.
///
/// Kinematics: Euler-angle rates are `Rz(yaw)^T omega` (small roll/pitch),
/// position rates are the linear velocity. Forces enter as `1/m` per foot on
/// the linear acceleration and as the world-inertia inverse times the
/// foot-position cross-product matrix on the angular acceleration. Gravity
/// pulls the vertical velocity through the constant state entry.
pub fn continuous_matrices(
    yaw: f64,
    params: &ModelParams,
) -> Result<(SMatrix<f64, STATE_DIM, STATE_DIM>, SMatrix<f64, STATE_DIM, INPUT_DIM>), SrbError> {
    if !(params.mass > 0.0) {
        return Err(SrbError::InvalidParams(format!("mass {} must be positive", params.mass)));
    }
    let sym_err = (params.inertia - params.inertia.transpose()).abs().max();
    if sym_err > 1e-9 {
        return Err(SrbError::InvalidParams(format!(
            "inertia matrix asymmetric by {sym_err:.3e}"
        )));
    }

    let rz = rot_z(yaw);
    // World-frame inertia follows the body through its yaw; roll and pitch
    // are assumed small, as in the kinematic block.
    let inertia_world = rz * params.inertia * rz.transpose();
    let inertia_world_inv = inertia_world
        .cholesky()
        .ok_or(SrbError::SingularInertia)?
        .inverse();

    let mut a_c = SMatrix::<f64, STATE_DIM, STATE_DIM>::zeros();
    a_c.fixed_view_mut::<3, 3>(0, 6).copy_from(&rz.transpose());
    a_c.fixed_view_mut::<3, 3>(3, 9).copy_from(&Matrix3::identity());
    a_c[(11, 12)] = -1.0;

    let mut b_c = SMatrix::<f64, STATE_DIM, INPUT_DIM>::zeros();
    for (leg, r) in params.foot_positions.iter().enumerate() {
        let torque = inertia_world_inv * skew(r);
        b_c.fixed_view_mut::<3, 3>(6, 3 * leg).copy_from(&torque);
        b_c.fixed_view_mut::<3, 3>(9, 3 * leg)
            .copy_from(&(Matrix3::identity() / params.mass));
    }
    Ok((a_c, b_c))
}

/// First-order hold discretisation `A = I + A_c dt`, `B = B_c dt`.
pub fn discretize(
    a_c: &SMatrix<f64, STATE_DIM, STATE_DIM>,
    b_c: &SMatrix<f64, STATE_DIM, INPUT_DIM>,
    dt: f64,
) -> DiscreteDynamics {
    assert!(dt > 0.0, "timestep must be positive");
    DiscreteDynamics {
        a_mat: SMatrix::identity() + a_c * dt,
        b_mat: b_c * dt,
        dt,
    }
}

/// Convenience wrapper: linearise and discretise in one call.
pub fn discrete_dynamics(
    yaw: f64,
    params: &ModelParams,
    dt: f64,
) -> Result<DiscreteDynamics, SrbError> {
    let (a_c, b_c) = continuous_matrices(yaw, params)?;
    Ok(discretize(&a_c, &b_c, dt))
}
