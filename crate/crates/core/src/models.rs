//! Motion and measurement models with analytic Jacobians.
//!
//! Each agent follows `x(k+1) = f(x(k), u(k)) + g(x(k)) * eta(k)` with state
//! `x`, measured input `u`, and zero-mean Gaussian input noise `eta` of
//! covariance `Q`. The concrete model shipped here is the planar unicycle with
//! pose `[x, y, phi]`, odometry input `[v, omega]`, and odometry noise whose
//! linear-velocity component scales with speed. Exteroceptive measurements are
//! relative pose (observer body frame) and absolute position.
//!
//! Sign convention for measurement Jacobians: filters work with
//! `Ht_a = -dh/dx_observer` and `Ht_b = +dh/dx_target`, so the stacked
//! measurement matrix carries `-Ht_a` in the observer's block column and
//! `+Ht_b` in the target's.

use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, Matrix3x2, Vector2, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{dim_error, Error, Result};
use crate::fmath;
use crate::numerics::wrap_finite;
use crate::AgentId;

/// Planar pose with heading kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UnicyclePose {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl UnicyclePose {
    /// Builds a pose, wrapping the heading.
    pub fn new(x: f64, y: f64, phi: f64) -> Self {
        Self {
            x,
            y,
            phi: wrap_finite(phi),
        }
    }

    pub fn from_state(x: &DVector<f64>) -> Result<Self> {
        if x.len() != 3 {
            return Err(dim_error("state of length 3", x.len()));
        }
        Ok(Self::new(x[0], x[1], x[2]))
    }

    pub fn to_state(self) -> DVector<f64> {
        DVector::from_vec(alloc::vec![self.x, self.y, self.phi])
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.phi)
    }
}

/// One unicycle step: straight-line translation along the current heading
/// plus heading advance, both over `dt`.
pub fn unicycle_step(pose: UnicyclePose, v: f64, omega: f64, dt: f64) -> Result<UnicyclePose> {
    for (value, what) in [
        (pose.x, "pose.x"),
        (pose.y, "pose.y"),
        (pose.phi, "pose.phi"),
        (v, "v"),
        (omega, "omega"),
        (dt, "dt"),
    ] {
        if !value.is_finite() {
            return Err(Error::NonFinite { what });
        }
    }
    if dt <= 0.0 {
        return Err(Error::InvalidArgument { what: "dt must be positive" });
    }
    Ok(UnicyclePose::new(
        pose.x + v * fmath::cos(pose.phi) * dt,
        pose.y + v * fmath::sin(pose.phi) * dt,
        pose.phi + omega * dt,
    ))
}

/// Jacobians of [`unicycle_step`] at the given pose and measured velocity:
/// `F = df/dx` and the input-noise map `G` taking `(eta_v, eta_omega)` into
/// the state.
pub fn motion_jacobians(pose: UnicyclePose, v_measured: f64, dt: f64) -> (Matrix3<f64>, Matrix3x2<f64>) {
    let (s, c) = (fmath::sin(pose.phi), fmath::cos(pose.phi));
    let f = Matrix3::new(
        1.0, 0.0, -v_measured * s * dt,
        0.0, 1.0, v_measured * c * dt,
        0.0, 0.0, 1.0,
    );
    let g = Matrix3x2::new(
        c * dt, 0.0,
        s * dt, 0.0,
        0.0, dt,
    );
    (f, g)
}

/// Relative pose of `target` expressed in the observer's body frame:
/// `[dx, dy]` rotated by `-phi_observer`, heading difference wrapped.
pub fn relative_pose_h(observer: UnicyclePose, target: UnicyclePose) -> Vector3<f64> {
    let (s, c) = (fmath::sin(observer.phi), fmath::cos(observer.phi));
    let dx = target.x - observer.x;
    let dy = target.y - observer.y;
    Vector3::new(
        c * dx + s * dy,
        -s * dx + c * dy,
        wrap_finite(target.phi - observer.phi),
    )
}

/// Analytic Jacobians of [`relative_pose_h`] in the filter sign convention:
/// returns `(Ht_a, Ht_b)` with `Ht_a = -dh/dx_observer`, `Ht_b = +dh/dx_target`.
pub fn relative_pose_jacobians(
    observer: UnicyclePose,
    target: UnicyclePose,
) -> (Matrix3<f64>, Matrix3<f64>) {
    let (s, c) = (fmath::sin(observer.phi), fmath::cos(observer.phi));
    let dx = target.x - observer.x;
    let dy = target.y - observer.y;
    let rel_x = c * dx + s * dy;
    let rel_y = -s * dx + c * dy;
    let ht_b = Matrix3::new(
        c, s, 0.0,
        -s, c, 0.0,
        0.0, 0.0, 1.0,
    );
    let ht_a = Matrix3::new(
        c, s, -rel_y,
        -s, c, rel_x,
        0.0, 0.0, 1.0,
    );
    (ht_a, ht_b)
}

/// Absolute planar position of a pose.
pub fn absolute_position_h(pose: UnicyclePose) -> Vector2<f64> {
    Vector2::new(pose.x, pose.y)
}

/// Jacobian of [`absolute_position_h`]; the map is linear.
pub fn absolute_position_jacobian() -> Matrix2x3<f64> {
    Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
}

/// Odometry noise levels: the linear-velocity standard deviation is
/// `sigma_v_frac * |v|`, the angular one is `sigma_omega` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OdometryParams {
    pub sigma_v_frac: f64,
    pub sigma_omega: f64,
}

/// Draws one odometry reading `(v_meas, omega_meas)` from the true
/// velocities: `v_meas = v + N(0, (sigma_v_frac * v)^2)` and
/// `omega_meas = omega + N(0, sigma_omega^2)`.
pub fn sample_noisy_odometry<R: Rng + ?Sized>(
    rng: &mut R,
    v_true: f64,
    omega_true: f64,
    params: OdometryParams,
) -> (f64, f64) {
    let nv: f64 = rng.sample(StandardNormal);
    let nw: f64 = rng.sample(StandardNormal);
    (
        v_true + params.sigma_v_frac * v_true.abs() * nv,
        omega_true + params.sigma_omega * nw,
    )
}

/// Motion model interface used by the filters: the system function, its
/// Jacobians, the per-step input-noise covariance, and which state components
/// are periodic.
pub trait MotionModel {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;

    /// `f(x, u)` over one step of length `dt`.
    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> Result<DVector<f64>>;

    /// `(F, G)` evaluated at `(x, u)`: `F = df/dx` (state_dim square) and the
    /// noise map `G` (state_dim x noise_dim).
    fn jacobians(&self, x: &DVector<f64>, u: &DVector<f64>, dt: f64)
        -> Result<(DMatrix<f64>, DMatrix<f64>)>;

    /// Input-noise covariance `Q` (noise_dim square) for the measured input
    /// `u`; the state-space contribution is `G Q G^T`.
    fn process_noise(&self, u: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Re-wraps periodic state components in place.
    fn wrap_state(&self, x: &mut DVector<f64>);
}

/// Unicycle with speed-proportional odometry noise.
#[derive(Debug, Clone, Copy)]
pub struct Unicycle {
    pub odometry: OdometryParams,
}

impl Unicycle {
    pub fn new(odometry: OdometryParams) -> Self {
        Self { odometry }
    }

    fn check_dims(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        if x.len() != 3 {
            return Err(dim_error("unicycle state of length 3", x.len()));
        }
        if u.len() != 2 {
            return Err(dim_error("unicycle input of length 2", u.len()));
        }
        Ok(())
    }
}

impl MotionModel for Unicycle {
    fn state_dim(&self) -> usize {
        3
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn noise_dim(&self) -> usize {
        2
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
        self.check_dims(x, u)?;
        let pose = UnicyclePose::from_state(x)?;
        Ok(unicycle_step(pose, u[0], u[1], dt)?.to_state())
    }

    fn jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        dt: f64,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_dims(x, u)?;
        let pose = UnicyclePose::from_state(x)?;
        let (f, g) = motion_jacobians(pose, u[0], dt);
        Ok((
            DMatrix::from_iterator(3, 3, f.iter().cloned()),
            DMatrix::from_iterator(3, 2, g.iter().cloned()),
        ))
    }

    fn process_noise(&self, u: &DVector<f64>) -> Result<DMatrix<f64>> {
        if u.len() != 2 {
            return Err(dim_error("unicycle input of length 2", u.len()));
        }
        let sv = self.odometry.sigma_v_frac * u[0].abs();
        let sw = self.odometry.sigma_omega;
        let mut q = DMatrix::zeros(2, 2);
        q[(0, 0)] = sv * sv;
        q[(1, 1)] = sw * sw;
        Ok(q)
    }

    fn wrap_state(&self, x: &mut DVector<f64>) {
        x[2] = wrap_finite(x[2]);
    }
}

/// Team roster: each agent's id with its motion model, sorted by id.
pub struct Team {
    agents: Vec<(AgentId, Box<dyn MotionModel + Send + Sync>)>,
}

impl Team {
    pub fn new(mut agents: Vec<(AgentId, Box<dyn MotionModel + Send + Sync>)>) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::InvalidArgument { what: "team must have at least one agent" });
        }
        agents.sort_by_key(|(uid, _)| *uid);
        for window in agents.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::InvalidArgument { what: "duplicate agent uid" });
            }
        }
        if agents[0].0 == 0 {
            return Err(Error::InvalidArgument { what: "agent uid 0 is reserved" });
        }
        Ok(Self { agents })
    }

    /// Convenience constructor for a homogeneous unicycle team.
    pub fn unicycles(entries: &[(AgentId, OdometryParams)]) -> Result<Self> {
        Self::new(
            entries
                .iter()
                .map(|(uid, params)| {
                    (
                        *uid,
                        Box::new(Unicycle::new(*params)) as Box<dyn MotionModel + Send + Sync>,
                    )
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Agent ids in ascending order.
    pub fn uids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agents.iter().map(|(uid, _)| *uid)
    }

    pub fn contains(&self, uid: AgentId) -> bool {
        self.agents.binary_search_by_key(&uid, |(u, _)| *u).is_ok()
    }

    pub fn model(&self, uid: AgentId) -> Result<&(dyn MotionModel + Send + Sync)> {
        self.agents
            .binary_search_by_key(&uid, |(u, _)| *u)
            .map(|i| self.agents[i].1.as_ref())
            .map_err(|_| Error::UnknownAgent { uid })
    }
}

/// A relative or absolute exteroceptive measurement taken by `observer`.
/// `observer == target` encodes an absolute measurement of the observer's own
/// position.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeMeasurement {
    pub observer: AgentId,
    pub target: AgentId,
    pub z: DVector<f64>,
    pub noise_cov: DMatrix<f64>,
    pub step: u32,
}

impl RelativeMeasurement {
    pub fn is_absolute(&self) -> bool {
        self.observer == self.target
    }

    /// Expected measurement dimension: 3 for relative pose, 2 for absolute
    /// position.
    pub fn dim(&self) -> usize {
        if self.is_absolute() {
            2
        } else {
            3
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.z.len() != self.dim() {
            return Err(dim_error(
                alloc::format!("measurement of length {}", self.dim()),
                self.z.len(),
            ));
        }
        if self.noise_cov.nrows() != self.dim() || self.noise_cov.ncols() != self.dim() {
            return Err(dim_error(
                alloc::format!("{0}x{0} noise covariance", self.dim()),
                alloc::format!("{}x{}", self.noise_cov.nrows(), self.noise_cov.ncols()),
            ));
        }
        if self.z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "measurement" });
        }
        Ok(())
    }
}

/// Predicted measurement and sign-convention Jacobians for a measurement,
/// evaluated at the given observer/target state estimates. For absolute
/// measurements `Ht_b` is zero and the target state is ignored.
pub fn eval_measurement(
    meas: &RelativeMeasurement,
    x_observer: &DVector<f64>,
    x_target: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let obs = UnicyclePose::from_state(x_observer)?;
    if meas.is_absolute() {
        let h = absolute_position_h(obs);
        let j = absolute_position_jacobian();
        // Ht_a = -dh/dx_a per the filter convention; Ht_b vanishes.
        let ht_a = DMatrix::from_iterator(2, 3, (-j).iter().cloned());
        let ht_b = DMatrix::zeros(2, 3);
        Ok((DVector::from_vec(alloc::vec![h.x, h.y]), ht_a, ht_b))
    } else {
        let tgt = UnicyclePose::from_state(x_target)?;
        let h = relative_pose_h(obs, tgt);
        let (ht_a, ht_b) = relative_pose_jacobians(obs, tgt);
        Ok((
            DVector::from_vec(alloc::vec![h.x, h.y, h.z]),
            DMatrix::from_iterator(3, 3, ht_a.iter().cloned()),
            DMatrix::from_iterator(3, 3, ht_b.iter().cloned()),
        ))
    }
}

/// Innovation `z - h` with the heading component of a relative-pose residual
/// wrapped into `(-pi, pi]`.
pub fn innovation(meas: &RelativeMeasurement, predicted: &DVector<f64>) -> Result<DVector<f64>> {
    if predicted.len() != meas.z.len() {
        return Err(dim_error(meas.z.len(), predicted.len()));
    }
    let mut r = &meas.z - predicted;
    if !meas.is_absolute() {
        r[2] = wrap_finite(r[2]);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_PI_2, PI};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!(
            (a - b).abs() <= tol,
            "expected {a} ~ {b} (diff {}, tol {tol})",
            (a - b).abs()
        );
    }

    fn random_pose(rng: &mut ChaCha12Rng) -> UnicyclePose {
        UnicyclePose::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-PI..PI),
        )
    }

    /// Central finite differences of a pose-to-vector map.
    fn fd_jacobian<const M: usize>(
        f: impl Fn(UnicyclePose) -> [f64; M],
        at: UnicyclePose,
        wrap_rows: &[usize],
    ) -> [[f64; 3]; M] {
        let h = 1e-6;
        let mut out = [[0.0; 3]; M];
        for j in 0..3 {
            let mut lo = [at.x, at.y, at.phi];
            let mut hi = lo;
            lo[j] -= h;
            hi[j] += h;
            // Perturbed headings must not be re-wrapped before differencing.
            let plo = UnicyclePose { x: lo[0], y: lo[1], phi: lo[2] };
            let phi = UnicyclePose { x: hi[0], y: hi[1], phi: hi[2] };
            let flo = f(plo);
            let fhi = f(phi);
            for i in 0..M {
                let mut diff = fhi[i] - flo[i];
                if wrap_rows.contains(&i) {
                    diff = wrap_finite(diff);
                }
                out[i][j] = diff / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn unicycle_step_straight_line() {
        let p = unicycle_step(UnicyclePose::new(0.0, 0.0, 0.0), 1.0, 0.0, 1.0).unwrap();
        assert_close(p.x, 1.0, 1e-15);
        assert_close(p.y, 0.0, 1e-15);
        assert_close(p.phi, 0.0, 1e-15);
    }

    #[test]
    fn unicycle_step_along_y() {
        let p = unicycle_step(UnicyclePose::new(0.0, 0.0, FRAC_PI_2), 2.0, 0.0, 0.5).unwrap();
        assert_close(p.x, 0.0, 1e-15);
        assert_close(p.y, 1.0, 1e-15);
        assert_close(p.phi, FRAC_PI_2, 1e-15);
    }

    #[test]
    fn unicycle_step_pure_rotation() {
        let p = unicycle_step(UnicyclePose::new(1.0, 1.0, 0.0), 0.0, PI, 1.0).unwrap();
        assert_close(p.x, 1.0, 1e-15);
        assert_close(p.y, 1.0, 1e-15);
        assert_close(p.phi, PI, 1e-12);
    }

    #[test]
    fn unicycle_step_rejects_non_finite() {
        let p = UnicyclePose::new(0.0, 0.0, 0.0);
        assert!(matches!(
            unicycle_step(p, f64::NAN, 0.0, 1.0),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            unicycle_step(p, 1.0, 0.0, 0.0),
            Err(Error::InvalidArgument { .. })
        ));
    }

    #[test]
    fn unicycle_step_reverses_in_xy() {
        let start = UnicyclePose::new(0.3, -0.7, 0.9);
        let fwd = unicycle_step(start, 1.3, 0.0, 0.4).unwrap();
        let back = unicycle_step(fwd, -1.3, 0.0, 0.4).unwrap();
        assert_close(back.x, start.x, 1e-12);
        assert_close(back.y, start.y, 1e-12);
    }

    #[test]
    fn motion_jacobian_rows_at_zero_heading() {
        let (f, _) = motion_jacobians(UnicyclePose::new(0.0, 0.0, 0.0), 1.0, 0.1);
        assert_eq!(f.row(0).clone_owned(), nalgebra::RowVector3::new(1.0, 0.0, 0.0));
        assert_eq!(f.row(1).clone_owned(), nalgebra::RowVector3::new(0.0, 1.0, 0.1));
    }

    #[test]
    fn motion_jacobian_identity_at_zero_velocity() {
        let (f, _) = motion_jacobians(UnicyclePose::new(2.0, -1.0, 0.7), 0.0, 0.1);
        assert!((f - Matrix3::identity()).amax() < 1e-15);
    }

    #[test]
    fn motion_jacobian_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(100);
        for _ in 0..100 {
            let pose = random_pose(&mut rng);
            let v = rng.random_range(-2.0..2.0);
            let omega = rng.random_range(-1.0..1.0);
            let dt = 0.1;
            let (f, _) = motion_jacobians(pose, v, dt);
            let fd = fd_jacobian(
                |p| {
                    // Evaluate without wrapping so the difference is smooth.
                    [
                        p.x + v * p.phi.cos() * dt,
                        p.y + v * p.phi.sin() * dt,
                        p.phi + omega * dt,
                    ]
                },
                pose,
                &[],
            );
            for i in 0..3 {
                for j in 0..3 {
                    assert_close(f[(i, j)], fd[i][j], 1e-5);
                }
            }
        }
    }

    #[test]
    fn relative_pose_world_frame_observer() {
        let h = relative_pose_h(
            UnicyclePose::new(0.0, 0.0, 0.0),
            UnicyclePose::new(1.0, 1.0, FRAC_PI_2),
        );
        assert_close(h.x, 1.0, 1e-15);
        assert_close(h.y, 1.0, 1e-15);
        assert_close(h.z, FRAC_PI_2, 1e-15);
    }

    #[test]
    fn relative_pose_target_ahead() {
        let h = relative_pose_h(
            UnicyclePose::new(0.0, 0.0, FRAC_PI_2),
            UnicyclePose::new(0.0, 1.0, FRAC_PI_2),
        );
        assert_close(h.x, 1.0, 1e-15);
        assert_close(h.y, 0.0, 1e-15);
        assert_close(h.z, 0.0, 1e-15);
    }

    #[test]
    fn relative_pose_of_self_is_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..50 {
            let p = random_pose(&mut rng);
            let h = relative_pose_h(p, p);
            assert_eq!(h, Vector3::zeros());
        }
    }

    #[test]
    fn relative_jacobian_identity_at_coincident_zero_heading() {
        let p = UnicyclePose::new(3.0, -1.0, 0.0);
        let (_, ht_b) = relative_pose_jacobians(p, p);
        assert!((ht_b - Matrix3::identity()).amax() < 1e-15);
    }

    #[test]
    fn relative_jacobians_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(200);
        for _ in 0..100 {
            let obs = random_pose(&mut rng);
            let tgt = random_pose(&mut rng);
            let (ht_a, ht_b) = relative_pose_jacobians(obs, tgt);

            let fd_obs = fd_jacobian(
                |p| {
                    let h = relative_pose_h(p, tgt);
                    [h.x, h.y, h.z]
                },
                obs,
                &[2],
            );
            let fd_tgt = fd_jacobian(
                |p| {
                    let h = relative_pose_h(obs, p);
                    [h.x, h.y, h.z]
                },
                tgt,
                &[2],
            );
            for i in 0..3 {
                for j in 0..3 {
                    // Ht_a carries the sign flip relative to the raw Jacobian.
                    assert_close(-ht_a[(i, j)], fd_obs[i][j], 1e-5);
                    assert_close(ht_b[(i, j)], fd_tgt[i][j], 1e-5);
                }
            }
        }
    }

    #[test]
    fn relative_measurement_invariant_under_common_rotation() {
        // Rotating both poses about the observer leaves h unchanged, so the
        // Jacobian-predicted first-order change along that direction is zero.
        let mut rng = ChaCha12Rng::seed_from_u64(300);
        for _ in 0..50 {
            let obs = random_pose(&mut rng);
            let tgt = random_pose(&mut rng);
            let (ht_a, ht_b) = relative_pose_jacobians(obs, tgt);
            // Direction of a common rotation about the observer's position:
            // observer [0, 0, 1]; target [-(y_t - y_o), (x_t - x_o), 1].
            let d_obs = Vector3::new(0.0, 0.0, 1.0);
            let d_tgt = Vector3::new(-(tgt.y - obs.y), tgt.x - obs.x, 1.0);
            let first_order = -ht_a * d_obs + ht_b * d_tgt;
            assert!(
                first_order.amax() < 1e-6,
                "invariance direction leaked {first_order}"
            );
        }
    }

    #[test]
    fn absolute_position_projects() {
        let h = absolute_position_h(UnicyclePose::new(3.0, -2.0, 1.1));
        assert_eq!(h, Vector2::new(3.0, -2.0));
        assert_eq!(
            absolute_position_h(UnicyclePose::new(0.0, 0.0, 0.0)),
            Vector2::zeros()
        );
    }

    #[test]
    fn absolute_jacobian_is_exact() {
        let j = absolute_position_jacobian();
        let p = UnicyclePose::new(0.4, 0.6, -0.3);
        let fd = fd_jacobian(
            |q| {
                let h = absolute_position_h(q);
                [h.x, h.y]
            },
            p,
            &[],
        );
        for i in 0..2 {
            for k in 0..3 {
                assert_close(j[(i, k)], fd[i][k], 1e-9);
            }
        }
    }

    #[test]
    fn odometry_noise_scales_with_speed() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let params = OdometryParams { sigma_v_frac: 0.1, sigma_omega: 0.5_f64.to_radians() };
        let n = 100_000;
        let mut sum_sq_v = 0.0;
        let mut sum_sq_w = 0.0;
        for _ in 0..n {
            let (v, w) = sample_noisy_odometry(&mut rng, 1.0, 0.2, params);
            sum_sq_v += (v - 1.0) * (v - 1.0);
            sum_sq_w += (w - 0.2) * (w - 0.2);
        }
        let std_v = (sum_sq_v / n as f64).sqrt();
        let std_w = (sum_sq_w / n as f64).sqrt();
        assert_close(std_v, 0.1, 0.002);
        assert_close(std_w, 0.5_f64.to_radians(), 0.0002);
    }

    #[test]
    fn odometry_zero_noise_is_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(18);
        let params = OdometryParams { sigma_v_frac: 0.0, sigma_omega: 0.0 };
        let (v, w) = sample_noisy_odometry(&mut rng, 0.7, -0.3, params);
        assert_eq!((v, w), (0.7, -0.3));
    }

    #[test]
    fn team_rejects_duplicates_and_zero_uid() {
        let params = OdometryParams { sigma_v_frac: 0.1, sigma_omega: 0.01 };
        assert!(Team::unicycles(&[(1, params), (1, params)]).is_err());
        assert!(Team::unicycles(&[(0, params)]).is_err());
        let team = Team::unicycles(&[(2, params), (1, params)]).unwrap();
        assert_eq!(team.uids().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn innovation_wraps_heading() {
        let meas = RelativeMeasurement {
            observer: 1,
            target: 2,
            z: DVector::from_vec(vec![0.0, 0.0, PI - 0.01]),
            noise_cov: DMatrix::identity(3, 3),
            step: 1,
        };
        let predicted = DVector::from_vec(vec![0.0, 0.0, -PI + 0.01]);
        let r = innovation(&meas, &predicted).unwrap();
        assert_close(r[2], -0.02, 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn relative_h_vanishes_on_identical_poses(
            x in -50.0_f64..50.0, y in -50.0_f64..50.0, phi in -3.0_f64..3.0
        ) {
            let p = UnicyclePose::new(x, y, phi);
            let h = relative_pose_h(p, p);
            proptest::prop_assert_eq!(h, Vector3::zeros());
        }
    }
}
