//! Loosely coupled baseline: per-agent EKF dead reckoning plus covariance
//! intersection.
//!
//! Every agent runs its own three-state pose filter. When an observer takes a
//! relative pose measurement of a landmark agent, it composes its current
//! pose estimate with the measurement to obtain a pose (and first-order
//! covariance) for the landmark, and relays that estimate. The landmark fuses
//! the relayed estimate with its own by covariance intersection, which is
//! consistent under unknown correlation at the price of conservatism. The
//! observer itself never updates from relative measurements.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_error, Error, Result};
use crate::fmath;
use crate::models::{eval_measurement, innovation, MotionModel, RelativeMeasurement};
use crate::numerics::{sym_inverse, symmetrize_mut, wrap_finite};
use crate::AgentId;

/// Convergence tolerance on the covariance-intersection weight.
pub const CI_OMEGA_TOL: f64 = 1e-6;

/// One agent's standalone pose filter.
#[derive(Debug, Clone, PartialEq)]
pub struct CiAgent {
    pub uid: AgentId,
    pub x: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub step: u32,
}

/// Relayed pose estimate (either direction of the relay/fused exchange).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CiPoseMessage {
    pub sender: AgentId,
    pub receiver: AgentId,
    pub step: u32,
    #[serde(with = "crate::serde_support::dvector")]
    pub x: DVector<f64>,
    #[serde(with = "crate::serde_support::dmatrix")]
    pub cov: DMatrix<f64>,
}

impl CiAgent {
    pub fn new(uid: AgentId, x0: DVector<f64>, p0: DMatrix<f64>) -> Result<Self> {
        if x0.len() != 3 {
            return Err(dim_error("pose state of length 3", x0.len()));
        }
        if p0.shape() != (3, 3) {
            return Err(dim_error("3x3 covariance", alloc::format!("{}x{}", p0.nrows(), p0.ncols())));
        }
        let mut cov = p0;
        symmetrize_mut(&mut cov);
        Ok(Self { uid, x: x0, cov, step: 0 })
    }

    /// Dead-reckoning propagation through the motion model.
    pub fn propagate(
        &mut self,
        control: &DVector<f64>,
        model: &dyn MotionModel,
        dt: f64,
    ) -> Result<()> {
        let (f, g) = model.jacobians(&self.x, control, dt)?;
        let q = model.process_noise(control)?;
        let mut x_next = model.step(&self.x, control, dt)?;
        model.wrap_state(&mut x_next);
        self.x = x_next;
        self.cov = &f * &self.cov * f.transpose() + &g * q * g.transpose();
        symmetrize_mut(&mut self.cov);
        self.step += 1;
        Ok(())
    }

    /// Standard EKF update with the agent's own absolute measurement.
    pub fn absolute_update(&mut self, meas: &RelativeMeasurement) -> Result<()> {
        meas.validate()?;
        if !meas.is_absolute() || meas.observer != self.uid {
            return Err(Error::Protocol {
                reason: alloc::string::String::from("absolute update must be the agent's own"),
            });
        }
        let (h, ht_a, _) = eval_measurement(meas, &self.x, &self.x)?;
        let r = innovation(meas, &h)?;
        let mut s = &meas.noise_cov + &ht_a * &self.cov * ht_a.transpose();
        symmetrize_mut(&mut s);
        let s_inv = sym_inverse(&s)?;
        let k = -(&self.cov * ht_a.transpose() * s_inv);
        self.x += &k * r;
        self.x[2] = wrap_finite(self.x[2]);
        self.cov -= &k * s * k.transpose();
        symmetrize_mut(&mut self.cov);
        Ok(())
    }

    /// Composes this agent's pose estimate with a relative pose measurement
    /// `z` (observer body frame, noise covariance `noise`) into a pose
    /// estimate for the observed agent, with first-order covariance
    /// `J1 P J1' + J2 R J2'`.
    pub fn relay_estimate(
        &self,
        z: &DVector<f64>,
        noise: &DMatrix<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if z.len() != 3 {
            return Err(dim_error("relative pose of length 3", z.len()));
        }
        if noise.shape() != (3, 3) {
            return Err(dim_error(
                "3x3 noise covariance",
                alloc::format!("{}x{}", noise.nrows(), noise.ncols()),
            ));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "relative pose measurement" });
        }
        let (s, c) = (fmath::sin(self.x[2]), fmath::cos(self.x[2]));
        let composed = DVector::from_vec(alloc::vec![
            self.x[0] + c * z[0] - s * z[1],
            self.x[1] + s * z[0] + c * z[1],
            wrap_finite(self.x[2] + z[2]),
        ]);
        let j1 = DMatrix::from_row_slice(3, 3, &[
            1.0, 0.0, -s * z[0] - c * z[1],
            0.0, 1.0, c * z[0] - s * z[1],
            0.0, 0.0, 1.0,
        ]);
        let j2 = DMatrix::from_row_slice(3, 3, &[
            c, -s, 0.0,
            s, c, 0.0,
            0.0, 0.0, 1.0,
        ]);
        let mut cov = &j1 * &self.cov * j1.transpose() + &j2 * noise * j2.transpose();
        symmetrize_mut(&mut cov);
        Ok((composed, cov))
    }

    /// Fuses a relayed pose estimate into this agent's own by covariance
    /// intersection; returns the chosen weight.
    pub fn fuse(&mut self, relayed_x: &DVector<f64>, relayed_cov: &DMatrix<f64>) -> Result<f64> {
        let (x, cov, omega) = ci_fuse(&self.x, &self.cov, relayed_x, relayed_cov)?;
        self.x = x;
        self.cov = cov;
        Ok(omega)
    }

    pub fn sigma3(&self) -> DVector<f64> {
        DVector::from_iterator(3, (0..3).map(|k| 3.0 * fmath::sqrt(self.cov[(k, k)].max(0.0))))
    }
}

/// Covariance intersection of two pose estimates with unknown correlation:
///
/// ```text
/// P^{-1} = w P1^{-1} + (1 - w) P2^{-1}
/// x      = P (w P1^{-1} x1 + (1 - w) P2^{-1} x2)
/// ```
///
/// with `w` in `[0, 1]` minimizing `trace(P)` by golden-section search (the
/// objective is convex in `w`). Heading components are fused on the branch
/// nearest `x1`'s heading and re-wrapped.
pub fn ci_fuse(
    x1: &DVector<f64>,
    p1: &DMatrix<f64>,
    x2: &DVector<f64>,
    p2: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>, f64)> {
    if x1.len() != 3 || x2.len() != 3 {
        return Err(dim_error("pose estimates of length 3", x1.len().max(x2.len())));
    }
    let info1 = sym_inverse(p1)?;
    let info2 = sym_inverse(p2)?;

    // Express the second heading on the branch closest to the first.
    let mut x2_adj = x2.clone();
    x2_adj[2] = x1[2] + wrap_finite(x2[2] - x1[2]);

    let fused_cov = |w: f64| -> Result<DMatrix<f64>> {
        let info = &info1 * w + &info2 * (1.0 - w);
        sym_inverse(&info)
    };
    let objective = |w: f64| -> Result<f64> { Ok(fused_cov(w)?.trace()) };

    let interior = golden_section_min(objective, 0.0, 1.0, CI_OMEGA_TOL)?;
    // The optimum may sit on the boundary, where the search stops half a
    // tolerance short; pick the best of the interior result and the endpoints.
    let mut omega = interior;
    let mut best = objective(interior)?;
    for candidate in [0.0, 1.0] {
        let value = objective(candidate)?;
        if value < best {
            best = value;
            omega = candidate;
        }
    }
    let cov = fused_cov(omega)?;
    let mut x = &cov * (&info1 * omega * x1 + &info2 * (1.0 - omega) * &x2_adj);
    x[2] = wrap_finite(x[2]);
    let mut cov = cov;
    symmetrize_mut(&mut cov);
    Ok((x, cov, omega))
}

/// Golden-section minimizer on `[a, b]` for a unimodal objective, to an
/// interval width of `tol`.
fn golden_section_min(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}
