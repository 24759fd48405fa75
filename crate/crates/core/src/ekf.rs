//! Centralized EKF over the stacked team state.
//!
//! This is the reference filter the decentralized implementation must
//! reproduce exactly. Propagation is agent-wise (the collective motion model
//! is block diagonal); the update applies one relative or absolute
//! measurement at a time, touching every agent whose estimate is correlated
//! with either participant. Multiple synchronized measurements are processed
//! sequentially in a canonical order so that centralized and decentralized
//! runs are step-for-step comparable.
//!
//! [`TeamBelief::naive_update`] is the deliberately wrong variant that zeroes
//! all cross-covariances before each update and only corrects the two
//! participants; it reproduces the overconfident filter that ignoring past
//! correlations yields.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_error, Error, Result};
use crate::models::{eval_measurement, innovation, RelativeMeasurement, Team};
use crate::numerics::{sym_inverse, symmetrize_mut};
use crate::AgentId;

/// Control inputs per agent for one propagation step.
pub type ControlSet = BTreeMap<AgentId, DVector<f64>>;

/// Stacked team state estimate with the full joint covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct TeamBelief {
    uids: Vec<AgentId>,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    /// Stacked mean, agent blocks in ascending uid order.
    pub x: DVector<f64>,
    /// Joint covariance; kept symmetric after every operation.
    pub cov: DMatrix<f64>,
    /// Completed filter steps.
    pub step: u32,
}

/// Per-update record: innovation, its covariance, the per-agent gains, and
/// the covariance trace before/after.
#[derive(Debug, Clone)]
pub struct UpdateDiagnostics {
    pub observer: AgentId,
    pub target: AgentId,
    pub innovation: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    pub gains: Vec<(AgentId, DMatrix<f64>)>,
    pub trace_before: f64,
    pub trace_after: f64,
}

impl TeamBelief {
    /// Builds a belief from per-agent initial means and covariances.
    /// Entries are sorted by uid; covariances are symmetrized on ingest.
    pub fn new(init: Vec<(AgentId, DVector<f64>, DMatrix<f64>)>) -> Result<Self> {
        if init.is_empty() {
            return Err(Error::InvalidArgument { what: "empty team" });
        }
        let mut init = init;
        init.sort_by_key(|(uid, _, _)| *uid);
        for w in init.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument { what: "duplicate agent uid" });
            }
        }
        let mut uids = Vec::with_capacity(init.len());
        let mut dims = Vec::with_capacity(init.len());
        let mut offsets = Vec::with_capacity(init.len());
        let mut total = 0usize;
        for (uid, x0, p0) in &init {
            if p0.nrows() != x0.len() || p0.ncols() != x0.len() {
                return Err(dim_error(
                    alloc::format!("{0}x{0} covariance for agent {uid}", x0.len()),
                    alloc::format!("{}x{}", p0.nrows(), p0.ncols()),
                ));
            }
            uids.push(*uid);
            dims.push(x0.len());
            offsets.push(total);
            total += x0.len();
        }
        let mut x = DVector::zeros(total);
        let mut cov = DMatrix::zeros(total, total);
        for (k, (_, x0, p0)) in init.iter().enumerate() {
            x.rows_mut(offsets[k], dims[k]).copy_from(x0);
            cov.view_mut((offsets[k], offsets[k]), (dims[k], dims[k]))
                .copy_from(p0);
        }
        symmetrize_mut(&mut cov);
        Ok(Self { uids, dims, offsets, x, cov, step: 0 })
    }

    pub fn uids(&self) -> &[AgentId] {
        &self.uids
    }

    pub fn agent_count(&self) -> usize {
        self.uids.len()
    }

    fn index_of(&self, uid: AgentId) -> Result<usize> {
        self.uids
            .binary_search(&uid)
            .map_err(|_| Error::UnknownAgent { uid })
    }

    /// Mean of one agent's block.
    pub fn agent_state(&self, uid: AgentId) -> Result<DVector<f64>> {
        let i = self.index_of(uid)?;
        Ok(self.x.rows(self.offsets[i], self.dims[i]).clone_owned())
    }

    /// Diagonal covariance block of one agent.
    pub fn agent_cov(&self, uid: AgentId) -> Result<DMatrix<f64>> {
        let i = self.index_of(uid)?;
        Ok(self
            .cov
            .view((self.offsets[i], self.offsets[i]), (self.dims[i], self.dims[i]))
            .clone_owned())
    }

    /// Cross-covariance block between two agents.
    pub fn cross_cov(&self, a: AgentId, b: AgentId) -> Result<DMatrix<f64>> {
        let i = self.index_of(a)?;
        let j = self.index_of(b)?;
        Ok(self
            .cov
            .view((self.offsets[i], self.offsets[j]), (self.dims[i], self.dims[j]))
            .clone_owned())
    }

    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }

    /// Per-axis 3-sigma bounds for one agent, from the covariance diagonal.
    pub fn sigma3(&self, uid: AgentId) -> Result<DVector<f64>> {
        let i = self.index_of(uid)?;
        let block = self
            .cov
            .view((self.offsets[i], self.offsets[i]), (self.dims[i], self.dims[i]));
        Ok(DVector::from_iterator(
            self.dims[i],
            (0..self.dims[i]).map(|k| 3.0 * crate::fmath::sqrt(block[(k, k)].max(0.0))),
        ))
    }

    /// Propagates every agent through its motion model. Diagonal covariance
    /// blocks gain the mapped input noise `G Q G^T`; cross blocks evolve as
    /// `F_i P_ij F_j^T`.
    pub fn propagate(&mut self, controls: &ControlSet, team: &Team, dt: f64) -> Result<()> {
        let n = self.uids.len();
        let mut jac = Vec::with_capacity(n);
        for k in 0..n {
            let uid = self.uids[k];
            let model = team.model(uid)?;
            let u = controls
                .get(&uid)
                .ok_or(Error::MissingControl { uid })?;
            let x_k = self.x.rows(self.offsets[k], self.dims[k]).clone_owned();
            let (f, g) = model.jacobians(&x_k, u, dt)?;
            let q = model.process_noise(u)?;
            let mut x_next = model.step(&x_k, u, dt)?;
            model.wrap_state(&mut x_next);
            self.x.rows_mut(self.offsets[k], self.dims[k]).copy_from(&x_next);
            jac.push((f, g, q));
        }
        let mut next = DMatrix::zeros(self.cov.nrows(), self.cov.ncols());
        for i in 0..n {
            for j in 0..n {
                let p_ij = self
                    .cov
                    .view((self.offsets[i], self.offsets[j]), (self.dims[i], self.dims[j]));
                let block = &jac[i].0 * p_ij * jac[j].0.transpose();
                next.view_mut((self.offsets[i], self.offsets[j]), (self.dims[i], self.dims[j]))
                    .copy_from(&block);
            }
            let gqg = &jac[i].1 * &jac[i].2 * jac[i].1.transpose();
            let mut diag =
                next.view_mut((self.offsets[i], self.offsets[i]), (self.dims[i], self.dims[i]));
            diag += gqg;
        }
        symmetrize_mut(&mut next);
        self.cov = next;
        self.step += 1;
        Ok(())
    }

    /// Applies one measurement with the full cross-covariance bookkeeping.
    pub fn update(&mut self, meas: &RelativeMeasurement, team: &Team) -> Result<UpdateDiagnostics> {
        self.update_inner(meas, team, false)
    }

    /// Applies one measurement while ignoring (zeroing) every
    /// cross-covariance: only the participants' blocks change and the
    /// off-diagonal blocks stay zero afterwards.
    pub fn naive_update(
        &mut self,
        meas: &RelativeMeasurement,
        team: &Team,
    ) -> Result<UpdateDiagnostics> {
        for i in 0..self.uids.len() {
            for j in 0..self.uids.len() {
                if i != j {
                    self.cov
                        .view_mut((self.offsets[i], self.offsets[j]), (self.dims[i], self.dims[j]))
                        .fill(0.0);
                }
            }
        }
        self.update_inner(meas, team, true)
    }

    /// Applies synchronized measurements one at a time in the canonical
    /// ascending `(observer, target)` order.
    pub fn sequential_update(
        &mut self,
        measurements: &[RelativeMeasurement],
        team: &Team,
    ) -> Result<Vec<UpdateDiagnostics>> {
        let mut order: Vec<usize> = (0..measurements.len()).collect();
        order.sort_by_key(|&k| (measurements[k].observer, measurements[k].target));
        let mut diags = Vec::with_capacity(measurements.len());
        for k in order {
            diags.push(self.update(&measurements[k], team)?);
        }
        Ok(diags)
    }

    fn update_inner(
        &mut self,
        meas: &RelativeMeasurement,
        team: &Team,
        participants_only: bool,
    ) -> Result<UpdateDiagnostics> {
        meas.validate()?;
        if meas.step != self.step {
            return Err(Error::Protocol {
                reason: alloc::format!(
                    "measurement for step {} applied at step {}",
                    meas.step,
                    self.step
                ),
            });
        }
        let ia = self.index_of(meas.observer)?;
        let ib = self.index_of(meas.target)?;
        let nz = meas.dim();
        let x_a = self.x.rows(self.offsets[ia], self.dims[ia]).clone_owned();
        let x_b = self.x.rows(self.offsets[ib], self.dims[ib]).clone_owned();
        let (h, ht_a, ht_b) = eval_measurement(meas, &x_a, &x_b)?;
        let r = innovation(meas, &h)?;

        let p_aa = self.block(ia, ia);
        let p_bb = self.block(ib, ib);
        let p_ab = self.block(ia, ib);
        let p_ba = self.block(ib, ia);
        let mut s = &meas.noise_cov
            + &ht_a * &p_aa * ht_a.transpose()
            + &ht_b * &p_bb * ht_b.transpose()
            - &ht_a * &p_ab * ht_b.transpose()
            - &ht_b * &p_ba * ht_a.transpose();
        symmetrize_mut(&mut s);
        let s_inv = sym_inverse(&s).map_err(|e| match e {
            Error::Singular { eigenvalue } => Error::Singular { eigenvalue },
            other => other,
        })?;

        let trace_before = self.trace();
        let n = self.uids.len();
        let d = self.x.len();

        // Stacked gain, one block row per agent: K_i = (P_ib Ht_b' - P_ia Ht_a') S^{-1}.
        let mut k_stack = DMatrix::zeros(d, nz);
        let mut gains = Vec::with_capacity(n);
        for i in 0..n {
            if participants_only && i != ia && i != ib {
                gains.push((self.uids[i], DMatrix::zeros(self.dims[i], nz)));
                continue;
            }
            let p_ib = self.block(i, ib);
            let p_ia = self.block(i, ia);
            let k_i = (&p_ib * ht_b.transpose() - &p_ia * ht_a.transpose()) * &s_inv;
            k_stack.view_mut((self.offsets[i], 0), (self.dims[i], nz)).copy_from(&k_i);
            gains.push((self.uids[i], k_i));
        }

        let dx = &k_stack * &r;
        if participants_only {
            for &i in &[ia, ib] {
                let mut xi = self.x.rows_mut(self.offsets[i], self.dims[i]);
                xi += dx.rows(self.offsets[i], self.dims[i]);
            }
            for &i in &[ia, ib] {
                let k_i = k_stack.view((self.offsets[i], 0), (self.dims[i], nz)).clone_owned();
                let delta = &k_i * &s * k_i.transpose();
                let mut block = self
                    .cov
                    .view_mut((self.offsets[i], self.offsets[i]), (self.dims[i], self.dims[i]));
                block -= delta;
            }
        } else {
            self.x += dx;
            self.cov -= &k_stack * &s * k_stack.transpose();
        }
        symmetrize_mut(&mut self.cov);
        // A correction can push a heading across the branch cut; re-wrap
        // through the motion models so estimates stay in (-pi, pi].
        for i in 0..self.uids.len() {
            let model = team.model(self.uids[i])?;
            let mut x_i = self.x.rows(self.offsets[i], self.dims[i]).clone_owned();
            model.wrap_state(&mut x_i);
            self.x.rows_mut(self.offsets[i], self.dims[i]).copy_from(&x_i);
        }

        Ok(UpdateDiagnostics {
            observer: meas.observer,
            target: meas.target,
            innovation: r,
            innovation_cov: s,
            gains,
            trace_before,
            trace_after: self.trace(),
        })
    }

    fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.cov
            .view((self.offsets[i], self.offsets[j]), (self.dims[i], self.dims[j]))
            .clone_owned()
    }
}

/// Sorts measurements into the canonical processing order shared by the
/// centralized and decentralized filters: ascending `(observer, target)`.
pub fn sort_canonical(measurements: &mut [RelativeMeasurement]) {
    measurements.sort_by_key(|m| (m.observer, m.target));
}

impl core::fmt::Display for TeamBelief {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "TeamBelief(step {}, {} agents, trace {:.6})",
            self.step,
            self.uids.len(),
            self.trace()
        )
    }
}

impl TeamBelief {
    /// Internal consistency check used by tests and long-run assertions: the
    /// covariance must be symmetric and PSD within tolerance.
    pub fn check_cov_valid(&self) -> Result<()> {
        let asym = (&self.cov - self.cov.transpose()).amax();
        let scale = self.cov.amax().max(1.0);
        if asym > 1e-12 * scale {
            return Err(Error::Protocol { reason: "covariance not symmetric".to_string() });
        }
        let eig = self.cov.clone().symmetric_eigen();
        let lambda_max = eig.eigenvalues.amax();
        for l in eig.eigenvalues.iter() {
            if *l < -crate::numerics::PSD_EIG_TOL * lambda_max {
                return Err(Error::Protocol {
                    reason: alloc::format!("covariance indefinite: eigenvalue {l:e}"),
                });
            }
        }
        Ok(())
    }
}
