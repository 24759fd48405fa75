//! Decentralized EKF with implicit cross-covariance tracking.
//!
//! Instead of propagating cross-covariances `P_ij` explicitly (which couples
//! every pair of agents at every step), each agent i carries a local factor
//! `Phi_i` that accumulates its motion Jacobians, `Phi_i(k+1) = F_i(k) Phi_i(k)`
//! from `Phi_i(0) = I`, and the team shares a registry of blocks `Pi_ij`
//! (zero at start) such that
//!
//! ```text
//! P_ij = Phi_i * Pi_ij * Phi_j^T
//! ```
//!
//! holds at every step. Propagation then needs no communication at all. When
//! agent `a` measures agent `b`, agent `a` becomes the interim master: it
//! acquires one landmark message from `b`, forms the innovation `r`, its
//! covariance `S`, the whitened residual `rbar = S^{-1/2} r`, and per-agent
//! gain factors `Gamma_i` with `K_i = Phi_i * Gamma_i * S^{-1/2}`. One
//! broadcast update message then lets every agent reproduce its block of the
//! centralized update locally:
//!
//! ```text
//! x_i   <- x_i + Phi_i Gamma_i rbar
//! P_i   <- P_i - Phi_i Gamma_i Gamma_i^T Phi_i^T
//! Pi_jl <- Pi_jl - Gamma_j Gamma_l^T
//! ```
//!
//! Two registry layouts are implemented. [`RegistryVariant::FullRegistry`]
//! keeps every unordered pair `(j, l)` at every agent: the update message is
//! constant-size (`Gamma_a`, `Gamma_b`, and the two shared factors
//! `T_b = Phi_b^T Ht_b^T S^{-1/2}`, `T_a = Phi_a^T Ht_a^T S^{-1/2}` from which
//! bystanders compute their own `Gamma_j = Pi_jb T_b - Pi_ja T_a`), at
//! `O(N^2)` storage per agent. [`RegistryVariant::OwnRow`] keeps only the
//! agent's own row `Pi_ij`, shrinking storage to `O(N)`; the landmark then
//! ships its row to the master, which computes every `Gamma_j` itself and
//! broadcasts the full list, making the update message `O(N)`.
//!
//! An agent that takes an absolute measurement of itself is an interim master
//! that needs no landmark message: the same algebra applies with `Ht_b = 0`
//! and the landmark index replaced by the master's own.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_error, Error, Result};
use crate::models::{eval_measurement, innovation, MotionModel, RelativeMeasurement};
use crate::numerics::{cond_2, sym_inv_sqrt, symmetrize_mut};
use crate::AgentId;

/// Condition-number ceiling on motion Jacobians and their accumulated
/// products; beyond this the factorization premise (invertible `Phi`) fails.
pub const PHI_COND_LIMIT: f64 = 1e12;

/// Which subset of the `Pi` registry an agent maintains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RegistryVariant {
    /// Every unordered pair of the team; constant-size update messages.
    FullRegistry,
    /// Only the agent's own row; update messages grow linearly with the team.
    OwnRow,
}

/// Registry storage. `Full` keys are unordered pairs `(j, l)` with `j < l`;
/// `Pi_lj` is realized as the transpose of the stored block on read. `OwnRow`
/// keys are the other agent `j`, holding `Pi_{i,j}` for the owner `i`.
#[derive(Debug, Clone, PartialEq)]
pub enum Registry {
    Full(BTreeMap<(AgentId, AgentId), DMatrix<f64>>),
    OwnRow(BTreeMap<AgentId, DMatrix<f64>>),
}

/// Data the landmark agent `b` sends its interim master: its propagated
/// estimate, covariance, and `Phi` factor, plus (own-row layout only) its
/// registry row for all agents other than the two participants.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LandmarkMessage {
    pub sender: AgentId,
    pub master: AgentId,
    pub step: u32,
    #[serde(with = "crate::serde_support::dvector")]
    pub x: DVector<f64>,
    #[serde(with = "crate::serde_support::dmatrix")]
    pub phi: DMatrix<f64>,
    #[serde(with = "crate::serde_support::dmatrix")]
    pub cov: DMatrix<f64>,
    /// `Pi_bj` for `j` outside `{master, sender}`, ascending by uid; empty in
    /// the full-registry layout.
    #[serde(with = "crate::serde_support::tagged_blocks")]
    pub own_row: Vec<(AgentId, DMatrix<f64>)>,
}

/// Update-message body; see the module docs for the two layouts.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum UpdatePayload {
    /// Constant-size factors: receivers derive bystander gains locally.
    Factors {
        #[serde(with = "crate::serde_support::dmatrix")]
        gamma_a: DMatrix<f64>,
        #[serde(with = "crate::serde_support::dmatrix")]
        gamma_b: DMatrix<f64>,
        #[serde(with = "crate::serde_support::dmatrix")]
        t_b: DMatrix<f64>,
        #[serde(with = "crate::serde_support::dmatrix")]
        t_a: DMatrix<f64>,
    },
    /// Full gain list, one entry per team member, ascending by uid.
    GainList {
        #[serde(with = "crate::serde_support::tagged_blocks")]
        gammas: Vec<(AgentId, DMatrix<f64>)>,
    },
}

/// Broadcast from the interim master from which every agent reproduces its
/// centralized update. `landmark == master` encodes an absolute measurement.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct UpdateMessage {
    pub master: AgentId,
    pub landmark: AgentId,
    pub step: u32,
    /// Whitened innovation `S^{-1/2} r`, heading component wrapped before
    /// whitening.
    #[serde(with = "crate::serde_support::dvector")]
    pub rbar: DVector<f64>,
    pub payload: UpdatePayload,
}

/// Sequential-update cueing: a master announces itself and how many landmark
/// measurements it will process this step.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MeasurementAnnouncement {
    pub master: AgentId,
    pub landmark_count: u32,
    pub step: u32,
}

/// Master-side intermediates, useful for diagnostics and oracle tests.
#[derive(Debug, Clone)]
pub struct MasterDiagnostics {
    pub innovation: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    /// Symmetric `S^{-1/2}` used for whitening and gain shaping.
    pub whitener: DMatrix<f64>,
}

/// One agent's local filter memory.
#[derive(Debug, Clone, PartialEq)]
pub struct DclAgentState {
    pub uid: AgentId,
    roster: Vec<AgentId>,
    dims: BTreeMap<AgentId, usize>,
    pub x: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    registry: Registry,
    pub step: u32,
}

impl DclAgentState {
    /// Initializes an agent: `Phi = I`, all registry blocks zero.
    pub fn new(
        uid: AgentId,
        team_dims: &[(AgentId, usize)],
        x0: DVector<f64>,
        p0: DMatrix<f64>,
        variant: RegistryVariant,
    ) -> Result<Self> {
        let mut dims = BTreeMap::new();
        for (u, d) in team_dims {
            if dims.insert(*u, *d).is_some() {
                return Err(Error::InvalidArgument { what: "duplicate agent uid" });
            }
        }
        let roster: Vec<AgentId> = dims.keys().cloned().collect();
        let n_own = *dims.get(&uid).ok_or(Error::UnknownAgent { uid })?;
        if roster[0] == 0 {
            return Err(Error::InvalidArgument { what: "agent uid 0 is reserved" });
        }
        if x0.len() != n_own {
            return Err(dim_error(alloc::format!("state of length {n_own}"), x0.len()));
        }
        if p0.nrows() != n_own || p0.ncols() != n_own {
            return Err(dim_error(
                alloc::format!("{n_own}x{n_own} covariance"),
                alloc::format!("{}x{}", p0.nrows(), p0.ncols()),
            ));
        }
        let registry = match variant {
            RegistryVariant::FullRegistry => {
                let mut map = BTreeMap::new();
                for (i, &j) in roster.iter().enumerate() {
                    for &l in &roster[i + 1..] {
                        map.insert((j, l), DMatrix::zeros(dims[&j], dims[&l]));
                    }
                }
                Registry::Full(map)
            }
            RegistryVariant::OwnRow => {
                let mut map = BTreeMap::new();
                for &j in &roster {
                    if j != uid {
                        map.insert(j, DMatrix::zeros(n_own, dims[&j]));
                    }
                }
                Registry::OwnRow(map)
            }
        };
        let mut cov = p0;
        symmetrize_mut(&mut cov);
        Ok(Self {
            uid,
            roster,
            dims,
            x: x0,
            cov,
            phi: DMatrix::identity(n_own, n_own),
            registry,
            step: 0,
        })
    }

    pub fn variant(&self) -> RegistryVariant {
        match self.registry {
            Registry::Full(_) => RegistryVariant::FullRegistry,
            Registry::OwnRow(_) => RegistryVariant::OwnRow,
        }
    }

    pub fn roster(&self) -> &[AgentId] {
        &self.roster
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Number of registry blocks held locally: `N(N-1)/2` for the full
    /// layout, `N-1` for own-row.
    pub fn registry_len(&self) -> usize {
        match &self.registry {
            Registry::Full(m) => m.len(),
            Registry::OwnRow(m) => m.len(),
        }
    }

    /// Reads `Pi_jl`, transposing the stored block when needed. Own-row
    /// agents can only resolve pairs involving themselves.
    pub fn pi_block(&self, j: AgentId, l: AgentId) -> Result<DMatrix<f64>> {
        if j == l {
            return Err(Error::InvalidArgument { what: "no Pi block for an agent with itself" });
        }
        match &self.registry {
            Registry::Full(m) => {
                let key = (j.min(l), j.max(l));
                let block = m.get(&key).ok_or(Error::UnknownAgent { uid: j.max(l) })?;
                Ok(if j < l { block.clone() } else { block.transpose() })
            }
            Registry::OwnRow(m) => {
                if j == self.uid {
                    m.get(&l).cloned().ok_or(Error::UnknownAgent { uid: l })
                } else if l == self.uid {
                    m.get(&j)
                        .map(|b| b.transpose())
                        .ok_or(Error::UnknownAgent { uid: j })
                } else {
                    Err(Error::Protocol {
                        reason: "own-row registry cannot resolve third-party pairs".to_string(),
                    })
                }
            }
        }
    }

    /// Spectral condition number of the accumulated `Phi` factor; the harness
    /// watches this to schedule refactorization.
    pub fn phi_condition(&self) -> f64 {
        cond_2(&self.phi)
    }

    /// Per-axis 3-sigma bounds from the covariance diagonal.
    pub fn sigma3(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.cov.nrows(),
            (0..self.cov.nrows()).map(|k| 3.0 * crate::fmath::sqrt(self.cov[(k, k)].max(0.0))),
        )
    }

    /// Propagation: local state and covariance through the motion model,
    /// `Phi <- F Phi`. The registry does not move.
    pub fn propagate(
        &mut self,
        control: &DVector<f64>,
        model: &dyn MotionModel,
        dt: f64,
    ) -> Result<()> {
        let (f, g) = model.jacobians(&self.x, control, dt)?;
        let cond = cond_2(&f);
        if !(cond < PHI_COND_LIMIT) {
            return Err(Error::IllConditioned { what: "motion Jacobian", cond });
        }
        let q = model.process_noise(control)?;
        let mut x_next = model.step(&self.x, control, dt)?;
        model.wrap_state(&mut x_next);
        self.x = x_next;
        self.cov = &f * &self.cov * f.transpose() + &g * q * g.transpose();
        symmetrize_mut(&mut self.cov);
        self.phi = &f * &self.phi;
        let phi_cond = cond_2(&self.phi);
        if !(phi_cond < PHI_COND_LIMIT) {
            return Err(Error::IllConditioned { what: "accumulated Phi factor", cond: phi_cond });
        }
        self.step += 1;
        Ok(())
    }

    /// Step with no exteroceptive measurement anywhere in the team: the
    /// propagated values stand as updated values and the registry is kept.
    /// Idempotent within a step.
    pub fn no_measurement_tick(&mut self) {}

    /// Builds the landmark message this agent sends to its interim master.
    pub fn landmark_message(&self, master: AgentId) -> Result<LandmarkMessage> {
        if master == self.uid {
            return Err(Error::InvalidArgument { what: "landmark cannot serve itself as master" });
        }
        if !self.roster.contains(&master) {
            return Err(Error::UnknownAgent { uid: master });
        }
        let own_row = match &self.registry {
            Registry::Full(_) => Vec::new(),
            Registry::OwnRow(m) => m
                .iter()
                .filter(|(j, _)| **j != master)
                .map(|(j, b)| (*j, b.clone()))
                .collect(),
        };
        Ok(LandmarkMessage {
            sender: self.uid,
            master,
            step: self.step,
            x: self.x.clone(),
            phi: self.phi.clone(),
            cov: self.cov.clone(),
            own_row,
        })
    }

    /// Interim-master computation for a relative measurement of `lm.sender`:
    /// innovation, innovation covariance rebuilt from the implicit
    /// cross-covariance, whitened residual, and the gain factors.
    pub fn master_compute(
        &self,
        lm: &LandmarkMessage,
        meas: &RelativeMeasurement,
    ) -> Result<(UpdateMessage, MasterDiagnostics)> {
        meas.validate()?;
        if meas.is_absolute() {
            return Err(Error::InvalidArgument {
                what: "absolute measurements use absolute_update_message",
            });
        }
        if meas.observer != self.uid || lm.master != self.uid {
            return Err(Error::Protocol { reason: "measurement/master mismatch".to_string() });
        }
        if meas.target != lm.sender {
            return Err(Error::Protocol { reason: "landmark message from wrong agent".to_string() });
        }
        if lm.step != self.step || meas.step != self.step {
            return Err(Error::Protocol {
                reason: alloc::format!(
                    "stale data: master at step {}, landmark at {}, measurement at {}",
                    self.step,
                    lm.step,
                    meas.step
                ),
            });
        }
        let n_b = lm.x.len();
        if lm.phi.shape() != (n_b, n_b) || lm.cov.shape() != (n_b, n_b) {
            return Err(dim_error(
                alloc::format!("{n_b}x{n_b} landmark factors"),
                alloc::format!("{}x{}", lm.phi.nrows(), lm.phi.ncols()),
            ));
        }

        let (h, ht_a, ht_b) = eval_measurement(meas, &self.x, &lm.x)?;
        let r = innovation(meas, &h)?;
        let pi_ab = self.pi_block(self.uid, lm.sender)?;

        // S = R + Ht_a P_a Ht_a' + Ht_b P_b Ht_b'
        //       - Ht_a (Phi_a Pi_ab Phi_b') Ht_b' - (transpose of that term)
        let cross = &ht_a * &self.phi * &pi_ab * lm.phi.transpose() * ht_b.transpose();
        let mut s = &meas.noise_cov
            + &ht_a * &self.cov * ht_a.transpose()
            + &ht_b * &lm.cov * ht_b.transpose()
            - &cross
            - cross.transpose();
        symmetrize_mut(&mut s);
        let w = sym_inv_sqrt(&s)?;
        let rbar = &w * &r;

        let phi_a_inv = invert_phi(&self.phi)?;
        let phi_b_inv = invert_phi(&lm.phi)?;
        let gamma_a = (&pi_ab * lm.phi.transpose() * ht_b.transpose()
            - &phi_a_inv * &self.cov * ht_a.transpose())
            * &w;
        let gamma_b = (&phi_b_inv * &lm.cov * ht_b.transpose()
            - pi_ab.transpose() * self.phi.transpose() * ht_a.transpose())
            * &w;
        let t_b = lm.phi.transpose() * ht_b.transpose() * &w;
        let t_a = self.phi.transpose() * ht_a.transpose() * &w;

        let payload = match &self.registry {
            Registry::Full(_) => UpdatePayload::Factors { gamma_a, gamma_b, t_b, t_a },
            Registry::OwnRow(_) => {
                let mut gammas: Vec<(AgentId, DMatrix<f64>)> = Vec::with_capacity(self.roster.len());
                let landmark_row: BTreeMap<AgentId, &DMatrix<f64>> =
                    lm.own_row.iter().map(|(j, b)| (*j, b)).collect();
                for &j in &self.roster {
                    if j == self.uid {
                        gammas.push((j, gamma_a.clone()));
                    } else if j == lm.sender {
                        gammas.push((j, gamma_b.clone()));
                    } else {
                        let pi_bj = landmark_row.get(&j).ok_or_else(|| Error::Protocol {
                            reason: alloc::format!("landmark row missing agent {j}"),
                        })?;
                        let pi_aj = self.pi_block(self.uid, j)?;
                        let gamma_j = pi_bj.transpose() * &t_b - pi_aj.transpose() * &t_a;
                        gammas.push((j, gamma_j));
                    }
                }
                UpdatePayload::GainList { gammas }
            }
        };

        Ok((
            UpdateMessage {
                master: self.uid,
                landmark: lm.sender,
                step: self.step,
                rbar,
                payload,
            },
            MasterDiagnostics { innovation: r, innovation_cov: s, whitener: w },
        ))
    }

    /// Interim-master computation for an absolute measurement of the agent's
    /// own position: same algebra with `Ht_b = 0` and the landmark index
    /// replaced by the master's, hence no landmark message.
    pub fn absolute_update_message(
        &self,
        meas: &RelativeMeasurement,
    ) -> Result<(UpdateMessage, MasterDiagnostics)> {
        meas.validate()?;
        if !meas.is_absolute() || meas.observer != self.uid {
            return Err(Error::Protocol {
                reason: "absolute measurement must be the master's own".to_string(),
            });
        }
        if meas.step != self.step {
            return Err(Error::Protocol {
                reason: alloc::format!(
                    "stale measurement: master at step {}, measurement at {}",
                    self.step,
                    meas.step
                ),
            });
        }
        let (h, ht_a, _) = eval_measurement(meas, &self.x, &self.x)?;
        let r = innovation(meas, &h)?;
        let mut s = &meas.noise_cov + &ht_a * &self.cov * ht_a.transpose();
        symmetrize_mut(&mut s);
        let w = sym_inv_sqrt(&s)?;
        let rbar = &w * &r;
        let phi_a_inv = invert_phi(&self.phi)?;
        let gamma_a = -(&phi_a_inv * &self.cov * ht_a.transpose()) * &w;
        let t_a = self.phi.transpose() * ht_a.transpose() * &w;
        let nz = meas.dim();

        let payload = match &self.registry {
            Registry::Full(_) => UpdatePayload::Factors {
                gamma_a: gamma_a.clone(),
                gamma_b: gamma_a.clone(),
                t_b: DMatrix::zeros(self.x.len(), nz),
                t_a,
            },
            Registry::OwnRow(_) => {
                let mut gammas: Vec<(AgentId, DMatrix<f64>)> = Vec::with_capacity(self.roster.len());
                for &j in &self.roster {
                    if j == self.uid {
                        gammas.push((j, gamma_a.clone()));
                    } else {
                        let pi_aj = self.pi_block(self.uid, j)?;
                        gammas.push((j, -(pi_aj.transpose() * &t_a)));
                    }
                }
                UpdatePayload::GainList { gammas }
            }
        };

        Ok((
            UpdateMessage {
                master: self.uid,
                landmark: self.uid,
                step: self.step,
                rbar,
                payload,
            },
            MasterDiagnostics { innovation: r, innovation_cov: s, whitener: w },
        ))
    }

    /// Applies a broadcast update message: corrects the local estimate and
    /// covariance and walks the whole registry.
    pub fn apply_update(&mut self, um: &UpdateMessage, model: &dyn MotionModel) -> Result<()> {
        if um.step != self.step {
            return Err(Error::Protocol {
                reason: alloc::format!(
                    "update message for step {} applied at step {}",
                    um.step,
                    self.step
                ),
            });
        }
        if !self.roster.contains(&um.master) || !self.roster.contains(&um.landmark) {
            return Err(Error::Protocol { reason: "update names unknown agents".to_string() });
        }
        let nz = um.rbar.len();
        let gammas = self.resolve_gammas(um, nz)?;
        let own_gamma = gammas.get(&self.uid).ok_or_else(|| Error::Protocol {
            reason: "no gain factor for this agent".to_string(),
        })?;
        if own_gamma.shape() != (self.x.len(), nz) {
            return Err(dim_error(
                alloc::format!("{}x{nz} gain factor", self.x.len()),
                alloc::format!("{}x{}", own_gamma.nrows(), own_gamma.ncols()),
            ));
        }

        self.x += &self.phi * own_gamma * &um.rbar;
        model.wrap_state(&mut self.x);
        self.cov -= &self.phi * own_gamma * own_gamma.transpose() * self.phi.transpose();
        symmetrize_mut(&mut self.cov);

        match &mut self.registry {
            Registry::Full(map) => {
                for ((j, l), block) in map.iter_mut() {
                    let gj = gammas.get(j).ok_or_else(|| Error::Protocol {
                        reason: alloc::format!("no gain factor for agent {j}"),
                    })?;
                    let gl = gammas.get(l).ok_or_else(|| Error::Protocol {
                        reason: alloc::format!("no gain factor for agent {l}"),
                    })?;
                    *block -= gj * gl.transpose();
                }
            }
            Registry::OwnRow(map) => {
                for (j, block) in map.iter_mut() {
                    let gj = gammas.get(j).ok_or_else(|| Error::Protocol {
                        reason: alloc::format!("no gain factor for agent {j}"),
                    })?;
                    *block -= own_gamma * gj.transpose();
                }
            }
        }
        Ok(())
    }

    /// Gain factors for every team member. With constant-size factors the
    /// bystander gains come from the local registry (Pi blocks at the
    /// pre-update value); with a gain list they are read off the message.
    fn resolve_gammas(
        &self,
        um: &UpdateMessage,
        nz: usize,
    ) -> Result<BTreeMap<AgentId, DMatrix<f64>>> {
        let mut gammas = BTreeMap::new();
        match (&self.registry, &um.payload) {
            (Registry::Full(_), UpdatePayload::Factors { gamma_a, gamma_b, t_b, t_a }) => {
                for &j in &self.roster {
                    let gamma_j = if j == um.master {
                        gamma_a.clone()
                    } else if j == um.landmark {
                        gamma_b.clone()
                    } else {
                        let pi_jb = self.pi_block(j, um.landmark)?;
                        let pi_ja = self.pi_block(j, um.master)?;
                        &pi_jb * t_b - &pi_ja * t_a
                    };
                    if gamma_j.ncols() != nz {
                        return Err(dim_error(
                            alloc::format!("gain factors with {nz} columns"),
                            gamma_j.ncols(),
                        ));
                    }
                    gammas.insert(j, gamma_j);
                }
            }
            (Registry::OwnRow(_), UpdatePayload::GainList { gammas: list }) => {
                for (j, g) in list {
                    gammas.insert(*j, g.clone());
                }
                for &j in &self.roster {
                    if !gammas.contains_key(&j) {
                        return Err(Error::Protocol {
                            reason: alloc::format!("gain list missing agent {j}"),
                        });
                    }
                }
            }
            _ => {
                return Err(Error::Protocol {
                    reason: "update payload does not match registry layout".to_string(),
                })
            }
        }
        Ok(gammas)
    }

    /// Resets `Phi` to the identity after folding the current factors into
    /// the registry: `Pi_jl <- Phi_j Pi_jl Phi_l^T`. Exactness-preserving by
    /// construction; all agents must perform it synchronously, with the same
    /// broadcast `Phi` values for the whole roster.
    pub fn refactorize(&mut self, phis: &BTreeMap<AgentId, DMatrix<f64>>) -> Result<()> {
        for &j in &self.roster {
            let phi_j = phis.get(&j).ok_or(Error::UnknownAgent { uid: j })?;
            let n_j = self.dims[&j];
            if phi_j.shape() != (n_j, n_j) {
                return Err(dim_error(
                    alloc::format!("{n_j}x{n_j} Phi for agent {j}"),
                    alloc::format!("{}x{}", phi_j.nrows(), phi_j.ncols()),
                ));
            }
        }
        match &mut self.registry {
            Registry::Full(map) => {
                for ((j, l), block) in map.iter_mut() {
                    *block = &phis[j] * block.clone() * phis[l].transpose();
                }
            }
            Registry::OwnRow(map) => {
                let own = self.uid;
                for (j, block) in map.iter_mut() {
                    *block = &phis[&own] * block.clone() * phis[j].transpose();
                }
            }
        }
        self.phi = DMatrix::identity(self.x.len(), self.x.len());
        Ok(())
    }

    /// Drops a permanently departed agent: removes it from the roster and
    /// deletes every registry block involving it.
    pub fn retire_agent(&mut self, uid: AgentId) -> Result<()> {
        if uid == self.uid {
            return Err(Error::InvalidArgument { what: "an agent cannot retire itself" });
        }
        let idx = self
            .roster
            .iter()
            .position(|&u| u == uid)
            .ok_or(Error::UnknownAgent { uid })?;
        self.roster.remove(idx);
        self.dims.remove(&uid);
        match &mut self.registry {
            Registry::Full(map) => map.retain(|(j, l), _| *j != uid && *l != uid),
            Registry::OwnRow(map) => {
                map.remove(&uid);
            }
        }
        Ok(())
    }
}

fn invert_phi(phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cond = cond_2(phi);
    if !(cond < PHI_COND_LIMIT) {
        return Err(Error::IllConditioned { what: "Phi factor", cond });
    }
    phi.clone()
        .try_inverse()
        .ok_or(Error::IllConditioned { what: "Phi factor", cond })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{OdometryParams, Unicycle};
    use nalgebra::{DMatrix, DVector};

    const PARAMS: OdometryParams = OdometryParams { sigma_v_frac: 0.1, sigma_omega: 0.02 };

    fn dims3() -> Vec<(AgentId, usize)> {
        vec![(1, 3), (2, 3), (3, 3)]
    }

    fn agent(uid: AgentId, variant: RegistryVariant) -> DclAgentState {
        DclAgentState::new(
            uid,
            &dims3(),
            DVector::from_vec(vec![uid as f64, 0.0, 0.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.01, 0.01, 0.001])),
            variant,
        )
        .unwrap()
    }

    #[test]
    fn initialization_matches_prescription() {
        let a = agent(1, RegistryVariant::FullRegistry);
        assert_eq!(a.phi, DMatrix::identity(3, 3));
        assert_eq!(a.registry_len(), 3); // pairs (1,2), (1,3), (2,3)
        assert_eq!(a.pi_block(2, 3).unwrap(), DMatrix::zeros(3, 3));

        let b = agent(2, RegistryVariant::OwnRow);
        assert_eq!(b.registry_len(), 2); // rows (2,1), (2,3)
        assert_eq!(b.pi_block(2, 1).unwrap(), DMatrix::zeros(3, 3));
        assert!(b.pi_block(1, 3).is_err(), "third-party pair must be unreadable");
    }

    #[test]
    fn propagate_zero_velocity_keeps_phi() {
        let model = Unicycle::new(PARAMS);
        let mut a = agent(1, RegistryVariant::FullRegistry);
        a.propagate(&DVector::from_vec(vec![0.0, 0.0]), &model, 0.1).unwrap();
        assert_eq!(a.phi, DMatrix::identity(3, 3));
        assert_eq!(a.step, 1);
    }

    #[test]
    fn phi_accumulates_ordered_jacobian_product() {
        let model = Unicycle::new(PARAMS);
        let mut a = agent(1, RegistryVariant::FullRegistry);
        let mut expected = DMatrix::<f64>::identity(3, 3);
        for k in 0..5 {
            let u = DVector::from_vec(vec![0.3 + 0.05 * k as f64, 0.1]);
            let (f, _) = model.jacobians(&a.x, &u, 0.1).unwrap();
            expected = &f * &expected;
            a.propagate(&u, &model, 0.1).unwrap();
        }
        assert!((a.phi.clone() - expected).amax() < 1e-14);
        // Registry untouched by propagation.
        assert_eq!(a.pi_block(1, 2).unwrap(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn no_measurement_tick_is_idempotent() {
        let mut a = agent(1, RegistryVariant::FullRegistry);
        let before = a.clone();
        a.no_measurement_tick();
        a.no_measurement_tick();
        assert_eq!(a, before);
    }

    #[test]
    fn uncorrelated_master_sees_additive_innovation_cov() {
        // With Pi_ab = 0 the cross terms vanish:
        // S = R + Ht_a P_a Ht_a' + Ht_b P_b Ht_b'.
        let a = agent(1, RegistryVariant::FullRegistry);
        let b = agent(2, RegistryVariant::FullRegistry);
        let meas = RelativeMeasurement {
            observer: 1,
            target: 2,
            z: DVector::from_vec(vec![1.0, 0.0, 0.0]),
            noise_cov: DMatrix::from_diagonal(&DVector::from_vec(vec![0.0025, 0.0025, 0.0003])),
            step: 0,
        };
        let lm = b.landmark_message(1).unwrap();
        let (_, diag) = a.master_compute(&lm, &meas).unwrap();
        let (_, ht_a, ht_b) = eval_measurement(&meas, &a.x, &b.x).unwrap();
        let expected = &meas.noise_cov
            + &ht_a * &a.cov * ht_a.transpose()
            + &ht_b * &b.cov * ht_b.transpose();
        assert!((diag.innovation_cov.clone() - expected).amax() < 1e-14);
    }

    #[test]
    fn bystander_with_zero_registry_is_unmoved() {
        let model = Unicycle::new(PARAMS);
        let a = agent(1, RegistryVariant::FullRegistry);
        let b = agent(2, RegistryVariant::FullRegistry);
        let mut c = agent(3, RegistryVariant::FullRegistry);
        let meas = RelativeMeasurement {
            observer: 1,
            target: 2,
            z: DVector::from_vec(vec![1.0, 0.1, 0.05]),
            noise_cov: DMatrix::from_diagonal(&DVector::from_vec(vec![0.0025, 0.0025, 0.0003])),
            step: 0,
        };
        let lm = b.landmark_message(1).unwrap();
        let (um, _) = a.master_compute(&lm, &meas).unwrap();
        let x_before = c.x.clone();
        let p_before = c.cov.clone();
        c.apply_update(&um, &model).unwrap();
        assert_eq!(c.x, x_before);
        assert!((c.cov.clone() - p_before).amax() < 1e-18);
        // But the (1,2) pair in c's registry is now nonzero.
        assert!(c.pi_block(1, 2).unwrap().amax() > 0.0);
    }

    #[test]
    fn stale_messages_are_rejected() {
        let model = Unicycle::new(PARAMS);
        let mut a = agent(1, RegistryVariant::FullRegistry);
        let b = agent(2, RegistryVariant::FullRegistry);
        let meas = RelativeMeasurement {
            observer: 1,
            target: 2,
            z: DVector::from_vec(vec![1.0, 0.0, 0.0]),
            noise_cov: DMatrix::from_diagonal(&DVector::from_vec(vec![0.0025, 0.0025, 0.0003])),
            step: 0,
        };
        let lm = b.landmark_message(1).unwrap();
        let (um, _) = a.master_compute(&lm, &meas).unwrap();
        a.propagate(&DVector::from_vec(vec![0.2, 0.0]), &Unicycle::new(PARAMS), 0.1).unwrap();
        assert!(matches!(a.apply_update(&um, &model), Err(Error::Protocol { .. })));
        let stale_lm = b.landmark_message(1).unwrap();
        assert!(matches!(a.master_compute(&stale_lm, &meas), Err(Error::Protocol { .. })));
    }

    #[test]
    fn retire_agent_prunes_registry() {
        let mut a = agent(1, RegistryVariant::FullRegistry);
        a.retire_agent(3).unwrap();
        assert_eq!(a.roster(), &[1, 2]);
        assert_eq!(a.registry_len(), 1);
        assert!(a.pi_block(1, 3).is_err());
        assert!(a.retire_agent(1).is_err(), "cannot retire self");

        let mut b = agent(2, RegistryVariant::OwnRow);
        b.retire_agent(3).unwrap();
        assert_eq!(b.registry_len(), 1);
    }

    #[test]
    fn own_row_landmark_message_carries_n_minus_2_blocks() {
        let b = agent(2, RegistryVariant::OwnRow);
        let lm = b.landmark_message(1).unwrap();
        assert_eq!(lm.own_row.len(), 1);
        assert_eq!(lm.own_row[0].0, 3);

        let full = agent(2, RegistryVariant::FullRegistry);
        assert!(full.landmark_message(1).unwrap().own_row.is_empty());
    }
}
