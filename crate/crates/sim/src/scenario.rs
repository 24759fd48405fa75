//! Declarative scenario definitions and the bundled benchmark presets.
//!
//! Scenarios are human-readable TOML with a `schema = 1` header and explicit
//! units on every noisy quantity (`_m`, `_deg`, `_deg_s`, `_mps`, `_rad`).
//! Serialization uses a canonical field order, so
//! serialize -> parse -> serialize is byte-identical for any valid spec.

use cooploc_core::models::{OdometryParams, UnicyclePose};
use cooploc_core::netsim::CommGraph;
use cooploc_core::AgentId;
use serde::{Deserialize, Serialize};

use crate::FilterKind;

/// Scenario file schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

/// Declarative description of one simulation: team, controls, noise levels,
/// measurement schedule, communication graph, and defaults for the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub schema: u32,
    pub name: String,
    pub dt_s: f64,
    pub duration_s: f64,
    pub rng_seed: u64,
    /// Monte Carlo runs used when the caller does not say otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_runs: Option<u32>,
    /// Filter selection by CLI name (`central`, `imdcl`, `imdcl-ownrow`,
    /// `naive`, `ci`, `dr`).
    pub filters: Vec<String>,
    pub comm: CommSpec,
    pub agents: Vec<AgentSpec>,
    pub schedule: Vec<MeasurementWindow>,
}

/// Communication graph specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommSpec {
    /// All-to-all links.
    Complete,
    /// Geometric links recomputed each step from true positions.
    Range { comm_range_m: f64 },
    /// Explicit directed `(sender, receiver)` edges.
    Edges { edges: Vec<(u16, u16)> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_deg: f64,
}

/// Per-axis standard deviations of the initial estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseStdSpec {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub uid: u16,
    /// Linear-odometry noise std as a fraction of the commanded speed.
    pub sigma_v_frac: f64,
    /// Angular-odometry noise std.
    pub sigma_omega_deg_s: f64,
    pub start: PoseSpec,
    pub initial_std: PoseStdSpec,
    pub control: ControlProfile,
}

/// True control inputs over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlProfile {
    /// Piecewise-constant `(v, omega)` segments; the first must start at 0.
    Piecewise { segments: Vec<ControlSegment> },
    /// Constant speed with a slowly varying sinusoidal turn rate.
    Sinusoid {
        v_mps: f64,
        omega_amplitude_deg_s: f64,
        omega_period_s: f64,
        omega_phase_rad: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSegment {
    pub t_start_s: f64,
    pub v_mps: f64,
    pub omega_deg_s: f64,
}

impl ControlProfile {
    /// True `(v [m/s], omega [rad/s])` at time `t` (zero-order hold within a
    /// step).
    pub fn true_controls(&self, t: f64) -> (f64, f64) {
        match self {
            ControlProfile::Piecewise { segments } => {
                let mut current = (0.0, 0.0);
                for seg in segments {
                    if seg.t_start_s <= t {
                        current = (seg.v_mps, seg.omega_deg_s.to_radians());
                    } else {
                        break;
                    }
                }
                current
            }
            ControlProfile::Sinusoid {
                v_mps,
                omega_amplitude_deg_s,
                omega_period_s,
                omega_phase_rad,
            } => {
                let omega = omega_amplitude_deg_s.to_radians()
                    * (2.0 * std::f64::consts::PI * t / omega_period_s + omega_phase_rad).sin();
                (*v_mps, omega)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKindSpec {
    RelativePose,
    AbsolutePosition,
}

/// Per-axis measurement noise standard deviations; `heading_deg` is present
/// exactly for relative-pose measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementNoiseStd {
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_deg: Option<f64>,
}

/// One scheduled measurement stream: `observer` measures `target` at every
/// step whose time falls in `[t_start_s, t_end_s)`. `observer == target`
/// encodes an absolute position fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementWindow {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub observer: u16,
    pub target: u16,
    pub kind: MeasurementKindSpec,
    pub noise_std: MeasurementNoiseStd,
}

impl MeasurementWindow {
    pub fn is_absolute(&self) -> bool {
        self.kind == MeasurementKindSpec::AbsolutePosition
    }

    pub fn active_at(&self, t: f64) -> bool {
        self.t_start_s <= t && t < self.t_end_s
    }
}

/// One scenario validation problem, with enough context to fix the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub context: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.context, self.message)
    }
}

fn violation(context: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation { context: context.into(), message: message.into() }
}

impl ScenarioSpec {
    pub fn to_toml_string(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    pub fn from_toml_str(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn steps(&self) -> usize {
        (self.duration_s / self.dt_s).round() as usize
    }

    pub fn uids(&self) -> Vec<AgentId> {
        self.agents.iter().map(|a| a.uid).collect()
    }

    pub fn agent(&self, uid: AgentId) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.uid == uid)
    }

    pub fn odometry_params(&self, uid: AgentId) -> Option<OdometryParams> {
        self.agent(uid).map(|a| OdometryParams {
            sigma_v_frac: a.sigma_v_frac,
            sigma_omega: a.sigma_omega_deg_s.to_radians(),
        })
    }

    pub fn initial_pose(&self, uid: AgentId) -> Option<UnicyclePose> {
        self.agent(uid).map(|a| {
            UnicyclePose::new(a.start.x_m, a.start.y_m, a.start.heading_deg.to_radians())
        })
    }

    /// Windows firing at simulation time `t`, in canonical
    /// `(observer, target)` order.
    pub fn measurements_at(&self, t: f64) -> Vec<&MeasurementWindow> {
        let mut active: Vec<&MeasurementWindow> =
            self.schedule.iter().filter(|w| w.active_at(t)).collect();
        active.sort_by_key(|w| (w.observer, w.target));
        active
    }

    /// The static communication graph, when the spec defines one (geometric
    /// graphs are rebuilt each step by the harness).
    pub fn static_graph(&self) -> Option<Result<CommGraph, cooploc_core::Error>> {
        match &self.comm {
            CommSpec::Complete => Some(CommGraph::complete(&self.uids())),
            CommSpec::Edges { edges } => Some(CommGraph::with_edges(&self.uids(), edges)),
            CommSpec::Range { .. } => None,
        }
    }

    /// All invariant violations in this spec; empty means runnable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.schema != SCHEMA_VERSION {
            out.push(violation(
                "schema",
                format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema),
            ));
        }
        if !(self.dt_s > 0.0) {
            out.push(violation("dt_s", "step size must be positive"));
        }
        if !(self.duration_s > 0.0) {
            out.push(violation("duration_s", "duration must be positive"));
        }
        if self.agents.is_empty() {
            out.push(violation("agents", "at least one agent is required"));
        }
        let mut uids = self.uids();
        uids.sort_unstable();
        let mut deduped = uids.clone();
        deduped.dedup();
        if deduped.len() != uids.len() {
            out.push(violation("agents", "duplicate uid"));
        }
        if uids.iter().any(|&u| u == 0) {
            out.push(violation("agents", "uid 0 is reserved"));
        }

        let mut filters = Vec::new();
        for name in &self.filters {
            match FilterKind::parse(name) {
                Some(f) => filters.push(f),
                None => out.push(violation("filters", format!("unknown filter '{name}'"))),
            }
        }

        for agent in &self.agents {
            let ctx = format!("agent {}", agent.uid);
            for (value, what) in [
                (agent.sigma_v_frac, "sigma_v_frac"),
                (agent.sigma_omega_deg_s, "sigma_omega_deg_s"),
                (agent.initial_std.x_m, "initial_std.x_m"),
                (agent.initial_std.y_m, "initial_std.y_m"),
                (agent.initial_std.heading_deg, "initial_std.heading_deg"),
            ] {
                if !(value > 0.0) {
                    out.push(violation(ctx.clone(), format!("{what} must be > 0")));
                }
            }
            if let ControlProfile::Piecewise { segments } = &agent.control {
                if segments.first().map(|s| s.t_start_s) != Some(0.0) {
                    out.push(violation(ctx.clone(), "first control segment must start at t = 0"));
                }
                if segments.windows(2).any(|w| w[1].t_start_s <= w[0].t_start_s) {
                    out.push(violation(ctx.clone(), "control segments must be strictly ordered"));
                }
            }
            if let ControlProfile::Sinusoid { omega_period_s, .. } = &agent.control {
                if !(*omega_period_s > 0.0) {
                    out.push(violation(ctx.clone(), "omega_period_s must be > 0"));
                }
            }
        }

        for (k, w) in self.schedule.iter().enumerate() {
            let ctx = format!("schedule[{k}]");
            if !(w.t_start_s < w.t_end_s) {
                out.push(violation(ctx.clone(), "t_start_s must be before t_end_s"));
            }
            if w.t_start_s < 0.0 || w.t_end_s > self.duration_s {
                out.push(violation(ctx.clone(), "window must lie within [0, duration]"));
            }
            if !uids.contains(&w.observer) {
                out.push(violation(ctx.clone(), format!("unknown observer {}", w.observer)));
            }
            if !uids.contains(&w.target) {
                out.push(violation(ctx.clone(), format!("unknown target {}", w.target)));
            }
            match w.kind {
                MeasurementKindSpec::RelativePose => {
                    if w.observer == w.target {
                        out.push(violation(
                            ctx.clone(),
                            "relative measurement needs distinct observer and target",
                        ));
                    }
                    match w.noise_std.heading_deg {
                        Some(h) if h > 0.0 => {}
                        Some(_) => out.push(violation(
                            ctx.clone(),
                            "noise_std.heading_deg must be > 0",
                        )),
                        None => out.push(violation(
                            ctx.clone(),
                            "relative measurement needs noise_std.heading_deg",
                        )),
                    }
                }
                MeasurementKindSpec::AbsolutePosition => {
                    if w.observer != w.target {
                        out.push(violation(
                            ctx.clone(),
                            "absolute measurement must have observer == target",
                        ));
                    }
                    if w.noise_std.heading_deg.is_some() {
                        out.push(violation(
                            ctx.clone(),
                            "absolute measurement takes no heading noise",
                        ));
                    }
                }
            }
            for (value, what) in [(w.noise_std.x_m, "noise_std.x_m"), (w.noise_std.y_m, "noise_std.y_m")] {
                if !(value > 0.0) {
                    out.push(violation(ctx.clone(), format!("{what} must be > 0")));
                }
            }
        }

        if let CommSpec::Edges { edges } = &self.comm {
            for &(s, r) in edges {
                if s == r {
                    out.push(violation("comm", format!("self-loop edge {s} -> {r}")));
                }
                if !uids.contains(&s) || !uids.contains(&r) {
                    out.push(violation("comm", format!("edge {s} -> {r} names unknown agents")));
                }
            }
        }

        // Interim-master rounds need the master to reach the whole team and
        // landmarks to reach their masters; checkable statically for
        // non-geometric graphs.
        let needs_rounds = filters
            .iter()
            .any(|f| matches!(f, FilterKind::ImDcl | FilterKind::ImDclOwnRow));
        if needs_rounds && out.is_empty() {
            if let Some(Ok(graph)) = self.static_graph() {
                for (k, w) in self.schedule.iter().enumerate() {
                    let landmark = if w.is_absolute() { None } else { Some(w.target) };
                    if let Ok(feasibility) = graph.check_im_dcl_feasible(w.observer, landmark) {
                        if !feasibility.feasible {
                            out.push(violation(format!("schedule[{k}]"), feasibility.to_string()));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Three-robot benchmark: one robot pair coupled by persistent relative
/// measurements, a third joining later, then an absolute-fix interval whose
/// benefit spreads through the accumulated correlations, and a final
/// drift segment.
///
/// Noise levels follow the published three-robot study: odometry speed noise
/// 10% of speed everywhere, turn-rate noise 1 deg/s (robots 1, 2) and
/// 0.5 deg/s (robot 3); relative-pose noise triples (0.05 m, 0.05 m, 1 deg),
/// (0.05 m, 0.05 m, 2 deg), (0.07 m, 0.07 m, 1.5 deg) by observer; absolute
/// noise (0.1 m, 0.1 m) for robot 1. Control profiles and initial poses are
/// not published; the smooth sinusoidal-turn reconstruction below is spelled
/// out in full so results are reproducible.
pub fn preset_paper3() -> ScenarioSpec {
    let agent = |uid: u16,
                 x: f64,
                 heading_deg: f64,
                 sigma_omega_deg_s: f64,
                 phase: f64| AgentSpec {
        uid,
        sigma_v_frac: 0.1,
        sigma_omega_deg_s,
        start: PoseSpec { x_m: x, y_m: 0.0, heading_deg },
        initial_std: PoseStdSpec { x_m: 0.1, y_m: 0.1, heading_deg: 1.0 },
        control: ControlProfile::Sinusoid {
            v_mps: 0.25,
            omega_amplitude_deg_s: 2.0,
            omega_period_s: 100.0,
            omega_phase_rad: phase,
        },
    };
    let rel = |t0: f64, t1: f64, observer: u16, target: u16, sx: f64, sh: f64| MeasurementWindow {
        t_start_s: t0,
        t_end_s: t1,
        observer,
        target,
        kind: MeasurementKindSpec::RelativePose,
        noise_std: MeasurementNoiseStd { x_m: sx, y_m: sx, heading_deg: Some(sh) },
    };
    ScenarioSpec {
        schema: SCHEMA_VERSION,
        name: "paper3".into(),
        dt_s: 0.1,
        duration_s: 300.0,
        rng_seed: 7,
        default_runs: Some(50),
        filters: vec![
            "central".into(),
            "imdcl".into(),
            "imdcl-ownrow".into(),
            "naive".into(),
            "dr".into(),
        ],
        comm: CommSpec::Complete,
        agents: vec![
            agent(1, 0.0, 0.0, 1.0, 0.0),
            agent(2, 5.0, 45.0, 1.0, 2.0943951023931953),
            agent(3, 10.0, -30.0, 0.5, 4.1887902047863905),
        ],
        schedule: vec![
            rel(10.0, 90.0, 1, 2, 0.05, 1.0),
            rel(90.0, 110.0, 3, 1, 0.07, 1.5),
            rel(110.0, 190.0, 1, 3, 0.05, 1.0),
            rel(110.0, 190.0, 2, 1, 0.05, 2.0),
            rel(110.0, 190.0, 3, 2, 0.07, 1.5),
            MeasurementWindow {
                t_start_s: 190.0,
                t_end_s: 240.0,
                observer: 1,
                target: 1,
                kind: MeasurementKindSpec::AbsolutePosition,
                noise_std: MeasurementNoiseStd { x_m: 0.1, y_m: 0.1, heading_deg: None },
            },
        ],
    }
}

/// Tightly versus loosely coupled comparison: from t = 10 s, robot 3 takes
/// persistent relative measurements alternating every 50 s between robot 1
/// and robot 2. Under the covariance-intersection baseline only the observed
/// robot updates, so robot 3 itself stays on dead reckoning.
pub fn preset_fig7() -> ScenarioSpec {
    let mut spec = preset_paper3();
    spec.name = "fig7".into();
    spec.filters = vec!["imdcl".into(), "ci".into(), "dr".into()];
    spec.schedule.clear();
    let mut t = 10.0;
    let mut target = 1u16;
    while t < spec.duration_s {
        let end = (t + 50.0).min(spec.duration_s);
        spec.schedule.push(MeasurementWindow {
            t_start_s: t,
            t_end_s: end,
            observer: 3,
            target,
            kind: MeasurementKindSpec::RelativePose,
            noise_std: MeasurementNoiseStd { x_m: 0.07, y_m: 0.07, heading_deg: Some(1.5) },
        });
        target = if target == 1 { 2 } else { 1 };
        t = end;
    }
    spec
}

/// Six-agent multi-hop topology benchmark on the reconstructed chain graph:
/// agents 1 and 6 take persistent relative measurements of agents 2 and 3
/// and their update rounds must cross the network by flooding.
pub fn preset_fig2() -> ScenarioSpec {
    let agent = |uid: u16, x: f64, heading_deg: f64, phase: f64| AgentSpec {
        uid,
        sigma_v_frac: 0.1,
        sigma_omega_deg_s: 1.0,
        start: PoseSpec { x_m: x, y_m: 0.0, heading_deg },
        initial_std: PoseStdSpec { x_m: 0.1, y_m: 0.1, heading_deg: 1.0 },
        control: ControlProfile::Sinusoid {
            v_mps: 0.25,
            omega_amplitude_deg_s: 2.0,
            omega_period_s: 100.0,
            omega_phase_rad: phase,
        },
    };
    let rel = |observer: u16, target: u16| MeasurementWindow {
        t_start_s: 10.0,
        t_end_s: 120.0,
        observer,
        target,
        kind: MeasurementKindSpec::RelativePose,
        noise_std: MeasurementNoiseStd { x_m: 0.05, y_m: 0.05, heading_deg: Some(1.0) },
    };
    ScenarioSpec {
        schema: SCHEMA_VERSION,
        name: "fig2".into(),
        dt_s: 0.1,
        duration_s: 120.0,
        rng_seed: 7,
        default_runs: Some(10),
        filters: vec!["central".into(), "imdcl".into(), "imdcl-ownrow".into()],
        comm: CommSpec::Edges { edges: cooploc_core::netsim::six_agent_chain_edges() },
        agents: vec![
            agent(1, 0.0, 0.0, 0.0),
            agent(2, 5.0, 30.0, 1.0471975511965976),
            agent(3, 10.0, -30.0, 2.0943951023931953),
            agent(4, 15.0, 15.0, 3.141592653589793),
            agent(5, 20.0, -15.0, 4.1887902047863905),
            agent(6, 25.0, 10.0, 5.235987755982989),
        ],
        schedule: vec![rel(1, 2), rel(6, 3)],
    }
}

/// Bundled preset lookup by CLI name.
pub fn preset(name: &str) -> Option<ScenarioSpec> {
    match name {
        "paper3" => Some(preset_paper3()),
        "fig7" => Some(preset_fig7()),
        "fig2" => Some(preset_fig2()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper3_noise_levels() {
        let spec = preset_paper3();
        assert_eq!(spec.agent(3).unwrap().sigma_omega_deg_s, 0.5);
        assert_eq!(spec.agent(1).unwrap().sigma_omega_deg_s, 1.0);
        let absolute = spec.schedule.iter().find(|w| w.is_absolute()).unwrap();
        assert_eq!((absolute.noise_std.x_m, absolute.noise_std.y_m), (0.1, 0.1));
        assert_eq!((absolute.t_start_s, absolute.t_end_s), (190.0, 240.0));
        let first = &spec.schedule[0];
        assert_eq!((first.observer, first.target), (1, 2));
        assert_eq!(first.noise_std.x_m, 0.05);
        assert_eq!(first.noise_std.heading_deg, Some(1.0));
    }

    #[test]
    fn paper3_validates_clean() {
        assert_eq!(preset_paper3().validate(), vec![]);
        assert_eq!(preset_fig7().validate(), vec![]);
        assert_eq!(preset_fig2().validate(), vec![]);
    }

    #[test]
    fn fig7_alternation() {
        let spec = preset_fig7();
        assert_eq!(spec.default_runs, Some(50));
        let w0 = &spec.schedule[0];
        assert_eq!((w0.observer, w0.target), (3, 1));
        assert_eq!((w0.t_start_s, w0.t_end_s), (10.0, 60.0));
        let w1 = &spec.schedule[1];
        assert_eq!((w1.observer, w1.target), (3, 2));
        assert_eq!(w1.t_start_s - w0.t_start_s, 50.0);
        // Alternation continues to the end of the run.
        assert!(spec.schedule.last().unwrap().t_end_s <= spec.duration_s);
    }

    #[test]
    fn self_observation_flagged() {
        let mut spec = preset_paper3();
        spec.schedule[0].target = 1;
        let violations = spec.validate();
        assert!(
            violations.iter().any(|v| v.message.contains("distinct observer")),
            "{violations:?}"
        );
    }

    #[test]
    fn disconnected_graph_flagged_for_update_rounds() {
        let mut spec = preset_paper3();
        // Isolate agent 3: nobody can deliver an update message to it.
        spec.comm = CommSpec::Edges { edges: vec![(1, 2), (2, 1), (3, 1)] };
        let violations = spec.validate();
        assert!(
            violations
                .iter()
                .any(|v| v.message.contains("master 1") && v.message.contains("[3]")),
            "{violations:?}"
        );
    }

    #[test]
    fn toml_round_trip_is_byte_identical() {
        for spec in [preset_paper3(), preset_fig7(), preset_fig2()] {
            let once = spec.to_toml_string().unwrap();
            let parsed = ScenarioSpec::from_toml_str(&once).unwrap();
            assert_eq!(parsed, spec);
            let twice = parsed.to_toml_string().unwrap();
            assert_eq!(once, twice, "canonical serialization must be stable");
        }
    }

    #[test]
    fn window_boundaries_are_half_open() {
        let w = MeasurementWindow {
            t_start_s: 10.0,
            t_end_s: 20.0,
            observer: 1,
            target: 2,
            kind: MeasurementKindSpec::RelativePose,
            noise_std: MeasurementNoiseStd { x_m: 0.05, y_m: 0.05, heading_deg: Some(1.0) },
        };
        assert!(w.active_at(10.0));
        assert!(w.active_at(19.95));
        assert!(!w.active_at(20.0));
        assert!(!w.active_at(9.95));
    }

    #[test]
    fn measurements_sorted_canonically() {
        let spec = preset_paper3();
        let active = spec.measurements_at(150.0);
        let order: Vec<(u16, u16)> = active.iter().map(|w| (w.observer, w.target)).collect();
        assert_eq!(order, vec![(1, 3), (2, 1), (3, 2)]);
    }

    #[test]
    fn piecewise_controls_hold_last_segment() {
        let profile = ControlProfile::Piecewise {
            segments: vec![
                ControlSegment { t_start_s: 0.0, v_mps: 0.1, omega_deg_s: 0.0 },
                ControlSegment { t_start_s: 5.0, v_mps: 0.3, omega_deg_s: 2.0 },
            ],
        };
        assert_eq!(profile.true_controls(1.0), (0.1, 0.0));
        let (v, w) = profile.true_controls(9.0);
        assert_eq!(v, 0.3);
        assert!((w - 2.0_f64.to_radians()).abs() < 1e-15);
    }
}
