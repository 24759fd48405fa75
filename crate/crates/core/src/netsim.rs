//! Deterministic communication layer: a directed graph of who can hear whom,
//! multi-hop flooding with per-agent byte accounting, and the connectivity
//! feasibility check for interim-master update rounds.
//!
//! Delivery is synchronous within a simulation step and assumed perfect; a
//! flood is plain BFS in which every agent that receives a message
//! re-broadcasts it exactly once. Geometric graphs (edge iff within
//! communication range) are rebuilt each step from true positions by the
//! harness.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::AgentId;

/// Message classes that cross agent boundaries; payloads are opaque bytes
/// produced by the wire codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum EnvelopeKind {
    Announcement,
    Landmark,
    Update,
    CiRelay,
    CiFused,
}

/// One message in flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub payload: Vec<u8>,
    pub origin: AgentId,
    pub hop_count: u32,
    pub step: u32,
}

impl Envelope {
    pub fn new(kind: EnvelopeKind, origin: AgentId, step: u32, payload: Vec<u8>) -> Self {
        Self { kind, payload, origin, hop_count: 0, step }
    }
}

/// Who received a flooded message (with hop distance), who did not, and what
/// each agent spent transmitting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryReport {
    /// Hop count at which each reached agent first received the message;
    /// the origin is listed with hop 0.
    pub received: BTreeMap<AgentId, u32>,
    /// Agents the flood never reached, ascending.
    pub undelivered: Vec<AgentId>,
    /// Bytes transmitted per agent (one broadcast each).
    pub bytes_sent: BTreeMap<AgentId, u64>,
    /// Total number of broadcasts performed.
    pub broadcasts: u32,
}

impl DeliveryReport {
    pub fn total_bytes(&self) -> u64 {
        self.bytes_sent.values().sum()
    }

    pub fn delivered_to(&self, uid: AgentId) -> bool {
        self.received.contains_key(&uid)
    }
}

/// Directed communication graph over a fixed roster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    uids: Vec<AgentId>,
    out_edges: BTreeMap<AgentId, BTreeSet<AgentId>>,
}

impl CommGraph {
    /// Edge-free graph over the given roster.
    pub fn new(uids: &[AgentId]) -> Result<Self> {
        let mut sorted: Vec<AgentId> = uids.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != uids.len() {
            return Err(Error::InvalidArgument { what: "duplicate agent uid in graph" });
        }
        if sorted.is_empty() {
            return Err(Error::InvalidArgument { what: "graph needs at least one agent" });
        }
        let out_edges = sorted.iter().map(|&u| (u, BTreeSet::new())).collect();
        Ok(Self { uids: sorted, out_edges })
    }

    /// Graph with the given directed `(sender, receiver)` edges.
    pub fn with_edges(uids: &[AgentId], edges: &[(AgentId, AgentId)]) -> Result<Self> {
        let mut g = Self::new(uids)?;
        for &(s, r) in edges {
            g.add_edge(s, r)?;
        }
        Ok(g)
    }

    /// All-to-all graph.
    pub fn complete(uids: &[AgentId]) -> Result<Self> {
        let mut g = Self::new(uids)?;
        let roster = g.uids.clone();
        for &s in &roster {
            for &r in &roster {
                if s != r {
                    g.add_edge(s, r)?;
                }
            }
        }
        Ok(g)
    }

    /// Geometric graph: a directed edge in both directions between every pair
    /// within `comm_range` of each other (planar positions).
    pub fn from_positions(positions: &[(AgentId, f64, f64)], comm_range: f64) -> Result<Self> {
        let uids: Vec<AgentId> = positions.iter().map(|(u, _, _)| *u).collect();
        let mut g = Self::new(&uids)?;
        for (i, &(ui, xi, yi)) in positions.iter().enumerate() {
            for &(uj, xj, yj) in &positions[i + 1..] {
                let d2 = (xi - xj) * (xi - xj) + (yi - yj) * (yi - yj);
                if d2 <= comm_range * comm_range {
                    g.add_edge(ui, uj)?;
                    g.add_edge(uj, ui)?;
                }
            }
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, sender: AgentId, receiver: AgentId) -> Result<()> {
        if sender == receiver {
            return Err(Error::InvalidArgument { what: "self-loop edge" });
        }
        if !self.contains(receiver) {
            return Err(Error::UnknownAgent { uid: receiver });
        }
        self.out_edges
            .get_mut(&sender)
            .ok_or(Error::UnknownAgent { uid: sender })?
            .insert(receiver);
        Ok(())
    }

    pub fn uids(&self) -> &[AgentId] {
        &self.uids
    }

    pub fn contains(&self, uid: AgentId) -> bool {
        self.uids.binary_search(&uid).is_ok()
    }

    pub fn has_edge(&self, sender: AgentId, receiver: AgentId) -> bool {
        self.out_edges
            .get(&sender)
            .is_some_and(|s| s.contains(&receiver))
    }

    /// BFS closure over directed edges from `root` (including `root`).
    pub fn reachable_set(&self, root: AgentId) -> Result<BTreeSet<AgentId>> {
        if !self.contains(root) {
            return Err(Error::UnknownAgent { uid: root });
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(root);
        queue.push_back(root);
        while let Some(node) = queue.pop_front() {
            for &next in &self.out_edges[&node] {
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        Ok(seen)
    }

    /// Multi-hop flood from `origin`: deterministic BFS delivery in which
    /// every agent that receives the message re-broadcasts it once.
    pub fn flood(&self, origin: AgentId, envelope: &Envelope) -> Result<DeliveryReport> {
        if !self.contains(origin) {
            return Err(Error::UnknownAgent { uid: origin });
        }
        let payload_len = envelope.payload.len() as u64;
        let mut received = BTreeMap::new();
        let mut bytes_sent = BTreeMap::new();
        let mut broadcasts = 0u32;
        let mut queue = VecDeque::new();
        received.insert(origin, 0u32);
        queue.push_back((origin, 0u32));
        while let Some((node, hops)) = queue.pop_front() {
            broadcasts += 1;
            *bytes_sent.entry(node).or_insert(0) += payload_len;
            for &next in &self.out_edges[&node] {
                if !received.contains_key(&next) {
                    received.insert(next, hops + 1);
                    queue.push_back((next, hops + 1));
                }
            }
        }
        let undelivered = self
            .uids
            .iter()
            .filter(|u| !received.contains_key(u))
            .cloned()
            .collect();
        Ok(DeliveryReport { received, undelivered, bytes_sent, broadcasts })
    }

    /// Connectivity required by an interim-master update round: the master
    /// must reach the whole team (spanning tree rooted at the master), and
    /// for a relative measurement the landmark must be able to get its
    /// message to the master.
    pub fn check_im_dcl_feasible(
        &self,
        master: AgentId,
        landmark: Option<AgentId>,
    ) -> Result<Feasibility> {
        let from_master = self.reachable_set(master)?;
        let missing_from_master: Vec<AgentId> = self
            .uids
            .iter()
            .filter(|u| !from_master.contains(u))
            .cloned()
            .collect();
        let landmark_blocked = match landmark {
            Some(l) => !self.reachable_set(l)?.contains(&master),
            None => false,
        };
        Ok(Feasibility {
            master,
            landmark,
            feasible: missing_from_master.is_empty() && !landmark_blocked,
            missing_from_master,
            landmark_blocked,
        })
    }
}

/// Outcome of [`CommGraph::check_im_dcl_feasible`], with the witness agents
/// when infeasible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub master: AgentId,
    pub landmark: Option<AgentId>,
    pub feasible: bool,
    /// Agents the master's flood cannot reach.
    pub missing_from_master: Vec<AgentId>,
    /// True when the landmark has no path to the master.
    pub landmark_blocked: bool,
}

impl core::fmt::Display for Feasibility {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.feasible {
            return write!(f, "master {} can run an update round", self.master);
        }
        write!(f, "master {} cannot run an update round:", self.master)?;
        if !self.missing_from_master.is_empty() {
            write!(f, " unreachable agents {:?}", self.missing_from_master)?;
        }
        if self.landmark_blocked {
            if let Some(l) = self.landmark {
                write!(f, " landmark {l} has no path to the master")?;
            }
        }
        Ok(())
    }
}

/// Six-agent multi-hop benchmark topology: a bidirectional chain
/// 1-2-3-4-5-6 with shortcut arrows 1->3 and 6->4. Agents 1 and 6 can each
/// reach the entire team by multi-hop; agent 2 can reach 1 directly and agent
/// 3 reaches 6 through the chain. This is a reconstruction of the topology
/// sketched for the six-robot example, not measured data.
pub fn six_agent_chain_edges() -> Vec<(AgentId, AgentId)> {
    alloc::vec![
        (1, 2),
        (2, 1),
        (1, 3),
        (2, 3),
        (3, 2),
        (3, 4),
        (4, 3),
        (4, 5),
        (5, 4),
        (5, 6),
        (6, 5),
        (6, 4),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(origin: AgentId, len: usize) -> Envelope {
        Envelope::new(EnvelopeKind::Update, origin, 0, alloc::vec![0u8; len])
    }

    #[test]
    fn complete_graph_reaches_everyone() {
        let g = CommGraph::complete(&[1, 2, 3, 4]).unwrap();
        let r = g.reachable_set(2).unwrap();
        assert_eq!(r.len(), 4);
    }

    #[test]
    fn isolated_root_reaches_only_itself() {
        let g = CommGraph::new(&[1, 2, 3]).unwrap();
        let r = g.reachable_set(1).unwrap();
        assert_eq!(r.into_iter().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn six_agent_chain_extremes_reach_all() {
        let uids: Vec<AgentId> = (1..=6).collect();
        let g = CommGraph::with_edges(&uids, &six_agent_chain_edges()).unwrap();
        assert_eq!(g.reachable_set(1).unwrap().len(), 6);
        assert_eq!(g.reachable_set(6).unwrap().len(), 6);
    }

    #[test]
    fn flood_line_graph_hop_counts() {
        let g = CommGraph::with_edges(&[1, 2, 3], &[(1, 2), (2, 3)]).unwrap();
        let report = g.flood(1, &env(1, 100)).unwrap();
        assert_eq!(report.received[&1], 0);
        assert_eq!(report.received[&2], 1);
        assert_eq!(report.received[&3], 2);
        assert!(report.undelivered.is_empty());
        assert_eq!(report.broadcasts, 3);
        assert_eq!(report.total_bytes(), 300);
    }

    #[test]
    fn flood_flags_disconnected_agents() {
        let g = CommGraph::with_edges(&[1, 2, 3], &[(1, 2)]).unwrap();
        let report = g.flood(1, &env(1, 10)).unwrap();
        assert_eq!(report.undelivered, vec![3]);
        assert!(!report.delivered_to(3));
    }

    #[test]
    fn star_flood_broadcast_count_is_team_size() {
        let n = 10;
        let uids: Vec<AgentId> = (1..=n).collect();
        let mut edges = Vec::new();
        for leaf in 2..=n {
            edges.push((1, leaf));
            edges.push((leaf, 1));
        }
        let g = CommGraph::with_edges(&uids, &edges).unwrap();
        let report = g.flood(1, &env(1, 50)).unwrap();
        // The center broadcasts once; every leaf re-broadcasts once.
        assert_eq!(report.broadcasts, n as u32);
        assert_eq!(report.bytes_sent[&1], 50);
    }

    #[test]
    fn flood_reaches_exactly_the_reachable_set() {
        let uids: Vec<AgentId> = (1..=6).collect();
        let edges = [(1, 2), (2, 3), (4, 5), (6, 1)];
        let g = CommGraph::with_edges(&uids, &edges).unwrap();
        for &root in &uids {
            let reach = g.reachable_set(root).unwrap();
            let report = g.flood(root, &env(root, 8)).unwrap();
            let delivered: BTreeSet<AgentId> = report.received.keys().cloned().collect();
            assert_eq!(delivered, reach, "flood/reachability mismatch at root {root}");
        }
    }

    #[test]
    fn feasibility_on_complete_graph() {
        let g = CommGraph::complete(&[1, 2, 3]).unwrap();
        let f = g.check_im_dcl_feasible(1, Some(2)).unwrap();
        assert!(f.feasible);
    }

    #[test]
    fn feasibility_on_six_agent_chain() {
        let uids: Vec<AgentId> = (1..=6).collect();
        let g = CommGraph::with_edges(&uids, &six_agent_chain_edges()).unwrap();
        assert!(g.check_im_dcl_feasible(1, Some(2)).unwrap().feasible);
        assert!(g.check_im_dcl_feasible(6, Some(3)).unwrap().feasible);
    }

    #[test]
    fn feasibility_names_missing_agents() {
        // No in-edges into 3 at all.
        let g = CommGraph::with_edges(&[1, 2, 3], &[(1, 2), (2, 1), (3, 1)]).unwrap();
        let f = g.check_im_dcl_feasible(1, Some(2)).unwrap();
        assert!(!f.feasible);
        assert_eq!(f.missing_from_master, vec![3]);

        // Landmark cut off from the master.
        let g2 = CommGraph::with_edges(&[1, 2, 3], &[(1, 2), (1, 3), (2, 3)]).unwrap();
        let f2 = g2.check_im_dcl_feasible(1, Some(2)).unwrap();
        assert!(!f2.feasible);
        assert!(f2.landmark_blocked);
    }

    #[test]
    fn geometric_graph_by_range() {
        let g = CommGraph::from_positions(&[(1, 0.0, 0.0), (2, 3.0, 0.0), (3, 10.0, 0.0)], 5.0)
            .unwrap();
        assert!(g.has_edge(1, 2) && g.has_edge(2, 1));
        assert!(!g.has_edge(1, 3));
        assert!(g.has_edge(2, 3) == false);
    }

    #[test]
    fn self_loops_rejected() {
        let mut g = CommGraph::new(&[1, 2]).unwrap();
        assert!(g.add_edge(1, 1).is_err());
    }
}
