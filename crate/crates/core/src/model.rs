//! Network graph, device parameters, partitions and coalition bookkeeping.
//!
//! Buses and microgrids are identified by dense zero-based indices. All
//! powers are in kW and energies in kWh.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a bus, dense in `0..n`.
pub type BusId = usize;
/// Index of a microgrid, dense in `0..m`.
pub type MicrogridId = usize;

/// Forecast of a per-step power quantity (kW), indexed by time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Profile(pub Vec<f64>);

impl Profile {
    pub fn constant(value: f64, len: usize) -> Self {
        Profile(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, step: usize) -> Option<f64> {
        self.0.get(step).copied()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Profile {
    fn from(values: Vec<f64>) -> Self {
        Profile(values)
    }
}

/// Storage unit attached to a bus.
///
/// The state of charge is a fraction of `capacity` and evolves as
/// `x' = efficiency * x - (T_s / capacity) * u_st`, where a positive `u_st`
/// discharges into the bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageParams {
    /// Energy capacity (kWh).
    pub capacity: f64,
    pub efficiency: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub soc_init: f64,
    /// Maximum charging power (kW).
    pub charge_max: f64,
    /// Maximum discharging power (kW).
    pub discharge_max: f64,
}

impl Default for StorageParams {
    fn default() -> Self {
        StorageParams {
            capacity: 1000.0,
            efficiency: 1.0,
            soc_min: 0.3,
            soc_max: 1.0,
            soc_init: 0.5,
            charge_max: 100.0,
            discharge_max: 100.0,
        }
    }
}

/// Diagonal cost weights of a bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub storage: f64,
    pub gen: f64,
    pub import: f64,
    /// Weight on every transfer variable of the bus.
    pub transfer: f64,
    /// Extra per-unit penalty on transfers leaving a microgrid, used only by
    /// the efficiency cost of the repartitioning.
    pub extra_transfer: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            storage: 1.0,
            gen: 10.0,
            import: 10.0,
            transfer: 1.0,
            extra_transfer: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    /// Dispatchable generation capacity (kW); zero means no generator.
    pub gen_capacity: f64,
    pub storage: Option<StorageParams>,
    /// Whether the bus may import from the main grid.
    pub main_grid: bool,
    /// Net load forecast: load minus non-dispatchable generation, may be negative.
    pub load_forecast: Profile,
    /// Bound on the absolute forecast error of the net load.
    pub uncertainty_bound: f64,
    pub costs: CostWeights,
}

impl Bus {
    /// Plain load bus with default costs and no devices.
    pub fn load_only(id: BusId, load_forecast: Profile) -> Self {
        Bus {
            id,
            gen_capacity: 0.0,
            storage: None,
            main_grid: false,
            load_forecast,
            uncertainty_bound: 0.0,
            costs: CostWeights::default(),
        }
    }

    /// Net load planned against: forecast plus the uncertainty bound.
    pub fn worst_case_load(&self, step: usize) -> Option<f64> {
        self.load_forecast
            .get(step)
            .map(|d| d + self.uncertainty_bound)
    }

    fn validate(&self) -> Result<(), String> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        if !finite_nonneg(self.gen_capacity) {
            return Err("gen_capacity must be finite and non-negative".into());
        }
        if !finite_nonneg(self.uncertainty_bound) {
            return Err("uncertainty_bound must be finite and non-negative".into());
        }
        let c = &self.costs;
        if !(finite_pos(c.storage) && finite_pos(c.gen) && finite_pos(c.import) && finite_pos(c.transfer))
        {
            return Err("cost weights must be positive".into());
        }
        if !finite_nonneg(c.extra_transfer) {
            return Err("extra_transfer cost must be non-negative".into());
        }
        if self.load_forecast.values().iter().any(|v| !v.is_finite()) {
            return Err("load_forecast contains non-finite values".into());
        }
        if let Some(s) = &self.storage {
            if !finite_pos(s.capacity) {
                return Err("storage capacity must be positive".into());
            }
            if !(s.efficiency > 0.0 && s.efficiency <= 1.0) {
                return Err("storage efficiency must lie in (0, 1]".into());
            }
            if !(0.0..=1.0).contains(&s.soc_min) || !(0.0..=1.0).contains(&s.soc_max) {
                return Err("state-of-charge bounds must lie in [0, 1]".into());
            }
            if !(s.soc_min <= s.soc_init && s.soc_init <= s.soc_max) {
                return Err("soc_init must lie within [soc_min, soc_max]".into());
            }
            if !finite_nonneg(s.charge_max) || !finite_nonneg(s.discharge_max) {
                return Err("storage power limits must be non-negative".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("bus at position {index} has id {id}; ids must be dense and ordered")]
    BusIdMismatch { index: usize, id: BusId },
    #[error("invalid bus {bus}: {reason}")]
    InvalidBus { bus: BusId, reason: String },
    #[error("edge ({0}, {1}) references an unknown bus")]
    UnknownBus(BusId, BusId),
    #[error("self-loop at bus {0}")]
    SelfLoop(BusId),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(BusId, BusId),
    #[error("network has no buses")]
    Empty,
    #[error("network is disconnected: bus {0} is unreachable from bus 0")]
    Disconnected(BusId),
}

/// Undirected connected bus graph with device data.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    buses: Vec<Bus>,
    edges: Vec<(BusId, BusId)>,
    neighbors: Vec<Vec<BusId>>,
}

impl NetworkModel {
    pub fn new(buses: Vec<Bus>, edges: Vec<(BusId, BusId)>) -> Result<Self, ModelError> {
        if buses.is_empty() {
            return Err(ModelError::Empty);
        }
        for (index, bus) in buses.iter().enumerate() {
            if bus.id != index {
                return Err(ModelError::BusIdMismatch { index, id: bus.id });
            }
            bus.validate()
                .map_err(|reason| ModelError::InvalidBus { bus: index, reason })?;
        }
        let n = buses.len();
        let mut seen = BTreeSet::new();
        let mut neighbors = vec![Vec::new(); n];
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(ModelError::UnknownBus(a, b));
            }
            if a == b {
                return Err(ModelError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(ModelError::DuplicateEdge(e.0, e.1));
            }
            normalized.push(e);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let net = NetworkModel {
            buses,
            edges: normalized,
            neighbors,
        };
        let all: Vec<BusId> = (0..n).collect();
        if let Some(unreached) = net.first_unreached(&all) {
            return Err(ModelError::Disconnected(unreached));
        }
        Ok(net)
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn bus(&self, id: BusId) -> &Bus {
        &self.buses[id]
    }

    /// Edges as `(i, j)` with `i < j`, in input order.
    pub fn edges(&self) -> &[(BusId, BusId)] {
        &self.edges
    }

    /// Sorted neighbor list of a bus.
    pub fn neighbors(&self, id: BusId) -> &[BusId] {
        &self.neighbors[id]
    }

    /// Shortest forecast profile length over all buses.
    pub fn profile_len(&self) -> usize {
        self.buses
            .iter()
            .map(|b| b.load_forecast.len())
            .min()
            .unwrap_or(0)
    }

    /// Whether `nodes` induce a connected subgraph. The empty set is not connected.
    pub fn is_connected_subset(&self, nodes: &[BusId]) -> bool {
        !nodes.is_empty() && self.first_unreached(nodes).is_none()
    }

    /// DFS from the first node restricted to `nodes`; returns a node that was
    /// not reached, if any.
    fn first_unreached(&self, nodes: &[BusId]) -> Option<BusId> {
        let mut inside = vec![false; self.len()];
        for &v in nodes {
            inside[v] = true;
        }
        let mut visited = vec![false; self.len()];
        let mut stack = vec![*nodes.first()?];
        visited[nodes[0]] = true;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if inside[w] && !visited[w] {
                    visited[w] = true;
                    stack.push(w);
                }
            }
        }
        nodes.iter().copied().find(|&v| !visited[v])
    }

    /// Bus mask for a node set.
    pub(crate) fn mask(&self, nodes: &[BusId]) -> Vec<bool> {
        let mut inside = vec![false; self.len()];
        for &v in nodes {
            inside[v] = true;
        }
        inside
    }
}

/// First violated partition invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionViolation {
    #[error("partition references unknown bus {bus}")]
    UnknownBus { bus: BusId },
    #[error("overlapping partition: bus {bus} is assigned to microgrids {first} and {second}")]
    Overlap {
        bus: BusId,
        first: MicrogridId,
        second: MicrogridId,
    },
    #[error("partition does not cover bus {bus}")]
    Uncovered { bus: BusId },
    #[error("microgrid {microgrid} is empty")]
    Empty { microgrid: MicrogridId },
    #[error("microgrid {microgrid} is not connected")]
    Disconnected { microgrid: MicrogridId },
}

/// Checks disjointness, cover, non-emptiness and connectivity, in that order.
pub fn validate_partition(
    net: &NetworkModel,
    members: &[Vec<BusId>],
) -> Result<(), PartitionViolation> {
    let mut owner: Vec<Option<MicrogridId>> = vec![None; net.len()];
    for (p, set) in members.iter().enumerate() {
        for &bus in set {
            if bus >= net.len() {
                return Err(PartitionViolation::UnknownBus { bus });
            }
            match owner[bus] {
                Some(first) => {
                    return Err(PartitionViolation::Overlap {
                        bus,
                        first,
                        second: p,
                    })
                }
                None => owner[bus] = Some(p),
            }
        }
    }
    if let Some(bus) = owner.iter().position(Option::is_none) {
        return Err(PartitionViolation::Uncovered { bus });
    }
    for (p, set) in members.iter().enumerate() {
        if set.is_empty() {
            return Err(PartitionViolation::Empty { microgrid: p });
        }
        if !net.is_connected_subset(set) {
            return Err(PartitionViolation::Disconnected { microgrid: p });
        }
    }
    Ok(())
}

/// Assignment of every bus to exactly one of `m` connected microgrids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    assignment: Vec<MicrogridId>,
    members: Vec<Vec<BusId>>,
}

impl Partition {
    pub fn from_members(
        net: &NetworkModel,
        mut members: Vec<Vec<BusId>>,
    ) -> Result<Self, PartitionViolation> {
        validate_partition(net, &members)?;
        let mut assignment = vec![0; net.len()];
        for (p, set) in members.iter_mut().enumerate() {
            set.sort_unstable();
            for &bus in set.iter() {
                assignment[bus] = p;
            }
        }
        Ok(Partition {
            assignment,
            members,
        })
    }

    /// Number of microgrids.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Sorted member buses of microgrid `p`.
    pub fn members(&self, p: MicrogridId) -> &[BusId] {
        &self.members[p]
    }

    pub fn all_members(&self) -> &[Vec<BusId>] {
        &self.members
    }

    pub fn microgrid_of(&self, bus: BusId) -> MicrogridId {
        self.assignment[bus]
    }

    /// Buses of `p` with at least one neighbor in another microgrid.
    pub fn boundary(&self, net: &NetworkModel, p: MicrogridId) -> Vec<BusId> {
        self.members[p]
            .iter()
            .copied()
            .filter(|&i| net.neighbors(i).iter().any(|&j| self.assignment[j] != p))
            .collect()
    }

    /// Microgrids other than `owner` that contain a neighbor of `bus`, ascending.
    pub fn neighboring_microgrids(
        &self,
        net: &NetworkModel,
        bus: BusId,
        owner: MicrogridId,
    ) -> Vec<MicrogridId> {
        let set: BTreeSet<MicrogridId> = net
            .neighbors(bus)
            .iter()
            .map(|&j| self.assignment[j])
            .filter(|&q| q != owner)
            .collect();
        set.into_iter().collect()
    }

    /// Moves `bus` into microgrid `to`. Callers are responsible for keeping
    /// the partition valid.
    pub(crate) fn move_bus(&mut self, bus: BusId, to: MicrogridId) {
        let from = self.assignment[bus];
        if from == to {
            return;
        }
        self.members[from].retain(|&b| b != bus);
        let pos = self.members[to].partition_point(|&b| b < bus);
        self.members[to].insert(pos, bus);
        self.assignment[bus] = to;
    }
}

/// Per-microgrid coalition node sets `C_p` and member sets `D_p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoalitionStructure {
    nodes: Vec<Vec<BusId>>,
    members: Vec<Vec<MicrogridId>>,
}

impl CoalitionStructure {
    /// Every microgrid in its own coalition.
    pub fn singletons(part: &Partition) -> Self {
        CoalitionStructure {
            nodes: part.all_members().to_vec(),
            members: (0..part.len()).map(|p| vec![p]).collect(),
        }
    }

    /// Sorted node set of the coalition containing `p`.
    pub fn nodes(&self, p: MicrogridId) -> &[BusId] {
        &self.nodes[p]
    }

    /// Sorted microgrid members of the coalition containing `p`.
    pub fn members(&self, p: MicrogridId) -> &[MicrogridId] {
        &self.members[p]
    }

    /// Identifier of the coalition of `p`: its smallest member microgrid.
    pub fn coalition_id(&self, p: MicrogridId) -> MicrogridId {
        self.members[p][0]
    }

    /// Distinct coalitions as member lists, ordered by coalition id.
    pub fn coalitions(&self) -> Vec<&[MicrogridId]> {
        (0..self.members.len())
            .filter(|&p| self.coalition_id(p) == p)
            .map(|p| self.members[p].as_slice())
            .collect()
    }

    pub fn coalition_count(&self) -> usize {
        (0..self.members.len())
            .filter(|&p| self.coalition_id(p) == p)
            .count()
    }

    pub fn is_grand(&self) -> bool {
        self.members.iter().all(|d| d.len() == self.members.len())
    }

    pub fn all_singletons(&self) -> bool {
        self.members.iter().all(|d| d.len() == 1)
    }

    /// Merges the coalitions of `p` and `q`, updating the sets of every member.
    pub(crate) fn merge(&mut self, p: MicrogridId, q: MicrogridId) {
        let mut nodes: Vec<BusId> = self.nodes[p].iter().chain(&self.nodes[q]).copied().collect();
        nodes.sort_unstable();
        nodes.dedup();
        let mut members: Vec<MicrogridId> =
            self.members[p].iter().chain(&self.members[q]).copied().collect();
        members.sort_unstable();
        members.dedup();
        for &r in &members {
            self.nodes[r] = nodes.clone();
            self.members[r] = members.clone();
        }
    }

    /// Verifies the equivalence-class structure against a partition.
    pub fn check(&self, net: &NetworkModel, part: &Partition) -> Result<(), String> {
        let m = part.len();
        if self.nodes.len() != m || self.members.len() != m {
            return Err("coalition structure size differs from partition".into());
        }
        let mut covered = vec![false; net.len()];
        for p in 0..m {
            if !self.members[p].contains(&p) {
                return Err(format!("microgrid {p} is not a member of its own coalition"));
            }
            let mut expected: Vec<BusId> = self.members[p]
                .iter()
                .flat_map(|&q| part.members(q).iter().copied())
                .collect();
            expected.sort_unstable();
            if expected != self.nodes[p] {
                return Err(format!("node set of microgrid {p} differs from its members' union"));
            }
            for &q in &self.members[p] {
                if self.members[q] != self.members[p] {
                    return Err(format!("microgrids {p} and {q} disagree on their coalition"));
                }
            }
            if self.coalition_id(p) == p {
                for &bus in &self.nodes[p] {
                    if covered[bus] {
                        return Err(format!("bus {bus} belongs to two coalitions"));
                    }
                    covered[bus] = true;
                }
            }
        }
        if let Some(bus) = covered.iter().position(|c| !c) {
            return Err(format!("bus {bus} is not covered by any coalition"));
        }
        Ok(())
    }
}

/// Realized net-load disturbance of `bus` at step `k`, uniform in
/// `[-w, w]` with `w` the bus uncertainty bound.
///
/// The value depends only on `(seed, bus.id, k)`.
pub fn realized_disturbance(bus: &Bus, k: usize, seed: u64) -> f64 {
    let bound = bus.uncertainty_bound;
    if bound <= 0.0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[bus.id as u64, k as u64]));
    rng.random_range(-bound..=bound)
}

/// Derives a stream seed from a base seed and a tuple of indices (splitmix64).
pub(crate) fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}
