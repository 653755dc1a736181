//! Economic dispatch problems over a bus set and a prediction horizon.
//!
//! Every included bus `i` has, per step `ℓ`, a storage output `u_st`, a
//! generator output `u_g`, a main-grid import `u_m` and one transfer `v^j`
//! per neighbor `j` (positive when power flows into `i`). The cost is the
//! weighted sum of squares of all of them. Constraints are
//!
//! - local balance `u_st + u_g + u_m + Σ_j v^j = d̂ + w̄` (worst-case load),
//! - reciprocity `v^j_i + v^i_j = 0` for every edge with both ends included,
//! - storage dynamics `x⁺ = a·x − (T_s / e)·u_st` kept within the SoC bounds,
//!   condensed into rows over `u_st` only,
//! - device boxes.
//!
//! How a transfer toward a bus outside the set is treated is chosen per
//! edge by an [`EdgeRole`].

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use thiserror::Error;

use crate::model::{BusId, CoalitionStructure, MicrogridId, NetworkModel, Partition};
use crate::qp::{self, PreparedQp, QpError, QpProblem, QpRow, QpSettings};

/// Treatment of a transfer variable `v^j_i` with `j` outside the bus set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRole {
    /// Fixed to zero.
    Frozen,
    /// Unconstrained and uncoupled.
    Free,
    /// Unconstrained, with the bus's extra transfer cost added to its weight.
    Penalized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchSettings {
    pub sampling_hours: f64,
    /// Optional bound on `|v|` for every transfer variable.
    pub transfer_limit: Option<f64>,
}

impl Default for DispatchSettings {
    fn default() -> Self {
        DispatchSettings {
            sampling_hours: 0.25,
            transfer_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Storage,
    Generation,
    Import,
    /// Transfer from the given neighbor into the bus.
    Transfer(BusId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarKey {
    pub bus: BusId,
    /// Offset within the horizon, `0..h`.
    pub step: usize,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub key: VarKey,
    pub weight: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Balance(BusId),
    Reciprocity(BusId, BusId),
    StateOfCharge(BusId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub kind: RowKind,
    pub step: usize,
    pub terms: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

/// A dispatch QP with its variable layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchProblem {
    pub start: usize,
    pub horizon: usize,
    /// Included buses, ascending.
    pub buses: Vec<BusId>,
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    index: HashMap<VarKey, usize>,
}

impl DispatchProblem {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn index(&self, key: &VarKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn objective(&self, values: &[f64]) -> f64 {
        self.variables
            .iter()
            .zip(values)
            .map(|(v, &x)| v.weight * x * x)
            .sum()
    }

    /// Largest violation of any constraint or bound.
    pub fn max_residual(&self, values: &[f64]) -> f64 {
        self.to_qp().max_residual(values)
    }

    pub fn to_qp(&self) -> QpProblem {
        QpProblem {
            weights: self.variables.iter().map(|v| v.weight).collect(),
            linear: vec![0.0; self.variables.len()],
            lower: self.variables.iter().map(|v| v.lower).collect(),
            upper: self.variables.iter().map(|v| v.upper).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| QpRow {
                    terms: r.terms.clone(),
                    lower: r.lower,
                    upper: r.upper,
                })
                .collect(),
        }
    }

    /// Number of reciprocity rows.
    pub fn reciprocity_rows(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r.kind, RowKind::Reciprocity(..)))
            .count()
    }

    /// First-step set-points of every included bus.
    pub fn first_controls(&self, values: &[f64]) -> Vec<BusControl> {
        let mut out: BTreeMap<BusId, BusControl> = BTreeMap::new();
        for (v, &x) in self.variables.iter().zip(values) {
            if v.key.step != 0 {
                continue;
            }
            let c = out.entry(v.key.bus).or_insert_with(|| BusControl {
                bus: v.key.bus,
                ..BusControl::default()
            });
            match v.key.kind {
                VarKind::Storage => c.storage = x,
                VarKind::Generation => c.generation = x,
                VarKind::Import => c.import = x,
                VarKind::Transfer(j) => c.transfers.push((j, x)),
            }
        }
        out.into_values().collect()
    }

    /// Writes a plain-text listing of variables, cost diagonal and rows.
    pub fn write_listing<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# dispatch qp")?;
        writeln!(w, "start {}", self.start)?;
        writeln!(w, "horizon {}", self.horizon)?;
        let buses: Vec<String> = self.buses.iter().map(|b| b.to_string()).collect();
        writeln!(w, "buses {}", buses.join(" "))?;
        writeln!(w, "variables {}", self.variables.len())?;
        for (j, v) in self.variables.iter().enumerate() {
            writeln!(
                w,
                "x{j} bus={} step={} kind={} weight={} lower={} upper={}",
                v.key.bus,
                v.key.step,
                kind_label(v.key.kind),
                fmt_num(v.weight),
                fmt_num(v.lower),
                fmt_num(v.upper)
            )?;
        }
        writeln!(w, "rows {}", self.rows.len())?;
        for (r, row) in self.rows.iter().enumerate() {
            let kind = match row.kind {
                RowKind::Balance(i) => format!("balance({i})"),
                RowKind::Reciprocity(i, j) => format!("reciprocity({i},{j})"),
                RowKind::StateOfCharge(i) => format!("soc({i})"),
            };
            let terms: Vec<String> = row
                .terms
                .iter()
                .map(|&(j, a)| format!("{}*x{j}", fmt_num(a)))
                .collect();
            writeln!(
                w,
                "r{r} {kind} step={} {} <= {} <= {}",
                row.step,
                fmt_num(row.lower),
                terms.join(" + "),
                fmt_num(row.upper)
            )?;
        }
        Ok(())
    }
}

fn kind_label(kind: VarKind) -> String {
    match kind {
        VarKind::Storage => "storage".into(),
        VarKind::Generation => "gen".into(),
        VarKind::Import => "import".into(),
        VarKind::Transfer(j) => format!("transfer_from_{j}"),
    }
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.8e}")
    }
}

/// First-step set-points of one bus.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct BusControl {
    pub bus: BusId,
    pub storage: f64,
    pub generation: f64,
    pub import: f64,
    /// `(neighbor, v)` pairs, ascending by neighbor.
    pub transfers: Vec<(BusId, f64)>,
}

/// Everything needed to build dispatch problems at one time step.
#[derive(Debug, Clone, Copy)]
pub struct DispatchContext<'a> {
    pub net: &'a NetworkModel,
    pub start: usize,
    pub horizon: usize,
    /// Current state of charge per bus; ignored for buses without storage.
    pub soc: &'a [f64],
    pub settings: DispatchSettings,
}

impl<'a> DispatchContext<'a> {
    /// All buses, all reciprocity rows.
    pub fn build_centralized(&self) -> DispatchProblem {
        let all: Vec<BusId> = (0..self.net.len()).collect();
        self.build_with_roles(&all, |_, _| EdgeRole::Frozen)
    }

    /// Buses of one coalition, transfers leaving it frozen to zero.
    pub fn build_coalition(&self, nodes: &[BusId]) -> DispatchProblem {
        self.build_with_roles(nodes, |_, _| EdgeRole::Frozen)
    }

    /// One relaxed problem per coalition, with transfers leaving each
    /// coalition free. The sum of their optima is a lower bound on the
    /// centralized optimum.
    pub fn build_lower_bound(&self, coalitions: &CoalitionStructure) -> Vec<DispatchProblem> {
        coalitions
            .coalitions()
            .iter()
            .map(|members| self.build_with_roles(coalitions.nodes(members[0]), |_, _| EdgeRole::Free))
            .collect()
    }

    /// Microgrid problem whose boundary transfers are free but pay the
    /// extra transfer cost.
    pub fn build_efficiency(&self, nodes: &[BusId]) -> DispatchProblem {
        self.build_with_roles(nodes, |_, _| EdgeRole::Penalized)
    }

    /// Builds the problem over `nodes`. `role(i, j)` is consulted for every
    /// edge with `i` inside and `j` outside the set.
    pub fn build_with_roles(
        &self,
        nodes: &[BusId],
        role: impl Fn(BusId, BusId) -> EdgeRole,
    ) -> DispatchProblem {
        let net = self.net;
        let h = self.horizon;
        let mut buses = nodes.to_vec();
        buses.sort_unstable();
        buses.dedup();
        let inside = net.mask(&buses);
        let limit = self.settings.transfer_limit.unwrap_or(f64::INFINITY);

        let mut variables = Vec::new();
        let mut index = HashMap::new();
        let mut push = |key: VarKey, weight: f64, lower: f64, upper: f64| {
            index.insert(key, variables.len());
            variables.push(Variable {
                key,
                weight,
                lower,
                upper,
            });
        };
        for &i in &buses {
            let bus = net.bus(i);
            let c = &bus.costs;
            for step in 0..h {
                let key = |kind| VarKey { bus: i, step, kind };
                let (st_lo, st_hi) = match &bus.storage {
                    Some(s) => (-s.charge_max, s.discharge_max),
                    None => (0.0, 0.0),
                };
                push(key(VarKind::Storage), c.storage, st_lo, st_hi);
                push(key(VarKind::Generation), c.gen, 0.0, bus.gen_capacity);
                let import_hi = if bus.main_grid { f64::INFINITY } else { 0.0 };
                push(key(VarKind::Import), c.import, 0.0, import_hi);
                for &j in net.neighbors(i) {
                    let (weight, lo, hi) = if inside[j] {
                        (c.transfer, -limit, limit)
                    } else {
                        match role(i, j) {
                            EdgeRole::Frozen => (c.transfer, 0.0, 0.0),
                            EdgeRole::Free => (c.transfer, -limit, limit),
                            EdgeRole::Penalized => (c.transfer + c.extra_transfer, -limit, limit),
                        }
                    };
                    push(key(VarKind::Transfer(j)), weight, lo, hi);
                }
            }
        }

        let idx = |bus, step, kind| index[&VarKey { bus, step, kind }];
        let mut rows = Vec::new();
        for &i in &buses {
            let bus = net.bus(i);
            for step in 0..h {
                let demand = bus
                    .worst_case_load(self.start + step)
                    .expect("load profile covers the horizon");
                let mut terms = vec![
                    (idx(i, step, VarKind::Storage), 1.0),
                    (idx(i, step, VarKind::Generation), 1.0),
                    (idx(i, step, VarKind::Import), 1.0),
                ];
                for &j in net.neighbors(i) {
                    terms.push((idx(i, step, VarKind::Transfer(j)), 1.0));
                }
                rows.push(Row {
                    kind: RowKind::Balance(i),
                    step,
                    terms,
                    lower: demand,
                    upper: demand,
                });
            }
        }
        for &(i, j) in net.edges() {
            if inside[i] && inside[j] {
                for step in 0..h {
                    rows.push(Row {
                        kind: RowKind::Reciprocity(i, j),
                        step,
                        terms: vec![
                            (idx(i, step, VarKind::Transfer(j)), 1.0),
                            (idx(j, step, VarKind::Transfer(i)), 1.0),
                        ],
                        lower: 0.0,
                        upper: 0.0,
                    });
                }
            }
        }
        for &i in &buses {
            let Some(s) = &net.bus(i).storage else {
                continue;
            };
            let scale = s.capacity / self.settings.sampling_hours;
            let x0 = self.soc[i];
            for t in 0..h {
                // x_{t+1} = a^{t+1} x0 - (T_s/e) Σ_{τ≤t} a^{t-τ} u_τ
                let decay = s.efficiency.powi(t as i32 + 1) * x0;
                let terms: Vec<(usize, f64)> = (0..=t)
                    .map(|tau| {
                        (
                            idx(i, tau, VarKind::Storage),
                            -s.efficiency.powi((t - tau) as i32),
                        )
                    })
                    .collect();
                rows.push(Row {
                    kind: RowKind::StateOfCharge(i),
                    step: t,
                    terms,
                    lower: (s.soc_min - decay) * scale,
                    upper: (s.soc_max - decay) * scale,
                });
            }
        }

        DispatchProblem {
            start: self.start,
            horizon: h,
            buses,
            variables,
            rows,
            index,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub max_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError {
    #[error("dispatch over buses {buses:?} is infeasible: {certificate}")]
    Infeasible {
        buses: Vec<BusId>,
        certificate: String,
    },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("dual ascent stopped after {iterations} iterations with residual {residual:.3e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("{0}")]
    Precondition(String),
}

impl DispatchError {
    fn from_qp(err: QpError, buses: &[BusId]) -> Self {
        match err {
            QpError::Infeasible { certificate } => DispatchError::Infeasible {
                buses: buses.to_vec(),
                certificate,
            },
            other => DispatchError::Solver(other.to_string()),
        }
    }
}

/// Accuracy at which a solution counts as feasible (kW).
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// Solves a dispatch problem in one piece.
pub fn solve_qp(problem: &DispatchProblem) -> Result<DispatchSolution, DispatchError> {
    let sol = qp::solve(&problem.to_qp(), &QpSettings::default())
        .map_err(|e| DispatchError::from_qp(e, &problem.buses))?;
    if sol.max_residual > FEASIBILITY_TOLERANCE {
        return Err(DispatchError::Solver(format!(
            "solution residual {:.3e} exceeds tolerance",
            sol.max_residual
        )));
    }
    Ok(DispatchSolution {
        objective: problem.objective(&sol.x),
        values: sol.x,
        max_residual: sol.max_residual,
        iterations: sol.iterations,
    })
}

/// Coalition solutions mapped onto the centralized variable layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StitchedSolution {
    pub problem: DispatchProblem,
    pub values: Vec<f64>,
    /// Largest violation of any centralized constraint.
    pub max_residual: f64,
    pub objective: f64,
}

/// Combines per-coalition solutions into one assignment of the centralized
/// problem. Variables not covered by any piece stay at zero.
pub fn stitch(
    ctx: &DispatchContext<'_>,
    pieces: &[(&DispatchProblem, &DispatchSolution)],
) -> StitchedSolution {
    let problem = ctx.build_centralized();
    let mut values = vec![0.0; problem.num_vars()];
    for (piece, sol) in pieces {
        for (v, &x) in piece.variables.iter().zip(&sol.values) {
            if let Some(j) = problem.index(&v.key) {
                values[j] = x;
            }
        }
    }
    StitchedSolution {
        max_residual: problem.max_residual(&values),
        objective: problem.objective(&values),
        problem,
        values,
    }
}

/// Counts of exchanged messages and the scalar values they carry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MessageTally {
    pub messages: u64,
    pub values: u64,
}

impl MessageTally {
    pub fn add(&mut self, messages: u64, values_each: u64) {
        self.messages += messages;
        self.values += messages * values_each;
    }
}

impl std::ops::AddAssign for MessageTally {
    fn add_assign(&mut self, rhs: Self) {
        self.messages += rhs.messages;
        self.values += rhs.values;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualAscentOptions {
    /// Stop once every relaxed reciprocity residual is at most this (kW).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Use Nesterov momentum with adaptive restart.
    pub accelerated: bool,
}

impl Default for DualAscentOptions {
    fn default() -> Self {
        DualAscentOptions {
            tolerance: 1e-7,
            max_iterations: 20_000,
            accelerated: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualAscentOutcome {
    /// The coalition problem the solution refers to.
    pub problem: DispatchProblem,
    pub solution: DispatchSolution,
    pub iterations: usize,
    pub residual: f64,
    pub messages: MessageTally,
    /// Final prices of the relaxed rows, per `(i, j, offset)` with `i < j`
    /// and `offset` the position within the horizon.
    pub prices: Vec<((BusId, BusId, usize), f64)>,
}

/// Local solutions, relaxed-row residuals and dual value at some prices.
type Evaluation = (Vec<Vec<f64>>, Vec<f64>, f64);

/// One relaxed reciprocity row between two microgrids of the coalition.
struct Coupling {
    edge: (BusId, BusId, usize),
    a: (usize, usize),
    b: (usize, usize),
    lipschitz: f64,
}

/// Solves a multi-microgrid coalition by dual decomposition: each member
/// microgrid solves its own problem, and the reciprocity rows between
/// members are priced and updated by gradient ascent on their residuals.
pub fn solve_coalition_distributed(
    ctx: &DispatchContext<'_>,
    part: &Partition,
    members: &[MicrogridId],
    options: &DualAscentOptions,
) -> Result<DualAscentOutcome, DispatchError> {
    let mut members = members.to_vec();
    members.sort_unstable();
    members.dedup();
    if members.len() < 2 {
        return Err(DispatchError::Precondition(
            "distributed solve needs a coalition of at least two microgrids".into(),
        ));
    }
    let net = ctx.net;
    let h = ctx.horizon;
    let nodes: Vec<BusId> = members
        .iter()
        .flat_map(|&p| part.members(p).iter().copied())
        .collect();
    let coalition = ctx.build_coalition(&nodes);
    let in_coalition = net.mask(&nodes);

    let locals: Vec<DispatchProblem> = members
        .iter()
        .map(|&p| {
            ctx.build_with_roles(part.members(p), |_, j| {
                if in_coalition[j] {
                    EdgeRole::Free
                } else {
                    EdgeRole::Frozen
                }
            })
        })
        .collect();
    let slot_of: HashMap<MicrogridId, usize> =
        members.iter().enumerate().map(|(s, &p)| (p, s)).collect();

    let mut couplings = Vec::new();
    let mut cross_edges: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for &(i, j) in net.edges() {
        let (pi, pj) = (part.microgrid_of(i), part.microgrid_of(j));
        if pi == pj || !in_coalition[i] || !in_coalition[j] {
            continue;
        }
        let (si, sj) = (slot_of[&pi], slot_of[&pj]);
        *cross_edges.entry((si.min(sj), si.max(sj))).or_default() += 1;
        let wi = net.bus(i).costs.transfer;
        let wj = net.bus(j).costs.transfer;
        for step in 0..h {
            let ki = locals[si]
                .index(&VarKey {
                    bus: i,
                    step,
                    kind: VarKind::Transfer(j),
                })
                .expect("transfer variable exists");
            let kj = locals[sj]
                .index(&VarKey {
                    bus: j,
                    step,
                    kind: VarKind::Transfer(i),
                })
                .expect("transfer variable exists");
            couplings.push(Coupling {
                edge: (i, j, step),
                a: (si, ki),
                b: (sj, kj),
                lipschitz: 0.5 / wi + 0.5 / wj,
            });
        }
    }
    // Each microgrid pair sharing an edge exchanges boundary transfers both ways.
    let per_round: Vec<u64> = cross_edges.values().map(|&e| e * h as u64).collect();

    let mut prepared: Vec<PreparedQp> = Vec::with_capacity(locals.len());
    for local in &locals {
        prepared.push(
            PreparedQp::new(local.to_qp()).map_err(|e| DispatchError::from_qp(e, &local.buses))?,
        );
    }
    let lipschitz = couplings
        .iter()
        .map(|c| c.lipschitz)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut sigma = 1.0 / lipschitz;
    let settings = QpSettings::default();
    let mut messages = MessageTally::default();

    // Local solutions, residuals and dual value at the given prices.
    let mut evaluate = |prices: &[f64]| -> Result<Evaluation, DispatchError> {
        let mut linear: Vec<Vec<f64>> = locals.iter().map(|l| vec![0.0; l.num_vars()]).collect();
        for (c, &lambda) in couplings.iter().zip(prices) {
            linear[c.a.0][c.a.1] += lambda;
            linear[c.b.0][c.b.1] += lambda;
        }
        let mut xs = Vec::with_capacity(prepared.len());
        let mut dual = 0.0;
        for (s, prep) in prepared.iter_mut().enumerate() {
            prep.set_linear(&linear[s]);
            let sol = prep
                .solve(&settings)
                .map_err(|e| DispatchError::from_qp(e, &locals[s].buses))?;
            dual += prep.problem().objective(&sol.x);
            xs.push(sol.x);
        }
        let resid: Vec<f64> = couplings
            .iter()
            .map(|c| xs[c.a.0][c.a.1] + xs[c.b.0][c.b.1])
            .collect();
        Ok((xs, resid, dual))
    };

    let nc = couplings.len();
    let mut lambda = vec![0.0; nc];
    let mut lambda_prev = vec![0.0; nc];
    let mut momentum_k = 0usize;
    let mut iterations = 0;
    let mut best_dual = f64::NEG_INFINITY;
    loop {
        // Extrapolated point.
        let beta = if options.accelerated && momentum_k > 0 {
            (momentum_k as f64 - 1.0) / (momentum_k as f64 + 2.0)
        } else {
            0.0
        };
        let point: Vec<f64> = (0..nc)
            .map(|c| lambda[c] + beta * (lambda[c] - lambda_prev[c]))
            .collect();
        let (xs, resid, dual) = evaluate(&point)?;
        iterations += 1;
        for &v in &per_round {
            messages.add(2, v);
        }
        let residual = resid.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if residual <= options.tolerance {
            let mut values = vec![0.0; coalition.num_vars()];
            for (s, local) in locals.iter().enumerate() {
                for (v, &x) in local.variables.iter().zip(&xs[s]) {
                    if let Some(j) = coalition.index(&v.key) {
                        values[j] = x;
                    }
                }
            }
            let prices = couplings.iter().zip(&point).map(|(c, &l)| (c.edge, l)).collect();
            let solution = DispatchSolution {
                objective: coalition.objective(&values),
                max_residual: coalition.max_residual(&values),
                values,
                iterations,
            };
            return Ok(DualAscentOutcome {
                problem: coalition,
                solution,
                iterations,
                residual,
                messages,
                prices,
            });
        }
        if iterations >= options.max_iterations {
            return Err(DispatchError::NotConverged {
                iterations,
                residual,
            });
        }
        // Local objectives already include the price terms.
        let lagrangian = dual;
        if !options.accelerated && lagrangian < best_dual - 1e-12 * (1.0 + best_dual.abs()) {
            // The dual value dropped: undo the last step and shorten it.
            sigma *= 0.5;
            lambda.clone_from(&lambda_prev);
            continue;
        }
        best_dual = best_dual.max(lagrangian);
        let next: Vec<f64> = (0..nc).map(|c| point[c] + sigma * resid[c]).collect();
        // Restart momentum when the step opposes the previous direction.
        let progress: f64 = (0..nc).map(|c| resid[c] * (next[c] - lambda[c])).sum();
        lambda_prev = std::mem::replace(&mut lambda, next);
        momentum_k = if options.accelerated && progress < 0.0 {
            0
        } else {
            momentum_k + 1
        };
    }
}

/// Online bound `J* − J^b` on the optimality gap.
pub fn suboptimality_bound(j_star: f64, j_lower: f64) -> f64 {
    j_star - j_lower
}

/// Exact gap `J* − J°` against the centralized optimum.
pub fn suboptimality_exact(j_star: f64, j_opt: f64) -> f64 {
    j_star - j_opt
}
