//! Self-sufficiency, the repartitioning trigger and the local-improvement
//! repartitioning procedure.
//!
//! A bus set is self-sufficient over a window when its worst-case net load
//! never exceeds its generation capacity. The partition cost of a microgrid
//! is `α·J^im + J^ef`: the summed positive imbalance, weighted, plus the
//! optimal dispatch cost when power crossing its boundary pays an extra
//! per-unit penalty.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::dispatch::{solve_qp, DispatchContext, DispatchError, MessageTally};
use crate::model::{mix_seed, BusId, MicrogridId, NetworkModel, Partition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitioningError {
    #[error("step {step} is outside the load profile (length {len})")]
    StepOutOfRange { step: usize, len: usize },
    #[error("repartitioning needs an iteration budget of at least 1")]
    ZeroIterations,
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

/// Worst-case net load minus generation capacity of `nodes` at `step`.
pub fn local_imbalance(
    net: &NetworkModel,
    nodes: &[BusId],
    step: usize,
) -> Result<f64, PartitioningError> {
    nodes.iter().try_fold(0.0, |acc, &i| {
        let bus = net.bus(i);
        let load = bus
            .worst_case_load(step)
            .ok_or(PartitioningError::StepOutOfRange {
                step,
                len: bus.load_forecast.len(),
            })?;
        Ok(acc - bus.gen_capacity + load)
    })
}

/// Imbalance of a bus set over the window `k..k+h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImbalanceReport {
    pub start: usize,
    pub imbalance: Vec<f64>,
    /// Sum of the positive parts.
    pub cost: f64,
    pub self_sufficient: bool,
}

pub fn imbalance_report(
    net: &NetworkModel,
    nodes: &[BusId],
    k: usize,
    h: usize,
) -> Result<ImbalanceReport, PartitioningError> {
    let imbalance = (k..k + h)
        .map(|l| local_imbalance(net, nodes, l))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ImbalanceReport::from_series(k, imbalance))
}

impl ImbalanceReport {
    pub fn from_series(start: usize, imbalance: Vec<f64>) -> Self {
        ImbalanceReport {
            start,
            cost: imbalance.iter().map(|d| d.max(0.0)).sum(),
            self_sufficient: imbalance.iter().all(|&d| d <= 0.0),
            imbalance,
        }
    }
}

pub fn is_self_sufficient(
    net: &NetworkModel,
    nodes: &[BusId],
    k: usize,
    h: usize,
) -> Result<(bool, ImbalanceReport), PartitioningError> {
    let report = imbalance_report(net, nodes, k, h)?;
    Ok((report.self_sufficient, report))
}

pub fn imbalance_cost(
    net: &NetworkModel,
    nodes: &[BusId],
    k: usize,
    h: usize,
) -> Result<f64, PartitioningError> {
    Ok(imbalance_report(net, nodes, k, h)?.cost)
}

/// Optimal dispatch cost of `nodes` with boundary transfers penalized.
pub fn efficiency_cost(ctx: &DispatchContext<'_>, nodes: &[BusId]) -> Result<f64, DispatchError> {
    Ok(solve_qp(&ctx.build_efficiency(nodes))?.objective)
}

/// `α·J^im + J^ef` of one microgrid.
pub fn partition_cost(
    ctx: &DispatchContext<'_>,
    nodes: &[BusId],
    alpha: f64,
) -> Result<f64, PartitioningError> {
    let im = imbalance_cost(ctx.net, nodes, ctx.start, ctx.horizon)?;
    Ok(alpha * im + efficiency_cost(ctx, nodes)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriggerReport {
    pub triggered: bool,
    /// Microgrids that are not self-sufficient, ascending.
    pub deficient: Vec<MicrogridId>,
    pub reports: Vec<ImbalanceReport>,
}

/// Evaluates every microgrid of `part` over `k..k+h`; triggers when any
/// of them is not self-sufficient.
pub fn check_trigger(
    net: &NetworkModel,
    part: &Partition,
    k: usize,
    h: usize,
) -> Result<TriggerReport, PartitioningError> {
    let reports = (0..part.len())
        .map(|p| imbalance_report(net, part.members(p), k, h))
        .collect::<Result<Vec<_>, _>>()?;
    let deficient: Vec<MicrogridId> = reports
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.self_sufficient)
        .map(|(p, _)| p)
        .collect();
    Ok(TriggerReport {
        triggered: !deficient.is_empty(),
        deficient,
        reports,
    })
}

/// Boundary buses of `p` whose removal leaves `p` connected and non-empty.
pub fn movable_boundary_nodes(net: &NetworkModel, part: &Partition, p: MicrogridId) -> Vec<BusId> {
    let members = part.members(p);
    if members.len() < 2 {
        return Vec::new();
    }
    part.boundary(net, p)
        .into_iter()
        .filter(|&theta| {
            let rest: Vec<BusId> = members.iter().copied().filter(|&b| b != theta).collect();
            net.is_connected_subset(&rest)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepartitionOptions {
    pub alpha: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

/// One proposer turn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepartitionStep {
    pub iteration: usize,
    pub proposer: MicrogridId,
    /// Offered node, if the proposer had a movable one.
    pub node: Option<BusId>,
    /// Change of the proposer's cost if the node leaves.
    pub proposer_delta: f64,
    /// `(receiver, expected total change)` per neighboring microgrid.
    pub candidates: Vec<(MicrogridId, f64)>,
    pub chosen: Option<MicrogridId>,
    pub accepted: bool,
    pub cost_before: f64,
    pub cost_after: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RepartitionTrace {
    pub steps: Vec<RepartitionStep>,
    pub accepted: usize,
    pub messages: MessageTally,
}

/// Memoized partition cost by bus set.
struct CostCache<'c, 'a> {
    ctx: &'c DispatchContext<'a>,
    alpha: f64,
    memo: HashMap<Vec<BusId>, f64>,
}

impl CostCache<'_, '_> {
    fn cost(&mut self, nodes: &[BusId]) -> Result<f64, PartitioningError> {
        let mut key = nodes.to_vec();
        key.sort_unstable();
        if let Some(&c) = self.memo.get(&key) {
            return Ok(c);
        }
        let c = partition_cost(self.ctx, &key, self.alpha)?;
        self.memo.insert(key, c);
        Ok(c)
    }

    fn total(&mut self, part: &Partition) -> Result<f64, PartitioningError> {
        (0..part.len()).try_fold(0.0, |acc, p| Ok(acc + self.cost(part.members(p))?))
    }
}

/// Indices whose value lies within a relative `1e-9` of the minimum.
fn minimizers(values: &[f64]) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1e-9 * (1.0 + best.abs());
    (0..values.len())
        .filter(|&i| values[i] <= best + slack)
        .collect()
}

fn pick(rng: &mut ChaCha8Rng, options: &[usize]) -> usize {
    if options.len() == 1 {
        options[0]
    } else {
        options[rng.random_range(0..options.len())]
    }
}

/// Runs the local-improvement repartitioning from `part` at the time step
/// and with the storage states of `ctx`.
///
/// Proposers take turns in ascending id order, starting from the lowest
/// deficient microgrid. The procedure stops after `max_iterations` turns or
/// after `m` consecutive turns without an accepted move.
pub fn repartition(
    ctx: &DispatchContext<'_>,
    part: &Partition,
    options: &RepartitionOptions,
) -> Result<(Partition, RepartitionTrace), PartitioningError> {
    if options.max_iterations == 0 {
        return Err(PartitioningError::ZeroIterations);
    }
    let net = ctx.net;
    let m = part.len();
    let mut part = part.clone();
    let mut trace = RepartitionTrace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(options.seed, &[ctx.start as u64, 0x5e9]));
    let mut cache = CostCache {
        ctx,
        alpha: options.alpha,
        memo: HashMap::new(),
    };

    let trigger = check_trigger(net, &part, ctx.start, ctx.horizon)?;
    // Every deficient microgrid announces its flag to all others.
    trace
        .messages
        .add((trigger.deficient.len() * (m - 1)) as u64, 1);
    let mut proposer = trigger.deficient.first().copied().unwrap_or(0);
    let mut idle_turns = 0;

    for iteration in 0..options.max_iterations {
        if idle_turns >= m {
            break;
        }
        let p = proposer;
        proposer = (proposer + 1) % m;
        let cost_before = cache.total(&part)?;
        let mut step = RepartitionStep {
            iteration,
            proposer: p,
            node: None,
            proposer_delta: 0.0,
            candidates: Vec::new(),
            chosen: None,
            accepted: false,
            cost_before,
            cost_after: cost_before,
        };

        let movable = movable_boundary_nodes(net, &part, p);
        if !movable.is_empty() {
            let current = cache.cost(part.members(p))?;
            let mut without = Vec::with_capacity(movable.len());
            for &theta in &movable {
                let rest: Vec<BusId> = part
                    .members(p)
                    .iter()
                    .copied()
                    .filter(|&b| b != theta)
                    .collect();
                without.push(cache.cost(&rest)?);
            }
            let t = pick(&mut rng, &minimizers(&without));
            let theta = movable[t];
            let delta_p = without[t] - current;
            step.node = Some(theta);
            step.proposer_delta = delta_p;

            let receivers = part.neighboring_microgrids(net, theta, p);
            trace.messages.add(receivers.len() as u64, 2);
            trace.messages.add(receivers.len() as u64, 1);
            let mut totals = Vec::with_capacity(receivers.len());
            for &q in &receivers {
                let mut grown = part.members(q).to_vec();
                grown.push(theta);
                let dq = cache.cost(&grown)? - cache.cost(part.members(q))?;
                totals.push(dq + delta_p);
            }
            step.candidates = receivers.iter().copied().zip(totals.iter().copied()).collect();
            let c = pick(&mut rng, &minimizers(&totals));
            let q_star = receivers[c];
            step.chosen = Some(q_star);
            if totals[c] <= 0.0 {
                part.move_bus(theta, q_star);
                trace.messages.add(1, 1);
                step.accepted = true;
                step.cost_after = cache.total(&part)?;
            }
        }

        if step.accepted {
            trace.accepted += 1;
            idle_turns = 0;
        } else {
            idle_turns += 1;
        }
        trace.steps.push(step);
    }
    debug_assert!(crate::model::validate_partition(net, part.all_members()).is_ok());
    Ok((part, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispatch::DispatchSettings;
    use crate::model::{Bus, Profile};

    fn bus(id: BusId, gen: f64, load: f64, w: f64) -> Bus {
        let mut b = Bus::load_only(id, Profile::constant(load, 4));
        b.gen_capacity = gen;
        b.uncertainty_bound = w;
        b
    }

    fn ctx<'a>(net: &'a NetworkModel, soc: &'a [f64], h: usize) -> DispatchContext<'a> {
        DispatchContext {
            net,
            start: 0,
            horizon: h,
            soc,
            settings: DispatchSettings::default(),
        }
    }

    fn with_series(id: BusId, series: &[f64]) -> Bus {
        Bus::load_only(id, Profile(series.to_vec()))
    }

    #[test]
    fn imbalance_examples() {
        let net = NetworkModel::new(
            vec![bus(0, 0.0, 50.0, 5.0), bus(1, 100.0, 30.0, 0.0), bus(2, 0.0, 40.0, 10.0)],
            vec![(0, 1), (1, 2)],
        )
        .unwrap();
        assert_eq!(local_imbalance(&net, &[], 0).unwrap(), 0.0);
        assert_eq!(local_imbalance(&net, &[0], 0).unwrap(), 55.0);
        assert_eq!(local_imbalance(&net, &[1, 2], 0).unwrap(), -20.0);
        assert!(matches!(
            local_imbalance(&net, &[0], 9),
            Err(PartitioningError::StepOutOfRange { step: 9, len: 4 })
        ));
    }

    #[test]
    fn self_sufficiency_examples() {
        let net = NetworkModel::new(vec![bus(0, 10.0, 0.0, 0.0)], vec![]).unwrap();
        assert!(is_self_sufficient(&net, &[0], 0, 3).unwrap().0);

        let mixed = NetworkModel::new(vec![with_series(0, &[-5.0, 1.0, -3.0])], vec![]).unwrap();
        let (ok, report) = is_self_sufficient(&mixed, &[0], 0, 3).unwrap();
        assert!(!ok);
        assert_eq!(report.cost, 1.0);

        let zero = NetworkModel::new(vec![with_series(0, &[0.0, 0.0])], vec![]).unwrap();
        assert!(is_self_sufficient(&zero, &[0], 0, 2).unwrap().0);

        let deficit = NetworkModel::new(vec![with_series(0, &[2.0, 3.0])], vec![]).unwrap();
        assert_eq!(imbalance_cost(&deficit, &[0], 0, 2).unwrap(), 5.0);
    }

    #[test]
    fn efficiency_cost_of_idle_bus_is_zero() {
        let net = NetworkModel::new(vec![bus(0, 0.0, 0.0, 0.0)], vec![]).unwrap();
        assert!(efficiency_cost(&ctx(&net, &[0.0], 1), &[0]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn efficiency_cost_of_importing_bus() {
        // Only the boundary edge can serve the 10 kW load:
        // (1000 + 1)·10² = 100,100.
        let mut b0 = bus(0, 0.0, 10.0, 0.0);
        b0.costs.extra_transfer = 1000.0;
        let net = NetworkModel::new(vec![b0, bus(1, 0.0, 0.0, 0.0)], vec![(0, 1)]).unwrap();
        let c = efficiency_cost(&ctx(&net, &[0.0; 2], 1), &[0]).unwrap();
        assert!((c - 100_100.0).abs() < 1e-4, "{c}");
    }

    #[test]
    fn efficiency_cost_of_internal_transfer() {
        // Generator at bus 0 serves bus 1 through both directed transfers:
        // 10·10² + 1·10² + 1·10² = 1200.
        let net = NetworkModel::new(
            vec![bus(0, 350.0, 0.0, 0.0), bus(1, 0.0, 10.0, 0.0)],
            vec![(0, 1)],
        )
        .unwrap();
        let c = efficiency_cost(&ctx(&net, &[0.0; 2], 1), &[0, 1]).unwrap();
        assert!((c - 1200.0).abs() < 1e-6, "{c}");
    }

    #[test]
    fn partition_cost_combines_terms() {
        let net = NetworkModel::new(vec![bus(0, 350.0, 10.0, 0.0)], vec![]).unwrap();
        let c = ctx(&net, &[0.0], 1);
        let ef = efficiency_cost(&c, &[0]).unwrap();
        assert!((partition_cost(&c, &[0], 1e4).unwrap() - ef).abs() < 1e-9);
        assert!((partition_cost(&c, &[0], 0.0).unwrap() - ef).abs() < 1e-9);
        assert_eq!(1e4 * 1.0 + 1200.0, 11_200.0);
    }

    fn path_instance() -> (NetworkModel, Partition) {
        let loads = [0.0, 10.0, 60.0, 10.0];
        let buses = (0..4)
            .map(|i| bus(i, if i == 0 { 100.0 } else { 0.0 }, loads[i], 0.0))
            .collect();
        let net = NetworkModel::new(buses, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let part = Partition::from_members(&net, vec![vec![0, 1], vec![2, 3]]).unwrap();
        (net, part)
    }

    #[test]
    fn trigger_reports_deficient_microgrids() {
        let (net, part) = path_instance();
        let t = check_trigger(&net, &part, 0, 1).unwrap();
        assert!(t.triggered);
        assert_eq!(t.deficient, vec![1]);

        let whole = Partition::from_members(&net, vec![vec![0, 1, 2, 3]]).unwrap();
        assert!(!check_trigger(&net, &whole, 0, 1).unwrap().triggered);
    }

    #[test]
    fn movable_nodes_exclude_cut_vertices_and_singletons() {
        // 0-1-2 | 3 | 4, with 2 adjacent to 3 and 0 adjacent to 4.
        let buses = (0..5).map(|i| bus(i, 0.0, 0.0, 0.0)).collect();
        let net = NetworkModel::new(buses, vec![(0, 1), (1, 2), (2, 3), (0, 4)]).unwrap();
        let part = Partition::from_members(&net, vec![vec![0, 1, 2], vec![3], vec![4]]).unwrap();
        assert_eq!(movable_boundary_nodes(&net, &part, 0), vec![0, 2]);
        assert!(movable_boundary_nodes(&net, &part, 1).is_empty());

        let tri = NetworkModel::new(
            (0..4).map(|i| bus(i, 0.0, 0.0, 0.0)).collect(),
            vec![(0, 1), (1, 2), (0, 2), (2, 3), (1, 3), (0, 3)],
        )
        .unwrap();
        let part = Partition::from_members(&tri, vec![vec![0, 1, 2], vec![3]]).unwrap();
        assert_eq!(movable_boundary_nodes(&tri, &part, 0), vec![0, 1, 2]);
    }

    #[test]
    fn path_instance_moves_the_deficit_bus() {
        let (net, part) = path_instance();
        let soc = [0.0; 4];
        let (out, trace) = repartition(
            &ctx(&net, &soc, 1),
            &part,
            &RepartitionOptions {
                alpha: 1e4,
                max_iterations: 50,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(out.members(0), &[0, 1, 2]);
        assert_eq!(out.members(1), &[3]);
        assert!(trace.accepted >= 1);
        for s in &trace.steps {
            assert!(s.cost_after <= s.cost_before);
        }
    }

    #[test]
    fn zero_budget_is_rejected() {
        let (net, part) = path_instance();
        let soc = [0.0; 4];
        let err = repartition(
            &ctx(&net, &soc, 1),
            &part,
            &RepartitionOptions {
                alpha: 1e4,
                max_iterations: 0,
                seed: 0,
            },
        )
        .unwrap_err();
        assert_eq!(err, PartitioningError::ZeroIterations);
    }

    #[test]
    fn single_turn_budget() {
        let (net, part) = path_instance();
        let soc = [0.0; 4];
        let (_, trace) = repartition(
            &ctx(&net, &soc, 1),
            &part,
            &RepartitionOptions {
                alpha: 1e4,
                max_iterations: 1,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert_eq!(trace.steps[0].proposer, 1);
    }

    #[test]
    fn rejected_moves_leave_partition_unchanged() {
        // Both halves self-sufficient; any move only adds boundary cost.
        let buses = vec![
            bus(0, 350.0, 10.0, 0.0),
            bus(1, 0.0, 10.0, 0.0),
            bus(2, 0.0, 10.0, 0.0),
            bus(3, 350.0, 10.0, 0.0),
        ];
        let net = NetworkModel::new(buses, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let part = Partition::from_members(&net, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let soc = [0.0; 4];
        let (out, trace) = repartition(
            &ctx(&net, &soc, 1),
            &part,
            &RepartitionOptions {
                alpha: 1e4,
                max_iterations: 50,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!(out, part);
        assert_eq!(trace.accepted, 0);
        assert_eq!(trace.steps.len(), 2);
    }
}
