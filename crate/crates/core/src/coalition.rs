//! Coalition formation among microgrids.
//!
//! Coalitions start as single microgrids. In every iteration each coalition
//! that is not self-sufficient asks its neighboring microgrids for the
//! imbalance that would remain after merging, and merges with the best
//! answer. A coalition takes part in at most one exchange per iteration.

use serde::Serialize;

use crate::dispatch::MessageTally;
use crate::model::{BusId, CoalitionStructure, MicrogridId, NetworkModel, Partition};
use crate::partitioning::{imbalance_report, ImbalanceReport, PartitioningError};

/// Imbalance left if two disjoint coalitions with the given per-step
/// imbalances merge.
pub fn coalition_merge_cost(imbalance_p: &[f64], imbalance_q: &[f64]) -> f64 {
    imbalance_p
        .iter()
        .zip(imbalance_q)
        .map(|(a, b)| (a + b).max(0.0))
        .sum()
}

/// Merge cost of two bus sets over `k..k+h`.
pub fn coalition_merge_cost_of(
    net: &NetworkModel,
    c_p: &[BusId],
    c_q: &[BusId],
    k: usize,
    h: usize,
) -> Result<f64, PartitioningError> {
    let a = imbalance_report(net, c_p, k, h)?;
    let b = imbalance_report(net, c_q, k, h)?;
    Ok(coalition_merge_cost(&a.imbalance, &b.imbalance))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeEvent {
    pub iteration: usize,
    /// Microgrid that initiated, the coalition's id.
    pub initiator: MicrogridId,
    /// `(microgrid, merge cost)` per contacted neighbor; unavailable
    /// neighbors answer `None`.
    pub candidates: Vec<(MicrogridId, Option<f64>)>,
    pub chosen: MicrogridId,
    /// Members of the merged coalition.
    pub merged: Vec<MicrogridId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoalitionOutcome {
    pub structure: CoalitionStructure,
    pub events: Vec<MergeEvent>,
    pub messages: MessageTally,
    /// Iterations in which at least one coalition initiated.
    pub iterations: usize,
}

/// Forms coalitions for step `k` with horizon `h`, starting from single
/// microgrids and running at most `m − 1` iterations.
pub fn form_coalitions(
    net: &NetworkModel,
    part: &Partition,
    k: usize,
    h: usize,
) -> Result<CoalitionOutcome, PartitioningError> {
    let m = part.len();
    let mut cs = CoalitionStructure::singletons(part);
    let mut events = Vec::new();
    let mut messages = MessageTally::default();
    let mut iterations = 0;

    for r in 0..m.saturating_sub(1) {
        let reports: Vec<(MicrogridId, ImbalanceReport)> = (0..m)
            .filter(|&p| cs.coalition_id(p) == p)
            .map(|p| Ok((p, imbalance_report(net, cs.nodes(p), k, h)?)))
            .collect::<Result<_, PartitioningError>>()?;
        if reports.iter().all(|(_, rep)| rep.self_sufficient) {
            break;
        }
        let imbalance_of = |c: MicrogridId| -> &[f64] {
            &reports.iter().find(|(id, _)| *id == c).expect("coalition id").1.imbalance
        };

        // Coalitions are addressed by id; a busy coalition has already
        // initiated, answered or merged in this iteration.
        let mut busy = vec![false; m];
        let mut merges: Vec<(MicrogridId, MicrogridId)> = Vec::new();
        let mut initiated = false;
        for (p, report) in &reports {
            let p = *p;
            if report.self_sufficient || busy[p] {
                continue;
            }
            let in_coalition = net.mask(cs.nodes(p));
            let mut neighbors: Vec<MicrogridId> = cs
                .nodes(p)
                .iter()
                .flat_map(|&i| net.neighbors(i).iter().copied())
                .filter(|&j| !in_coalition[j])
                .map(|j| part.microgrid_of(j))
                .collect();
            neighbors.sort_unstable();
            neighbors.dedup();
            if neighbors.is_empty() {
                continue;
            }
            initiated = true;
            busy[p] = true;
            messages.add(neighbors.len() as u64, h as u64);
            messages.add(neighbors.len() as u64, 1);

            let candidates: Vec<(MicrogridId, Option<f64>)> = neighbors
                .iter()
                .map(|&q| {
                    let cq = cs.coalition_id(q);
                    if busy[cq] {
                        (q, None)
                    } else {
                        (q, Some(coalition_merge_cost(&report.imbalance, imbalance_of(cq))))
                    }
                })
                .collect();
            // Answering occupies the neighbor's coalition for this iteration.
            for &q in &neighbors {
                busy[cs.coalition_id(q)] = true;
            }
            let best = candidates
                .iter()
                .filter_map(|&(q, c)| c.map(|c| (c, cs.coalition_id(q), q)))
                .min_by(|a, b| a.partial_cmp(b).expect("finite merge costs"));
            let Some((_, cq, q)) = best else {
                continue;
            };
            merges.push((p, cq));
            let mut merged: Vec<MicrogridId> =
                cs.members(p).iter().chain(cs.members(cq)).copied().collect();
            merged.sort_unstable();
            events.push(MergeEvent {
                iteration: r,
                initiator: p,
                candidates,
                chosen: q,
                merged,
            });
        }
        if !initiated {
            break;
        }
        iterations += 1;
        for (p, q) in merges {
            cs.merge(p, q);
        }
        debug_assert!(cs.check(net, part).is_ok());
    }

    Ok(CoalitionOutcome {
        structure: cs,
        events,
        messages,
        iterations,
    })
}

/// Whether every coalition is self-sufficient or all microgrids share one.
pub fn outcome_is_terminal(
    net: &NetworkModel,
    cs: &CoalitionStructure,
    k: usize,
    h: usize,
) -> Result<bool, PartitioningError> {
    if cs.is_grand() {
        return Ok(true);
    }
    for members in cs.coalitions() {
        if !imbalance_report(net, cs.nodes(members[0]), k, h)?.self_sufficient {
            return Ok(false);
        }
    }
    Ok(true)
}
