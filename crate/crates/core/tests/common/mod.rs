//! Reference implementations for tests. Nothing here calls the crate's
//! solvers; problems are taken in their plain data form.

#![allow(dead_code)]

use microdispatch::dispatch::{DispatchContext, DispatchProblem, DispatchSettings};
use microdispatch::model::{Bus, BusId, CostWeights, NetworkModel, Profile, StorageParams};
use microdispatch::qp::QpProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
}

/// Brute-force QP solver: a dense grid search seeds cyclic exact
/// coordinate descent on an augmented Lagrangian. Slow, simple, and
/// independent of the interior-point code.
pub fn oracle_qp(p: &QpProblem) -> OracleSolution {
    let n0 = p.num_vars();
    let mut w = p.weights.clone();
    let mut c = p.linear.clone();
    let mut lo = p.lower.clone();
    let mut hi = p.upper.clone();
    // Equality rows `a·x = b`; ranged rows get a slack.
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for row in &p.rows {
        if row.lower == row.upper {
            rows.push((row.terms.clone(), row.lower));
        } else if row.lower.is_finite() || row.upper.is_finite() {
            let s = w.len();
            w.push(0.0);
            c.push(0.0);
            lo.push(row.lower);
            hi.push(row.upper);
            let mut terms = row.terms.clone();
            terms.push((s, -1.0));
            rows.push((terms, 0.0));
        }
    }
    let n = w.len();
    let scale = 1.0
        + lo.iter()
            .chain(&hi)
            .chain(rows.iter().map(|(_, b)| b))
            .filter(|v| v.is_finite())
            .fold(0.0f64, |a, v| a.max(v.abs()));
    let big = 100.0 * scale;
    for j in 0..n {
        lo[j] = lo[j].max(-big);
        hi[j] = hi[j].min(big);
    }
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, (terms, _)) in rows.iter().enumerate() {
        for &(j, a) in terms {
            columns[j].push((r, a));
        }
    }
    let residuals = |x: &[f64]| -> Vec<f64> {
        rows.iter()
            .map(|(terms, b)| terms.iter().map(|&(j, a)| a * x[j]).sum::<f64>() - b)
            .collect()
    };
    let f = |x: &[f64]| -> f64 { (0..n).map(|j| w[j] * x[j] * x[j] + c[j] * x[j]).sum() };
    let wmax = w.iter().fold(1.0f64, |a, &v| a.max(v));

    // Grid seed over the free coordinates, penalizing row violations.
    let free: Vec<usize> = (0..n).filter(|&j| hi[j] > lo[j]).collect();
    let mut x: Vec<f64> = (0..n).map(|j| 0.0f64.clamp(lo[j], hi[j])).collect();
    let d = free.len();
    if d > 0 && d <= 16 {
        let per_dim = ((2e5f64).powf(1.0 / d as f64).floor() as usize).clamp(2, 41);
        let total = per_dim.pow(d as u32);
        let mut best = f64::INFINITY;
        let mut cand = x.clone();
        for idx in 0..total {
            let mut rest = idx;
            for &j in &free {
                let g = rest % per_dim;
                rest /= per_dim;
                cand[j] = lo[j] + (hi[j] - lo[j]) * g as f64 / (per_dim - 1) as f64;
            }
            let r = residuals(&cand);
            let merit = f(&cand) + 10.0 * wmax * r.iter().map(|v| v * v).sum::<f64>();
            if merit < best {
                best = merit;
                x.copy_from_slice(&cand);
            }
        }
    }

    let mut lambda = vec![0.0; rows.len()];
    let mut rho = 10.0 * wmax;
    let mut r = residuals(&x);
    let mut last_norm = f64::INFINITY;
    for _outer in 0..400 {
        for _sweep in 0..50_000 {
            let mut change = 0.0f64;
            for j in 0..n {
                if hi[j] == lo[j] {
                    continue;
                }
                let mut coef = 2.0 * w[j];
                let mut cons = c[j];
                for &(row, a) in &columns[j] {
                    coef += rho * a * a;
                    cons += a * (lambda[row] + rho * (r[row] - a * x[j]));
                }
                let t = if coef > 0.0 {
                    (-cons / coef).clamp(lo[j], hi[j])
                } else if cons > 0.0 {
                    lo[j]
                } else {
                    hi[j]
                };
                let dt = t - x[j];
                if dt != 0.0 {
                    for &(row, a) in &columns[j] {
                        r[row] += a * dt;
                    }
                    x[j] = t;
                    change = change.max(dt.abs());
                }
            }
            if change <= 1e-13 * scale {
                break;
            }
        }
        r = residuals(&x);
        let norm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if norm <= 1e-10 * scale {
            break;
        }
        for (l, v) in lambda.iter_mut().zip(&r) {
            *l += rho * v;
        }
        if norm > 0.25 * last_norm {
            rho = (rho * 4.0).min(1e12 * wmax);
        }
        last_norm = norm;
    }
    let xs = x[..n0].to_vec();
    OracleSolution {
        objective: p.objective(&xs),
        residual: p.max_residual(&xs),
        x: xs,
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

/// `Σ_ℓ max(0, Σ_i (d̂ + w̄ − ū^g))` computed directly from the buses.
pub fn direct_imbalance_cost(net: &NetworkModel, nodes: &[BusId], k: usize, h: usize) -> f64 {
    (k..k + h)
        .map(|l| {
            let s: f64 = nodes
                .iter()
                .map(|&i| {
                    let b = net.bus(i);
                    b.load_forecast.0[l] + b.uncertainty_bound - b.gen_capacity
                })
                .sum();
            s.max(0.0)
        })
        .sum()
}

/// A tiny dispatch instance: network, storage states and the problem.
pub struct TinyInstance {
    pub label: String,
    pub net: NetworkModel,
    pub soc: Vec<f64>,
    pub horizon: usize,
    pub problem: DispatchProblem,
}

/// At most three buses and two steps, random devices and costs. Whole
/// networks are made feasible through the main grid; single-bus
/// efficiency problems are always feasible through their boundary.
pub fn tiny_instances(count: usize, seed: u64) -> Vec<TinyInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|t| {
            let nb = rng.random_range(1..=3usize);
            let h = rng.random_range(1..=2usize);
            let mut buses: Vec<Bus> = (0..nb)
                .map(|i| {
                    let load = (0..h).map(|_| rng.random_range(0.0..40.0)).collect();
                    let mut b = Bus::load_only(i, Profile(load));
                    b.uncertainty_bound = rng.random_range(0.0..3.0);
                    if rng.random_bool(0.6) {
                        b.gen_capacity = rng.random_range(10.0..60.0);
                    }
                    b.main_grid = rng.random_bool(0.3);
                    if rng.random_bool(0.35) {
                        b.storage = Some(StorageParams {
                            capacity: 100.0,
                            soc_init: rng.random_range(0.3..1.0),
                            charge_max: rng.random_range(5.0..20.0),
                            discharge_max: rng.random_range(5.0..20.0),
                            ..StorageParams::default()
                        });
                    }
                    b.costs = CostWeights {
                        storage: rng.random_range(0.5..2.0),
                        gen: rng.random_range(1.0..20.0),
                        import: rng.random_range(1.0..20.0),
                        transfer: rng.random_range(0.5..2.0),
                        extra_transfer: 100.0,
                    };
                    b
                })
                .collect();
            // Guarantee a feasible whole-network problem.
            buses[0].main_grid = true;
            let mut edges: Vec<(BusId, BusId)> = (1..nb).map(|i| (i - 1, i)).collect();
            if nb == 3 && rng.random_bool(0.5) {
                edges.push((0, 2));
            }
            let soc: Vec<f64> = buses
                .iter()
                .map(|b| b.storage.as_ref().map_or(0.0, |s| s.soc_init))
                .collect();
            let net = NetworkModel::new(buses, edges).expect("tiny network is connected");
            let ctx = DispatchContext {
                net: &net,
                start: 0,
                horizon: h,
                soc: &soc,
                settings: DispatchSettings::default(),
            };
            let efficiency = nb > 1 && rng.random_bool(0.4);
            let (label, problem) = if efficiency {
                (format!("#{t} efficiency of bus 1 in {nb} buses, h={h}"), ctx.build_efficiency(&[1]))
            } else {
                (format!("#{t} whole network of {nb} buses, h={h}"), ctx.build_centralized())
            };
            TinyInstance {
                label,
                net,
                soc,
                horizon: h,
                problem,
            }
        })
        .collect()
}

/// Plays coalition formation with the given per-microgrid imbalance series
/// and microgrid adjacency, letting coalitions initiate in the order of
/// `priority` (a permutation of microgrid ids). Returns the final
/// coalitions as sorted member lists, sorted.
pub fn play_coalitions(
    imbalance: &[Vec<f64>],
    adjacent: &dyn Fn(usize, usize) -> bool,
    priority: &[usize],
) -> Vec<Vec<usize>> {
    let m = imbalance.len();
    let mut groups: Vec<Vec<usize>> = (0..m).map(|p| vec![p]).collect();
    let series = |g: &[usize]| -> Vec<f64> {
        (0..imbalance[0].len())
            .map(|l| g.iter().map(|&p| imbalance[p][l]).sum())
            .collect()
    };
    let deficient = |g: &[usize]| series(g).iter().any(|&v| v > 0.0);
    for _ in 0..m.saturating_sub(1) {
        if groups.iter().all(|g| !deficient(g)) {
            break;
        }
        let mut busy = vec![false; groups.len()];
        let mut pairs = Vec::new();
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.sort_by_key(|&g| groups[g].iter().map(|p| priority.iter().position(|q| q == p).unwrap()).min());
        for g in order {
            if busy[g] || !deficient(&groups[g]) {
                continue;
            }
            let neighbors: Vec<usize> = (0..groups.len())
                .filter(|&o| o != g && groups[g].iter().any(|&a| groups[o].iter().any(|&b| adjacent(a, b))))
                .collect();
            if neighbors.is_empty() {
                continue;
            }
            busy[g] = true;
            let own = series(&groups[g]);
            let best = neighbors
                .iter()
                .filter(|&&o| !busy[o])
                .map(|&o| {
                    let other = series(&groups[o]);
                    let cost: f64 = own.iter().zip(&other).map(|(a, b)| (a + b).max(0.0)).sum();
                    (cost, *groups[o].iter().min().unwrap(), o)
                })
                .min_by(|a, b| a.partial_cmp(b).unwrap());
            for &o in &neighbors {
                busy[o] = true;
            }
            if let Some((_, _, o)) = best {
                pairs.push((g, o));
            }
        }
        if pairs.is_empty() {
            break;
        }
        let mut merged: Vec<Option<Vec<usize>>> = groups.into_iter().map(Some).collect();
        for (g, o) in pairs {
            let mut a = merged[g].take().unwrap();
            a.extend(merged[o].take().unwrap());
            merged[g] = Some(a);
        }
        groups = merged.into_iter().flatten().collect();
    }
    let mut out: Vec<Vec<usize>> = groups
        .into_iter()
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    out.sort();
    out
}

/// All permutations of `0..m`.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

/// Random scenarios with `n ≤ 30` paired with the first step at which some
/// microgrid runs short. Scenarios that never run short are skipped.
pub fn deficit_corpus(count: usize) -> Vec<(microdispatch::scenario::Scenario, usize)> {
    use microdispatch::generate::{random_scenario, GenerateOptions, ProfileShape};
    use microdispatch::partitioning::check_trigger;
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
        let n = rng.random_range(6..=30usize);
        let m = rng.random_range(2..=(n / 3).clamp(2, 5));
        let mut options = GenerateOptions::new(n, m, seed);
        options.shape = if seed % 3 == 2 { ProfileShape::Midday } else { ProfileShape::Evening };
        seed += 1;
        let s = random_scenario(&options).expect("valid sizes");
        let h = s.config.horizon;
        let first = (0..s.config.steps)
            .find(|&k| check_trigger(&s.net, &s.partition, k, h).unwrap().triggered);
        if let Some(k) = first {
            out.push((s, k));
        }
    }
    out
}
