//! Closed-loop receding-horizon simulation.
//!
//! Each step runs, in order: the self-sufficiency trigger on the previous
//! partition, repartitioning if triggered, coalition formation, dispatch of
//! every coalition, application of the first planned controls, and the draw
//! of realized disturbances.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coalition::{form_coalitions, MergeEvent};
use crate::dispatch::{
    solve_coalition_distributed, solve_qp, stitch, suboptimality_bound, suboptimality_exact,
    BusControl, DispatchContext, DispatchError, DispatchProblem, DispatchSettings,
    DispatchSolution, DualAscentOptions, MessageTally,
};
use crate::model::{realized_disturbance, BusId, CoalitionStructure, MicrogridId, NetworkModel, Partition};
use crate::partitioning::{check_trigger, repartition, PartitioningError, RepartitionOptions, RepartitionTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub steps: usize,
    pub horizon: usize,
    pub alpha: f64,
    pub seed: u64,
    pub max_repartition_iters: usize,
    /// Also solve the centralized and lower-bound problems every step.
    pub benchmark: bool,
    pub sampling_hours: f64,
    /// Optional bound on every transfer variable (kW).
    pub transfer_limit: Option<f64>,
    pub dual_tolerance: f64,
    pub dual_max_iters: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            steps: 96,
            horizon: 8,
            alpha: 1e4,
            seed: 0,
            max_repartition_iters: 50,
            benchmark: false,
            sampling_hours: 0.25,
            transfer_limit: None,
            dual_tolerance: 1e-7,
            dual_max_iters: 20_000,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.steps == 0 {
            return Err("steps must be at least 1".into());
        }
        if self.horizon == 0 {
            return Err("horizon must be at least 1".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err("alpha must be finite and non-negative".into());
        }
        if self.max_repartition_iters == 0 {
            return Err("max_repartition_iters must be at least 1".into());
        }
        if !(self.sampling_hours > 0.0 && self.sampling_hours.is_finite()) {
            return Err("sampling_hours must be positive".into());
        }
        if let Some(l) = self.transfer_limit {
            if l.is_nan() || l < 0.0 {
                return Err("transfer_limit must be non-negative".into());
            }
        }
        if self.dual_tolerance.is_nan() || self.dual_tolerance <= 0.0 || self.dual_max_iters == 0 {
            return Err("dual ascent needs a positive tolerance and iteration budget".into());
        }
        Ok(())
    }

    pub fn dispatch_settings(&self) -> DispatchSettings {
        DispatchSettings {
            sampling_hours: self.sampling_hours,
            transfer_limit: self.transfer_limit,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("step {k}: {source}")]
    Partitioning {
        k: usize,
        #[source]
        source: PartitioningError,
    },
    #[error("step {k}: dispatch of coalition {coalition:?} failed: {source}")]
    Dispatch {
        k: usize,
        coalition: Vec<MicrogridId>,
        #[source]
        source: DispatchError,
    },
    #[error("step {k}: benchmark failed: {source}")]
    Benchmark {
        k: usize,
        #[source]
        source: DispatchError,
    },
}

impl SimError {
    /// Whether the failure stems from an infeasible dispatch problem.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            SimError::Dispatch {
                source: DispatchError::Infeasible { .. },
                ..
            } | SimError::Benchmark {
                source: DispatchError::Infeasible { .. },
                ..
            }
        )
    }
}

/// State carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub partition: Partition,
    /// State of charge per bus; zero for buses without storage.
    pub soc: Vec<f64>,
}

impl SimState {
    pub fn initial(net: &NetworkModel, partition: Partition) -> Self {
        let soc = net
            .buses()
            .iter()
            .map(|b| b.storage.as_ref().map_or(0.0, |s| s.soc_init))
            .collect();
        SimState { partition, soc }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseMessages {
    pub repartition: MessageTally,
    pub coalition: MessageTally,
    pub dual_ascent: MessageTally,
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTiming {
    pub trigger: f64,
    pub repartition: f64,
    pub coalition: f64,
    pub dispatch: f64,
    pub benchmark: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub k: usize,
    pub triggered: bool,
    pub deficient: Vec<MicrogridId>,
    pub repartition: Option<RepartitionTrace>,
    /// Set when repartitioning failed and the previous partition was kept.
    pub repartition_error: Option<String>,
    pub partition_changed: bool,
    pub partition: Vec<Vec<BusId>>,
    /// Coalition id per microgrid.
    pub coalition_of: Vec<MicrogridId>,
    pub coalitions: Vec<Vec<MicrogridId>>,
    pub merge_events: Vec<MergeEvent>,
    pub coalition_iterations: usize,
    /// Dual-ascent iterations per multi-microgrid coalition, by coalition id.
    pub dual_iterations: Vec<(MicrogridId, usize)>,
    pub j_star: f64,
    pub j_opt: Option<f64>,
    pub j_lower: Option<f64>,
    /// `J* − J^b`, when benchmarked.
    pub bound: Option<f64>,
    /// `J* − J°`, when benchmarked.
    pub gap: Option<f64>,
    /// Largest violation of any centralized constraint by the combined plan.
    pub feasibility_residual: f64,
    pub controls: Vec<BusControl>,
    pub disturbances: Vec<f64>,
    /// Planned minus realized net load, summed over buses.
    pub reserve_slack: f64,
    pub soc: Vec<f64>,
    pub messages: PhaseMessages,
    #[serde(skip)]
    pub timing: PhaseTiming,
}

impl StepRecord {
    pub fn grand_coalition(&self) -> bool {
        self.coalitions.len() == 1
    }

    pub fn all_singletons(&self) -> bool {
        self.coalitions.iter().all(|c| c.len() == 1)
    }
}

/// Partition and coalitions decided at one step, before dispatch.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    pub partition: Partition,
    pub coalitions: CoalitionStructure,
}

/// Everything from trigger to coalition formation; shared by [`step`] and
/// problem dumps.
struct Planning {
    triggered: bool,
    deficient: Vec<MicrogridId>,
    trace: Option<RepartitionTrace>,
    repartition_error: Option<String>,
    partition: Partition,
    coalitions: CoalitionStructure,
    merge_events: Vec<MergeEvent>,
    coalition_iterations: usize,
    messages: PhaseMessages,
    timing: PhaseTiming,
}

fn plan(
    net: &NetworkModel,
    state: &SimState,
    config: &SimulationConfig,
    k: usize,
) -> Result<Planning, SimError> {
    let h = config.horizon;
    let part_err = |source| SimError::Partitioning { k, source };
    let mut timing = PhaseTiming::default();
    let mut messages = PhaseMessages::default();

    let t0 = Instant::now();
    let trigger = check_trigger(net, &state.partition, k, h).map_err(part_err)?;
    timing.trigger = t0.elapsed().as_secs_f64();

    let mut partition = state.partition.clone();
    let mut trace = None;
    let mut repartition_error = None;
    if trigger.triggered {
        let t0 = Instant::now();
        let ctx = DispatchContext {
            net,
            start: k,
            horizon: h,
            soc: &state.soc,
            settings: config.dispatch_settings(),
        };
        let options = RepartitionOptions {
            alpha: config.alpha,
            max_iterations: config.max_repartition_iters,
            seed: config.seed,
        };
        match repartition(&ctx, &partition, &options) {
            Ok((next, t)) => {
                messages.repartition = t.messages;
                partition = next;
                trace = Some(t);
            }
            Err(PartitioningError::Dispatch(e)) => {
                warn!("step {k}: repartitioning aborted, keeping partition: {e}");
                repartition_error = Some(e.to_string());
            }
            Err(e) => return Err(part_err(e)),
        }
        timing.repartition = t0.elapsed().as_secs_f64();
    }

    let t0 = Instant::now();
    let outcome = form_coalitions(net, &partition, k, h).map_err(part_err)?;
    messages.coalition = outcome.messages;
    timing.coalition = t0.elapsed().as_secs_f64();

    Ok(Planning {
        triggered: trigger.triggered,
        deficient: trigger.deficient,
        trace,
        repartition_error,
        partition,
        coalitions: outcome.structure,
        merge_events: outcome.events,
        coalition_iterations: outcome.iterations,
        messages,
        timing,
    })
}

/// Runs trigger, repartitioning and coalition formation for step `k`
/// without dispatching.
pub fn plan_step(
    net: &NetworkModel,
    state: &SimState,
    config: &SimulationConfig,
    k: usize,
) -> Result<StepPlan, SimError> {
    let p = plan(net, state, config, k)?;
    Ok(StepPlan {
        partition: p.partition,
        coalitions: p.coalitions,
    })
}

/// Executes one closed-loop step and returns the next state with its record.
pub fn step(
    net: &NetworkModel,
    state: &SimState,
    config: &SimulationConfig,
    k: usize,
) -> Result<(SimState, StepRecord), SimError> {
    let h = config.horizon;
    let planning = plan(net, state, config, k)?;
    let mut timing = planning.timing;
    let mut messages = planning.messages;
    let cs = &planning.coalitions;
    let part = &planning.partition;
    let ctx = DispatchContext {
        net,
        start: k,
        horizon: h,
        soc: &state.soc,
        settings: config.dispatch_settings(),
    };

    let t0 = Instant::now();
    let dual = DualAscentOptions {
        tolerance: config.dual_tolerance,
        max_iterations: config.dual_max_iters,
        accelerated: true,
    };
    let mut pieces: Vec<(DispatchProblem, DispatchSolution)> = Vec::new();
    let mut dual_iterations = Vec::new();
    for members in cs.coalitions() {
        let fail = |source| SimError::Dispatch {
            k,
            coalition: members.to_vec(),
            source,
        };
        if members.len() == 1 {
            let problem = ctx.build_coalition(cs.nodes(members[0]));
            let sol = solve_qp(&problem).map_err(fail)?;
            pieces.push((problem, sol));
        } else {
            let out = solve_coalition_distributed(&ctx, part, members, &dual).map_err(fail)?;
            debug!(
                "step {k}: coalition {members:?} converged in {} dual iterations",
                out.iterations
            );
            messages.dual_ascent += out.messages;
            dual_iterations.push((members[0], out.iterations));
            pieces.push((out.problem, out.solution));
        }
    }
    let j_star: f64 = pieces.iter().map(|(_, s)| s.objective).sum();
    let refs: Vec<(&DispatchProblem, &DispatchSolution)> = pieces.iter().map(|(p, s)| (p, s)).collect();
    let stitched = stitch(&ctx, &refs);
    timing.dispatch = t0.elapsed().as_secs_f64();

    let (mut j_opt, mut j_lower) = (None, None);
    if config.benchmark {
        let t0 = Instant::now();
        let bench = |source| SimError::Benchmark { k, source };
        j_opt = Some(solve_qp(&ctx.build_centralized()).map_err(bench)?.objective);
        let mut lower = 0.0;
        for p in ctx.build_lower_bound(cs) {
            lower += solve_qp(&p).map_err(bench)?.objective;
        }
        j_lower = Some(lower);
        timing.benchmark = t0.elapsed().as_secs_f64();
    }

    let controls = stitched.problem.first_controls(&stitched.values);
    let mut soc = state.soc.clone();
    for c in &controls {
        if let Some(s) = &net.bus(c.bus).storage {
            let next = s.efficiency * soc[c.bus] - config.sampling_hours / s.capacity * c.storage;
            soc[c.bus] = next.clamp(s.soc_min, s.soc_max);
        }
    }
    let disturbances: Vec<f64> = net
        .buses()
        .iter()
        .map(|b| realized_disturbance(b, k, config.seed))
        .collect();
    let reserve_slack = net
        .buses()
        .iter()
        .zip(&disturbances)
        .map(|(b, w)| b.uncertainty_bound - w)
        .sum();

    let coalitions: Vec<Vec<MicrogridId>> = cs.coalitions().iter().map(|c| c.to_vec()).collect();
    let record = StepRecord {
        k,
        triggered: planning.triggered,
        deficient: planning.deficient,
        repartition: planning.trace,
        repartition_error: planning.repartition_error,
        partition_changed: *part != state.partition,
        partition: part.all_members().to_vec(),
        coalition_of: (0..part.len()).map(|p| cs.coalition_id(p)).collect(),
        coalitions,
        merge_events: planning.merge_events,
        coalition_iterations: planning.coalition_iterations,
        dual_iterations,
        j_star,
        j_opt,
        j_lower,
        bound: j_lower.map(|b| suboptimality_bound(j_star, b)),
        gap: j_opt.map(|o| suboptimality_exact(j_star, o)),
        feasibility_residual: stitched.max_residual,
        controls,
        disturbances,
        reserve_slack,
        soc: soc.clone(),
        messages,
        timing,
    };
    let next = SimState {
        partition: planning.partition,
        soc,
    };
    Ok((next, record))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationLog {
    pub config: SimulationConfig,
    pub initial_partition: Vec<Vec<BusId>>,
    pub initial_soc: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

/// Simulates `config.steps` steps from the initial partition and states of charge.
pub fn run(net: &NetworkModel, part0: &Partition, config: &SimulationConfig) -> Result<SimulationLog, SimError> {
    config.validate().map_err(SimError::Config)?;
    let mut state = SimState::initial(net, part0.clone());
    let mut log = SimulationLog {
        config: config.clone(),
        initial_partition: part0.all_members().to_vec(),
        initial_soc: state.soc.clone(),
        steps: Vec::with_capacity(config.steps),
    };
    for k in 0..config.steps {
        let (next, record) = step(net, &state, config, k)?;
        info!(
            "step {k}: triggered={} coalitions={} J*={:.6e}",
            record.triggered,
            record.coalitions.len(),
            record.j_star
        );
        state = next;
        log.steps.push(record);
    }
    Ok(log)
}

fn sci(v: f64) -> String {
    format!("{v:.8e}")
}

fn opt_sci(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

impl SimulationLog {
    /// `k,j_star,j_opt,j_lower,bound`; benchmark columns are empty when not computed.
    pub fn costs_csv(&self) -> String {
        let mut out = String::from("k,j_star,j_opt,j_lower,bound\n");
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.k,
                sci(s.j_star),
                opt_sci(s.j_opt),
                opt_sci(s.j_lower),
                opt_sci(s.bound)
            );
        }
        out
    }

    /// `k,microgrid,coalition_id`, one row per microgrid and step.
    pub fn coalitions_csv(&self) -> String {
        let mut out = String::from("k,microgrid,coalition_id\n");
        for s in &self.steps {
            for (p, c) in s.coalition_of.iter().enumerate() {
                let _ = writeln!(out, "{},{p},{c}", s.k);
            }
        }
        out
    }

    /// `bus,microgrid` for a partition snapshot.
    pub fn partition_csv(partition: &[Vec<BusId>]) -> String {
        let mut rows: Vec<(BusId, usize)> = partition
            .iter()
            .enumerate()
            .flat_map(|(p, set)| set.iter().map(move |&b| (b, p)))
            .collect();
        rows.sort_unstable();
        let mut out = String::from("bus,microgrid\n");
        for (b, p) in rows {
            let _ = writeln!(out, "{b},{p}");
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("k,trigger_s,repartition_s,coalition_s,dispatch_s,benchmark_s\n");
        for s in &self.steps {
            let t = &s.timing;
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                s.k, t.trigger, t.repartition, t.coalition, t.dispatch, t.benchmark
            );
        }
        out
    }

    /// Writes `log.json`, `costs.csv`, `coalitions.csv`, `timing.csv` and a
    /// `partition_{k}.csv` for step 0 and every step whose partition changed.
    pub fn write_results(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        fs::write(dir.join("log.json"), json + "\n")?;
        fs::write(dir.join("costs.csv"), self.costs_csv())?;
        fs::write(dir.join("coalitions.csv"), self.coalitions_csv())?;
        fs::write(dir.join("timing.csv"), self.timing_csv())?;
        for s in &self.steps {
            if s.k == 0 || s.partition_changed {
                fs::write(
                    dir.join(format!("partition_{}.csv", s.k)),
                    Self::partition_csv(&s.partition),
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bus, Profile, StorageParams};

    fn two_microgrids(peak: f64) -> (NetworkModel, Partition) {
        // 0 - 1 | 2 - 3; microgrid 0 has a generator and storage, microgrid
        // 1 has a generator and the main-grid connection. Bus 1's load peaks
        // at steps 2 and 3.
        let mut buses: Vec<Bus> = (0..4)
            .map(|i| Bus::load_only(i, Profile::constant(20.0, 12)))
            .collect();
        buses[0].gen_capacity = 60.0;
        buses[0].storage = Some(StorageParams::default());
        buses[3].gen_capacity = 200.0;
        buses[3].main_grid = true;
        let mut series = vec![20.0; 12];
        series[2] = peak;
        series[3] = peak;
        buses[1].load_forecast = Profile(series);
        for b in &mut buses {
            b.uncertainty_bound = 1.0;
        }
        let net = NetworkModel::new(buses, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let part = Partition::from_members(&net, vec![vec![0, 1], vec![2, 3]]).unwrap();
        (net, part)
    }

    fn config(steps: usize) -> SimulationConfig {
        SimulationConfig {
            steps,
            horizon: 2,
            benchmark: true,
            ..SimulationConfig::default()
        }
    }

    #[test]
    fn self_sufficient_run_sends_no_messages() {
        let (net, part) = two_microgrids(20.0);
        let log = run(&net, &part, &config(4)).unwrap();
        for s in &log.steps {
            assert!(!s.triggered);
            assert!(s.all_singletons());
            assert_eq!(s.messages, PhaseMessages::default());
            assert!(s.feasibility_residual <= 1e-6);
        }
    }

    #[test]
    fn peak_merges_microgrids_and_closes_the_gap() {
        // From step 1 the window covers the peak. Moving bus 1 to the other
        // microgrid still leaves 171 + 42 > 200 kW there, so the two merge.
        let (net, part) = two_microgrids(170.0);
        let log = run(&net, &part, &config(4)).unwrap();
        let merged: Vec<&StepRecord> = log.steps.iter().filter(|s| s.grand_coalition()).collect();
        assert!(!merged.is_empty());
        for s in merged {
            let bound = s.bound.unwrap();
            assert!(bound.abs() <= 1e-6 * (1.0 + s.j_star), "{bound}");
            assert!(s.messages.dual_ascent.messages > 0);
        }
        for s in &log.steps {
            let (o, b) = (s.j_opt.unwrap(), s.j_lower.unwrap());
            let tol = 2e-6 * (1.0 + s.j_star);
            assert!(b <= o + tol && o <= s.j_star + tol);
            assert!(s.feasibility_residual <= 1e-6);
        }
    }

    #[test]
    fn single_step_and_replay() {
        let (net, part) = two_microgrids(150.0);
        let a = run(&net, &part, &config(1)).unwrap();
        assert_eq!(a.steps.len(), 1);
        let b = run(&net, &part, &config(1)).unwrap();
        assert_eq!(a.costs_csv(), b.costs_csv());
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn results_directory_layout() {
        let (net, part) = two_microgrids(20.0);
        let log = run(&net, &part, &config(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        log.write_results(dir.path()).unwrap();
        for f in ["log.json", "costs.csv", "coalitions.csv", "timing.csv", "partition_0.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let costs = fs::read_to_string(dir.path().join("costs.csv")).unwrap();
        assert_eq!(costs.lines().count(), 3);
        assert!(!fs::read_to_string(dir.path().join("log.json")).unwrap().contains("timing"));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (net, part) = two_microgrids(20.0);
        let bad = SimulationConfig {
            steps: 0,
            ..config(1)
        };
        assert!(matches!(run(&net, &part, &bad), Err(SimError::Config(_))));
    }
}
