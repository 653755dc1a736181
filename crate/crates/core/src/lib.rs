//! Economic dispatch for a distribution network split into cooperating
//! microgrids.
//!
//! Every step of the receding-horizon loop:
//!
//! 1. checks whether each microgrid can cover its worst-case load with its
//!    own generation over the horizon ([`partitioning::check_trigger`]);
//! 2. if one cannot, moves boundary buses between microgrids while that
//!    lowers a combined imbalance and dispatch cost ([`partitioning::repartition`]);
//! 3. lets microgrids that are still short merge into coalitions
//!    ([`coalition::form_coalitions`]);
//! 4. dispatches every coalition, single microgrids with one QP and larger
//!    coalitions by price coordination over their shared lines
//!    ([`dispatch::solve_coalition_distributed`]);
//! 5. applies the first control and advances storage states.
//!
//! [`simulator::run`] drives the loop and [`simulator::SimulationLog`]
//! writes the results. The QP solver in [`qp`] is self-contained.
//!
//! ```
//! use microdispatch::model::{Bus, NetworkModel, Partition, Profile};
//! use microdispatch::simulator::{run, SimulationConfig};
//!
//! // Two buses, one generator each, split into two microgrids.
//! let mut buses: Vec<Bus> = (0..2).map(|i| Bus::load_only(i, Profile::constant(20.0, 4))).collect();
//! buses[0].gen_capacity = 50.0;
//! buses[1].gen_capacity = 50.0;
//! let net = NetworkModel::new(buses, vec![(0, 1)]).unwrap();
//! let part = Partition::from_members(&net, vec![vec![0], vec![1]]).unwrap();
//! let config = SimulationConfig { steps: 2, horizon: 2, ..SimulationConfig::default() };
//! let log = run(&net, &part, &config).unwrap();
//! assert!(log.steps.iter().all(|s| s.all_singletons()));
//! ```

pub mod cli;
pub mod coalition;
pub mod dispatch;
pub mod generate;
pub mod model;
pub mod partitioning;
pub mod qp;
pub mod scenario;
pub mod simulator;

pub use coalition::{form_coalitions, CoalitionOutcome};
pub use dispatch::{solve_coalition_distributed, solve_qp, DispatchContext, DispatchError, DispatchProblem};
pub use model::{validate_partition, Bus, CoalitionStructure, NetworkModel, Partition, Profile};
pub use partitioning::{check_trigger, repartition, RepartitionOptions};
pub use scenario::{load_scenario, Scenario, ScenarioError};
pub use simulator::{run, SimError, SimulationConfig, SimulationLog};
