//! Scenario generators: random networks with day-shaped loads, and the
//! 69-bus radial distribution feeder split into eight microgrids.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Bus, BusId, CostWeights, NetworkModel, Partition, Profile, StorageParams};
use crate::scenario::Scenario;
use crate::simulator::SimulationConfig;

/// Capacity of every generated dispatchable unit (kW).
pub const GEN_UNIT: f64 = 350.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileShape {
    /// Load peaks in the evening.
    Evening,
    /// Load peaks around noon.
    Midday,
    /// No peak.
    Flat,
}

impl std::str::FromStr for ProfileShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "evening" => Ok(ProfileShape::Evening),
            "midday" => Ok(ProfileShape::Midday),
            "flat" => Ok(ProfileShape::Flat),
            other => Err(format!("unknown profile shape '{other}' (evening, midday, flat)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    #[error("need at least one microgrid and at least as many buses as microgrids (got n = {n}, m = {m})")]
    InvalidSizes { n: usize, m: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    pub buses: usize,
    pub microgrids: usize,
    pub seed: u64,
    pub shape: ProfileShape,
    pub config: SimulationConfig,
}

impl GenerateOptions {
    pub fn new(buses: usize, microgrids: usize, seed: u64) -> Self {
        GenerateOptions {
            buses,
            microgrids,
            seed,
            shape: ProfileShape::Evening,
            config: SimulationConfig::default(),
        }
    }
}

/// Load factor in `[0.35, 1]` relative to the peak.
fn shape_factor(shape: ProfileShape, step: usize, steps_per_day: usize) -> f64 {
    let t = step as f64 / steps_per_day as f64;
    let base = 0.45 - 0.1 * (2.0 * PI * t).cos();
    let bump = |center: f64, width: f64| {
        let mut d = (t - center).abs();
        d = d.min(1.0 - d);
        (-(d / width).powi(2)).exp()
    };
    let f = match shape {
        ProfileShape::Evening => base + 0.65 * bump(0.75, 0.07),
        ProfileShape::Midday => base + 0.65 * bump(0.5, 0.08),
        ProfileShape::Flat => base - 0.05,
    };
    f.clamp(0.35, 1.0)
}

/// Random connected network with a connected initial partition and
/// day-shaped loads. Some microgrids run short of generation at the peak.
pub fn random_scenario(options: &GenerateOptions) -> Result<Scenario, GenerateError> {
    let (n, m) = (options.buses, options.microgrids);
    if m == 0 || n < m {
        return Err(GenerateError::InvalidSizes { n, m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    // Random spanning tree plus a few chords.
    let mut edges: BTreeSet<(BusId, BusId)> = BTreeSet::new();
    for i in 1..n {
        let parent = rng.random_range(0..i);
        edges.insert((parent, i));
    }
    for _ in 0..n / 10 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let mut adjacency = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adjacency[a].push(b);
        adjacency[b].push(a);
    }

    // Grow microgrids from distinct seeds, one bus per turn.
    let mut order: Vec<BusId> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut members: Vec<Vec<BusId>> = Vec::with_capacity(m);
    for (p, &seed_bus) in order[..m].iter().enumerate() {
        owner[seed_bus] = Some(p);
        members.push(vec![seed_bus]);
    }
    let mut claimed = m;
    while claimed < n {
        for (p, set) in members.iter_mut().enumerate() {
            let frontier: Vec<BusId> = set
                .iter()
                .flat_map(|&i| adjacency[i].iter().copied())
                .filter(|&j| owner[j].is_none())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if let Some(&j) = frontier.get(rng.random_range(0..frontier.len().max(1))) {
                owner[j] = Some(p);
                set.push(j);
                claimed += 1;
            }
        }
    }

    let len = options.config.steps + options.config.horizon;
    let steps_per_day = (24.0 / options.config.sampling_hours).round().max(1.0) as usize;
    let mut buses: Vec<Bus> = (0..n)
        .map(|i| Bus::load_only(i, Profile::constant(0.0, len)))
        .collect();
    buses[0].main_grid = true;
    for set in &members {
        let units = rng.random_range(1..=2usize);
        for _ in 0..units {
            let at = set[rng.random_range(0..set.len())];
            buses[at].gen_capacity += GEN_UNIT;
        }
        let ratio = if rng.random_bool(0.5) {
            rng.random_range(1.05..1.3)
        } else {
            rng.random_range(0.6..0.9)
        };
        let peak_total = GEN_UNIT * units as f64 * ratio;
        let weights: Vec<f64> = set.iter().map(|_| rng.random_range(0.2..1.0)).collect();
        let wsum: f64 = weights.iter().sum();
        for (&i, w) in set.iter().zip(&weights) {
            let peak = peak_total * w / wsum;
            let values = (0..len)
                .map(|l| {
                    let noise = 1.0 + rng.random_range(-0.02..0.02);
                    peak * shape_factor(options.shape, l, steps_per_day) * noise
                })
                .collect();
            buses[i].load_forecast = Profile(values);
            buses[i].uncertainty_bound = 0.05 * peak;
        }
        if rng.random_bool(1.0 / 3.0) {
            let at = set[rng.random_range(0..set.len())];
            buses[at].storage = Some(StorageParams::default());
        }
    }

    let net = NetworkModel::new(buses, edges.into_iter().collect())
        .expect("generated network is connected");
    let partition = Partition::from_members(&net, members).expect("grown microgrids are valid");
    Ok(Scenario {
        net,
        partition,
        config: options.config.clone(),
    })
}

/// Base loads (kW) of the 69-bus feeder, by one-based bus number.
const PGE69_LOADS: [(usize, f64); 48] = [
    (6, 2.6),
    (7, 40.4),
    (8, 75.0),
    (9, 30.0),
    (10, 28.0),
    (11, 145.0),
    (12, 145.0),
    (13, 8.0),
    (14, 8.0),
    (16, 45.5),
    (17, 60.0),
    (18, 60.0),
    (20, 1.0),
    (21, 114.0),
    (22, 5.0),
    (24, 28.0),
    (26, 14.0),
    (27, 14.0),
    (28, 26.0),
    (29, 26.0),
    (33, 14.0),
    (34, 19.5),
    (35, 6.0),
    (36, 26.0),
    (37, 26.0),
    (39, 24.0),
    (40, 24.0),
    (41, 1.2),
    (43, 6.0),
    (45, 39.22),
    (46, 39.22),
    (48, 79.0),
    (49, 384.7),
    (50, 384.7),
    (51, 40.5),
    (52, 3.6),
    (53, 4.35),
    (54, 26.4),
    (55, 24.0),
    (59, 100.0),
    (61, 1244.0),
    (62, 32.0),
    (64, 227.0),
    (65, 59.0),
    (66, 18.0),
    (67, 18.0),
    (68, 28.0),
    (69, 28.0),
];

/// Laterals `(attach, first, last)`: buses `first..=last` form a chain
/// hanging off `attach`.
const PGE69_LATERALS: [(usize, usize, usize); 7] = [
    (3, 28, 35),
    (3, 36, 46),
    (4, 47, 50),
    (8, 51, 52),
    (9, 53, 65),
    (11, 66, 67),
    (12, 68, 69),
];

const PGE69_MICROGRIDS: [&[(usize, usize)]; 8] = [
    &[(1, 7), (28, 35)],
    &[(36, 46)],
    &[(47, 50)],
    &[(8, 12), (51, 52), (66, 69)],
    &[(13, 27)],
    &[(53, 58)],
    &[(59, 62)],
    &[(63, 65)],
];

const PGE69_GENERATORS: [usize; 11] = [30, 40, 48, 50, 11, 18, 55, 59, 61, 62, 64];
const PGE69_STORAGE: [usize; 5] = [12, 21, 49, 61, 64];
const PGE69_PV: [usize; 7] = [17, 27, 33, 45, 50, 54, 65];
/// Peak output of each rooftop PV plant (kW).
const PGE69_PV_PEAK: f64 = 30.0;

/// Load factor of the case study at step `l` (15-minute steps from midnight).
pub fn pge69_load_factor(l: usize) -> f64 {
    let l = l as f64;
    if l < 24.0 {
        0.38
    } else if l < 36.0 {
        0.38 + 0.17 * (l - 24.0) / 12.0
    } else if l < 57.0 {
        0.55 - 0.05 * (PI * (l - 36.0) / 20.0).sin().max(0.0)
    } else if l <= 80.0 {
        1.12 + 0.08 * (PI * (l - 57.0) / 23.0).sin()
    } else if l < 96.0 {
        0.55 - 0.15 * (l - 81.0) / 15.0
    } else {
        0.38
    }
}

/// Rooftop PV output as a fraction of its peak, daylight between 06:00 and 18:00.
pub fn pge69_pv_factor(l: usize) -> f64 {
    let l = l as f64;
    if (24.0..=72.0).contains(&l) {
        (PI * (l - 24.0) / 48.0).sin()
    } else {
        0.0
    }
}

/// The 69-bus radial feeder with eight microgrids, eleven 350 kW units,
/// five storage units, seven PV plants and the main-grid connection at the
/// substation bus. Bus `i` here is bus `i + 1` of the feeder's usual numbering.
pub fn pge69() -> Scenario {
    let n = 69;
    let config = SimulationConfig::default();
    let len = config.steps + config.horizon;

    let mut edges: Vec<(BusId, BusId)> = (1..27).map(|i| (i - 1, i)).collect();
    for &(attach, first, last) in &PGE69_LATERALS {
        edges.push((attach - 1, first - 1));
        for b in first..last {
            edges.push((b - 1, b));
        }
    }

    let costs = CostWeights::default();
    let mut buses: Vec<Bus> = (0..n)
        .map(|i| Bus {
            id: i,
            gen_capacity: 0.0,
            storage: None,
            main_grid: i == 0,
            load_forecast: Profile::constant(0.0, len),
            uncertainty_bound: 0.0,
            costs: costs.clone(),
        })
        .collect();
    for &g in &PGE69_GENERATORS {
        buses[g - 1].gen_capacity += GEN_UNIT;
    }
    for &s in &PGE69_STORAGE {
        buses[s - 1].storage = Some(StorageParams::default());
    }
    for (i, bus) in buses.iter_mut().enumerate() {
        let base = PGE69_LOADS
            .iter()
            .find(|(b, _)| *b == i + 1)
            .map_or(0.0, |&(_, v)| v);
        let pv = if PGE69_PV.contains(&(i + 1)) {
            PGE69_PV_PEAK
        } else {
            0.0
        };
        let values = (0..len)
            .map(|l| base * pge69_load_factor(l) - pv * pge69_pv_factor(l))
            .collect();
        bus.load_forecast = Profile(values);
        bus.uncertainty_bound = 0.05 * base + 0.1 * pv;
    }

    let members: Vec<Vec<BusId>> = PGE69_MICROGRIDS
        .iter()
        .map(|ranges| {
            ranges
                .iter()
                .flat_map(|&(a, b)| (a..=b).map(|x| x - 1))
                .collect()
        })
        .collect();
    let net = NetworkModel::new(buses, edges).expect("feeder is a connected tree");
    let partition = Partition::from_members(&net, members).expect("feeder microgrids are valid");
    Scenario {
        net,
        partition,
        config,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_partition;
    use crate::partitioning::check_trigger;

    #[test]
    fn random_scenarios_are_valid_and_deterministic() {
        let a = random_scenario(&GenerateOptions::new(69, 8, 1)).unwrap();
        assert_eq!(a.net.len(), 69);
        assert_eq!(a.partition.len(), 8);
        assert!(validate_partition(&a.net, a.partition.all_members()).is_ok());
        let b = random_scenario(&GenerateOptions::new(4, 2, 7)).unwrap();
        let c = random_scenario(&GenerateOptions::new(4, 2, 7)).unwrap();
        assert_eq!(b.to_json(), c.to_json());
    }

    #[test]
    fn invalid_sizes_are_rejected() {
        assert_eq!(
            random_scenario(&GenerateOptions::new(3, 5, 0)).unwrap_err(),
            GenerateError::InvalidSizes { n: 3, m: 5 }
        );
        assert!(random_scenario(&GenerateOptions::new(3, 0, 0)).is_err());
    }

    #[test]
    fn random_loads_are_self_sufficient_at_night() {
        for seed in 0..20 {
            let s = random_scenario(&GenerateOptions::new(30, 4, seed)).unwrap();
            assert!(!check_trigger(&s.net, &s.partition, 0, 8).unwrap().triggered);
        }
    }

    #[test]
    fn feeder_layout() {
        let s = pge69();
        assert_eq!(s.net.len(), 69);
        assert_eq!(s.net.edges().len(), 68);
        assert_eq!(s.partition.len(), 8);
        assert_eq!(s.net.profile_len(), 104);
        let sizes: Vec<usize> = (0..8).map(|p| s.partition.members(p).len()).collect();
        assert_eq!(sizes, vec![15, 11, 4, 11, 15, 6, 4, 3]);
        let total_gen: f64 = s.net.buses().iter().map(|b| b.gen_capacity).sum();
        assert_eq!(total_gen, 11.0 * GEN_UNIT);
    }

    #[test]
    fn feeder_triggers_only_around_the_evening_peak() {
        let s = pge69();
        for k in 0..96 {
            let t = check_trigger(&s.net, &s.partition, k, 8).unwrap();
            assert_eq!(t.triggered, (50..=80).contains(&k), "step {k}");
        }
    }
}
