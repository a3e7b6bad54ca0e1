//! Benchmark dataset generators.
//!
//! Every generator follows the same recipe: pick candidate stations on the
//! network, derive user classes from node populations, build each class's
//! choice blocks (constants and per-outlet increments), then draw errors with
//! [`crate::simulation::draw_errors`]. Instances of one dataset share all of
//! this and differ only in the error draws.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{
    ChoiceBlock, CostBudget, DatasetKind, IncomeBracket, Instance, InstanceError, InstanceMeta,
    Station, StationTerm, UserClass,
};
use crate::network::{Network, NetworkError, SyntheticNetwork};
use crate::simulation::{draw_errors, DrawMode, ErrorKey, NestSpec, SimError};
use crate::util::mix_all;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset {kind}: {detail}")]
    Input { kind: DatasetKind, detail: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// How the per-outlet coefficient is turned into increments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaReading {
    /// Every outlet adds the coefficient, so utility grows linearly in k.
    #[default]
    Linear,
    /// The k-th outlet adds coefficient·k.
    Cumulative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub horizon: usize,
    pub n_stations: usize,
    pub max_outlets: u32,
    pub budget: f64,
    pub first_outlet_cost: f64,
    pub extra_outlet_cost: f64,
    /// Share of a node's residents deciding each period.
    pub population_factor: f64,
    pub optout_asc: f64,
    /// Home-charging constant relative to the opt-out constant.
    pub home_asc_offset: f64,
    pub consideration_radius_km: Option<f64>,
    pub scenarios_per_alternative: u32,
    /// Overrides the per-alternative scenario rule when set.
    pub fixed_scenarios: Option<u32>,
    pub beta_reading: BetaReading,
    pub beta: f64,
    pub beta_home: f64,
    pub beta_no_home: f64,
    /// Home-charging access in single, attached and apartment housing.
    pub home_access: [f64; 3],
    /// Classes below this population are dropped (income split only).
    pub min_class_population: f64,
}

impl DatasetParams {
    pub fn for_kind(kind: DatasetKind) -> Self {
        let base = DatasetParams {
            horizon: 4,
            n_stations: 10,
            max_outlets: 6,
            budget: 400.0,
            first_outlet_cost: 150.0,
            extra_outlet_cost: 50.0,
            population_factor: 0.1,
            optout_asc: 4.5,
            home_asc_offset: 0.5,
            consideration_radius_km: Some(10.0),
            scenarios_per_alternative: 15,
            fixed_scenarios: None,
            beta_reading: BetaReading::Linear,
            beta: 0.281,
            beta_home: 0.211,
            beta_no_home: 0.351,
            home_access: [0.9, 0.75, 0.4],
            min_class_population: 1.0,
        };
        match kind {
            DatasetKind::Simple => DatasetParams {
                max_outlets: 2,
                ..base
            },
            DatasetKind::Distance | DatasetKind::HomeCharging => base,
            DatasetKind::LongSpan => DatasetParams {
                horizon: 10,
                n_stations: 30,
                consideration_radius_km: None,
                ..base
            },
            DatasetKind::Price => DatasetParams {
                n_stations: 30,
                consideration_radius_km: None,
                ..base
            },
            DatasetKind::Tiny => DatasetParams {
                horizon: 2,
                n_stations: 3,
                max_outlets: 2,
                consideration_radius_km: None,
                fixed_scenarios: Some(15),
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub params: DatasetParams,
    pub network: Network,
    pub instance_count: usize,
    pub base_seed: u64,
}

impl DatasetSpec {
    pub fn new(kind: DatasetKind, network: Network, instance_count: usize, base_seed: u64) -> Self {
        DatasetSpec {
            kind,
            params: DatasetParams::for_kind(kind),
            network,
            instance_count,
            base_seed,
        }
    }
}

/// Station constant for a class at distance `distance_km` in period `t`
/// (0-based).
pub fn compute_asc(
    kind: DatasetKind,
    station: &Station,
    station_in_center: bool,
    class: &UserClass,
    t: usize,
    distance_km: f64,
) -> Result<f64, DatasetError> {
    let d1 = if station.level3 { 1.0 } else { 0.0 };
    let d3 = if station_in_center { 1.0 } else { 0.0 };
    let distance_coef = match kind {
        DatasetKind::Distance => -0.63,
        _ => -0.063,
    };
    let mut asc = 1.464 * d1 + distance_coef * distance_km + 0.174 * d3;
    if kind == DatasetKind::Price {
        let d4 = class
            .income_bracket
            .ok_or_else(|| DatasetError::Input {
                kind,
                detail: format!("class {} has no income bracket", class.id),
            })?
            .delta();
        asc += 0.443 * d4 + 0.443 * t as f64 * (2.0 - d4) / 4.0;
    }
    Ok(asc)
}

/// Candidate stations: distinct nodes drawn with a key derived from the base
/// seed only, so every instance of a dataset shares them.
pub fn pick_stations(
    kind: DatasetKind,
    network: &Network,
    params: &DatasetParams,
    base_seed: u64,
) -> Result<Vec<Station>, DatasetError> {
    if params.n_stations > network.len() {
        return Err(DatasetError::Input {
            kind,
            detail: format!(
                "{} stations requested on {} nodes",
                params.n_stations,
                network.len()
            ),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_all(&[base_seed, 0x57a7_1045]));
    let mut picked: Vec<usize> = sample(&mut rng, network.len(), params.n_stations).into_vec();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .enumerate()
        .map(|(j, p)| Station {
            id: j as u32,
            node_id: network.nodes[p].id,
            max_outlets: params.max_outlets,
            initial_outlets: 0,
            level3: true,
        })
        .collect())
}

fn build_classes(
    kind: DatasetKind,
    network: &Network,
    params: &DatasetParams,
) -> Result<Vec<UserClass>, DatasetError> {
    if network.total_population() <= 0.0 {
        return Err(DatasetError::Input {
            kind,
            detail: "network has no population".into(),
        });
    }
    let t_len = params.horizon;
    let mut classes = Vec::new();
    let mut push = |node: u32, pop: f64, home: bool, bracket: Option<IncomeBracket>| {
        classes.push(UserClass {
            id: classes.len() as u32,
            home_node: node,
            populations: vec![pop; t_len],
            has_home_charging: home,
            income_bracket: bracket,
            scenario_count: 1,
            consideration_radius_km: params.consideration_radius_km,
        });
    };
    for node in &network.nodes {
        let pop = node.population * params.population_factor;
        match kind {
            DatasetKind::HomeCharging => {
                let mix = node.housing_mix;
                let [s, a, p] = params.home_access;
                let share = mix.single * s + mix.attached * a + mix.apartment * p;
                push(node.id, pop * share, true, None);
                push(node.id, pop * (1.0 - share), false, None);
            }
            DatasetKind::Price => {
                let income = node.income_mix.ok_or_else(|| DatasetError::Input {
                    kind,
                    detail: format!("node {} has no income mix", node.id),
                })?;
                for (b, bracket) in IncomeBracket::ALL.into_iter().enumerate() {
                    let class_pop = pop * income[b];
                    if class_pop >= params.min_class_population {
                        push(node.id, class_pop, false, Some(bracket));
                    }
                }
            }
            _ => push(node.id, pop, false, None),
        }
    }
    Ok(classes)
}

fn increments(params: &DatasetParams, beta: f64, m: u32) -> Vec<f64> {
    (1..=m)
        .map(|k| match params.beta_reading {
            BetaReading::Linear => beta,
            BetaReading::Cumulative => beta * f64::from(k),
        })
        .collect()
}

/// Classes, choice blocks and stations shared by every instance of a dataset.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub kind: DatasetKind,
    pub horizon: usize,
    pub network: Network,
    pub stations: Vec<Station>,
    pub classes: Vec<UserClass>,
    pub costs: CostBudget,
    pub choices: Vec<Vec<ChoiceBlock>>,
    pub nests: NestSpec,
}

pub fn build_skeleton(
    kind: DatasetKind,
    params: &DatasetParams,
    network: &Network,
    base_seed: u64,
) -> Result<Skeleton, DatasetError> {
    let stations = pick_stations(kind, network, params, base_seed)?;
    let mut classes = build_classes(kind, network, params)?;
    let station_dist: Vec<Vec<f64>> = stations
        .iter()
        .map(|s| network.shortest_path_distances(s.node_id))
        .collect::<Result<_, _>>()?;
    let in_center: Vec<bool> = stations
        .iter()
        .map(|s| network.node(s.node_id).is_some_and(|n| n.city_center))
        .collect();

    let mut choices = Vec::with_capacity(classes.len());
    for class in &mut classes {
        let home_pos = network
            .position(class.home_node)
            .expect("class node exists");
        let beta = match kind {
            DatasetKind::HomeCharging if class.has_home_charging => params.beta_home,
            DatasetKind::HomeCharging => params.beta_no_home,
            _ => params.beta,
        };
        let mut blocks = Vec::with_capacity(params.horizon);
        for t in 0..params.horizon {
            let mut terms = Vec::new();
            for (j, station) in stations.iter().enumerate() {
                let d = station_dist[j][home_pos];
                if class
                    .consideration_radius_km
                    .is_some_and(|radius| d > radius)
                {
                    continue;
                }
                terms.push(StationTerm {
                    station: j as u32,
                    asc: compute_asc(kind, station, in_center[j], class, t, d)?,
                    increments: increments(params, beta, station.max_outlets),
                });
            }
            blocks.push(ChoiceBlock {
                optout_asc: params.optout_asc,
                home_asc: class
                    .has_home_charging
                    .then_some(params.optout_asc + params.home_asc_offset),
                stations: terms,
            });
        }
        let widest = blocks
            .iter()
            .map(ChoiceBlock::n_alternatives)
            .max()
            .unwrap_or(1) as u32;
        class.scenario_count = params
            .fixed_scenarios
            .unwrap_or(params.scenarios_per_alternative * widest);
        choices.push(blocks);
    }

    let costs = CostBudget {
        outlet_cost: stations
            .iter()
            .map(|s| {
                (1..=s.max_outlets)
                    .map(|k| {
                        let c = if k == 1 {
                            params.first_outlet_cost
                        } else {
                            params.extra_outlet_cost
                        };
                        vec![c; params.horizon]
                    })
                    .collect()
            })
            .collect(),
        budgets: vec![params.budget; params.horizon],
    };
    let nests = if kind == DatasetKind::HomeCharging {
        NestSpec::three_nest(stations.len())
    } else {
        NestSpec::two_nest(stations.len())
    };
    Ok(Skeleton {
        kind,
        horizon: params.horizon,
        network: network.clone(),
        stations,
        classes,
        costs,
        choices,
        nests,
    })
}

impl Skeleton {
    /// Draws the errors of instance `index` and assembles it.
    pub fn instantiate(
        &self,
        base_seed: u64,
        index: u32,
        mode: DrawMode,
    ) -> Result<Instance, DatasetError> {
        let key = ErrorKey {
            base_seed,
            instance: index,
        };
        let errors = draw_errors(&self.classes, &self.choices, &self.nests, key, mode)?;
        Ok(Instance::new(
            InstanceMeta {
                dataset_kind: self.kind,
                seed: base_seed,
                index,
            },
            self.horizon,
            self.network.clone(),
            self.stations.clone(),
            self.classes.clone(),
            self.costs.clone(),
            self.choices.clone(),
            errors,
        )?)
    }
}

/// All instances of a dataset, in index order.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Vec<Instance>, DatasetError> {
    if spec.kind == DatasetKind::Tiny {
        return Ok(tiny_dataset(spec.base_seed, spec.instance_count));
    }
    let skeleton = build_skeleton(spec.kind, &spec.params, &spec.network, spec.base_seed)?;
    (0..spec.instance_count as u32)
        .into_par_iter()
        .map(|index| skeleton.instantiate(spec.base_seed, index, DrawMode::Full))
        .collect()
}

/// Default synthetic network for a dataset seed.
pub fn default_network(base_seed: u64) -> Result<Network, NetworkError> {
    SyntheticNetwork {
        seed: mix_all(&[base_seed, 0x0e7]),
        ..Default::default()
    }
    .generate()
}

const TINY_BUDGETS: [f64; 5] = [150.0, 200.0, 250.0, 300.0, 400.0];

/// A desk-scale instance: 3 to 10 nodes, 2 to 4 stations with 1 or 2 outlets,
/// 1 or 2 periods and 15 scenarios per class. Utilities follow the simple
/// dataset; every class considers every station.
pub fn tiny_instance(base_seed: u64, index: u32) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_all(&[base_seed, u64::from(index), 0x7171]));
    let n_stations = rng.random_range(2..=4usize);
    let n_nodes = rng.random_range(n_stations.max(3)..=10usize);
    let horizon = rng.random_range(1..=2usize);
    let network = SyntheticNetwork {
        nodes: n_nodes,
        width_km: 8.0,
        height_km: 6.0,
        population_median: 100.0,
        population_sigma: 0.5,
        center_fraction: 0.2,
        seed: rng.random(),
    }
    .generate()
    .expect("tiny network is valid");
    let mut params = DatasetParams::for_kind(DatasetKind::Tiny);
    params.horizon = horizon;
    params.n_stations = n_stations;
    let mut skeleton = build_skeleton(DatasetKind::Tiny, &params, &network, rng.random())
        .expect("tiny skeleton is valid");
    for (j, station) in skeleton.stations.iter_mut().enumerate() {
        station.max_outlets = rng.random_range(1..=2);
        skeleton.costs.outlet_cost[j].truncate(station.max_outlets as usize);
    }
    for blocks in &mut skeleton.choices {
        for block in blocks {
            for term in &mut block.stations {
                term.increments
                    .truncate(skeleton.stations[term.station as usize].max_outlets as usize);
            }
        }
    }
    skeleton.costs.budgets = (0..horizon)
        .map(|_| TINY_BUDGETS[rng.random_range(0..TINY_BUDGETS.len())])
        .collect();
    skeleton
        .instantiate(base_seed, index, DrawMode::Full)
        .expect("tiny instance is valid")
}

pub fn tiny_dataset(base_seed: u64, count: usize) -> Vec<Instance> {
    (0..count as u32)
        .into_par_iter()
        .map(|i| tiny_instance(base_seed, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn asc_examples() {
        let station = Station {
            id: 0,
            node_id: 0,
            max_outlets: 6,
            initial_outlets: 0,
            level3: true,
        };
        let mut class = UserClass {
            id: 0,
            home_node: 0,
            populations: vec![1.0],
            has_home_charging: false,
            income_bracket: None,
            scenario_count: 15,
            consideration_radius_km: None,
        };
        assert_eq!(
            compute_asc(DatasetKind::Simple, &station, false, &class, 0, 0.0).unwrap(),
            1.464
        );
        let d = compute_asc(DatasetKind::Distance, &station, true, &class, 0, 10.0).unwrap();
        assert!((d - (-4.662)).abs() < 1e-12);
        assert!(compute_asc(DatasetKind::Price, &station, false, &class, 0, 0.0).is_err());
        class.income_bracket = Some(IncomeBracket::Below25k);
        let p = compute_asc(DatasetKind::Price, &station, false, &class, 0, 0.0).unwrap();
        assert!((p - (1.464 - 0.886)).abs() < 1e-12);
        // later periods favour the lowest bracket most
        let p3 = compute_asc(DatasetKind::Price, &station, false, &class, 3, 0.0).unwrap();
        assert!((p3 - p - 0.443 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_instances_respect_bounds() {
        for inst in tiny_dataset(5, 30) {
            assert!(inst.n_stations() <= 4 && inst.horizon <= 2 && inst.n_classes() <= 10);
            assert!(inst.stations.iter().all(|s| s.max_outlets <= 2));
            assert!(inst.classes.iter().all(|c| c.scenario_count == 15));
        }
    }

    #[test]
    fn cumulative_reading_scales_increments() {
        let params = DatasetParams {
            beta_reading: BetaReading::Cumulative,
            ..DatasetParams::for_kind(DatasetKind::Simple)
        };
        assert_eq!(increments(&params, 0.5, 3), vec![0.5, 1.0, 1.5]);
        let linear = DatasetParams::for_kind(DatasetKind::Simple);
        assert_eq!(increments(&linear, 0.5, 3), vec![0.5, 0.5, 0.5]);
    }
}
