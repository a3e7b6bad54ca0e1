//! Problem instances: stations, user classes, costs, utility terms and the
//! simulated error tensor.
//!
//! Stations and classes are addressed by their position (`j`, `i`), periods
//! by a 0-based `t`. A class sees, in every period, a [`ChoiceBlock`]: the
//! exogenous alternatives (opt-out, optionally home charging) followed by the
//! stations it considers, in increasing station order. That order is also the
//! alternative order inside the error tensor.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{Network, NetworkError};

pub const SCHEMA_NAME: &str = "evsite-instance";
pub const SCHEMA_VERSION: u32 = 1;

/// Index order of [`ErrorTensor::values`], written into every instance file.
pub const ERROR_LAYOUT: &str =
    "class,period,scenario,alternative; alternatives per block: optout, home (if present), stations ascending";

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invariant `{invariant}` violated: {detail}")]
    Invariant {
        invariant: &'static str,
        detail: String,
    },
    #[error("instance file: expected schema {expected} version {expected_version}, found {found} version {found_version}")]
    Schema {
        expected: &'static str,
        expected_version: u32,
        found: String,
        found_version: u32,
    },
    #[error("instance file parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn invariant(invariant: &'static str, detail: impl Into<String>) -> InstanceError {
    InstanceError::Invariant {
        invariant,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Simple,
    Distance,
    HomeCharging,
    LongSpan,
    Price,
    /// Desk-scale instances for exhaustive checks; utilities follow `Simple`.
    Tiny,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 6] = [
        DatasetKind::Simple,
        DatasetKind::Distance,
        DatasetKind::HomeCharging,
        DatasetKind::LongSpan,
        DatasetKind::Price,
        DatasetKind::Tiny,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Simple => "simple",
            DatasetKind::Distance => "distance",
            DatasetKind::HomeCharging => "home-charging",
            DatasetKind::LongSpan => "long-span",
            DatasetKind::Price => "price",
            DatasetKind::Tiny => "tiny",
        }
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        let norm = match norm.as_str() {
            "homecharging" => "home-charging",
            "longspan" => "long-span",
            other => other,
        };
        DatasetKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| format!("unknown dataset kind `{s}` (expected one of simple, distance, home-charging, long-span, price, tiny)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: u32,
    pub node_id: u32,
    pub max_outlets: u32,
    pub initial_outlets: u32,
    pub level3: bool,
}

/// Household income bracket, lowest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncomeBracket {
    Below25k,
    From25kTo50k,
    From50kTo75k,
    From75kTo100k,
    Above100k,
}

impl IncomeBracket {
    pub const ALL: [IncomeBracket; 5] = [
        IncomeBracket::Below25k,
        IncomeBracket::From25kTo50k,
        IncomeBracket::From50kTo75k,
        IncomeBracket::From75kTo100k,
        IncomeBracket::Above100k,
    ];

    /// Centred bracket code, −2 for the lowest bracket up to 2.
    pub fn delta(self) -> f64 {
        match self {
            IncomeBracket::Below25k => -2.0,
            IncomeBracket::From25kTo50k => -1.0,
            IncomeBracket::From50kTo75k => 0.0,
            IncomeBracket::From75kTo100k => 1.0,
            IncomeBracket::Above100k => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserClass {
    pub id: u32,
    pub home_node: u32,
    /// Population deciding in each period.
    pub populations: Vec<f64>,
    pub has_home_charging: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub income_bracket: Option<IncomeBracket>,
    pub scenario_count: u32,
    /// Stations farther than this (shortest path, km) are not considered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consideration_radius_km: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBudget {
    /// `outlet_cost[j][k-1][t]`: cost of going from k−1 to k outlets.
    pub outlet_cost: Vec<Vec<Vec<f64>>>,
    pub budgets: Vec<f64>,
}

impl CostBudget {
    /// Cost of the `k`-th outlet (1-based) at station `j` in period `t`.
    #[inline]
    pub fn cost(&self, j: usize, k: u32, t: usize) -> f64 {
        self.outlet_cost[j][k as usize - 1][t]
    }

    /// Cost of going from `from` to `to` outlets at station `j` in period `t`.
    pub fn step_cost(&self, j: usize, from: u32, to: u32, t: usize) -> f64 {
        (from + 1..=to).map(|k| self.cost(j, k, t)).sum()
    }
}

/// A considered station with its constant and per-outlet increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationTerm {
    pub station: u32,
    pub asc: f64,
    /// `increments[k-1]` is the utility gained by the k-th outlet.
    pub increments: Vec<f64>,
}

/// Alternatives available to one class in one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceBlock {
    pub optout_asc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home_asc: Option<f64>,
    pub stations: Vec<StationTerm>,
}

impl ChoiceBlock {
    pub fn n_alternatives(&self) -> usize {
        1 + usize::from(self.home_asc.is_some()) + self.stations.len()
    }

    /// Position of the first station alternative within the block.
    pub fn first_station_alt(&self) -> usize {
        1 + usize::from(self.home_asc.is_some())
    }

    /// Index into `stations` for station `j`, if considered.
    pub fn station_term(&self, j: usize) -> Option<usize> {
        self.stations
            .binary_search_by_key(&(j as u32), |s| s.station)
            .ok()
    }
}

/// Simulated error terms, one value per (class, period, scenario, alternative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTensor {
    pub layout: String,
    pub values: Vec<f64>,
    #[serde(skip)]
    offsets: Vec<Vec<usize>>,
}

impl ErrorTensor {
    /// Wraps values laid out as described by [`ERROR_LAYOUT`].
    pub fn new(values: Vec<f64>) -> Self {
        ErrorTensor {
            layout: ERROR_LAYOUT.to_string(),
            values,
            offsets: Vec::new(),
        }
    }

    /// Number of values a tensor for these classes and choice blocks holds,
    /// plus the start offset of every (i, t) block.
    pub fn block_offsets(
        classes: &[UserClass],
        choices: &[Vec<ChoiceBlock>],
    ) -> (Vec<Vec<usize>>, usize) {
        let mut offsets = Vec::with_capacity(choices.len());
        let mut at = 0;
        for (class, blocks) in classes.iter().zip(choices) {
            let mut row = Vec::with_capacity(blocks.len());
            for block in blocks {
                row.push(at);
                at += class.scenario_count as usize * block.n_alternatives();
            }
            offsets.push(row);
        }
        (offsets, at)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub dataset_kind: DatasetKind,
    pub seed: u64,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub meta: InstanceMeta,
    pub horizon: usize,
    pub network: Network,
    pub stations: Vec<Station>,
    pub classes: Vec<UserClass>,
    pub costs: CostBudget,
    /// `choices[i][t]`.
    pub choices: Vec<Vec<ChoiceBlock>>,
    pub errors: ErrorTensor,
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    schema: String,
    version: u32,
    instance: T,
}

#[derive(Deserialize)]
struct Header {
    schema: String,
    version: u32,
}

impl Instance {
    /// Assembles and validates an instance.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        meta: InstanceMeta,
        horizon: usize,
        network: Network,
        stations: Vec<Station>,
        classes: Vec<UserClass>,
        costs: CostBudget,
        choices: Vec<Vec<ChoiceBlock>>,
        errors: ErrorTensor,
    ) -> Result<Self, InstanceError> {
        let mut inst = Instance {
            meta,
            horizon,
            network,
            stations,
            classes,
            costs,
            choices,
            errors,
        };
        inst.finish()?;
        Ok(inst)
    }

    fn finish(&mut self) -> Result<(), InstanceError> {
        self.network.reindex()?;
        self.network.validate()?;
        self.validate_structure()?;
        let (offsets, len) = ErrorTensor::block_offsets(&self.classes, &self.choices);
        if self.errors.values.len() != len {
            return Err(invariant(
                "error-tensor-shape",
                format!(
                    "expected {len} error values, found {}",
                    self.errors.values.len()
                ),
            ));
        }
        if let Some(pos) = self.errors.values.iter().position(|v| !v.is_finite()) {
            return Err(invariant(
                "error-finite",
                format!("error value {pos} is not finite"),
            ));
        }
        self.errors.offsets = offsets;
        Ok(())
    }

    fn validate_structure(&self) -> Result<(), InstanceError> {
        let t_len = self.horizon;
        if t_len == 0 {
            return Err(invariant(
                "horizon-positive",
                "horizon must be at least one period",
            ));
        }
        for (j, s) in self.stations.iter().enumerate() {
            if self.network.position(s.node_id).is_none() {
                return Err(invariant(
                    "station-node-exists",
                    format!("station {j} sits on unknown node {}", s.node_id),
                ));
            }
            if s.max_outlets == 0 {
                return Err(invariant(
                    "max-outlets-positive",
                    format!("station {j} has no outlets"),
                ));
            }
            if s.initial_outlets > s.max_outlets {
                return Err(invariant(
                    "initial-outlets-bounded",
                    format!(
                        "station {j}: {} initial outlets exceed maximum {}",
                        s.initial_outlets, s.max_outlets
                    ),
                ));
            }
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.network.position(c.home_node).is_none() {
                return Err(invariant(
                    "class-node-exists",
                    format!("class {i} lives on unknown node {}", c.home_node),
                ));
            }
            if c.populations.len() != t_len {
                return Err(invariant(
                    "population-length",
                    format!(
                        "class {i} has {} populations for {t_len} periods",
                        c.populations.len()
                    ),
                ));
            }
            if c.populations.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(invariant(
                    "population-nonnegative",
                    format!("class {i}: {:?}", c.populations),
                ));
            }
            if c.scenario_count == 0 {
                return Err(invariant(
                    "scenario-count-positive",
                    format!("class {i} has no scenarios"),
                ));
            }
        }
        let m = self.stations.len();
        let oc = &self.costs.outlet_cost;
        if oc.len() != m {
            return Err(invariant(
                "cost-shape",
                format!("costs for {} stations, expected {m}", oc.len()),
            ));
        }
        for (j, per_k) in oc.iter().enumerate() {
            if per_k.len() != self.stations[j].max_outlets as usize {
                return Err(invariant(
                    "cost-shape",
                    format!(
                        "station {j}: {} outlet costs, expected {}",
                        per_k.len(),
                        self.stations[j].max_outlets
                    ),
                ));
            }
            for (k, per_t) in per_k.iter().enumerate() {
                if per_t.len() != t_len {
                    return Err(invariant(
                        "cost-shape",
                        format!("station {j} outlet {}: {} periods", k + 1, per_t.len()),
                    ));
                }
                if per_t.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
                    return Err(invariant(
                        "cost-positive",
                        format!("station {j} outlet {}: {per_t:?}", k + 1),
                    ));
                }
            }
        }
        if self.costs.budgets.len() != t_len {
            return Err(invariant(
                "budget-shape",
                format!("{} budgets for {t_len} periods", self.costs.budgets.len()),
            ));
        }
        if self
            .costs
            .budgets
            .iter()
            .any(|b| !(b.is_finite() && *b >= 0.0))
        {
            return Err(invariant(
                "budget-nonnegative",
                format!("{:?}", self.costs.budgets),
            ));
        }
        if self.choices.len() != self.classes.len() {
            return Err(invariant(
                "choice-shape",
                format!(
                    "{} choice rows for {} classes",
                    self.choices.len(),
                    self.classes.len()
                ),
            ));
        }
        for (i, row) in self.choices.iter().enumerate() {
            if row.len() != t_len {
                return Err(invariant(
                    "choice-shape",
                    format!("class {i}: {} choice blocks", row.len()),
                ));
            }
            for (t, block) in row.iter().enumerate() {
                let at = || format!("class {i}, period {}", t + 1);
                if !block.optout_asc.is_finite() || block.home_asc.is_some_and(|h| !h.is_finite()) {
                    return Err(invariant("asc-finite", at()));
                }
                if block.home_asc.is_some() && !self.classes[i].has_home_charging {
                    return Err(invariant(
                        "home-alternative-access",
                        format!("{}: class has no home charging", at()),
                    ));
                }
                for (s, term) in block.stations.iter().enumerate() {
                    let j = term.station as usize;
                    if j >= m {
                        return Err(invariant(
                            "choice-station-exists",
                            format!("{}: station {j}", at()),
                        ));
                    }
                    if s > 0 && block.stations[s - 1].station >= term.station {
                        return Err(invariant(
                            "choice-stations-sorted",
                            format!("{}: stations must be strictly increasing", at()),
                        ));
                    }
                    if !term.asc.is_finite() {
                        return Err(invariant("asc-finite", format!("{}, station {j}", at())));
                    }
                    if term.increments.len() != self.stations[j].max_outlets as usize {
                        return Err(invariant(
                            "beta-shape",
                            format!(
                                "{}, station {j}: {} increments",
                                at(),
                                term.increments.len()
                            ),
                        ));
                    }
                    if term
                        .increments
                        .iter()
                        .any(|b| !(b.is_finite() && *b >= 0.0))
                    {
                        return Err(invariant(
                            "beta-nonnegative",
                            format!("{}, station {j}: {:?}", at(), term.increments),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_stations(&self) -> usize {
        self.stations.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn scenarios(&self, i: usize) -> usize {
        self.classes[i].scenario_count as usize
    }

    pub fn population(&self, i: usize, t: usize) -> f64 {
        self.classes[i].populations[t]
    }

    pub fn block(&self, i: usize, t: usize) -> &ChoiceBlock {
        &self.choices[i][t]
    }

    /// Error values of all alternatives of triplet (t, i, r), in block order.
    pub fn errors_at(&self, t: usize, i: usize, r: usize) -> &[f64] {
        let n = self.choices[i][t].n_alternatives();
        let start = self.errors.offsets[i][t] + r * n;
        &self.errors.values[start..start + n]
    }

    /// Number of triplets (t, i, r).
    pub fn n_triplets(&self) -> usize {
        self.classes
            .iter()
            .map(|c| c.scenario_count as usize)
            .sum::<usize>()
            * self.horizon
    }

    /// Total weight Σ N/R over all triplets, i.e. the whole deciding population.
    pub fn total_mass(&self) -> f64 {
        (0..self.horizon)
            .map(|t| self.classes.iter().map(|c| c.populations[t]).sum::<f64>())
            .sum()
    }

    pub fn max_outlets(&self, j: usize) -> u32 {
        self.stations[j].max_outlets
    }

    /// Compact JSON document: `{"schema", "version", "instance"}`.
    pub fn to_json(&self) -> String {
        let env = Envelope {
            schema: SCHEMA_NAME.to_string(),
            version: SCHEMA_VERSION,
            instance: self,
        };
        serde_json::to_string(&env).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let parse_err = |e: serde_json::Error| InstanceError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        };
        let header: Header = serde_json::from_str(text).map_err(parse_err)?;
        if header.schema != SCHEMA_NAME || header.version != SCHEMA_VERSION {
            return Err(InstanceError::Schema {
                expected: SCHEMA_NAME,
                expected_version: SCHEMA_VERSION,
                found: header.schema,
                found_version: header.version,
            });
        }
        let env: Envelope<Instance> = serde_json::from_str(text).map_err(parse_err)?;
        let mut inst = env.instance;
        if inst.errors.layout != ERROR_LAYOUT {
            return Err(invariant(
                "error-layout",
                format!("unsupported layout `{}`", inst.errors.layout),
            ));
        }
        inst.finish()?;
        Ok(inst)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), InstanceError> {
        crate::util::write_atomic(path.as_ref(), self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstanceError> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::from_json(&text)
    }
}
