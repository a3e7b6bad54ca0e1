//! A plain MILP container: named variables, rows and a linear objective.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MilpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl RowSense {
    pub fn symbol(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// (variable index, coefficient)
    pub terms: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub sense: Option<ObjectiveSense>,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
    #[serde(skip)]
    var_index: HashMap<String, usize>,
    #[serde(skip)]
    row_names: HashMap<String, usize>,
}

/// LP-safe identifier: a letter first, then letters, digits and `_.`.
pub fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && name.len() <= 255
}

impl MilpModel {
    pub fn new(name: impl Into<String>, sense: ObjectiveSense) -> Self {
        MilpModel {
            name: name.into(),
            sense: Some(sense),
            ..Default::default()
        }
    }

    pub fn objective_sense(&self) -> ObjectiveSense {
        self.sense.unwrap_or(ObjectiveSense::Minimize)
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
    ) -> Result<usize, MilpError> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(MilpError::BadName(name));
        }
        if self.var_index.contains_key(&name) {
            return Err(MilpError::DuplicateName(name));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(MilpError::BadBounds { name, lower, upper });
        }
        let idx = self.variables.len();
        self.var_index.insert(name.clone(), idx);
        self.variables.push(Variable {
            name,
            lower,
            upper,
            kind,
        });
        Ok(idx)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> Result<usize, MilpError> {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    pub fn free(&mut self, name: impl Into<String>) -> Result<usize, MilpError> {
        self.add_var(name, f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous)
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(usize, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> Result<usize, MilpError> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(MilpError::BadName(name));
        }
        if self.row_names.contains_key(&name) {
            return Err(MilpError::DuplicateName(name));
        }
        if let Some(&(v, _)) = terms.iter().find(|(v, _)| *v >= self.variables.len()) {
            return Err(MilpError::UnknownVariable(format!(
                "index {v} in row {name}"
            )));
        }
        if !rhs.is_finite() || terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(MilpError::NonFinite(name));
        }
        // zero coefficients carry nothing and do not survive LP text
        let terms = terms.into_iter().filter(|(_, c)| *c != 0.0).collect();
        let idx = self.constraints.len();
        self.row_names.insert(name.clone(), idx);
        self.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
        Ok(idx)
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, f64)>, constant: f64) {
        self.objective = terms;
        self.objective_constant = constant;
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn row(&self, name: &str) -> Option<&Constraint> {
        self.row_names.get(name).map(|&i| &self.constraints[i])
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    /// Rebuilds the name maps after deserialization.
    pub fn reindex(&mut self) -> Result<(), MilpError> {
        self.var_index.clear();
        self.row_names.clear();
        for (i, v) in self.variables.iter().enumerate() {
            if self.var_index.insert(v.name.clone(), i).is_some() {
                return Err(MilpError::DuplicateName(v.name.clone()));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if self.row_names.insert(c.name.clone(), i).is_some() {
                return Err(MilpError::DuplicateName(c.name.clone()));
            }
        }
        Ok(())
    }

    /// Objective value at `values` (indexed like `variables`).
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .map(|&(v, c)| c * values[v])
                .sum::<f64>()
    }

    /// Largest violation of any row or bound at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * values[v]).sum();
            let viol = match c.sense {
                RowSense::Le => lhs - c.rhs,
                RowSense::Ge => c.rhs - lhs,
                RowSense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        for (v, x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.kind != VarKind::Continuous {
                worst = worst.max((x - x.round()).abs());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_collisions_and_bad_names() {
        let mut m = MilpModel::new("t", ObjectiveSense::Maximize);
        m.binary("x_1_1_1").unwrap();
        assert!(matches!(
            m.binary("x_1_1_1"),
            Err(MilpError::DuplicateName(_))
        ));
        assert!(matches!(m.binary("1x"), Err(MilpError::BadName(_))));
        assert!(matches!(m.binary("a b"), Err(MilpError::BadName(_))));
        m.add_row("r", vec![(0, 1.0)], RowSense::Le, 1.0).unwrap();
        assert!(m.add_row("r", vec![(0, 1.0)], RowSense::Le, 1.0).is_err());
        assert!(m.add_row("s", vec![(5, 1.0)], RowSense::Le, 1.0).is_err());
    }
}
