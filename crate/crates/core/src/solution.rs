use serde::{Deserialize, Serialize};

use crate::game::Strategy;
use crate::rational::{to_f64, Rational};

/// A value vector in either number representation.
#[derive(Clone, Debug, PartialEq)]
pub enum Values {
    Exact(Vec<Rational>),
    Approx(Vec<f64>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Exact(v) => v.len(),
            Values::Approx(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, s: usize) -> f64 {
        match self {
            Values::Exact(v) => to_f64(&v[s]),
            Values::Approx(v) => v[s],
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|s| self.get(s)).collect()
    }

    pub fn exact(&self) -> Option<&[Rational]> {
        match self {
            Values::Exact(v) => Some(v),
            Values::Approx(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guarantee {
    /// Exact rational values.
    Exact,
    /// Certified up to a numerical tolerance.
    Epsilon,
    /// A heuristic estimate with no error bound.
    Unguaranteed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub iterations: usize,
    pub mdp_solves: usize,
    pub sub_solves: usize,
    pub wall_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub values: Values,
    pub max_strategy: Strategy,
    pub min_strategy: Strategy,
    pub stats: Stats,
    pub method: String,
    pub guarantee: Guarantee,
}
