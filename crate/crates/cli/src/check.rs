//! Cross-validation of the solvers against the exhaustive oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sgsolve_core::mdp::BestResponseMode;
use sgsolve_core::oracle::{enumerate_solve_capped, strategy_pair_count};
use sgsolve_core::qp_solver::{solve_game_qp, QpOptions};
use sgsolve_core::si::{solve_si, SiConfig};
use sgsolve_core::{Game, Rational};

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub tolerance: f64,
    pub oracle_cap: u128,
    pub qp: QpOptions,
    /// Count an uncertified QP run as a disagreement.
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodCheck {
    /// Largest deviation from the reference values, when the method
    /// produced values.
    pub max_error: Option<f64>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckEntry {
    pub name: String,
    /// `oracle`, or `si` when the game is too large to enumerate.
    pub reference: String,
    pub methods: BTreeMap<String, MethodCheck>,
    pub agree: bool,
}

impl CheckEntry {
    pub fn to_text(&self) -> String {
        let verdict = if self.agree { "ok" } else { "MISMATCH" };
        let parts: Vec<String> = self
            .methods
            .iter()
            .map(|(m, c)| {
                let status = match (&c.note, c.max_error) {
                    (Some(note), _) => note.clone(),
                    (None, Some(e)) => format!("{e:.1e}"),
                    (None, None) => "-".into(),
                };
                format!("{m}{} {status}", if c.ok { "" } else { "!" })
            })
            .collect();
        format!(
            "{}: {verdict} vs {} [{}]",
            self.name,
            self.reference,
            parts.join(", ")
        )
    }
}

fn max_error(reference: &[f64], values: &[f64]) -> f64 {
    reference
        .iter()
        .zip(values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn within(reference: &[f64], values: &[f64], tol: f64) -> MethodCheck {
    let e = max_error(reference, values);
    MethodCheck {
        max_error: Some(e),
        ok: e <= tol,
        note: None,
    }
}

fn failed(note: String) -> MethodCheck {
    MethodCheck {
        max_error: None,
        ok: false,
        note: Some(note),
    }
}

pub fn check_game(name: &str, game: &Game, options: &CheckOptions) -> CheckEntry {
    let mut methods = BTreeMap::new();
    let si = solve_si(game, &SiConfig::default());
    let oracle = (strategy_pair_count(game) <= options.oracle_cap)
        .then(|| enumerate_solve_capped(game, options.oracle_cap));

    let (reference, exact): (&str, Option<Vec<Rational>>) = match (&oracle, &si) {
        (Some(Ok(o)), _) => {
            let agree = o.values == o.min_max_values;
            methods.insert(
                "oracle-minmax".into(),
                MethodCheck {
                    max_error: None,
                    ok: agree,
                    note: (!agree).then(|| "orders differ".into()),
                },
            );
            ("oracle", Some(o.values.clone()))
        }
        (Some(Err(e)), _) => {
            methods.insert("oracle".into(), failed(e.to_string()));
            ("none", None)
        }
        (None, Ok(r)) => ("si", r.values.exact().map(|v| v.to_vec())),
        (None, Err(_)) => ("none", None),
    };
    let Some(exact) = exact else {
        if let Err(e) = &si {
            methods.insert("si".into(), failed(e.to_string()));
        }
        return CheckEntry {
            name: name.into(),
            reference: reference.into(),
            methods,
            agree: false,
        };
    };
    let reference_f64: Vec<f64> = exact.iter().map(sgsolve_core::rational::to_f64).collect();

    if reference != "si" {
        methods.insert(
            "si".into(),
            match &si {
                Ok(r) => {
                    let same = r.values.exact() == Some(exact.as_slice());
                    MethodCheck {
                        max_error: Some(max_error(&reference_f64, &r.values.to_f64())),
                        ok: same,
                        note: (!same).then(|| "not exactly equal".into()),
                    }
                }
                Err(e) => failed(e.to_string()),
            },
        );
    }
    let vi_opponent = SiConfig {
        opponent: BestResponseMode::Vi,
        ..SiConfig::default()
    };
    let topological = SiConfig {
        topological: true,
        ..SiConfig::default()
    };
    for (label, config) in [("si-vi", vi_opponent), ("si-topological", topological)] {
        let check = match solve_si(game, &config) {
            Ok(r) => within(&reference_f64, &r.values.to_f64(), options.tolerance),
            Err(e) => failed(e.to_string()),
        };
        methods.insert(label.into(), check);
    }
    let qp = match solve_game_qp(game, &options.qp) {
        Ok(outcome) => match outcome.result {
            Some(r) => within(&reference_f64, &r.values.to_f64(), options.tolerance),
            None => MethodCheck {
                max_error: None,
                ok: !options.strict,
                note: Some("no certificate".into()),
            },
        },
        Err(e) => failed(e.to_string()),
    };
    methods.insert("qp".into(), qp);

    let agree = methods.values().all(|c| c.ok);
    CheckEntry {
        name: name.into(),
        reference: reference.into(),
        methods,
        agree,
    }
}
