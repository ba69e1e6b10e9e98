//! The line-oriented `.sg` model format.
//!
//! ```text
//! sg
//! # comment
//! state 0 max
//! state 1 target
//! state 2 sink
//! init 0
//! action 0 a
//! trans 0 a 1 1/2
//! trans 0 a 2 0.5
//! ```

use std::collections::HashMap;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::game::{Game, GameBuilder, Player, StateId, StateKind};
use crate::rational::{parse_probability, Rational};

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        message: message.into(),
    }
}

pub fn parse_model(text: &str) -> Result<Game> {
    let mut header_seen = false;
    let mut declared: Vec<Option<(usize, StateKind, Player)>> = Vec::new();
    let mut initial: Option<StateId> = None;
    // (state, action name) -> (line, transitions)
    let mut actions: Vec<(StateId, String, usize)> = Vec::new();
    let mut action_index: HashMap<(StateId, String), usize> = HashMap::new();
    let mut transitions: Vec<Vec<(StateId, Rational)>> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        if !header_seen {
            if words != ["sg"] {
                return Err(syntax(line, "expected `sg` header"));
            }
            header_seen = true;
            continue;
        }
        let parse_id = |w: &str| -> Result<StateId> {
            w.parse::<StateId>()
                .map_err(|_| syntax(line, format!("bad state id `{w}`")))
        };
        match words[0] {
            "state" => {
                if words.len() != 3 {
                    return Err(syntax(line, "usage: state <id> <max|min|target|sink>"));
                }
                let id = parse_id(words[1])?;
                let (kind, owner) = match words[2] {
                    "max" => (StateKind::Normal, Player::Max),
                    "min" => (StateKind::Normal, Player::Min),
                    "target" => (StateKind::Target, Player::Max),
                    "sink" => (StateKind::Sink, Player::Max),
                    other => return Err(syntax(line, format!("unknown state type `{other}`"))),
                };
                if id >= declared.len() {
                    declared.resize(id + 1, None);
                }
                if declared[id].is_some() {
                    return Err(syntax(line, format!("state {id} declared twice")));
                }
                declared[id] = Some((line, kind, owner));
            }
            "init" => {
                if words.len() != 2 {
                    return Err(syntax(line, "usage: init <id>"));
                }
                if initial.is_some() {
                    return Err(syntax(line, "initial state declared twice"));
                }
                initial = Some(parse_id(words[1])?);
            }
            "action" => {
                if words.len() != 3 {
                    return Err(syntax(line, "usage: action <state-id> <action-name>"));
                }
                let s = parse_id(words[1])?;
                let key = (s, words[2].to_string());
                if action_index.contains_key(&key) {
                    return Err(syntax(
                        line,
                        format!("action {} declared twice for state {s}", words[2]),
                    ));
                }
                action_index.insert(key, actions.len());
                actions.push((s, words[2].to_string(), line));
                transitions.push(Vec::new());
            }
            "trans" => {
                if words.len() != 5 {
                    return Err(syntax(
                        line,
                        "usage: trans <state-id> <action-name> <succ-id> <prob>",
                    ));
                }
                let s = parse_id(words[1])?;
                let succ = parse_id(words[3])?;
                let prob = parse_probability(words[4])
                    .ok_or_else(|| syntax(line, format!("bad probability `{}`", words[4])))?;
                let &a = action_index
                    .get(&(s, words[2].to_string()))
                    .ok_or_else(|| {
                        syntax(
                            line,
                            format!("action {} of state {s} not declared", words[2]),
                        )
                    })?;
                if transitions[a].iter().any(|(t, _)| *t == succ) {
                    return Err(syntax(line, format!("duplicate transition to {succ}")));
                }
                transitions[a].push((succ, prob));
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }
    if !header_seen {
        return Err(syntax(1, "expected `sg` header"));
    }

    let mut builder = GameBuilder::new();
    for (id, decl) in declared.iter().enumerate() {
        let (_, kind, owner) =
            decl.ok_or_else(|| Error::Invalid(format!("state ids not dense: {id} missing")))?;
        match kind {
            StateKind::Normal => builder.add_state(owner),
            StateKind::Target => builder.add_target(),
            StateKind::Sink => builder.add_sink(),
        };
    }
    for ((s, name, line), dist) in actions.into_iter().zip(transitions) {
        match declared.get(s).copied().flatten() {
            None => return Err(syntax(line, format!("action for undeclared state {s}"))),
            Some((_, kind, _)) if kind != StateKind::Normal => {
                return Err(syntax(
                    line,
                    format!("absorbing state {s} cannot declare actions"),
                ));
            }
            _ => {}
        }
        builder.add_action(s, name, dist);
    }
    builder.set_initial(initial.ok_or_else(|| Error::Invalid("no `init` line".into()))?);
    builder.build()
}

/// Canonical text: states ascending, actions in declaration order,
/// successors ascending, probabilities as reduced fractions.
pub fn render(game: &Game) -> String {
    let mut out = String::from("sg\n");
    for s in game.state_ids() {
        let word = match (game.kind(s), game.owner(s)) {
            (StateKind::Target, _) => "target",
            (StateKind::Sink, _) => "sink",
            (StateKind::Normal, Player::Max) => "max",
            (StateKind::Normal, Player::Min) => "min",
        };
        writeln!(out, "state {s} {word}").unwrap();
    }
    writeln!(out, "init {}", game.initial()).unwrap();
    for s in game.state_ids().filter(|&s| !game.is_absorbing(s)) {
        for action in game.actions(s) {
            writeln!(out, "action {s} {}", action.name()).unwrap();
            for t in action.transitions() {
                writeln!(out, "trans {s} {} {} {}", action.name(), t.to, t.prob).unwrap();
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    const COIN: &str = "sg\n# fair coin\nstate 0 max\nstate 1 target\nstate 2 sink\ninit 0\naction 0 a\ntrans 0 a 1 1/2\ntrans 0 a 2 0.5\n";

    #[test]
    fn parses_coin() {
        let g = parse_model(COIN).unwrap();
        assert_eq!(g.num_states(), 3);
        assert_eq!(g.action(0, 0).prob_to(1), Some(&rat(1, 2)));
        assert_eq!(g.initial(), 0);
    }

    #[test]
    fn render_is_canonical() {
        let g = parse_model(COIN).unwrap();
        let text = render(&g);
        assert_eq!(
            text,
            "sg\nstate 0 max\nstate 1 target\nstate 2 sink\ninit 0\naction 0 a\ntrans 0 a 1 1/2\ntrans 0 a 2 1/2\n"
        );
        assert_eq!(parse_model(&text).unwrap(), g);
    }

    #[test]
    fn bad_sum_is_a_validation_error() {
        let text = COIN.replace("0.5", "0.4");
        let err = parse_model(&text).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
        assert!(err.to_string().contains("sums to 9/10"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_model("sg\nstate 0 max\nstate 1 banana\n").unwrap_err();
        assert_eq!(
            err,
            Error::Syntax {
                line: 3,
                message: "unknown state type `banana`".into()
            }
        );
        let err = parse_model("state 0 max\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 1, .. }));
        let err =
            parse_model("sg\nstate 0 max\nstate 1 target\ninit 0\naction 0 a\ntrans 0 b 1 1\n")
                .unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 6, .. }));
        let err =
            parse_model("sg\nstate 0 max\ninit 0\naction 0 a\ntrans 0 a 0 2/x\n").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 5, .. }));
    }

    #[test]
    fn structural_errors() {
        assert!(parse_model("sg\nstate 0 max\nstate 2 target\ninit 0\n").is_err());
        assert!(parse_model("sg\nstate 0 target\n").is_err());
        assert!(parse_model("sg\nstate 0 target\ninit 0\naction 0 a\ntrans 0 a 0 1\n").is_err());
        assert!(parse_model("sg\nstate 0 max\ninit 0\n").is_err());
        assert!(parse_model("sg\nstate 0 max\ninit 0\naction 0 a\ntrans 0 a 3 1\n").is_err());
    }
}
