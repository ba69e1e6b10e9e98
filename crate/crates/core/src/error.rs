use crate::game::StateId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("invalid game: {0}")]
    Invalid(String),

    #[error("unknown state {0}")]
    UnknownState(StateId),

    #[error("state {state} has no action {action}")]
    UnknownAction { state: StateId, action: String },

    #[error("strategy does not match game: {0}")]
    StrategyMismatch(String),

    #[error("states {0:?} cannot be driven to a target or sink")]
    CannotReachAbsorbing(Vec<StateId>),

    #[error("non-dyadic probability {prob} on transition ({state}, {action}) -> {successor}")]
    NonDyadic {
        state: StateId,
        action: String,
        successor: StateId,
        prob: String,
    },

    #[error("probability {prob} on ({state}, {action}) needs more than {max_bits} binary digits")]
    TooManyBits {
        state: StateId,
        action: String,
        prob: String,
        max_bits: u32,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("game is not in normal form: requirement {0} violated")]
    NormalForm(&'static str),

    #[error("MEC {mec:?} has {count} local strategy pairs, above the cap of {cap}")]
    TooManyStrategyPairs {
        mec: Vec<StateId>,
        count: u128,
        cap: u128,
    },

    #[error("exhaustive enumeration needs {count} strategy profiles, above the cap of {cap}")]
    EnumerationCap { count: u128, cap: u128 },
}
