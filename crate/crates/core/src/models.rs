//! Small named games used in examples, tests and benchmarks.

use crate::game::{Game, GameBuilder, Player};
use crate::rational::{int, rat};

/// One Maximizer state with a fair coin between target and sink.
pub fn coin() -> Game {
    let mut b = GameBuilder::new();
    let s = b.add_state(Player::Max);
    let t = b.add_target();
    let z = b.add_sink();
    b.add_action(s, "flip", vec![(t, rat(1, 2)), (z, rat(1, 2))]);
    b.set_initial(s);
    b.build().expect("valid model")
}

/// A ring of `2n` Maximizer states forming one end component, entered from
/// state 0. Each ring state can move on or leave; the best exit, at the last
/// ring state, reaches the target with 1/4 and returns to itself with 3/8, so
/// every ring state and state 0 have value 2/5. State ids: 0 entry,
/// `1..=2n` ring, then target and sink.
pub fn bigmec(n: usize) -> Game {
    assert!(n >= 1);
    let ring = 2 * n;
    let mut b = GameBuilder::new();
    let entry = b.add_state(Player::Max);
    let states: Vec<usize> = (0..ring).map(|_| b.add_state(Player::Max)).collect();
    let t = b.add_target();
    let z = b.add_sink();
    b.add_action(entry, "enter", vec![(states[0], int(1))]);
    b.add_action(entry, "quit", vec![(t, rat(1, 4)), (z, rat(3, 4))]);
    for (i, &s) in states.iter().enumerate() {
        b.add_action(s, "next", vec![(states[(i + 1) % ring], int(1))]);
        let exit = if i == ring - 1 {
            vec![(t, rat(1, 4)), (s, rat(3, 8)), (z, rat(3, 8))]
        } else if i % 2 == 0 {
            vec![(t, rat(1, 4)), (z, rat(3, 4))]
        } else {
            vec![(states[0], rat(1, 2)), (z, rat(1, 2))]
        };
        b.add_action(s, "exit", exit);
    }
    b.set_initial(entry);
    b.build().expect("valid model")
}

/// A Maximizer and a Minimizer state looping through each other, each with
/// its own exit. Values: 3/4 and 1/4.
pub fn mixed_pair() -> Game {
    let mut b = GameBuilder::new();
    let m = b.add_state(Player::Max);
    let n = b.add_state(Player::Min);
    let t = b.add_target();
    let z = b.add_sink();
    b.add_action(m, "go", vec![(n, int(1))]);
    b.add_action(m, "out", vec![(t, rat(3, 4)), (z, rat(1, 4))]);
    b.add_action(n, "go", vec![(m, int(1))]);
    b.add_action(n, "out", vec![(t, rat(1, 4)), (z, rat(3, 4))]);
    b.set_initial(m);
    b.build().expect("valid model")
}

/// Two end components that can reach each other through leaky exits:
/// `{0, 1}` (Maximizer, Minimizer) and `{2, 3}` (both Maximizer).
pub fn mutual_mecs() -> Game {
    let mut b = GameBuilder::new();
    let a1 = b.add_state(Player::Max);
    let a2 = b.add_state(Player::Min);
    let b1 = b.add_state(Player::Max);
    let b2 = b.add_state(Player::Max);
    let t = b.add_target();
    let z = b.add_sink();
    b.add_action(a1, "loop", vec![(a2, int(1))]);
    b.add_action(a1, "out", vec![(b1, rat(1, 2)), (t, rat(1, 2))]);
    b.add_action(a2, "loop", vec![(a1, int(1))]);
    b.add_action(a2, "out", vec![(t, rat(1, 4)), (b2, rat(3, 4))]);
    b.add_action(b1, "loop", vec![(b2, int(1))]);
    b.add_action(b1, "out", vec![(a1, rat(1, 2)), (z, rat(1, 2))]);
    b.add_action(b2, "loop", vec![(b1, int(1))]);
    b.add_action(b2, "out", vec![(t, rat(3, 4)), (z, rat(1, 4))]);
    b.set_initial(a1);
    b.build().expect("valid model")
}
