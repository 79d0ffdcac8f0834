use crate::kpass::{last_pass_is_frozen, KPassAlgorithm, KPassError, TapeSource};
use crate::rng::Draw;
use crate::streams::{uniform_item, Item};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("positions must be strictly increasing within [1, {n}]")]
    Positions { n: usize },
    #[error("{players} players but {inputs} inputs")]
    Arity { players: usize, inputs: usize },
    #[error("the final pass of {0} changes state; wrap it with `Frozen`")]
    NotFrozen(String),
    #[error(transparent)]
    KPass(#[from] KPassError),
}

/// A memory snapshot sent from one player to the next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    /// The snapshot is `M(pass, position)`.
    pub pass: usize,
    pub position: usize,
    pub state: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRun {
    pub output: i64,
    pub messages: Vec<Message>,
    /// The stream the players jointly simulated.
    pub stream: Vec<Item>,
}

fn advance<A: KPassAlgorithm + ?Sized, T: TapeSource + ?Sized>(
    alg: &A,
    pass: usize,
    range: std::ops::RangeInclusive<usize>,
    x: &[Item],
    mut state: u64,
    tape: &mut T,
) -> Result<u64, KPassError> {
    let limit = alg.memory_bits();
    for j in range {
        let r = tape.symbol(pass, j, alg.randomness(pass, j));
        state = alg.transition(pass, j, x[j - 1], state, r);
        let width = crate::kpass::state_width(state);
        if width > limit {
            return Err(KPassError::StateOverflow { pass, j, width, limit });
        }
    }
    Ok(state)
}

/// The `m`-player protocol that simulates a needle algorithm whose last pass
/// is frozen. Player `j` owns `z_j`, places it at position `p_j`, and fills the
/// gap after it with uniform symbols from `[1, t]`; the last player's gap wraps
/// around to the start of the stream. Memory snapshots travel around the ring
/// once per pass and the last player announces the output.
pub fn mostlyeq_protocol<A, T, D>(
    alg: &A,
    n: usize,
    t: u64,
    positions: &[usize],
    z: &[Item],
    tape: &mut T,
    d: &mut D,
) -> Result<ProtocolRun, ProtocolError>
where
    A: KPassAlgorithm + ?Sized,
    T: TapeSource + ?Sized,
    D: Draw + ?Sized,
{
    let m = positions.len();
    if m != z.len() {
        return Err(ProtocolError::Arity { players: m, inputs: z.len() });
    }
    if m == 0 || positions[0] == 0 || positions[m - 1] > n || positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ProtocolError::Positions { n });
    }
    let bits = alg.memory_bits();
    if bits <= 16 {
        let alphabet: Vec<Item> = (1..=t as Item).collect();
        if !last_pass_is_frozen(alg, n, &alphabet, (1u64 << bits) - 1) {
            return Err(ProtocolError::NotFrozen(alg.name()));
        }
    }
    let k = alg.passes();

    // Each player samples its own gap.
    let mut x = vec![0 as Item; n];
    for (j, (&p, &zj)) in positions.iter().zip(z).enumerate() {
        x[p - 1] = zj;
        let end = if j + 1 < m { positions[j + 1] - 1 } else { n };
        for slot in x.iter_mut().take(end).skip(p) {
            *slot = uniform_item(t, &mut *d);
        }
    }
    for slot in x.iter_mut().take(positions[0] - 1) {
        *slot = uniform_item(t, &mut *d);
    }

    let p1 = positions[0];
    let mut messages = Vec::new();
    let mut state = advance(alg, 1, 1..=p1 - 1, &x, alg.initial_state(), tape)?;
    messages.push(Message { from: m, to: 1, pass: 1, position: p1 - 1, state });
    for i in 1..k {
        for j in 1..=m {
            let start = positions[j - 1];
            if j < m {
                let end = positions[j] - 1;
                state = advance(alg, i, start..=end, &x, state, tape)?;
                messages.push(Message { from: j, to: j + 1, pass: i, position: end, state });
            } else {
                state = advance(alg, i, start..=n, &x, state, tape)?;
                state = advance(alg, i + 1, 1..=p1 - 1, &x, state, tape)?;
                messages.push(Message { from: m, to: 1, pass: i + 1, position: p1 - 1, state });
            }
        }
    }
    Ok(ProtocolRun { output: alg.output(state), messages, stream: x })
}
