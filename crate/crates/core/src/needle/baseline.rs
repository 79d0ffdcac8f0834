//! Exact collision detection and counter survival statistics.

use std::collections::HashMap;

use serde::Serialize;

use crate::streams::Item;

/// 1 iff two equal items sit fewer than `w` positions apart, i.e. some window
/// of `w` consecutive items holds a repeat.
pub fn collision_baseline(items: &[Item], w: usize) -> u8 {
    assert!(w >= 1, "window must be positive");
    let mut last: HashMap<Item, usize> = HashMap::new();
    for (j, &x) in items.iter().enumerate() {
        if let Some(i) = last.insert(x, j) {
            if j - i < w {
                return 1;
            }
        }
    }
    0
}

/// Rounds survived by each counter. `dropped` counters were removed after
/// that many rounds; `censored` ones were still alive when the stream ended.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lifetimes {
    pub dropped: Vec<u32>,
    pub censored: Vec<u32>,
}

impl Lifetimes {
    pub fn extend(&mut self, other: Lifetimes) {
        self.dropped.extend(other.dropped);
        self.censored.extend(other.censored);
    }

    pub fn len(&self) -> usize {
        self.dropped.len() + self.censored.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalPoint {
    pub r: u32,
    /// Counters that lived at least `r` rounds.
    pub survived: u64,
    /// Counters whose fate at `r` is known.
    pub at_risk: u64,
}

impl SurvivalPoint {
    pub fn rate(&self) -> f64 {
        if self.at_risk == 0 {
            1.0
        } else {
            self.survived as f64 / self.at_risk as f64
        }
    }
}

/// Empirical survival at each `r`. A censored counter counts only where its
/// observed age reaches `r`.
pub fn survival_curve(life: &Lifetimes, rounds: &[u32]) -> Vec<SurvivalPoint> {
    rounds
        .iter()
        .map(|&r| {
            let dropped_ok = life.dropped.iter().filter(|&&l| l >= r).count() as u64;
            let censored_ok = life.censored.iter().filter(|&&l| l >= r).count() as u64;
            SurvivalPoint { r, survived: dropped_ok + censored_ok, at_risk: life.dropped.len() as u64 + censored_ok }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collisions() {
        assert_eq!(collision_baseline(&[1, 2, 3, 4], 4), 0);
        assert_eq!(collision_baseline(&[1, 2, 3, 1], 4), 1);
        assert_eq!(collision_baseline(&[1, 2, 3, 1], 3), 0);
        assert_eq!(collision_baseline(&[5, 5], 1), 0);
        assert_eq!(collision_baseline(&[5, 5], 2), 1);
        assert_eq!(collision_baseline(&[], 3), 0);
    }

    #[test]
    fn survival_handles_censoring() {
        let life = Lifetimes { dropped: vec![0, 3, 5], censored: vec![2, 10] };
        let c = survival_curve(&life, &[0, 3, 6]);
        assert_eq!(c[0], SurvivalPoint { r: 0, survived: 5, at_risk: 5 });
        assert_eq!(c[1], SurvivalPoint { r: 3, survived: 3, at_risk: 4 });
        assert_eq!(c[2], SurvivalPoint { r: 6, survived: 1, at_risk: 4 });
        assert_eq!(c[0].rate(), 1.0);
        assert_eq!(survival_curve(&Lifetimes::default(), &[4])[0].rate(), 1.0);
    }
}
