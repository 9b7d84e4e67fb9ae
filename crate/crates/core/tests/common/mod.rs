//! Seeded corpora of random functionals shared by the integration tests.
#![allow(dead_code)]

use poisson_ou::functional::Sign;
use poisson_ou::Functional;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Table length of random one-atom functionals; counts beyond it reuse the
/// last entry, so the rule is total and bounded.
pub const TABLE_LEN: usize = 160;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn from_table(label: String, table: Vec<f64>) -> Functional {
    let bound = table.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Functional::new(label, move |c| table[(c[0] as usize).min(table.len() - 1)]).with_bound(bound)
}

/// Values uniform in `[-1, 1]`.
pub fn random_bounded(rng: &mut ChaCha8Rng, id: usize) -> Functional {
    let table = (0..TABLE_LEN).map(|_| rng.random_range(-1.0..=1.0)).collect();
    from_table(format!("bounded#{id}"), table)
}

/// Non-negative and non-increasing; the first `support` entries are random,
/// the rest repeat the last value.
pub fn random_nonneg_nonincreasing(rng: &mut ChaCha8Rng, id: usize, support: usize) -> Functional {
    let mut head: Vec<f64> = (0..support).map(|_| rng.random_range(0.0..=1.0)).collect();
    head.sort_by(|a, b| b.total_cmp(a));
    let last = *head.last().unwrap();
    head.resize(TABLE_LEN, last);
    from_table(format!("nonincreasing#{id}"), head).with_signs(Sign::NonPos, Sign::Unknown)
}

/// `G(n) = Σ_{j<n} g(j)` with random non-increasing `g >= 0`: `DG >= 0`,
/// `D²G <= 0`.
pub fn random_concave_increasing(rng: &mut ChaCha8Rng, id: usize) -> Functional {
    let mut g: Vec<f64> = (0..TABLE_LEN - 1).map(|_| rng.random_range(0.0..=1.0)).collect();
    g.sort_by(|a, b| b.total_cmp(a));
    let mut table = vec![0.0];
    for v in g {
        table.push(table.last().unwrap() + v);
    }
    from_table(format!("concave#{id}"), table).with_signs(Sign::NonNeg, Sign::NonPos)
}

/// `-G` for a concave increasing `G`, shifted up: `DF <= 0`, `D²F >= 0`.
pub fn random_convex_decreasing(rng: &mut ChaCha8Rng, id: usize) -> Functional {
    let g = random_concave_increasing(rng, id);
    Functional::combine(-1.0, &g, 0.0, &g).with_label(format!("convex#{id}"))
}

/// Random bounded functional on two atoms with values in `[-1, 1]`.
pub fn random_bounded_2d(rng: &mut ChaCha8Rng, id: usize, side: usize) -> Functional {
    let table: Vec<f64> = (0..side * side).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Functional::new(format!("bounded2d#{id}"), move |c| {
        let i = (c[0] as usize).min(side - 1);
        let j = (c[1] as usize).min(side - 1);
        table[i * side + j]
    })
    .with_bound(1.0)
}
