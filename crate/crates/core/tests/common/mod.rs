#![allow(dead_code)]

use fixlab::exact::{ratio, Rat};
use fixlab::l1::{L1Function, MeasureSpace};
use proptest::prelude::*;

pub fn rat_in(lo: i64, hi: i64, den: i64) -> impl Strategy<Value = Rat> {
    (lo * den..=hi * den).prop_map(move |n| ratio(n, den))
}

/// A rational in `[0, 1]` with a denominator drawn from a small range.
pub fn unit_rat() -> impl Strategy<Value = Rat> {
    (1i64..=60).prop_flat_map(|den| (0..=den).prop_map(move |n| ratio(n, den)))
}

pub fn func(n: usize) -> impl Strategy<Value = L1Function> {
    prop::collection::vec(rat_in(-3, 3, 40), n).prop_map(L1Function::new)
}

pub fn unit_func(n: usize) -> impl Strategy<Value = L1Function> {
    prop::collection::vec(unit_rat(), n).prop_map(L1Function::new)
}

pub fn weighted_space(n: usize) -> impl Strategy<Value = MeasureSpace> {
    prop::collection::vec((1i64..=8, 1i64..=4), n).prop_map(|ws| {
        MeasureSpace::from_weights(ws.into_iter().map(|(a, b)| ratio(a, b)).collect()).unwrap()
    })
}

/// A space of 1..=max atoms together with two functions on it.
pub fn space_and_pair(max: usize) -> impl Strategy<Value = (MeasureSpace, L1Function, L1Function)> {
    (1..=max).prop_flat_map(|n| (weighted_space(n), func(n), func(n)))
}

/// A partition of `0..n` into blocks, given as a block label per atom.
pub fn partition(n: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(0..n, n).prop_map(move |labels| {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut seen: Vec<usize> = Vec::new();
        for (atom, label) in labels.into_iter().enumerate() {
            match seen.iter().position(|&l| l == label) {
                Some(b) => blocks[b].push(atom),
                None => {
                    seen.push(label);
                    blocks.push(vec![atom]);
                }
            }
        }
        blocks
    })
}
