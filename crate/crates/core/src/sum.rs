//! Deterministic reductions.
//!
//! Every sum in the crate goes through [`block_sum`]: the index range is cut
//! into fixed-size blocks, each block is accumulated sequentially with
//! Neumaier compensation, and block partials are merged by a fixed binary
//! tree. Block boundaries never depend on the thread count, so results are
//! bitwise identical whether rayon runs on one thread or many.

use std::ops::Range;

use rayon::prelude::*;

use crate::value::CVec;

/// Number of outer indices per block.
pub const BLOCK: usize = 256;

/// A value that can be accumulated by the deterministic reducers.
pub trait Summand: Copy + Send + Sync {
    fn zero_like(&self) -> Self;
    fn plus(self, other: Self) -> Self;
    fn compensated_add(sum: &mut Self, comp: &mut Self, v: Self);
}

impl Summand for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }

    fn plus(self, other: Self) -> Self {
        self + other
    }

    #[inline]
    fn compensated_add(sum: &mut f64, comp: &mut f64, v: f64) {
        let t = *sum + v;
        if sum.abs() >= v.abs() {
            *comp += (*sum - t) + v;
        } else {
            *comp += (v - t) + *sum;
        }
        *sum = t;
    }
}

impl Summand for CVec {
    fn zero_like(&self) -> Self {
        CVec::zeros(self.components())
    }

    fn plus(self, other: Self) -> Self {
        self + other
    }

    #[inline]
    fn compensated_add(sum: &mut CVec, comp: &mut CVec, v: CVec) {
        CVec::neumaier_add(sum, comp, v)
    }
}

/// Sequential compensated accumulator.
#[derive(Clone, Copy, Debug)]
pub struct Accumulator<T: Summand> {
    sum: T,
    comp: T,
}

impl<T: Summand> Accumulator<T> {
    pub fn new(zero: T) -> Self {
        Accumulator {
            sum: zero,
            comp: zero,
        }
    }

    #[inline]
    pub fn add(&mut self, v: T) {
        T::compensated_add(&mut self.sum, &mut self.comp, v);
    }

    pub fn value(&self) -> T {
        self.sum.plus(self.comp)
    }
}

/// Merge partials with a fixed pairwise tree.
pub fn tree_sum<T: Summand>(zero: T, parts: &[T]) -> T {
    match parts.len() {
        0 => zero,
        1 => parts[0],
        n => {
            let mid = n / 2;
            tree_sum(zero, &parts[..mid]).plus(tree_sum(zero, &parts[mid..]))
        }
    }
}

/// Sum `term(i)` over `0..n` in fixed blocks.
pub fn block_sum<T, F>(zero: T, n: usize, term: F) -> T
where
    T: Summand,
    F: Fn(usize) -> T + Sync,
{
    block_reduce(zero, n, |range| {
        let mut acc = Accumulator::new(zero);
        for i in range {
            acc.add(term(i));
        }
        acc.value()
    })
}

/// Reduce `0..n` by evaluating `block(range)` on each fixed-size block.
pub fn block_reduce<T, F>(zero: T, n: usize, block: F) -> T
where
    T: Summand,
    F: Fn(Range<usize>) -> T + Sync,
{
    let nblocks = n.div_ceil(BLOCK);
    let parts: Vec<T> = (0..nblocks)
        .into_par_iter()
        .map(|b| block(b * BLOCK..((b + 1) * BLOCK).min(n)))
        .collect();
    tree_sum(zero, &parts)
}

/// Deterministic maximum of `f(i)` over `0..n`; first index wins ties.
pub fn block_argmax<F>(n: usize, f: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> f64 + Sync,
{
    let nblocks = n.div_ceil(BLOCK);
    let parts: Vec<Option<(usize, f64)>> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let mut best: Option<(usize, f64)> = None;
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let v = f(i);
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((i, v));
                }
            }
            best
        })
        .collect();
    parts
        .into_iter()
        .flatten()
        .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
}
