//! Uniform-grid bucketing of atom locations for ball queries.

use std::collections::HashMap;

type Cell = [i64; 3];

#[derive(Clone, Debug)]
pub struct GridIndex {
    d: usize,
    cell: f64,
    buckets: HashMap<Cell, Vec<u32>>,
}

impl GridIndex {
    /// Bucket `coords` (flat, `d` per point) into cubes of side `cell`.
    pub fn build(d: usize, coords: &[f64], cell: f64) -> Self {
        assert!(cell > 0.0 && d <= 3);
        let mut buckets: HashMap<Cell, Vec<u32>> = HashMap::new();
        for (i, p) in coords.chunks_exact(d).enumerate() {
            buckets.entry(key(p, cell)).or_default().push(i as u32);
        }
        GridIndex { d, cell, buckets }
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    /// Visit every indexed atom whose cell meets the cube around `B(x, r)`.
    /// Callers apply the exact distance test. Returns `false` without
    /// visiting anything when the query would touch more than `max_cells`
    /// cells, so the caller can fall back to a linear scan.
    pub fn visit_candidates(&self, x: &[f64], r: f64, max_cells: usize, mut f: impl FnMut(usize)) -> bool {
        let lo: Vec<i64> = x.iter().map(|c| ((c - r) / self.cell).floor() as i64).collect();
        let hi: Vec<i64> = x.iter().map(|c| ((c + r) / self.cell).floor() as i64).collect();
        let count: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as f64).product();
        if count > max_cells as f64 {
            return false;
        }
        let mut cur = [0i64; 3];
        cur[..self.d].copy_from_slice(&lo);
        loop {
            if let Some(ids) = self.buckets.get(&cur) {
                for &i in ids {
                    f(i as usize);
                }
            }
            let mut k = 0;
            loop {
                if k == self.d {
                    return true;
                }
                cur[k] += 1;
                if cur[k] <= hi[k] {
                    break;
                }
                cur[k] = lo[k];
                k += 1;
            }
        }
    }
}

fn key(p: &[f64], cell: f64) -> Cell {
    let mut k = [0i64; 3];
    for (slot, c) in k.iter_mut().zip(p) {
        *slot = (c / cell).floor() as i64;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_all_points_in_ball() {
        let coords: Vec<f64> = (0..400).flat_map(|i| [(i % 20) as f64 * 0.1, (i / 20) as f64 * 0.1]).collect();
        let idx = GridIndex::build(2, &coords, 0.25);
        let x = [0.93, 1.01];
        let r = 0.31;
        let mut got = Vec::new();
        assert!(idx.visit_candidates(&x, r, 1000, |i| {
            let p = &coords[2 * i..2 * i + 2];
            if (p[0] - x[0]).hypot(p[1] - x[1]) < r {
                got.push(i)
            }
        }));
        got.sort();
        let want: Vec<usize> = (0..400)
            .filter(|&i| (coords[2 * i] - x[0]).hypot(coords[2 * i + 1] - x[1]) < r)
            .collect();
        assert_eq!(got, want);
    }
}
