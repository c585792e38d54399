//! Discrete measures: weighted point clouds standing in for μ and for test
//! measures ν, together with the geometric queries the potentials need.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CzError, Result};
use crate::index::GridIndex;
use crate::kernels::MAX_DIM;
use crate::sum::{block_argmax, block_sum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Cloud,
    Disk,
    Box,
    Segment,
    Cantor4,
    File,
}

/// Non-negative weighted point cloud in ℝ^d.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicMeasure {
    d: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    /// Characteristic inter-atom spacing; 0 for arbitrary clouds.
    pub resolution_h: f64,
    pub provenance: Provenance,
}

/// Real-weighted point cloud; used for test measures ν.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedAtomicMeasure {
    d: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    pub resolution_h: f64,
}

/// Constructor descriptors for the canonical example measures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MeasureDescriptor {
    /// Cell-centre quadrature of area measure on a planar disk.
    Disk { center: [f64; 2], radius: f64, h: f64 },
    /// Cell-centre quadrature of Lebesgue measure on an axis-parallel box.
    Box { center: Vec<f64>, half_widths: Vec<f64>, h: f64 },
    /// Arc length on `[a, b] × {0}` in ℝ², atoms at `a, a + h, ..., b − h`.
    Segment { a: f64, b: f64, h: f64 },
    /// Four-corner Cantor construction in the unit square.
    Cantor4 { level: u32 },
    Cloud { d: usize, coords: Vec<f64>, weights: Vec<f64> },
    File { path: String },
}

fn check_dim(d: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&d) {
        Ok(())
    } else {
        Err(CzError::argument(format!("dimension must be in 1..={MAX_DIM}, got {d}")))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CzError::argument(format!("{name} must be positive, got {v}")))
    }
}

/// Build one of the canonical measures.
pub fn make_measure(desc: &MeasureDescriptor) -> Result<AtomicMeasure> {
    match desc {
        MeasureDescriptor::Disk { center, radius, h } => {
            check_positive("radius", *radius)?;
            check_positive("h", *h)?;
            let n = (radius / h).ceil() as i64;
            let r2 = radius * radius;
            let mut coords = Vec::new();
            for i in -n..=n {
                for j in -n..=n {
                    let (u, v) = (i as f64 * h, j as f64 * h);
                    if u * u + v * v < r2 {
                        coords.push(center[0] + u);
                        coords.push(center[1] + v);
                    }
                }
            }
            let weights = vec![h * h; coords.len() / 2];
            Ok(AtomicMeasure {
                d: 2,
                coords,
                weights,
                resolution_h: *h,
                provenance: Provenance::Disk,
            })
        }
        MeasureDescriptor::Box { center, half_widths, h } => {
            let d = center.len();
            check_dim(d)?;
            check_positive("h", *h)?;
            if half_widths.len() != d {
                return Err(CzError::argument("box half-widths must match the centre's dimension"));
            }
            for &w in half_widths {
                check_positive("half-width", w)?;
            }
            let n: Vec<i64> = half_widths.iter().map(|w| (w / h).ceil() as i64).collect();
            let mut coords = Vec::new();
            let mut idx: Vec<i64> = n.iter().map(|k| -k).collect();
            'outer: loop {
                let offs: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
                if offs.iter().zip(half_widths).all(|(o, w)| o.abs() < *w) {
                    coords.extend(offs.iter().zip(center).map(|(o, c)| c + o));
                }
                for k in 0..d {
                    idx[k] += 1;
                    if idx[k] <= n[k] {
                        continue 'outer;
                    }
                    idx[k] = -n[k];
                }
                break;
            }
            let weights = vec![h.powi(d as i32); coords.len() / d];
            Ok(AtomicMeasure {
                d,
                coords,
                weights,
                resolution_h: *h,
                provenance: Provenance::Box,
            })
        }
        MeasureDescriptor::Segment { a, b, h } => {
            check_positive("h", *h)?;
            if !(b > a) {
                return Err(CzError::argument("segment needs a < b"));
            }
            let n = ((b - a) / h).round().max(1.0) as usize;
            let step = (b - a) / n as f64;
            let coords = (0..n).flat_map(|k| [a + k as f64 * step, 0.0]).collect();
            Ok(AtomicMeasure {
                d: 2,
                coords,
                weights: vec![step; n],
                resolution_h: step,
                provenance: Provenance::Segment,
            })
        }
        MeasureDescriptor::Cantor4 { level } => {
            if *level > 10 {
                return Err(CzError::argument("cantor4 level above 10 is not supported"));
            }
            let mut corners = vec![[0.0f64, 0.0f64]];
            let mut side = 1.0f64;
            for _ in 0..*level {
                let child = side / 4.0;
                let shift = side - child;
                corners = corners
                    .iter()
                    .flat_map(|c| {
                        [
                            [c[0], c[1]],
                            [c[0] + shift, c[1]],
                            [c[0], c[1] + shift],
                            [c[0] + shift, c[1] + shift],
                        ]
                    })
                    .collect();
                side = child;
            }
            let w = 1.0 / corners.len() as f64;
            let coords = corners.iter().flat_map(|c| [c[0] + side / 2.0, c[1] + side / 2.0]).collect();
            Ok(AtomicMeasure {
                d: 2,
                coords,
                weights: vec![w; corners.len()],
                resolution_h: side,
                provenance: Provenance::Cantor4,
            })
        }
        MeasureDescriptor::Cloud { d, coords, weights } => {
            let mut m = AtomicMeasure::from_atoms(*d, coords.clone(), weights.clone())?;
            m.provenance = Provenance::Cloud;
            Ok(m)
        }
        MeasureDescriptor::File { path } => AtomicMeasure::read_csv(path),
    }
}

fn parse_csv(text: &str) -> Result<(usize, f64, Vec<f64>, Vec<f64>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| CzError::parse(1, "missing header 'd=<n>'"))?;
    let mut d = None;
    let mut h = 0.0;
    for field in header.split(',') {
        let (k, v) = field
            .split_once('=')
            .ok_or_else(|| CzError::parse(hline, format!("header field '{field}' is not key=value")))?;
        match k.trim() {
            "d" => {
                d = Some(v.trim().parse::<usize>().map_err(|e| CzError::parse(hline, e.to_string()))?)
            }
            "h" => h = v.trim().parse::<f64>().map_err(|e| CzError::parse(hline, e.to_string()))?,
            other => return Err(CzError::parse(hline, format!("unknown header key '{other}'"))),
        }
    }
    let d = d.ok_or_else(|| CzError::parse(hline, "header lacks d=<n>"))?;
    if !(1..=MAX_DIM).contains(&d) {
        return Err(CzError::parse(hline, format!("dimension must be in 1..={MAX_DIM}")));
    }
    if !(h >= 0.0 && h.is_finite()) {
        return Err(CzError::parse(hline, "resolution h must be finite and non-negative"));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for (ln, line) in lines {
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CzError::parse(ln, e.to_string()))?;
        if vals.len() != d + 1 {
            return Err(CzError::parse(ln, format!("expected {} fields, found {}", d + 1, vals.len())));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(CzError::parse(ln, "non-finite value"));
        }
        coords.extend_from_slice(&vals[..d]);
        weights.push(vals[d]);
    }
    Ok((d, h, coords, weights))
}

fn write_csv(d: usize, h: f64, coords: &[f64], weights: &[f64]) -> String {
    let mut out = format!("d={d}");
    if h > 0.0 {
        let _ = write!(out, ",h={h}");
    }
    out.push('\n');
    for (p, w) in coords.chunks_exact(d).zip(weights) {
        for c in p {
            let _ = write!(out, "{c},");
        }
        let _ = writeln!(out, "{w}");
    }
    out
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

macro_rules! point_cloud_accessors {
    () => {
        pub fn dim(&self) -> usize {
            self.d
        }

        pub fn len(&self) -> usize {
            self.weights.len()
        }

        pub fn is_empty(&self) -> bool {
            self.weights.is_empty()
        }

        pub fn point(&self, i: usize) -> &[f64] {
            &self.coords[i * self.d..(i + 1) * self.d]
        }

        pub fn weight(&self, i: usize) -> f64 {
            self.weights[i]
        }

        pub fn weights(&self) -> &[f64] {
            &self.weights
        }

        pub fn coords(&self) -> &[f64] {
            &self.coords
        }

        pub fn points(&self) -> impl Iterator<Item = &[f64]> {
            self.coords.chunks_exact(self.d)
        }

        /// Index of an atom located exactly at `x`, if any.
        pub fn atom_at(&self, x: &[f64]) -> Option<usize> {
            self.points().position(|p| p == x)
        }

        pub fn to_csv_string(&self) -> String {
            write_csv(self.d, self.resolution_h, &self.coords, &self.weights)
        }

        pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
            std::fs::write(path, self.to_csv_string())?;
            Ok(())
        }
    };
}

impl AtomicMeasure {
    point_cloud_accessors!();

    pub fn from_atoms(d: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_dim(d)?;
        if coords.len() != d * weights.len() {
            return Err(CzError::argument("coordinate count does not match weights"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(CzError::argument("weights must be finite and non-negative"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(CzError::argument("coordinates must be finite"));
        }
        Ok(AtomicMeasure {
            d,
            coords,
            weights,
            resolution_h: 0.0,
            provenance: Provenance::Cloud,
        })
    }

    /// The zero measure in ℝ^d.
    pub fn empty(d: usize) -> Self {
        AtomicMeasure {
            d,
            coords: Vec::new(),
            weights: Vec::new(),
            resolution_h: 0.0,
            provenance: Provenance::Cloud,
        }
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let (d, h, coords, weights) = parse_csv(text)?;
        if let Some(i) = weights.iter().position(|w| *w < 0.0) {
            return Err(CzError::parse(0, format!("atom {i} has a negative weight")));
        }
        Ok(AtomicMeasure {
            d,
            coords,
            weights,
            resolution_h: h,
            provenance: Provenance::File,
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn total_mass(&self) -> f64 {
        block_sum(0.0, self.len(), |i| self.weights[i])
    }

    /// μ(B(x, r)) for the open ball.
    pub fn ball_mass(&self, x: &[f64], r: f64) -> f64 {
        let r2 = r * r;
        block_sum(0.0, self.len(), |i| {
            if dist2(self.point(i), x) < r2 {
                self.weights[i]
            } else {
                0.0
            }
        })
    }

    /// Weighted centroid; the origin for the zero measure.
    pub fn centroid(&self) -> Vec<f64> {
        let m = self.total_mass();
        (0..self.d)
            .map(|k| {
                if m > 0.0 {
                    block_sum(0.0, self.len(), |i| self.coords[i * self.d + k] * self.weights[i]) / m
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Diagonal of the bounding box: an upper bound for the diameter.
    pub fn diameter_bound(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (0..self.d)
            .map(|k| {
                let (lo, hi) = self
                    .points()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[k]), hi.max(p[k])));
                (hi - lo).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn index(&self, cell: f64) -> GridIndex {
        GridIndex::build(self.d, &self.coords, cell)
    }

    pub fn to_signed(&self) -> SignedAtomicMeasure {
        SignedAtomicMeasure {
            d: self.d,
            coords: self.coords.clone(),
            weights: self.weights.clone(),
            resolution_h: self.resolution_h,
        }
    }

    /// The signed measure `f·μ`.
    pub fn weighted_by(&self, f: impl Fn(&[f64]) -> f64) -> SignedAtomicMeasure {
        SignedAtomicMeasure {
            d: self.d,
            coords: self.coords.clone(),
            weights: self.points().zip(&self.weights).map(|(p, w)| f(p) * w).collect(),
            resolution_h: self.resolution_h,
        }
    }

    /// μ_{x,r} = μ(x + r·)/r^s: atoms `a ↦ (a − x)/r`, weights `w ↦ w/r^s`.
    pub fn rescale(&self, x: &[f64], r: f64, s: f64) -> Result<Self> {
        check_positive("scale r", r)?;
        if x.len() != self.d {
            return Err(CzError::argument("centre dimension mismatch"));
        }
        let rs = r.powf(s);
        Ok(AtomicMeasure {
            d: self.d,
            coords: self
                .coords
                .chunks_exact(self.d)
                .flat_map(|p| p.iter().zip(x).map(|(a, c)| (a - c) / r).collect::<Vec<_>>())
                .collect(),
            weights: self.weights.iter().map(|w| w / rs).collect(),
            resolution_h: self.resolution_h / r,
            provenance: self.provenance,
        })
    }

    /// Empirical Λ over the scale window `[r_min, r_max]`.
    pub fn niceness(&self, s: f64, window: [f64; 2], plan: &ProbePlan) -> Result<NicenessReport> {
        let [r_min, r_max] = window;
        if !(r_min > 0.0) || !(r_max > r_min) {
            return Err(CzError::argument("scale window must satisfy 0 < r_min < r_max"));
        }
        if r_min < self.resolution_h {
            return Err(CzError::precondition(format!(
                "r_min = {r_min} is below the quadrature pitch {}; the atomic measure \
                 says nothing about Λ at scales finer than its spacing",
                self.resolution_h
            )));
        }
        let centers = plan.centers(self);
        let best = block_argmax(centers.len(), |c| self.best_ratio_at(&centers[c], s, r_min, r_max).0);
        let (ci, lambda_hat) = best.unwrap_or((0, 0.0));
        let (_, radius, point_mass) = if centers.is_empty() {
            (0.0, r_min, false)
        } else {
            self.best_ratio_at(&centers[ci], s, r_min, r_max)
        };
        Ok(NicenessReport {
            lambda_hat,
            argmax_center: centers.get(ci).cloned().unwrap_or_else(|| vec![0.0; self.d]),
            argmax_radius: radius,
            scale_window: window,
            unbounded: self.resolution_h == 0.0 && point_mass && radius == r_min,
            centers_probed: centers.len(),
        })
    }

    /// Supremum of μ(B(x,r))/r^s over the window at one centre. Mass jumps
    /// at each atom distance, so the supremum is a limit from the right at
    /// some atom distance, or sits at `r_min`.
    fn best_ratio_at(&self, x: &[f64], s: f64, r_min: f64, r_max: f64) -> (f64, f64, bool) {
        let mut near: Vec<(f64, f64)> = self
            .points()
            .zip(&self.weights)
            .filter_map(|(p, &w)| {
                let dd = dist2(p, x).sqrt();
                (dd < r_max).then_some((dd, w))
            })
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut mass = 0.0;
        let mut k = 0;
        while k < near.len() && near[k].0 < r_min {
            mass += near[k].1;
            k += 1;
        }
        let point_mass = near.first().is_some_and(|a| a.0 == 0.0 && a.1 > 0.0);
        let mut best = (mass / r_min.powf(s), r_min);
        while k < near.len() {
            let r = near[k].0;
            while k < near.len() && near[k].0 == r {
                mass += near[k].1;
                k += 1;
            }
            let q = mass / r.powf(s);
            if q > best.0 {
                best = (q, r);
            }
        }
        (best.0, best.1, point_mass)
    }

    /// `ΣΣ w_x w_y |x−y|^{1−s}` over ordered pairs of distinct atoms in
    /// `B(0,R)` closer than `r`. Coincident atoms count as diagonal.
    pub fn diffuseness_integral(&self, s: f64, big_r: f64, r: f64) -> Result<f64> {
        check_positive("proximity r", r)?;
        let inside: Vec<usize> = (0..self.len())
            .filter(|&i| self.point(i).iter().map(|c| c * c).sum::<f64>() < big_r * big_r)
            .collect();
        let sub = AtomicMeasure {
            d: self.d,
            coords: inside.iter().flat_map(|&i| self.point(i).to_vec()).collect(),
            weights: inside.iter().map(|&i| self.weights[i]).collect(),
            resolution_h: self.resolution_h,
            provenance: self.provenance,
        };
        let idx = sub.index(r);
        let r2 = r * r;
        let e = 0.5 * (1.0 - s);
        Ok(block_sum(0.0, sub.len(), |i| {
            let p = sub.point(i);
            let mut acc = 0.0;
            let visit = |j: usize, acc: &mut f64| {
                let dd = dist2(p, sub.point(j));
                if j != i && dd > 0.0 && dd < r2 {
                    *acc += sub.weights[j] * if e == 0.0 { 1.0 } else { dd.powf(e) };
                }
            };
            if !idx.visit_candidates(p, r, 4096, |j| visit(j, &mut acc)) {
                for j in 0..sub.len() {
                    visit(j, &mut acc);
                }
            }
            sub.weights[i] * acc
        }))
    }

    /// `Σ_{|a| ≥ R} w |a|^{−s−α}`.
    pub fn tail_growth(&self, s: f64, alpha: f64, big_r: f64) -> Result<f64> {
        check_positive("R", big_r)?;
        Ok(block_sum(0.0, self.len(), |i| {
            let n = self.point(i).iter().map(|c| c * c).sum::<f64>().sqrt();
            if n >= big_r {
                self.weights[i] * n.powf(-s - alpha)
            } else {
                0.0
            }
        }))
    }
}

impl SignedAtomicMeasure {
    point_cloud_accessors!();

    pub fn from_atoms(d: usize, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_dim(d)?;
        if coords.len() != d * weights.len() {
            return Err(CzError::argument("coordinate count does not match weights"));
        }
        if weights.iter().chain(&coords).any(|v| !v.is_finite()) {
            return Err(CzError::argument("atoms must be finite"));
        }
        Ok(SignedAtomicMeasure {
            d,
            coords,
            weights,
            resolution_h: 0.0,
        })
    }

    /// Unit point mass at `x`.
    pub fn dirac(x: &[f64]) -> Self {
        SignedAtomicMeasure {
            d: x.len(),
            coords: x.to_vec(),
            weights: vec![1.0],
            resolution_h: 0.0,
        }
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let (d, h, coords, weights) = parse_csv(text)?;
        Ok(SignedAtomicMeasure {
            d,
            coords,
            weights,
            resolution_h: h,
        })
    }

    pub fn total(&self) -> f64 {
        block_sum(0.0, self.len(), |i| self.weights[i])
    }

    pub fn total_variation(&self) -> f64 {
        block_sum(0.0, self.len(), |i| self.weights[i].abs())
    }

    /// ν(ℝ^d) = 0 up to round-off relative to the total variation.
    pub fn balanced(&self) -> bool {
        self.total().abs() <= 1e-12 * self.total_variation()
    }

    /// `self + c·other`, concatenating atoms.
    pub fn plus_scaled(&self, c: f64, other: &SignedAtomicMeasure) -> Self {
        let mut out = self.clone();
        out.coords.extend_from_slice(&other.coords);
        out.weights.extend(other.weights.iter().map(|w| c * w));
        out
    }

    pub fn rescale(&self, x: &[f64], r: f64, s: f64) -> Result<Self> {
        check_positive("scale r", r)?;
        let rs = r.powf(s);
        Ok(SignedAtomicMeasure {
            d: self.d,
            coords: self
                .coords
                .chunks_exact(self.d)
                .flat_map(|p| p.iter().zip(x).map(|(a, c)| (a - c) / r).collect::<Vec<_>>())
                .collect(),
            weights: self.weights.iter().map(|w| w / rs).collect(),
            resolution_h: self.resolution_h / r,
        })
    }
}

/// Which centres a niceness probe visits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbePlan {
    /// Above this many atoms, centres are a fixed-stride subsample.
    pub cap: usize,
    pub include_centroid: bool,
    pub extra_centers: Vec<Vec<f64>>,
}

impl Default for ProbePlan {
    fn default() -> Self {
        ProbePlan {
            cap: 10_000,
            include_centroid: true,
            extra_centers: Vec::new(),
        }
    }
}

impl ProbePlan {
    pub fn centers(&self, mu: &AtomicMeasure) -> Vec<Vec<f64>> {
        let stride = mu.len().div_ceil(self.cap.max(1)).max(1);
        let mut out: Vec<Vec<f64>> = Vec::new();
        if self.include_centroid && !mu.is_empty() {
            out.push(mu.centroid());
        }
        out.extend(self.extra_centers.iter().cloned());
        out.extend((0..mu.len()).step_by(stride).map(|i| mu.point(i).to_vec()));
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NicenessReport {
    pub lambda_hat: f64,
    pub argmax_center: Vec<f64>,
    pub argmax_radius: f64,
    pub scale_window: [f64; 2],
    /// The maximum comes from a point mass at the lower window edge, so the
    /// ratio diverges as `r_min → 0`.
    pub unbounded: bool,
    pub centers_probed: usize,
}
