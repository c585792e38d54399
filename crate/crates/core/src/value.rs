//! Fixed-capacity vectors in ℂ^{d′}, stored as interleaved real lanes.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// Largest supported number of real lanes (three complex components).
pub const MAX_LANES: usize = 6;

/// A vector in ℂ^{d′} laid out as `[re_1, im_1, re_2, im_2, ...]`.
///
/// Lanes past `len` are always zero, so arithmetic runs over the full array
/// without branching on the length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CVec {
    lanes: [f64; MAX_LANES],
    len: u8,
}

impl CVec {
    /// Zero vector with `components` complex entries.
    pub fn zeros(components: usize) -> Self {
        assert!(2 * components <= MAX_LANES, "too many components");
        CVec {
            lanes: [0.0; MAX_LANES],
            len: (2 * components) as u8,
        }
    }

    pub fn from_complex(re: f64, im: f64) -> Self {
        let mut v = CVec::zeros(1);
        v.lanes[0] = re;
        v.lanes[1] = im;
        v
    }

    /// Real vector embedded as the real parts.
    pub fn from_real(xs: &[f64]) -> Self {
        let mut v = CVec::zeros(xs.len());
        for (k, &x) in xs.iter().enumerate() {
            v.lanes[2 * k] = x;
        }
        v
    }

    pub fn from_lanes(lanes: &[f64]) -> Self {
        assert!(lanes.len().is_multiple_of(2) && lanes.len() <= MAX_LANES);
        let mut v = CVec::zeros(lanes.len() / 2);
        v.lanes[..lanes.len()].copy_from_slice(lanes);
        v
    }

    /// Number of complex components d′.
    pub fn components(&self) -> usize {
        self.len as usize / 2
    }

    pub fn lanes(&self) -> &[f64] {
        &self.lanes[..self.len as usize]
    }

    pub fn re(&self, k: usize) -> f64 {
        self.lanes[2 * k]
    }

    pub fn im(&self, k: usize) -> f64 {
        self.lanes[2 * k + 1]
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.lanes.iter().map(|x| x * x).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.lanes.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.lanes.iter().all(|&x| x == 0.0)
    }

    pub fn scale(self, c: f64) -> Self {
        self * c
    }

    /// Bilinear pairing `Σ e_k v_k` (no conjugation), returned as (re, im).
    pub fn dot(&self, e: &CVec) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for k in 0..self.components().min(e.components()) {
            let (a, b) = (self.re(k), self.im(k));
            let (c, d) = (e.re(k), e.im(k));
            re += a * c - b * d;
            im += a * d + b * c;
        }
        (re, im)
    }

    /// Neumaier compensated accumulation, lane by lane.
    #[inline]
    pub fn neumaier_add(sum: &mut CVec, comp: &mut CVec, v: CVec) {
        for k in 0..MAX_LANES {
            let s = sum.lanes[k];
            let x = v.lanes[k];
            let t = s + x;
            if s.abs() >= x.abs() {
                comp.lanes[k] += (s - t) + x;
            } else {
                comp.lanes[k] += (x - t) + s;
            }
            sum.lanes[k] = t;
        }
        sum.len = sum.len.max(v.len);
        comp.len = sum.len;
    }
}

impl Add for CVec {
    type Output = CVec;
    #[inline]
    fn add(mut self, o: CVec) -> CVec {
        for k in 0..MAX_LANES {
            self.lanes[k] += o.lanes[k];
        }
        self.len = self.len.max(o.len);
        self
    }
}

impl AddAssign for CVec {
    #[inline]
    fn add_assign(&mut self, o: CVec) {
        *self = *self + o;
    }
}

impl Sub for CVec {
    type Output = CVec;
    #[inline]
    fn sub(mut self, o: CVec) -> CVec {
        for k in 0..MAX_LANES {
            self.lanes[k] -= o.lanes[k];
        }
        self.len = self.len.max(o.len);
        self
    }
}

impl SubAssign for CVec {
    #[inline]
    fn sub_assign(&mut self, o: CVec) {
        *self = *self - o;
    }
}

impl Neg for CVec {
    type Output = CVec;
    #[inline]
    fn neg(mut self) -> CVec {
        for x in self.lanes.iter_mut() {
            *x = -*x;
        }
        self
    }
}

impl Mul<f64> for CVec {
    type Output = CVec;
    #[inline]
    fn mul(mut self, c: f64) -> CVec {
        for x in self.lanes.iter_mut() {
            *x *= c;
        }
        self
    }
}

impl Serialize for CVec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.lanes().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CVec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<f64> = Vec::deserialize(d)?;
        if !v.len().is_multiple_of(2) || v.len() > MAX_LANES {
            return Err(serde::de::Error::custom("bad lane count"));
        }
        Ok(CVec::from_lanes(&v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_dot_multiplies() {
        let v = CVec::from_complex(1.0, 2.0);
        let e = CVec::from_complex(0.0, 1.0);
        assert_eq!(v.dot(&e), (-2.0, 1.0));
    }

    #[test]
    fn negation_is_exact() {
        let v = CVec::from_lanes(&[0.1, -3.5, 7.25, 1e-300]);
        assert_eq!((v + (-v)).lanes(), &[0.0; 4]);
    }
}
