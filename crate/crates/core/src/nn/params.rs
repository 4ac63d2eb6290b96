//! Flat parameter vectors and their on-disk encodings.
//!
//! The binary blob is `b"AEROFDV1"`, a little-endian `u32` element count, then
//! that many little-endian `f64` values. The text form is one value per line.

use std::fmt::Write as _;
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

pub const BLOB_MAGIC: &[u8; 8] = b"AEROFDV1";

/// Flat real-valued parameter array.
///
/// Layout for an MLP is layer-major: for each layer the row-major
/// `(out, in)` weight matrix followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        ParamVector(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the first non-finite component, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|v| !v.is_finite())
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l2_distance(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, c: f64) -> ParamVector {
        ParamVector(self.0.iter().map(|v| v * c).collect())
    }

    pub fn to_blob(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.0.len());
        out.extend_from_slice(BLOB_MAGIC);
        out.extend_from_slice(&(self.0.len() as u32).to_le_bytes());
        for v in &self.0 {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != BLOB_MAGIC {
            return Err(Error::Format("missing AEROFDV1 magic".into()));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() != len * 8 {
            return Err(Error::Format(format!(
                "blob declares {len} values but carries {} bytes",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ParamVector(values))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.0.len() * 20);
        for v in &self.0 {
            let _ = writeln!(s, "{v:e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| {
                l.parse::<f64>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()
            .map(ParamVector)
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

/// `tau * source + (1 - tau) * target`, elementwise.
pub fn soft_update(target: &ParamVector, source: &ParamVector, tau: f64) -> Result<ParamVector> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::config(format!("soft update tau {tau} outside [0, 1]")));
    }
    if target.len() != source.len() {
        return Err(Error::shape("soft_update", target.len(), source.len()));
    }
    // endpoints are exact so tau = 0 / 1 return bit-identical copies
    if tau == 0.0 {
        return Ok(target.clone());
    }
    if tau == 1.0 {
        return Ok(source.clone());
    }
    Ok(target
        .iter()
        .zip(source.iter())
        .map(|(t, s)| tau * s + (1.0 - tau) * t)
        .collect::<Vec<_>>()
        .into())
}

/// Fixed-target-network refresh: copy `source` whenever `step` is a multiple of `c`.
pub fn hard_copy_every_c(step: u64, c: u64, target: &ParamVector, source: &ParamVector) -> ParamVector {
    let c = c.max(1);
    if step % c == 0 {
        source.clone()
    } else {
        target.clone()
    }
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let k = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= k);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn soft_update_endpoints_and_midpoint() {
        let t = ParamVector::new(vec![0.0, 1.5]);
        let s = ParamVector::new(vec![2.0, -3.0]);
        assert_eq!(soft_update(&t, &s, 1.0).unwrap(), s);
        assert_eq!(soft_update(&t, &s, 0.0).unwrap(), t);
        let mid = soft_update(&ParamVector::new(vec![0.0]), &ParamVector::new(vec![2.0]), 0.5).unwrap();
        assert_eq!(mid[0], 1.0);
    }

    #[test]
    fn soft_update_rejects_bad_tau() {
        let t = ParamVector::zeros(2);
        assert!(matches!(soft_update(&t, &t, 1.5), Err(Error::Config(_))));
        assert!(matches!(soft_update(&t, &t, -0.1), Err(Error::Config(_))));
        assert!(matches!(
            soft_update(&t, &ParamVector::zeros(3), 0.5),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn hard_copy_schedule() {
        let t = ParamVector::new(vec![0.0]);
        let s = ParamVector::new(vec![1.0]);
        assert_eq!(hard_copy_every_c(0, 5, &t, &s), s);
        assert_eq!(hard_copy_every_c(3, 5, &t, &s), t);
        let copies = (0..10)
            .filter(|&step| hard_copy_every_c(step, 5, &t, &s) == s)
            .count();
        assert_eq!(copies, 2);
    }

    #[test]
    fn blob_layout() {
        let p = ParamVector::new(vec![1.0, -2.5]);
        let blob = p.to_blob();
        assert_eq!(&blob[..8], b"AEROFDV1");
        assert_eq!(&blob[8..12], &2u32.to_le_bytes());
        assert_eq!(&blob[12..20], &1.0f64.to_le_bytes());
        assert_eq!(blob.len(), 28);
        assert!(ParamVector::from_blob(&blob[..27]).is_err());
        assert!(ParamVector::from_blob(b"NOTMAGIC\0\0\0\0").is_err());
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![30.0, 40.0];
        let before = clip_global_norm(&mut g, 10.0);
        assert_eq!(before, 50.0);
        assert!((g[0] - 6.0).abs() < 1e-12 && (g[1] - 8.0).abs() < 1e-12);
        let mut small = vec![1.0, 1.0];
        clip_global_norm(&mut small, 10.0);
        assert_eq!(small, vec![1.0, 1.0]);
    }

    proptest! {
        #[test]
        fn blob_and_text_round_trip(values in prop::collection::vec(-1e6f64..1e6, 0..64)) {
            let p = ParamVector::new(values);
            prop_assert_eq!(ParamVector::from_blob(&p.to_blob()).unwrap(), p.clone());
            prop_assert_eq!(ParamVector::from_text(&p.to_text()).unwrap(), p);
        }

        #[test]
        fn soft_update_is_convex(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..32),
            tau in 0.0f64..=1.0,
        ) {
            let t = ParamVector::new(pairs.iter().map(|p| p.0).collect());
            let s = ParamVector::new(pairs.iter().map(|p| p.1).collect());
            let r = soft_update(&t, &s, tau).unwrap();
            for i in 0..r.len() {
                let lo = t[i].min(s[i]);
                let hi = t[i].max(s[i]);
                prop_assert!(r[i] >= lo - 1e-12 * lo.abs().max(1.0));
                prop_assert!(r[i] <= hi + 1e-12 * hi.abs().max(1.0));
            }
        }
    }
}
