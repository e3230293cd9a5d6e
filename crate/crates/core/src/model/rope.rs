//! Rotary position encoding: pairwise 2D rotation of coordinates (2i, 2i+1)
//! by angle pos * base^(-2i / head_dim).

use alloc::vec::Vec;

use super::ModelError;
use crate::numeric::Real;

/// Precomputed cos/sin per (position, pair) for sequences up to `seq_len`.
#[derive(Debug, Clone)]
pub struct RopeTable<T> {
    pub head_dim: usize,
    cos: Vec<T>,
    sin: Vec<T>,
}

impl<T: Real> RopeTable<T> {
    pub fn new(seq_len: usize, head_dim: usize, base: f64) -> Result<Self, ModelError> {
        if head_dim % 2 != 0 {
            return Err(ModelError::OddHeadDim(head_dim));
        }
        let pairs = head_dim / 2;
        let mut cos = Vec::with_capacity(seq_len * pairs);
        let mut sin = Vec::with_capacity(seq_len * pairs);
        for pos in 0..seq_len {
            for i in 0..pairs {
                let freq = crate::numeric::f64x::powf(base, -2.0 * i as f64 / head_dim as f64);
                let angle = pos as f64 * freq;
                cos.push(T::from_f64(crate::numeric::f64x::cos(angle)));
                sin.push(T::from_f64(crate::numeric::f64x::sin(angle)));
            }
        }
        Ok(RopeTable { head_dim, cos, sin })
    }

    /// Rotates one head vector in place at `pos`.
    #[inline]
    pub fn rotate(&self, v: &mut [T], pos: usize) {
        debug_assert_eq!(v.len(), self.head_dim);
        let pairs = self.head_dim / 2;
        let (c, s) = (&self.cos[pos * pairs..], &self.sin[pos * pairs..]);
        for i in 0..pairs {
            let (x, y) = (v[2 * i], v[2 * i + 1]);
            v[2 * i] = x * c[i] - y * s[i];
            v[2 * i + 1] = x * s[i] + y * c[i];
        }
    }

    /// Inverse rotation (transpose), used to pull gradients back through the
    /// encoding.
    #[inline]
    pub fn rotate_inv(&self, v: &mut [T], pos: usize) {
        debug_assert_eq!(v.len(), self.head_dim);
        let pairs = self.head_dim / 2;
        let (c, s) = (&self.cos[pos * pairs..], &self.sin[pos * pairs..]);
        for i in 0..pairs {
            let (x, y) = (v[2 * i], v[2 * i + 1]);
            v[2 * i] = x * c[i] + y * s[i];
            v[2 * i + 1] = -x * s[i] + y * c[i];
        }
    }
}

/// One-shot rotation of a head vector (table-free convenience).
pub fn rope_rotate<T: Real>(v: &mut [T], pos: usize, base: f64) -> Result<(), ModelError> {
    let table = RopeTable::new(pos + 1, v.len(), base)?;
    table.rotate(v, pos);
    Ok(())
}

/// One-shot inverse rotation.
pub fn rope_rotate_inv<T: Real>(v: &mut [T], pos: usize, base: f64) -> Result<(), ModelError> {
    let table = RopeTable::new(pos + 1, v.len(), base)?;
    table.rotate_inv(v, pos);
    Ok(())
}
