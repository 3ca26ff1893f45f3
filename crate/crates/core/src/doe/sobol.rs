//! Sobol low-discrepancy sequence with Joe–Kuo direction numbers
//! (`new-joe-kuo-6`), generated in Gray-code order.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

include!(concat!(env!("OUT_DIR"), "/sobol_vectors.rs"));

const SCALE: f64 = 1.0 / 4_294_967_296.0;

/// Streaming Sobol generator. Index 0 (the origin) is part of the raw
/// sequence; [`SobolSequence::new`] positions the stream so the first point
/// returned is raw index `skip + 1`.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    dim: usize,
    index: u64,
    state: Vec<u32>,
}

impl SobolSequence {
    pub fn new(dim: usize, skip: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("sobol dimension must be positive".into()));
        }
        if dim > MAX_DIMENSION {
            return Err(Error::SobolDimension { requested: dim, max: MAX_DIMENSION });
        }
        if skip >= u32::MAX as u64 {
            return Err(Error::InvalidArgument("sobol skip exceeds 2^32 - 1".into()));
        }
        let mut seq = Self { dim, index: skip, state: vec![0; dim] };
        // state for raw index `skip` from its Gray code
        let gray = skip ^ (skip >> 1);
        for (d, s) in seq.state.iter_mut().enumerate() {
            let mut x = 0u32;
            for (bit, v) in DIRECTIONS[d].iter().enumerate() {
                if (gray >> bit) & 1 == 1 {
                    x ^= v;
                }
            }
            *s = x;
        }
        Ok(seq)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes the next point into `out` (length `dim`).
    pub fn next_into(&mut self, out: &mut [f64]) -> Result<()> {
        if self.index >= u32::MAX as u64 {
            return Err(Error::InvalidArgument("sobol sequence exhausted (2^32 points)".into()));
        }
        let c = self.index.trailing_ones() as usize;
        self.index += 1;
        for ((s, dirs), o) in self.state.iter_mut().zip(DIRECTIONS.iter()).zip(out.iter_mut()) {
            *s ^= dirs[c];
            *o = *s as f64 * SCALE;
        }
        Ok(())
    }
}

impl Iterator for SobolSequence {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let mut p = vec![0.0; self.dim];
        self.next_into(&mut p).ok()?;
        Some(p)
    }
}
