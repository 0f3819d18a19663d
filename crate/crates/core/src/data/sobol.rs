//! Sobol low-discrepancy sequence (gray-code construction).
//!
//! Direction numbers for the first 100 dimensions are bundled from the
//! standard Joe–Kuo table (`d s a m_1 .. m_s` per line); dimension 1 is the
//! van der Corput sequence in base 2.

use crate::tensor::Tensor;
use crate::{Error, Result};

const BITS: usize = 32;
const TABLE: &str = include_str!("joe_kuo_100.txt");

/// Highest dimension with bundled direction numbers.
pub const MAX_DIM: usize = 100;

fn direction_numbers(dim: usize) -> Result<Vec<[u32; BITS]>> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::SobolDimension(dim));
    }
    let mut out = Vec::with_capacity(dim);
    let mut first = [0u32; BITS];
    for (k, v) in first.iter_mut().enumerate() {
        *v = 1 << (BITS - 1 - k);
    }
    out.push(first);
    for line in TABLE.lines().skip(1).take(dim - 1) {
        let f: Vec<u32> = line
            .split_whitespace()
            .map(|t| t.parse().expect("bundled table is well formed"))
            .collect();
        let (s, a) = (f[1] as usize, f[2]);
        let m = &f[3..3 + s];
        let mut v = [0u32; BITS];
        for k in 0..BITS {
            if k < s {
                v[k] = m[k] << (BITS - 1 - k);
            } else {
                let mut x = v[k - s] ^ (v[k - s] >> s);
                for j in 1..s {
                    if (a >> (s - 1 - j)) & 1 == 1 {
                        x ^= v[k - j];
                    }
                }
                v[k] = x;
            }
        }
        out.push(v);
    }
    Ok(out)
}

/// Streaming generator over `[0, 1)^dim`.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl Sobol {
    /// Generator positioned at point `0` (the origin).
    pub fn new(dim: usize) -> Result<Self> {
        Self::starting_at(dim, 0)
    }

    /// Generator whose next point is the one at `index`.
    pub fn starting_at(dim: usize, index: u64) -> Result<Self> {
        let directions = direction_numbers(dim)?;
        let gray = index ^ (index >> 1);
        let state = directions
            .iter()
            .map(|v| {
                (0..BITS)
                    .filter(|&k| (gray >> k) & 1 == 1)
                    .fold(0u32, |acc, k| acc ^ v[k])
            })
            .collect();
        Ok(Self {
            directions,
            state,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Writes the next point into `out` and advances.
    pub fn next_into(&mut self, out: &mut [f64]) {
        const SCALE: f64 = 1.0 / (1u64 << BITS) as f64;
        for (o, &s) in out.iter_mut().zip(&self.state) {
            *o = s as f64 * SCALE;
        }
        let c = self.index.trailing_ones() as usize;
        assert!(c < BITS, "sobol sequence exhausted");
        for (s, v) in self.state.iter_mut().zip(&self.directions) {
            *s ^= v[c];
        }
        self.index += 1;
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.next_into(&mut out);
        out
    }
}

/// The first `n` points after skipping `skip`, as an `n × dim` matrix.
pub fn sobol_points(dim: usize, n: usize, skip: u64) -> Result<Tensor> {
    let mut s = Sobol::starting_at(dim, skip)?;
    let mut data = vec![0.0; n * dim];
    for row in data.chunks_mut(dim) {
        s.next_into(row);
    }
    Ok(Tensor::new(n, dim, data)?)
}
