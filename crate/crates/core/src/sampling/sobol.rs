//! Sobol' low-discrepancy sequence in Gray-code (Antonov-Saleev) order.
//!
//! Direction numbers are the Joe-Kuo `new-joe-kuo-6.21201` set, truncated to
//! the first [`MAX_DIMS`] coordinates. Coordinate 0 is the van der Corput
//! sequence in base 2. Values carry 32 bits of resolution, so indices up to
//! `2^32 - 1` are supported.
//!
//! Element 0 of the sequence is the all-zeros point. Callers that push the
//! values through an inverse CDF should start at index 1; every element with a
//! nonzero index has all coordinates strictly inside (0, 1).

use crate::error::{Error, Result};

const BITS: usize = 32;

/// Number of coordinates covered by the bundled direction-number table.
pub const MAX_DIMS: usize = 1 + JOE_KUO.len();

// (degree s, polynomial coefficient a, initial direction numbers m_1..m_s)
// for coordinates 1.. of new-joe-kuo-6.21201.
#[rustfmt::skip]
const JOE_KUO: &[(u32, u32, &[u32])] = &[
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
    (7, 7, &[1, 1, 3, 13, 7, 35, 63]),
    (7, 8, &[1, 3, 5, 9, 1, 25, 53]),
    (7, 14, &[1, 3, 1, 13, 9, 35, 107]),
    (7, 19, &[1, 3, 1, 5, 27, 61, 31]),
    (7, 21, &[1, 1, 5, 11, 19, 41, 61]),
    (7, 28, &[1, 3, 5, 3, 3, 13, 69]),
    (7, 31, &[1, 1, 7, 13, 1, 19, 1]),
    (7, 32, &[1, 3, 7, 5, 13, 19, 59]),
    (7, 37, &[1, 1, 3, 9, 25, 29, 41]),
    (7, 41, &[1, 3, 5, 13, 23, 1, 55]),
    (7, 42, &[1, 3, 7, 3, 13, 59, 17]),
    (7, 50, &[1, 3, 1, 3, 5, 53, 69]),
    (7, 55, &[1, 1, 5, 5, 23, 33, 13]),
    (7, 56, &[1, 1, 7, 7, 1, 61, 123]),
    (7, 59, &[1, 1, 7, 9, 13, 61, 49]),
    (7, 62, &[1, 3, 3, 5, 3, 55, 33]),
    (8, 14, &[1, 3, 1, 15, 31, 13, 49, 245]),
    (8, 21, &[1, 3, 5, 15, 31, 59, 63, 97]),
    (8, 22, &[1, 3, 1, 11, 11, 11, 77, 249]),
    (8, 38, &[1, 3, 1, 11, 27, 43, 71, 9]),
    (8, 47, &[1, 1, 7, 15, 21, 11, 81, 45]),
    (8, 49, &[1, 3, 7, 3, 25, 31, 65, 79]),
    (8, 50, &[1, 3, 1, 1, 19, 11, 3, 205]),
    (8, 52, &[1, 1, 5, 9, 19, 21, 29, 157]),
    (8, 56, &[1, 3, 7, 11, 1, 33, 89, 185]),
    (8, 67, &[1, 3, 3, 3, 15, 9, 79, 71]),
    (8, 70, &[1, 3, 7, 11, 15, 39, 119, 27]),
    (8, 84, &[1, 1, 3, 1, 11, 31, 97, 225]),
    (8, 97, &[1, 1, 1, 3, 23, 43, 57, 177]),
    (8, 103, &[1, 3, 7, 7, 17, 17, 37, 71]),
    (8, 115, &[1, 3, 1, 5, 27, 63, 123, 213]),
    (8, 122, &[1, 1, 3, 5, 11, 43, 53, 133]),
    (9, 8, &[1, 3, 5, 5, 29, 17, 47, 173, 479]),
    (9, 13, &[1, 3, 3, 11, 3, 1, 109, 9, 69]),
    (9, 16, &[1, 1, 1, 5, 17, 39, 23, 5, 343]),
    (9, 22, &[1, 3, 1, 5, 25, 15, 31, 103, 499]),
    (9, 25, &[1, 1, 1, 11, 11, 17, 63, 105, 183]),
    (9, 44, &[1, 1, 5, 11, 9, 29, 97, 231, 363]),
    (9, 47, &[1, 1, 5, 15, 19, 45, 41, 7, 383]),
    (9, 52, &[1, 3, 7, 7, 31, 19, 83, 137, 221]),
    (9, 55, &[1, 1, 1, 3, 23, 15, 111, 223, 83]),
    (9, 59, &[1, 1, 5, 13, 31, 15, 55, 25, 161]),
    (9, 62, &[1, 1, 3, 13, 25, 47, 39, 87, 257]),
];

/// Per-coordinate direction numbers `v_j = m_j / 2^j`, stored as 32-bit
/// fixed point.
#[derive(Debug, Clone)]
pub struct Sobol {
    dims: usize,
    directions: Vec<[u32; BITS]>,
}

fn directions_for(coord: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if coord == 0 {
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = 1u32 << (BITS - 1 - j);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[coord - 1];
    let s = s as usize;
    for j in 0..s {
        v[j] = m[j] << (BITS - 1 - j);
    }
    for j in s..BITS {
        let mut value = v[j - s] ^ (v[j - s] >> s);
        for k in 1..s {
            if (a >> (s - 1 - k)) & 1 == 1 {
                value ^= v[j - k];
            }
        }
        v[j] = value;
    }
    v
}

impl Sobol {
    pub fn new(dims: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if dims > MAX_DIMS {
            return Err(Error::DimensionTooLarge {
                dims,
                max: MAX_DIMS,
            });
        }
        Ok(Self {
            dims,
            directions: (0..dims).map(directions_for).collect(),
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Integer coordinates of the element with the given global index.
    pub fn point_bits(&self, index: u64, out: &mut [u32]) {
        debug_assert_eq!(out.len(), self.dims);
        let gray = index ^ (index >> 1);
        for (o, v) in out.iter_mut().zip(&self.directions) {
            let mut x = 0u32;
            let mut g = gray;
            let mut bit = 0;
            while g != 0 {
                if g & 1 == 1 {
                    x ^= v[bit];
                }
                g >>= 1;
                bit += 1;
            }
            *o = x;
        }
    }

    /// Writes `n` consecutive elements starting at global index `start` into
    /// `out` as a row-major `n x dims` array of values in [0, 1).
    pub fn fill_block(&self, start: u64, n: usize, out: &mut [f64]) -> Result<()> {
        let end = start
            .checked_add(n as u64)
            .filter(|&e| e <= 1u64 << BITS)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "Sobol' indices [{start}, {start}+{n}) exceed the 2^{BITS} element period"
                ))
            })?;
        debug_assert_eq!(out.len(), n * self.dims);
        if n == 0 {
            return Ok(());
        }
        let mut x = vec![0u32; self.dims];
        self.point_bits(start, &mut x);
        let scale = 1.0 / (1u64 << BITS) as f64;
        for (row, index) in out.chunks_exact_mut(self.dims).zip(start..end) {
            if index != start {
                // Gray-code step from index-1 to index flips the direction
                // number at the lowest set bit of index.
                let bit = index.trailing_zeros() as usize;
                for (xj, v) in x.iter_mut().zip(&self.directions) {
                    *xj ^= v[bit];
                }
            }
            for (r, &xj) in row.iter_mut().zip(&x) {
                *r = xj as f64 * scale;
            }
        }
        Ok(())
    }
}
