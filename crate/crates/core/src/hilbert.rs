//! n-dimensional Hilbert curve on the level-`k` lattice `{0, .., 2^k - 1}^d`.
//!
//! Encoding uses Skilling's transpose construction ("Programming the Hilbert curve", AIP Conf.
//! Proc. 707, 2004): axes are converted in place to the transposed index, whose bits are then
//! interleaved with axis 0 supplying the most significant bit of every `d`-bit group. The curve
//! starts at the origin cell; at level 1 in two dimensions it visits `(0,0), (0,1), (1,1), (1,0)`
//! as `(axis0, axis1)`, so the first move is along the last axis.
//!
//! Points in `[0, 1]^d` are snapped to the cell that contains them and represented by the cell
//! centre, which is never further than `sqrt(d) / 2^(k+1)` away.

use crate::error::{Error, Result};

/// A lattice cell at a given level.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CellCoord {
    level: u32,
    coords: Vec<u64>,
}

impl CellCoord {
    pub fn new(level: u32, coords: Vec<u64>) -> Result<Self> {
        check_shape(coords.len(), level)?;
        let top = HilbertIndex::max_value(1, level);
        if let Some(&c) = coords.iter().find(|&&c| c > top) {
            return Err(Error::InvalidArgument(format!(
                "cell coordinate {c} does not fit in {level} bits"
            )));
        }
        Ok(Self { level, coords })
    }

    pub fn dims(&self) -> usize {
        self.coords.len()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    /// Centre of the cell in `[0, 1]^d`.
    pub fn center(&self) -> Vec<f64> {
        let scale = (self.level as f64).exp2();
        self.coords
            .iter()
            .map(|&c| (c as f64 + 0.5) / scale)
            .collect()
    }
}

/// Position of a cell along the curve, `0 <= value < 2^(d k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HilbertIndex {
    value: u64,
    dims: usize,
    level: u32,
}

impl HilbertIndex {
    pub fn new(value: u64, dims: usize, level: u32) -> Result<Self> {
        let bits = check_shape(dims, level)?;
        if bits < 64 && value >> bits != 0 {
            return Err(Error::InvalidArgument(format!(
                "index {value} exceeds {bits} bits"
            )));
        }
        Ok(Self { value, dims, level })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Largest valid index, `2^(d k) - 1`.
    pub fn max_value(dims: usize, level: u32) -> u64 {
        let bits = dims as u32 * level;
        if bits >= 64 {
            u64::MAX
        } else {
            (1u64 << bits) - 1
        }
    }
}

fn check_shape(dims: usize, level: u32) -> Result<u32> {
    if dims == 0 {
        return Err(Error::InvalidArgument("Hilbert curve needs d >= 1".into()));
    }
    if level == 0 {
        return Err(Error::InvalidArgument("Hilbert level must be >= 1".into()));
    }
    let bits = (dims as u64).saturating_mul(level as u64);
    if bits > 64 {
        return Err(Error::UnsupportedPrecision {
            bits: bits.min(u32::MAX as u64) as u32,
        });
    }
    Ok(bits as u32)
}

/// In-place axes -> transposed index.
fn axes_to_transpose(x: &mut [u64], bits: u32) {
    let n = x.len();
    let m = 1u64 << (bits - 1);

    let mut q = m;
    while q > 1 {
        let p = q - 1;
        for i in 0..n {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
        q >>= 1;
    }

    for i in 1..n {
        x[i] ^= x[i - 1];
    }
    let mut t = 0;
    let mut q = m;
    while q > 1 {
        if x[n - 1] & q != 0 {
            t ^= q - 1;
        }
        q >>= 1;
    }
    for xi in x.iter_mut() {
        *xi ^= t;
    }
}

/// In-place transposed index -> axes.
fn transpose_to_axes(x: &mut [u64], bits: u32) {
    let n = x.len();

    let t = x[n - 1] >> 1;
    for i in (1..n).rev() {
        x[i] ^= x[i - 1];
    }
    x[0] ^= t;

    for s in 1..bits {
        let q = 1u64 << s;
        let p = q - 1;
        for i in (0..n).rev() {
            if x[i] & q != 0 {
                x[0] ^= p;
            } else {
                let t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
    }
}

fn interleave(x: &[u64], bits: u32) -> u64 {
    let mut h = 0u64;
    for b in (0..bits).rev() {
        for &xi in x {
            h = (h << 1) | ((xi >> b) & 1);
        }
    }
    h
}

fn deinterleave(mut h: u64, dims: usize, bits: u32) -> Vec<u64> {
    let mut x = vec![0u64; dims];
    for b in 0..bits {
        for i in (0..dims).rev() {
            x[i] |= (h & 1) << b;
            h >>= 1;
        }
    }
    x
}

/// Maps a cell to its position along the curve.
pub fn encode(cell: &CellCoord) -> Result<HilbertIndex> {
    check_shape(cell.dims(), cell.level)?;
    let mut x = cell.coords.clone();
    axes_to_transpose(&mut x, cell.level);
    Ok(HilbertIndex {
        value: interleave(&x, cell.level),
        dims: cell.dims(),
        level: cell.level,
    })
}

/// Inverse of [`encode`].
pub fn decode(index: &HilbertIndex) -> Result<CellCoord> {
    check_shape(index.dims, index.level)?;
    let mut x = deinterleave(index.value, index.dims, index.level);
    transpose_to_axes(&mut x, index.level);
    Ok(CellCoord {
        level: index.level,
        coords: x,
    })
}

/// The cell of `[0, 1]^d` at `level` containing `x`; the value 1 belongs to the top cell.
pub fn cell_of(x: &[f64], level: u32) -> Result<CellCoord> {
    check_shape(x.len(), level)?;
    let scale = (level as f64).exp2();
    let top = HilbertIndex::max_value(1, level);
    let coords = x
        .iter()
        .map(|&v| {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    value: v,
                    range: "[0, 1]",
                });
            }
            Ok(((v * scale).floor() as u64).min(top))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellCoord { level, coords })
}

/// Snaps `x` in `[0, 1]^d` to its level-`k` cell, returning the cell's curve index and centre.
pub fn snap_point(x: &[f64], level: u32) -> Result<(HilbertIndex, Vec<f64>)> {
    let cell = cell_of(x, level)?;
    Ok((encode(&cell)?, cell.center()))
}

/// Worst-case distance between a point of `[0, 1]^d` and its snapped centre.
pub fn locality_bound(dims: usize, level: u32) -> f64 {
    (dims as f64).sqrt() / (level as f64 + 1.0).exp2()
}

fn to_unit(v: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&v) {
        return Err(Error::OutOfRange {
            value: v,
            range: "[-1, 1]",
        });
    }
    Ok((v + 1.0) / 2.0)
}

/// Collapses the first `d` coordinates of `x` in `I^n` to one curve coordinate in `[-1, 1]`.
///
/// The index `v` of the containing level-`k` cell becomes `2 v / (2^(d k) - 1) - 1`; the remaining
/// `n - d` coordinates pass through unchanged. Exactly invertible by [`lift_coords`] on its image
/// while `d k <= 48`.
pub fn project_coords(x: &[f64], d: usize, level: u32) -> Result<Vec<f64>> {
    if d == 0 || d > x.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot collapse {d} of {} coordinates",
            x.len()
        )));
    }
    let unit = x[..d].iter().map(|&v| to_unit(v)).collect::<Result<Vec<_>>>()?;
    for &v in &x[d..] {
        to_unit(v)?;
    }
    let (index, _) = snap_point(&unit, level)?;
    let denom = HilbertIndex::max_value(d, level) as f64;
    let s = index.value as f64 / denom;
    let mut out = Vec::with_capacity(x.len() - d + 1);
    out.push(2.0 * s - 1.0);
    out.extend_from_slice(&x[d..]);
    Ok(out)
}

/// Right inverse of [`project_coords`]: expands the curve coordinate back to the centre of the
/// nearest cell, mapped to `[-1, 1]^d`, followed by the untouched coordinates.
pub fn lift_coords(z: &[f64], d: usize, level: u32, n: usize) -> Result<Vec<f64>> {
    if d == 0 || d > n || z.len() != n - d + 1 {
        return Err(Error::DimensionMismatch {
            expected: n.saturating_sub(d) + 1,
            actual: z.len(),
        });
    }
    let s = to_unit(z[0])?;
    let max = HilbertIndex::max_value(d, level);
    let v = (s * max as f64).round().clamp(0.0, max as f64) as u64;
    let cell = decode(&HilbertIndex::new(v, d, level)?)?;
    let mut out: Vec<f64> = cell.center().into_iter().map(|c| 2.0 * c - 1.0).collect();
    out.extend_from_slice(&z[1..]);
    Ok(out)
}
