//! Lloyd-Max scalar quantization of preprocessed CSI matrices and packing of
//! the resulting Gray-coded bits into fixed-size code blocks.
//!
//! The quantizer is designed once on enrollment-phase samples (empirical
//! Lloyd-Max: nearest-level partition / cell-centroid alternation) and then
//! frozen, so enrollment and authentication use identical thresholds.

use std::cmp::Ordering;

use crate::channel_sim::CsiMatrix;
use crate::error::{Error, Result};

/// Strict ascent check that also fails on NaN (incomparable values).
fn strictly_ascending(a: f64, b: f64) -> bool {
    a.partial_cmp(&b) == Some(Ordering::Less)
}

/// A trained scalar quantizer: `2^n_bits` reconstruction levels, the
/// `2^n_bits − 1` midpoint thresholds between them, and the Gray code
/// assigned to each cell (MSB first).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    pub n_bits: usize,
    pub thresholds: Vec<f64>,
    pub levels: Vec<f64>,
    pub gray_codes: Vec<Vec<u8>>,
}

/// A fixed-length block of bits destined for one codeword.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitBlock {
    pub bits: Vec<u8>,
}

impl QuantizerSpec {
    /// Structural invariants: strictly ascending thresholds interleaved with
    /// strictly ascending levels, and adjacent cells' Gray codes differing in
    /// exactly one bit.
    fn validate(&self) -> Result<()> {
        let cells = 1usize << self.n_bits;
        if self.levels.len() != cells || self.thresholds.len() != cells - 1 || self.gray_codes.len() != cells {
            return Err(Error::DegenerateInput("quantizer has inconsistent cell counts".into()));
        }
        for w in self.levels.windows(2) {
            if !strictly_ascending(w[0], w[1]) {
                return Err(Error::DegenerateInput(format!(
                    "quantizer levels must be strictly ascending, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        for (i, w) in self.thresholds.windows(2).enumerate() {
            if !strictly_ascending(w[0], w[1]) {
                return Err(Error::DegenerateInput(format!(
                    "quantizer thresholds must be strictly ascending at {i}"
                )));
            }
        }
        for (i, &t) in self.thresholds.iter().enumerate() {
            if !(self.levels[i] <= t && t <= self.levels[i + 1]) {
                return Err(Error::DegenerateInput(format!(
                    "threshold {i} does not interleave its levels"
                )));
            }
        }
        Ok(())
    }

    /// Cell index for one sample: number of thresholds strictly below it, so
    /// a sample exactly on a threshold falls in the lower cell.
    pub fn cell_of(&self, value: f64) -> usize {
        self.thresholds.partition_point(|&t| t < value)
    }
}

/// Gray code of `index` as `n_bits` bits, MSB first.
pub fn gray_encode(index: usize, n_bits: usize) -> Result<Vec<u8>> {
    if n_bits == 0 || n_bits >= usize::BITS as usize {
        return Err(Error::InvalidParameter(format!("gray_encode needs 1..{} bits, got {n_bits}", usize::BITS)));
    }
    if index >> n_bits != 0 {
        return Err(Error::InvalidParameter(format!(
            "index {index} does not fit in {n_bits} bits"
        )));
    }
    let g = index ^ (index >> 1);
    Ok((0..n_bits).rev().map(|b| ((g >> b) & 1) as u8).collect())
}

/// Trains a `2^n_bits`-level Lloyd-Max quantizer on empirical samples with
/// the default iteration budget (200 sweeps, movement tolerance 1e-8).
pub fn lloyd_max_design(samples: &[f64], n_bits: usize) -> Result<QuantizerSpec> {
    lloyd_max_design_opts(samples, n_bits, 200, 1e-8)
}

/// Lloyd-Max with an explicit sweep budget and level-movement tolerance.
pub fn lloyd_max_design_opts(
    samples: &[f64],
    n_bits: usize,
    max_iter: usize,
    tol: f64,
) -> Result<QuantizerSpec> {
    if n_bits == 0 || n_bits > 16 {
        return Err(Error::InvalidParameter(format!("n_bits must lie in 1..=16, got {n_bits}")));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be nonnegative, got {tol}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("samples contain a non-finite value".into()));
    }
    let cells = 1usize << n_bits;
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mut distinct = 0usize;
    for (i, &x) in sorted.iter().enumerate() {
        if i == 0 || x != sorted[i - 1] {
            distinct += 1;
        }
    }
    if distinct < cells {
        return Err(Error::DegenerateInput(format!(
            "degenerate input: {distinct} distinct sample values cannot support {cells} cells"
        )));
    }
    let n = sorted.len();

    // Initial levels at the (2i+1)/2^(n_bits+1) quantiles; if ties collapse
    // them, fall back to evenly spaced distinct values.
    let mut levels: Vec<f64> = (0..cells)
        .map(|i| sorted[(((2 * i + 1) * n) / (2 * cells)).min(n - 1)])
        .collect();
    if levels.windows(2).any(|w| !strictly_ascending(w[0], w[1])) {
        let mut uniq: Vec<f64> = Vec::with_capacity(distinct);
        for &x in &sorted {
            if uniq.last() != Some(&x) {
                uniq.push(x);
            }
        }
        levels = (0..cells).map(|i| uniq[i * (uniq.len() - 1) / (cells - 1).max(1)]).collect();
        // Evenly spaced picks can still collide for skewed distinct counts;
        // as a final resort take the first `cells` distinct values.
        if levels.windows(2).any(|w| !strictly_ascending(w[0], w[1])) {
            levels = uniq[..cells].to_vec();
        }
    }

    // Prefix sums over the sorted samples make cell means O(1).
    let mut prefix = vec![0.0_f64; n + 1];
    for (i, &x) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + x;
    }

    for _ in 0..max_iter {
        let thresholds: Vec<f64> = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut new_levels = levels.clone();
        let mut start = 0usize;
        for c in 0..cells {
            // Cell c holds samples in (t[c-1], t[c]]; `start` already points
            // past everything <= t[c-1].
            let end = if c + 1 < cells {
                sorted.partition_point(|&x| x <= thresholds[c])
            } else {
                n
            };
            if end > start {
                new_levels[c] = (prefix[end] - prefix[start]) / (end - start) as f64;
            } else if c > 0 && c + 1 < cells {
                new_levels[c] = 0.5 * (thresholds[c - 1] + thresholds[c]);
            }
            // Empty boundary cells keep their previous level.
            start = end;
        }
        let movement = levels
            .iter()
            .zip(new_levels.iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        levels = new_levels;
        if movement < tol {
            break;
        }
    }

    let thresholds: Vec<f64> = levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let gray_codes = (0..cells).map(|i| gray_encode(i, n_bits)).collect::<Result<Vec<_>>>()?;
    let spec = QuantizerSpec { n_bits, thresholds, levels, gray_codes };
    spec.validate()?;
    Ok(spec)
}

/// Quantizes a matrix entry-by-entry in row-major order, concatenates the
/// Gray-coded bits, and chops them into `n_code`-bit blocks. A trailing
/// remainder shorter than `n_code` is dropped; producing zero full blocks is
/// an error.
pub fn quantize_to_blocks(l: &CsiMatrix, spec: &QuantizerSpec, n_code: usize) -> Result<Vec<BitBlock>> {
    spec.validate()?;
    if n_code == 0 {
        return Err(Error::InvalidParameter("block length must be positive".into()));
    }
    let total_bits = l.data().len() * spec.n_bits;
    if total_bits < n_code {
        return Err(Error::InsufficientData(format!(
            "matrix yields {total_bits} bits, fewer than one {n_code}-bit block"
        )));
    }
    let mut bits = Vec::with_capacity(total_bits);
    for &x in l.data().iter() {
        bits.extend_from_slice(&spec.gray_codes[spec.cell_of(x)]);
    }
    Ok(bits
        .chunks_exact(n_code)
        .map(|chunk| BitBlock { bits: chunk.to_vec() })
        .collect())
}

/// Bit mismatch rate between two equal-length bit strings.
pub fn bmr(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "bit strings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::DegenerateInput("bit mismatch rate of empty strings is undefined".into()));
    }
    let mismatches = a.iter().zip(b.iter()).filter(|(x, y)| x != y).count();
    Ok(mismatches as f64 / a.len() as f64)
}
