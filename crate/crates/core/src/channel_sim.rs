//! Synthetic Rician-fading channel snapshots with first-order Markov
//! temporal correlation, additive observation noise, and the real-valued
//! stacking used by the rest of the pipeline.
//!
//! Conventions: a scatter matrix `x` has i.i.d. unit-variance circularly
//! symmetric complex Gaussian entries (real and imaginary parts each
//! `N(0, 1/2)`); the Rician channel is `h = nu + sigma·x` with
//! `nu = sqrt(K/(K+1))`, `sigma = sqrt(1/(K+1))`; time evolution is
//! `x(t+1) = beta·x(t) + sqrt(1 − beta²)·w`; an observation at `snr_db`
//! adds complex noise of total variance `10^(−snr_db/10)`.

use ndarray::{concatenate, Array2, Axis};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Which protocol phase a snapshot block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Enrollment,
    Authentication,
}

/// Rician fading parameters derived from the K-factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianParams {
    k_factor: f64,
    nu: f64,
    sigma: f64,
}

impl RicianParams {
    /// Builds parameters from a finite nonnegative K-factor.
    pub fn new(k_factor: f64) -> Result<Self> {
        if !k_factor.is_finite() || k_factor < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "Rician K-factor must be finite and nonnegative, got {k_factor}"
            )));
        }
        Ok(Self {
            k_factor,
            nu: (k_factor / (k_factor + 1.0)).sqrt(),
            sigma: (1.0 / (k_factor + 1.0)).sqrt(),
        })
    }

    pub fn k_factor(&self) -> f64 {
        self.k_factor
    }

    /// Line-of-sight amplitude `sqrt(K/(K+1))`.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Scatter amplitude `sqrt(1/(K+1))`; `nu² + sigma² = 1`.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// A block of complex channel snapshots: rows are snapshots, columns are
/// antenna branches.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSnapshotBlock {
    data: Array2<Complex64>,
    phase: Phase,
}

impl ComplexSnapshotBlock {
    pub fn new(data: Array2<Complex64>, phase: Phase) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter(format!(
                "snapshot block must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("snapshot block contains a non-finite entry".into()));
        }
        Ok(Self { data, phase })
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.nrows()
    }

    pub fn nb(&self) -> usize {
        self.data.ncols()
    }
}

/// Real-valued CSI matrix: real parts of a snapshot block stacked above the
/// imaginary parts, so `Ns = 2 · n_snapshots` rows by `Nb` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiMatrix {
    data: Array2<f64>,
}

impl CsiMatrix {
    /// Wraps an already-stacked real matrix; the row count must be even and
    /// all entries finite.
    pub fn from_real(data: Array2<f64>) -> Result<Self> {
        let (rows, cols) = data.dim();
        if rows == 0 || cols == 0 || rows % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "CSI matrix needs a positive even row count, got {rows}x{cols}"
            )));
        }
        crate::numkernel::ensure_finite(&data, "CSI matrix")?;
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    /// Number of real rows (`2 · n_snapshots`).
    pub fn ns(&self) -> usize {
        self.data.nrows()
    }

    pub fn nb(&self) -> usize {
        self.data.ncols()
    }
}

fn sample_scatter<R: Rng + ?Sized>(n_snapshots: usize, nb: usize, rng: &mut R) -> Array2<Complex64> {
    let root_half = 0.5_f64.sqrt();
    Array2::from_shape_fn((n_snapshots, nb), |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * root_half, im * root_half)
    })
}

/// Draws an i.i.d. unit-variance complex Gaussian scatter block.
pub fn gen_scatter<R: Rng + ?Sized>(
    n_snapshots: usize,
    nb: usize,
    phase: Phase,
    rng: &mut R,
) -> Result<ComplexSnapshotBlock> {
    if n_snapshots == 0 || nb == 0 {
        return Err(Error::InvalidParameter(format!(
            "snapshot block dimensions must be positive, got {n_snapshots}x{nb}"
        )));
    }
    ComplexSnapshotBlock::new(sample_scatter(n_snapshots, nb, rng), phase)
}

/// Composes a Rician channel `h = nu + sigma·x` from a scatter block.
pub fn compose_rician(scatter: &ComplexSnapshotBlock, params: &RicianParams) -> ComplexSnapshotBlock {
    let nu = Complex64::new(params.nu(), 0.0);
    let sigma = params.sigma();
    ComplexSnapshotBlock {
        data: scatter.data.mapv(|x| nu + x * sigma),
        phase: scatter.phase,
    }
}

/// Draws a fresh Rician channel block in one call.
pub fn gen_rician<R: Rng + ?Sized>(
    n_snapshots: usize,
    nb: usize,
    params: &RicianParams,
    phase: Phase,
    rng: &mut R,
) -> Result<ComplexSnapshotBlock> {
    Ok(compose_rician(&gen_scatter(n_snapshots, nb, phase, rng)?, params))
}

/// Advances a scatter block one Markov step:
/// `x(t+1) = beta·x(t) + sqrt(1 − beta²)·w`. The output carries the
/// authentication phase tag. `beta = 1` returns the input unchanged.
pub fn evolve_markov<R: Rng + ?Sized>(
    x_t: &ComplexSnapshotBlock,
    beta: f64,
    rng: &mut R,
) -> Result<ComplexSnapshotBlock> {
    if !(beta.is_finite() && beta.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Markov coefficient must satisfy |beta| <= 1, got {beta}"
        )));
    }
    let data = if beta == 1.0 {
        x_t.data.clone()
    } else {
        let innov = (1.0 - beta * beta).sqrt();
        let w = sample_scatter(x_t.n_snapshots(), x_t.nb(), rng);
        x_t.data.mapv(|x| x * beta) + w.mapv(|w| w * innov)
    };
    Ok(ComplexSnapshotBlock { data, phase: Phase::Authentication })
}

/// Adds observation noise of total variance `10^(−snr_db/10)` per entry
/// (real and imaginary parts each carry half). `snr_db = +inf` is noiseless.
pub fn observe<R: Rng + ?Sized>(
    block: &ComplexSnapshotBlock,
    snr_db: f64,
    rng: &mut R,
) -> Result<ComplexSnapshotBlock> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("SNR must be a real value or +inf, got {snr_db}")));
    }
    if snr_db == f64::INFINITY {
        return Ok(block.clone());
    }
    let var = 10.0_f64.powf(-snr_db / 10.0);
    let scale = (var / 2.0).sqrt();
    let noise = Array2::from_shape_fn(block.data.dim(), |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    Ok(ComplexSnapshotBlock { data: &block.data + &noise, phase: block.phase })
}

/// Stacks real parts above imaginary parts into the real CSI matrix.
pub fn to_real(block: &ComplexSnapshotBlock) -> CsiMatrix {
    let re = block.data.mapv(|z| z.re);
    let im = block.data.mapv(|z| z.im);
    let data = concatenate(Axis(0), &[re.view(), im.view()]).expect("matching column counts");
    CsiMatrix { data }
}

/// Pearson correlation between two equally-shaped matrices, computed over
/// all entries as two flat samples.
pub fn pearson(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "pearson inputs must share a shape, got {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::DegenerateInput("pearson needs at least two entries".into()));
    }
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_b = b.iter().sum::<f64>() / n as f64;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (&x, &y) in a.iter().zip(b.iter()) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        cov += dx * dy;
        var_a += dx * dx;
        var_b += dy * dy;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::DegenerateInput("pearson is undefined for a constant input".into()));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}
