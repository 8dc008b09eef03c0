//! Experiment orchestration: configuration, seeded Monte-Carlo sweeps over
//! SNR / Rician K-factor / code rate, the full per-trial authentication
//! pipeline, CSV emission, real-CSI ingestion, and a cross-module self-test.
//!
//! Reproducibility contract: `(config, seed)` determines every emitted
//! number except wall-clock `runtime_seconds`. Each trial draws from its own
//! counter-based RNG stream keyed by `(sweep point, trial index)`, so adding
//! trials never perturbs earlier ones.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel_sim::{
    compose_rician, evolve_markov, gen_rician, gen_scatter, observe, pearson, to_real, CsiMatrix,
    Phase, RicianParams,
};
use crate::error::{Error, Result};
use crate::metrics::{eer, pd_at_pfa, post_recon_error, roc, Hypothesis, TrialRecord};
use crate::polar::PolarSpec;
use crate::preprocess::{arpca, enrollment_decompose, pca_denoise, rpca_pcp, AdmmOptions};
use crate::quantizer::{lloyd_max_design, quantize_to_blocks, BitBlock};
use crate::reconcile::{authenticate, enroll, estimate_crossover, ReconOutcome};

/// CSI conditioning applied before quantization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preprocessing {
    /// Quantize the raw observed matrices.
    #[default]
    None,
    /// Per-matrix PCA projection onto the top `pca_d` components.
    Pca,
    /// Per-matrix robust PCA (principal component pursuit), keep `L`.
    Rpca,
    /// PCP at enrollment, then temporally regularized PCP pulling the
    /// authentication `L` toward `beta_hat · L(t)`.
    Arpca,
}

impl Preprocessing {
    pub fn name(self) -> &'static str {
        match self {
            Preprocessing::None => "none",
            Preprocessing::Pca => "pca",
            Preprocessing::Rpca => "rpca",
            Preprocessing::Arpca => "arpca",
        }
    }
}

fn default_nb() -> usize {
    32
}
fn default_n_snapshots() -> usize {
    8
}
fn default_beta() -> f64 {
    0.9
}
fn default_snr_db() -> f64 {
    10.0
}
fn default_n_code() -> usize {
    128
}
fn default_rate() -> f64 {
    0.1
}
fn default_n_bits() -> usize {
    1
}
fn default_crc_len() -> usize {
    8
}
fn default_list_size() -> usize {
    8
}
fn default_pca_d() -> usize {
    10
}
fn default_trials() -> usize {
    500
}
fn default_seed() -> u64 {
    1
}

/// Everything one experiment needs; loadable from TOML with the same keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_nb")]
    pub nb: usize,
    #[serde(default = "default_n_snapshots")]
    pub n_snapshots: usize,
    #[serde(default)]
    pub k_factor_1: f64,
    #[serde(default)]
    pub k_factor_2: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_snr_db")]
    pub snr_db: f64,
    #[serde(default = "default_n_code")]
    pub n_code: usize,
    #[serde(default = "default_rate")]
    pub rate: f64,
    #[serde(default = "default_n_bits")]
    pub n_bits: usize,
    #[serde(default = "default_crc_len")]
    pub crc_len: usize,
    #[serde(default = "default_list_size")]
    pub list_size: usize,
    #[serde(default)]
    pub preprocessing: Preprocessing,
    #[serde(default = "default_pca_d")]
    pub pca_d: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            nb: default_nb(),
            n_snapshots: default_n_snapshots(),
            k_factor_1: 0.0,
            k_factor_2: 0.0,
            beta: default_beta(),
            snr_db: default_snr_db(),
            n_code: default_n_code(),
            rate: default_rate(),
            n_bits: default_n_bits(),
            crc_len: default_crc_len(),
            list_size: default_list_size(),
            preprocessing: Preprocessing::None,
            pca_d: default_pca_d(),
            trials: default_trials(),
            seed: default_seed(),
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    /// Payload bits per codeword: `K = round(rate · N)`.
    pub fn payload_len(&self) -> usize {
        (self.rate * self.n_code as f64).round() as usize
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("empty experiment: trials must be at least 1".into()));
        }
        if self.nb == 0 || self.n_snapshots == 0 {
            return Err(Error::Config(format!(
                "matrix dimensions must be positive, got {} snapshots x {} branches",
                self.n_snapshots, self.nb
            )));
        }
        for (name, v) in [("k_factor_1", self.k_factor_1), ("k_factor_2", self.k_factor_2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if !(self.beta.is_finite() && self.beta.abs() <= 1.0) {
            return Err(Error::Config(format!("beta must lie in [-1, 1], got {}", self.beta)));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Config(format!("snr_db must be finite, got {}", self.snr_db)));
        }
        if self.n_code < 2 || !self.n_code.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_code must be a power of two >= 2, got {}",
                self.n_code
            )));
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::Config(format!("rate must lie in (0, 1], got {}", self.rate)));
        }
        if self.n_bits == 0 || self.n_bits > 16 {
            return Err(Error::Config(format!("n_bits must lie in 1..=16, got {}", self.n_bits)));
        }
        if self.crc_len == 0 || self.crc_len > 32 {
            return Err(Error::Config(format!("crc_len must lie in 1..=32, got {}", self.crc_len)));
        }
        let k = self.payload_len();
        if k <= self.crc_len || k > self.n_code {
            return Err(Error::Config(format!(
                "rate {} at n_code {} gives {k} payload bits; need more than crc_len {} and at most n_code",
                self.rate, self.n_code, self.crc_len
            )));
        }
        if self.list_size == 0 {
            return Err(Error::Config("list_size must be at least 1".into()));
        }
        if self.preprocessing == Preprocessing::Pca && (self.pca_d == 0 || self.pca_d > self.nb) {
            return Err(Error::Config(format!(
                "pca_d must lie in 1..={}, got {}",
                self.nb, self.pca_d
            )));
        }
        let bits_per_trial = 2 * self.n_snapshots * self.nb * self.n_bits;
        if bits_per_trial < self.n_code {
            return Err(Error::Config(format!(
                "one trial supplies {bits_per_trial} bits but a codeword needs {}",
                self.n_code
            )));
        }
        if let Some(s) = &self.sweep {
            parse_sweep_arg(s)?;
        }
        Ok(())
    }
}

/// One sweep point's aggregated results, echoing the effective config.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub preprocessing: Preprocessing,
    pub nb: usize,
    pub n_snapshots: usize,
    pub k_factor_1: f64,
    pub k_factor_2: f64,
    pub beta: f64,
    pub snr_db: f64,
    pub n_code: usize,
    pub rate: f64,
    pub n_bits: usize,
    pub crc_len: usize,
    pub list_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub bmr_h0: f64,
    pub bmr_h1: f64,
    pub err_recon_h0: f64,
    pub err_recon_h1: f64,
    pub pd_at_005: f64,
    pub eer: f64,
    pub mean_iterations: f64,
    pub runtime_seconds: f64,
}

/// Swept experiment axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Snr,
    Rate,
    /// Sets `k_factor_1` and `k_factor_2` together.
    KFactor,
}

/// Parses `axis=v1,v2,...` or `axis=start:stop:step` (inclusive endpoints)
/// with axis one of `snr`, `rate`, `k`.
pub fn parse_sweep_arg(s: &str) -> Result<(SweepAxis, Vec<f64>)> {
    let (axis_raw, vals_raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("sweep must look like axis=values, got {s:?}")))?;
    let axis = match axis_raw.trim() {
        "snr" => SweepAxis::Snr,
        "rate" => SweepAxis::Rate,
        "k" => SweepAxis::KFactor,
        other => {
            return Err(Error::Config(format!(
                "unknown sweep axis {other:?}; expected snr, rate, or k"
            )))
        }
    };
    let parse_num = |t: &str| -> Result<f64> {
        let v: f64 = t
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("sweep value {t:?} is not a number")))?;
        if !v.is_finite() {
            return Err(Error::Config(format!("sweep value {v} is not finite")));
        }
        Ok(v)
    };
    let values = if vals_raw.contains(':') {
        let parts: Vec<&str> = vals_raw.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "range sweep must be start:stop:step, got {vals_raw:?}"
            )));
        }
        let (start, stop, step) = (parse_num(parts[0])?, parse_num(parts[1])?, parse_num(parts[2])?);
        if step <= 0.0 || stop < start {
            return Err(Error::Config(format!(
                "range sweep needs stop >= start and step > 0, got {vals_raw:?}"
            )));
        }
        let mut values = Vec::new();
        let mut i = 0u32;
        loop {
            let v = start + f64::from(i) * step;
            if v > stop + 1e-9 * step {
                break;
            }
            values.push(v);
            i += 1;
        }
        values
    } else {
        vals_raw.split(',').map(parse_num).collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        return Err(Error::Config("sweep produced no values".into()));
    }
    Ok((axis, values))
}

/// Expands a config into one concrete config per sweep point (itself if no
/// sweep is set), validating each point.
pub fn expand_sweep(cfg: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    let Some(sweep) = &cfg.sweep else {
        return Ok(vec![cfg.clone()]);
    };
    let (axis, values) = parse_sweep_arg(sweep)?;
    values
        .into_iter()
        .map(|v| {
            let mut point = cfg.clone();
            point.sweep = None;
            match axis {
                SweepAxis::Snr => point.snr_db = v,
                SweepAxis::Rate => point.rate = v,
                SweepAxis::KFactor => {
                    point.k_factor_1 = v;
                    point.k_factor_2 = v;
                }
            }
            point.validate()?;
            Ok(point)
        })
        .collect()
}

/// Runs every sweep point of a validated config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    expand_sweep(cfg)?
        .iter()
        .enumerate()
        .map(|(idx, point)| run_point(point, idx))
        .collect()
}

/// Default CRC generator `x^m + x^2 + x + 1` for the standard 8-bit length,
/// `x^m + x + 1` otherwise (low bits, implicit leading term).
fn default_crc_poly(crc_len: usize) -> u64 {
    if crc_len == 8 {
        0x07
    } else {
        0b11
    }
}

struct Representations {
    enroll: CsiMatrix,
    h0: CsiMatrix,
    h1: CsiMatrix,
    solver_iterations: usize,
    solver_calls: usize,
}

fn preprocess_trial(
    cfg: &ExperimentConfig,
    raw_t: &CsiMatrix,
    raw_h0: &CsiMatrix,
    raw_h1: &CsiMatrix,
    beta_h0: f64,
    beta_h1: f64,
    admm: &AdmmOptions,
) -> Result<Representations> {
    match cfg.preprocessing {
        Preprocessing::None => Ok(Representations {
            enroll: raw_t.clone(),
            h0: raw_h0.clone(),
            h1: raw_h1.clone(),
            solver_iterations: 0,
            solver_calls: 0,
        }),
        Preprocessing::Pca => Ok(Representations {
            enroll: pca_denoise(raw_t, cfg.pca_d)?,
            h0: pca_denoise(raw_h0, cfg.pca_d)?,
            h1: pca_denoise(raw_h1, cfg.pca_d)?,
            solver_iterations: 0,
            solver_calls: 0,
        }),
        Preprocessing::Rpca => {
            let a = rpca_pcp(raw_t, admm)?;
            let b = rpca_pcp(raw_h0, admm)?;
            let c = rpca_pcp(raw_h1, admm)?;
            Ok(Representations {
                solver_iterations: a.iterations + b.iterations + c.iterations,
                solver_calls: 3,
                enroll: CsiMatrix::from_real(a.l)?,
                h0: CsiMatrix::from_real(b.l)?,
                h1: CsiMatrix::from_real(c.l)?,
            })
        }
        Preprocessing::Arpca => {
            let enr = enrollment_decompose(raw_t, admm)?;
            let l1 = CsiMatrix::from_real(enr.l)?;
            let d0 = arpca(raw_h0, &l1, beta_h0, admm)?;
            let d1 = arpca(raw_h1, &l1, beta_h1, admm)?;
            Ok(Representations {
                solver_iterations: enr.iterations + d0.iterations + d1.iterations,
                solver_calls: 3,
                enroll: l1,
                h0: CsiMatrix::from_real(d0.l)?,
                h1: CsiMatrix::from_real(d1.l)?,
            })
        }
    }
}

fn count_mismatches(a: &[BitBlock], b: &[BitBlock]) -> (usize, usize) {
    let mut mism = 0;
    let mut total = 0;
    for (ba, bb) in a.iter().zip(b.iter()) {
        mism += ba.bits.iter().zip(bb.bits.iter()).filter(|(x, y)| x != y).count();
        total += ba.bits.len();
    }
    (mism, total)
}

/// Runs one sweep point: `trials` paired Monte-Carlo trials, each enrolling
/// a channel realization, authenticating the same transmitter one Markov
/// step later (H0) and an independent transmitter (H1), then reconciling
/// every quantized block against the enrollment side information.
pub fn run_point(cfg: &ExperimentConfig, point_idx: usize) -> Result<MetricsRow> {
    cfg.validate()?;
    let started = Instant::now();
    let k_payload = cfg.payload_len();
    // Design channel: mean LLR of a BPSK observation at this SNR.
    let design_mu0 = 2.0 * 10f64.powf(cfg.snr_db / 10.0);
    let code = PolarSpec::construct(
        cfg.n_code,
        k_payload,
        design_mu0,
        cfg.crc_len,
        default_crc_poly(cfg.crc_len),
        cfg.list_size,
    )?;
    let admm = AdmmOptions::default();
    let params_h0 = RicianParams::new(cfg.k_factor_1)?;
    let params_h1 = RicianParams::new(cfg.k_factor_2)?;

    let mut records = Vec::new();
    let mut h0_etas = Vec::new();
    let mut h1_etas = Vec::new();
    let mut mismatches = [0usize; 2];
    let mut totals = [0usize; 2];
    let mut solver_iterations = 0usize;
    let mut solver_calls = 0usize;

    for trial in 0..cfg.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(((point_idx as u64) << 32) | trial as u64);

        // Channel generation: H0 and H1 share the enrollment realization.
        let x_t = gen_scatter(cfg.n_snapshots, cfg.nb, Phase::Enrollment, &mut rng)?;
        let h_t = compose_rician(&x_t, &params_h0);
        let raw_t = to_real(&observe(&h_t, cfg.snr_db, &mut rng)?);

        let x_h0 = evolve_markov(&x_t, cfg.beta, &mut rng)?;
        let h_h0 = compose_rician(&x_h0, &params_h0);
        let raw_h0 = to_real(&observe(&h_h0, cfg.snr_db, &mut rng)?);

        let h_h1 = gen_rician(cfg.n_snapshots, cfg.nb, &params_h1, Phase::Authentication, &mut rng)?;
        let raw_h1 = to_real(&observe(&h_h1, cfg.snr_db, &mut rng)?);

        // Correlation estimates from the raw observations; they drive both
        // the A-RPCA prior weight and the decoder's channel model.
        let beta_h0 = pearson(raw_t.data(), raw_h0.data())?.clamp(-1.0, 1.0);
        let beta_h1 = pearson(raw_t.data(), raw_h1.data())?.clamp(-1.0, 1.0);

        let reps = preprocess_trial(cfg, &raw_t, &raw_h0, &raw_h1, beta_h0, beta_h1, &admm)?;
        solver_iterations += reps.solver_iterations;
        solver_calls += reps.solver_calls;

        // Quantizer designed on the enrollment representation, frozen for
        // both authentication branches.
        let samples: Vec<f64> = reps.enroll.data().iter().copied().collect();
        let qspec = lloyd_max_design(&samples, cfg.n_bits)?;
        let blocks_t = quantize_to_blocks(&reps.enroll, &qspec, cfg.n_code)?;
        let blocks_h0 = quantize_to_blocks(&reps.h0, &qspec, cfg.n_code)?;
        let blocks_h1 = quantize_to_blocks(&reps.h1, &qspec, cfg.n_code)?;

        let (m0, t0) = count_mismatches(&blocks_t, &blocks_h0);
        let (m1, t1) = count_mismatches(&blocks_t, &blocks_h1);
        mismatches[0] += m0;
        totals[0] += t0;
        mismatches[1] += m1;
        totals[1] += t1;

        let p_h0 = estimate_crossover(beta_h0, cfg.snr_db)?;
        let p_h1 = estimate_crossover(beta_h1, cfg.snr_db)?;
        for ((q1, q0), qa) in blocks_t.iter().zip(&blocks_h0).zip(&blocks_h1) {
            let enr = enroll(q1, &code)?;
            let auth0 = authenticate(q0, &enr.side, &code, p_h0)?;
            let out0 = ReconOutcome::new(enr.r1.clone(), auth0)?;
            records.push(TrialRecord::new(Hypothesis::H0, out0.eta, k_payload, out0.crc_pass)?);
            h0_etas.push(out0.eta);
            let auth1 = authenticate(qa, &enr.side, &code, p_h1)?;
            let out1 = ReconOutcome::new(enr.r1, auth1)?;
            records.push(TrialRecord::new(Hypothesis::H1, out1.eta, k_payload, out1.crc_pass)?);
            h1_etas.push(out1.eta);
        }
    }

    let curve = roc(&h0_etas, &h1_etas, k_payload)?;
    Ok(MetricsRow {
        preprocessing: cfg.preprocessing,
        nb: cfg.nb,
        n_snapshots: cfg.n_snapshots,
        k_factor_1: cfg.k_factor_1,
        k_factor_2: cfg.k_factor_2,
        beta: cfg.beta,
        snr_db: cfg.snr_db,
        n_code: cfg.n_code,
        rate: cfg.rate,
        n_bits: cfg.n_bits,
        crc_len: cfg.crc_len,
        list_size: cfg.list_size,
        trials: cfg.trials,
        seed: cfg.seed,
        bmr_h0: mismatches[0] as f64 / totals[0] as f64,
        bmr_h1: mismatches[1] as f64 / totals[1] as f64,
        err_recon_h0: post_recon_error(&records, Hypothesis::H0)?,
        err_recon_h1: post_recon_error(&records, Hypothesis::H1)?,
        pd_at_005: pd_at_pfa(&curve, 0.05)?,
        eer: eer(&curve)?,
        mean_iterations: if solver_calls == 0 {
            0.0
        } else {
            solver_iterations as f64 / solver_calls as f64
        },
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

pub const CSV_HEADER: &str = "preprocessing,nb,n_snapshots,k_factor_1,k_factor_2,beta,snr_db,\
n_code,rate,n_bits,crc_len,list_size,trials,seed,bmr_h0,bmr_h1,err_recon_h0,err_recon_h1,\
pd_at_005,eer,mean_iterations,runtime_seconds";

/// Floats to 6 significant digits; integers render exactly.
fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&magnitude) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn render_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(128 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.preprocessing.name(),
            r.nb,
            r.n_snapshots,
            format_float(r.k_factor_1),
            format_float(r.k_factor_2),
            format_float(r.beta),
            format_float(r.snr_db),
            r.n_code,
            format_float(r.rate),
            r.n_bits,
            r.crc_len,
            r.list_size,
            r.trials,
            r.seed,
            format_float(r.bmr_h0),
            format_float(r.bmr_h1),
            format_float(r.err_recon_h0),
            format_float(r.err_recon_h1),
            format_float(r.pd_at_005),
            format_float(r.eer),
            format_float(r.mean_iterations),
            format_float(r.runtime_seconds),
        );
    }
    out
}

pub fn emit_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(rows))?;
    Ok(())
}

/// Reads complex CSI from CSV: each row is one snapshot with `2·nb` numeric
/// fields (re, im interleaved per antenna branch). `group` rows form one
/// matrix (all rows when absent); partial trailing groups are rejected.
pub fn ingest_csi(path: &Path, nb: usize, group: Option<usize>) -> Result<Vec<CsiMatrix>> {
    if nb == 0 {
        return Err(Error::InvalidParameter("antenna branch count must be positive".into()));
    }
    if group == Some(0) {
        return Err(Error::InvalidParameter("group size must be positive".into()));
    }
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 * nb {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected {} comma-separated fields, found {}", 2 * nb, fields.len()),
            });
        }
        let mut re = Vec::with_capacity(nb);
        let mut im = Vec::with_capacity(nb);
        for (j, raw) in fields.iter().enumerate() {
            let v: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("field {} is not a number: {:?}", j + 1, raw.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("field {} is not finite", j + 1),
                });
            }
            if j % 2 == 0 {
                re.push(v);
            } else {
                im.push(v);
            }
        }
        rows.push((re, im));
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("CSI file contains no data rows".into()));
    }
    let group_size = group.unwrap_or(rows.len());
    if !rows.len().is_multiple_of(group_size) {
        return Err(Error::InsufficientData(format!(
            "{} snapshots do not divide into groups of {group_size}",
            rows.len()
        )));
    }
    rows.chunks(group_size)
        .map(|chunk| {
            let g = chunk.len();
            let mut data = Array2::<f64>::zeros((2 * g, nb));
            for (i, (re, im)) in chunk.iter().enumerate() {
                for j in 0..nb {
                    data[[i, j]] = re[j];
                    data[[g + i, j]] = im[j];
                }
            }
            CsiMatrix::from_real(data)
        })
        .collect()
}

fn selfcheck(lines: &mut Vec<String>, name: &str, ok: bool, detail: String) -> Result<()> {
    if ok {
        lines.push(format!("PASS {name}: {detail}"));
        Ok(())
    } else {
        Err(Error::DegenerateInput(format!("selftest {name} failed: {detail}")))
    }
}

/// Quick cross-module invariant suite behind the `selftest` CLI command.
/// Returns one PASS line per check; the first failure aborts with an error.
pub fn selftest() -> Result<Vec<String>> {
    let mut lines = Vec::new();

    // Channel + quantizer against the closed-form sign-flip probability.
    let cfg = ExperimentConfig { trials: 60, ..Default::default() };
    let row = run_point(&cfg, 0)?;
    let oracle = (0.9_f64 / 1.1).acos() / std::f64::consts::PI;
    selfcheck(
        &mut lines,
        "bit-mismatch oracle",
        (row.bmr_h0 - oracle).abs() <= 0.02 && (row.bmr_h1 - 0.5).abs() <= 0.02,
        format!("BMR(H0) {:.4} vs closed form {oracle:.4}, BMR(H1) {:.4}", row.bmr_h0, row.bmr_h1),
    )?;

    // Sparse corruption recovery and the dual-variable box constraint.
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    use rand::Rng as _;
    use rand_distr::StandardNormal;
    let (n, r) = (40, 2);
    let a = Array2::<f64>::from_shape_fn((n, r), |_| rng.sample(StandardNormal));
    let b = Array2::<f64>::from_shape_fn((n, r), |_| rng.sample(StandardNormal));
    let low_rank = a.dot(&b.t());
    let mut corrupted = low_rank.clone();
    for _ in 0..(n * n) / 20 {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        corrupted[[i, j]] += if rng.gen::<bool>() { 5.0 } else { -5.0 };
    }
    let dec = rpca_pcp(&CsiMatrix::from_real(corrupted)?, &AdmmOptions::default())?;
    let rel = (&dec.l - &low_rank).mapv(|x| x * x).sum().sqrt()
        / low_rank.mapv(|x| x * x).sum().sqrt();
    let lambda = 1.0 / (n as f64).sqrt();
    let dual_ok = dec.dual_inf_norm_history.iter().all(|&y| y <= lambda + 1e-8);
    selfcheck(
        &mut lines,
        "sparse-corruption recovery",
        rel <= 1e-4 && dec.converged && dual_ok,
        format!("relative error {rel:.2e}, converged {}, dual box held {dual_ok}", dec.converged),
    )?;

    // Codec identity and two-flip correction.
    let code = PolarSpec::construct(128, 13, 20.0, 8, 0x07, 8)?;
    let mut flips_fixed = 0;
    let trials = 50;
    for _ in 0..trials {
        let q1 = BitBlock { bits: (0..128).map(|_| rng.gen_range(0..2u8)).collect() };
        let enr = enroll(&q1, &code)?;
        let auth = authenticate(&q1, &enr.side, &code, 0.05)?;
        if auth.r_auth != enr.r1 || !auth.crc_pass {
            return Err(Error::DegenerateInput("selftest codec identity failed".into()));
        }
        let mut qu = q1.clone();
        let x = rng.gen_range(0..128);
        let mut y = rng.gen_range(0..127);
        if y >= x {
            y += 1;
        }
        qu.bits[x] ^= 1;
        qu.bits[y] ^= 1;
        if authenticate(&qu, &enr.side, &code, 0.05)?.r_auth == enr.r1 {
            flips_fixed += 1;
        }
    }
    selfcheck(
        &mut lines,
        "reconciliation",
        flips_fixed >= trials - 2,
        format!("identity held on {trials} blocks, two-flip corrected {flips_fixed}/{trials}"),
    )?;

    // Metrics on exchangeable samples sit on the diagonal.
    let h0: Vec<usize> = (0..4000).map(|_| rng.gen_range(0..=13)).collect();
    let h1: Vec<usize> = (0..4000).map(|_| rng.gen_range(0..=13)).collect();
    let curve = roc(&h0, &h1, 13)?;
    let e = eer(&curve)?;
    selfcheck(
        &mut lines,
        "hypothesis-test metrics",
        (e - 0.5).abs() <= 0.05,
        format!("EER on exchangeable samples {e:.3}"),
    )?;

    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write as _;

    #[test]
    fn empty_toml_yields_the_documented_defaults() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.nb, 32);
        assert_eq!(cfg.n_snapshots, 8);
        assert_eq!(cfg.beta, 0.9);
        assert_eq!(cfg.snr_db, 10.0);
        assert_eq!(cfg.n_code, 128);
        assert_eq!(cfg.rate, 0.1);
        assert_eq!(cfg.n_bits, 1);
        assert_eq!(cfg.crc_len, 8);
        assert_eq!(cfg.list_size, 8);
        assert_eq!(cfg.preprocessing, Preprocessing::None);
        assert_eq!(cfg.pca_d, 10);
        assert_eq!(cfg.trials, 500);
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.payload_len(), 13);
    }

    #[test]
    fn toml_round_trip_preserves_filled_fields() {
        let text = r#"
            preprocessing = "arpca"
            snr_db = 15.0
            trials = 7
            seed = 42
            sweep = "snr=5,10,15"
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.preprocessing, Preprocessing::Arpca);
        assert_eq!(cfg.snr_db, 15.0);
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.sweep.as_deref(), Some("snr=5,10,15"));
    }

    #[test]
    fn validation_rejects_out_of_range_configs() {
        let reject = |mutate: &dyn Fn(&mut ExperimentConfig)| {
            let mut cfg = ExperimentConfig::default();
            mutate(&mut cfg);
            assert!(cfg.validate().is_err(), "expected rejection: {cfg:?}");
        };
        let mut empty = ExperimentConfig { trials: 0, ..Default::default() };
        let err = empty.validate().unwrap_err().to_string();
        assert!(err.contains("empty experiment"), "got {err}");
        empty.trials = 1;
        assert!(empty.validate().is_ok());

        reject(&|c| c.beta = 1.5);
        reject(&|c| c.snr_db = f64::NAN);
        reject(&|c| c.n_code = 100);
        reject(&|c| c.rate = 0.0);
        reject(&|c| c.rate = 0.05); // K = 6 <= crc_len = 8
        reject(&|c| c.rate = 1.5);
        reject(&|c| c.n_bits = 0);
        reject(&|c| c.crc_len = 0);
        reject(&|c| c.list_size = 0);
        reject(&|c| c.k_factor_1 = -1.0);
        reject(&|c| {
            c.preprocessing = Preprocessing::Pca;
            c.pca_d = 33;
        });
        reject(&|c| {
            // 2 * 1 * 4 * 1 = 8 bits cannot fill a 128-bit codeword.
            c.n_snapshots = 1;
            c.nb = 4;
        });
        reject(&|c| c.sweep = Some("flux=1,2".into()));

        assert!(ExperimentConfig::from_toml_str("unknown_key = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("preprocessing = \"fancy\"").is_err());
    }

    #[test]
    fn sweep_grammar_parses_lists_and_ranges() {
        let (axis, vals) = parse_sweep_arg("snr=5,10,15").unwrap();
        assert_eq!(axis, SweepAxis::Snr);
        assert_eq!(vals, vec![5.0, 10.0, 15.0]);
        let (axis, vals) = parse_sweep_arg("rate=0.1:0.4:0.1").unwrap();
        assert_eq!(axis, SweepAxis::Rate);
        assert_eq!(vals.len(), 4);
        for (v, e) in vals.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert_abs_diff_eq!(v, &e, epsilon = 1e-12);
        }
        let (axis, vals) = parse_sweep_arg("k=0:10:2").unwrap();
        assert_eq!(axis, SweepAxis::KFactor);
        assert_eq!(vals, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);

        for bad in ["snr", "flux=1", "snr=", "snr=a,b", "rate=0.4:0.1:0.1", "rate=1:2", "snr=1:2:0"] {
            assert!(parse_sweep_arg(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn sweep_expansion_applies_the_axis_per_point() {
        let cfg = ExperimentConfig { sweep: Some("k=0,4".into()), ..Default::default() };
        let points = expand_sweep(&cfg).unwrap();
        assert_eq!(points.len(), 2);
        assert_eq!((points[0].k_factor_1, points[0].k_factor_2), (0.0, 0.0));
        assert_eq!((points[1].k_factor_1, points[1].k_factor_2), (4.0, 4.0));
        assert!(points.iter().all(|p| p.sweep.is_none()));

        let no_sweep = ExperimentConfig::default();
        assert_eq!(expand_sweep(&no_sweep).unwrap(), vec![no_sweep.clone()]);

        // A swept value must still satisfy the config invariants.
        let bad = ExperimentConfig { sweep: Some("rate=0.05,0.1".into()), ..Default::default() };
        assert!(expand_sweep(&bad).is_err());
    }

    #[test]
    fn float_formatting_keeps_six_significant_digits() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(0.194982229), "0.194982");
        assert_eq!(format_float(0.9), "0.900000");
        assert_eq!(format_float(123456.789), "123457");
        assert_eq!(format_float(-0.5), "-0.500000");
        assert_eq!(format_float(1.0e-7), "1.00000e-7");
    }

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            nb: 8,
            n_snapshots: 8,
            n_code: 16,
            rate: 0.25,
            crc_len: 2,
            list_size: 4,
            trials: 3,
            preprocessing: Preprocessing::Arpca,
            ..Default::default()
        }
    }

    #[test]
    fn identical_seeds_reproduce_every_number_except_runtime() {
        let cfg = tiny_config();
        let a = run_point(&cfg, 0).unwrap();
        let b = run_point(&cfg, 0).unwrap();
        let strip = |r: &MetricsRow| MetricsRow { runtime_seconds: 0.0, ..r.clone() };
        assert_eq!(strip(&a), strip(&b));
        let strip_runtime_column = |csv: &str| -> String {
            csv.lines()
                .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(
            strip_runtime_column(&render_csv(std::slice::from_ref(&a))),
            strip_runtime_column(&render_csv(&[b]))
        );
        // A different seed changes the numbers.
        let c = run_point(&ExperimentConfig { seed: 2, ..cfg }, 0).unwrap();
        assert_ne!(strip(&a), strip(&c));
    }

    #[test]
    fn csv_emission_matches_the_declared_layout() {
        let cfg = tiny_config();
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        let csv = render_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let row = lines.next().unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), CSV_HEADER.split(',').count());
        assert_eq!(fields[0], "arpca");
        assert_eq!(fields[1], "8");
        // Every numeric field parses back.
        for f in &fields[1..] {
            assert!(f.parse::<f64>().is_ok(), "unparseable field {f:?}");
        }
        assert!(csv.ends_with('\n'));
        assert_eq!(render_csv(&[]), format!("{CSV_HEADER}\n"));
        // Probabilities are echoed within formatting precision.
        let bmr_h0: f64 = fields[14].parse().unwrap();
        assert_abs_diff_eq!(bmr_h0, rows[0].bmr_h0, epsilon = 1e-5);
    }

    #[test]
    fn small_raw_pipeline_run_matches_the_sign_flip_oracle() {
        let cfg = ExperimentConfig { trials: 40, ..Default::default() };
        let row = run_point(&cfg, 0).unwrap();
        let oracle = (0.9_f64 / 1.1).acos() / std::f64::consts::PI;
        assert_abs_diff_eq!(row.bmr_h0, oracle, epsilon = 0.04);
        assert_abs_diff_eq!(row.bmr_h1, 0.5, epsilon = 0.04);
        assert!(row.err_recon_h1 >= 0.35, "H1 post-reconciliation error {}", row.err_recon_h1);
        assert_eq!(row.mean_iterations, 0.0);
        for p in [row.bmr_h0, row.bmr_h1, row.err_recon_h0, row.err_recon_h1, row.pd_at_005, row.eer]
        {
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn solver_backed_preprocessing_reports_iterations() {
        let row = run_point(&tiny_config(), 0).unwrap();
        assert!(row.mean_iterations > 0.0);
        assert!(row.runtime_seconds > 0.0);
    }

    fn write_temp_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ingest_builds_matrices_with_snapshot_layout() {
        let mut content = String::new();
        for row in 0..4 {
            let fields: Vec<String> =
                (0..64).map(|j| format!("{}.{}", row, j)).collect();
            content.push_str(&fields.join(","));
            content.push('\n');
        }
        let f = write_temp_csv(&content);
        let mats = ingest_csi(f.path(), 32, None).unwrap();
        assert_eq!(mats.len(), 1);
        let m = &mats[0];
        assert_eq!((m.ns(), m.nb()), (8, 32));
        // Row 2's branch 5: re field index 10 -> "2.10", im index 11 -> "2.11".
        assert_abs_diff_eq!(m.data()[[2, 5]], 2.10, epsilon = 1e-12);
        assert_abs_diff_eq!(m.data()[[4 + 2, 5]], 2.11, epsilon = 1e-12);

        let grouped = ingest_csi(f.path(), 32, Some(2)).unwrap();
        assert_eq!(grouped.len(), 2);
        assert_eq!((grouped[0].ns(), grouped[0].nb()), (4, 32));
    }

    #[test]
    fn ingest_rejects_malformed_files() {
        let good_row = vec!["0.0"; 64].join(",");
        let short_row = vec!["0.0"; 63].join(",");
        let f = write_temp_csv(&format!("{good_row}\n{short_row}\n"));
        match ingest_csi(f.path(), 32, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error with line number, got {other:?}"),
        }

        let f = write_temp_csv(&format!("{good_row}\nnot_a_number,{}\n", vec!["0.0"; 63].join(",")));
        assert!(matches!(ingest_csi(f.path(), 32, None), Err(Error::Parse { line: 2, .. })));

        let f = write_temp_csv("");
        assert!(matches!(ingest_csi(f.path(), 32, None), Err(Error::InsufficientData(_))));

        // 3 rows cannot form groups of 2.
        let f = write_temp_csv(&format!("{good_row}\n{good_row}\n{good_row}\n"));
        assert!(ingest_csi(f.path(), 32, Some(2)).is_err());

        // All-zero data is structurally valid.
        let f = write_temp_csv(&format!("{good_row}\n"));
        let mats = ingest_csi(f.path(), 32, None).unwrap();
        assert!(mats[0].data().iter().all(|&x| x == 0.0));

        assert!(matches!(
            ingest_csi(Path::new("/definitely/not/a/file.csv"), 32, None),
            Err(Error::Io(_))
        ));
    }
}
