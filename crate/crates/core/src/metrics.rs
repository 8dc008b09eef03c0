//! Hypothesis testing on reconciled outputs and aggregate performance
//! metrics: the threshold decision rule, ROC construction, detection
//! probability at a false-alarm budget, equal error rate, and
//! post-reconciliation bit error probability.
//!
//! Conventions (the decision accepts when `eta <= eta_th`):
//! `P_D` is the fraction of intruder (H1) trials with `eta > eta_th`
//! (attacker detected); `P_FA` is the fraction of legitimate (H0) trials
//! with `eta > eta_th` (legitimate user rejected).

use crate::error::{Error, Result};

/// Ground-truth label (or decision) for one authentication trial:
/// `H0` = same transmitter as enrollment, `H1` = different transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

/// One Monte-Carlo trial's outcome as consumed by the aggregators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub hypothesis: Hypothesis,
    pub eta: usize,
    pub k_bits: usize,
    pub crc_pass: bool,
}

impl TrialRecord {
    pub fn new(hypothesis: Hypothesis, eta: usize, k_bits: usize, crc_pass: bool) -> Result<Self> {
        if k_bits == 0 || eta > k_bits {
            return Err(Error::InvalidParameter(format!(
                "Hamming distance {eta} outside 0..={k_bits}"
            )));
        }
        Ok(Self { hypothesis, eta, k_bits, crc_pass })
    }
}

/// A point on the receiver operating characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub p_fa: f64,
    pub p_d: f64,
}

/// ROC curve with `p_fa` strictly ascending and `p_d` nondecreasing,
/// always reaching the all-reject endpoint (1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// Acceptance rule of the hypothesis test: accept (`H0`) iff
/// `eta <= eta_th`, reject (`H1`) otherwise.
pub fn decide(eta: usize, eta_th: usize) -> Hypothesis {
    if eta <= eta_th {
        Hypothesis::H0
    } else {
        Hypothesis::H1
    }
}

/// Builds the ROC by sweeping the integer threshold from `k` (accept all
/// distances) down to the degenerate always-reject threshold below zero,
/// so the curve spans (0, ·) through (1, 1). Equal-`p_fa` runs collapse to
/// their best `p_d`.
pub fn roc(h0_etas: &[usize], h1_etas: &[usize], k: usize) -> Result<RocCurve> {
    if h0_etas.is_empty() || h1_etas.is_empty() {
        return Err(Error::InsufficientData("ROC requires samples under both hypotheses".into()));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("ROC requires k >= 1".into()));
    }
    for (name, etas) in [("H0", h0_etas), ("H1", h1_etas)] {
        if let Some(&bad) = etas.iter().find(|&&e| e > k) {
            return Err(Error::InvalidParameter(format!("{name} distance {bad} exceeds k = {k}")));
        }
    }
    // exceed[h][t] = number of trials with eta > t, via suffix sums of the
    // eta histogram; index t+1 so t = -1 lands at index 0.
    let tail_fractions = |etas: &[usize]| -> Vec<f64> {
        let mut hist = vec![0usize; k + 1];
        for &e in etas {
            hist[e] += 1;
        }
        let mut tails = vec![0usize; k + 2];
        for t in (0..=k).rev() {
            tails[t] = tails[t + 1] + hist[t];
        }
        let n = etas.len() as f64;
        tails.iter().map(|&c| c as f64 / n).collect()
    };
    let h0_tail = tail_fractions(h0_etas);
    let h1_tail = tail_fractions(h1_etas);
    let mut points: Vec<RocPoint> = Vec::with_capacity(k + 2);
    // Descending threshold t = k, k-1, .., 0, -1 gives ascending tails.
    for idx in (0..=k + 1).rev() {
        let cand = RocPoint { p_fa: h0_tail[idx], p_d: h1_tail[idx] };
        match points.last_mut() {
            // Same p_fa: keep the higher p_d, which is the later (lower-t)
            // candidate since tails grow as the threshold drops.
            Some(last) if last.p_fa == cand.p_fa => last.p_d = cand.p_d,
            _ => points.push(cand),
        }
    }
    Ok(RocCurve { points })
}

/// Detection probability at the largest achievable false-alarm rate not
/// exceeding `pfa_target` (conservative step rule, no interpolation).
pub fn pd_at_pfa(curve: &RocCurve, pfa_target: f64) -> Result<f64> {
    if curve.points.is_empty() {
        return Err(Error::InsufficientData("empty ROC curve".into()));
    }
    if !(0.0..=1.0).contains(&pfa_target) {
        return Err(Error::InvalidParameter(format!(
            "false alarm target must lie in [0, 1], got {pfa_target}"
        )));
    }
    Ok(curve
        .points
        .iter()
        .take_while(|p| p.p_fa <= pfa_target)
        .last()
        .unwrap_or(&curve.points[0])
        .p_d)
}

/// Equal error rate: the value where `P_FA = 1 − P_D = P_MD`, located by
/// scanning thresholds and linearly interpolating between the bracketing
/// pair of ROC points.
pub fn eer(curve: &RocCurve) -> Result<f64> {
    if curve.points.is_empty() {
        return Err(Error::InsufficientData("empty ROC curve".into()));
    }
    // g = p_fa − p_md is nondecreasing along the curve; the EER sits where
    // g crosses zero.
    let g = |p: &RocPoint| p.p_fa - (1.0 - p.p_d);
    let Some(i) = curve.points.iter().position(|p| g(p) >= 0.0) else {
        // No crossing within the curve (it never reaches p_fa = 1 - p_d);
        // the closest approach is the final point.
        let last = curve.points.last().expect("nonempty");
        return Ok(0.5 * (last.p_fa + (1.0 - last.p_d)));
    };
    if i == 0 {
        return Ok(curve.points[0].p_fa.max(1.0 - curve.points[0].p_d));
    }
    let lo = curve.points[i - 1];
    let hi = curve.points[i];
    let denom = (hi.p_fa - lo.p_fa) + (hi.p_d - lo.p_d);
    if denom <= 0.0 {
        return Ok(hi.p_fa);
    }
    let s = (1.0 - lo.p_d - lo.p_fa) / denom;
    Ok(lo.p_fa + s * (hi.p_fa - lo.p_fa))
}

/// Mean normalized Hamming distance `eta / k_bits` over records of one
/// hypothesis: the post-reconciliation bit error probability.
pub fn post_recon_error(records: &[TrialRecord], hypothesis: Hypothesis) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in records.iter().filter(|r| r.hypothesis == hypothesis) {
        sum += r.eta as f64 / r.k_bits as f64;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InsufficientData(format!("no records under {hypothesis:?}")));
    }
    Ok(sum / count as f64)
}
