//! Slepian–Wolf reconciliation over the polar codec: enrollment turns a
//! quantized block into a payload plus published side information (frozen
//! values and a CRC), and authentication decodes a later noisy block against
//! that side information. The authenticator then compares the two payloads.

use crate::error::{Error, Result};
use crate::polar::{crc_compute, polar_transform, scl_decode, LlrVector, PolarSpec};
use crate::quantizer::BitBlock;

/// Published helper data for one block: the frozen-position values of
/// `u = transform(q1)` and a CRC over the unfrozen payload, tied to the
/// generating code by its fingerprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideInfo {
    pub frozen_values: Vec<u8>,
    pub crc: Vec<u8>,
    pub spec_id: u64,
}

impl SideInfo {
    /// Bits an observer learns per block: N − K frozen values plus the
    /// m-bit CRC.
    pub fn leaked_bits(&self) -> usize {
        self.frozen_values.len() + self.crc.len()
    }

    /// Wire format: two big-endian u16 length fields (N − K, then m),
    /// followed by `frozen_values ++ crc` packed MSB-first and zero-padded
    /// to a byte boundary.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nk = self.frozen_values.len();
        let m = self.crc.len();
        let mut out = Vec::with_capacity(4 + (nk + m).div_ceil(8));
        out.extend_from_slice(&(nk as u16).to_be_bytes());
        out.extend_from_slice(&(m as u16).to_be_bytes());
        let mut acc = 0u8;
        let mut filled = 0;
        for &b in self.frozen_values.iter().chain(self.crc.iter()) {
            acc = (acc << 1) | b;
            filled += 1;
            if filled == 8 {
                out.push(acc);
                acc = 0;
                filled = 0;
            }
        }
        if filled > 0 {
            out.push(acc << (8 - filled));
        }
        out
    }

    /// Parses the wire format, validating every length against `spec` and
    /// requiring zero padding bits.
    pub fn from_bytes(bytes: &[u8], spec: &PolarSpec) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Parse {
                line: 0,
                msg: format!("side information needs at least 4 header bytes, got {}", bytes.len()),
            });
        }
        let nk = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
        let m = u16::from_be_bytes([bytes[2], bytes[3]]) as usize;
        let expected_nk = spec.n_code - spec.k_unfrozen;
        if nk != expected_nk || m != spec.crc_len {
            return Err(Error::Parse {
                line: 0,
                msg: format!(
                    "side information declares {nk} frozen + {m} crc bits, code expects {expected_nk} + {}",
                    spec.crc_len
                ),
            });
        }
        let payload = &bytes[4..];
        let need = (nk + m).div_ceil(8);
        if payload.len() != need {
            return Err(Error::Parse {
                line: 0,
                msg: format!("side information payload is {} bytes, expected {need}", payload.len()),
            });
        }
        let bits: Vec<u8> = payload
            .iter()
            .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1))
            .collect();
        if bits[nk + m..].iter().any(|&b| b != 0) {
            return Err(Error::Parse { line: 0, msg: "nonzero padding bits in side information".into() });
        }
        Ok(Self {
            frozen_values: bits[..nk].to_vec(),
            crc: bits[nk..nk + m].to_vec(),
            spec_id: spec.fingerprint(),
        })
    }
}

/// Result of enrolling one block: the K-bit payload retained by the
/// authenticator and the side information to publish.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enrollment {
    pub r1: Vec<u8>,
    pub side: SideInfo,
}

/// Raw decoder output for one authentication block.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthResult {
    pub r_auth: Vec<u8>,
    pub crc_pass: bool,
    pub path_metric: f64,
}

/// One block's reconciliation outcome as consumed by the hypothesis test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReconOutcome {
    pub r_enroll: Vec<u8>,
    pub r_auth: Vec<u8>,
    pub crc_pass: bool,
    /// Hamming distance between the two payloads, in `0..=K`.
    pub eta: usize,
}

impl ReconOutcome {
    pub fn new(r_enroll: Vec<u8>, auth: AuthResult) -> Result<Self> {
        if r_enroll.len() != auth.r_auth.len() {
            return Err(Error::DimensionMismatch(format!(
                "payload lengths differ: {} vs {}",
                r_enroll.len(),
                auth.r_auth.len()
            )));
        }
        let eta = r_enroll.iter().zip(auth.r_auth.iter()).filter(|(a, b)| a != b).count();
        Ok(Self { r_enroll, r_auth: auth.r_auth, crc_pass: auth.crc_pass, eta })
    }
}

/// Enrollment: `u = transform(q1)` (the transform is self-inverse, so
/// `transform(u) = q1`), payload = unfrozen positions of `u`, side
/// information = frozen positions plus CRC(payload).
pub fn enroll(q1: &BitBlock, spec: &PolarSpec) -> Result<Enrollment> {
    if q1.bits.len() != spec.n_code {
        return Err(Error::DimensionMismatch(format!(
            "block length {} does not match code length {}",
            q1.bits.len(),
            spec.n_code
        )));
    }
    let u = polar_transform(&q1.bits)?;
    let r1: Vec<u8> = spec.unfrozen_set().iter().map(|&i| u[i]).collect();
    let frozen_values: Vec<u8> = spec.frozen_set.iter().map(|&i| u[i]).collect();
    let crc = crc_compute(&r1, spec.crc_poly, spec.crc_len)?;
    Ok(Enrollment { r1, side: SideInfo { frozen_values, crc, spec_id: spec.fingerprint() } })
}

/// Authentication: models `qu` as the enrolled block seen through a BSC
/// with crossover `p_channel` and runs CRC-aided SCL decoding against the
/// published side information. On CRC failure the best-metric path is still
/// returned (flagged) so the caller can compute a large Hamming distance
/// rather than dropping the trial.
pub fn authenticate(
    qu: &BitBlock,
    side: &SideInfo,
    spec: &PolarSpec,
    p_channel: f64,
) -> Result<AuthResult> {
    if qu.bits.len() != spec.n_code {
        return Err(Error::DimensionMismatch(format!(
            "block length {} does not match code length {}",
            qu.bits.len(),
            spec.n_code
        )));
    }
    if side.spec_id != spec.fingerprint() {
        return Err(Error::InvalidParameter(
            "side information was generated under a different code".into(),
        ));
    }
    if side.frozen_values.len() != spec.frozen_set.len() || side.crc.len() != spec.crc_len {
        return Err(Error::DimensionMismatch(
            "side information lengths do not match the code".into(),
        ));
    }
    let llr = LlrVector::from_bsc(&qu.bits, p_channel)?;
    let out = scl_decode(&llr, spec, &side.frozen_values, Some(&side.crc))?;
    Ok(AuthResult { r_auth: out.bits, crc_pass: out.crc_pass, path_metric: out.path_metric })
}

/// Decoder design crossover from the channel estimate: the probability that
/// one Gaussian branch of the observed pair flips sign relative to the
/// other, `(1/π)·arccos(β̂/(1 + 10^(−SNR/10)))`, clamped into `[0.01, 0.49]`
/// so the BSC LLRs stay finite.
pub fn estimate_crossover(beta_hat: f64, snr_db: f64) -> Result<f64> {
    if !beta_hat.is_finite() || !snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "crossover estimate requires finite inputs, got beta_hat={beta_hat}, snr_db={snr_db}"
        )));
    }
    let ratio = beta_hat / (1.0 + 10f64.powf(-snr_db / 10.0));
    let p = ratio.clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
    Ok(p.clamp(0.01, 0.49))
}
