//! Polar coding for reconciliation: Gaussian-approximation code
//! construction, the butterfly encoding transform, CRC computation, and
//! CRC-aided successive cancellation list (SCL) decoding in the
//! log-likelihood-ratio domain.
//!
//! Construction tracks one mean LLR `mu` per synthesized bit-channel through
//! the density-evolution surrogate `phi`: a channel split maps `mu` to the
//! degraded child `phi_inv(phi(mu)·(2 − phi(mu)))` and the upgraded child
//! `2·mu`, interleaved so child `2i` is the degraded and `2i+1` the upgraded
//! descendant of parent `i`. The `n_code − k` lowest-`mu` indices freeze.

use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Exponential surrogate for the expected check-node degradation under
/// Gaussian approximation. Two printed fit branches meet at `mu = 10`;
/// output clamped into `(1e-300, 1]`.
pub fn phi(mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("phi requires mu >= 0, got {mu}")));
    }
    Ok(phi_unchecked(mu))
}

fn phi_unchecked(mu: f64) -> f64 {
    let v = if mu <= 10.0 {
        (-0.4527 * mu.powf(0.86) + 0.0218).exp()
    } else {
        (std::f64::consts::PI / mu).sqrt() * (1.0 - 10.0 / mu) * (-mu / 4.0).exp()
    };
    v.clamp(1e-300, 1.0)
}

/// Inverse of `phi` on `(0, 1]`. Values reachable by the first fit branch
/// are inverted by bisection on `[0, 10]`; smaller values are inverted
/// through the monotone tail surrogate `sqrt(pi/mu)·exp(-mu/4)`, since the
/// second fit branch itself is non-monotone just above `mu = 10`.
pub fn phi_inv(y: f64) -> Result<f64> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(Error::InvalidParameter(format!("phi_inv requires y in (0, 1], got {y}")));
    }
    Ok(phi_inv_unchecked(y))
}

fn phi_inv_unchecked(y: f64) -> f64 {
    let phi_at_10 = phi_unchecked(10.0);
    if y >= phi_at_10 {
        if y >= 1.0 {
            return 0.0;
        }
        bisect_decreasing(phi_unchecked, 0.0, 10.0, y)
    } else {
        let tail = |mu: f64| (std::f64::consts::PI / mu).sqrt() * (-mu / 4.0).exp();
        let mut hi = 20.0;
        while tail(hi) > y && hi < 1e6 {
            hi *= 2.0;
        }
        bisect_decreasing(tail, 10.0, hi, y)
    }
}

fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, y: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * (1.0 + lo) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn ga_minus(mu: f64) -> f64 {
    let y = phi_unchecked(mu);
    // 1 - (1 - y)^2 computed as y·(2 - y) to avoid cancellation near y = 0.
    let target = (y * (2.0 - y)).clamp(1e-300, 1.0);
    phi_inv_unchecked(target)
}

/// Mean-LLR reliabilities of all `n_code` synthesized bit-channels for a
/// design channel of mean LLR `mu0`.
pub fn ga_reliabilities(n_code: usize, mu0: f64) -> Result<Vec<f64>> {
    if n_code == 0 || !n_code.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "code length must be a power of two, got {n_code}"
        )));
    }
    if !(mu0.is_finite() && mu0 > 0.0) {
        return Err(Error::InvalidParameter(format!("design mu0 must be positive, got {mu0}")));
    }
    let mut mus = vec![mu0];
    while mus.len() < n_code {
        let mut next = Vec::with_capacity(mus.len() * 2);
        for &m in &mus {
            next.push(ga_minus(m));
            next.push(2.0 * m);
        }
        mus = next;
    }
    Ok(mus)
}

/// A fully specified code: length, dimension, per-channel reliabilities, the
/// frozen index set (ascending), CRC parameters, and the SCL list size.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSpec {
    pub n_code: usize,
    pub k_unfrozen: usize,
    pub crc_len: usize,
    /// CRC generator polynomial, low `crc_len` bits (implicit leading 1).
    pub crc_poly: u64,
    pub list_size: usize,
    pub reliabilities: Vec<f64>,
    pub frozen_set: Vec<usize>,
}

impl PolarSpec {
    /// Builds a code by Gaussian approximation at design mean LLR `mu0`,
    /// freezing the `n_code − k_unfrozen` least reliable channels (ties
    /// break toward the lower index).
    pub fn construct(
        n_code: usize,
        k_unfrozen: usize,
        mu0: f64,
        crc_len: usize,
        crc_poly: u64,
        list_size: usize,
    ) -> Result<Self> {
        if n_code < 2 || !n_code.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "code length must be a power of two >= 2, got {n_code}"
            )));
        }
        if crc_len == 0 || crc_len > 32 {
            return Err(Error::InvalidParameter(format!("crc length must lie in 1..=32, got {crc_len}")));
        }
        if crc_poly >> crc_len != 0 {
            return Err(Error::InvalidParameter(format!(
                "crc polynomial {crc_poly:#x} does not fit in {crc_len} bits"
            )));
        }
        if k_unfrozen <= crc_len || k_unfrozen > n_code {
            return Err(Error::InvalidParameter(format!(
                "code dimension must lie in ({crc_len}, {n_code}], got {k_unfrozen}"
            )));
        }
        if list_size == 0 {
            return Err(Error::InvalidParameter("list size must be at least 1".into()));
        }
        let reliabilities = ga_reliabilities(n_code, mu0)?;
        let mut order: Vec<usize> = (0..n_code).collect();
        order.sort_by(|&a, &b| {
            reliabilities[a]
                .partial_cmp(&reliabilities[b])
                .expect("finite reliabilities")
                .then(a.cmp(&b))
        });
        let mut frozen_set: Vec<usize> = order[..n_code - k_unfrozen].to_vec();
        frozen_set.sort_unstable();
        Ok(Self { n_code, k_unfrozen, crc_len, crc_poly, list_size, reliabilities, frozen_set })
    }

    /// Ascending complement of the frozen set.
    pub fn unfrozen_set(&self) -> Vec<usize> {
        let mut frozen = vec![false; self.n_code];
        for &i in &self.frozen_set {
            frozen[i] = true;
        }
        (0..self.n_code).filter(|&i| !frozen[i]).collect()
    }

    /// FNV-1a digest of everything that determines codec behavior, used to
    /// reject side information produced under a different code.
    pub fn fingerprint(&self) -> u64 {
        let mut h = FNV_OFFSET;
        let mut eat = |v: u64| {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(FNV_PRIME);
            }
        };
        eat(self.n_code as u64);
        eat(self.k_unfrozen as u64);
        eat(self.crc_len as u64);
        eat(self.crc_poly);
        eat(self.list_size as u64);
        for &i in &self.frozen_set {
            eat(i as u64);
        }
        h
    }
}

fn ensure_bits(bits: &[u8], what: &str) -> Result<()> {
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::InvalidParameter(format!("{what} must contain only 0/1 values")));
    }
    Ok(())
}

/// Self-inverse butterfly transform `x = u · F^{⊗log2(n)}` over GF(2),
/// where `F = [[1, 0], [1, 1]]`.
pub fn polar_transform(u: &[u8]) -> Result<Vec<u8>> {
    if u.is_empty() || !u.len().is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "transform length must be a power of two, got {}",
            u.len()
        )));
    }
    ensure_bits(u, "transform input")?;
    Ok(transform_unchecked(u.to_vec()))
}

fn transform_unchecked(mut x: Vec<u8>) -> Vec<u8> {
    let n = x.len();
    let mut len = 1;
    while len < n {
        let mut start = 0;
        while start < n {
            for j in 0..len {
                x[start + j] ^= x[start + len + j];
            }
            start += 2 * len;
        }
        len *= 2;
    }
    x
}

/// CRC remainder of `bits` by long division, MSB first. The generator is
/// `x^m + poly` with `poly` holding the low `m` coefficient bits.
pub fn crc_compute(bits: &[u8], poly: u64, m: usize) -> Result<Vec<u8>> {
    if m == 0 || m > 32 {
        return Err(Error::InvalidParameter(format!("crc length must lie in 1..=32, got {m}")));
    }
    if poly >> m != 0 {
        return Err(Error::InvalidParameter(format!("crc polynomial {poly:#x} does not fit in {m} bits")));
    }
    ensure_bits(bits, "crc input")?;
    let top = 1u64 << m;
    let full = top | poly;
    let mut rem = 0u64;
    for &b in bits.iter().chain(std::iter::repeat_n(&0u8, m)) {
        rem = (rem << 1) | b as u64;
        if rem & top != 0 {
            rem ^= full;
        }
    }
    Ok((0..m).rev().map(|i| ((rem >> i) & 1) as u8).collect())
}

/// Channel log-likelihood ratios `ln(P(bit = 0)/P(bit = 1))`, one per code
/// position. Entries may be infinite (perfect knowledge) but never NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrVector {
    values: Vec<f64>,
}

impl LlrVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidParameter("LLR vector contains NaN".into()));
        }
        Ok(Self { values })
    }

    /// LLRs for a hard-decision word observed through a binary symmetric
    /// channel with crossover probability `p`.
    pub fn from_bsc(bits: &[u8], p: f64) -> Result<Self> {
        let values = bits.iter().map(|&b| llr_from_bsc(b, p)).collect::<Result<Vec<_>>>()?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// LLR of one bit observed through a BSC with crossover `p in (0, 0.5)`:
/// `(1 − 2·bit) · ln((1 − p)/p)`.
pub fn llr_from_bsc(bit: u8, p: f64) -> Result<f64> {
    if bit > 1 {
        return Err(Error::InvalidParameter(format!("bit must be 0 or 1, got {bit}")));
    }
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "crossover probability must lie in (0, 0.5), got {p}"
        )));
    }
    let mag = ((1.0 - p) / p).ln();
    Ok(if bit == 0 { mag } else { -mag })
}

/// Decoder output: the `k_unfrozen` recovered payload bits, whether any
/// surviving path matched the CRC target (always `false` when no target is
/// supplied), and the selected path's metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SclOutcome {
    pub bits: Vec<u8>,
    pub crc_pass: bool,
    pub path_metric: f64,
}

/// Exact check-node combination in the LLR domain:
/// `f(a, b) = sign(a)·sign(b)·min(|a|, |b|) + log1p(e^{−|a+b|}) −
/// log1p(e^{−|a−b|})`. Infinite inputs reduce to the hard min rule.
fn boxplus(a: f64, b: f64) -> f64 {
    let hard = a.signum() * b.signum() * a.abs().min(b.abs());
    if a.is_infinite() || b.is_infinite() {
        return hard;
    }
    hard + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// Variable-node combination `(−1)^c · a + b`; opposing infinities cancel
/// to zero (the two branches carry perfectly contradictory knowledge).
fn g_combine(a: f64, b: f64, c: u8) -> f64 {
    let s = if c == 1 { -a } else { a };
    if s.is_infinite() && b.is_infinite() && (s > 0.0) != (b > 0.0) {
        return 0.0;
    }
    s + b
}

/// `−ln P(bit | llr)`: softplus of the disagreeing-sign LLR. Evaluates
/// correctly for infinite LLRs in plain arithmetic (0 when they agree,
/// +inf when they contradict).
fn penalty(llr: f64, bit: u8) -> f64 {
    let x = if bit == 1 { llr } else { -llr };
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Clone)]
struct Path {
    /// Decisions u_0..u_{i−1}.
    u: Vec<u8>,
    /// LLR working stack: level 0 holds the channel LLRs, level d the
    /// current node values at depth d (length `n >> d`).
    stack: Vec<Vec<f64>>,
    pm: f64,
}

/// CRC-aided SCL decoding. `frozen_values` supplies the frozen bits in
/// ascending frozen-set order. With a `crc_target`, the best-metric path
/// whose payload CRC matches is selected (`crc_pass = true`); if none
/// matches — or no target is given — the best-metric path is returned with
/// `crc_pass = false`.
pub fn scl_decode(
    llr: &LlrVector,
    spec: &PolarSpec,
    frozen_values: &[u8],
    crc_target: Option<&[u8]>,
) -> Result<SclOutcome> {
    let n = spec.n_code;
    let levels = n.trailing_zeros() as usize;
    if llr.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "LLR vector length {} does not match code length {n}",
            llr.len()
        )));
    }
    if frozen_values.len() != spec.frozen_set.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} frozen values supplied for {} frozen positions",
            frozen_values.len(),
            spec.frozen_set.len()
        )));
    }
    ensure_bits(frozen_values, "frozen values")?;
    if let Some(t) = crc_target {
        if t.len() != spec.crc_len {
            return Err(Error::DimensionMismatch(format!(
                "CRC target length {} does not match crc_len {}",
                t.len(),
                spec.crc_len
            )));
        }
        ensure_bits(t, "crc target")?;
    }

    let mut frozen_value_at: Vec<Option<u8>> = vec![None; n];
    for (&pos, &val) in spec.frozen_set.iter().zip(frozen_values.iter()) {
        frozen_value_at[pos] = Some(val);
    }

    let mut stack: Vec<Vec<f64>> = (0..=levels).map(|d| vec![0.0; n >> d]).collect();
    stack[0].copy_from_slice(llr.values());
    let mut paths = vec![Path { u: Vec::with_capacity(n), stack, pm: 0.0 }];

    for (i, &frozen) in frozen_value_at.iter().enumerate() {
        // Levels whose node changes at leaf i: all of them for i = 0, else
        // from the level above the lowest flipped address bit downward.
        let from = if i == 0 { 1 } else { levels - i.trailing_zeros() as usize };
        for path in &mut paths {
            for d in from..=levels {
                let len = n >> d;
                let dir = (i >> (levels - d)) & 1;
                if dir == 0 {
                    for j in 0..len {
                        let a = path.stack[d - 1][j];
                        let b = path.stack[d - 1][j + len];
                        path.stack[d][j] = boxplus(a, b);
                    }
                } else {
                    // Partial sums: the left sibling's decided leaves,
                    // re-encoded into its local codeword.
                    let node = i >> (levels - d);
                    let left_start = (node - 1) * len;
                    let c = transform_unchecked(path.u[left_start..left_start + len].to_vec());
                    for (j, &cj) in c.iter().enumerate() {
                        let a = path.stack[d - 1][j];
                        let b = path.stack[d - 1][j + len];
                        path.stack[d][j] = g_combine(a, b, cj);
                    }
                }
            }
        }

        if let Some(fv) = frozen {
            for path in &mut paths {
                let l = path.stack[levels][0];
                path.u.push(fv);
                path.pm += penalty(l, fv);
            }
        } else {
            let mut children = Vec::with_capacity(paths.len() * 2);
            for path in paths.drain(..) {
                let l = path.stack[levels][0];
                let mut c0 = path.clone();
                c0.u.push(0);
                c0.pm += penalty(l, 0);
                children.push(c0);
                let mut c1 = path;
                c1.u.push(1);
                c1.pm += penalty(l, 1);
                children.push(c1);
            }
            // Stable sort: on metric ties the earlier parent and the 0-bit
            // child win, keeping decoding deterministic.
            children.sort_by(|a, b| a.pm.partial_cmp(&b.pm).expect("metrics never NaN"));
            children.truncate(spec.list_size);
            paths = children;
            assert!(
                paths.windows(2).all(|w| w[0].pm <= w[1].pm),
                "surviving path metrics must be sorted ascending after pruning"
            );
        }
    }

    // Frozen-bit penalties after the last fork can reorder paths.
    paths.sort_by(|a, b| a.pm.partial_cmp(&b.pm).expect("metrics never NaN"));
    let unfrozen = spec.unfrozen_set();
    let extract = |p: &Path| -> Vec<u8> { unfrozen.iter().map(|&pos| p.u[pos]).collect() };
    if let Some(target) = crc_target {
        for p in &paths {
            let payload = extract(p);
            if crc_compute(&payload, spec.crc_poly, spec.crc_len)? == target {
                return Ok(SclOutcome { bits: payload, crc_pass: true, path_metric: p.pm });
            }
        }
    }
    let best = &paths[0];
    Ok(SclOutcome { bits: extract(best), crc_pass: false, path_metric: best.pm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn phi_matches_frozen_reference_values() {
        assert_abs_diff_eq!(phi(2.0).unwrap(), 0.449388349908443, epsilon = 1e-12);
        assert_abs_diff_eq!(phi(4.0).unwrap(), 0.230026993461780, epsilon = 1e-12);
        assert_abs_diff_eq!(phi(5.0).unwrap(), 0.167786857651966, epsilon = 1e-12);
        assert_abs_diff_eq!(phi(12.0).unwrap(), 4.245703064266079e-3, epsilon = 1e-15);
        assert_eq!(phi(0.0).unwrap(), 1.0);
        assert!(phi(-0.1).is_err());
        assert!(phi(f64::NAN).is_err());
        assert!(phi(f64::INFINITY).is_err());
    }

    #[test]
    fn phi_is_nonincreasing_on_the_first_branch() {
        let mut last = f64::INFINITY;
        for i in 0..=1000 {
            let v = phi(10.0 * i as f64 / 1000.0).unwrap();
            assert!(v <= last + 1e-15);
            assert!(v > 0.0 && v <= 1.0);
            last = v;
        }
    }

    #[test]
    fn phi_inv_round_trips_on_the_first_branch() {
        assert_eq!(phi_inv(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(phi_inv(phi(5.0).unwrap()).unwrap(), 5.0, epsilon = 1e-6);
        assert_abs_diff_eq!(phi_inv(phi(2.0).unwrap()).unwrap(), 2.0, epsilon = 1e-6);
        let phi10 = phi(10.0).unwrap();
        let mut y = 1.0_f64;
        while y >= phi10 {
            let err = (phi(phi_inv(y).unwrap()).unwrap() - y).abs();
            assert!(err <= 1e-9, "round trip error {err} at y = {y}");
            y *= 0.93;
        }
        assert!(phi_inv(0.0).is_err());
        assert!(phi_inv(-0.1).is_err());
        assert!(phi_inv(1.1).is_err());
        assert!(phi_inv(f64::NAN).is_err());
    }

    #[test]
    fn phi_inv_inverts_the_tail_surrogate_below_the_branch_point() {
        let tail = |mu: f64| (std::f64::consts::PI / mu).sqrt() * (-mu / 4.0).exp();
        let mut last_mu = 10.0;
        let mut y = 0.03_f64;
        while y >= 1e-12 {
            let mu = phi_inv(y).unwrap();
            assert!(mu >= last_mu - 1e-9, "phi_inv must grow as y shrinks");
            let rel = (tail(mu) - y).abs() / y;
            assert!(rel <= 1e-9, "surrogate inversion error {rel} at y = {y}");
            last_mu = mu;
            y *= 0.4;
        }
    }

    #[test]
    fn ga_reliabilities_match_frozen_small_cases() {
        assert_eq!(ga_reliabilities(1, 7.5).unwrap(), vec![7.5]);
        let two = ga_reliabilities(2, 2.0).unwrap();
        assert_abs_diff_eq!(two[0], 0.823364232329, epsilon = 1e-6);
        assert_eq!(two[1], 4.0);
        let four = ga_reliabilities(4, 2.0).unwrap();
        let expect = [0.20986387, 1.64672846, 2.28207322, 8.0];
        for (a, e) in four.iter().zip(expect.iter()) {
            assert_abs_diff_eq!(a, e, epsilon = 1e-6);
        }
        // The all-upgraded channel doubles exactly each stage.
        assert_eq!(ga_reliabilities(8, 2.0).unwrap()[7], 16.0);
        assert_eq!(ga_reliabilities(128, 20.0).unwrap()[127], 2560.0);
        assert!(ga_reliabilities(3, 2.0).is_err());
        assert!(ga_reliabilities(4, 0.0).is_err());
    }

    #[test]
    fn child_reliabilities_sandwich_the_parent_on_the_first_branch() {
        // mu⁻ <= mu <= mu⁺ is rigorous while phi stays on its first fit
        // branch (mu <= 10); the printed second branch is non-monotone just
        // above 10, so only the doubling half is asserted there.
        for &mu0 in &[0.5, 2.0, 5.0] {
            let mut parents = vec![mu0];
            for _ in 0..6 {
                let mut next = Vec::new();
                for &m in &parents {
                    let minus = ga_minus(m);
                    let plus = 2.0 * m;
                    assert!(plus >= m);
                    if m <= 10.0 {
                        assert!(minus <= m + 1e-9, "mu = {m}: minus child {minus}");
                    }
                    next.push(minus);
                    next.push(plus);
                }
                parents = next;
            }
        }
    }

    #[test]
    fn frozen_sets_match_reference_constructions() {
        let spec = PolarSpec::construct(8, 4, 5.0, 2, 0b11, 1).unwrap();
        assert_eq!(spec.frozen_set, vec![0, 1, 2, 4]);
        assert_eq!(spec.unfrozen_set(), vec![3, 5, 6, 7]);
        let spec = PolarSpec::construct(128, 13, 20.0, 8, 0x07, 8).unwrap();
        assert_eq!(
            spec.unfrozen_set(),
            vec![31, 61, 62, 63, 95, 111, 119, 122, 123, 124, 125, 126, 127]
        );
    }

    #[test]
    fn frozen_sets_are_nested_in_the_rate() {
        let mut prev_unfrozen: Option<Vec<usize>> = None;
        for k in 9..=20 {
            let spec = PolarSpec::construct(128, k, 20.0, 8, 0x07, 1).unwrap();
            let unfrozen = spec.unfrozen_set();
            assert_eq!(unfrozen.len(), k);
            if let Some(prev) = prev_unfrozen {
                let missing: Vec<_> = prev.iter().filter(|i| !unfrozen.contains(i)).collect();
                assert!(missing.is_empty(), "unfrozen sets must be nested, lost {missing:?}");
            }
            prev_unfrozen = Some(unfrozen);
        }
    }

    #[test]
    fn construct_rejects_invalid_parameters() {
        assert!(PolarSpec::construct(24, 4, 5.0, 2, 0b11, 1).is_err());
        assert!(PolarSpec::construct(8, 2, 5.0, 2, 0b11, 1).is_err());
        assert!(PolarSpec::construct(8, 9, 5.0, 2, 0b11, 1).is_err());
        assert!(PolarSpec::construct(8, 4, 5.0, 2, 0b100, 1).is_err());
        assert!(PolarSpec::construct(8, 4, 5.0, 0, 0, 1).is_err());
        assert!(PolarSpec::construct(8, 4, 5.0, 2, 0b11, 0).is_err());
    }

    #[test]
    fn fingerprint_distinguishes_codes() {
        let a = PolarSpec::construct(128, 13, 20.0, 8, 0x07, 8).unwrap();
        let b = PolarSpec::construct(128, 14, 20.0, 8, 0x07, 8).unwrap();
        let c = PolarSpec::construct(128, 13, 20.0, 8, 0x07, 8).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn transform_matches_worked_examples_and_is_an_involution() {
        assert_eq!(polar_transform(&[0, 1]).unwrap(), vec![1, 1]);
        assert_eq!(polar_transform(&[1, 1]).unwrap(), vec![0, 1]);
        assert_eq!(polar_transform(&[1, 0]).unwrap(), vec![1, 0]);
        assert_eq!(polar_transform(&[0, 0, 0, 0]).unwrap(), vec![0, 0, 0, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..20 {
            let u: Vec<u8> = (0..256).map(|_| rng.gen_range(0..2u8)).collect();
            let x = polar_transform(&u).unwrap();
            assert_eq!(polar_transform(&x).unwrap(), u);
        }
        assert!(polar_transform(&[0, 1, 0]).is_err());
        assert!(polar_transform(&[0, 2]).is_err());
        assert!(polar_transform(&[]).is_err());
    }

    #[test]
    fn transform_matches_dense_kronecker_oracle() {
        // Independent route: explicit F^{⊗3} over GF(2), F = [[1,0],[1,1]].
        let mut f = vec![vec![1u8]];
        for _ in 0..3 {
            let sz = f.len();
            let mut nf = vec![vec![0u8; 2 * sz]; 2 * sz];
            for i in 0..sz {
                for j in 0..sz {
                    nf[i][j] = f[i][j];
                    nf[i + sz][j] = f[i][j];
                    nf[i + sz][j + sz] = f[i][j];
                }
            }
            f = nf;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for _ in 0..50 {
            let u: Vec<u8> = (0..8).map(|_| rng.gen_range(0..2u8)).collect();
            let expect: Vec<u8> = (0..8)
                .map(|j| (0..8).fold(0u8, |acc, i| acc ^ (u[i] & f[i][j])))
                .collect();
            assert_eq!(polar_transform(&u).unwrap(), expect);
        }
    }

    #[test]
    fn crc_matches_worked_examples() {
        assert_eq!(crc_compute(&[0; 16], 0x07, 8).unwrap(), vec![0; 8]);
        assert_eq!(crc_compute(&[1], 0x07, 8).unwrap(), vec![0, 0, 0, 0, 0, 1, 1, 1]);
        assert!(crc_compute(&[1], 0x100, 8).is_err());
        assert!(crc_compute(&[1], 0x07, 0).is_err());
        assert!(crc_compute(&[2], 0x07, 8).is_err());
    }

    #[test]
    fn message_with_appended_crc_divides_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..50 {
            let msg: Vec<u8> = (0..13).map(|_| rng.gen_range(0..2u8)).collect();
            let crc = crc_compute(&msg, 0x07, 8).unwrap();
            let mut framed = msg.clone();
            framed.extend_from_slice(&crc);
            assert_eq!(crc_compute(&framed, 0x07, 8).unwrap(), vec![0; 8]);
        }
    }

    #[test]
    fn crc_matches_naive_polynomial_division_oracle() {
        // Independent route: polynomial long division over bit vectors.
        let naive = |bits: &[u8], poly_bits: &[u8]| -> Vec<u8> {
            let m = poly_bits.len() - 1;
            let mut work: Vec<u8> = bits.to_vec();
            work.extend(std::iter::repeat_n(0, m));
            for i in 0..bits.len() {
                if work[i] == 1 {
                    for (j, &p) in poly_bits.iter().enumerate() {
                        work[i + j] ^= p;
                    }
                }
            }
            work[bits.len()..].to_vec()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        // x^8 + x^2 + x + 1 and x^4 + x + 1.
        for (poly, m, poly_bits) in [
            (0x07u64, 8usize, vec![1, 0, 0, 0, 0, 0, 1, 1, 1]),
            (0x3, 4, vec![1, 0, 0, 1, 1]),
        ] {
            for _ in 0..30 {
                let len = rng.gen_range(1..40);
                let msg: Vec<u8> = (0..len).map(|_| rng.gen_range(0..2u8)).collect();
                assert_eq!(crc_compute(&msg, poly, m).unwrap(), naive(&msg, &poly_bits));
            }
        }
    }

    #[test]
    fn bsc_llr_matches_formula() {
        let mag = (0.9_f64 / 0.1).ln();
        assert_abs_diff_eq!(llr_from_bsc(0, 0.1).unwrap(), mag, epsilon = 1e-15);
        assert_abs_diff_eq!(llr_from_bsc(1, 0.1).unwrap(), -mag, epsilon = 1e-15);
        assert!(llr_from_bsc(0, 0.0).is_err());
        assert!(llr_from_bsc(0, 0.5).is_err());
        assert!(llr_from_bsc(2, 0.1).is_err());
        assert!(LlrVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(LlrVector::new(vec![f64::INFINITY]).is_ok());
    }

    fn random_codeword_instance(
        spec: &PolarSpec,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
        // Random frozen values and payload; returns (frozen_values, payload, codeword).
        let frozen_values: Vec<u8> = (0..spec.frozen_set.len()).map(|_| rng.gen_range(0..2u8)).collect();
        let payload: Vec<u8> = (0..spec.k_unfrozen).map(|_| rng.gen_range(0..2u8)).collect();
        let mut u = vec![0u8; spec.n_code];
        for (&pos, &v) in spec.frozen_set.iter().zip(frozen_values.iter()) {
            u[pos] = v;
        }
        for (&pos, &v) in spec.unfrozen_set().iter().zip(payload.iter()) {
            u[pos] = v;
        }
        let x = polar_transform(&u).unwrap();
        (frozen_values, payload, x)
    }

    #[test]
    fn noiseless_infinite_llrs_decode_exactly() {
        let spec = PolarSpec::construct(32, 10, 4.0, 4, 0x3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        for _ in 0..20 {
            let (frozen_values, payload, x) = random_codeword_instance(&spec, &mut rng);
            let llr = LlrVector::new(
                x.iter().map(|&b| if b == 0 { f64::INFINITY } else { f64::NEG_INFINITY }).collect(),
            )
            .unwrap();
            let crc = crc_compute(&payload, spec.crc_poly, spec.crc_len).unwrap();
            let out = scl_decode(&llr, &spec, &frozen_values, Some(&crc)).unwrap();
            assert_eq!(out.bits, payload);
            assert!(out.crc_pass);
            assert_eq!(out.path_metric, 0.0);
        }
    }

    /// Independent oracle: textbook recursive successive cancellation.
    /// Returns the decided u vector; `decided` grows leaf by leaf.
    fn sc_oracle(llrs: &[f64], frozen_value_at: &[Option<u8>], decided: &mut Vec<u8>) -> Vec<u8> {
        let n = llrs.len();
        if n == 1 {
            let bit = match frozen_value_at[decided.len()] {
                Some(b) => b,
                None => u8::from(llrs[0] < 0.0),
            };
            decided.push(bit);
            return vec![bit];
        }
        let half = n / 2;
        let f: Vec<f64> = (0..half).map(|j| boxplus(llrs[j], llrs[j + half])).collect();
        let left = sc_oracle(&f, frozen_value_at, decided);
        let g: Vec<f64> = (0..half).map(|j| g_combine(llrs[j], llrs[j + half], left[j])).collect();
        let right = sc_oracle(&g, frozen_value_at, decided);
        let mut code: Vec<u8> = left.iter().zip(right.iter()).map(|(a, b)| a ^ b).collect();
        code.extend_from_slice(&right);
        code
    }

    #[test]
    fn list_size_one_equals_recursive_sc() {
        let spec = PolarSpec::construct(64, 20, 3.0, 4, 0x3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let mut frozen_value_at: Vec<Option<u8>> = vec![None; spec.n_code];
        for _ in 0..300 {
            let frozen_values: Vec<u8> =
                (0..spec.frozen_set.len()).map(|_| rng.gen_range(0..2u8)).collect();
            frozen_value_at.iter_mut().for_each(|v| *v = None);
            for (&pos, &v) in spec.frozen_set.iter().zip(frozen_values.iter()) {
                frozen_value_at[pos] = Some(v);
            }
            let llrs: Vec<f64> = (0..spec.n_code).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let mut decided = Vec::with_capacity(spec.n_code);
            sc_oracle(&llrs, &frozen_value_at, &mut decided);
            let expect: Vec<u8> = spec.unfrozen_set().iter().map(|&i| decided[i]).collect();
            let out = scl_decode(&LlrVector::new(llrs).unwrap(), &spec, &frozen_values, None).unwrap();
            assert_eq!(out.bits, expect);
            assert!(!out.crc_pass);
        }
    }

    /// With a list wide enough to cover every payload, SCL must match
    /// brute-force maximum likelihood, and its path metric must equal the
    /// codeword-domain metric exactly.
    #[test]
    fn full_width_list_equals_brute_force_ml() {
        let spec = PolarSpec::construct(8, 4, 3.0, 2, 0x3, 16).unwrap();
        let unfrozen = spec.unfrozen_set();
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..300 {
            let frozen_values: Vec<u8> =
                (0..spec.frozen_set.len()).map(|_| rng.gen_range(0..2u8)).collect();
            let llrs: Vec<f64> = (0..8).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect();
            let mut best_metric = f64::INFINITY;
            let mut best_payload = Vec::new();
            for cand in 0..1u32 << spec.k_unfrozen {
                let payload: Vec<u8> =
                    (0..spec.k_unfrozen).map(|b| ((cand >> b) & 1) as u8).collect();
                let mut u = vec![0u8; 8];
                for (&pos, &v) in spec.frozen_set.iter().zip(frozen_values.iter()) {
                    u[pos] = v;
                }
                for (&pos, &v) in unfrozen.iter().zip(payload.iter()) {
                    u[pos] = v;
                }
                let x = polar_transform(&u).unwrap();
                let metric: f64 = x.iter().zip(llrs.iter()).map(|(&b, &l)| penalty(l, b)).sum();
                if metric < best_metric {
                    best_metric = metric;
                    best_payload = payload;
                }
            }
            let out =
                scl_decode(&LlrVector::new(llrs).unwrap(), &spec, &frozen_values, None).unwrap();
            assert_eq!(out.bits, best_payload);
            assert_abs_diff_eq!(out.path_metric, best_metric, epsilon = 1e-9);
        }
    }

    #[test]
    fn two_bit_flips_are_corrected_with_high_probability() {
        let spec = PolarSpec::construct(128, 13, 20.0, 8, 0x07, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        let mut successes = 0;
        let trials = 300;
        for t in 0..trials {
            let (frozen_values, payload, x) = random_codeword_instance(&spec, &mut rng);
            let mut noisy = x.clone();
            let flips = t % 3;
            let mut positions: Vec<usize> = (0..128).collect();
            for f in 0..flips {
                let pick = rng.gen_range(f..positions.len());
                positions.swap(f, pick);
                noisy[positions[f]] ^= 1;
            }
            let crc = crc_compute(&payload, spec.crc_poly, spec.crc_len).unwrap();
            let llr = LlrVector::from_bsc(&noisy, 0.05).unwrap();
            let out = scl_decode(&llr, &spec, &frozen_values, Some(&crc)).unwrap();
            if out.bits == payload && out.crc_pass {
                successes += 1;
            }
        }
        let rate = successes as f64 / trials as f64;
        assert!(rate >= 0.99, "corrected {successes}/{trials}");
    }

    #[test]
    fn decode_validates_input_shapes() {
        let spec = PolarSpec::construct(8, 4, 3.0, 2, 0x3, 2).unwrap();
        let llr =
            LlrVector::new(vec![0.5; 8]).unwrap();
        let short = LlrVector::new(vec![0.5; 4]).unwrap();
        assert!(scl_decode(&short, &spec, &[0; 4], None).is_err());
        assert!(scl_decode(&llr, &spec, &[0; 3], None).is_err());
        assert!(scl_decode(&llr, &spec, &[0; 4], Some(&[0, 0, 0])).is_err());
        let out = scl_decode(&llr, &spec, &[0; 4], None).unwrap();
        assert!(out.path_metric.is_finite() && out.path_metric >= 0.0);
    }
}
