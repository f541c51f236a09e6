//! Common-index-jump certificates: search, verification, duals.
//!
//! A certificate fixes an integer `N` and one iterate count `m_k` per
//! geodesic such that every index of the `2m_k`-th iterates jumps through
//! the common window around `2N` in the precise sense of the index jump
//! identities. The search is a deterministic exact scan over `N` in
//! multiples of `M0`: candidate fractional parts `{N/(Mbar*ihat_k)}` are
//! tested with integer arithmetic only, never floats, so a found
//! certificate is a proof, not a near miss.
//!
//! Verification replays the full identity battery against the index
//! iteration formula. The splitting-number table enters only here, through
//! the reflection and double-iterate identities; the finder filters purely
//! on fractional-part windows and table-free identities, which keeps
//! verification an independent check of the table rather than a tautology.

use crate::exact_scalar::{ExactScalar, ScalarError};
use crate::iteration::{GeodesicModel, IterationError};
use crate::normal_form::{NormalFormDecomposition, UnitEigenvalue};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JumpError {
    #[error("model {0:?} must have positive mean index")]
    NonPositiveMeanIndex(String),
    #[error("model {label:?}: {source}")]
    Iteration {
        label: String,
        #[source]
        source: IterationError,
    },
    #[error("scan budget exhausted: no matching certificate with N <= {budget}")]
    BudgetExhausted { budget: u64 },
    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),
    #[error("invalid search parameters: {0}")]
    BadParameters(String),
}

/// Parameters of a certificate scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchParams {
    /// Horizon of the iterate identities: they are checked for 1 <= m <= mbar.
    pub mbar: u64,
    /// Every reported N is a multiple of this.
    pub m0: u64,
    /// Window half-width for the fractional parts, an exact rational in (0, 1/2).
    pub epsilon: BigRational,
    /// Stop after this many certificates.
    pub limit: usize,
    /// Largest N scanned.
    pub budget: u64,
    /// Partition the range across threads (wave order keeps results identical).
    pub parallel: bool,
}

pub const DEFAULT_SCAN_BUDGET: u64 = 10_000_000;
const SCAN_CHUNK: u64 = 1 << 16;
/// l-horizon when certifying small-m monotonicity in [`mbar_of`].
const MBAR_SCAN_HORIZON: i64 = 10_000;

impl SearchParams {
    pub fn new(mbar: u64, m0: u64, epsilon: BigRational, limit: usize) -> Self {
        SearchParams {
            mbar,
            m0,
            epsilon,
            limit,
            budget: DEFAULT_SCAN_BUDGET,
            parallel: false,
        }
    }

    fn check(&self) -> Result<(), JumpError> {
        if self.mbar < 1 {
            return Err(JumpError::BadParameters("mbar must be at least 1".into()));
        }
        if self.m0 < 1 {
            return Err(JumpError::BadParameters("M0 must be at least 1".into()));
        }
        if self.epsilon <= BigRational::zero()
            || self.epsilon >= BigRational::new(1.into(), 2.into())
        {
            return Err(JumpError::BadParameters(
                "epsilon must lie strictly between 0 and 1/2".into(),
            ));
        }
        if self.limit == 0 {
            return Err(JumpError::BadParameters("limit must be positive".into()));
        }
        Ok(())
    }
}

/// One checked equality or window condition in a verification record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRow {
    /// Geodesic label, or "*" for conditions of the certificate as a whole.
    pub label: String,
    /// Which condition: `spectral_period`, `divisibility`, `iterate_formula`,
    /// `chi_window`, `nullity_shift_plus`, `nullity_shift_minus`,
    /// `index_shift`, `index_reflection`, `double_iterate`.
    pub equation: String,
    /// The iterate shift m for the per-m identities, 0 otherwise.
    pub m: u64,
    pub lhs: String,
    pub rhs: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub pass: bool,
    pub rows: Vec<CheckRow>,
}

impl VerificationRecord {
    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

/// A common-index-jump certificate over a fixed list of geodesic models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpCertificate {
    #[serde(rename = "N")]
    pub n_value: u64,
    /// `m_k` per geodesic, in model order.
    pub m: Vec<u64>,
    /// `chi_k` per geodesic, each 0 or 1.
    pub chi: Vec<u8>,
    /// Common spectral period: `Mbar * 2*rho` is an integer for every
    /// rational angle `rho` of every model.
    #[serde(rename = "Mbar")]
    pub mbar_spectral: u64,
    #[serde(rename = "M0")]
    pub m0: u64,
    /// Identity horizon the certificate was checked against.
    pub mbar: u64,
    pub epsilon: ExactScalar,
    /// Window width for the fractional parts `{2 m_k rho}` of the
    /// irrational angles; data-driven, see [`default_delta`].
    pub delta: ExactScalar,
    pub verification: VerificationRecord,
}

/// The common spectral period `Mbar`: the least positive integer such that
/// `Mbar * theta / pi` is an integer for every unit-circle eigenvalue angle
/// `theta` with `theta/pi` rational, over all models. In angle terms: for a
/// rational angle `rho = a/b` in lowest terms this needs `b | 2*a*Mbar`,
/// i.e. `b` odd contributes `b`, `b` even contributes `b/2`.
pub fn spectral_lcm(models: &[GeodesicModel]) -> u64 {
    let mut acc = 1u64;
    for g in models {
        for rho in g.decomp.all_angles() {
            if let Some(ratio) = rho.as_ratio() {
                let b = ratio.denom().to_u64().expect("angle denominator within u64");
                let factor = if b % 2 == 0 { b / 2 } else { b };
                acc = acc.lcm(&factor.max(1));
            }
        }
    }
    acc
}

/// Irrational angles that the scan constrains into windows: rotation angles
/// and nontrivial N2 angles. Trivial N2 blocks carry no splitting weight
/// and no index term, so their angles stay free.
fn windowed_angles(g: &GeodesicModel) -> Vec<ExactScalar> {
    g.decomp
        .rotation_angles()
        .iter()
        .chain(g.decomp.nontrivial_n2_angles())
        .filter(|rho| !rho.is_rational())
        .cloned()
        .collect()
}

/// The data-driven window width: the minimum over all windowed angles
/// `rho` and all `1 <= m <= mbar` of `min({m rho}, 1 - {m rho})`. Within
/// this width, a fractional part `{2 m_k rho}` cannot collide with any
/// `{m rho}` the identities touch. Zero when no angle is windowed.
pub fn default_delta(models: &[GeodesicModel], mbar: u64) -> ExactScalar {
    let one = ExactScalar::one;
    let mut best: Option<ExactScalar> = None;
    for g in models {
        for rho in windowed_angles(g) {
            for m in 1..=mbar as i64 {
                let frac = rho.fract_mul(m);
                let reflected = one().checked_sub(&frac).expect("fract in (0,1)");
                for cand in [frac, reflected] {
                    if best.as_ref().is_none_or(|b| cand < *b) {
                        best = Some(cand);
                    }
                }
            }
        }
    }
    best.unwrap_or_else(ExactScalar::zero)
}

/// `Delta_k`: the splitting weight inside the low window, i.e. the sum of
/// `S^-` over eigenvalue angles `rho != 0` with `0 < {2 m_k rho} < delta`.
pub fn delta_count(decomp: &NormalFormDecomposition, two_mk: i64, delta: &ExactScalar) -> u32 {
    let mut total = 0;
    for blk in decomp.blocks() {
        for (angle, (_, sm)) in blk.splitting_pairs() {
            if sm == 0 || angle.is_zero() {
                continue;
            }
            let frac = angle.fract_mul(two_mk);
            if !frac.is_zero() && frac < *delta {
                total += sm;
            }
        }
    }
    total
}

/// `Q_k(m)`: the splitting weight of the m-periodic part of the spectrum
/// away from eigenvalue 1: the sum of `S^-` over angles `rho != 0` with
/// `{m rho} = 0`. (The eigenvalue -1 blocks enter exactly at even m.)
pub fn q_count(decomp: &NormalFormDecomposition, m: i64) -> u32 {
    let mut total = 0;
    for blk in decomp.blocks() {
        for (angle, (_, sm)) in blk.splitting_pairs() {
            if sm == 0 || angle.is_zero() {
                continue;
            }
            if angle.is_rational() && angle.varphi_mul(m) == 0 {
                total += sm;
            }
        }
    }
    total
}

/// `mbar` of a collection: the smallest horizon beyond which every index
/// sequence is shift-monotone, `i(c^{m+l}) >= i(c^l)` for all `m >= mbar`
/// and `l >= 1`.
///
/// The deviation `i(c^m) - m*ihat` is bounded by the half dimension in
/// absolute value, so monotonicity is automatic once `m * ihat` exceeds
/// `2*half_dim - 1`; only the finitely many smaller `m` are scanned, each
/// against `l` up to a fixed horizon.
pub fn mbar_of(models: &[GeodesicModel]) -> Result<u64, JumpError> {
    let mut worst = 1u64;
    for g in models {
        let ihat = positive_mean_index(g)?;
        let threshold = ExactScalar::from_int(2 * g.decomp.half_dim() as i64 - 1);
        let mut guard = 1i64;
        while ihat.scale(guard) <= threshold {
            guard += 1;
        }
        let mut bad_max = 0i64;
        for m in 1..guard {
            let mut indices = Vec::with_capacity(MBAR_SCAN_HORIZON as usize);
            for l in 1..=MBAR_SCAN_HORIZON {
                indices.push(g.index_of_iterate(l));
            }
            let violated = (1..=MBAR_SCAN_HORIZON - m).any(|l| {
                indices[(l + m - 1) as usize] < indices[(l - 1) as usize]
            });
            if violated {
                bad_max = bad_max.max(m);
            }
        }
        worst = worst.max(bad_max as u64 + 1);
    }
    Ok(worst)
}

fn positive_mean_index(g: &GeodesicModel) -> Result<ExactScalar, JumpError> {
    let ihat = g.mean_index().map_err(|source| JumpError::Iteration {
        label: g.label.clone(),
        source,
    })?;
    if ihat.signum() <= 0 {
        return Err(JumpError::NonPositiveMeanIndex(g.label.clone()));
    }
    Ok(ihat)
}

// ---------------------------------------------------------------------------
// the scan

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSide {
    /// `{2 m_k rho} < delta`.
    Low,
    /// `{2 m_k rho} > 1 - delta`.
    High,
}

impl WindowSide {
    fn opposite(self) -> WindowSide {
        match self {
            WindowSide::Low => WindowSide::High,
            WindowSide::High => WindowSide::Low,
        }
    }
}

/// Per-model data the hot loop needs: the scan value `v = 1/(Mbar*ihat)`
/// both as machine-word components (fast path) and exactly.
struct ScanModel<'a> {
    model: &'a GeodesicModel,
    v: ExactScalar,
    /// `v = (u + w*sqrt(d))/den` with i128 components; None when the parts
    /// exceed the overflow preguard.
    fast: Option<(i128, i128, i128, u32)>,
    windowed: Vec<ExactScalar>,
}

/// Decision for one model at one candidate N.
struct Placement {
    floor: u64,
    chi: u8,
}

impl<'a> ScanModel<'a> {
    fn new(model: &'a GeodesicModel, mbar_spectral: u64) -> Result<Self, JumpError> {
        let ihat = positive_mean_index(model)?;
        let v = ExactScalar::from_int(mbar_spectral as i64)
            .checked_mul(&ihat)
            .expect("integer times scalar")
            .recip()
            .expect("positive");
        let fast = fast_parts(&v);
        Ok(ScanModel { model, v, fast, windowed: windowed_angles(model) })
    }

    /// Window test for `x = {N v}` against epsilon: below -> chi = 0,
    /// above 1 - eps -> chi = 1, otherwise reject.
    fn place(&self, n: u64, eps: &(i128, i128), eps_exact: &BigRational) -> Option<Placement> {
        if let Some((u, w, den, d)) = self.fast {
            if let Some(p) = place_i128(u, w, den, d, n, eps) {
                return p;
            }
        }
        self.place_exact(n, eps_exact)
    }

    fn place_exact(&self, n: u64, eps: &BigRational) -> Option<Placement> {
        let x = self.v.scale(n as i64);
        let floor = x.floor();
        let frac = x.fract();
        let eps_scalar = ExactScalar::Rational(eps.clone());
        let one_minus = ExactScalar::one().checked_sub(&eps_scalar).expect("rational");
        let chi = if frac < eps_scalar {
            0
        } else if frac > one_minus {
            1
        } else {
            return None;
        };
        Some(Placement { floor: floor.to_u64().expect("positive scan value"), chi })
    }
}

/// Machine-word window placement. Returns `None` on overflow risk (caller
/// falls back to exact arithmetic), `Some(None)` on a rejected candidate.
#[allow(clippy::option_option)]
#[inline]
fn place_i128(
    u: i128,
    w: i128,
    den: i128,
    d: u32,
    n: u64,
    (ep, eq): &(i128, i128),
) -> Option<Option<Placement>> {
    let n = n as i128;
    let un = u.checked_mul(n)?;
    let wn = w.checked_mul(n)?;
    let f = crate::exact_scalar::floor_pair_i128(un, wn, den, d)? as i128;
    // {x} < eps  <=>  eq*(un - f*den) + eq*wn*sqrt(d) < ep*den
    let rem = un.checked_sub(f.checked_mul(den)?)?;
    let lhs_lo = eq.checked_mul(rem)?.checked_sub(ep.checked_mul(den)?)?;
    let s = eq.checked_mul(wn)?;
    if crate::exact_scalar::sign_pair_i128(lhs_lo, s, d)? == Ordering::Less {
        return Some(Some(Placement { floor: f as u64, chi: 0 }));
    }
    // {x} > 1 - eps  <=>  eq*(un - (f+1)*den) + ep*den + eq*wn*sqrt(d) > 0
    let rem_hi = un.checked_sub((f + 1).checked_mul(den)?)?;
    let lhs_hi = eq.checked_mul(rem_hi)?.checked_add(ep.checked_mul(den)?)?;
    if crate::exact_scalar::sign_pair_i128(lhs_hi, s, d)? == Ordering::Greater {
        return Some(Some(Placement { floor: f as u64, chi: 1 }));
    }
    Some(None)
}

/// Splits `v` into `(u + w*sqrt(d))/den` on machine words, requiring enough
/// headroom that the hot loop cannot overflow for N within the budget.
fn fast_parts(v: &ExactScalar) -> Option<(i128, i128, i128, u32)> {
    let (a, b, d) = match v {
        ExactScalar::Rational(r) => (r.clone(), BigRational::zero(), 2),
        ExactScalar::Quadratic { a, b, d } => (a.clone(), b.clone(), *d),
    };
    let den_lcm = a.denom().lcm(b.denom());
    let u = (a.numer() * (&den_lcm / a.denom())).to_i128()?;
    let w = (b.numer() * (&den_lcm / b.denom())).to_i128()?;
    let den = den_lcm.to_i128()?;
    // headroom guard: |eq*(u*N)| and (eq*w*N)^2*d must stay inside i128
    const LIM: i128 = 1 << 40;
    if u.abs() < LIM && w.abs() < LIM && den < LIM {
        Some((u, w, den, d))
    } else {
        None
    }
}

/// A verified-window candidate: everything the scan learned before
/// certificate construction.
struct Candidate {
    n: u64,
    floors: Vec<u64>,
    chis: Vec<u8>,
}

fn scan_chunk(
    slots: &[ScanModel<'_>],
    params: &SearchParams,
    mbar_spectral: u64,
    delta: &ExactScalar,
    want_sides: Option<&[Vec<WindowSide>]>,
    skip_n: Option<u64>,
    k_lo: u64,
    k_hi: u64,
    limit: usize,
) -> Vec<Candidate> {
    let eps_i128 = (
        params.epsilon.numer().to_i128().unwrap_or(i128::MAX),
        params.epsilon.denom().to_i128().unwrap_or(i128::MAX),
    );
    let mut out = Vec::new();
    'next: for k in k_lo..=k_hi {
        let n = k * params.m0;
        if skip_n == Some(n) {
            continue;
        }
        let mut floors = Vec::with_capacity(slots.len());
        let mut chis = Vec::with_capacity(slots.len());
        for slot in slots {
            match slot.place(n, &eps_i128, &params.epsilon) {
                Some(p) => {
                    let mk = (p.floor + p.chi as u64) * mbar_spectral;
                    if 2 * mk < params.mbar + 2 {
                        continue 'next;
                    }
                    floors.push(p.floor);
                    chis.push(p.chi);
                }
                None => continue 'next,
            }
        }
        // angle windows, exact; only survivors of the chi windows get here
        for (idx, slot) in slots.iter().enumerate() {
            let mk = (floors[idx] + chis[idx] as u64) * mbar_spectral;
            for (a_idx, rho) in slot.windowed.iter().enumerate() {
                match window_side(rho, 2 * mk as i64, delta) {
                    Some(side) => {
                        if let Some(want) = want_sides {
                            if want[idx][a_idx] != side {
                                continue 'next;
                            }
                        }
                    }
                    None => continue 'next,
                }
            }
        }
        // table-free identities: shifts of nullity and index
        for (idx, slot) in slots.iter().enumerate() {
            let g = slot.model;
            let mk = ((floors[idx] + chis[idx] as u64) * mbar_spectral) as i64;
            let two_n = 2 * n as i64;
            for m in 1..=params.mbar as i64 {
                if g.nullity_of_iterate(2 * mk + m) != g.nullity_of_iterate(m)
                    || g.nullity_of_iterate(2 * mk - m) != g.nullity_of_iterate(m)
                    || g.index_of_iterate(2 * mk + m) != two_n + g.index_of_iterate(m)
                {
                    continue 'next;
                }
            }
        }
        out.push(Candidate { n, floors, chis });
        if out.len() >= limit {
            break;
        }
    }
    out
}

fn window_side(rho: &ExactScalar, two_mk: i64, delta: &ExactScalar) -> Option<WindowSide> {
    let frac = rho.fract_mul(two_mk);
    if frac < *delta {
        return Some(WindowSide::Low);
    }
    let reflected = ExactScalar::one().checked_sub(&frac).expect("fract in (0,1)");
    if reflected < *delta {
        return Some(WindowSide::High);
    }
    None
}

fn certificate_from(
    models: &[GeodesicModel],
    params: &SearchParams,
    mbar_spectral: u64,
    delta: &ExactScalar,
    cand: Candidate,
) -> JumpCertificate {
    let m: Vec<u64> = cand
        .floors
        .iter()
        .zip(&cand.chis)
        .map(|(f, chi)| (f + *chi as u64) * mbar_spectral)
        .collect();
    let mut cert = JumpCertificate {
        n_value: cand.n,
        m,
        chi: cand.chis,
        mbar_spectral,
        m0: params.m0,
        mbar: params.mbar,
        epsilon: ExactScalar::Rational(params.epsilon.clone()),
        delta: delta.clone(),
        verification: VerificationRecord { pass: false, rows: vec![] },
    };
    cert.verification = verify_certificate(models, &cert)
        .expect("structurally well-formed by construction");
    cert
}

fn run_scan(
    models: &[GeodesicModel],
    params: &SearchParams,
    want_sides: Option<&[Vec<WindowSide>]>,
    skip_n: Option<u64>,
) -> Result<Vec<JumpCertificate>, JumpError> {
    params.check()?;
    let mbar_spectral = spectral_lcm(models);
    let slots: Vec<ScanModel<'_>> = models
        .iter()
        .map(|g| ScanModel::new(g, mbar_spectral))
        .collect::<Result<_, _>>()?;
    let delta = default_delta(models, params.mbar);

    let k_hi = params.budget / params.m0;
    let mut found: Vec<Candidate> = Vec::new();
    if params.parallel {
        use rayon::prelude::*;
        let threads = rayon::current_num_threads().max(1) as u64;
        let mut wave_lo = 1u64;
        while wave_lo <= k_hi && found.len() < params.limit {
            let wave: Vec<(u64, u64)> = (0..threads)
                .map(|t| {
                    let lo = wave_lo + t * SCAN_CHUNK;
                    let hi = (lo + SCAN_CHUNK - 1).min(k_hi);
                    (lo, hi)
                })
                .filter(|(lo, hi)| lo <= hi)
                .collect();
            let mut results: Vec<Vec<Candidate>> = Vec::new();
            wave.par_iter()
                .map(|(lo, hi)| {
                    scan_chunk(
                        &slots,
                        params,
                        mbar_spectral,
                        &delta,
                        want_sides,
                        skip_n,
                        *lo,
                        *hi,
                        params.limit,
                    )
                })
                .collect_into_vec(&mut results);
            for chunk in results {
                for cand in chunk {
                    if found.len() < params.limit {
                        found.push(cand);
                    }
                }
            }
            wave_lo += threads * SCAN_CHUNK;
        }
    } else {
        let mut lo = 1u64;
        while lo <= k_hi && found.len() < params.limit {
            let hi = (lo + SCAN_CHUNK - 1).min(k_hi);
            let room = params.limit - found.len();
            found.extend(scan_chunk(
                &slots,
                params,
                mbar_spectral,
                &delta,
                want_sides,
                skip_n,
                lo,
                hi,
                room,
            ));
            lo = hi + 1;
        }
    }

    if found.is_empty() {
        return Err(JumpError::BudgetExhausted { budget: params.budget });
    }
    Ok(found
        .into_iter()
        .map(|cand| certificate_from(models, params, mbar_spectral, &delta, cand))
        .collect())
}

/// Scans `N = M0, 2*M0, ...` up to the budget for common-index-jump
/// certificates and returns up to `limit` of them, in increasing N.
///
/// Every returned certificate embeds its own verification record; the
/// finder never consults the splitting-number table, so the embedded
/// records are an independent confirmation (and would expose a wrong table
/// entry as a returned-but-failing certificate rather than silence).
///
/// An empty scan is reported as [`JumpError::BudgetExhausted`]; a partial
/// harvest (fewer than `limit`) is returned as-is.
pub fn find_certificates(
    models: &[GeodesicModel],
    params: &SearchParams,
) -> Result<Vec<JumpCertificate>, JumpError> {
    run_scan(models, params, None, None)
}

/// Finds the partner certificate whose angle windows sit on the opposite
/// side for every windowed angle of every model, so that the low-window
/// splitting weights pair up to `Delta_k + Delta'_k = C(M_k)`.
///
/// Models without windowed angles (hyperbolic, purely rational spectra)
/// impose no dual constraint; the next certificate qualifies.
pub fn dual_certificate(
    models: &[GeodesicModel],
    cert: &JumpCertificate,
    params: &SearchParams,
) -> Result<JumpCertificate, JumpError> {
    let want: Vec<Vec<WindowSide>> = models
        .iter()
        .zip(&cert.m)
        .map(|(g, mk)| {
            windowed_angles(g)
                .iter()
                .map(|rho| {
                    window_side(rho, 2 * *mk as i64, &cert.delta)
                        .map(WindowSide::opposite)
                        .ok_or_else(|| {
                            JumpError::MalformedCertificate(format!(
                                "{}: angle {rho} of the base certificate sits in no window",
                                g.label
                            ))
                        })
                })
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut dual_params = params.clone();
    dual_params.limit = 1;
    let found = run_scan(models, &dual_params, Some(&want), Some(cert.n_value))?;
    Ok(found.into_iter().next().expect("nonempty on Ok"))
}

// ---------------------------------------------------------------------------
// verification

/// Replays every certificate condition against the models: the structural
/// invariants (spectral period, divisibility, the `m_k` formula, the chi
/// windows) and the index jump identity battery for `1 <= m <= mbar`:
///
/// ```text
/// nu(c^{2m_k +- m}) = nu(c^m)
/// i(c^{2m_k + m})   = 2N + i(c^m)
/// i(c^{2m_k - m})   = 2N - i(c^m) - 2*(S^+(1) + Q_k(m))
/// i(c^{2m_k})       = 2N - (S^+(1) + C(M_k) - 2*Delta_k)
/// ```
///
/// Every failed row names its geodesic, equation, and m.
pub fn verify_certificate(
    models: &[GeodesicModel],
    cert: &JumpCertificate,
) -> Result<VerificationRecord, JumpError> {
    if cert.m.len() != models.len() || cert.chi.len() != models.len() {
        return Err(JumpError::MalformedCertificate(format!(
            "certificate covers {} geodesics, models list has {}",
            cert.m.len(),
            models.len()
        )));
    }
    if cert.mbar < 1 || cert.m0 < 1 || cert.n_value < 1 {
        return Err(JumpError::MalformedCertificate(
            "N, M0 and mbar must be positive".into(),
        ));
    }
    for (g, mk) in models.iter().zip(&cert.m) {
        if 2 * mk <= cert.mbar {
            return Err(JumpError::MalformedCertificate(format!(
                "{}: 2*m_k = {} does not clear the identity horizon mbar = {}",
                g.label,
                2 * mk,
                cert.mbar
            )));
        }
    }
    let eps = cert
        .epsilon
        .as_ratio()
        .ok_or_else(|| JumpError::MalformedCertificate("epsilon must be rational".into()))?
        .clone();

    let mut rows = Vec::new();
    let recomputed = spectral_lcm(models);
    rows.push(CheckRow {
        label: "*".into(),
        equation: "spectral_period".into(),
        m: 0,
        lhs: cert.mbar_spectral.to_string(),
        rhs: recomputed.to_string(),
        pass: cert.mbar_spectral == recomputed,
    });
    rows.push(CheckRow {
        label: "*".into(),
        equation: "divisibility".into(),
        m: 0,
        lhs: format!("{} mod {}", cert.n_value, cert.m0),
        rhs: "0".into(),
        pass: cert.n_value % cert.m0 == 0,
    });

    for (idx, g) in models.iter().enumerate() {
        let label = &g.label;
        let ihat = positive_mean_index(g)?;
        let v = ExactScalar::from_int(cert.mbar_spectral as i64)
            .checked_mul(&ihat)
            .expect("integer times scalar")
            .recip()
            .expect("positive");
        let x = v.scale(cert.n_value as i64);
        let floor = x.floor().to_u64().expect("positive");
        let chi = cert.chi[idx];
        let expected_mk = (floor + chi as u64) * cert.mbar_spectral;
        rows.push(CheckRow {
            label: label.clone(),
            equation: "iterate_formula".into(),
            m: 0,
            lhs: cert.m[idx].to_string(),
            rhs: expected_mk.to_string(),
            pass: chi <= 1 && cert.m[idx] == expected_mk,
        });
        let frac = x.fract();
        let eps_scalar = ExactScalar::Rational(eps.clone());
        let window_pass = match chi {
            0 => frac < eps_scalar,
            1 => {
                frac > ExactScalar::one().checked_sub(&eps_scalar).expect("rational")
            }
            _ => false,
        };
        rows.push(CheckRow {
            label: label.clone(),
            equation: "chi_window".into(),
            m: 0,
            lhs: format!("|{{N/(Mbar*ihat)}} - {chi}|"),
            rhs: format!("< {eps}"),
            pass: window_pass,
        });

        let mk = cert.m[idx] as i64;
        let two_n = 2 * cert.n_value as i64;
        let s_plus_one = g.decomp.splitting_numbers(&UnitEigenvalue::One).0 as i64;
        for m in 1..=cert.mbar as i64 {
            let nu_m = g.nullity_of_iterate(m);
            let plus = g.nullity_of_iterate(2 * mk + m);
            rows.push(CheckRow {
                label: label.clone(),
                equation: "nullity_shift_plus".into(),
                m: m as u64,
                lhs: plus.to_string(),
                rhs: nu_m.to_string(),
                pass: plus == nu_m,
            });
            let minus = g.nullity_of_iterate(2 * mk - m);
            rows.push(CheckRow {
                label: label.clone(),
                equation: "nullity_shift_minus".into(),
                m: m as u64,
                lhs: minus.to_string(),
                rhs: nu_m.to_string(),
                pass: minus == nu_m,
            });
            let i_m = g.index_of_iterate(m);
            let i_plus = g.index_of_iterate(2 * mk + m);
            rows.push(CheckRow {
                label: label.clone(),
                equation: "index_shift".into(),
                m: m as u64,
                lhs: i_plus.to_string(),
                rhs: (two_n + i_m).to_string(),
                pass: i_plus == two_n + i_m,
            });
            let i_minus = g.index_of_iterate(2 * mk - m);
            let reflect_rhs = two_n - i_m - 2 * (s_plus_one + q_count(&g.decomp, m) as i64);
            rows.push(CheckRow {
                label: label.clone(),
                equation: "index_reflection".into(),
                m: m as u64,
                lhs: i_minus.to_string(),
                rhs: reflect_rhs.to_string(),
                pass: i_minus == reflect_rhs,
            });
        }
        let c_total = g.decomp.total_negative_splitting() as i64;
        let dk = delta_count(&g.decomp, 2 * mk, &cert.delta) as i64;
        let i_double = g.index_of_iterate(2 * mk);
        let double_rhs = two_n - (s_plus_one + c_total - 2 * dk);
        rows.push(CheckRow {
            label: label.clone(),
            equation: "double_iterate".into(),
            m: 0,
            lhs: i_double.to_string(),
            rhs: double_rhs.to_string(),
            pass: i_double == double_rhs,
        });
    }

    let pass = rows.iter().all(|r| r.pass);
    Ok(VerificationRecord { pass, rows })
}

impl From<ScalarError> for JumpError {
    fn from(e: ScalarError) -> Self {
        JumpError::MalformedCertificate(e.to_string())
    }
}
