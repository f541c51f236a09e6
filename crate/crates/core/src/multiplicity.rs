//! The multiplicity counting argument on concrete certificate data.
//!
//! Given a system and a verified dual pair of jump certificates, the
//! double iterates i(c_k^{2m_k}) land in a window of width 2*half_dim
//! around 2N, and the landing spot sorts the geodesics into buckets:
//! strictly above 2N (local contributions stack above the jump), exactly
//! at 2N, or strictly below. The off-center buckets with even initial
//! index witness non-hyperbolic geodesics; the center bucket feeds the
//! degree-2N Morse count, which the Betti table forces to be at least 2.
//! Together the buckets replay the "at least 2n+2" argument on the given
//! data, and the verdict certifies consistency or names the violation.
//!
//! Nothing here proves the underlying theorem for arbitrary metrics: the
//! verdict is a statement about the finite input data only.

use crate::exact_scalar::ExactScalar;
use crate::iteration::GeodesicSystem;
use crate::jump::{
    self, delta_count, find_certificates, verify_certificate, JumpCertificate, JumpError,
    SearchParams,
};
use crate::loop_homology::{
    average_betti, betti, mean_euler, morse_type_numbers, resonance_check, HomologyError,
    ResonanceVerdict,
};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MultiplicityError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("certificate fails verification: {0}")]
    UnverifiedCertificate(String),
    #[error("certificates are not dual: {0}")]
    NonDualPair(String),
    #[error(transparent)]
    Jump(#[from] JumpError),
    #[error(transparent)]
    Homology(#[from] HomologyError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MultiplicityVerdict {
    /// The data exhibits at least `total` distinct contractible closed
    /// geodesics in the certified pattern.
    Consistent { total: u32 },
    Violated { details: String },
}

/// Outcome of the counting argument on one certificate pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplicityReport {
    /// Geodesics with `i(c_k^{2m_k}) >= 2N + 2` and even initial index.
    pub n_plus_e: u32,
    /// Same bucket, odd initial index.
    pub n_plus_o: u32,
    /// Geodesics with `i(c_k^{2m_k}) <= 2N - 2` and even initial index.
    pub n_minus_e: u32,
    /// Same bucket, odd initial index.
    pub n_minus_o: u32,
    /// Labels in the even off-center buckets: the Step 1 witnesses.
    pub nonhyperbolic_labels: Vec<String>,
    /// Labels contributing to the Morse count at degree 2N: Step 2.
    pub step2_labels: Vec<String>,
    pub verdict: MultiplicityVerdict,
}

/// One side of the exact Claim 1 identity `sum_k 2 m_k chi-hat(c_k) =
/// 2N * B-bar` together with per-geodesic residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct Claim1Report {
    pub holds: bool,
    pub lhs: BigRational,
    pub rhs: BigRational,
    /// `(label, {N/(Mbar*ihat_k)} - chi_k)` per geodesic: the signed window
    /// offsets whose weighted sum is the identity's error term.
    pub residuals: Vec<(String, ExactScalar)>,
    /// Labels whose offset reaches the safe bound `1/(2*Mbar*sum|chi-hat|)`;
    /// empty whenever the identity holds.
    pub offenders: Vec<String>,
}

/// Step 2: contributions to the Morse count at degree 2N from geodesics
/// outside the Step 1 set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step2Report {
    pub degree: i64,
    pub betti_value: u8,
    /// `(label, iterate)` pairs contributing at degree 2N.
    pub witnesses: Vec<(String, u64)>,
    /// The Step 1 labels that were excluded.
    pub excluded: Vec<String>,
    pub ok: bool,
}

fn require_verified(
    s: &GeodesicSystem,
    cert: &JumpCertificate,
    name: &str,
) -> Result<(), MultiplicityError> {
    let record = verify_certificate(&s.geodesics, cert)?;
    if !record.pass {
        let first = record
            .failures()
            .next()
            .map(|r| format!("{} {} m={}", r.label, r.equation, r.m))
            .unwrap_or_default();
        return Err(MultiplicityError::UnverifiedCertificate(format!(
            "{name} (N = {}): first failure {first}",
            cert.n_value
        )));
    }
    Ok(())
}

/// Buckets every geodesic by the position of `i(c_k^{2m_k})` relative to
/// 2N under `cert_a`, crossed with the parity of the initial index, and
/// checks the duality relations against the partner certificate: the
/// plus and minus buckets of a dual pair swap exactly.
pub fn classify_2mk(
    s: &GeodesicSystem,
    cert_a: &JumpCertificate,
    cert_b: &JumpCertificate,
) -> Result<MultiplicityReport, MultiplicityError> {
    require_verified(s, cert_a, "certificate A")?;
    require_verified(s, cert_b, "certificate B")?;
    for ((g, mk_a), mk_b) in s.geodesics.iter().zip(&cert_a.m).zip(&cert_b.m) {
        let d_a = delta_count(&g.decomp, 2 * *mk_a as i64, &cert_a.delta);
        let d_b = delta_count(&g.decomp, 2 * *mk_b as i64, &cert_b.delta);
        let c = g.decomp.total_negative_splitting();
        if d_a + d_b != c {
            return Err(MultiplicityError::NonDualPair(format!(
                "{}: Delta + Delta' = {} + {} != C = {c}",
                g.label, d_a, d_b
            )));
        }
    }

    let buckets_a = buckets(s, cert_a);
    let buckets_b = buckets(s, cert_b);
    let count = |b: &[(String, i8, bool)], sign: i8, even: bool| {
        b.iter().filter(|(_, s, e)| *s == sign && *e == even).count() as u32
    };
    let n_plus_e = count(&buckets_a, 1, true);
    let n_plus_o = count(&buckets_a, 1, false);
    let n_minus_e = count(&buckets_a, -1, true);
    let n_minus_o = count(&buckets_a, -1, false);
    let nonhyperbolic_labels: Vec<String> = buckets_a
        .iter()
        .filter(|(_, sign, even)| *sign != 0 && *even)
        .map(|(label, _, _)| label.clone())
        .collect();

    let swapped = n_plus_e == count(&buckets_b, -1, true)
        && n_minus_e == count(&buckets_b, 1, true)
        && n_plus_o == count(&buckets_b, -1, false)
        && n_minus_o == count(&buckets_b, 1, false);
    let verdict = if swapped {
        MultiplicityVerdict::Consistent { total: n_plus_e + n_minus_e }
    } else {
        MultiplicityVerdict::Violated {
            details: "dual certificate does not swap the plus and minus buckets".into(),
        }
    };
    Ok(MultiplicityReport {
        n_plus_e,
        n_plus_o,
        n_minus_e,
        n_minus_o,
        nonhyperbolic_labels,
        step2_labels: vec![],
        verdict,
    })
}

/// `(label, sign of i(c^{2m_k}) - 2N clipped to {-1,0,1}, initial index even)`.
fn buckets(s: &GeodesicSystem, cert: &JumpCertificate) -> Vec<(String, i8, bool)> {
    s.geodesics
        .iter()
        .zip(&cert.m)
        .map(|(g, mk)| {
            let gap = g.index_of_iterate(2 * *mk as i64) - 2 * cert.n_value as i64;
            (g.label.clone(), gap.signum() as i8, g.initial_index % 2 == 0)
        })
        .collect()
}

/// Checks the exact integer identity behind the certificate scale: the
/// weighted iterate sum `sum_k 2 m_k chi-hat(c_k)` must equal `2N * B-bar`
/// where `B-bar = (n+1)/(2n)` is the average Betti number. Requires
/// `n | N` so that the right-hand side is an integer.
pub fn claim1_check(
    s: &GeodesicSystem,
    cert: &JumpCertificate,
) -> Result<Claim1Report, MultiplicityError> {
    if cert.n_value % s.n as u64 != 0 {
        return Err(MultiplicityError::Precondition(format!(
            "N = {} must be divisible by n = {} for an integer target",
            cert.n_value, s.n
        )));
    }
    require_verified(s, cert, "certificate")?;

    let mut lhs = BigRational::zero();
    let mut abs_chi_sum = BigRational::zero();
    let mut residuals = Vec::with_capacity(s.geodesics.len());
    let mbar_spectral = jump::spectral_lcm(&s.geodesics);
    for ((g, mk), chi) in s.geodesics.iter().zip(&cert.m).zip(&cert.chi) {
        let chi_hat = mean_euler(g, s.n)?;
        lhs += BigRational::from_integer((2 * mk).into()) * &chi_hat;
        abs_chi_sum += chi_hat.abs();
        let ihat = g.mean_index().map_err(|e| {
            MultiplicityError::Precondition(format!("{}: {e}", g.label))
        })?;
        let x = ExactScalar::from_int(mbar_spectral as i64)
            .checked_mul(&ihat)
            .expect("integer times scalar")
            .recip()
            .expect("positive mean index")
            .scale(cert.n_value as i64);
        let residual = x
            .fract()
            .checked_sub(&ExactScalar::from_int(*chi as i64))
            .expect("same field");
        residuals.push((g.label.clone(), residual));
    }
    let rhs = BigRational::from_integer((2 * cert.n_value).into()) * average_betti(s.n);
    let holds = lhs == rhs;

    // residual bound that forces the identity: |eta_k| < 1/(2*Mbar*sum|chi|)
    let mut offenders = Vec::new();
    if !abs_chi_sum.is_zero() {
        let bound = ExactScalar::Rational(
            (BigRational::from_integer((2 * mbar_spectral).into()) * abs_chi_sum).recip(),
        );
        for (label, residual) in &residuals {
            if residual.abs() >= bound {
                offenders.push(label.clone());
            }
        }
    }
    Ok(Claim1Report { holds, lhs, rhs, residuals, offenders })
}

/// Replays Step 2: with the Step 1 non-hyperbolic geodesics removed, the
/// Morse count at degree 2N must still see at least two contributions,
/// matching `beta_{2N} = 2`. Reports the witnessing `(label, iterate)`
/// pairs.
pub fn step2_audit(
    s: &GeodesicSystem,
    cert: &JumpCertificate,
) -> Result<Step2Report, MultiplicityError> {
    if cert.n_value % s.n as u64 != 0 {
        return Err(MultiplicityError::Precondition(format!(
            "N = {} must be divisible by n = {}",
            cert.n_value, s.n
        )));
    }
    require_verified(s, cert, "certificate")?;
    let degree = 2 * cert.n_value as i64;
    let excluded: Vec<String> = buckets(s, cert)
        .into_iter()
        .filter(|(_, sign, even)| *sign != 0 && *even)
        .map(|(label, _, _)| label)
        .collect();
    let table = morse_type_numbers(s, degree)?;
    let witnesses: Vec<(String, u64)> = table
        .contributors
        .get(&degree)
        .map(|rows| {
            rows.iter()
                .filter(|(label, _, _)| !excluded.contains(label))
                .map(|(label, m, _)| (label.clone(), *m as u64))
                .collect()
        })
        .unwrap_or_default();
    let betti_value = betti(s.n, degree);
    let ok = witnesses.len() >= 2;
    Ok(Step2Report { degree, betti_value, witnesses, excluded, ok })
}

pub const DEFAULT_SCAN_EPSILON: (i64, i64) = (1, 100);

/// The full pipeline on one system: flag checks, resonance, `mbar`,
/// certificate search with `M0 = n`, dual partner, classification,
/// Claim 1, Step 2. Consistent means the data exhibits 2n non-hyperbolic
/// even-index geodesics plus two more at degree 2N; any certified failure
/// is reported as a violation with its stage named. Budget exhaustion of
/// the underlying scan propagates as an error.
pub fn multiplicity_verdict(s: &GeodesicSystem) -> Result<MultiplicityReport, MultiplicityError> {
    multiplicity_verdict_with(s, jump::DEFAULT_SCAN_BUDGET)
}

pub fn multiplicity_verdict_with(
    s: &GeodesicSystem,
    budget: u64,
) -> Result<MultiplicityReport, MultiplicityError> {
    if !s.bumpy {
        return Err(MultiplicityError::Precondition(
            "the counting argument needs a bumpy system".into(),
        ));
    }
    if !s.curvature_pinched {
        return Err(MultiplicityError::Precondition(
            "the counting argument needs the pinching flag (i(c) >= 2n)".into(),
        ));
    }
    let violated = |details: String| {
        Ok(MultiplicityReport {
            n_plus_e: 0,
            n_plus_o: 0,
            n_minus_e: 0,
            n_minus_o: 0,
            nonhyperbolic_labels: vec![],
            step2_labels: vec![],
            verdict: MultiplicityVerdict::Violated { details },
        })
    };

    let resonance = resonance_check(s)?;
    if resonance.verdict != ResonanceVerdict::Holds {
        return violated(format!(
            "resonance identity fails before certificate search: sum = {}, expected {}",
            resonance.lhs, resonance.rhs
        ));
    }

    let mbar = jump::mbar_of(&s.geodesics)?;
    let mut params = SearchParams::new(
        mbar,
        s.n as u64,
        BigRational::new(DEFAULT_SCAN_EPSILON.0.into(), DEFAULT_SCAN_EPSILON.1.into()),
        1,
    );
    params.budget = budget;
    let cert_a = find_certificates(&s.geodesics, &params)?.remove(0);
    let cert_b = jump::dual_certificate(&s.geodesics, &cert_a, &params)?;

    let mut report = classify_2mk(s, &cert_a, &cert_b)?;
    if let MultiplicityVerdict::Violated { details } = &report.verdict {
        return violated(format!("classification stage: {details}"));
    }
    let step1_count = report.n_plus_e + report.n_minus_e;
    if step1_count < 2 * s.n {
        return violated(format!(
            "Step 1 exhibits only {step1_count} non-hyperbolic even-index geodesics \
             at N = {}, need {}",
            cert_a.n_value,
            2 * s.n
        ));
    }

    let claim1 = claim1_check(s, &cert_a)?;
    if !claim1.holds {
        return violated(format!(
            "Claim 1 identity fails: {} != {} (offenders: {})",
            claim1.lhs,
            claim1.rhs,
            claim1.offenders.join(", ")
        ));
    }

    let step2 = step2_audit(s, &cert_a)?;
    if !step2.ok {
        return violated(format!(
            "Step 2 finds only {} contributions at degree {}, need 2",
            step2.witnesses.len(),
            step2.degree
        ));
    }

    report.step2_labels = step2.witnesses.iter().map(|(label, _)| label.clone()).collect();
    report.verdict = MultiplicityVerdict::Consistent {
        total: step1_count + report.step2_labels.len() as u32,
    };
    Ok(report)
}
