//! Equivariant topology of the free loop space side of the audits.
//!
//! Three ingredients meet here. The closed-form equivariant Betti numbers
//! of the loop space pair of a compact space form `S^{2n+1}/Gamma`; the
//! Morse-type numbers generated by a geodesic system through the index
//! iteration formula; and the resonance identity tying mean Euler numbers
//! and mean indices to the average Betti number `(n+1)/(2n)`. All three are
//! evaluated exactly, so an audit verdict is a certificate, not a numeric
//! impression.

use crate::exact_scalar::{CertifiedCmp, ExactScalar, FieldSum, DEFAULT_CMP_BITS};
use crate::iteration::{GeodesicModel, GeodesicSystem, IterationError};
use num_rational::BigRational;
use num_traits::{Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HomologyError {
    #[error("model {0:?} is degenerate but carries no type tables")]
    MissingTypeTables(String),
    #[error("model {label:?}: {source}")]
    Iteration {
        label: String,
        #[source]
        source: IterationError,
    },
    #[error("model {0:?} must have positive mean index")]
    NonPositiveMeanIndex(String),
}

/// The equivariant Betti number `beta_j` of `(Lambda_e M, Lambda^0 M)` for
/// `M = S^{2n+1}/Gamma`, in closed form:
///
/// * 2 when `j` lies in `K = {2nk : k >= 2}`,
/// * 1 when `j` is even with `j >= 2n` but outside `K`,
/// * 0 otherwise (in particular for every odd `j` and all `j < 2n`).
pub fn betti(n: u32, j: i64) -> u8 {
    debug_assert!(n >= 1);
    let period = 2 * n as i64;
    if j < period || j % 2 != 0 {
        return 0;
    }
    if j % period == 0 && j / period >= 2 {
        return 2;
    }
    1
}

/// `beta_0 .. beta_max_j` as a vector.
pub fn betti_table(n: u32, max_j: i64) -> Vec<u8> {
    (0..=max_j).map(|j| betti(n, j)).collect()
}

/// The average equivariant Betti number `(n+1)/(2n)`.
pub fn average_betti(n: u32) -> BigRational {
    BigRational::new((n as i64 + 1).into(), (2 * n as i64).into())
}

/// The partial alternating average `(1/q) * sum_{k<=q} (-1)^k beta_k`,
/// which converges to [`average_betti`] with error `O(1/q)`.
pub fn partial_alternating_average(n: u32, q: u32) -> BigRational {
    assert!(q >= 1);
    let mut acc: i64 = 0;
    for k in 0..=q as i64 {
        let b = betti(n, k) as i64;
        acc += if k % 2 == 0 { b } else { -b };
    }
    BigRational::new(acc.into(), (q as i64).into())
}

/// Morse-type numbers `M_p` of a geodesic system up to a degree cap,
/// together with the contributing iterates per degree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseTable {
    pub cap: i64,
    /// `counts[p] = M_p` for `0 <= p <= cap`.
    pub counts: Vec<u64>,
    /// Per degree: `(label, m, contribution)` for every pair that lands
    /// there, in system order.
    pub contributors: BTreeMap<i64, Vec<(String, i64, u64)>>,
}

impl MorseTable {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Iterates `m = 1, 2, ...` of one geodesic until the growth bound proves
/// `i(c^m) > cap` for good: certified by `m * i-hat > cap + 2n`.
fn iterate_horizon(g: &GeodesicModel, cap: i64) -> impl Iterator<Item = i64> + '_ {
    let ihat = g.mean_index_sum();
    let threshold = BigRational::from_integer((cap + g.decomp.half_dim() as i64).into());
    (1i64..).take_while(move |m| {
        let total = ihat.scaled(&BigRational::from_integer((*m).into()));
        !matches!(total.cmp_rational(&threshold, DEFAULT_CMP_BITS), CertifiedCmp::Greater)
    })
}

/// Computes the Morse-type numbers of the system up to `cap`.
///
/// Bumpy rule: a nondegenerate iterate `c^m` contributes 1 to degree
/// `i(c^m)` exactly when `i(c^m) - i(c)` is even, else nothing. Degenerate
/// models contribute their supplied local type numbers: `k_l(c^m)` lands in
/// degree `i(c^m) + l`.
pub fn morse_type_numbers(s: &GeodesicSystem, cap: i64) -> Result<MorseTable, HomologyError> {
    assert!(cap >= 0);
    let mut counts = vec![0u64; cap as usize + 1];
    let mut contributors: BTreeMap<i64, Vec<(String, i64, u64)>> = BTreeMap::new();
    for g in &s.geodesics {
        positive_mean_index(g)?;
        let synthesized = g.type_tables.is_none();
        if synthesized && !g.structurally_nondegenerate() {
            return Err(HomologyError::MissingTypeTables(g.label.clone()));
        }
        let period = if synthesized {
            1
        } else {
            g.analytical_period().map_err(|source| HomologyError::Iteration {
                label: g.label.clone(),
                source,
            })?
        };
        for m in iterate_horizon(g, cap) {
            let idx = g.index_of_iterate(m);
            if synthesized {
                let (_, eps) = g.index_parity(m);
                if eps == 1 && (0..=cap).contains(&idx) {
                    counts[idx as usize] += 1;
                    contributors.entry(idx).or_default().push((g.label.clone(), m, 1));
                }
            } else {
                let row = g
                    .type_row(m, period)
                    .ok_or_else(|| HomologyError::MissingTypeTables(g.label.clone()))?;
                for (l, k) in row.iter().enumerate() {
                    if *k == 0 {
                        continue;
                    }
                    let p = idx + l as i64;
                    if (0..=cap).contains(&p) {
                        counts[p as usize] += *k as u64;
                        contributors
                            .entry(p)
                            .or_default()
                            .push((g.label.clone(), m, *k as u64));
                    }
                }
            }
        }
    }
    Ok(MorseTable { cap, counts, contributors })
}

fn positive_mean_index(g: &GeodesicModel) -> Result<(), HomologyError> {
    match g.mean_index_sum().sign_certified(DEFAULT_CMP_BITS) {
        CertifiedCmp::Greater => Ok(()),
        _ => Err(HomologyError::NonPositiveMeanIndex(g.label.clone())),
    }
}

/// One violated inequality in a Morse audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseViolation {
    pub degree: i64,
    pub morse: i64,
    pub betti: i64,
    pub kind: MorseViolationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorseViolationKind {
    /// `M_p < beta_p`.
    Pointwise,
    /// An alternating partial sum `sum (-1)^{q-p} (M_p - beta_p)` is negative.
    Alternating,
    /// `M_p != beta_p` in a system whose contributions are all even-degree.
    EvenEquality,
}

/// Outcome of [`morse_audit`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseAuditReport {
    pub cap: i64,
    pub even_system: bool,
    pub violations: Vec<MorseViolation>,
    pub table: MorseTable,
}

impl MorseAuditReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audits the system's Morse data against the Betti numbers: pointwise
/// inequalities `M_p >= beta_p`, the alternating-sum inequalities, and for
/// systems producing only even-degree contributions the strict equality
/// `M_p = beta_p`.
pub fn morse_audit(s: &GeodesicSystem, cap: i64) -> Result<MorseAuditReport, HomologyError> {
    let table = morse_type_numbers(s, cap)?;
    let even_system = system_is_even(s);
    let mut violations = Vec::new();
    for p in 0..=cap {
        let m_p = table.counts[p as usize] as i64;
        let b_p = betti(s.n, p) as i64;
        if m_p < b_p {
            violations.push(MorseViolation {
                degree: p,
                morse: m_p,
                betti: b_p,
                kind: MorseViolationKind::Pointwise,
            });
        }
        if even_system && m_p != b_p {
            violations.push(MorseViolation {
                degree: p,
                morse: m_p,
                betti: b_p,
                kind: MorseViolationKind::EvenEquality,
            });
        }
    }
    let mut alternating = 0i64;
    for q in 0..=cap {
        // sum_{p<=q} (-1)^{q-p} (M_p - beta_p): flip the running sign and add
        let diff = table.counts[q as usize] as i64 - betti(s.n, q) as i64;
        alternating = diff - alternating;
        if alternating < 0 {
            violations.push(MorseViolation {
                degree: q,
                morse: alternating,
                betti: 0,
                kind: MorseViolationKind::Alternating,
            });
        }
    }
    violations.sort_by_key(|v| (v.degree, v.kind as u8));
    Ok(MorseAuditReport { cap, even_system, violations, table })
}

/// A system is even when every possible contribution degree is even: for
/// synthesized (bumpy) models it is enough that `i(c)` and `i(c^2)` are
/// even, since index parity has period 2; degenerate models additionally
/// need all odd-offset table entries to vanish.
fn system_is_even(s: &GeodesicSystem) -> bool {
    s.geodesics.iter().all(|g| {
        let even12 = g.index_of_iterate(1) % 2 == 0 && g.index_of_iterate(2) % 2 == 0;
        let tables_even = g.type_tables.as_ref().is_none_or(|tables| {
            tables
                .values()
                .all(|row| row.iter().enumerate().all(|(l, k)| l % 2 == 0 || *k == 0))
        });
        even12 && tables_even
    })
}

/// The mean Euler number of one geodesic:
///
/// ```text
/// chi-hat(c) = (1/n_c) * sum_{m=1}^{n_c} sum_l (-1)^{l + i(c^m)} k_l(c^m)
/// ```
///
/// For a model without tables the local data is synthesized from
/// nondegeneracy: `k_0(c^m) = 1` when `i(c^m) - i(c)` is even, else the
/// iterate contributes nothing.
pub fn mean_euler(g: &GeodesicModel, n: u32) -> Result<BigRational, HomologyError> {
    debug_assert_eq!(g.decomp.half_dim(), 2 * n, "model does not match the system dimension");
    let period = g.analytical_period().map_err(|source| HomologyError::Iteration {
        label: g.label.clone(),
        source,
    })?;
    let mut acc = BigRational::zero();
    for m in 1..=period as i64 {
        let idx = g.index_of_iterate(m);
        let sign_idx = if idx % 2 == 0 { 1i64 } else { -1 };
        match &g.type_tables {
            None => {
                if !g.structurally_nondegenerate() {
                    return Err(HomologyError::MissingTypeTables(g.label.clone()));
                }
                let (_, eps) = g.index_parity(m);
                if eps == 1 {
                    acc += BigRational::from_integer(sign_idx.into());
                }
            }
            Some(_) => {
                let row = g
                    .type_row(m, period)
                    .ok_or_else(|| HomologyError::MissingTypeTables(g.label.clone()))?;
                for (l, k) in row.iter().enumerate() {
                    let sign = if l % 2 == 0 { sign_idx } else { -sign_idx };
                    acc += BigRational::from_integer((sign * *k as i64).into());
                }
            }
        }
    }
    Ok(acc / BigRational::from_integer((period as i64).into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonanceVerdict {
    Holds,
    Fails,
    Inconclusive,
}

/// Outcome of [`resonance_check`]: the exact left-hand side as a sum over
/// quadratic fields, the target `(n+1)/(2n)`, and the certified verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceReport {
    pub verdict: ResonanceVerdict,
    pub lhs: FieldSum,
    pub rhs: BigRational,
    /// `(label, chi-hat, i-hat)` per geodesic.
    pub terms: Vec<(String, BigRational, ExactScalar)>,
}

/// Evaluates the resonance identity `sum_j chi-hat(c_j)/i-hat(c_j) =
/// (n+1)/(2n)` exactly.
///
/// Each geodesic's term lives in a single quadratic field (the reciprocal
/// of its mean index), so the sum is a [`FieldSum`] and equality with the
/// rational target is decided coefficientwise; `Inconclusive` can only
/// arise from the interval fallback on a nonzero difference too small for
/// the precision cap.
pub fn resonance_check(s: &GeodesicSystem) -> Result<ResonanceReport, HomologyError> {
    let mut lhs = FieldSum::zero();
    let mut terms = Vec::new();
    for g in &s.geodesics {
        positive_mean_index(g)?;
        let ihat = g.mean_index().map_err(|source| HomologyError::Iteration {
            label: g.label.clone(),
            source,
        })?;
        let chi = mean_euler(g, s.n)?;
        let term = ihat
            .recip()
            .expect("positive mean index")
            .checked_mul(&ExactScalar::from_ratio(chi.clone()))
            .expect("rational times single-field scalar");
        lhs.add_scalar(&term);
        terms.push((g.label.clone(), chi, ihat));
    }
    let rhs = average_betti(s.n);
    let verdict = match lhs.cmp_rational(&rhs, DEFAULT_CMP_BITS) {
        CertifiedCmp::Equal => ResonanceVerdict::Holds,
        CertifiedCmp::Less | CertifiedCmp::Greater => ResonanceVerdict::Fails,
        CertifiedCmp::Inconclusive { .. } => ResonanceVerdict::Inconclusive,
    };
    Ok(ResonanceReport { verdict, lhs, rhs, terms })
}
