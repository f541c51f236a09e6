//! The precise index iteration formula and its direct consequences.
//!
//! Given the normal form data of a closed geodesic's linearized Poincaré
//! map and the Morse index of the underlying geodesic, the index of every
//! iterate is determined by a closed formula: a linear term, one ceiling
//! term per rotation angle, a parity toggle from the eigenvalue -1 blocks,
//! and an integrality correction per nontrivial N2 block. Everything here
//! is evaluated in exact arithmetic; the mean index in particular is kept
//! as an [`ExactScalar`] because certificate search depends on exact
//! fractional parts of its reciprocal.

use crate::exact_scalar::{ExactScalar, FieldSum, ScalarError};
use crate::normal_form::NormalFormDecomposition;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IterationError {
    #[error("mean index mixes radicands sqrt({0}) and sqrt({1}); it is exact but not a single quadratic scalar")]
    MixedRadicands(u32, u32),
    #[error("analytical period requires unbounded search: rational angle lcm exceeds cap {cap}")]
    UnboundedSearch { cap: u64 },
}

/// Local homological type numbers of one iterate: `row[l] = k_l(c^m)` for
/// `l = 0 .. 2*half_dim`.
pub type TypeRow = Vec<u32>;

/// A closed geodesic as the index theory sees it: initial Morse index,
/// normal form of the linearized Poincaré map, and for degenerate orbits an
/// explicitly supplied table of local type numbers per iterate within one
/// analytical period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicModel {
    pub label: String,
    pub initial_index: u32,
    pub decomp: NormalFormDecomposition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_tables: Option<BTreeMap<u64, TypeRow>>,
}

/// Default cap on the rational-angle lcm within analytical period search.
pub const DEFAULT_PERIOD_CAP: u64 = 1_000_000;

impl GeodesicModel {
    pub fn new(label: impl Into<String>, initial_index: u32, decomp: NormalFormDecomposition) -> Self {
        GeodesicModel { label: label.into(), initial_index, decomp, type_tables: None }
    }

    /// The linear coefficient of the iteration formula:
    /// `L = i(c) + p_minus + p_zero - r`. Everything else in the formula
    /// stays bounded, so `L` also carries the rational part of the mean
    /// index.
    fn linear_term(&self) -> i64 {
        let d = &self.decomp;
        self.initial_index as i64 + d.p_minus() as i64 + d.p_zero() as i64 - d.r() as i64
    }

    /// `i(c^m)`, exactly.
    ///
    /// The formula: with `L` as above and `E` the ceiling,
    ///
    /// ```text
    /// i(c^m) = m*L + sum_rot 2*E(m*rho) - r - p_minus - p_zero
    ///          - [m even]*(q_zero + q_plus)
    ///          + sum_{nontrivial N2} 2*phi(m*alpha) - 2*r_star
    /// ```
    ///
    /// Trivial N2 blocks and hyperbolic blocks drop out entirely, and
    /// `N1(-1, 1)` blocks affect only the nullity.
    pub fn index_of_iterate(&self, m: i64) -> i64 {
        assert!(m >= 1, "iterate count must be positive");
        let d = &self.decomp;
        let mut idx = BigInt::from(m) * BigInt::from(self.linear_term());
        for rho in d.rotation_angles() {
            idx += 2 * rho.ceil_mul(m);
        }
        idx -= (d.r() + d.p_minus() + d.p_zero()) as i64;
        if m % 2 == 0 {
            idx -= (d.q_zero() + d.q_plus()) as i64;
        }
        for alpha in d.nontrivial_n2_angles() {
            idx += 2 * alpha.varphi_mul(m) as i64;
        }
        idx -= 2 * d.r_star() as i64;
        idx.to_i64().expect("index exceeds i64")
    }

    /// `nu(c^m) = dim ker(P_c^m - I)`.
    pub fn nullity_of_iterate(&self, m: i64) -> u32 {
        self.decomp.nullity_at(m)
    }

    /// The mean index `i-hat(c) = lim i(c^m)/m`, exactly:
    /// `L + 2*sum(rotation angles)`.
    ///
    /// Fails only when the rotation angles live in different quadratic
    /// fields, in which case the value exists but is not a single
    /// [`ExactScalar`]; see [`GeodesicModel::mean_index_sum`] for the
    /// representation that always works.
    pub fn mean_index(&self) -> Result<ExactScalar, IterationError> {
        let mut sum = ExactScalar::from_int(self.linear_term());
        for rho in self.decomp.rotation_angles() {
            let doubled = rho.scale(2);
            sum = sum.checked_add(&doubled).map_err(|e| match e {
                ScalarError::FieldMismatch(a, b) => IterationError::MixedRadicands(a, b),
                other => unreachable!("mean index addition: {other}"),
            })?;
        }
        Ok(sum)
    }

    /// The mean index as a multi-field sum; never fails.
    pub fn mean_index_sum(&self) -> FieldSum {
        let mut sum = FieldSum::zero();
        sum.add_rational(&BigRational::from_integer(self.linear_term().into()));
        for rho in self.decomp.rotation_angles() {
            sum.add_weighted(&BigRational::from_integer(2.into()), rho);
        }
        sum
    }

    /// Parity of `i(c^m)` together with `epsilon(c^m) = (-1)^{i(c^m)-i(c)}`.
    pub fn index_parity(&self, m: i64) -> (Parity, i8) {
        let im = self.index_of_iterate(m);
        let parity = if im % 2 == 0 { Parity::Even } else { Parity::Odd };
        let eps = if (im - self.initial_index as i64) % 2 == 0 { 1 } else { -1 };
        (parity, eps)
    }

    /// The analytical period `n_c`: the minimal `j` such that `nu(c^j)` is
    /// maximal and `i(c^{m+j}) - i(c^m)` is even for every `m`.
    ///
    /// Structurally: the nullity clause forces `j` to be a multiple of the
    /// lcm `L0` of all rational angle denominators, together with 2 when
    /// eigenvalue -1 blocks are present; the parity clause then doubles
    /// `L0` exactly when both `L0` and the linear coefficient are odd.
    /// (The bounded formula terms are all even, so they never affect
    /// parity.)
    pub fn analytical_period(&self) -> Result<u64, IterationError> {
        self.analytical_period_capped(DEFAULT_PERIOD_CAP)
    }

    pub fn analytical_period_capped(&self, cap: u64) -> Result<u64, IterationError> {
        let d = &self.decomp;
        let mut l0 = BigInt::one();
        if d.q_minus() + d.q_zero() + d.q_plus() > 0 {
            l0 = BigInt::from(2);
        }
        for rho in d.all_angles() {
            if let Some(ratio) = rho.as_ratio() {
                l0 = l0.lcm(ratio.denom());
                if l0 > BigInt::from(cap) {
                    return Err(IterationError::UnboundedSearch { cap });
                }
            }
        }
        let l0 = l0.to_u64().expect("bounded by cap");
        let parity_ok = l0 % 2 == 0 || self.linear_term() % 2 == 0;
        let period = if parity_ok { l0 } else { 2 * l0 };
        if period > cap {
            return Err(IterationError::UnboundedSearch { cap });
        }
        Ok(period)
    }

    /// Verifies `|i(c^m) - m*i-hat| <= bound` for `1 <= m <= horizon` and
    /// reports the largest deviation encountered.
    pub fn growth_bound_check(&self, bound: u32, horizon: i64) -> Result<GrowthReport, IterationError> {
        let ihat = self.mean_index()?;
        let mut worst = ExactScalar::zero();
        let mut worst_m = 1;
        for m in 1..=horizon {
            let dev = ExactScalar::from_int(self.index_of_iterate(m))
                .checked_sub(&ihat.scale(m))
                .expect("same field")
                .abs();
            if dev > worst {
                worst = dev;
                worst_m = m;
            }
        }
        let ok = worst <= ExactScalar::from_int(bound as i64);
        Ok(GrowthReport { ok, bound, max_deviation: worst, worst_m, horizon })
    }

    /// True when the normal form alone guarantees `nu(c^m) = 0` for every
    /// `m`: no eigenvalue +-1 blocks and no rational angles. For this block
    /// vocabulary the structural test is exact, not merely a horizon scan.
    pub fn structurally_nondegenerate(&self) -> bool {
        let d = &self.decomp;
        let n1 = d.p_minus() + d.p_zero() + d.p_plus() + d.q_minus() + d.q_zero() + d.q_plus();
        n1 == 0 && d.all_angles().all(|rho| !rho.is_rational())
    }

    /// Local type numbers of `c^m`, reduced through the analytical period.
    /// `None` when no tables were supplied or the reduced key is missing.
    pub fn type_row(&self, m: i64, period: u64) -> Option<&TypeRow> {
        let tables = self.type_tables.as_ref()?;
        let reduced = ((m as u64 - 1) % period) + 1;
        tables.get(&reduced)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

/// Result of a growth bound scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthReport {
    pub ok: bool,
    pub bound: u32,
    pub max_deviation: ExactScalar,
    pub worst_m: i64,
    pub horizon: i64,
}

/// A configuration of closed geodesics on one space form `S^{2n+1}/Gamma`.
///
/// `n` fixes the manifold dimension `2n+1` and with it the symplectic half
/// dimension `2n` of every Poincaré map. The flags record the geometric
/// hypotheses the audits rely on: `bumpy` promises every iterate of every
/// geodesic is nondegenerate; `curvature_pinched` promises the pinching
/// condition that forces `i(c) >= 2n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSystem {
    pub n: u32,
    pub group_label: String,
    pub bumpy: bool,
    pub curvature_pinched: bool,
    pub geodesics: Vec<GeodesicModel>,
}

impl GeodesicSystem {
    /// Checks every structural invariant, reporting all violations.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if self.n == 0 {
            violations.push("n must be positive".to_string());
        }
        let mut seen = std::collections::BTreeSet::new();
        for g in &self.geodesics {
            let label = &g.label;
            if !seen.insert(label.clone()) {
                violations.push(format!("duplicate label {label:?}"));
            }
            for v in g.decomp.validate() {
                violations.push(format!("{label}: {v}"));
            }
            if g.decomp.half_dim() != 2 * self.n {
                violations.push(format!(
                    "{label}: half_dim {} != 2n = {}",
                    g.decomp.half_dim(),
                    2 * self.n
                ));
            }
            if self.bumpy && !g.structurally_nondegenerate() {
                violations.push(format!(
                    "{label}: bumpy system contains a degenerate iterate (eigenvalue +-1 block or rational angle)"
                ));
            }
            if self.curvature_pinched && (g.initial_index as u64) < 2 * self.n as u64 {
                violations.push(format!(
                    "{label}: pinched curvature forces i(c) >= {}, got {}",
                    2 * self.n,
                    g.initial_index
                ));
            }
            match g.mean_index_sum().sign_certified(crate::exact_scalar::DEFAULT_CMP_BITS) {
                crate::exact_scalar::CertifiedCmp::Greater => {}
                _ => violations.push(format!("{label}: mean index must be positive")),
            }
            if let Some(tables) = &g.type_tables {
                self.validate_tables(g, tables, &mut violations);
            }
        }
        violations
    }

    fn validate_tables(
        &self,
        g: &GeodesicModel,
        tables: &BTreeMap<u64, TypeRow>,
        violations: &mut Vec<String>,
    ) {
        let label = &g.label;
        let width = (2 * g.decomp.half_dim() + 1) as usize;
        for (m, row) in tables {
            if *m == 0 {
                violations.push(format!("{label}: type table key 0 (iterates start at 1)"));
            }
            if row.len() != width {
                violations.push(format!(
                    "{label}: type table row at m={m} has {} entries, expected {width}",
                    row.len()
                ));
            }
        }
        let period = match g.analytical_period() {
            Ok(p) => p,
            Err(e) => {
                violations.push(format!("{label}: {e}"));
                return;
            }
        };
        for m in 1..=period {
            if !tables.contains_key(&m) {
                violations.push(format!(
                    "{label}: type tables must cover one analytical period (missing m={m} of {period})"
                ));
            }
        }
        for (m, row) in tables {
            if *m > period {
                let reduced = ((m - 1) % period) + 1;
                if tables.get(&reduced) != Some(row) {
                    violations.push(format!(
                        "{label}: type table at m={m} breaks periodicity against m={reduced}"
                    ));
                }
            }
        }
    }

    pub fn find(&self, label: &str) -> Option<&GeodesicModel> {
        self.geodesics.iter().find(|g| g.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal_form::NormalFormBlock;
    use proptest::prelude::*;

    fn scalar(s: &str) -> ExactScalar {
        s.parse().unwrap()
    }

    fn rotations(i0: u32, angles: &[&str]) -> GeodesicModel {
        let blocks: Vec<NormalFormBlock> = angles
            .iter()
            .map(|s| NormalFormBlock::Rotation { rho: scalar(s) })
            .collect();
        let d = NormalFormDecomposition::from_blocks(blocks.len() as u32, &blocks).unwrap();
        GeodesicModel::new("c", i0, d)
    }

    fn hyperbolic(i0: u32, count: u32) -> GeodesicModel {
        let blocks: Vec<NormalFormBlock> =
            (0..count).map(|_| NormalFormBlock::Hyperbolic { sign: 1 }).collect();
        let d = NormalFormDecomposition::from_blocks(count, &blocks).unwrap();
        GeodesicModel::new("h", i0, d)
    }

    #[test]
    fn reflected_rotation_pair_gives_linear_index() {
        // rho2 = 1 - rho1 makes the two ceiling terms telescope to m + 1
        let g = rotations(2, &["-1 + sqrt(2)", "2 - sqrt(2)"]);
        for m in 1..=1000 {
            assert_eq!(g.index_of_iterate(m), 2 * m, "m={m}");
        }
        assert_eq!(g.mean_index().unwrap(), ExactScalar::from_int(2));
    }

    #[test]
    fn hyperbolic_index_is_homogeneous() {
        let g = hyperbolic(2, 2);
        for m in 1..=100 {
            assert_eq!(g.index_of_iterate(m), 2 * m);
        }
        assert_eq!(g.mean_index().unwrap(), ExactScalar::from_int(2));

        let odd = hyperbolic(3, 2);
        for m in 1..=100 {
            assert_eq!(odd.index_of_iterate(m), 3 * m);
        }
    }

    #[test]
    fn single_rotation_mean_index() {
        let g = rotations(4, &["-1 + sqrt(2)"]);
        // L = 4 - 1 = 3, i-hat = 3 + 2(sqrt(2)-1) = 1 + 2*sqrt(2)
        assert_eq!(g.mean_index().unwrap(), scalar("1 + 2*sqrt(2)"));
        let report = g.growth_bound_check(2, 10_000).unwrap();
        assert!(report.ok);
        assert!(report.max_deviation < ExactScalar::from_int(2));
    }

    #[test]
    fn mean_index_field_mismatch_reported() {
        let g = rotations(4, &["-1 + sqrt(2)", "-1 + sqrt(3)"]);
        assert_eq!(g.mean_index(), Err(IterationError::MixedRadicands(2, 3)));
        // the FieldSum form still decides positivity
        let sum = g.mean_index_sum();
        assert_eq!(
            sum.sign_certified(crate::exact_scalar::DEFAULT_CMP_BITS),
            crate::exact_scalar::CertifiedCmp::Greater
        );
    }

    #[test]
    fn katok_golden_values() {
        // the four geodesics of the n = 1 Katok-type configuration
        let c1p = rotations(2, &["3/2 - 1/2*sqrt(2)", "5/2 - 3/2*sqrt(2)"]);
        assert_eq!(c1p.mean_index().unwrap(), scalar("8 - 4*sqrt(2)"));
        assert_eq!(c1p.index_of_iterate(1), 2);

        let c1m = rotations(14, &["-3/2 + 3/2*sqrt(2)", "-1/2 + 1/2*sqrt(2)"]);
        assert_eq!(c1m.mean_index().unwrap(), scalar("8 + 4*sqrt(2)"));

        let c2p = rotations(4, &["-1/7 + 2/7*sqrt(2)", "10/7 - 6/7*sqrt(2)"]);
        assert_eq!(c2p.mean_index().unwrap(), scalar("32/7 - 8/7*sqrt(2)"));

        let c2m = rotations(6, &["-4/7 + 6/7*sqrt(2)", "6/7 - 2/7*sqrt(2)"]);
        assert_eq!(c2m.mean_index().unwrap(), scalar("32/7 + 8/7*sqrt(2)"));

        // the mean indices satisfy the growth bound with room to spare
        for g in [&c1p, &c1m, &c2p, &c2m] {
            let report = g.growth_bound_check(2, 2000).unwrap();
            assert!(report.ok, "deviation {} at m={}", report.max_deviation.to_f64(), report.worst_m);
        }
    }

    #[test]
    fn parity_and_epsilon() {
        let katok = rotations(2, &["-1 + sqrt(2)", "2 - sqrt(2)"]);
        for m in 1..=50 {
            let (p, eps) = katok.index_parity(m);
            assert_eq!(p, Parity::Even);
            assert_eq!(eps, 1);
        }

        let odd_hyp = hyperbolic(3, 1);
        let (p1, e1) = odd_hyp.index_parity(1);
        assert_eq!((p1, e1), (Parity::Odd, 1));
        let (p2, e2) = odd_hyp.index_parity(2);
        // i(c^2) = 6, epsilon = (-1)^{6-3} = -1
        assert_eq!((p2, e2), (Parity::Even, -1));
    }

    #[test]
    fn analytical_periods() {
        // bumpy, all indices even
        let katok = rotations(2, &["-1 + sqrt(2)", "2 - sqrt(2)"]);
        assert_eq!(katok.analytical_period().unwrap(), 1);

        // parity alternates, so the period doubles
        let odd_hyp = hyperbolic(3, 1);
        assert_eq!(odd_hyp.analytical_period().unwrap(), 2);

        // one identity factor: nu is constant but L = i + 1 is odd, so the
        // parity clause still forces period 2
        let d = NormalFormDecomposition::from_blocks(
            1,
            &[NormalFormBlock::N1 { lambda: 1, b: 0 }],
        )
        .unwrap();
        let identity_block = GeodesicModel::new("c", 2, d);
        assert_eq!(identity_block.analytical_period().unwrap(), 2);

        // rational angle with an eigenvalue -1 block: lcm picks up both
        let d = NormalFormDecomposition::from_blocks(
            2,
            &[
                NormalFormBlock::Rotation { rho: scalar("1/3") },
                NormalFormBlock::N1 { lambda: -1, b: 0 },
            ],
        )
        .unwrap();
        let g = GeodesicModel::new("c", 2, d);
        assert_eq!(g.analytical_period().unwrap(), 6);
    }

    #[test]
    fn analytical_period_cap() {
        let g = rotations(2, &["1/1009", "1/1013"]);
        // lcm = 1009*1013 = 1022117 > 10^6
        let err = g.analytical_period().unwrap_err();
        assert!(err.to_string().contains("unbounded search"), "{err}");
        assert!(g.analytical_period_capped(2_000_000).is_ok());
    }

    #[test]
    fn growth_deviation_zero_for_linear_models() {
        let katok = rotations(2, &["-1 + sqrt(2)", "2 - sqrt(2)"]);
        let report = katok.growth_bound_check(2, 500).unwrap();
        assert!(report.ok);
        assert!(report.max_deviation.is_zero());

        let hyp = hyperbolic(2, 2);
        let report = hyp.growth_bound_check(4, 500).unwrap();
        assert!(report.max_deviation.is_zero());
    }

    fn katok_like_system() -> GeodesicSystem {
        GeodesicSystem {
            n: 1,
            group_label: "S3".to_string(),
            bumpy: true,
            curvature_pinched: true,
            geodesics: vec![
                {
                    let mut g = rotations(2, &["3/2 - 1/2*sqrt(2)", "5/2 - 3/2*sqrt(2)"]);
                    g.label = "c1p".to_string();
                    g
                },
                {
                    let mut g = rotations(14, &["-3/2 + 3/2*sqrt(2)", "-1/2 + 1/2*sqrt(2)"]);
                    g.label = "c1m".to_string();
                    g
                },
            ],
        }
    }

    #[test]
    fn system_validation() {
        assert!(katok_like_system().validate().is_empty());

        let mut s = katok_like_system();
        s.geodesics[1].label = "c1p".to_string();
        assert!(s.validate().iter().any(|v| v.contains("duplicate label")));

        let mut s = katok_like_system();
        s.n = 2;
        assert!(s.validate().iter().any(|v| v.contains("half_dim")));

        let mut s = katok_like_system();
        s.geodesics[0].initial_index = 1;
        assert!(s.validate().iter().any(|v| v.contains("pinched")));

        // a rational angle breaks bumpiness
        let mut s = katok_like_system();
        s.geodesics[0] = {
            let mut g = rotations(2, &["1/3", "2 - sqrt(2)"]);
            g.label = "c1p".to_string();
            g
        };
        assert!(s.validate().iter().any(|v| v.contains("bumpy")));

        // negative mean index
        let mut s = katok_like_system();
        s.curvature_pinched = false;
        s.geodesics[0] = {
            let mut g = rotations(0, &["3/2 - 1/2*sqrt(2)", "5/2 - 3/2*sqrt(2)"]);
            g.label = "c1p".to_string();
            g
        };
        // L = 0 - 2 = -2, i-hat = -2 + 2(0.79 + 0.38) > 0: still positive
        assert!(s.validate().is_empty());
        s.geodesics[0].decomp = NormalFormDecomposition::from_blocks(
            2,
            &[
                NormalFormBlock::Rotation { rho: scalar("1/4 - 1/10*sqrt(2)") },
                NormalFormBlock::Rotation { rho: scalar("1/4 - 1/11*sqrt(2)") },
            ],
        )
        .unwrap();
        // i-hat = -2 + 2(~0.11 + ~0.12) < 0
        assert!(s.validate().iter().any(|v| v.contains("mean index")));
    }

    #[test]
    fn type_table_validation() {
        let d = NormalFormDecomposition::from_blocks(
            2,
            &[
                NormalFormBlock::N1 { lambda: 1, b: 0 },
                NormalFormBlock::Rotation { rho: scalar("-1 + sqrt(2)") },
            ],
        )
        .unwrap();
        let mut g = GeodesicModel::new("c", 2, d);
        // period 2 (L = 2 + 1 - 1 = 2 even, no q blocks, lcm 1 -> wait:
        // L even means period l0 = 1). Supply the single needed row.
        assert_eq!(g.analytical_period().unwrap(), 1);
        g.type_tables = Some(BTreeMap::from([(1u64, vec![0u32; 5])]));
        let s = GeodesicSystem {
            n: 1,
            group_label: "test".to_string(),
            bumpy: false,
            curvature_pinched: false,
            geodesics: vec![g.clone()],
        };
        assert!(s.validate().is_empty(), "{:?}", s.validate());

        // wrong row width
        let mut bad = s.clone();
        bad.geodesics[0].type_tables = Some(BTreeMap::from([(1u64, vec![0u32; 3])]));
        assert!(bad.validate().iter().any(|v| v.contains("expected 5")));

        // missing coverage
        let mut bad = s.clone();
        bad.geodesics[0].type_tables = Some(BTreeMap::from([(2u64, vec![0u32; 5])]));
        let v = bad.validate();
        assert!(v.iter().any(|m| m.contains("missing m=1")), "{v:?}");

        // periodicity breach: m=2 must repeat m=1 when the period is 1
        let mut bad = s;
        bad.geodesics[0].type_tables = Some(BTreeMap::from([
            (1u64, vec![0u32; 5]),
            (2u64, {
                let mut row = vec![0u32; 5];
                row[0] = 1;
                row
            }),
        ]));
        assert!(bad.validate().iter().any(|v| v.contains("periodicity")));
    }

    #[test]
    fn system_serde_round_trip() {
        let s = katok_like_system();
        let json = serde_json::to_string_pretty(&s).unwrap();
        let back: GeodesicSystem = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);

        // unknown fields are rejected
        let doctored = json.replace("\"n\": 1,", "\"n\": 1, \"surprise\": 3,");
        assert!(serde_json::from_str::<GeodesicSystem>(&doctored).is_err());
    }

    fn arb_angle() -> impl Strategy<Value = ExactScalar> {
        prop_oneof![
            (1i64..30, 31i64..60).prop_map(|(p, q)| ExactScalar::rational(p, q)),
            prop::sample::select(vec![
                "-1 + sqrt(2)",
                "2 - sqrt(2)",
                "3/2 - 1/2*sqrt(2)",
                "-1/7 + 2/7*sqrt(2)",
                "1/4 + 1/5*sqrt(3)",
                "2/3 - 1/9*sqrt(5)",
            ])
            .prop_map(|s| s.parse().unwrap()),
        ]
    }

    fn arb_model() -> impl Strategy<Value = GeodesicModel> {
        let blocks = prop::collection::vec(
            prop_oneof![
                (prop::sample::select(vec![1i8, -1]), -1i8..=1)
                    .prop_map(|(lambda, b)| NormalFormBlock::N1 { lambda, b }),
                arb_angle().prop_map(|rho| NormalFormBlock::Rotation { rho }),
                arb_angle().prop_map(|rho| NormalFormBlock::NontrivialN2 { rho }),
                arb_angle().prop_map(|rho| NormalFormBlock::TrivialN2 { rho }),
                prop::sample::select(vec![1i8, -1])
                    .prop_map(|sign| NormalFormBlock::Hyperbolic { sign }),
            ],
            1..6,
        );
        (blocks, 0u32..12).prop_map(|(blocks, i0)| {
            let dim: u32 = blocks.iter().map(|b| b.half_dim()).sum();
            let d = NormalFormDecomposition::from_blocks(dim, &blocks).unwrap();
            GeodesicModel::new("g", i0, d)
        })
    }

    proptest! {
        /// The formula collapses to the initial index at m = 1, whatever
        /// the decomposition.
        #[test]
        fn self_consistent_at_one(g in arb_model()) {
            prop_assert_eq!(g.index_of_iterate(1), g.initial_index as i64);
            let (_, eps) = g.index_parity(1);
            prop_assert_eq!(eps, 1);
        }

        /// i(c^{m+2}) - i(c^m) is always even.
        #[test]
        fn parity_periodicity(g in arb_model(), m in 1i64..200) {
            let a = g.index_of_iterate(m);
            let b = g.index_of_iterate(m + 2);
            prop_assert_eq!((b - a) % 2, 0);
        }

        /// |i(c^m) - m*i-hat| never exceeds the half dimension: per block
        /// the deviation is at most its half-dimension contribution. The
        /// mean index may mix fields, so the scan works in FieldSum form.
        #[test]
        fn growth_bound(g in arb_model(), m in 1i64..300) {
            use crate::exact_scalar::CertifiedCmp;
            let bound = g.decomp.half_dim() as i64;
            // delta = i(c^m) - m*i-hat, assembled term by term
            let mut delta = FieldSum::zero();
            delta.add_rational(&BigRational::from_integer(g.index_of_iterate(m).into()));
            let neg_m = BigRational::from_integer((-m).into());
            let linear = g.initial_index as i64
                + g.decomp.p_minus() as i64
                + g.decomp.p_zero() as i64
                - g.decomp.r() as i64;
            delta.add_rational(&(&neg_m * BigRational::from_integer(linear.into())));
            let two_neg_m = &neg_m * BigRational::from_integer(2.into());
            for rho in g.decomp.rotation_angles() {
                delta.add_weighted(&two_neg_m, rho);
            }
            let hi = BigRational::from_integer(bound.into());
            let lo = -&hi;
            prop_assert!(!matches!(delta.cmp_rational(&hi, 4096), CertifiedCmp::Greater));
            prop_assert!(!matches!(delta.cmp_rational(&lo, 4096), CertifiedCmp::Less));
        }

        /// For the purely rotational, even-initial-index models (the
        /// Katok shape) the index never dips below its initial value.
        #[test]
        fn rotational_monotonicity_floor(
            angles in prop::collection::vec(
                prop::sample::select(vec![
                    "3/2 - 1/2*sqrt(2)", "5/2 - 3/2*sqrt(2)",
                    "-1 + sqrt(2)", "2 - sqrt(2)", "-1/7 + 2/7*sqrt(2)",
                ]),
                1..4,
            ),
            extra in 0u32..4,
            m in 1i64..500,
        ) {
            let i0 = 2 * (angles.len() as u32 + extra);
            let g = {
                let blocks: Vec<NormalFormBlock> = angles
                    .iter()
                    .map(|s| NormalFormBlock::Rotation { rho: s.parse().unwrap() })
                    .collect();
                let d = NormalFormDecomposition::from_blocks(
                    blocks.len() as u32,
                    &blocks,
                ).unwrap();
                GeodesicModel::new("g", i0, d)
            };
            prop_assert!(g.index_of_iterate(m) >= g.initial_index as i64);
        }
    }
}
