//! Katok-style irrationally elliptic systems on odd spheres.
//!
//! The construction perturbs the round metric on S^{2n+1} by an irrational
//! multiple of a weighted rotation flow. Exactly 2n+2 prime closed
//! geodesics survive: the n+1 weighted coordinate circles, each traversed
//! in two orientations. Their linearized return maps are direct sums of 2n
//! rotations whose angles come out of the weighted flow in closed form,
//! and every audit in this crate is tight on them: Morse numbers equal
//! Betti numbers degree by degree and the resonance sum is exactly
//! (n+1)/(2n). That makes them the standard witnesses for the whole
//! pipeline and the reason the multiplicity bound cannot be improved.
//!
//! The closed-form angles are locked against an independent numerical
//! oracle (see the `jacobi_oracle` integration test): the linearized flow
//! around each circle is integrated as a complex Jacobi system and the
//! rotation numbers are read off the Poincaré-map eigenvalues, then the
//! exact expressions are confirmed to the integrator's tolerance. The
//! generator itself never ships a system that has not passed the exact
//! Morse-equality and resonance audits.

use crate::exact_scalar::ExactScalar;
use crate::iteration::{GeodesicModel, GeodesicSystem};
use crate::loop_homology::{morse_audit, resonance_check, ResonanceVerdict};
use crate::normal_form::{NormalFormBlock, NormalFormDecomposition};
use num_integer::Integer;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KatokError {
    #[error("inadmissible parameters: {0}")]
    InadmissibleParameters(String),
    #[error("inadmissible angle data: {0}")]
    InadmissibleAngleData(String),
}

/// Parameters of the weighted Katok construction on S^{2n+1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KatokParameters {
    pub n: u32,
    /// Perturbation strength, an irrational quadratic in (0, 1).
    pub alpha: ExactScalar,
    /// The n+1 pairwise coprime rotation weights.
    pub weights: Vec<u64>,
}

impl KatokParameters {
    pub fn new(n: u32, alpha: ExactScalar, weights: Vec<u64>) -> Self {
        KatokParameters { n, alpha, weights }
    }

    pub fn validate(&self) -> Result<(), KatokError> {
        let bad = |msg: String| Err(KatokError::InadmissibleParameters(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.alpha.is_rational() {
            return bad(format!("alpha = {} must be irrational", self.alpha));
        }
        if self.alpha.signum() <= 0 || self.alpha >= ExactScalar::one() {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if self.weights.len() != self.n as usize + 1 {
            return bad(format!(
                "need {} weights for n = {}, got {}",
                self.n + 1,
                self.n,
                self.weights.len()
            ));
        }
        if self.weights.iter().any(|&p| p == 0) {
            return bad("weights must be positive".into());
        }
        for (i, &a) in self.weights.iter().enumerate() {
            for &b in &self.weights[i + 1..] {
                if a.gcd(&b) != 1 {
                    return bad(format!("weights {a} and {b} are not coprime"));
                }
            }
        }
        // the reverse orientations need 1 - w_i * alpha > 0 for every
        // derived weight w_i = P / p_i
        let (_, derived) = self.derived_weights()?;
        let w_max = *derived.iter().max().expect("nonempty");
        let scaled = self
            .alpha
            .scale(w_max as i64);
        if scaled >= ExactScalar::one() {
            return bad(format!(
                "alpha = {} too large: the slowest circle needs {} * alpha < 1",
                self.alpha, w_max
            ));
        }
        Ok(())
    }

    /// (P, [P/p_1, ..., P/p_{n+1}]) where P is the product of the weights.
    fn derived_weights(&self) -> Result<(u64, Vec<u64>), KatokError> {
        let mut product: u64 = 1;
        for &p in &self.weights {
            product = product.checked_mul(p).ok_or_else(|| {
                KatokError::InadmissibleParameters("weight product overflows".into())
            })?;
        }
        if product > (1 << 31) {
            return Err(KatokError::InadmissibleParameters(
                "weight product too large for exact iteration".into(),
            ));
        }
        Ok((product, self.weights.iter().map(|&p| product / p).collect()))
    }
}

/// Angle data for one geodesic, as an angle source hands it to
/// [`katok_system`]: the initial index and the 2n rotation numbers of the
/// linearized return map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleData {
    pub label: String,
    pub initial_index: u32,
    pub angles: Vec<ExactScalar>,
}

/// The closed-form angle source for the weighted construction.
///
/// Write P for the weight product and w_i = P/p_i. The circle through the
/// i-th coordinate plane, traversed with orientation e = +-1, closes up
/// after a parameter time scaled by u = 1/(1 + e*w_i*alpha), and the
/// linearized flow around it splits into the 2n planar rotations
///
/// ```text
/// rho(j, s) = { (1 + s*w_j*alpha) * u },   j != i,  s = +-1.
/// ```
///
/// The initial index follows from the rotational mean-index relation:
/// i(c) = ihat + 2n - 2*sum(rho), with ihat = 4n*u; the construction is
/// admissible only when every rho is irrational in (0,1) and i(c) comes
/// out an even nonnegative integer.
pub fn closed_form_angles(params: &KatokParameters) -> Result<Vec<AngleData>, KatokError> {
    params.validate()?;
    let n = params.n;
    let (_, derived) = params.derived_weights()?;
    let mut out = Vec::with_capacity(2 * n as usize + 2);
    for (i, &w_i) in derived.iter().enumerate() {
        for (eps, tag) in [(1i64, 'p'), (-1i64, 'm')] {
            let label = format!("c{}{}", i + 1, tag);
            let denom = ExactScalar::one()
                .checked_add(&params.alpha.scale(eps * w_i as i64))
                .expect("same field");
            let u = denom.recip().map_err(|_| {
                KatokError::InadmissibleParameters(format!(
                    "{label}: orientation factor 1 + ({eps})*{w_i}*alpha vanishes"
                ))
            })?;
            let mut angles = Vec::with_capacity(2 * n as usize);
            let mut angle_sum = ExactScalar::zero();
            for (j, &w_j) in derived.iter().enumerate() {
                if j == i {
                    continue;
                }
                for sg in [1i64, -1] {
                    let factor = ExactScalar::one()
                        .checked_add(&params.alpha.scale(sg * w_j as i64))
                        .expect("same field");
                    let rho = factor.checked_mul(&u).expect("same field").fract();
                    if rho.is_rational() {
                        return Err(KatokError::InadmissibleParameters(format!(
                            "{label}: rotation number {rho} for weight {w_j} \
                             (sign {sg}) degenerates to a rational",
                        )));
                    }
                    angle_sum = angle_sum.checked_add(&rho).expect("same field");
                    angles.push(rho);
                }
            }
            // i(c) = ihat + 2n - 2*sum(rho) must be an even nonnegative integer
            let ihat = u.scale(4 * n as i64);
            let index_scalar = ihat
                .checked_add(&ExactScalar::from_int(2 * n as i64))
                .expect("same field")
                .checked_sub(&angle_sum.scale(2))
                .expect("same field");
            if !index_scalar.is_integer() {
                return Err(KatokError::InadmissibleParameters(format!(
                    "{label}: initial index {index_scalar} is not an integer"
                )));
            }
            let index = index_scalar.floor().to_i64().expect("small");
            if index < 0 || index % 2 != 0 {
                return Err(KatokError::InadmissibleParameters(format!(
                    "{label}: initial index {index} must be even and nonnegative"
                )));
            }
            out.push(AngleData { label, initial_index: index as u32, angles });
        }
    }
    Ok(out)
}

/// Degree up to which generated systems must match the Betti table.
pub const DEFAULT_AUDIT_CAP: i64 = 100;

/// Assembles and fully audits a Katok system from an angle source.
///
/// The source is checked for shape (2n+2 geodesics, 2n angles each), for
/// parity and ellipticity (even initial indices, irrational angles in
/// (0,1)), and then the assembled system must pass the Morse-equality
/// audit up to [`DEFAULT_AUDIT_CAP`] and certify the resonance identity.
/// A source that fails the audits is reported as inadmissible angle data;
/// the checker is never relaxed to fit the data.
pub fn katok_system(
    params: &KatokParameters,
    source: &[AngleData],
) -> Result<GeodesicSystem, KatokError> {
    params.validate()?;
    let n = params.n;
    let expect = 2 * n as usize + 2;
    if source.len() != expect {
        return Err(KatokError::InadmissibleAngleData(format!(
            "need {expect} geodesics for n = {n}, got {}",
            source.len()
        )));
    }
    let mut geodesics = Vec::with_capacity(expect);
    for data in source {
        if data.initial_index % 2 != 0 {
            return Err(KatokError::InadmissibleAngleData(format!(
                "{}: initial index {} is odd",
                data.label, data.initial_index
            )));
        }
        if data.angles.len() != 2 * n as usize {
            return Err(KatokError::InadmissibleAngleData(format!(
                "{}: expected {} rotation numbers, got {}",
                data.label,
                2 * n,
                data.angles.len()
            )));
        }
        for rho in &data.angles {
            if rho.is_rational() {
                return Err(KatokError::InadmissibleAngleData(format!(
                    "{}: rotation number {rho} is rational",
                    data.label
                )));
            }
            if rho.signum() <= 0 || *rho >= ExactScalar::one() {
                return Err(KatokError::InadmissibleAngleData(format!(
                    "{}: rotation number {rho} is outside (0, 1)",
                    data.label
                )));
            }
        }
        let blocks: Vec<NormalFormBlock> = data
            .angles
            .iter()
            .map(|rho| NormalFormBlock::Rotation { rho: rho.clone() })
            .collect();
        let decomp = NormalFormDecomposition::from_blocks(2 * n, &blocks)
            .map_err(|e| KatokError::InadmissibleAngleData(e.to_string()))?;
        geodesics.push(GeodesicModel::new(&data.label, data.initial_index, decomp));
    }
    let system = GeodesicSystem {
        n,
        group_label: "trivial".into(),
        bumpy: true,
        curvature_pinched: true,
        geodesics,
    };
    let violations = system.validate();
    if !violations.is_empty() {
        return Err(KatokError::InadmissibleAngleData(violations.join("; ")));
    }
    let audit = morse_audit(&system, DEFAULT_AUDIT_CAP)
        .map_err(|e| KatokError::InadmissibleAngleData(e.to_string()))?;
    if !audit.ok() {
        let first = &audit.violations[0];
        return Err(KatokError::InadmissibleAngleData(format!(
            "Morse equality fails at degree {}: M = {}, beta = {}",
            first.degree, first.morse, first.betti
        )));
    }
    let resonance = resonance_check(&system)
        .map_err(|e| KatokError::InadmissibleAngleData(e.to_string()))?;
    if resonance.verdict != ResonanceVerdict::Holds {
        return Err(KatokError::InadmissibleAngleData(format!(
            "resonance identity fails: sum = {}, expected {}",
            resonance.lhs, resonance.rhs
        )));
    }
    Ok(system)
}

/// [`katok_system`] fed by [`closed_form_angles`].
pub fn katok_system_closed_form(params: &KatokParameters) -> Result<GeodesicSystem, KatokError> {
    let source = closed_form_angles(params)?;
    katok_system(params, &source)
}

/// Scans a family of candidate angle sources in order and returns the
/// first whose assembled system matches the Betti table up to `cap` and
/// certifies the resonance identity; `None` when the family is exhausted.
///
/// The grid is processed in parallel but selection is lexicographic, so
/// the result does not depend on the thread count. With `cap = 0` the
/// homological gates are vacuous and the first shape- and parity-valid
/// candidate wins.
pub fn admissible_search(
    n: u32,
    cap: i64,
    family: &[Vec<AngleData>],
) -> Option<GeodesicSystem> {
    use rayon::prelude::*;
    family
        .par_iter()
        .map(|source| admissible_candidate(n, cap, source))
        .find_first(Option::is_some)
        .flatten()
}

fn admissible_candidate(n: u32, cap: i64, source: &[AngleData]) -> Option<GeodesicSystem> {
    if source.len() != 2 * n as usize + 2 {
        return None;
    }
    let mut geodesics = Vec::with_capacity(source.len());
    for data in source {
        if data.initial_index % 2 != 0 || data.angles.len() != 2 * n as usize {
            return None;
        }
        let blocks: Vec<NormalFormBlock> = data
            .angles
            .iter()
            .map(|rho| NormalFormBlock::Rotation { rho: rho.clone() })
            .collect();
        let decomp = NormalFormDecomposition::from_blocks(2 * n, &blocks).ok()?;
        geodesics.push(GeodesicModel::new(&data.label, data.initial_index, decomp));
    }
    let system = GeodesicSystem {
        n,
        group_label: "trivial".into(),
        bumpy: true,
        curvature_pinched: true,
        geodesics,
    };
    if !system.validate().is_empty() {
        return None;
    }
    if cap == 0 {
        return Some(system);
    }
    let audit = morse_audit(&system, cap).ok()?;
    if !audit.ok() {
        return None;
    }
    match resonance_check(&system).ok()?.verdict {
        ResonanceVerdict::Holds => Some(system),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(s: &str) -> ExactScalar {
        s.parse().unwrap()
    }

    fn s3_params() -> KatokParameters {
        KatokParameters::new(1, scalar("1/4*sqrt(2)"), vec![1, 2])
    }

    fn s5_params() -> KatokParameters {
        KatokParameters::new(2, scalar("1/12*sqrt(2)"), vec![1, 2, 3])
    }

    #[test]
    fn s3_closed_form_matches_hand_values() {
        let data = closed_form_angles(&s3_params()).unwrap();
        let labels: Vec<&str> = data.iter().map(|d| d.label.as_str()).collect();
        assert_eq!(labels, ["c1p", "c1m", "c2p", "c2m"]);
        let indices: Vec<u32> = data.iter().map(|d| d.initial_index).collect();
        assert_eq!(indices, [2, 14, 4, 6]);
        assert_eq!(
            data[0].angles,
            vec![scalar("3/2 - 1/2*sqrt(2)"), scalar("5/2 - 3/2*sqrt(2)")]
        );
        assert_eq!(
            data[1].angles,
            vec![scalar("-3/2 + 3/2*sqrt(2)"), scalar("-1/2 + 1/2*sqrt(2)")]
        );
        assert_eq!(
            data[2].angles,
            vec![scalar("-1/7 + 2/7*sqrt(2)"), scalar("10/7 - 6/7*sqrt(2)")]
        );
        assert_eq!(
            data[3].angles,
            vec![scalar("-4/7 + 6/7*sqrt(2)"), scalar("6/7 - 2/7*sqrt(2)")]
        );
    }

    #[test]
    fn s3_system_passes_all_gates() {
        let system = katok_system_closed_form(&s3_params()).unwrap();
        assert_eq!(system.geodesics.len(), 4);
        assert!(system.bumpy && system.curvature_pinched);
        let ihat = system.geodesics[0].mean_index().unwrap();
        assert_eq!(ihat, scalar("8 - 4*sqrt(2)"));
        let ihat_m = system.geodesics[1].mean_index().unwrap();
        assert_eq!(ihat_m, scalar("8 + 4*sqrt(2)"));
    }

    #[test]
    fn s5_closed_form_matches_hand_values() {
        let data = closed_form_angles(&s5_params()).unwrap();
        assert_eq!(data.len(), 6);
        let indices: Vec<u32> = data.iter().map(|d| d.initial_index).collect();
        assert_eq!(indices, [4, 28, 6, 12, 8, 10]);
        let system = katok_system(&s5_params(), &data).unwrap();
        assert_eq!(
            system.geodesics[4].mean_index().unwrap(),
            scalar("144/17 - 24/17*sqrt(2)")
        );
        // every iterate of every geodesic has even index
        for g in &system.geodesics {
            for m in 1..50 {
                assert_eq!(g.index_of_iterate(m) % 2, 0);
                assert_eq!(g.nullity_of_iterate(m), 0);
            }
        }
    }

    #[test]
    fn equal_weights_degenerate() {
        // equal weights collapse a rotation number to an integer: the
        // classical alpha = sqrt(2)/2, p = (1,1) configuration is rejected
        let params = KatokParameters::new(1, scalar("1/2*sqrt(2)"), vec![1, 1]);
        let err = closed_form_angles(&params).unwrap_err();
        assert!(matches!(err, KatokError::InadmissibleParameters(_)), "{err}");
    }

    #[test]
    fn oversized_alpha_rejected() {
        // weights (1,2) derive w = (2,1); alpha = sqrt(2)/2 makes
        // 2*alpha > 1 and the reverse orientation loses positivity
        let params = KatokParameters::new(1, scalar("1/2*sqrt(2)"), vec![1, 2]);
        let err = params.validate().unwrap_err();
        assert!(matches!(err, KatokError::InadmissibleParameters(_)), "{err}");
    }

    #[test]
    fn parameter_validation() {
        let cases = [
            KatokParameters::new(0, scalar("1/4*sqrt(2)"), vec![1]),
            KatokParameters::new(1, scalar("1/3"), vec![1, 2]),
            KatokParameters::new(1, scalar("2 + sqrt(2)"), vec![1, 2]),
            KatokParameters::new(1, scalar("1/4*sqrt(2)"), vec![1, 2, 3]),
            KatokParameters::new(1, scalar("1/4*sqrt(2)"), vec![2, 4]),
            KatokParameters::new(1, scalar("1/4*sqrt(2)"), vec![0, 1]),
        ];
        for params in cases {
            assert!(
                matches!(params.validate(), Err(KatokError::InadmissibleParameters(_))),
                "{params:?}"
            );
        }
    }

    #[test]
    fn wrong_parity_injection_rejected() {
        let mut data = closed_form_angles(&s3_params()).unwrap();
        data[0].initial_index = 3;
        let err = katok_system(&s3_params(), &data).unwrap_err();
        assert!(matches!(err, KatokError::InadmissibleAngleData(_)), "{err}");
        assert!(err.to_string().contains("odd"));
    }

    #[test]
    fn audit_failure_is_inadmissible_angle_data() {
        // parity-valid uniform angle data: resonance sums to 1 but the
        // Morse table has a hole at degree 2, so the source is rejected
        let uniform: Vec<AngleData> = (0..4)
            .map(|k| AngleData {
                label: format!("u{k}"),
                initial_index: 4,
                angles: vec![scalar("-1 + sqrt(2)"), scalar("2 - sqrt(2)")],
            })
            .collect();
        let err = katok_system(&s3_params(), &uniform).unwrap_err();
        match &err {
            KatokError::InadmissibleAngleData(msg) => {
                assert!(msg.contains("degree 2"), "{msg}");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn alpha_to_zero_approaches_round_metric() {
        // ihat(c1p) = 4n/(1 + 2*alpha) -> 4n as alpha -> 0
        let four = ExactScalar::from_int(4);
        let mut last_gap: Option<ExactScalar> = None;
        for t in 0..6 {
            let alpha = ExactScalar::quadratic_i64(0, 1, 1, 1 << (2 + t), 2).unwrap();
            let params = KatokParameters::new(1, alpha, vec![1, 2]);
            let data = closed_form_angles(&params).unwrap();
            let system = katok_system(&params, &data).unwrap();
            let ihat = system.geodesics[0].mean_index().unwrap();
            let gap = four.checked_sub(&ihat).unwrap().abs();
            if let Some(prev) = &last_gap {
                assert!(gap < *prev, "gap {gap} did not shrink from {prev}");
            }
            last_gap = Some(gap);
        }
    }

    #[test]
    fn admissible_search_selects_first_passing() {
        let uniform: Vec<AngleData> = (0..4)
            .map(|k| AngleData {
                label: format!("u{k}"),
                initial_index: 4,
                angles: vec![scalar("-1 + sqrt(2)"), scalar("2 - sqrt(2)")],
            })
            .collect();
        let katok = closed_form_angles(&s3_params()).unwrap();
        let family = vec![uniform.clone(), katok.clone()];
        let found = admissible_search(1, 50, &family).expect("katok candidate passes");
        assert_eq!(found.geodesics[0].label, "c1p");
        // uniform-only family is exhausted without a hit
        assert!(admissible_search(1, 50, &[uniform.clone()]).is_none());
        // cap = 0 disables the homological gates: first parity-valid wins
        let found = admissible_search(1, 0, &family).unwrap();
        assert_eq!(found.geodesics[0].label, "u0");
    }

    #[test]
    fn generated_system_supports_jump_search() {
        // the generator output plugs straight into the certificate scan
        let system = katok_system_closed_form(&s3_params()).unwrap();
        let params = crate::jump::SearchParams::new(
            1,
            1,
            num_rational::BigRational::new(1.into(), 100.into()),
            1,
        );
        let certs = crate::jump::find_certificates(&system.geodesics, &params).unwrap();
        assert_eq!(certs[0].n_value, 396);
        assert!(certs[0].verification.pass);
    }
}
