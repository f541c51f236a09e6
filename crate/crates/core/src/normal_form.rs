//! Basic normal form decompositions of linearized Poincaré maps.
//!
//! A symplectic matrix is described here only through the block data of its
//! basic normal form: counts of the six 2x2 blocks with eigenvalue 1 or -1,
//! rotation angles, 4x4 twisted-rotation (N2) angles split by triviality,
//! and hyperbolic blocks. That data determines everything the iteration
//! theory needs: nullities of iterates, splitting numbers at unit-circle
//! eigenvalues, the total negative splitting, and the ellipticity class.
//!
//! Angles are stored as `rho = theta/(2*pi)`, an [`ExactScalar`] in
//! `(0,1) \ {1/2}`; the eigenvalue pair of such a block is
//! `exp(±2*pi*i*rho)`, so an angle and its reflection `1 - rho` refer to the
//! same block seen from its two eigenvalues.

use crate::exact_scalar::ExactScalar;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalFormError {
    #[error("invalid block: {0}")]
    BadBlock(String),
    #[error("eigenvalue descriptor with angle {0} is not normalized into [0,1)")]
    NotOnCircle(ExactScalar),
}

/// One block of a basic normal form.
///
/// `N1 { lambda, b }` is the 2x2 upper-triangular block with double
/// eigenvalue `lambda` and off-diagonal `b`; `(1,0)` is the identity factor
/// and `(-1,0)` its negative. `Rotation` is a plane rotation by angle
/// `2*pi*rho`. The two `N2` variants are the 4x4 blocks built on a rotation,
/// distinguished by whether the coupling part is homotopically trivial.
/// `Hyperbolic` is a real eigenvalue pair `(lambda, 1/lambda)` off the unit
/// circle; `sign` records the sign of `lambda`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NormalFormBlock {
    N1 { lambda: i8, b: i8 },
    Rotation { rho: ExactScalar },
    NontrivialN2 { rho: ExactScalar },
    TrivialN2 { rho: ExactScalar },
    Hyperbolic { sign: i8 },
}

impl NormalFormBlock {
    /// Contribution to the dimension budget, in half-dimension units.
    pub fn half_dim(&self) -> u32 {
        match self {
            NormalFormBlock::N1 { .. }
            | NormalFormBlock::Rotation { .. }
            | NormalFormBlock::Hyperbolic { .. } => 1,
            NormalFormBlock::NontrivialN2 { .. } | NormalFormBlock::TrivialN2 { .. } => 2,
        }
    }

    /// Splitting numbers of this single block, listed per eigenvalue angle.
    ///
    /// Each entry is `(angle, (S_plus, S_minus))` with the angle normalized
    /// into `[0,1)`: `0` stands for eigenvalue 1 and `1/2` for -1. This
    /// table is the single source of truth; every consumer (splitting
    /// numbers at a point, the total negative splitting, the index jump
    /// identities) reads it from here, and the acceptance suite replays the
    /// double-iterate identity against it for every block type.
    pub fn splitting_pairs(&self) -> Vec<(ExactScalar, (u32, u32))> {
        let zero = ExactScalar::zero;
        let half = || ExactScalar::rational(1, 2);
        match self {
            NormalFormBlock::N1 { lambda: 1, b } => {
                if *b >= 0 {
                    vec![(zero(), (1, 1))]
                } else {
                    vec![(zero(), (0, 0))]
                }
            }
            NormalFormBlock::N1 { lambda: -1, b } => {
                if *b == 1 {
                    vec![(half(), (0, 0))]
                } else {
                    vec![(half(), (1, 1))]
                }
            }
            NormalFormBlock::N1 { lambda, b } => {
                unreachable!("unnormalized N1 block ({lambda},{b})")
            }
            NormalFormBlock::Rotation { rho } => {
                let refl = ExactScalar::one().checked_sub(rho).expect("rational 1");
                vec![(rho.clone(), (0, 1)), (refl, (1, 0))]
            }
            NormalFormBlock::NontrivialN2 { rho } => {
                let refl = ExactScalar::one().checked_sub(rho).expect("rational 1");
                vec![(rho.clone(), (1, 1)), (refl, (1, 1))]
            }
            NormalFormBlock::TrivialN2 { rho } => {
                let refl = ExactScalar::one().checked_sub(rho).expect("rational 1");
                vec![(rho.clone(), (0, 0)), (refl, (0, 0))]
            }
            NormalFormBlock::Hyperbolic { .. } => vec![],
        }
    }

    /// dim ker(block^m - I), by elementary 2x2 or 4x4 linear algebra.
    pub fn nullity_at(&self, m: i64) -> u32 {
        debug_assert!(m >= 1);
        match self {
            NormalFormBlock::N1 { lambda: 1, b: 0 } => 2,
            NormalFormBlock::N1 { lambda: 1, .. } => 1,
            NormalFormBlock::N1 { lambda: -1, b: 0 } => {
                if m % 2 == 0 {
                    2
                } else {
                    0
                }
            }
            NormalFormBlock::N1 { lambda: -1, .. } => {
                if m % 2 == 0 {
                    1
                } else {
                    0
                }
            }
            NormalFormBlock::N1 { lambda, b } => {
                unreachable!("unnormalized N1 block ({lambda},{b})")
            }
            NormalFormBlock::Rotation { rho }
            | NormalFormBlock::NontrivialN2 { rho }
            | NormalFormBlock::TrivialN2 { rho } => {
                if rho.varphi_mul(m) == 0 {
                    2
                } else {
                    0
                }
            }
            NormalFormBlock::Hyperbolic { .. } => 0,
        }
    }

}

/// A point on the unit circle, as the basic normal forms see it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnitEigenvalue {
    One,
    MinusOne,
    /// `exp(2*pi*i*rho)` with `rho` in `(0,1) \ {1/2}`.
    Phase(ExactScalar),
}

impl UnitEigenvalue {
    /// Classifies `exp(2*pi*i*rho)`. The angle must already be normalized
    /// into `[0,1)`; anything else is rejected rather than wrapped, so that
    /// a forgotten fractional-part reduction surfaces as an error.
    pub fn from_angle(rho: &ExactScalar) -> Result<Self, NormalFormError> {
        if rho.signum() < 0 || *rho >= ExactScalar::one() {
            return Err(NormalFormError::NotOnCircle(rho.clone()));
        }
        if rho.is_zero() {
            Ok(UnitEigenvalue::One)
        } else if *rho == ExactScalar::rational(1, 2) {
            Ok(UnitEigenvalue::MinusOne)
        } else {
            Ok(UnitEigenvalue::Phase(rho.clone()))
        }
    }

    fn angle(&self) -> ExactScalar {
        match self {
            UnitEigenvalue::One => ExactScalar::zero(),
            UnitEigenvalue::MinusOne => ExactScalar::rational(1, 2),
            UnitEigenvalue::Phase(rho) => rho.clone(),
        }
    }
}

impl fmt::Display for UnitEigenvalue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitEigenvalue::One => write!(f, "1"),
            UnitEigenvalue::MinusOne => write!(f, "-1"),
            UnitEigenvalue::Phase(rho) => write!(f, "exp(2*pi*i*({rho}))"),
        }
    }
}

/// The basic normal form decomposition of a linearized Poincaré map in
/// `Sp(2*half_dim)`.
///
/// Stored as the six eigenvalue-(+-1) block counts, the three angle lists,
/// and the hyperbolic signs. The dimension budget
///
/// ```text
/// p_minus + p_zero + p_plus + q_minus + q_zero + q_plus
///     + r + 2*r_star + 2*r_zero + h  =  half_dim
/// ```
///
/// is an invariant reported by [`NormalFormDecomposition::validate`], not
/// enforced by construction, so that loaders can surface every violation of
/// a malformed input at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalFormDecomposition {
    half_dim: u32,
    p_minus: u32,
    p_zero: u32,
    p_plus: u32,
    q_minus: u32,
    q_zero: u32,
    q_plus: u32,
    rotation_angles: Vec<ExactScalar>,
    nontrivial_n2_angles: Vec<ExactScalar>,
    trivial_n2_angles: Vec<ExactScalar>,
    hyperbolic_signs: Vec<i8>,
}

impl NormalFormDecomposition {
    /// Builds the decomposition from an explicit block list. Counts and
    /// angle lists are derived; block parameters outside the normalized
    /// ranges (`lambda` not +-1, `b` not in {-1,0,1}, `sign` not +-1) are
    /// rejected here because the count representation cannot carry them.
    pub fn from_blocks(
        half_dim: u32,
        blocks: &[NormalFormBlock],
    ) -> Result<Self, NormalFormError> {
        let mut d = NormalFormDecomposition {
            half_dim,
            p_minus: 0,
            p_zero: 0,
            p_plus: 0,
            q_minus: 0,
            q_zero: 0,
            q_plus: 0,
            rotation_angles: Vec::new(),
            nontrivial_n2_angles: Vec::new(),
            trivial_n2_angles: Vec::new(),
            hyperbolic_signs: Vec::new(),
        };
        for blk in blocks {
            match blk {
                NormalFormBlock::N1 { lambda, b } => {
                    if !matches!(lambda, 1 | -1) || !matches!(b, -1..=1) {
                        return Err(NormalFormError::BadBlock(format!(
                            "N1 block must have lambda in {{-1,1}} and b in {{-1,0,1}}, got ({lambda},{b})"
                        )));
                    }
                    let slot = match (lambda, b) {
                        (1, 1) => &mut d.p_minus,
                        (1, 0) => &mut d.p_zero,
                        (1, -1) => &mut d.p_plus,
                        (-1, 1) => &mut d.q_minus,
                        (-1, 0) => &mut d.q_zero,
                        _ => &mut d.q_plus,
                    };
                    *slot += 1;
                }
                NormalFormBlock::Rotation { rho } => d.rotation_angles.push(rho.clone()),
                NormalFormBlock::NontrivialN2 { rho } => {
                    d.nontrivial_n2_angles.push(rho.clone())
                }
                NormalFormBlock::TrivialN2 { rho } => d.trivial_n2_angles.push(rho.clone()),
                NormalFormBlock::Hyperbolic { sign } => {
                    if !matches!(sign, 1 | -1) {
                        return Err(NormalFormError::BadBlock(format!(
                            "hyperbolic block must have sign +-1, got {sign}"
                        )));
                    }
                    d.hyperbolic_signs.push(*sign);
                }
            }
        }
        Ok(d)
    }

    /// The block list in canonical order (eigenvalue-1 blocks, then -1,
    /// rotations, nontrivial N2, trivial N2, hyperbolic).
    pub fn blocks(&self) -> Vec<NormalFormBlock> {
        let n1 = |lambda: i8, b: i8| NormalFormBlock::N1 { lambda, b };
        let mut out = Vec::new();
        for (count, blk) in [
            (self.p_minus, n1(1, 1)),
            (self.p_zero, n1(1, 0)),
            (self.p_plus, n1(1, -1)),
            (self.q_minus, n1(-1, 1)),
            (self.q_zero, n1(-1, 0)),
            (self.q_plus, n1(-1, -1)),
        ] {
            out.extend(std::iter::repeat_n(blk, count as usize));
        }
        out.extend(
            self.rotation_angles
                .iter()
                .map(|rho| NormalFormBlock::Rotation { rho: rho.clone() }),
        );
        out.extend(
            self.nontrivial_n2_angles
                .iter()
                .map(|rho| NormalFormBlock::NontrivialN2 { rho: rho.clone() }),
        );
        out.extend(
            self.trivial_n2_angles
                .iter()
                .map(|rho| NormalFormBlock::TrivialN2 { rho: rho.clone() }),
        );
        out.extend(
            self.hyperbolic_signs
                .iter()
                .map(|sign| NormalFormBlock::Hyperbolic { sign: *sign }),
        );
        out
    }

    pub fn half_dim(&self) -> u32 {
        self.half_dim
    }
    pub fn p_minus(&self) -> u32 {
        self.p_minus
    }
    pub fn p_zero(&self) -> u32 {
        self.p_zero
    }
    pub fn p_plus(&self) -> u32 {
        self.p_plus
    }
    pub fn q_minus(&self) -> u32 {
        self.q_minus
    }
    pub fn q_zero(&self) -> u32 {
        self.q_zero
    }
    pub fn q_plus(&self) -> u32 {
        self.q_plus
    }
    /// r: number of rotation blocks.
    pub fn r(&self) -> u32 {
        self.rotation_angles.len() as u32
    }
    /// r*: number of nontrivial N2 blocks.
    pub fn r_star(&self) -> u32 {
        self.nontrivial_n2_angles.len() as u32
    }
    /// r0: number of trivial N2 blocks.
    pub fn r_zero(&self) -> u32 {
        self.trivial_n2_angles.len() as u32
    }
    /// h: number of hyperbolic blocks.
    pub fn h(&self) -> u32 {
        self.hyperbolic_signs.len() as u32
    }
    pub fn rotation_angles(&self) -> &[ExactScalar] {
        &self.rotation_angles
    }
    pub fn nontrivial_n2_angles(&self) -> &[ExactScalar] {
        &self.nontrivial_n2_angles
    }
    pub fn trivial_n2_angles(&self) -> &[ExactScalar] {
        &self.trivial_n2_angles
    }
    pub fn hyperbolic_signs(&self) -> &[i8] {
        &self.hyperbolic_signs
    }

    /// All angle-carrying blocks: rotations, then nontrivial N2, then
    /// trivial N2. The order matters only for stable reporting.
    pub fn all_angles(&self) -> impl Iterator<Item = &ExactScalar> {
        self.rotation_angles
            .iter()
            .chain(&self.nontrivial_n2_angles)
            .chain(&self.trivial_n2_angles)
    }

    /// Checks every structural invariant and reports all failures.
    pub fn validate(&self) -> Vec<String> {
        let mut violations = Vec::new();
        if self.half_dim == 0 {
            violations.push("half_dim must be positive".to_string());
        }
        let budget = self.p_minus
            + self.p_zero
            + self.p_plus
            + self.q_minus
            + self.q_zero
            + self.q_plus
            + self.r()
            + 2 * self.r_star()
            + 2 * self.r_zero()
            + self.h();
        if budget != self.half_dim {
            violations.push(format!(
                "dimension budget {budget} != {}",
                self.half_dim
            ));
        }
        let half = ExactScalar::rational(1, 2);
        for (kind, angles) in [
            ("rotation", &self.rotation_angles),
            ("nontrivial N2", &self.nontrivial_n2_angles),
            ("trivial N2", &self.trivial_n2_angles),
        ] {
            for rho in angles {
                if rho.signum() <= 0 || *rho >= ExactScalar::one() {
                    violations.push(format!("{kind} angle {rho} outside (0,1)"));
                } else if *rho == half {
                    violations.push(format!(
                        "{kind} angle 1/2 must be expressed as an eigenvalue -1 block"
                    ));
                }
            }
        }
        for sign in &self.hyperbolic_signs {
            if !matches!(sign, 1 | -1) {
                violations.push(format!("hyperbolic sign {sign} not +-1"));
            }
        }
        violations
    }

    /// Nullity of the m-th iterate: dim ker(M^m - I).
    pub fn nullity_at(&self, m: i64) -> u32 {
        assert!(m >= 1, "iterate count must be positive");
        let even = m % 2 == 0;
        let mut nu = self.p_minus + 2 * self.p_zero + self.p_plus;
        if even {
            nu += self.q_minus + 2 * self.q_zero + self.q_plus;
        }
        for rho in self.all_angles() {
            if rho.varphi_mul(m) == 0 {
                nu += 2;
            }
        }
        nu
    }

    /// Splitting numbers `(S_plus, S_minus)` of the decomposition at omega,
    /// summed blockwise. Zero off the spectrum by construction.
    pub fn splitting_numbers(&self, omega: &UnitEigenvalue) -> (u32, u32) {
        let target = omega.angle();
        let mut sp = 0;
        let mut sm = 0;
        for blk in self.blocks() {
            for (angle, (p, m)) in blk.splitting_pairs() {
                if angle == target {
                    sp += p;
                    sm += m;
                }
            }
        }
        (sp, sm)
    }

    /// `C(M)`: the sum of `S_minus` over all eigenvalue angles in `(0,1)`,
    /// i.e. every unit-circle eigenvalue except 1 itself.
    pub fn total_negative_splitting(&self) -> u32 {
        let mut total = 0;
        for blk in self.blocks() {
            for (angle, (_, sm)) in blk.splitting_pairs() {
                if !angle.is_zero() {
                    total += sm;
                }
            }
        }
        total
    }

    /// Ellipticity class. `Elliptic` here means a purely rotational
    /// spectrum; decompositions with eigenvalue +-1 blocks or N2 structure
    /// count as `Mixed` even though their spectrum stays on the circle.
    pub fn classify(&self) -> EllipticityClass {
        let n1 = self.p_minus
            + self.p_zero
            + self.p_plus
            + self.q_minus
            + self.q_zero
            + self.q_plus;
        let n2 = self.r_star() + self.r_zero();
        if self.h() > 0 && n1 == 0 && n2 == 0 && self.r() == 0 {
            return EllipticityClass::Hyperbolic;
        }
        if self.r() > 0 && n1 == 0 && n2 == 0 && self.h() == 0 {
            return if self.rotation_angles.iter().all(|rho| !rho.is_rational()) {
                EllipticityClass::IrrationallyElliptic
            } else {
                EllipticityClass::Elliptic
            };
        }
        EllipticityClass::Mixed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipticityClass {
    Hyperbolic,
    Elliptic,
    IrrationallyElliptic,
    Mixed,
}

impl fmt::Display for EllipticityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EllipticityClass::Hyperbolic => "hyperbolic",
            EllipticityClass::Elliptic => "elliptic",
            EllipticityClass::IrrationallyElliptic => "irrationally elliptic",
            EllipticityClass::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

mod serde_impl {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Repr {
        half_dim: u32,
        blocks: Vec<NormalFormBlock>,
    }

    impl Serialize for NormalFormDecomposition {
        fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            Repr { half_dim: self.half_dim(), blocks: self.blocks() }.serialize(s)
        }
    }

    impl<'de> Deserialize<'de> for NormalFormDecomposition {
        fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            let repr = Repr::deserialize(d)?;
            NormalFormDecomposition::from_blocks(repr.half_dim, &repr.blocks)
                .map_err(serde::de::Error::custom)
        }
    }
}
