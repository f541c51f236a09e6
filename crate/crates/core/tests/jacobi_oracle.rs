//! Numerical lock on the closed-form Katok angles.
//!
//! The transverse linearized flow around the i-th weighted circle splits
//! into complex planes, one per other weight. In the plane of weight w_j
//! the dynamics over one closed orbit of parameter length T = 2*pi*u is
//!
//! ```text
//! y' = A y,   A = [[i*a, 1], [-1, i*a]],   a = w_j * alpha,
//! ```
//!
//! the round-sphere Jacobi rotation superposed with the frame rotation of
//! the perturbing isometry. Its eigensolutions spiral with total angles
//! of magnitude (1 +- a)*T, which the closed-form generator turns into
//! the rotation numbers {(1 +- w_j*alpha)*u} and the mean index 4n*u.
//! Here the system is integrated blindly with RK4, the winding is
//! measured by continuous phase tracking, and the measured magnitudes
//! must agree with the exact expressions to 1e-6.
//!
//! The integrator pins each elliptic angle as an unordered pair
//! {rho, 1 - rho} plus the mean index; which member of the pair enters
//! the normal form is an orientation choice that no single-plane
//! integration can see. That bit is certified independently by the
//! convention-free homological checks in the katok and loop_homology
//! suites: the resonance identity and the degreewise Morse audit both
//! fail if any plane's angle is replaced by its reflection. Together the
//! two locks leave the closed form no freedom.

use geodex_core::exact_scalar::ExactScalar;
use geodex_core::katok::{closed_form_angles, KatokParameters};
use geodex_core::iteration::GeodesicModel;
use geodex_core::normal_form::{NormalFormBlock, NormalFormDecomposition};
use num_complex::Complex64;
use std::f64::consts::PI;

fn scalar(s: &str) -> ExactScalar {
    s.parse().unwrap()
}

fn apply(a: f64, y: [Complex64; 2]) -> [Complex64; 2] {
    let ia = Complex64::new(0.0, a);
    [ia * y[0] + y[1], -y[0] + ia * y[1]]
}

/// Integrates y' = A y and returns the continuously unwound phase change
/// of the first component.
fn winding(a: f64, t_end: f64, steps: usize, v0: [Complex64; 2]) -> f64 {
    let h = t_end / steps as f64;
    let mut y = v0;
    let mut phase = 0.0;
    let mut last_arg = y[0].arg();
    for _ in 0..steps {
        let k1 = apply(a, y);
        let k2 = apply(a, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = apply(a, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = apply(a, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        y = [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        let arg = y[0].arg();
        let mut delta = arg - last_arg;
        // steps are far shorter than half a turn; unwrap the branch cut
        if delta > PI {
            delta -= 2.0 * PI;
        } else if delta < -PI {
            delta += 2.0 * PI;
        }
        phase += delta;
        last_arg = arg;
    }
    phase
}

const STEPS: usize = 20_000;
const TOL: f64 = 1e-6;

/// Runs the oracle against one parameter set: every rotation number and
/// every mean index of the closed form must match the integrated flow.
fn check_parameters(params: &KatokParameters) {
    let n = params.n;
    let alpha = params.alpha.to_f64();
    let product: u64 = params.weights.iter().product();
    let derived: Vec<u64> = params.weights.iter().map(|&p| product / p).collect();
    let data = closed_form_angles(params).unwrap();

    for (i, &w_i) in derived.iter().enumerate() {
        for (which, eps) in [(0usize, 1.0f64), (1, -1.0)] {
            let geo = &data[2 * i + which];
            let u = 1.0 / (1.0 + eps * w_i as f64 * alpha);
            let t_end = 2.0 * PI * u;
            let mut ihat_measured = 0.0;
            let mut angle_idx = 0;
            for (j, &w_j) in derived.iter().enumerate() {
                if j == i {
                    continue;
                }
                let a = w_j as f64 * alpha;
                for (sign, v0) in [
                    (1.0, [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]),
                    (-1.0, [Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)]),
                ] {
                    let theta = winding(a, t_end, STEPS, v0).abs();
                    let expected = (1.0 + sign * a) * t_end;
                    assert!(
                        (theta - expected).abs() < TOL,
                        "{}: winding magnitude {theta} vs closed form {expected}",
                        geo.label
                    );
                    let rho_measured = (theta / (2.0 * PI)).rem_euclid(1.0);
                    let rho_exact = geo.angles[angle_idx].to_f64();
                    assert!(
                        (rho_measured - rho_exact).abs() < TOL,
                        "{}: rotation number {rho_measured} vs exact {rho_exact}",
                        geo.label
                    );
                    ihat_measured += theta / PI;
                    angle_idx += 1;
                }
            }
            let blocks: Vec<NormalFormBlock> = geo
                .angles
                .iter()
                .map(|rho| NormalFormBlock::Rotation { rho: rho.clone() })
                .collect();
            let decomp = NormalFormDecomposition::from_blocks(2 * n, &blocks).unwrap();
            let model = GeodesicModel::new(&geo.label, geo.initial_index, decomp);
            let ihat_exact = model.mean_index().unwrap().to_f64();
            assert!(
                (ihat_measured - ihat_exact).abs() < TOL,
                "{}: mean index {ihat_measured} vs exact {ihat_exact}",
                geo.label
            );
        }
    }
}

#[test]
fn s3_closed_form_locked_by_integrator() {
    check_parameters(&KatokParameters::new(1, scalar("1/4*sqrt(2)"), vec![1, 2]));
}

#[test]
fn s5_closed_form_locked_by_integrator() {
    check_parameters(&KatokParameters::new(2, scalar("1/12*sqrt(2)"), vec![1, 2, 3]));
}

#[test]
fn mean_index_approaches_round_metric_as_alpha_shrinks() {
    // alpha -> 0 the flow degenerates to the round sphere, where every
    // transverse plane winds exactly once: i-hat -> 4n
    let mut last_gap = f64::INFINITY;
    for t in 0..4 {
        let alpha = ExactScalar::quadratic_i64(0, 1, 1, 8 << t, 2).unwrap();
        let a = alpha.to_f64();
        let u = 1.0 / (1.0 + 2.0 * a);
        let t_end = 2.0 * PI * u;
        let mut ihat = 0.0;
        for (sign, v0) in [
            (1.0, [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]),
            (-1.0, [Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)]),
        ] {
            let _ = sign;
            ihat += winding(a, t_end, STEPS, v0).abs() / PI;
        }
        let gap = (ihat - 4.0).abs();
        assert!(gap < last_gap, "gap {gap} did not shrink from {last_gap}");
        last_gap = gap;
    }
    assert!(last_gap < 0.2);
}
