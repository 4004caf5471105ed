//! Noise-free steady states of a driven Kerr resonator and switching-energy
//! estimates.
//!
//! A resonator driven through a port of rate `κ₁` with amplitude `β` settles
//! on photon numbers `n` solving
//!
//! ```text
//! κ₁|β|² = n [(κ/2)² + (Δ + 2χn)²]
//! ```
//!
//! which has three real solutions in a window of drive strengths when the
//! response is bistable.

use crate::C64;

/// Steady-state photon numbers for a drive `beta` entering through a port of
/// rate `input_rate`, in increasing order. One or three values (two when a
/// pair is degenerate).
pub fn classical_response(detuning: f64, kerr: f64, decay: f64, input_rate: f64, beta: C64) -> Vec<f64> {
    let p = input_rate * beta.norm_sqr();
    let c1 = 0.25 * decay * decay + detuning * detuning;
    if kerr == 0.0 {
        return vec![p / c1];
    }
    let a3 = 4.0 * kerr * kerr;
    let a2 = 4.0 * kerr * detuning;
    let f = |n: f64| ((a3 * n + a2) * n + c1) * n - p;
    let df = |n: f64| (3.0 * a3 * n + 2.0 * a2) * n + c1;
    let mut roots = cubic_real_roots(a2 / a3, c1 / a3, -p / a3);
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let d = df(*r);
            if d == 0.0 {
                break;
            }
            *r -= f(*r) / d;
        }
    }
    roots.retain(|&n| n >= -1e-12 * p.max(1.0));
    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    roots
}

/// Real roots of `x³ + b x² + c x + d`.
fn cubic_real_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let s = disc.sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        vec![u + v - shift]
    } else if p == 0.0 {
        vec![-shift]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift)
            .collect()
    }
}

/// Smallest detuning magnitude at which the response becomes bistable.
pub fn bistability_threshold(decay: f64) -> f64 {
    0.75f64.sqrt() * decay
}

/// Whether some drive strength gives three steady states: the detuning
/// must have the opposite sign to the Kerr coefficient and exceed
/// `(√3/2) κ` in magnitude.
pub fn is_bistable(detuning: f64, kerr: f64, decay: f64) -> bool {
    kerr * detuning < 0.0 && detuning.abs() > bistability_threshold(decay)
}

/// Photon number at the inflection point of the drive-response curve,
/// `-Δ/(3χ)`.
pub fn inflection_photon_number(detuning: f64, kerr: f64) -> f64 {
    -detuning / (3.0 * kerr)
}

/// Order-of-magnitude switching energy `κ²/(|χ| κ₁)` in photons.
pub fn switching_energy(decay: f64, input_rate: f64, kerr: f64) -> f64 {
    decay * decay / (kerr.abs() * input_rate)
}

/// Input rate minimising the switching energy when the total decay is two
/// equal ports plus `intrinsic_loss`: `κ₁ = κ₃/2`, so `κ = 4κ₁`.
pub fn optimal_input_rate(intrinsic_loss: f64) -> f64 {
    intrinsic_loss / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn residual(d: f64, chi: f64, k: f64, k1: f64, b: f64, n: f64) -> f64 {
        k1 * b * b - n * ((k / 2.0).powi(2) + (d + 2.0 * chi * n).powi(2))
    }

    /// Sign changes of the balance equation on a fine grid.
    fn count_by_scan(d: f64, chi: f64, k: f64, k1: f64, b: f64) -> usize {
        let n_max = 4.0 * (d.abs() / chi.abs() + k1 * b * b / (k * k / 4.0) + 1.0);
        let steps = 200_000;
        let mut count = 0;
        let mut prev = residual(d, chi, k, k1, b, 0.0);
        for i in 1..=steps {
            let n = n_max * i as f64 / steps as f64;
            let r = residual(d, chi, k, k1, b, n);
            if r.signum() != prev.signum() {
                count += 1;
            }
            prev = r;
        }
        count
    }

    #[test]
    fn amplifier_stage_is_bistable() {
        // κ = 50, Δ = 50 > 43.3
        assert!(is_bistable(50.0, -0.5, 50.0));
        assert!(!is_bistable(40.0, -0.5, 50.0));
        assert!(!is_bistable(50.0, 0.5, 50.0));
        let roots = classical_response(50.0, -0.5, 50.0, 25.0, C64::new(31.0, 0.0));
        assert_eq!(roots.len(), count_by_scan(50.0, -0.5, 50.0, 25.0, 31.0));
    }

    #[test]
    fn inflection_and_energy() {
        assert!((inflection_photon_number(50.0, -0.5) - 100.0 / 3.0).abs() < 1e-12);
        assert!((switching_energy(50.0, 20.0, -0.2) - 625.0).abs() < 1e-9);
        assert_eq!(optimal_input_rate(10.0), 5.0);
    }

    #[test]
    fn optimal_coupling_minimises_energy() {
        // golden-section search over κ₁ with κ = 2κ₁ + κ₃
        let k3 = 10.0;
        let u = |k1: f64| switching_energy(2.0 * k1 + k3, k1, -1.0);
        let (mut a, mut b) = (0.01, 100.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if u(c) < u(d) {
                b = d;
            } else {
                a = c;
            }
        }
        assert!((0.5 * (a + b) - optimal_input_rate(k3)).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn roots_satisfy_balance(d in 1.0f64..100.0, chi in -2.0f64..-0.01, k in 1.0f64..100.0, b in 0.0f64..50.0) {
            let k1 = k / 2.0;
            let roots = classical_response(d, chi, k, k1, C64::new(b, 0.0));
            prop_assert!(!roots.is_empty());
            for &n in &roots {
                let scale = k1 * b * b + n * ((k / 2.0).powi(2) + d * d) + 1.0;
                prop_assert!(residual(d, chi, k, k1, b, n).abs() < 1e-7 * scale);
            }
            if !is_bistable(d, chi, k) {
                prop_assert_eq!(roots.len(), 1);
            }
        }

        #[test]
        fn three_roots_only_when_bistable(d in 1.0f64..100.0, chi in -2.0f64..-0.01, k in 1.0f64..100.0, b in 0.0f64..50.0) {
            let roots = classical_response(d, chi, k, k / 2.0, C64::new(b, 0.0));
            if roots.len() == 3 {
                prop_assert!(is_bistable(d, chi, k));
            }
        }
    }
}
