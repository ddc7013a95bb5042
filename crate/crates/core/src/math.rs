//! Small combinatorial helpers shared by the Fock-basis formulas.

use std::f64::consts::PI;

use num_complex::Complex64;

/// n! as f64 (exact up to 22!, finite up to 170!).
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// e^{iφ} with exact values at multiples of π/2, so that cat-state parity
/// cancellations are exact.
pub fn unit_phase(phi: f64) -> Complex64 {
    let quarter = phi / (PI / 2.0);
    if quarter == quarter.round() {
        return match (quarter.round() as i64).rem_euclid(4) {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, phi)
}
