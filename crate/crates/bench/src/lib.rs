//! Fixtures shared by the criterion benches.

use hardstab_core::{Complex64, HardFamilyParams, Polynomial};

/// The experiments' default family member.
pub fn params(n: usize) -> HardFamilyParams {
    HardFamilyParams::new(n, 3.2, 1.01, 0.0).expect("valid defaults")
}

/// Deadbeat pole set.
pub fn zero_poles(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); n]
}

/// `prod (z - k / (n + 1))` for `k = 1..=n`: well separated real roots.
pub fn spread_polynomial(n: usize) -> Polynomial {
    let roots: Vec<Complex64> = (1..=n).map(|k| Complex64::new(k as f64 / (n + 1) as f64, 0.0)).collect();
    Polynomial::from_roots(&roots).expect("finite roots")
}
