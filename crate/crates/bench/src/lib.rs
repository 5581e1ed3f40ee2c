//! Shared inputs for the kernel benchmarks.

use hyprest::{builtin_family, Amplitude, Complex64, PhaseFunction};

pub fn saddle() -> PhaseFunction {
    builtin_family("saddle", &[]).expect("saddle is always valid")
}

pub fn quartic() -> PhaseFunction {
    builtin_family("mixed-quartic", &[1e-6]).expect("default quartic parameters are valid")
}

/// 1 + 0.3x + 0.5iy on Σ.
pub fn smooth_density() -> Amplitude {
    Amplitude::from_fn(|z| Complex64::new(1.0 + 0.3 * z[0], 0.5 * z[1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(saddle().label(), "saddle");
        assert!(!smooth_density().is_zero());
        assert!(quartic().value([0.5, 0.5]) > 0.0);
    }
}
