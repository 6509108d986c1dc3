//! Degenerate mobilities, the regularised Heaviside ramp and the five source
//! terms of the nondimensional model.

use super::{ModelError, ModelParams};
use crate::scalar::Real;

#[inline]
fn pos<T: Real>(x: T) -> T {
    x.max(T::zero())
}

/// `phi_self (1 - phi_T)^2 / (1 + phi_a)^2`, the mobility without the friction.
#[inline]
pub fn mobility_factor<T: Real>(phi_self: T, phi_t: T, phi_a: T) -> T {
    phi_self * velocity_factor(phi_t, phi_a)
}

/// `(1 - phi_T)^2 / (1 + phi_a)^2`.
#[inline]
pub fn velocity_factor<T: Real>(phi_t: T, phi_a: T) -> T {
    let s = T::one() - phi_t;
    let a = T::one() + phi_a;
    (s * s) / (a * a)
}

/// Degenerate Cahn-Hilliard mobility `phi_self (1-phi_T)^2 / (L (1+phi_a)^2)`.
pub fn mobility<T: Real>(phi_self: T, phi_t: T, phi_a: T, friction: T) -> T {
    mobility_factor(phi_self, phi_t, phi_a) / friction
}

/// C1 cubic ramp `3u^2 - 2u^3`, `u = s / width`, clamped to `[0, 1]`.
pub fn heaviside_reg<T: Real>(s: T, width: T) -> T {
    if s <= T::zero() {
        return T::zero();
    }
    if s >= width {
        return T::one();
    }
    let u = s / width;
    u * u * (T::lit(3.0) - T::lit(2.0) * u)
}

/// Viable growth: proliferation above the hypoxia threshold, necrosis below,
/// clearance and therapy.
pub fn source_viable<T: Real>(phi_v: T, phi_d: T, phi_a: T, n: T, k_t1: T, p: &ModelParams<T>) -> T {
    p.nu * phi_v * pos(n - p.delta_n) * (T::one() - phi_v - phi_d - phi_a)
        - p.nu_d * phi_v * pos(p.delta_n - n)
        - (p.k1 + k_t1) * phi_v
}

pub fn source_necrotic<T: Real>(phi_v: T, phi_d: T, n: T, k_t2: T, p: &ModelParams<T>) -> T {
    p.k1 * phi_v + p.nu_d * phi_v * pos(p.delta_n - n) - (p.k2 + k_t2) * phi_d
}

/// New vessel formation outside the tumor; `irc` switches off the supply from
/// normal vasculature inside a resection cavity.
pub fn source_angio<T: Real>(phi_v: T, phi_d: T, phi_a: T, c: T, irc: T, p: &ModelParams<T>) -> T {
    let outside = T::one() - heaviside_reg(phi_v + phi_d, p.hr_width);
    outside
        * (irc * p.v_a * (T::one() - phi_v - phi_d - phi_a) * pos(c - p.delta_c) - p.k3 * phi_a)
}

/// Linearisation of the nutrient source `S_n = supply - reaction * n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutrientKinetics<T> {
    pub supply: T,
    pub reaction: T,
}

pub fn nutrient_kinetics<T: Real>(phi_v: T, phi_d: T, phi_a: T, irc: T, p: &ModelParams<T>) -> NutrientKinetics<T> {
    let phi_t = phi_v + phi_d;
    let h = heaviside_reg(phi_t, p.hr_width);
    let vessel = p.v_n * irc * (T::one() - h) + p.v_t * irc * h * (T::one() - phi_t) + p.v_an * phi_a;
    NutrientKinetics {
        supply: vessel,
        reaction: vessel + p.delta_v * phi_v,
    }
}

pub fn source_nutrient<T: Real>(phi_v: T, phi_d: T, phi_a: T, n: T, irc: T, p: &ModelParams<T>) -> T {
    let k = nutrient_kinetics(phi_v, phi_d, phi_a, irc, p);
    k.supply - k.reaction * n
}

pub fn source_taf<T: Real>(phi_v: T, phi_a: T, n: T, c: T, p: &ModelParams<T>) -> T {
    p.v_c * phi_v * pos(p.delta_n - n) * (T::one() - c) - p.delta_a * phi_a * c
}

/// Uniform viable fraction balancing nutrient supply and consumption at
/// `n = delta_n` inside the tumor (`H_r = 1`, no necrotic or vessel phase).
pub fn uniform_steady_state<T: Real>(p: &ModelParams<T>) -> Result<T, ModelError> {
    let supply = p.v_t * (T::one() - p.delta_n);
    let denom = supply + p.delta_v * p.delta_n;
    if denom == T::zero() || !denom.is_finite() {
        return Err(ModelError::Parameter("steady state undefined: zero denominator".into()));
    }
    Ok(supply / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams<f64> {
        ModelParams::default()
    }

    #[test]
    fn mobility_values() {
        assert_eq!(mobility(0.0, 0.7, 0.2, 3900.0), 0.0);
        assert_eq!(mobility(0.3, 1.0, 0.0, 3900.0), 0.0);
        assert!((mobility(0.5f64, 0.5, 0.0, 3900.0) - 3.2051e-5).abs() < 1e-9);
    }

    #[test]
    fn heaviside_values() {
        let w = 0.1f64;
        assert_eq!(heaviside_reg(0.0, w), 0.0);
        assert_eq!(heaviside_reg(w, w), 1.0);
        assert!((heaviside_reg(w / 2.0, w) - 0.5).abs() < 1e-15);
        assert_eq!(heaviside_reg(-3.0, w), 0.0);
    }

    #[test]
    fn viable_source_values() {
        let mut p = params();
        assert_eq!(source_viable(0.0, 0.2, 0.1, 0.8, 0.3, &p), 0.0);
        p.k1 = 0.0;
        assert_eq!(source_viable(0.4, 0.2, 0.1, p.delta_n, 0.0, &p), 0.0);
        // 0.15 * 0.6 * 0.67 * 0.4
        assert!((source_viable(0.6, 0.0, 0.0, 1.0, 0.0, &p) - 0.02412).abs() < 1e-12);
    }

    #[test]
    fn necrotic_source_values() {
        let p = params();
        assert_eq!(source_necrotic(0.0, 0.0, 0.5, 0.0, &p), 0.0);
        assert!((source_necrotic(0.6, 0.0, 0.0, 0.0, &p) - 0.01188).abs() < 1e-12);
        assert!((source_necrotic(0.0, 0.2, 1.0, 0.1, &p) + 0.02).abs() < 1e-15);
    }

    #[test]
    fn angio_source_values() {
        let p = params();
        assert_eq!(source_angio(0.0, 0.0, 0.0, 0.1, 1.0, &p), 0.0);
        assert_eq!(source_angio(0.05, 0.05, 0.3, 1.0, 1.0, &p), 0.0);
        assert!((source_angio(0.0, 0.0, 0.0, 1.0, 1.0, &p) - 3.84).abs() < 1e-12);
        assert_eq!(source_angio(0.0, 0.0, 0.0, 1.0, 0.0, &p), 0.0);
    }

    #[test]
    fn nutrient_source_values() {
        let mut p = params();
        assert_eq!(source_nutrient(0.0, 0.0, 0.0, 0.0, 1.0, &p), 1.0e4);
        assert_eq!(source_nutrient(0.0, 0.3, 0.2, 1.0, 1.0, &p), 0.0);
        p.set_tumor_supply(5000.0);
        let s = source_nutrient(0.54, 0.0, 0.0, 0.33, 1.0, &p);
        assert!((s - (5000.0 * 0.46 * 0.67 - 8640.0 * 0.54 * 0.33)).abs() < 1e-9);
        assert!((s - 1.4).abs() < 0.1);
    }

    #[test]
    fn taf_source_values() {
        let p = params();
        assert_eq!(source_taf(0.5, 0.0, 0.4, 0.0, &p), 0.0);
        assert!((source_taf(1.0, 0.0, 0.0, 0.0, &p) - 330.0).abs() < 1e-9);
        assert!((source_taf(0.0, 0.1, 1.0, 1.0, &p) + 86.4).abs() < 1e-9);
    }

    #[test]
    fn steady_states() {
        let p1 = ModelParams::<f64>::case1();
        let p2 = ModelParams::<f64>::case2();
        assert!((uniform_steady_state(&p1).unwrap() - 0.540).abs() < 0.005);
        assert!((uniform_steady_state(&p2).unwrap() - 0.190).abs() < 0.005);
        let mut p = p1.clone();
        p.delta_n = 1e-12;
        assert!((uniform_steady_state(&p).unwrap() - 1.0).abs() < 1e-9);
        let mut p = p1;
        p.v_t = 0.0;
        p.delta_v = 0.0;
        assert!(uniform_steady_state(&p).is_err());
    }
}
