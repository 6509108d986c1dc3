//! Single-well cell interaction potential with a logarithmic barrier at full
//! saturation, and its convex/concave split
//!
//! ```text
//! psi(phi)  = -(1-phi_bar) ln(1-phi) - phi^3/3 - (1-phi_bar)(phi^2/2 + phi)
//! psi1(phi) = -(1-phi_bar) ln(1-phi)                       (convex)
//! psi2(phi) = -[phi^3/3 + (1-phi_bar) phi^2/2 + (1-phi_bar) phi]   (concave on [0,1])
//! ```

use super::ModelError;
use crate::scalar::Real;

fn check_domain<T: Real>(phi: T) -> Result<(), ModelError> {
    if !(phi < T::one()) {
        return Err(ModelError::Domain(format!(
            "potential barrier: fraction {phi} must be < 1"
        )));
    }
    Ok(())
}

pub fn psi<T: Real>(phi: T, phi_bar: T) -> Result<T, ModelError> {
    check_domain(phi)?;
    if phi < T::zero() {
        return Err(ModelError::Domain(format!("fraction {phi} must be >= 0")));
    }
    Ok(psi1(phi, phi_bar)? + psi2(phi, phi_bar))
}

pub fn psi1<T: Real>(phi: T, phi_bar: T) -> Result<T, ModelError> {
    check_domain(phi)?;
    Ok(-(T::one() - phi_bar) * (-phi).ln_1p())
}

pub fn psi2<T: Real>(phi: T, phi_bar: T) -> T {
    let a = T::one() - phi_bar;
    -(phi * phi * phi / T::lit(3.0) + a * phi * phi / T::lit(2.0) + a * phi)
}

/// Derivative of the full potential; vanishes at `phi_bar` and at 0.
pub fn psi_prime<T: Real>(phi: T, phi_bar: T) -> Result<T, ModelError> {
    check_domain(phi)?;
    if phi < T::zero() {
        return Err(ModelError::Domain(format!("fraction {phi} must be >= 0")));
    }
    let a = T::one() - phi_bar;
    Ok(a / (T::one() - phi) - phi * phi - a * phi - a)
}

/// Convex part `(1-phi_bar)/(1-phi)`, evaluated implicitly by the scheme.
pub fn psi1_prime<T: Real>(phi: T, phi_bar: T) -> Result<T, ModelError> {
    check_domain(phi)?;
    Ok((T::one() - phi_bar) / (T::one() - phi))
}

pub fn psi1_second<T: Real>(phi: T, phi_bar: T) -> Result<T, ModelError> {
    check_domain(phi)?;
    let d = T::one() - phi;
    Ok((T::one() - phi_bar) / (d * d))
}

/// Concave part `-[phi^2 + (1-phi_bar) phi + (1-phi_bar)]`, evaluated explicitly.
pub fn psi2_prime<T: Real>(phi: T, phi_bar: T) -> T {
    let a = T::one() - phi_bar;
    -(phi * phi + a * phi + a)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PB: f64 = 0.389;

    #[test]
    fn derivative_values() {
        assert!(psi_prime(PB, PB).unwrap().abs() < 1e-12);
        assert!(psi_prime(0.0, PB).unwrap().abs() < 1e-15);
        // 0.611/0.5 - 0.25 - 0.611*0.5 - 0.611
        assert!((psi_prime(0.5, PB).unwrap() - 0.0555).abs() < 1e-12);
        assert!((psi1_prime(0.0, PB).unwrap() - 0.611).abs() < 1e-15);
        assert_eq!(psi1_prime(PB, PB).unwrap(), 1.0);
        assert!((psi2_prime(1.0, PB) + 2.222).abs() < 1e-12);
    }

    #[test]
    fn barrier_domain_errors() {
        assert!(psi_prime(1.0, PB).is_err());
        assert!(psi_prime(-0.1, PB).is_err());
        assert!(psi1_prime(1.2, PB).is_err());
        assert!(psi(1.0, PB).is_err());
    }

    #[test]
    fn potential_vanishes_at_zero_and_matches_derivative() {
        assert_eq!(psi(0.0, PB).unwrap(), 0.0);
        // central difference oracle
        for &x in &[0.1, 0.389, 0.6, 0.9] {
            let h = 1e-6;
            let fd = (psi(x + h, PB).unwrap() - psi(x - h, PB).unwrap()) / (2.0 * h);
            assert!((fd - psi_prime(x, PB).unwrap()).abs() < 1e-7);
            let fd2 = (psi1_prime(x + h, PB).unwrap() - psi1_prime(x - h, PB).unwrap()) / (2.0 * h);
            assert!((fd2 - psi1_second(x, PB).unwrap()).abs() < 1e-5 * fd2.abs().max(1.0));
        }
    }

    #[test]
    fn works_in_single_precision() {
        let v = psi_prime(0.389f32, 0.389f32).unwrap();
        assert!(v.abs() < 1e-5);
    }
}
