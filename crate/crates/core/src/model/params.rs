use super::ModelError;
use crate::mesh::Tissue;
use crate::scalar::Real;

/// Physical and numerical constants of the nondimensional tumor/angiogenesis
/// model. Units: lengths in mm, times in days, pressures in Pa.
///
/// `Default` is the brain-tissue parameter set with low nutrient supply inside
/// the tumor (`V_T = V_n / 10`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// Tissue stiffness scale (Pa).
    pub pi: T,
    /// Interface thickness (mm).
    pub eps: T,
    /// Equilibrium tumor cell fraction, where the potential has its well.
    pub phi_bar: T,
    /// Viable phase friction (Pa day / mm^2).
    pub l_v: T,
    /// Necrotic phase friction (Pa day / mm^2).
    pub l_d: T,
    /// Endothelial mobility `1 / L_a`.
    pub l_a_inv: T,
    /// Viable-cell chemotaxis towards nutrient, before the tissue factor.
    pub h_v_base: T,
    /// Endothelial chemotaxis towards TAF.
    pub h_a: T,
    /// Nutrient diffusion multiplier of `D`.
    pub b_n: T,
    /// TAF diffusion multiplier of `D`.
    pub b_c: T,
    /// Nutrient release rate from viable cells, before the tissue factor.
    pub l_nv_base: T,
    pub l_ca: T,
    /// Proliferation rate.
    pub nu: T,
    /// Necrosis rate.
    pub nu_d: T,
    /// Hypoxia threshold.
    pub delta_n: T,
    pub k1: T,
    pub k2: T,
    pub k3: T,
    pub v_n: T,
    pub v_t: T,
    pub v_an: T,
    pub v_a: T,
    pub v_c: T,
    pub delta_v: T,
    pub delta_a: T,
    /// TAF threshold for vessel proliferation.
    pub delta_c: T,
    /// Average blood volume fraction of healthy tissue.
    pub phi_bar_a: T,
    /// Width of the regularised Heaviside ramp.
    pub hr_width: T,
    /// White-matter multiplier of `h_v` and `l_nv`.
    pub wm_factor: T,
}

impl<T: Real> Default for ModelParams<T> {
    fn default() -> Self {
        Self::case2()
    }
}

impl<T: Real> ModelParams<T> {
    /// Parameter set with nutrient supply inside the tumor `V_T = V_n / 2`.
    pub fn case1() -> Self {
        Self::with_tumor_supply(T::lit(5000.0))
    }

    /// Parameter set with nutrient supply inside the tumor `V_T = V_n / 10`.
    pub fn case2() -> Self {
        Self::with_tumor_supply(T::lit(1000.0))
    }

    fn with_tumor_supply(v_t: T) -> Self {
        let l = T::lit;
        let phi_bar_a = l(0.04);
        Self {
            pi: l(694.0),
            eps: l(0.013),
            phi_bar: l(0.389),
            l_v: l(3900.0),
            l_d: l(3900.0),
            l_a_inv: l(0.003),
            h_v_base: l(0.14),
            h_a: l(0.2264),
            b_n: l(1.0),
            b_c: l(0.589),
            l_nv_base: l(111.42),
            l_ca: l(0.73),
            nu: l(0.15),
            nu_d: l(0.06),
            delta_n: l(0.33),
            k1: T::zero(),
            k2: T::zero(),
            k3: l(0.24),
            v_n: l(1.0e4),
            v_t,
            v_an: v_t / phi_bar_a,
            v_a: l(4.8),
            v_c: l(1.0e3),
            delta_v: l(8640.0),
            delta_a: l(864.0),
            delta_c: l(0.2),
            phi_bar_a,
            hr_width: l(0.1),
            wm_factor: l(4.0),
        }
    }

    /// Sets `V_T` and recomputes `V_an = V_T / phi_bar_a`.
    pub fn set_tumor_supply(&mut self, v_t: T) {
        self.v_t = v_t;
        self.v_an = v_t / self.phi_bar_a;
    }

    /// Copy with every tumor/vessel source and both chemotactic drifts off.
    /// Nutrient and TAF kinetics are untouched.
    pub fn without_sources_and_chemotaxis(&self) -> Self {
        Self {
            nu: T::zero(),
            nu_d: T::zero(),
            k1: T::zero(),
            k2: T::zero(),
            k3: T::zero(),
            v_a: T::zero(),
            h_v_base: T::zero(),
            h_a: T::zero(),
            ..self.clone()
        }
    }

    fn tissue_factor(&self, tissue: Tissue) -> T {
        match tissue {
            Tissue::Wm => self.wm_factor,
            Tissue::Csf | Tissue::Gm => T::one(),
        }
    }

    pub fn h_v(&self, tissue: Tissue) -> T {
        self.h_v_base * self.tissue_factor(tissue)
    }

    pub fn l_nv(&self, tissue: Tissue) -> T {
        self.l_nv_base * self.tissue_factor(tissue)
    }

    /// Time scale of spinodal decomposition, `100 L_v eps^2 / Pi`.
    pub fn base_time_step(&self) -> T {
        T::lit(100.0) * self.l_v * self.eps * self.eps / self.pi
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let nonneg = [
            ("Pi", self.pi),
            ("eps", self.eps),
            ("L_v", self.l_v),
            ("L_d", self.l_d),
            ("L_a_inv", self.l_a_inv),
            ("h_v_base", self.h_v_base),
            ("h_a", self.h_a),
            ("b_n", self.b_n),
            ("b_c", self.b_c),
            ("l_nv_base", self.l_nv_base),
            ("l_ca", self.l_ca),
            ("nu", self.nu),
            ("nu_d", self.nu_d),
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("V_n", self.v_n),
            ("V_T", self.v_t),
            ("V_an", self.v_an),
            ("V_a", self.v_a),
            ("V_c", self.v_c),
            ("delta_v", self.delta_v),
            ("delta_a", self.delta_a),
            ("phi_bar_a", self.phi_bar_a),
            ("wm_factor", self.wm_factor),
        ];
        for (name, v) in nonneg {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(ModelError::Parameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        let positive = [("Pi", self.pi), ("eps", self.eps), ("L_v", self.l_v), ("L_d", self.l_d)];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(ModelError::Parameter(format!("{name} must be > 0")));
            }
        }
        let open_unit = [
            ("phi_bar", self.phi_bar),
            ("delta_n", self.delta_n),
            ("delta_c", self.delta_c),
        ];
        for (name, v) in open_unit {
            if !(v > T::zero() && v < T::one()) {
                return Err(ModelError::Parameter(format!("{name} must lie in (0,1), got {v}")));
            }
        }
        if !(self.hr_width > T::zero() && self.hr_width <= self.phi_bar) {
            return Err(ModelError::Parameter(format!(
                "hr_width must lie in (0, phi_bar], got {}",
                self.hr_width
            )));
        }
        Ok(())
    }
}
