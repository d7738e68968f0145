//! The general (`V ≠ 0`) nonlocal Darboux transformation.
//!
//! The admissibility system for `s` is only ever verified, never solved.
//! The one family the crate constructs is the radial ansatz `s₀` over the
//! exponent `h₀`, with the two-parameter potential it generates.

use thiserror::Error;

use crate::axisym::potential_from_h_terms;
use crate::expr::rho2;
use crate::quadrature::Exclusion;
use crate::{Expr, Identity, OneForm, Params, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DarbouxError {
    #[error("G = s_r V_r + s_z V_z vanishes identically; R1 and R2 are undefined")]
    DegenerateG,
    #[error("invalid ansatz parameters: {0}")]
    InvalidParams(String),
}

/// `V = s + 2h + ln r`.
pub fn v_of(s: &Expr, h: &Expr) -> Expr {
    (s + Expr::num(2) * h + Expr::r().ln()).fold()
}

#[derive(Debug, Clone)]
pub struct DarbouxCoeffs {
    pub s: Expr,
    pub v: Expr,
    pub g: Expr,
    pub h_: Expr,
    pub t: Expr,
    pub r1: Expr,
    pub r2: Expr,
}

/// Operator coefficients for the exponent `h` and increment `s`.
///
/// Fails when `G` folds to zero. A `G` that merely has zeros is accepted;
/// scan `g` to locate them.
pub fn coeffs(s: &Expr, h: &Expr) -> Result<DarbouxCoeffs, DarbouxError> {
    let v = v_of(s, h);
    let (s_r, s_z) = (s.dr(), s.dz());
    let (v_r, v_z) = (v.dr(), v.dz());
    let g = (&s_r * &v_r + &s_z * &v_z).fold();
    if g.is_zero() {
        return Err(DarbouxError::DegenerateG);
    }
    let h_ = (v_z.dz() - s_r.dr()).fold();
    let t = (v_r.dz() + s_r.dz()).fold();
    let half = Expr::frac(1, 2);
    let r1 = (&half * (&v_z - Expr::num(2) * &s_z + (&v_z * &h_ + &v_r * &t) / &g)).fold();
    let r2 = (&half * (&s_r + (&s_r * &h_ - &s_z * &t) / &g)).fold();
    Ok(DarbouxCoeffs { s: s.clone(), v, g, h_, t, r1, r2 })
}

impl DarbouxCoeffs {
    /// The two equations of the admissibility system, each split into its
    /// distributed summands so the residual scale reflects the cancellation.
    pub fn s_system(&self) -> [Identity; 2] {
        let (s, v, g, hh, t) = (&self.s, &self.v, &self.g, &self.h_, &self.t);
        let (s_r, s_z) = (s.dr(), s.dz());
        let (s_rr, s_rz, s_zz) = (s_r.dr(), s_r.dz(), s.dz().dz());
        let (v_r, v_z) = (v.dr(), v.dz());
        let (v_rr, v_rz, v_zz) = (v_r.dr(), v_r.dz(), v_z.dz());
        let (g_r, g_z) = (g.dr(), g.dz());
        let (h_r, h_z) = (hh.dr(), hh.dz());
        let (t_r, t_z) = (t.dr(), t.dz());
        let g2 = g * g;
        let first = vec![
            &g2 * &s_rz,
            g * hh * &s_rz,
            -(g * t * &s_zz),
            -(&g_z * hh * &s_r),
            &h_z * g * &s_r,
            -(&v_r * t * g * &s_r),
            &g_z * t * &s_z,
            -(&v_z * t * g * &s_z),
            -(&t_z * g * &s_z),
            -(&v_z * hh * &g_r),
            -(&v_r * t * &g_r),
            &v_rz * &g2,
            &v_rz * hh * g,
            &v_z * &h_r * g,
            &v_rr * t * g,
            &v_r * &t_r * g,
        ];
        let second = vec![
            &g2 * &s_rr,
            g * hh * &s_rr,
            -(g * t * &s_rz),
            -(&g_r * hh * &s_r),
            &v_r * &g2 * &s_r,
            &h_r * g * &s_r,
            &v_r * hh * g * &s_r,
            &g_r * t * &s_z,
            &g2 * &v_z * &s_z,
            &v_z * hh * g * &s_z,
            -(&t_r * g * &s_z),
            &v_z * hh * &g_z,
            &v_r * t * &g_z,
            -(&v_zz * &g2),
            -(&v_zz * hh * g),
            -(&v_z * &h_z * g),
            -(&v_rz * t * g),
            -(&v_r * &t_z * g),
        ];
        let fold = |terms: Vec<Expr>| terms.iter().map(Expr::fold).collect();
        [Identity::new("first admissibility equation", fold(first)), Identity::new("second admissibility equation", fold(second))]
    }
}

/// Both admissibility residuals for `(s, h)`.
pub fn s_system_residuals(s: &Expr, h: &Expr) -> Result<[Identity; 2], DarbouxError> {
    Ok(coeffs(s, h)?.s_system())
}

/// `Ỹ = offset + q_coeff · Q`: every transformation here is affine in the
/// nonlocal variable, so a quadratured `Q` can be substituted pointwise.
#[derive(Debug, Clone)]
pub struct LinearInQ {
    pub offset: Expr,
    pub q_coeff: Expr,
}

impl LinearInQ {
    pub fn apply(&self, q: &Expr) -> Expr {
        (&self.offset + &self.q_coeff * q).fold()
    }

    pub fn terms(&self, q: &Expr) -> [Expr; 2] {
        [self.offset.clone(), (&self.q_coeff * q).fold()]
    }
}

/// Parameters `C`, `C1` of the radial ansatz family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzParams {
    pub c: f64,
    pub c1: f64,
}

impl Default for AnsatzParams {
    fn default() -> Self {
        AnsatzParams { c: 1.0, c1: 1.0 }
    }
}

impl AnsatzParams {
    pub fn new(c: f64, c1: f64) -> Result<Self, DarbouxError> {
        if !c.is_finite() || !c1.is_finite() {
            return Err(DarbouxError::InvalidParams(format!("C = {c}, C1 = {c1} must be finite")));
        }
        Ok(AnsatzParams { c, c1 })
    }

    /// `C > 0, C1 ≥ 1`: the stated sufficient conditions for a bounded,
    /// negative potential.
    pub fn is_regular(&self) -> bool {
        self.c > 0.0 && self.c1 >= 1.0
    }

    pub fn params(&self) -> Params {
        Params::new().with("C", self.c).with("C1", self.c1)
    }

    /// Radius of the circle where the last logarithm of `s₀` has a zero
    /// argument, if any.
    pub fn s0_zero_radius(&self) -> Option<f64> {
        let (c, c1) = (self.c, self.c1);
        if c1 == 0.5 {
            return None;
        }
        let power = (1.0 + 2.0 * c1) * c / (2.0 * c1 - 1.0);
        (power > 0.0).then(|| power.powf(1.0 / (2.0 * c1)))
    }

    /// Ring exclusion around the zero locus of `s₀`.
    pub fn s0_exclusion(&self, half_width: f64) -> Option<Exclusion> {
        self.s0_zero_radius().map(|radius| Exclusion::Ring { center: Point::new(0.0, 0.0), radius, half_width })
    }
}

fn rho2_c1() -> Expr {
    rho2().pow(&Expr::param("C1"))
}

/// `−½ ln ρ² + ln(ρ^{2C1} + C) − ln|(1 − 2C1) ρ^{2C1} + (1 + 2C1) C|`, in
/// the parameters `C`, `C1`.
pub fn s0_family() -> Expr {
    let (c, c1) = (Expr::param("C"), Expr::param("C1"));
    let p = rho2_c1();
    let one = Expr::one();
    let two = Expr::num(2);
    let last = (&one - &two * &c1) * &p + (&one + &two * &c1) * &c;
    (-(rho2().ln() / &two) + (&p + &c).ln() - last.abs().ln()).fold()
}

/// `s₀` with `C`, `C1` substituted as exact literals.
pub fn s0_bound(p: AnsatzParams) -> Expr {
    s0_family().bind(&p.params()).fold()
}

/// `−8 C C1² ρ^{2(C1−1)} / (ρ^{2C1} + C)²`.
pub fn helmholtz_potential() -> Expr {
    let (c, c1) = (Expr::param("C"), Expr::param("C1"));
    let num = Expr::num(-8) * &c * c1.powi(2) * rho2().pow(&(&c1 - Expr::one()));
    (num / (rho2_c1() + &c).powi(2)).fold()
}

/// Terms of `potential_from_h(h₀ + s₀)` minus the ansatz potential.
pub fn potential_chain_identity() -> Identity {
    let h = (crate::axisym::h0() + s0_family()).fold();
    Identity::expanded("exponent h0 + s0 generates the ansatz potential", potential_from_h_terms(&h), &helmholtz_potential())
}

/// `Q_z = (y_r + r y/ρ²) r/ρ`, `Q_r = −(y_z + z y/ρ²) r/ρ`, the nonlocal
/// form for a seed of the free equation over `h₀`.
pub fn q_seed_form(y: &Expr) -> OneForm {
    let (r, z) = (Expr::r(), Expr::z());
    let rho2 = rho2();
    let w = (&r / rho2.sqrt()).fold();
    let b = (y.dr() + &r * y / &rho2) * &w;
    let a = -((y.dz() + &z * y / &rho2) * &w);
    OneForm::new(a.fold(), b.fold())
}

/// The ansatz image of a seed `y`, affine in `Q`:
/// `y_z − W (z y − ρ Q)` with
/// `W = ((1 + 2C1) ρ^{2C1} + C(1 − 2C1)) / (2 ρ² (ρ^{2C1} + C))`.
pub fn darboux_map(y: &Expr) -> LinearInQ {
    let (c, c1) = (Expr::param("C"), Expr::param("C1"));
    let (one, two) = (Expr::one(), Expr::num(2));
    let p = rho2_c1();
    let w = ((&one + &two * &c1) * &p + &c * (&one - &two * &c1)) / (&two * rho2() * (&p + &c));
    let offset = y.dz() - &w * Expr::z() * y;
    let q_coeff = &w * rho2().sqrt();
    LinearInQ { offset: offset.fold(), q_coeff: q_coeff.fold() }
}

pub fn darboux_solution(y: &Expr, q: &Expr) -> Expr {
    darboux_map(y).apply(q)
}

/// General formula `y_z + (R1 − h_z) y + e^h R2 Q`, affine in `Q`.
pub fn darboux_map_general(y: &Expr, h: &Expr, s: &Expr) -> Result<LinearInQ, DarbouxError> {
    let k = coeffs(s, h)?;
    let offset = y.dz() + (&k.r1 - h.dz()) * y;
    let q_coeff = h.exp() * &k.r2;
    Ok(LinearInQ { offset: offset.fold(), q_coeff: q_coeff.fold() })
}

pub fn darboux_solution_general(y: &Expr, h: &Expr, s: &Expr, q: &Expr) -> Result<Expr, DarbouxError> {
    Ok(darboux_map_general(y, h, s)?.apply(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axisym::{h0, schrodinger_identity};
    use crate::expr::parse;
    use crate::verify::{sample_identity, SampleSpec};
    use crate::Domain;

    const GRID: [(f64, f64); 9] =
        [(0.5, 1.0), (0.5, 1.5), (0.5, 2.0), (1.0, 1.0), (1.0, 1.5), (1.0, 2.0), (2.0, 1.0), (2.0, 1.5), (2.0, 2.0)];

    fn e(text: &str) -> Expr {
        parse(text).unwrap()
    }

    fn spec_for(p: AnsatzParams) -> SampleSpec {
        let mut d = Domain::standard();
        d.exclusions.extend(p.s0_exclusion(0.05));
        SampleSpec::default().with_domain(d)
    }

    fn max_residual(id: &Identity, params: &Params, spec: &SampleSpec) -> f64 {
        let rep = sample_identity(id, params, spec);
        assert_eq!(rep.non_finite_count, 0, "{}", id.label);
        rep.max_scaled_residual
    }

    #[test]
    fn v_examples() {
        let h = e("ln(z^2 + 1)*r");
        let s = (-(Expr::num(2) * &h) - Expr::r().ln()).fold();
        let id = Identity::new("", vec![v_of(&s, &h)]);
        assert!(max_residual(&id, &Params::new(), &SampleSpec::default()) < 1e-14);
        assert_eq!(v_of(&Expr::zero(), &Expr::zero()).to_string(), "ln(r)");
        let p = AnsatzParams::default();
        let v = v_of(&s0_bound(p), &h0());
        assert!(v.eval(&Params::new(), Point::<f64>::new(1.0, 0.5)).unwrap().abs() > 1e-3);
    }

    #[test]
    fn degenerate_g() {
        assert_eq!(coeffs(&Expr::num(3), &h0()).unwrap_err(), DarbouxError::DegenerateG);
        assert!(coeffs(&s0_family(), &h0()).is_ok());
    }

    #[test]
    fn coefficients_are_finite_for_default_ansatz() {
        let p = AnsatzParams::default();
        let k = coeffs(&s0_family(), &h0()).unwrap();
        let spec = spec_for(p);
        for (name, c) in [("g", &k.g), ("h", &k.h_), ("t", &k.t), ("r1", &k.r1), ("r2", &k.r2)] {
            let id = Identity::new(name, vec![c.clone(), (-c).fold()]);
            assert_eq!(sample_identity(&id, &p.params(), &spec).non_finite_count, 0, "{name}");
        }
    }

    #[test]
    fn ansatz_solves_the_system() {
        let [first, second] = s_system_residuals(&s0_family(), &h0()).unwrap();
        for (c, c1) in GRID {
            let p = AnsatzParams::new(c, c1).unwrap();
            let spec = spec_for(p);
            assert!(max_residual(&first, &p.params(), &spec) < 1e-8, "C={c} C1={c1}");
            assert!(max_residual(&second, &p.params(), &spec) < 1e-8, "C={c} C1={c1}");
        }
    }

    #[test]
    fn radial_probe_satisfies_only_the_first_equation() {
        let [first, second] = s_system_residuals(&e("ln(1 + r^2 + z^2)"), &h0()).unwrap();
        let spec = SampleSpec::default();
        assert!(max_residual(&first, &Params::new(), &spec) < 1e-8);
        assert!(max_residual(&second, &Params::new(), &spec) > 1e-4);
        let [first, second] = s_system_residuals(&Expr::r(), &h0()).unwrap();
        assert!(max_residual(&first, &Params::new(), &spec) > 1e-4);
        assert!(max_residual(&second, &Params::new(), &spec) > 1e-4);
    }

    #[test]
    fn potential_chain() {
        let id = potential_chain_identity();
        for (c, c1) in GRID {
            let p = AnsatzParams::new(c, c1).unwrap();
            assert!(max_residual(&id, &p.params(), &spec_for(p)) < 1e-8, "C={c} C1={c1}");
        }
    }

    #[test]
    fn potential_values() {
        let u = helmholtz_potential();
        let p = AnsatzParams::default().params();
        assert!((u.eval(&p, Point::<f64>::new(1.0, 0.0)).unwrap() + 2.0).abs() < 1e-15);
        assert!((u.eval(&p, Point::<f64>::new(1.0, 1.0)).unwrap() + 8.0 / 9.0).abs() < 1e-15);
        let zero = Params::new().with("C", 1.0).with("C1", 0.0);
        assert_eq!(u.eval(&zero, Point::<f64>::new(0.7, 0.3)).unwrap(), 0.0);
        assert!(u.bind(&Params::new().with("C1", 0.0)).fold().is_zero());
    }

    #[test]
    fn s0_at_unit_parameters() {
        let p = AnsatzParams::default();
        let want = e("-ln(r^2+z^2)/2 + ln(r^2 + z^2 + 1) - ln(abs(3 - (r^2 + z^2)))");
        let id = Identity::equality("", &s0_bound(p), &want);
        assert!(max_residual(&id, &Params::new(), &spec_for(p)) < 1e-14);
        assert!((p.s0_zero_radius().unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(AnsatzParams::new(1.0, 0.5).unwrap().s0_zero_radius(), None);
    }

    #[test]
    fn q_seed_form_examples() {
        let form = q_seed_form(&Expr::one());
        let q = e("z/sqrt(r^2+z^2) + kappa");
        let params = Params::new().with("kappa", 0.25);
        for id in form.primitive_identities(&q) {
            assert!(max_residual(&id, &params, &SampleSpec::default()) < 1e-12);
        }
        let zero = q_seed_form(&Expr::zero());
        assert!(zero.a.is_zero() && zero.b.is_zero());
        assert!(max_residual(&q_seed_form(&Expr::z()).compatibility_identity(), &Params::new(), &SampleSpec::default()) < 1e-12);
        let general = crate::axisym::q_forms(&h0(), &e("r^2 - 2*z^2"));
        let special = q_seed_form(&e("r^2 - 2*z^2"));
        let id = Identity::equality("", &general.b, &special.b);
        assert!(max_residual(&id, &Params::new(), &SampleSpec::default()) < 1e-12);
    }

    #[test]
    fn unit_seed_image() {
        let y1 = e("((1 + 2*C1)*(r^2+z^2)^C1 + (1 - 2*C1)*C)/(sqrt(r^2+z^2)*((r^2+z^2)^C1 + C))");
        let out = darboux_solution(&Expr::one(), &e("z/sqrt(r^2+z^2) + kappa"));
        let half_kappa = (Expr::param("kappa") / Expr::num(2) * &y1).fold();
        for (c, c1) in GRID {
            let p = AnsatzParams::new(c, c1).unwrap().params().with("kappa", 1.0);
            assert!(max_residual(&Identity::equality("", &out, &half_kappa), &p, &SampleSpec::default()) < 1e-12);
            let res = schrodinger_identity("", &helmholtz_potential(), &out);
            assert!(max_residual(&res, &p, &SampleSpec::default()) < 1e-8);
        }
        let p = AnsatzParams::default().params().with("kappa", 0.0);
        let vanish = Identity::new("", vec![out.bind(&p)]);
        assert!(max_residual(&vanish, &Params::new(), &SampleSpec::default()) < 1e-14);
    }

    #[test]
    fn general_formula_agrees_with_ansatz_formula() {
        let q = e("z/sqrt(r^2+z^2) + kappa");
        let general = darboux_solution_general(&Expr::one(), &h0(), &s0_family(), &q).unwrap();
        let special = darboux_solution(&Expr::one(), &q);
        for (c, c1) in GRID {
            let p = AnsatzParams::new(c, c1).unwrap();
            let params = p.params().with("kappa", 1.0);
            let id = Identity::equality("", &general, &special);
            assert!(max_residual(&id, &params, &spec_for(p)) < 1e-10, "C={c} C1={c1}");
        }
        let zero = darboux_solution_general(&Expr::zero(), &h0(), &s0_family(), &Expr::zero()).unwrap();
        assert!(zero.is_zero());
    }
}
