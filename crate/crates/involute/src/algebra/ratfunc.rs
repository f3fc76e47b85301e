//! Rational functions: exact fractions of polynomials.
//!
//! Fractions are kept in a content-normalized form — the denominator is a
//! primitive integer polynomial with positive leading coefficient, with all
//! rational scale folded into the numerator — plus two cheap opportunistic
//! simplifications (common monomial factors, and exact polynomial division
//! when it succeeds). Full multivariate gcd is deliberately not attempted:
//! equality is decided by cross-multiplication instead of canonical forms.

use num::rational::BigRational;
use num::One;

use crate::algebra::poly::{Monomial, Poly};
use crate::algebra::vars::VarRegistry;

/// An exact fraction of polynomials with nonzero denominator.
#[derive(Clone, Debug)]
pub struct RatFunc {
    num: Poly,
    den: Poly,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RatFuncError {
    #[error("zero denominator")]
    ZeroDenominator,
}

/// Greatest common monomial divisor of all terms of `p` (its "monomial
/// content"): variable-wise minimum exponent.
fn monomial_content(p: &Poly) -> Monomial {
    let mut iter = p.terms();
    let first = match iter.next() {
        Some((m, _)) => m.clone(),
        None => return Monomial::one(),
    };
    iter.fold(first, |acc, (m, _)| {
        Monomial::from_factors(
            acc.factors()
                .iter()
                .map(|&(v, e)| (v, e.min(m.exponent(v)))),
        )
    })
}

impl RatFunc {
    pub fn new(num: Poly, den: Poly) -> Result<Self, RatFuncError> {
        if den.is_zero() {
            return Err(RatFuncError::ZeroDenominator);
        }
        let mut rf = RatFunc { num, den };
        rf.normalize();
        Ok(rf)
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFunc {
            num: p,
            den: Poly::one(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        RatFunc::from_poly(Poly::from_int(n))
    }

    pub fn zero() -> Self {
        RatFunc::from_poly(Poly::zero())
    }

    pub fn one() -> Self {
        RatFunc::from_poly(Poly::one())
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.as_constant().map(|c| c.is_one()).unwrap_or(false)
    }

    /// The numerator as a polynomial when the denominator is 1.
    pub fn as_poly(&self) -> Option<&Poly> {
        self.is_polynomial().then_some(&self.num)
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.den = Poly::one();
            return;
        }
        // Cancel the common monomial factor of numerator and denominator.
        let common = monomial_content(&self.num)
            .factors()
            .iter()
            .map(|&(v, e)| (v, e.min(monomial_content(&self.den).exponent(v))))
            .filter(|&(_, e)| e > 0)
            .collect::<Vec<_>>();
        if !common.is_empty() {
            let g = Monomial::from_factors(common);
            let gp = Poly::term(g, BigRational::one());
            self.num = self.num.exact_div(&gp).expect("monomial content divides");
            self.den = self.den.exact_div(&gp).expect("monomial content divides");
        }
        // Opportunistic cancellation when one side divides the other exactly.
        if let Some(q) = self.num.exact_div(&self.den) {
            self.num = q;
            self.den = Poly::one();
        } else if let Some(q) = self.den.exact_div(&self.num) {
            // num/den = 1/q; fold the sign/content below.
            self.num = Poly::one();
            self.den = q;
        }
        // Content normalization: primitive integer denominator, positive
        // leading coefficient; all rational scale lives in the numerator.
        let (cd, pd) = self.den.content_and_primitive();
        self.num = self.num.scale(&cd.recip());
        self.den = pd;
    }

    pub fn add(&self, other: &RatFunc) -> RatFunc {
        let num = self
            .num
            .mul(&other.den)
            .add(&other.num.mul(&self.den));
        let den = self.den.mul(&other.den);
        RatFunc::new(num, den).expect("product of nonzero denominators")
    }

    pub fn sub(&self, other: &RatFunc) -> RatFunc {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> RatFunc {
        RatFunc {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &RatFunc) -> RatFunc {
        RatFunc::new(self.num.mul(&other.num), self.den.mul(&other.den))
            .expect("product of nonzero denominators")
    }

    pub fn scale(&self, c: &BigRational) -> RatFunc {
        RatFunc::new(self.num.scale(c), self.den.clone()).expect("denominator unchanged")
    }

    pub fn div(&self, other: &RatFunc) -> Result<RatFunc, RatFuncError> {
        if other.is_zero() {
            return Err(RatFuncError::ZeroDenominator);
        }
        RatFunc::new(self.num.mul(&other.den), self.den.mul(&other.num))
    }

    pub fn recip(&self) -> Result<RatFunc, RatFuncError> {
        RatFunc::new(self.den.clone(), self.num.clone())
    }

    /// Quotient-rule phase derivative, extension chain rule included.
    pub fn diff_phase(&self, i: u16, reg: &VarRegistry) -> RatFunc {
        let dn = self.num.diff_phase(i, reg);
        let dd = self.den.diff_phase(i, reg);
        if dd.is_zero() {
            return RatFunc::new(dn, self.den.clone()).expect("denominator unchanged");
        }
        let num = dn.mul(&self.den).sub(&self.num.mul(&dd));
        RatFunc::new(num, self.den.mul(&self.den)).expect("denominator square is nonzero")
    }

    /// Quotient-rule jet shift: the formal time derivative along the jet
    /// prolongation, extended from polynomials.
    /// Replaces order-0 jet variables by rational functions, simultaneously
    /// in numerator and denominator. The substituted denominator must not
    /// collapse to zero.
    pub fn substitute_jets(
        &self,
        values: &std::collections::BTreeMap<u16, RatFunc>,
    ) -> Result<RatFunc, RatFuncError> {
        self.num
            .substitute_jets(values)
            .div(&self.den.substitute_jets(values))
    }

    pub fn jet_shift(&self) -> RatFunc {
        let dn = self.num.jet_shift();
        let dd = self.den.jet_shift();
        if dd.is_zero() {
            return RatFunc::new(dn, self.den.clone()).expect("denominator unchanged");
        }
        let num = dn.mul(&self.den).sub(&self.num.mul(&dd));
        RatFunc::new(num, self.den.mul(&self.den)).expect("denominator square is nonzero")
    }

    pub fn eval(&self, reg: &VarRegistry, phase: &[f64], jet: &dyn Fn(u16, u16) -> f64) -> f64 {
        self.num.eval(reg, phase, jet) / self.den.eval(reg, phase, jet)
    }

    /// Canonical text form: `num` when the denominator is 1, otherwise
    /// `(num)/(den)`.
    pub fn render(&self, reg: &VarRegistry) -> String {
        if self.is_polynomial() {
            self.num.render(reg)
        } else {
            format!("({})/({})", self.num.render(reg), self.den.render(reg))
        }
    }
}

impl PartialEq for RatFunc {
    /// Field equality by cross-multiplication — independent of whether the
    /// opportunistic simplifications fired.
    fn eq(&self, other: &Self) -> bool {
        self.num.mul(&other.den) == other.num.mul(&self.den)
    }
}

impl Eq for RatFunc {}

impl std::ops::Add for &RatFunc {
    type Output = RatFunc;
    fn add(self, rhs: &RatFunc) -> RatFunc {
        RatFunc::add(self, rhs)
    }
}

impl std::ops::Sub for &RatFunc {
    type Output = RatFunc;
    fn sub(self, rhs: &RatFunc) -> RatFunc {
        RatFunc::sub(self, rhs)
    }
}

impl std::ops::Mul for &RatFunc {
    type Output = RatFunc;
    fn mul(self, rhs: &RatFunc) -> RatFunc {
        RatFunc::mul(self, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::vars::Var;

    fn x() -> Poly {
        Poly::var(Var::Phase(0))
    }
    fn y() -> Poly {
        Poly::var(Var::Phase(1))
    }

    #[test]
    fn field_identities_hold_without_canonical_gcd() {
        let a = RatFunc::new(x(), y()).unwrap();
        let b = RatFunc::new(y(), x()).unwrap();
        // a·b = 1 even though intermediate terms share no canonical form.
        assert_eq!(a.mul(&b), RatFunc::one());
        // a + (−a) = 0
        assert!(a.add(&a.neg()).is_zero());
        // (a/b)·b = a
        assert_eq!(a.div(&b).unwrap().mul(&b), a);
    }

    #[test]
    fn exact_division_simplifies_when_possible() {
        // (x² − y²)/(x − y) = x + y
        let num = x().mul(&x()).sub(&y().mul(&y()));
        let den = x().sub(&y());
        let r = RatFunc::new(num, den).unwrap();
        assert!(r.is_polynomial());
        assert_eq!(r.num(), &x().add(&y()));
    }

    #[test]
    fn monomial_content_cancels() {
        // x²y/(xy²) = x/y
        let r = RatFunc::new(x().mul(&x()).mul(&y()), x().mul(&y()).mul(&y())).unwrap();
        assert_eq!(r.num(), &x());
        assert_eq!(r.den(), &y());
    }

    #[test]
    fn denominator_is_primitive_with_positive_lead() {
        // 1/(−2x + 2y) normalizes the sign and content into the numerator.
        let den = x().scale(&BigRational::from_integer((-2).into()))
            .add(&y().scale(&BigRational::from_integer(2.into())));
        let r = RatFunc::new(Poly::one(), den).unwrap();
        assert_eq!(r.den(), &x().sub(&y()));
        assert_eq!(
            r.num().as_constant().unwrap(),
            BigRational::new((-1).into(), 2.into())
        );
    }

    #[test]
    fn quotient_rule_matches_product_expansion() {
        let reg = VarRegistry::new(vec!["x", "y"], vec!["lam"]).unwrap();
        // d/dx (x²/y) = 2x/y; d/dy (x²/y) = −x²/y².
        let r = RatFunc::new(x().mul(&x()), y()).unwrap();
        assert_eq!(
            r.diff_phase(0, &reg),
            RatFunc::new(x().scale(&BigRational::from_integer(2.into())), y()).unwrap()
        );
        assert_eq!(
            r.diff_phase(1, &reg),
            RatFunc::new(x().mul(&x()).neg(), y().mul(&y())).unwrap()
        );
        // Jet shift through a quotient: ∂(λ/x) = λ̇/x.
        let lam = |k| Poly::var(Var::Jet { family: 0, order: k });
        let q = RatFunc::new(lam(0), x()).unwrap();
        assert_eq!(q.jet_shift(), RatFunc::new(lam(1), x()).unwrap());
    }

    #[test]
    fn zero_denominator_is_rejected() {
        assert_eq!(
            RatFunc::new(Poly::one(), Poly::zero()).unwrap_err(),
            RatFuncError::ZeroDenominator
        );
        assert!(RatFunc::one().div(&RatFunc::zero()).is_err());
    }

    #[test]
    fn jet_substitution_is_simultaneous() {
        // λ₀ ↦ μ₀ and μ₀ ↦ λ₀ swap cleanly only if applied at once.
        let lam = Poly::var(Var::Jet { family: 0, order: 0 });
        let mu = Poly::var(Var::Jet { family: 1, order: 0 });
        let mut values = std::collections::BTreeMap::new();
        values.insert(0u16, RatFunc::from_poly(mu.clone()));
        values.insert(1u16, RatFunc::from_poly(lam.clone()));
        let p = lam.mul(&lam).add(&mu.scale(&BigRational::from_integer(3.into())));
        let swapped = p.substitute_jets(&values);
        let expected = mu.mul(&mu).add(&lam.scale(&BigRational::from_integer(3.into())));
        assert_eq!(swapped, RatFunc::from_poly(expected));

        // Rational values reach denominators too: λ² with λ ↦ 1/x.
        let mut inv = std::collections::BTreeMap::new();
        inv.insert(0u16, RatFunc::new(Poly::one(), x()).unwrap());
        let sq = lam.mul(&lam).substitute_jets(&inv);
        assert_eq!(sq, RatFunc::new(Poly::one(), x().mul(&x())).unwrap());

        // Unlisted families and higher-order jets stay untouched.
        let lam1 = Poly::var(Var::Jet { family: 0, order: 1 });
        assert_eq!(
            lam1.substitute_jets(&inv),
            RatFunc::from_poly(lam1.clone())
        );
    }
}
