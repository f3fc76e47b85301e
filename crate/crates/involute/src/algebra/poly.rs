//! Exact multivariate polynomials over ℚ.
//!
//! Monomials are sorted exponent vectors compared in graded reverse
//! lexicographic order over the semantic variable sequence (phase, then
//! extension, then jet variables); polynomials are coefficient maps keyed by
//! monomial, so the last map entry is always the leading term. All arithmetic
//! is exact rational arithmetic — floats appear only in [`Poly::eval`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, ToPrimitive, Zero};

use crate::algebra::vars::{Var, VarRegistry};

/// A power product, stored as a `Var`-sorted list of `(variable, exponent)`
/// pairs with all exponents positive. The empty product is `1`.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    /// Builds from arbitrary (possibly repeated, unsorted) factors.
    pub fn from_factors(factors: impl IntoIterator<Item = (Var, u32)>) -> Self {
        let mut map: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in factors {
            if e > 0 {
                *map.entry(v).or_insert(0) += e;
            }
        }
        Monomial(map.into_iter().collect())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&(_, e)| e as u64).sum()
    }

    pub fn exponent(&self, v: Var) -> u32 {
        self.0
            .binary_search_by_key(&v, |&(w, _)| w)
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut a, mut b) = (self.0.iter().peekable(), other.0.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => break,
                (Some(_), None) => out.push(*a.next().unwrap()),
                (None, Some(_)) => out.push(*b.next().unwrap()),
                (Some(&&(va, ea)), Some(&&(vb, eb))) => match va.cmp(&vb) {
                    Ordering::Less => {
                        out.push((va, ea));
                        a.next();
                    }
                    Ordering::Greater => {
                        out.push((vb, eb));
                        b.next();
                    }
                    Ordering::Equal => {
                        out.push((va, ea + eb));
                        a.next();
                        b.next();
                    }
                },
            }
        }
        Monomial(out)
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().all(|&(v, e)| other.exponent(v) >= e)
    }

    /// `other / self`, assuming [`Monomial::divides`] holds.
    pub fn div_into(&self, other: &Monomial) -> Monomial {
        debug_assert!(self.divides(other));
        Monomial(
            other
                .0
                .iter()
                .filter_map(|&(v, e)| {
                    let r = e - self.exponent(v);
                    (r > 0).then_some((v, r))
                })
                .collect(),
        )
    }

    pub fn lcm(&self, other: &Monomial) -> Monomial {
        let mut map: BTreeMap<Var, u32> = self.0.iter().copied().collect();
        for &(v, e) in &other.0 {
            let slot = map.entry(v).or_insert(0);
            *slot = (*slot).max(e);
        }
        Monomial(map.into_iter().collect())
    }

    pub fn coprime(&self, other: &Monomial) -> bool {
        self.0.iter().all(|&(v, _)| other.exponent(v) == 0)
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    /// Graded reverse lexicographic order: compare total degree first; on a
    /// tie, scan exponents from the *largest* variable downward and at the
    /// first difference the monomial with the *smaller* exponent is larger.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.total_degree().cmp(&other.total_degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let mut a = self.0.iter().rev().peekable();
        let mut b = other.0.iter().rev().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                // A trailing factor at a later variable means a strictly
                // larger exponent there, hence a smaller monomial.
                (Some(_), None) => return Ordering::Less,
                (None, Some(_)) => return Ordering::Greater,
                (Some(&&(va, ea)), Some(&&(vb, eb))) => match va.cmp(&vb) {
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Equal => {
                        if ea != eb {
                            return if ea < eb {
                                Ordering::Greater
                            } else {
                                Ordering::Less
                            };
                        }
                        a.next();
                        b.next();
                    }
                },
            }
        }
    }
}

/// Exact polynomial over ℚ in registered variables.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Poly { terms }
    }

    pub fn from_int(n: i64) -> Self {
        Poly::constant(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn var(v: Var) -> Self {
        Poly::term(Monomial::var(v), BigRational::one())
    }

    pub fn term(m: Monomial, c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.len() <= 1 && self.terms.keys().all(Monomial::is_one)
    }

    /// The constant value if this polynomial is constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        if self.is_zero() {
            Some(BigRational::zero())
        } else if self.is_constant() {
            self.terms.values().next().cloned()
        } else {
            None
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Leading term under the monomial order (largest key).
    pub fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.last_key_value()
    }

    pub fn total_degree(&self) -> Option<u64> {
        self.terms.keys().map(Monomial::total_degree).max()
    }

    /// Every variable that appears with nonzero exponent, deduplicated.
    pub fn vars(&self) -> Vec<Var> {
        let mut set = std::collections::BTreeSet::new();
        for m in self.terms.keys() {
            for &(v, _) in m.factors() {
                set.insert(v);
            }
        }
        set.into_iter().collect()
    }

    pub fn max_exponent(&self, v: Var) -> u32 {
        self.terms
            .keys()
            .map(|m| m.exponent(v))
            .max()
            .unwrap_or(0)
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, k)| (m.clone(), k * c))
                .collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        // Iterate the smaller operand outside to keep the accumulator hot.
        let (small, large) = if self.terms.len() <= other.terms.len() {
            (self, other)
        } else {
            (other, self)
        };
        for (ma, ca) in &small.terms {
            for (mb, cb) in &large.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn mul_term(&self, m: &Monomial, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(mm, cc)| (mm.mul(m), cc * c))
                .collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                out = out.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        out
    }

    /// Partial derivative treating every variable as algebraically
    /// independent — no extension-variable chain rule. This is the right
    /// notion for jet variables and for the defining exponents themselves.
    pub fn diff_plain(&self, v: Var) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e == 0 {
                continue;
            }
            let lowered = Monomial(
                m.factors()
                    .iter()
                    .filter_map(|&(w, k)| {
                        if w == v {
                            (k > 1).then_some((w, k - 1))
                        } else {
                            Some((w, k))
                        }
                    })
                    .collect(),
            );
            out.add_term(lowered, c * BigRational::from_integer(BigInt::from(e)));
        }
        out
    }

    /// Partial derivative with respect to phase coordinate `i`, applying the
    /// chain rule `∂u/∂x^i = (∂q/∂x^i)·u` for every extension variable
    /// `u = exp(q)`.
    pub fn diff_phase(&self, i: u16, reg: &VarRegistry) -> Poly {
        let mut out = self.diff_plain(Var::Phase(i));
        for (m, c) in &self.terms {
            for &(v, e) in m.factors() {
                if let Var::Ext(j) = v {
                    let dq = &reg.ext_var(j).grad[i as usize];
                    if dq.is_zero() {
                        continue;
                    }
                    // d/dx (u^e · rest) contributes e·(∂q/∂x)·u^e·rest.
                    let factor = dq.scale(&(c * BigRational::from_integer(BigInt::from(e))));
                    out = out.add(&factor.mul_term(m, &BigRational::one()));
                }
            }
        }
        out
    }

    /// The jet-shift derivation: maps each jet variable `λ^α_k` to
    /// `λ^α_{k+1}` and kills phase and extension variables. This is the
    /// formal time derivative along the jet prolongation.
    pub fn jet_shift(&self) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            for &(v, e) in m.factors() {
                if let Var::Jet { family, order } = v {
                    let raised = Var::Jet {
                        family,
                        order: order + 1,
                    };
                    let shifted = Monomial::from_factors(
                        m.factors()
                            .iter()
                            .map(|&(w, k)| if w == v { (w, k - 1) } else { (w, k) })
                            .chain(std::iter::once((raised, 1))),
                    );
                    out.add_term(shifted, c * BigRational::from_integer(BigInt::from(e)));
                }
            }
        }
        out
    }

    /// Replaces order-0 jet variables by rational functions, all at once.
    /// Simultaneous substitution matters: the values may themselves mention
    /// jet families whose indices collide with the ones being replaced.
    pub fn substitute_jets(
        &self,
        values: &std::collections::BTreeMap<u16, crate::algebra::ratfunc::RatFunc>,
    ) -> crate::algebra::ratfunc::RatFunc {
        use crate::algebra::ratfunc::RatFunc;
        let mut out = RatFunc::zero();
        for (m, c) in &self.terms {
            let mut factor = RatFunc::one();
            let mut rest = Vec::new();
            for &(v, e) in m.factors() {
                match v {
                    Var::Jet { family, order: 0 } if values.contains_key(&family) => {
                        let val = &values[&family];
                        for _ in 0..e {
                            factor = factor.mul(val);
                        }
                    }
                    _ => rest.push((v, e)),
                }
            }
            let base = Poly::term(Monomial::from_factors(rest), c.clone());
            out = out.add(&RatFunc::from_poly(base).mul(&factor));
        }
        out
    }

    /// Substitutes a polynomial for a single variable.
    pub fn substitute(&self, v: Var, replacement: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(v);
            if e == 0 {
                out.add_term(m.clone(), c.clone());
                continue;
            }
            let rest = Monomial(
                m.factors()
                    .iter()
                    .filter(|&&(w, _)| w != v)
                    .copied()
                    .collect(),
            );
            let piece = replacement.pow(e).mul_term(&rest, c);
            out = out.add(&piece);
        }
        out
    }

    /// Numeric evaluation. `phase` supplies phase coordinates by index,
    /// `jet` supplies multiplier jets by (family, order); extension variables
    /// are evaluated as `exp(q(phase))`.
    pub fn eval(&self, reg: &VarRegistry, phase: &[f64], jet: &dyn Fn(u16, u16) -> f64) -> f64 {
        let mut total = 0.0;
        for (m, c) in &self.terms {
            let mut prod = c.to_f64().expect("rational out of f64 range");
            for &(v, e) in m.factors() {
                let base = match v {
                    Var::Phase(i) => phase[i as usize],
                    Var::Ext(j) => reg.ext_var(j).exponent.eval(reg, phase, jet).exp(),
                    Var::Jet { family, order } => jet(family, order),
                };
                prod *= base.powi(e as i32);
            }
            total += prod;
        }
        total
    }

    /// Rational content: the positive rational `c` such that `self = c · p`
    /// with `p` a primitive integer polynomial whose leading coefficient is
    /// positive. Returns `(c, p)`; zero maps to `(0, 0)`.
    pub fn content_and_primitive(&self) -> (BigRational, Poly) {
        if self.is_zero() {
            return (BigRational::zero(), Poly::zero());
        }
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in self.terms.values() {
            num_gcd = num_gcd.gcd(c.numer());
            den_lcm = den_lcm.lcm(c.denom());
        }
        let mut content = BigRational::new(num_gcd, den_lcm);
        let scaled = self.scale(&content.recip());
        // Sign convention: leading coefficient of the primitive part > 0.
        let lead_neg = scaled
            .leading()
            .map(|(_, c)| c.is_negative())
            .unwrap_or(false);
        let primitive = if lead_neg {
            content = -content;
            scaled.neg()
        } else {
            scaled
        };
        (content, primitive)
    }

    /// Monic rescaling: divides by the leading coefficient.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            None => Poly::zero(),
            Some((_, c)) => self.scale(&c.recip()),
        }
    }

    /// Exact multivariate division: returns `Some(q)` with `self = q · d`
    /// when the division leaves no remainder, `None` otherwise.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        let (dm, dc) = d.leading()?;
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while let Some((rm, rc)) = rem.leading() {
            if !dm.divides(rm) {
                return None;
            }
            let m = dm.div_into(rm);
            let c = rc / dc;
            rem = rem.sub(&d.mul_term(&m, &c));
            quot.add_term(m, c);
        }
        Some(quot)
    }

    /// Renders in canonical form: terms in descending monomial order,
    /// exponents with `^`, explicit `*` between factors. Round-trips through
    /// the expression parser.
    pub fn render(&self, reg: &VarRegistry) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (idx, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if idx == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let coeff_is_one = abs.is_one();
            if !coeff_is_one || m.is_one() {
                if abs.is_integer() {
                    let _ = write!(out, "{}", abs.numer());
                } else {
                    let _ = write!(out, "{}/{}", abs.numer(), abs.denom());
                }
                if !m.is_one() {
                    out.push('*');
                }
            }
            for (k, &(v, e)) in m.factors().iter().enumerate() {
                if k > 0 {
                    out.push('*');
                }
                out.push_str(&reg.var_name(v));
                if e > 1 {
                    let _ = write!(out, "^{e}");
                }
            }
        }
        out
    }
}

impl std::ops::Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        Poly::add(self, rhs)
    }
}

impl std::ops::Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        Poly::sub(self, rhs)
    }
}

impl std::ops::Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        Poly::mul(self, rhs)
    }
}

impl std::ops::Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::var(Var::Phase(0))
    }
    fn y() -> Poly {
        Poly::var(Var::Phase(1))
    }

    #[test]
    fn grevlex_orders_degree_first_then_reverse_lex() {
        let m = |factors: &[(Var, u32)]| Monomial::from_factors(factors.iter().copied());
        let x = Var::Phase(0);
        let y = Var::Phase(1);
        let z = Var::Phase(2);
        // Classic grevlex chain in three variables, descending:
        // x² > xy > y² > xz > yz > z².
        let chain = [
            m(&[(x, 2)]),
            m(&[(x, 1), (y, 1)]),
            m(&[(y, 2)]),
            m(&[(x, 1), (z, 1)]),
            m(&[(y, 1), (z, 1)]),
            m(&[(z, 2)]),
        ];
        for w in chain.windows(2) {
            assert!(w[0] > w[1], "expected {:?} > {:?}", w[0], w[1]);
        }
        // Degree dominates everything else.
        assert!(m(&[(z, 3)]) > m(&[(x, 2)]));
    }

    #[test]
    fn arithmetic_satisfies_ring_identities_on_samples() {
        let p = x().mul(&x()).add(&y().scale(&BigRational::from_integer(3.into())));
        let q = x().sub(&y());
        let r = Poly::from_int(7);
        // (p + q)·r = p·r + q·r
        assert_eq!(p.add(&q).mul(&r), p.mul(&r).add(&q.mul(&r)));
        // p − p = 0
        assert!(p.sub(&p).is_zero());
        // pow agrees with repeated multiplication
        assert_eq!(q.pow(3), q.mul(&q).mul(&q));
    }

    #[test]
    fn diff_phase_applies_extension_chain_rule() {
        // u = exp(-y): d/dy (u·x) = -u·x, d/dx (u·x) = u.
        let reg = VarRegistry::new(vec!["x", "y"], vec![])
            .unwrap()
            .with_ext_var("u", y().neg())
            .unwrap();
        let u = Poly::var(Var::Ext(0));
        let p = u.mul(&x());
        assert_eq!(p.diff_phase(0, &reg), u);
        assert_eq!(p.diff_phase(1, &reg), p.neg());
        // Second derivative in y brings the exponent rule in twice.
        assert_eq!(p.diff_phase(1, &reg).diff_phase(1, &reg), p);
    }

    #[test]
    fn jet_shift_is_a_derivation_raising_jet_order() {
        let l0 = Poly::var(Var::Jet { family: 0, order: 0 });
        let l1 = Poly::var(Var::Jet { family: 0, order: 1 });
        let l2 = Poly::var(Var::Jet { family: 0, order: 2 });
        assert_eq!(l0.jet_shift(), l1);
        // ∂(λ²) = 2λλ̇ and ∂(x) = 0.
        assert_eq!(l0.mul(&l0).jet_shift(), l0.mul(&l1).scale(&BigRational::from_integer(2.into())));
        assert!(x().jet_shift().is_zero());
        // Leibniz on a mixed product: ∂(λλ̇) = λ̇² + λλ̈.
        assert_eq!(
            l0.mul(&l1).jet_shift(),
            l1.mul(&l1).add(&l0.mul(&l2))
        );
    }

    #[test]
    fn exact_division_inverts_multiplication() {
        let p = x().add(&y());
        let q = x().mul(&x()).sub(&y());
        let prod = p.mul(&q);
        assert_eq!(prod.exact_div(&p).unwrap(), q);
        assert_eq!(prod.exact_div(&q).unwrap(), p);
        assert!(prod.add(&Poly::one()).exact_div(&p).is_none());
    }

    #[test]
    fn content_splits_sign_and_denominators() {
        // -3/2·x² - 9/4·y  =  -3/4 · (2x² + 3y)
        let p = x()
            .mul(&x())
            .scale(&BigRational::new((-3).into(), 2.into()))
            .add(&y().scale(&BigRational::new((-9).into(), 4.into())));
        let (c, prim) = p.content_and_primitive();
        assert_eq!(c, BigRational::new((-3).into(), 4.into()));
        assert_eq!(
            prim,
            x().mul(&x()).scale(&BigRational::from_integer(2.into()))
                .add(&y().scale(&BigRational::from_integer(3.into())))
        );
        assert_eq!(prim.scale(&c), p);
    }

    #[test]
    fn render_uses_descending_order_and_explicit_operators() {
        let reg = VarRegistry::new(vec!["x", "y"], vec!["lam"]).unwrap();
        let p = x()
            .mul(&x())
            .sub(&x().mul(&y()).scale(&BigRational::from_integer(2.into())))
            .add(&Poly::constant(BigRational::new(1.into(), 3.into())));
        assert_eq!(p.render(&reg), "x^2 - 2*x*y + 1/3");
        let l1 = Poly::var(Var::Jet { family: 0, order: 1 });
        assert_eq!(l1.sub(&Poly::one()).render(&reg), "lam_1 - 1");
        assert_eq!(Poly::zero().render(&reg), "0");
    }
}
