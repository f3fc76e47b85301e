//! Polynomial constraint ideals with certified membership.
//!
//! A [`ConstraintIdeal`] carries a reduced Gröbner basis (graded reverse
//! lexicographic order) and, alongside each basis element, an exact
//! representation in terms of the original generators. Membership queries can
//! therefore return cofactor certificates: `p = Σ c_j · gen_j` with the `c_j`
//! produced, not just asserted. Normal forms are the unique remainders modulo
//! the reduced basis, so they are idempotent and ℚ-linear.

use num::rational::BigRational;
use num::One;

use crate::algebra::poly::{Monomial, Poly};
use crate::algebra::ratfunc::{RatFunc, RatFuncError};

/// An ideal in the polynomial ring, presented by generators and equipped
/// with a reduced Gröbner basis plus generator representations.
#[derive(Clone, Debug)]
pub struct ConstraintIdeal {
    gens: Vec<Poly>,
    /// Reduced, monic Gröbner basis, sorted ascending by leading monomial.
    basis: Vec<Poly>,
    /// `basis[i] = Σ_j reps[i][j] · gens[j]`, exactly.
    reps: Vec<Vec<Poly>>,
}

/// Full division of `p` by `divisors`, returning quotients and the unique
/// remainder none of whose terms is divisible by any divisor's leading
/// monomial. Divisors must be nonzero.
fn div_rem(p: &Poly, divisors: &[Poly]) -> (Vec<Poly>, Poly) {
    let mut quots = vec![Poly::zero(); divisors.len()];
    let mut rem = Poly::zero();
    let mut work = p.clone();
    'outer: while let Some((m, c)) = work.leading().map(|(m, c)| (m.clone(), c.clone())) {
        for (i, d) in divisors.iter().enumerate() {
            let (dm, dc) = d.leading().expect("nonzero divisor");
            if dm.divides(&m) {
                let t = dm.div_into(&m);
                let k = &c / dc;
                work = work.sub(&d.mul_term(&t, &k));
                quots[i] = quots[i].add(&Poly::term(t, k));
                continue 'outer;
            }
        }
        rem = rem.add(&Poly::term(m.clone(), c.clone()));
        work = work.sub(&Poly::term(m, c));
    }
    (quots, rem)
}

/// One tracked basis element: the polynomial and its expression in the
/// original generators.
#[derive(Clone)]
struct Tracked {
    poly: Poly,
    rep: Vec<Poly>,
}

impl Tracked {
    fn monic(mut self) -> Tracked {
        let lc = self
            .poly
            .leading()
            .map(|(_, c)| c.clone())
            .expect("monic of zero");
        if !lc.is_one() {
            let inv = lc.recip();
            self.poly = self.poly.scale(&inv);
            for r in &mut self.rep {
                *r = r.scale(&inv);
            }
        }
        self
    }
}

fn rep_combine(rep: &mut [Poly], quots: &[Poly], sources: &[Tracked]) {
    for (q, src) in quots.iter().zip(sources) {
        if q.is_zero() {
            continue;
        }
        for (slot, s) in rep.iter_mut().zip(&src.rep) {
            *slot = slot.sub(&q.mul(s));
        }
    }
}

impl ConstraintIdeal {
    /// Computes the reduced Gröbner basis of the ideal generated by `gens`.
    /// Zero generators are tolerated; an empty ideal behaves as `⟨0⟩` (its
    /// normal form is the identity).
    pub fn new(gens: Vec<Poly>) -> Self {
        let n = gens.len();
        let unit = |j: usize| -> Vec<Poly> {
            (0..n).map(|k| if k == j { Poly::one() } else { Poly::zero() }).collect()
        };

        let mut basis: Vec<Tracked> = gens
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_zero())
            .map(|(j, g)| {
                Tracked {
                    poly: g.clone(),
                    rep: unit(j),
                }
                .monic()
            })
            .collect();

        // Pair queue ordered by lcm of leading monomials (normal selection).
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for i in 0..basis.len() {
            for j in 0..i {
                pairs.push((j, i));
            }
        }

        let lcm_of = |basis: &[Tracked], (i, j): (usize, usize)| -> Monomial {
            let (mi, _) = basis[i].poly.leading().unwrap();
            let (mj, _) = basis[j].poly.leading().unwrap();
            mi.lcm(mj)
        };

        while !pairs.is_empty() {
            // Normal selection: smallest lcm first keeps reductions shallow
            // and the outcome deterministic.
            let best = pairs
                .iter()
                .enumerate()
                .min_by(|(_, &a), (_, &b)| lcm_of(&basis, a).cmp(&lcm_of(&basis, b)))
                .map(|(k, _)| k)
                .unwrap();
            let (i, j) = pairs.swap_remove(best);

            let (mi, ci) = {
                let (m, c) = basis[i].poly.leading().unwrap();
                (m.clone(), c.clone())
            };
            let (mj, cj) = {
                let (m, c) = basis[j].poly.leading().unwrap();
                (m.clone(), c.clone())
            };
            // Buchberger's first criterion: coprime leading monomials reduce
            // to zero, skip the pair.
            if mi.coprime(&mj) {
                continue;
            }
            let lcm = mi.lcm(&mj);
            let ti = mi.div_into(&lcm);
            let tj = mj.div_into(&lcm);
            let spoly = basis[i]
                .poly
                .mul_term(&ti, &ci.recip())
                .sub(&basis[j].poly.mul_term(&tj, &cj.recip()));
            let mut rep: Vec<Poly> = (0..n)
                .map(|k| {
                    basis[i].rep[k]
                        .mul_term(&ti, &ci.recip())
                        .sub(&basis[j].rep[k].mul_term(&tj, &cj.recip()))
                })
                .collect();

            let polys: Vec<Poly> = basis.iter().map(|t| t.poly.clone()).collect();
            let (quots, r) = div_rem(&spoly, &polys);
            if r.is_zero() {
                continue;
            }
            rep_combine(&mut rep, &quots, &basis);
            let new_idx = basis.len();
            basis.push(Tracked { poly: r, rep }.monic());
            for k in 0..new_idx {
                pairs.push((k, new_idx));
            }
        }

        // Minimal basis: drop elements whose leading monomial is divisible by
        // another kept element's leading monomial.
        basis.sort_by(|a, b| {
            a.poly
                .leading()
                .unwrap()
                .0
                .cmp(b.poly.leading().unwrap().0)
        });
        let mut kept: Vec<Tracked> = Vec::new();
        for t in basis {
            let lm = t.poly.leading().unwrap().0.clone();
            if !kept
                .iter()
                .any(|k| k.poly.leading().unwrap().0.divides(&lm))
            {
                kept.push(t);
            }
        }

        // Inter-reduction: replace each element by its normal form modulo the
        // others; leading monomials are untouched by construction.
        let mut reduced: Vec<Tracked> = kept.clone();
        for i in 0..reduced.len() {
            let others: Vec<Poly> = reduced
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, t)| t.poly.clone())
                .collect();
            let sources: Vec<Tracked> = reduced
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, t)| t.clone())
                .collect();
            let (quots, r) = div_rem(&reduced[i].poly.clone(), &others);
            let mut rep = reduced[i].rep.clone();
            rep_combine(&mut rep, &quots, &sources);
            reduced[i] = Tracked { poly: r, rep };
        }
        reduced.sort_by(|a, b| {
            a.poly
                .leading()
                .unwrap()
                .0
                .cmp(b.poly.leading().unwrap().0)
        });

        ConstraintIdeal {
            gens,
            basis: reduced.iter().map(|t| t.poly.clone()).collect(),
            reps: reduced.into_iter().map(|t| t.rep).collect(),
        }
    }

    pub fn generators(&self) -> &[Poly] {
        &self.gens
    }

    /// The reduced monic Gröbner basis, ascending by leading monomial.
    pub fn basis(&self) -> &[Poly] {
        &self.basis
    }

    /// Whether the ideal is the whole ring (a nonzero constant reduces into
    /// the basis). For constraint sets this means the equations are
    /// inconsistent: no point satisfies them.
    pub fn is_trivial(&self) -> bool {
        self.basis.len() == 1 && self.basis[0].is_constant() && !self.basis[0].is_zero()
    }

    /// Unique remainder of `p` modulo the reduced basis. Idempotent and
    /// ℚ-linear; the identity for the empty ideal.
    pub fn normal_form(&self, p: &Poly) -> Poly {
        if self.basis.is_empty() {
            return p.clone();
        }
        div_rem(p, &self.basis).1
    }

    /// Normal form on fractions: reduces numerator and denominator
    /// separately. Fails if the denominator reduces to zero, i.e. vanishes
    /// identically on the constraint surface.
    pub fn normal_form_rat(&self, r: &RatFunc) -> Result<RatFunc, RatFuncError> {
        RatFunc::new(self.normal_form(r.num()), self.normal_form(r.den()))
    }

    pub fn contains(&self, p: &Poly) -> bool {
        self.normal_form(p).is_zero()
    }

    /// Whether `p` vanishes identically on the zero locus of the ideal —
    /// i.e. lies in the radical. Decided by the auxiliary-variable trick:
    /// `p ∈ √I  ⇔  1 ∈ ⟨I, 1 − t·p⟩` for a fresh variable `t`. This is
    /// strictly weaker than [`ConstraintIdeal::contains`]: `x ∉ ⟨x²⟩` but `x`
    /// does vanish wherever `x²` does.
    pub fn vanishes_on_locus(&self, p: &Poly) -> bool {
        if p.is_zero() {
            return true;
        }
        if self.basis.is_empty() {
            return false;
        }
        if self.contains(p) {
            return true;
        }
        // The top jet family is reserved as the auxiliary variable; real
        // systems never allocate 2^16 − 1 multiplier families.
        let t = Poly::var(crate::algebra::vars::Var::Jet {
            family: u16::MAX,
            order: 0,
        });
        let mut gens = self.basis.clone();
        gens.push(Poly::one().sub(&t.mul(p)));
        ConstraintIdeal::new(gens).is_trivial()
    }

    /// Membership certificate: returns `c` with `p = Σ_j c[j] · gens[j]`
    /// exactly, or `None` when `p` is not in the ideal.
    pub fn cofactors(&self, p: &Poly) -> Option<Vec<Poly>> {
        if self.basis.is_empty() {
            return p.is_zero().then(|| vec![Poly::zero(); self.gens.len()]);
        }
        let (quots, rem) = div_rem(p, &self.basis);
        if !rem.is_zero() {
            return None;
        }
        let mut out = vec![Poly::zero(); self.gens.len()];
        for (q, rep) in quots.iter().zip(&self.reps) {
            if q.is_zero() {
                continue;
            }
            for (slot, r) in out.iter_mut().zip(rep) {
                *slot = slot.add(&q.mul(r));
            }
        }
        Some(out)
    }

    /// A new ideal generated by the current generators plus `extra`.
    pub fn augmented(&self, extra: impl IntoIterator<Item = Poly>) -> ConstraintIdeal {
        let mut gens = self.gens.clone();
        gens.extend(extra);
        ConstraintIdeal::new(gens)
    }
}

impl PartialEq for ConstraintIdeal {
    /// Ideal equality: reduced Gröbner bases (monic, same order) are
    /// canonical, so comparing them decides equality of the ideals.
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis
    }
}

impl Eq for ConstraintIdeal {}

/// Convenience: the scalar used by monic scaling. Kept here so callers do not
/// need `num` traits in scope.
pub fn one() -> BigRational {
    BigRational::one()
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
    fn circle() -> Poly {
        x().mul(&x()).add(&y().mul(&y())).sub(&Poly::one())
    }

    #[test]
    fn crossing_lines_reduce_to_coordinate_ideal() {
        let ideal = ConstraintIdeal::new(vec![x().add(&y()), x().sub(&y())]);
        assert_eq!(ideal.basis(), &[y(), x()]);
        assert!(ideal.contains(&x()));
        assert!(ideal.contains(&y()));
        assert!(!ideal.contains(&Poly::one()));
    }

    #[test]
    fn single_irreducible_generator_is_its_own_basis() {
        let ideal = ConstraintIdeal::new(vec![circle()]);
        assert_eq!(ideal.basis(), &[circle()]);
        assert!(!ideal.is_trivial());
    }

    #[test]
    fn unsatisfiable_generators_yield_the_unit_ideal() {
        // xy = 1 forces x ≠ 0, but x² = 0 forces x = 0.
        let ideal = ConstraintIdeal::new(vec![x().mul(&y()).sub(&Poly::one()), x().mul(&x())]);
        assert!(ideal.is_trivial());
        assert!(ideal.contains(&Poly::one()));
    }

    #[test]
    fn normal_form_examples() {
        let ideal = ConstraintIdeal::new(vec![circle()]);
        // A multiple of the generator vanishes.
        assert!(ideal.normal_form(&x().mul(&circle())).is_zero());
        // x² reduces to 1 − y² on the circle.
        assert_eq!(
            ideal.normal_form(&x().mul(&x())),
            Poly::one().sub(&y().mul(&y()))
        );
        // Reduction modulo ⟨y⟩ leaves x alone.
        let axis = ConstraintIdeal::new(vec![y()]);
        assert_eq!(axis.normal_form(&x()), x());
    }

    #[test]
    fn normal_form_is_idempotent_and_linear() {
        let ideal = ConstraintIdeal::new(vec![circle(), x().mul(&y())]);
        let p = x().pow(3).add(&y().pow(2)).sub(&x().scale(&BigRational::new(2.into(), 3.into())));
        let q = y().pow(3).add(&x());
        let nf = |p: &Poly| ideal.normal_form(p);
        assert_eq!(nf(&nf(&p)), nf(&p));
        assert_eq!(nf(&p.add(&q)), nf(&p).add(&nf(&q)));
    }

    #[test]
    fn empty_ideal_is_the_identity() {
        let ideal = ConstraintIdeal::new(vec![]);
        let p = x().pow(2).sub(&y());
        assert_eq!(ideal.normal_form(&p), p);
        assert!(!ideal.is_trivial());
        assert!(ideal.contains(&Poly::zero()));
        assert!(!ideal.contains(&x()));
    }

    #[test]
    fn cofactors_certify_membership_exactly() {
        let gens = vec![circle(), x().mul(&y()).sub(&y())];
        let ideal = ConstraintIdeal::new(gens.clone());
        // Build an element of the ideal with nontrivial structure.
        let p = x()
            .pow(2)
            .mul(&gens[0])
            .add(&y().sub(&Poly::from_int(5)).mul(&gens[1]));
        let cof = ideal.cofactors(&p).expect("member of the ideal");
        let rebuilt = cof
            .iter()
            .zip(&gens)
            .fold(Poly::zero(), |acc, (c, g)| acc.add(&c.mul(g)));
        assert_eq!(rebuilt, p);
        // Non-members get no certificate.
        assert!(ideal.cofactors(&x()).is_none());
    }

    #[test]
    fn radical_membership_sees_through_powers() {
        // x ∉ ⟨x²⟩ as an ideal element, but vanishes on its locus.
        let sq = ConstraintIdeal::new(vec![x().pow(2)]);
        assert!(!sq.contains(&x()));
        assert!(sq.vanishes_on_locus(&x()));
        assert!(sq.vanishes_on_locus(&x().mul(&y())));
        assert!(!sq.vanishes_on_locus(&y()));

        // On the circle, 2x vanishes only at two points, not identically.
        let circ = ConstraintIdeal::new(vec![circle()]);
        assert!(!circ.vanishes_on_locus(&x().scale(&BigRational::from_integer(2.into()))));

        let empty = ConstraintIdeal::new(vec![]);
        assert!(empty.vanishes_on_locus(&Poly::zero()));
        assert!(!empty.vanishes_on_locus(&x()));
    }

    #[test]
    fn membership_survives_augmentation() {
        let ideal = ConstraintIdeal::new(vec![circle()]);
        let bigger = ideal.augmented([y()]);
        assert!(bigger.contains(&y()));
        assert!(bigger.contains(&circle()));
        // x² − 1 = circle − y² is in the augmented ideal.
        assert!(bigger.contains(&x().mul(&x()).sub(&Poly::one())));
        assert!(!ideal.contains(&y()));
    }
}
