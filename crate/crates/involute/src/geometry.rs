//! Vector fields, multivector fields, and the brackets between them.
//!
//! Vector fields live on phase space; their coefficients are rational
//! functions that may also involve multiplier jets and extension variables,
//! which the phase-space calculus treats as parameters. The jet-extended
//! derivation [`DOperator`] combines the formal jet shift with bracketing
//! against the drift and the multiplier-scaled characteristic fields; it is
//! the backbone of the symmetry synthesis and is memoized per (base field,
//! iteration order) because chains query the same iterates repeatedly.
//!
//! Multivector fields are represented in odd coordinates θ_i (one per phase
//! direction) and the Schouten bracket is computed from right θ-derivatives:
//!
//! ```text
//! A • B = Σ_i (∂ᴿ_{θ_i} A) ∧ (∂_{x^i} B)
//! [A, B] = A • B − (−1)^{(a−1)(b−1)} B • A
//! ```
//!
//! With this sign convention the bracket of two 1-vectors is the Lie bracket,
//! `[P, f]` of a bivector with a scalar is the usual Hamiltonian field map
//! (e.g. `[∂_q∧∂_p, q] = −∂_p`), and `[f, X] = −X(f)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::algebra::ideal::ConstraintIdeal;
use crate::algebra::poly::Poly;
use crate::algebra::ratfunc::RatFunc;
use crate::algebra::vars::VarRegistry;
use crate::linear::{FieldMatrix, LinearError};

/// A vector field `Σ comps[i] ∂_{x^i}` on phase space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorField {
    comps: Vec<RatFunc>,
}

impl VectorField {
    pub fn new(comps: Vec<RatFunc>) -> Self {
        VectorField { comps }
    }

    pub fn from_polys(comps: Vec<Poly>) -> Self {
        VectorField {
            comps: comps.into_iter().map(RatFunc::from_poly).collect(),
        }
    }

    pub fn zero(dim: usize) -> Self {
        VectorField {
            comps: vec![RatFunc::zero(); dim],
        }
    }

    /// The coordinate field ∂_{x^i}.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut comps = vec![RatFunc::zero(); dim];
        comps[i] = RatFunc::one();
        VectorField { comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[RatFunc] {
        &self.comps
    }

    pub fn comp(&self, i: usize) -> &RatFunc {
        &self.comps[i]
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(RatFunc::is_zero)
    }

    /// Componentwise zero test modulo an ideal.
    pub fn is_zero_mod(&self, ideal: &ConstraintIdeal) -> bool {
        self.comps
            .iter()
            .all(|c| ideal.normal_form(c.num()).is_zero())
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn neg(&self) -> VectorField {
        VectorField {
            comps: self.comps.iter().map(RatFunc::neg).collect(),
        }
    }

    pub fn scale(&self, c: &RatFunc) -> VectorField {
        VectorField {
            comps: self.comps.iter().map(|a| a.mul(c)).collect(),
        }
    }

    /// Directional derivative: `(self)(f) = Σ_i comps[i] · ∂_{x^i} f`.
    pub fn apply(&self, f: &RatFunc, reg: &VarRegistry) -> RatFunc {
        let mut out = RatFunc::zero();
        for (i, c) in self.comps.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            out = out.add(&c.mul(&f.diff_phase(i as u16, reg)));
        }
        out
    }

    /// Directional derivative of a polynomial; the result is rational when
    /// the field has rational coefficients.
    pub fn apply_poly(&self, f: &Poly, reg: &VarRegistry) -> RatFunc {
        self.apply(&RatFunc::from_poly(f.clone()), reg)
    }

    /// Lie bracket `[self, other] = self∘other − other∘self` as fields.
    pub fn lie_bracket(&self, other: &VectorField, reg: &VarRegistry) -> VectorField {
        let dim = self.comps.len();
        let mut comps = Vec::with_capacity(dim);
        for i in 0..dim {
            let forward = self.apply(&other.comps[i], reg);
            let backward = other.apply(&self.comps[i], reg);
            comps.push(forward.sub(&backward));
        }
        VectorField { comps }
    }

    /// Applies the formal jet shift to every coefficient.
    pub fn jet_shift(&self) -> VectorField {
        VectorField {
            comps: self.comps.iter().map(RatFunc::jet_shift).collect(),
        }
    }

    /// Componentwise normal form. Fails if a coefficient denominator
    /// vanishes on the surface.
    pub fn normal_form(
        &self,
        ideal: &ConstraintIdeal,
    ) -> Result<VectorField, crate::algebra::ratfunc::RatFuncError> {
        Ok(VectorField {
            comps: self
                .comps
                .iter()
                .map(|c| ideal.normal_form_rat(c))
                .collect::<Result<_, _>>()?,
        })
    }

    /// Nonzero components as `(coordinate name, coefficient)` pairs, in
    /// coordinate order — the canonical serialized form.
    pub fn render_components(&self, reg: &VarRegistry) -> Vec<(String, String)> {
        self.comps
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (reg.phase_names()[i].clone(), c.render(reg)))
            .collect()
    }

    pub fn eval(&self, reg: &VarRegistry, phase: &[f64], jet: &dyn Fn(u16, u16) -> f64) -> Vec<f64> {
        self.comps
            .iter()
            .map(|c| c.eval(reg, phase, jet))
            .collect()
    }
}

/// The jet-extended derivation
/// `D w = −∂w − [V, w] − Σ_α λ^α [Z_α, w]`,
/// where `∂` shifts every jet variable up one order inside the coefficients
/// of `w`. Iterates `D^m` of a fixed base family are memoized.
pub struct DOperator {
    v: VectorField,
    z: Vec<VectorField>,
    reg: Arc<VarRegistry>,
    base: Vec<VectorField>,
    cache: Mutex<HashMap<(usize, u32), Arc<VectorField>>>,
}

impl DOperator {
    /// `v` is the drift, `z` the characteristic fields (family α scaled by
    /// the order-0 jet `λ^α`), `base` the fields whose iterates will be
    /// requested.
    pub fn new(
        v: VectorField,
        z: Vec<VectorField>,
        base: Vec<VectorField>,
        reg: Arc<VarRegistry>,
    ) -> Self {
        DOperator {
            v,
            z,
            reg,
            base,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn base_len(&self) -> usize {
        self.base.len()
    }

    /// One application of `D` to an arbitrary field.
    pub fn apply(&self, w: &VectorField) -> VectorField {
        let mut out = w.jet_shift().neg();
        out = out.sub(&self.v.lie_bracket(w, &self.reg));
        for (alpha, z) in self.z.iter().enumerate() {
            let lam = RatFunc::from_poly(Poly::var(crate::algebra::vars::Var::Jet {
                family: alpha as u16,
                order: 0,
            }));
            out = out.sub(&z.lie_bracket(w, &self.reg).scale(&lam));
        }
        out
    }

    /// `D^m` applied to base field `idx`, memoized per `(idx, m)`.
    pub fn iterate(&self, idx: usize, m: u32) -> Arc<VectorField> {
        if m == 0 {
            return Arc::new(self.base[idx].clone());
        }
        if let Some(hit) = self.cache.lock().unwrap().get(&(idx, m)) {
            return hit.clone();
        }
        let prev = self.iterate(idx, m - 1);
        let next = Arc::new(self.apply(&prev));
        self.cache
            .lock()
            .unwrap()
            .insert((idx, m), next.clone());
        next
    }
}

/// A multivector field of homogeneous degree, written in odd coordinates:
/// `Σ comps[{i₁<…<i_k}] θ_{i₁}⋯θ_{i_k}`. Degree 0 is a scalar, degree 1 a
/// vector field, degree 2 a bivector, and so on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiVector {
    degree: usize,
    comps: std::collections::BTreeMap<Vec<u16>, RatFunc>,
}

impl MultiVector {
    pub fn zero(degree: usize) -> Self {
        MultiVector {
            degree,
            comps: std::collections::BTreeMap::new(),
        }
    }

    pub fn scalar(f: RatFunc) -> Self {
        let mut mv = MultiVector::zero(0);
        mv.insert(vec![], f);
        mv
    }

    pub fn from_field(v: &VectorField) -> Self {
        let mut mv = MultiVector::zero(1);
        for (i, c) in v.comps().iter().enumerate() {
            mv.insert(vec![i as u16], c.clone());
        }
        mv
    }

    /// Builds a bivector from `(i, j, coefficient)` triples meaning
    /// `coefficient · ∂_i ∧ ∂_j`.
    pub fn bivector(pairs: impl IntoIterator<Item = (u16, u16, RatFunc)>) -> Self {
        let mut mv = MultiVector::zero(2);
        for (i, j, c) in pairs {
            assert_ne!(i, j, "degenerate bivector index pair");
            if i < j {
                mv.insert(vec![i, j], c);
            } else {
                mv.insert(vec![j, i], c.neg());
            }
        }
        mv
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn comps(&self) -> impl Iterator<Item = (&Vec<u16>, &RatFunc)> {
        self.comps.iter()
    }

    pub fn coefficient(&self, indices: &[u16]) -> RatFunc {
        self.comps
            .get(indices)
            .cloned()
            .unwrap_or_else(RatFunc::zero)
    }

    /// The vector field a degree-1 multivector is.
    pub fn as_field(&self, dim: usize) -> Option<VectorField> {
        if self.degree != 1 {
            return None;
        }
        let mut comps = vec![RatFunc::zero(); dim];
        for (idx, c) in &self.comps {
            comps[idx[0] as usize] = c.clone();
        }
        Some(VectorField::new(comps))
    }

    fn insert(&mut self, indices: Vec<u16>, c: RatFunc) {
        debug_assert_eq!(indices.len(), self.degree);
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        if c.is_zero() {
            return;
        }
        match self.comps.entry(indices) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let sum = e.get().add(&c);
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &MultiVector) -> MultiVector {
        assert_eq!(self.degree, other.degree, "degree mismatch in sum");
        let mut out = self.clone();
        for (idx, c) in &other.comps {
            out.insert(idx.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &MultiVector) -> MultiVector {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> MultiVector {
        MultiVector {
            degree: self.degree,
            comps: self
                .comps
                .iter()
                .map(|(i, c)| (i.clone(), c.neg()))
                .collect(),
        }
    }

    pub fn scale(&self, f: &RatFunc) -> MultiVector {
        let mut out = MultiVector::zero(self.degree);
        for (idx, c) in &self.comps {
            out.insert(idx.clone(), c.mul(f));
        }
        out
    }

    /// Wedge product; repeated indices annihilate.
    pub fn wedge(&self, other: &MultiVector) -> MultiVector {
        let mut out = MultiVector::zero(self.degree + other.degree);
        for (ia, ca) in &self.comps {
            for (ib, cb) in &other.comps {
                if let Some((merged, sign)) = merge_indices(ia, ib) {
                    let c = if sign { ca.mul(cb).neg() } else { ca.mul(cb) };
                    out.insert(merged, c);
                }
            }
        }
        out
    }

    /// Half-bracket `A • B = Σ_i (∂ᴿ_{θ_i} A) ∧ (∂_{x^i} B)`.
    fn half_bracket(&self, other: &MultiVector, reg: &VarRegistry) -> MultiVector {
        let out_deg = (self.degree + other.degree).saturating_sub(1);
        let mut out = MultiVector::zero(out_deg);
        if self.degree == 0 {
            return out;
        }
        for (ia, ca) in &self.comps {
            // Right θ-derivative of θ_{j₁}⋯θ_{j_k} with respect to θ_{j_p}
            // (1-indexed p) carries sign (−1)^{k−p}.
            for (p, &i) in ia.iter().enumerate() {
                let sign_neg = (ia.len() - 1 - p) % 2 == 1;
                let reduced: Vec<u16> = ia
                    .iter()
                    .enumerate()
                    .filter(|&(q, _)| q != p)
                    .map(|(_, &v)| v)
                    .collect();
                let da = MultiVector {
                    degree: self.degree - 1,
                    comps: std::iter::once((
                        reduced,
                        if sign_neg { ca.neg() } else { ca.clone() },
                    ))
                    .collect(),
                };
                let db = other.diff_phase(i, reg);
                out = out.add(&da.wedge(&db));
            }
        }
        out
    }

    /// Coefficientwise phase derivative (θ's untouched).
    fn diff_phase(&self, i: u16, reg: &VarRegistry) -> MultiVector {
        let mut out = MultiVector::zero(self.degree);
        for (idx, c) in &self.comps {
            out.insert(idx.clone(), c.diff_phase(i, reg));
        }
        out
    }

    /// Componentwise normal form modulo an ideal.
    pub fn normal_form(
        &self,
        ideal: &ConstraintIdeal,
    ) -> Result<MultiVector, crate::algebra::ratfunc::RatFuncError> {
        let mut out = MultiVector::zero(self.degree);
        for (idx, c) in &self.comps {
            out.insert(idx.clone(), ideal.normal_form_rat(c)?);
        }
        Ok(out)
    }
}

/// Merges two strictly ascending index tuples, returning the merged tuple and
/// whether the permutation sign is negative; `None` if an index repeats.
fn merge_indices(a: &[u16], b: &[u16]) -> Option<(Vec<u16>, bool)> {
    let mut merged = Vec::with_capacity(a.len() + b.len());
    let mut inversions = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => return None,
            (Some(&x), Some(&y)) if x < y => {
                merged.push(x);
                i += 1;
            }
            (Some(_), Some(&y)) => {
                // y jumps over the remaining elements of a.
                inversions += a.len() - i;
                merged.push(y);
                j += 1;
            }
            (Some(&x), None) => {
                merged.push(x);
                i += 1;
            }
            (None, Some(&y)) => {
                merged.push(y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    Some((merged, inversions % 2 == 1))
}

/// The Schouten bracket
/// `[A, B] = A • B − (−1)^{(a−1)(b−1)} B • A`
/// of homogeneous multivectors of degrees `a` and `b`; the result has degree
/// `a + b − 1`. On degree-(1,1) arguments this is the Lie bracket.
pub fn schouten(a: &MultiVector, b: &MultiVector, reg: &VarRegistry) -> MultiVector {
    let ab = a.half_bracket(b, reg);
    let ba = b.half_bracket(a, reg);
    let sign_neg = ((a.degree() as i64 - 1) * (b.degree() as i64 - 1)).rem_euclid(2) == 1;
    if sign_neg {
        ab.add(&ba)
    } else {
        ab.sub(&ba)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClosureError {
    #[error("bracket closure did not settle within {rounds} generations")]
    Unsettled { rounds: usize },
    #[error(transparent)]
    Linear(#[from] crate::linear::LinearError),
}

/// The bracket closure of a family of vector fields, kept as a flag graded by
/// bracket depth.
///
/// The closure works on *exact* representatives, never on residue classes
/// modulo the quotient ideal: bracketing is not well-defined on classes. With
/// `h` in the ideal, `[u, h·w] = h[u,w] + (u h)·w`, and `u h` need not stay in
/// the ideal — a field vanishing identically on the surface can still open up
/// new directions under bracketing (take `u = ∂_p`, `h·w = p ∂_q` on the
/// surface `q = p = 0`). The quotient enters only the span bookkeeping that
/// `basis` and `growth` report.
#[derive(Debug, Clone)]
pub struct LieFlag {
    /// Every field the closure bracketed: seeds first, then partners, then
    /// admissions in generation order.
    pub elements: Vec<VectorField>,
    /// Parallel to `elements`: `true` for fields belonging to the closure
    /// itself (seeds, and brackets that enlarged the span), `false` for
    /// bracket sources carried along without enlarging it — the partners,
    /// and brackets whose components all reduce to zero on the surface.
    pub members: Vec<bool>,
    /// Bracket generation at which each element appeared; seeds and partners
    /// sit at generation 0.
    pub depths: Vec<usize>,
    /// Indices into `elements` of a basis of the members' span over the
    /// coefficient field (modulo the quotient when one is given), selected
    /// greedily from the front.
    pub basis: Vec<usize>,
    /// Span dimension after each generation, starting with the seeds alone.
    pub growth: Vec<usize>,
}

impl LieFlag {
    /// Span dimension of the closure (over the quotient field when one was
    /// given).
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// The member fields themselves, seeds included.
    pub fn members(&self) -> impl Iterator<Item = &VectorField> {
        self.elements
            .iter()
            .zip(&self.members)
            .filter(|(_, m)| **m)
            .map(|(e, _)| e)
    }
}

/// Closes `seeds` under the Lie bracket, also bracketing against `partners`
/// without counting them as closure members. A bracket is admitted as a new
/// member when it enlarges the span of the current members over the
/// coefficient field (modulo `quotient` if given); a bracket that reduces to
/// zero on the surface without being a rational multiple of a field already
/// listed is kept as a further bracket source, since its own brackets can
/// still leave the ideal. Generations are capped by the ambient dimension
/// plus the largest component degree in sight — rank growth bounds the
/// member admissions, and each surviving source bracket strips polynomial
/// degree, so honest inputs settle well within the cap.
pub fn lie_closure(
    seeds: &[VectorField],
    partners: &[VectorField],
    reg: &VarRegistry,
    quotient: Option<Arc<ConstraintIdeal>>,
) -> Result<LieFlag, ClosureError> {
    let dim = seeds
        .iter()
        .chain(partners)
        .map(VectorField::dim)
        .next()
        .unwrap_or(0);

    let mut elements: Vec<VectorField> = Vec::new();
    let mut members: Vec<bool> = Vec::new();
    let mut depths: Vec<usize> = Vec::new();
    for s in seeds {
        elements.push(s.clone());
        members.push(true);
        depths.push(0);
    }
    for p in partners {
        elements.push(p.clone());
        members.push(false);
        depths.push(0);
    }

    let class_zero = |f: &VectorField| match &quotient {
        Some(ideal) => f.is_zero_mod(ideal),
        None => f.is_zero(),
    };
    let mut basis: Vec<usize> = Vec::new();
    let mut basis_vecs: Vec<Vec<RatFunc>> = Vec::new();
    let extend_basis = |idx: usize,
                            field: &VectorField,
                            basis: &mut Vec<usize>,
                            basis_vecs: &mut Vec<Vec<RatFunc>>|
     -> Result<bool, LinearError> {
        if class_zero(field) {
            return Ok(false);
        }
        let target = field.comps().to_vec();
        let known = FieldMatrix::span_membership(&target, basis_vecs, quotient.clone())?;
        if known.is_some() {
            return Ok(false);
        }
        basis.push(idx);
        basis_vecs.push(target);
        Ok(true)
    };

    for idx in 0..elements.len() {
        if members[idx] {
            let f = elements[idx].clone();
            extend_basis(idx, &f, &mut basis, &mut basis_vecs)?;
        }
    }
    let mut growth = vec![basis.len()];

    let degree_budget = elements
        .iter()
        .flat_map(|f| f.comps())
        .filter_map(|c| c.num().total_degree())
        .max()
        .unwrap_or(0) as usize;
    let cap = dim + degree_budget + 2;

    let proportional = |a: &VectorField, b: &VectorField| -> bool {
        let n = a.dim();
        for i in 0..n {
            for j in i + 1..n {
                let minor = a.comp(i).mul(b.comp(j)).sub(&a.comp(j).mul(b.comp(i)));
                if !minor.is_zero() {
                    return false;
                }
            }
        }
        true
    };

    let mut generation = 0usize;
    let mut fresh_from = 0usize;
    loop {
        generation += 1;
        let admitted_before = elements.len();
        let mut found = Vec::new();
        for i in 0..admitted_before {
            for j in (i + 1).max(fresh_from)..admitted_before {
                let b = elements[i].lie_bracket(&elements[j], reg);
                if b.is_zero() {
                    continue;
                }
                found.push(b);
            }
        }
        fresh_from = admitted_before;
        let mut admitted_any = false;
        for b in found {
            if extend_basis(elements.len(), &b, &mut basis, &mut basis_vecs)? {
                elements.push(b);
                members.push(true);
                depths.push(generation);
                admitted_any = true;
            } else if class_zero(&b) && !elements.iter().any(|e| proportional(e, &b)) {
                elements.push(b);
                members.push(false);
                depths.push(generation);
                admitted_any = true;
            }
        }
        if !admitted_any {
            break;
        }
        growth.push(basis.len());
        if generation > cap {
            return Err(ClosureError::Unsettled { rounds: generation });
        }
    }

    Ok(LieFlag {
        elements,
        members,
        depths,
        basis,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::vars::Var;

    fn reg2() -> Arc<VarRegistry> {
        Arc::new(VarRegistry::new(vec!["q", "p"], vec!["lam"]).unwrap())
    }

    fn rf(p: Poly) -> RatFunc {
        RatFunc::from_poly(p)
    }
    fn q() -> Poly {
        Poly::var(Var::Phase(0))
    }
    fn p() -> Poly {
        Poly::var(Var::Phase(1))
    }

    #[test]
    fn lie_bracket_of_coordinate_fields() {
        let reg = reg2();
        // [∂_p, p ∂_q] = ∂_q.
        let a = VectorField::unit(2, 1);
        let b = VectorField::new(vec![rf(p()), RatFunc::zero()]);
        assert_eq!(a.lie_bracket(&b, &reg), VectorField::unit(2, 0));
        // Antisymmetry.
        assert_eq!(b.lie_bracket(&a, &reg), VectorField::unit(2, 0).neg());
    }

    #[test]
    fn jacobi_identity_on_polynomial_fields() {
        let reg = reg2();
        let a = VectorField::new(vec![rf(p()), rf(q().mul(&q()))]);
        let b = VectorField::new(vec![rf(q().mul(&p())), RatFunc::one()]);
        let c = VectorField::new(vec![RatFunc::zero(), rf(p().mul(&p()))]);
        let jac = a
            .lie_bracket(&b.lie_bracket(&c, &reg), &reg)
            .add(&b.lie_bracket(&c.lie_bracket(&a, &reg), &reg))
            .add(&c.lie_bracket(&a.lie_bracket(&b, &reg), &reg));
        assert!(jac.is_zero());
    }

    #[test]
    fn d_operator_on_multiplier_free_fields() {
        let reg = reg2();
        // V = p∂_q, Z = ∂_p. Then D∂_q = −[V,∂_q] − λ[Z,∂_q] = 0,
        // D∂_p = −[V,∂_p] = ∂_q (since [V,∂_p] = −∂_q).
        let v = VectorField::new(vec![rf(p()), RatFunc::zero()]);
        let z = VectorField::unit(2, 1);
        let d = DOperator::new(
            v,
            vec![z],
            vec![VectorField::unit(2, 0), VectorField::unit(2, 1)],
            reg.clone(),
        );
        assert!(d.iterate(0, 1).is_zero());
        assert_eq!(*d.iterate(1, 1), VectorField::unit(2, 0));
        // Memoized iterate equals direct application.
        assert_eq!(*d.iterate(1, 2), d.apply(&d.iterate(1, 1)));
    }

    #[test]
    fn d_operator_sees_jet_coefficients() {
        let reg = reg2();
        // w = λ ∂_q with V = 0, Z = 0: Dw = −λ₁ ∂_q.
        let lam = |k| rf(Poly::var(Var::Jet { family: 0, order: k }));
        let w = VectorField::new(vec![lam(0), RatFunc::zero()]);
        let d = DOperator::new(
            VectorField::zero(2),
            vec![VectorField::zero(2)],
            vec![w.clone()],
            reg,
        );
        let dw = d.iterate(0, 1);
        assert_eq!(
            *dw,
            VectorField::new(vec![lam(1).neg(), RatFunc::zero()])
        );
    }

    #[test]
    fn schouten_degree_one_pair_is_lie_bracket() {
        let reg = reg2();
        let a = VectorField::new(vec![rf(p()), rf(q())]);
        let b = VectorField::new(vec![rf(q().mul(&q())), RatFunc::one()]);
        let lhs = schouten(&MultiVector::from_field(&a), &MultiVector::from_field(&b), &reg);
        assert_eq!(lhs, MultiVector::from_field(&a.lie_bracket(&b, &reg)));
    }

    #[test]
    fn schouten_bivector_with_scalar_is_hamiltonian_map() {
        let reg = reg2();
        let pois = MultiVector::bivector([(0, 1, RatFunc::one())]);
        // [∂_q∧∂_p, q] = −∂_p: the pinned sign convention.
        let got = schouten(&pois, &MultiVector::scalar(rf(q())), &reg);
        assert_eq!(got, MultiVector::from_field(&VectorField::unit(2, 1).neg()));
        // Oscillator Hamiltonian gives the rotation field p∂_q − q∂_p.
        let h = rf(q().mul(&q()).add(&p().mul(&p())))
            .scale(&num::BigRational::new(1.into(), 2.into()));
        let v = schouten(&pois, &MultiVector::scalar(h), &reg);
        let expect = VectorField::new(vec![rf(p()), rf(q().neg())]);
        assert_eq!(v, MultiVector::from_field(&expect));
    }

    #[test]
    fn schouten_scalar_with_field_is_negated_application() {
        let reg = reg2();
        let f = rf(q().mul(&p()));
        let x = VectorField::new(vec![rf(p()), rf(q())]);
        let got = schouten(&MultiVector::scalar(f.clone()), &MultiVector::from_field(&x), &reg);
        let expect = x.apply(&f, &reg).neg();
        assert_eq!(got, MultiVector::scalar(expect));
    }

    #[test]
    fn constant_bivector_self_bracket_vanishes() {
        let reg = reg2();
        let pois = MultiVector::bivector([(0, 1, RatFunc::one())]);
        let self_bracket = schouten(&pois, &pois, &reg);
        assert!(self_bracket.is_zero());
        assert_eq!(self_bracket.degree(), 3);
    }

    #[test]
    fn graded_antisymmetry_and_jacobi_on_low_degrees() {
        let reg = reg2();
        // Degree-(1,1): [A,B] = −[B,A] (sign (−1)^{(a−1)(b−1)} = +1 → swap
        // negates). Degree-(2,1): [P,X] = +[X,P] after the graded sign.
        let a = MultiVector::from_field(&VectorField::new(vec![rf(p().mul(&p())), rf(q())]));
        let b = MultiVector::from_field(&VectorField::new(vec![rf(q()), RatFunc::one()]));
        let pois = MultiVector::bivector([(0, 1, rf(q()))]);
        let ab = schouten(&a, &b, &reg);
        let ba = schouten(&b, &a, &reg);
        assert_eq!(ab, ba.neg());
        let px = schouten(&pois, &a, &reg);
        let xp = schouten(&a, &pois, &reg);
        // (a−1)(b−1) = 0 when one argument has degree 1: [A,B] = −(−1)^0[B,A].
        assert_eq!(px, xp.neg());

        // Graded Jacobi with degrees (2,1,1):
        // [P,[A,B]] = [[P,A],B] + (−1)^{(p−1)(a−1)}[A,[P,B]] with p=2, a=1.
        let lhs = schouten(&pois, &schouten(&a, &b, &reg), &reg);
        let rhs = schouten(&schouten(&pois, &a, &reg), &b, &reg)
            .add(&schouten(&a, &schouten(&pois, &b, &reg), &reg));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn wedge_is_graded_commutative_with_annihilation() {
        let reg3 = Arc::new(VarRegistry::new(vec!["a", "b", "c"], vec![]).unwrap());
        let _ = &reg3;
        let x = MultiVector::from_field(&VectorField::unit(3, 0));
        let y = MultiVector::from_field(&VectorField::unit(3, 1));
        let xy = x.wedge(&y);
        assert_eq!(xy.coefficient(&[0, 1]), RatFunc::one());
        // θ-odd degree 1: y∧x = −x∧y; x∧x = 0.
        assert_eq!(y.wedge(&x), xy.neg());
        assert!(x.wedge(&x).is_zero());
    }

    #[test]
    fn closure_recovers_directions_hidden_by_the_surface() {
        let reg = reg2();
        let ideal = Arc::new(ConstraintIdeal::new(vec![q(), p()]));
        // p∂_q vanishes identically on q = p = 0, yet [∂_p, p∂_q] = ∂_q
        // does not — the closure must bracket exact representatives.
        let seeds = vec![
            VectorField::unit(2, 1),
            VectorField::new(vec![rf(p()), RatFunc::zero()]),
        ];
        let flag = lie_closure(&seeds, &[], &reg, Some(ideal)).unwrap();
        assert_eq!(flag.growth, vec![1, 2]);
        assert_eq!(flag.dim(), 2);
        let last = flag.elements.last().unwrap();
        assert_eq!(*last, VectorField::unit(2, 0));
        assert_eq!(*flag.depths.last().unwrap(), 1);
    }

    #[test]
    fn closure_skips_brackets_proportional_to_a_partner() {
        // Phase (X, Y, p_X, p_Y) with u = exp(−Y):
        // V = u p_X ∂_X + ½ u p_X² ∂_{p_Y} satisfies [∂_Y, V] = −V, which is
        // zero on the surface and a multiple of V itself — the closure stays
        // one-dimensional with no extra elements retained.
        let reg = Arc::new(
            VarRegistry::new(vec!["X", "Y", "p_X", "p_Y"], vec!["lam"])
                .unwrap()
                .with_ext_var("u", Poly::var(Var::Phase(1)).neg())
                .unwrap(),
        );
        let u = reg.resolve("u").unwrap();
        let px = Poly::var(Var::Phase(2));
        let upx = Poly::var(u).mul(&px);
        let drift = VectorField::new(vec![
            rf(upx.clone()),
            RatFunc::zero(),
            RatFunc::zero(),
            rf(upx.mul(&px).scale(&num::BigRational::new(1.into(), 2.into()))),
        ]);
        let ideal = Arc::new(ConstraintIdeal::new(vec![
            Poly::var(Var::Phase(3)),
            px.clone(),
        ]));
        let flag = lie_closure(
            &[VectorField::unit(4, 1)],
            &[drift],
            &reg,
            Some(ideal),
        )
        .unwrap();
        assert_eq!(flag.elements.len(), 2);
        assert_eq!(flag.growth, vec![1]);
        assert_eq!(flag.dim(), 1);
        assert!(flag.members[0] && !flag.members[1]);
    }

    #[test]
    fn closure_of_commuting_frame_is_the_frame() {
        let reg3 = Arc::new(VarRegistry::new(vec!["a", "b", "c"], vec![]).unwrap());
        let seeds: Vec<_> = (0..3).map(|i| VectorField::unit(3, i)).collect();
        let flag = lie_closure(&seeds, &[], &reg3, None).unwrap();
        assert_eq!(flag.elements.len(), 3);
        assert_eq!(flag.growth, vec![3]);
    }
}
