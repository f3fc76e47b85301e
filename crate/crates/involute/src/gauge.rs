//! Gauge structure of a complete normal form: the distribution swept out by
//! the surviving tangential fields, its degree filtration, and the synthesis
//! and verification of the higher-derivative symmetries it generates.
//!
//! Everything here happens over the residue field of the complete constraint
//! ideal. Three layers build on each other:
//!
//! * [`gauge_distribution`] closes the tangential frame under brackets with
//!   itself and the complete drift, records the growth of the flag, and
//!   certifies that each closure direction already lies in the span of the
//!   jet-derivation images of the frame — so no symmetry directions are lost
//!   to bracketing.
//! * [`degree_filtration`] grades the 𝓕-span of the tangential frame by the
//!   smallest `p` for which the `p`-th derivation image of a combination
//!   falls back into the span of lower images. The graded pieces are found
//!   by exact linear algebra: candidates are rational combinations of the
//!   frame fields scaled by multiplier jets (the jet window grows lazily
//!   with the degree, capped by a budget), and the membership conditions are
//!   ℚ-linear because the derivation treats rational constants as scalars.
//! * [`synthesize_generator`] turns a graded combination of degree `p` into
//!   a parametrized symmetry: a chain `w₁ … w_p` of frame combinations with
//!   `D^p w + D^{p−1} w₁ + ⋯ + w_p ≡ 0`, the velocity coefficients
//!   `R_(n) = Σ_m D^m W_(n−m)`, and the multiplier coefficients `U_(n)`. A
//!   binomial ansatz `w_k = C(p,k)·∂^k w` is tried first — it is exact for
//!   frames whose bracket defects cancel against the jet shift — and a
//!   deterministic layer-by-layer descent covers everything else.
//!
//! [`verify_symmetry`] substitutes a generator back into the varied equation
//! of motion and the constraints and reports every non-vanishing residual
//! instead of failing, so a corrupted generator is diagnosed, not crashed on.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::rational::BigRational;
use num::{One, Zero};

use crate::algebra::ideal::ConstraintIdeal;
use crate::algebra::poly::{Monomial, Poly};
use crate::algebra::ratfunc::{RatFunc, RatFuncError};
use crate::algebra::vars::{Var, VarRegistry};
use crate::exec;
use crate::geometry::{lie_closure, ClosureError, DOperator, LieFlag, VectorField};
use crate::linear::{FieldMatrix, LinearError};
use crate::stabilization::CompleteNormalForm;

#[derive(Debug, thiserror::Error)]
pub enum GaugeError {
    #[error(
        "filtration overflow: the degree ladder passed {limit} with only {found} of {expected} graded directions"
    )]
    FiltrationOverflow {
        limit: u32,
        found: usize,
        expected: usize,
    },
    #[error("stale degree certificate: {detail}")]
    StaleCertificate { detail: String },
    #[error("denominator clearing failed: the common denominator {lcd} vanishes on the constraint surface")]
    DenominatorClearing { lcd: String },
    #[error("derivation span misses distribution direction {element}")]
    SpanDeficit { element: usize },
    #[error("dependent symmetry directions: joint velocity-coefficient rank {got}, expected {expected}")]
    DependentSymmetries { got: usize, expected: usize },
    #[error(transparent)]
    Closure(#[from] ClosureError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    RatFunc(#[from] RatFuncError),
}

/// The bracket closure of the tangential frame, with its flag data, the
/// degree filtration of the frame's jet span, and one span certificate per
/// closure direction.
#[derive(Debug, Clone)]
pub struct GaugeDistribution {
    /// Independent directions of the closure, tangential frame first.
    pub basis: Vec<VectorField>,
    /// Dimensions of the flag after each bracket generation.
    pub growth: Vec<usize>,
    pub depth: usize,
    pub filtration: DegreeFiltration,
    pub closure_witnesses: Vec<SpanWitness>,
}

/// Coefficients expressing one closure direction inside the span of the
/// derivation images `D^j Z_α` of the tangential frame, `j ≤ order`,
/// flattened in `(j, α)` order.
#[derive(Debug, Clone)]
pub struct SpanWitness {
    /// Index into the distribution basis.
    pub element: usize,
    /// Highest derivation order the certificate uses.
    pub order: u32,
    pub coefficients: Vec<RatFunc>,
}

/// The degree grading of the tangential frame's span: `layers[i]` holds an
/// independent set of combinations whose degree is exactly `layers[i].degree`.
/// The layer sizes sum to the frame dimension when the filtration is
/// complete.
#[derive(Debug, Clone)]
pub struct DegreeFiltration {
    pub layers: Vec<FiltrationLayer>,
    /// Jet-order budget the search ran under.
    pub budget: u16,
}

#[derive(Debug, Clone)]
pub struct FiltrationLayer {
    pub degree: u32,
    pub generators: Vec<VectorField>,
}

impl DegreeFiltration {
    /// Layer sizes `(δ_1, δ_2, …)` up to the last non-empty layer.
    pub fn indices(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.generators.len()).collect()
    }

    pub fn total(&self) -> usize {
        self.layers.iter().map(|l| l.generators.len()).sum()
    }

    /// Every graded generator with its degree, in ascending degree order.
    pub fn seeds(&self) -> impl Iterator<Item = (u32, &VectorField)> {
        self.layers
            .iter()
            .flat_map(|l| l.generators.iter().map(move |g| (l.degree, g)))
    }
}

/// One gauge symmetry of order `p`, acting with a free parameter ε and its
/// first `p` time derivatives:
///
/// ```text
/// δx   = Σ_{n=0}^{p−1} R_(p−1−n) · ε⁽ⁿ⁾
/// δλ^α = Σ_{n=0}^{p}   U_(p−n)^α · ε⁽ⁿ⁾
/// ```
#[derive(Debug, Clone)]
pub struct GaugeGenerator {
    /// Degree `p` of the seed: the order of the highest ε-derivative that
    /// enters the multiplier variation.
    pub order: u32,
    /// The seed `w = R_(0)`, denominators cleared.
    pub seed: VectorField,
    /// The chain `w₁ … w_p` certifying `Σ_k D^{p−k} w_k ≡ 0` (with `w₀ = w`).
    pub chain: Vec<VectorField>,
    /// Velocity coefficients `R_(0) … R_(p−1)`.
    pub r: Vec<VectorField>,
    /// Multiplier coefficients `U_(0) … U_(p)`, each row over the tangential
    /// frame.
    pub u: Vec<Vec<RatFunc>>,
    /// Name of the symmetry parameter.
    pub parameter: String,
    /// Whether every coefficient vanishes on the surface; trivial generators
    /// are excluded from reported bases.
    pub trivial: bool,
}

impl GaugeGenerator {
    /// The variation rows as rendered strings, keyed by target and
    /// ε-derivative order. Zero rows are omitted.
    pub fn variation_table(&self, reg: &VarRegistry) -> Vec<(String, String)> {
        let p = self.order as usize;
        let mut rows = Vec::new();
        for n in 0..p {
            let field = &self.r[p - 1 - n];
            if !field.is_zero() {
                rows.push((
                    format!("delta x / {}^({n})", self.parameter),
                    render_field(field, reg),
                ));
            }
        }
        let names = reg.multiplier_names();
        for n in 0..=p {
            for (beta, name) in names.iter().enumerate() {
                let c = &self.u[p - n][beta];
                if !c.is_zero() {
                    rows.push((
                        format!("delta {name} / {}^({n})", self.parameter),
                        c.render(reg),
                    ));
                }
            }
        }
        rows
    }
}

/// Outcome of substituting a generator into the varied equation of motion
/// and the complete constraints. All residuals are reduced to the surface;
/// an intact generator leaves both lists empty.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub ok: bool,
    /// `(ε-derivative order, non-vanishing coefficient field)` of the varied
    /// equation of motion.
    pub velocity_residuals: Vec<(u32, VectorField)>,
    /// `(ε-derivative order, constraint index, residual)` of the varied
    /// constraints.
    pub constraint_residuals: Vec<(u32, usize, RatFunc)>,
}

fn render_field(f: &VectorField, reg: &VarRegistry) -> String {
    let parts: Vec<String> = f
        .render_components(reg)
        .into_iter()
        .map(|(name, c)| format!("({c}) d/d{name}"))
        .collect();
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" + ")
    }
}

fn jet_rf(family: u16, order: u16) -> RatFunc {
    RatFunc::from_poly(Poly::var(Var::Jet { family, order }))
}

fn binom(p: u32, k: u32) -> BigRational {
    let mut num = BigRational::one();
    for i in 0..k {
        let a = BigRational::from_integer((p - i).into());
        let b = BigRational::from_integer((i + 1).into());
        num = num * a / b;
    }
    num
}

fn rat_const(r: &RatFunc) -> BigRational {
    let num = r
        .num()
        .as_constant()
        .expect("rational elimination keeps entries constant");
    let den = r
        .den()
        .as_constant()
        .expect("rational elimination keeps entries constant");
    num / den
}

/// Row-echelon span over the residue field, with nf-canonical entries and
/// pivots normalized to one. Used for the derivation-span ladder and for
/// counting independent frame combinations.
#[derive(Clone)]
struct Echelon {
    ideal: Arc<ConstraintIdeal>,
    rows: Vec<Vec<RatFunc>>,
    pivots: Vec<usize>,
}

impl Echelon {
    fn new(ideal: Arc<ConstraintIdeal>) -> Self {
        Echelon {
            ideal,
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    fn nf(&self, r: &RatFunc) -> Result<RatFunc, RatFuncError> {
        self.ideal.normal_form_rat(r)
    }

    /// Residual of `v` against the current span, fully reduced.
    fn reduce(&self, v: &[RatFunc]) -> Result<Vec<RatFunc>, RatFuncError> {
        let mut out: Vec<RatFunc> = v.iter().map(|c| self.nf(c)).collect::<Result<_, _>>()?;
        for (row, &pj) in self.rows.iter().zip(&self.pivots) {
            let f = out[pj].clone();
            if f.is_zero() {
                continue;
            }
            for (cell, r) in out.iter_mut().zip(row) {
                *cell = self.nf(&cell.sub(&f.mul(r)))?;
            }
        }
        Ok(out)
    }

    /// Inserts `v` if it extends the span; reports whether it did.
    fn insert(&mut self, v: &[RatFunc]) -> Result<bool, RatFuncError> {
        let red = self.reduce(v)?;
        let Some(pj) = red.iter().position(|c| !c.is_zero()) else {
            return Ok(false);
        };
        let inv = red[pj].recip()?;
        let row: Vec<RatFunc> = red
            .iter()
            .map(|c| self.nf(&c.mul(&inv)))
            .collect::<Result<_, _>>()?;
        self.rows.push(row);
        self.pivots.push(pj);
        Ok(true)
    }

    fn rank(&self) -> usize {
        self.rows.len()
    }
}

/// Row echelon over ℚ for canonicalizing candidate coefficient vectors.
struct QEchelon {
    rows: Vec<Vec<BigRational>>,
    pivots: Vec<usize>,
}

impl QEchelon {
    fn new() -> Self {
        QEchelon {
            rows: Vec::new(),
            pivots: Vec::new(),
        }
    }

    fn reduce(&self, v: &mut [BigRational]) {
        for (row, &pj) in self.rows.iter().zip(&self.pivots) {
            if v[pj].is_zero() {
                continue;
            }
            let f = v[pj].clone();
            for (cell, r) in v.iter_mut().zip(row) {
                *cell = &*cell - &(&f * r);
            }
        }
    }

    /// Inserts an already-reduced vector with a known pivot, normalized so
    /// the pivot entry is one.
    fn insert_reduced(&mut self, mut v: Vec<BigRational>, pivot: usize) {
        let f = v[pivot].clone();
        for cell in v.iter_mut() {
            *cell = &*cell / &f;
        }
        self.rows.push(v);
        self.pivots.push(pivot);
    }
}

/// One candidate in the filtration pool: a frame field, optionally scaled by
/// a single multiplier jet.
struct PoolItem {
    /// `(family, order)` of the scaling jet; `None` is the bare field.
    jet: Option<(u16, u16)>,
    /// Index of the frame field being scaled.
    field: usize,
    vec: VectorField,
}

impl PoolItem {
    /// The candidate's coefficient vector over the frame.
    fn frame_row(&self, m: usize) -> Vec<RatFunc> {
        let mut row = vec![RatFunc::zero(); m];
        row[self.field] = match self.jet {
            Some((family, order)) => jet_rf(family, order),
            None => RatFunc::one(),
        };
        row
    }
}

/// Shared state for the filtration and the chain synthesis: the jet
/// derivation over the complete system, the candidate pool, and the ladder
/// of derivation-image spans, built one level at a time.
struct Engine {
    reg: Arc<VarRegistry>,
    ideal: Arc<ConstraintIdeal>,
    fields: Vec<VectorField>,
    closure: LieFlag,
    dim: usize,
    m: usize,
    /// Jet-order budget for pool candidates.
    budget: u16,
    /// Hard cap on the degree search.
    degree_limit: u32,
    pool: Vec<PoolItem>,
    dop: DOperator,
    /// `spans[q]` spans the derivation images `D^j` of the pool for `j ≤ q`.
    spans: Vec<Echelon>,
}

impl Engine {
    fn new(c: &CompleteNormalForm) -> Result<Engine, GaugeError> {
        let reg = c.spec.registry.clone();
        let ideal = Arc::new(c.spec.ideal());
        let fields = c.spec.char_fields.clone();
        let m = fields.len();
        let dim = c.spec.phase_count();

        let partners: Vec<VectorField> = if c.spec.drift.is_zero() {
            Vec::new()
        } else {
            vec![c.spec.drift.clone()]
        };
        let closure = lie_closure(&fields, &partners, &reg, Some(ideal.clone()))?;
        let depth = if closure.dim() == 0 {
            0
        } else {
            closure.growth.len()
        };
        let budget = (depth + m + 1) as u16;
        let degree_limit = (closure.dim().max(1) * budget as usize) as u32;

        let mut pool: Vec<PoolItem> = Vec::new();
        for (beta, z) in fields.iter().enumerate() {
            pool.push(PoolItem {
                jet: None,
                field: beta,
                vec: z.clone(),
            });
        }
        for k in 0..=budget {
            for gamma in 0..m as u16 {
                for (beta, z) in fields.iter().enumerate() {
                    pool.push(PoolItem {
                        jet: Some((gamma, k)),
                        field: beta,
                        vec: z.scale(&jet_rf(gamma, k)),
                    });
                }
            }
        }

        let dop = DOperator::new(
            c.spec.drift.clone(),
            fields.clone(),
            pool.iter().map(|p| p.vec.clone()).collect(),
            reg.clone(),
        );

        let mut base = Echelon::new(ideal.clone());
        for item in &pool {
            base.insert(item.vec.comps())?;
        }

        Ok(Engine {
            reg,
            ideal,
            fields,
            closure,
            dim,
            m,
            budget,
            degree_limit,
            pool,
            dop,
            spans: vec![base],
        })
    }

    /// Extends the span ladder so `spans[q]` exists.
    fn ensure_span(&mut self, q: usize) -> Result<(), GaugeError> {
        while self.spans.len() <= q {
            let level = self.spans.len() as u32;
            let idx: Vec<usize> = (0..self.pool.len()).collect();
            let imgs = exec::map_vec(&idx, |&i| self.dop.iterate(i, level));
            let mut next = self.spans.last().expect("level zero is seeded").clone();
            for img in &imgs {
                next.insert(img.comps())?;
            }
            self.spans.push(next);
        }
        Ok(())
    }

    /// Minimal `p ≥ 1` with `D^p w` in the span of lower derivation images.
    fn degree_of(&mut self, w: &VectorField) -> Result<u32, GaugeError> {
        let mut dw = self.dop.apply(w);
        for p in 1..=self.degree_limit {
            self.ensure_span(p as usize - 1)?;
            let r = self.spans[p as usize - 1].reduce(dw.comps())?;
            if r.iter().all(RatFunc::is_zero) {
                return Ok(p);
            }
            dw = self.dop.apply(&dw);
        }
        Err(GaugeError::FiltrationOverflow {
            limit: self.degree_limit,
            found: 0,
            expected: 1,
        })
    }

    /// One degree step of the filtration: finds every rational combination
    /// of pool candidates (jet order ≤ `window`) whose `p`-th derivation
    /// image drops into the level-(p−1) span, canonicalizes against the
    /// combinations already known, and keeps the ones that extend the span
    /// of frame-coefficient vectors.
    fn filtration_round(
        &mut self,
        p: u32,
        window: u16,
        f_ech: &mut Echelon,
        c_ech: &mut QEchelon,
    ) -> Result<Vec<VectorField>, GaugeError> {
        let q = p as usize - 1;
        self.ensure_span(q)?;
        let cand: Vec<usize> = (0..self.pool.len())
            .filter(|&i| self.pool[i].jet.is_none_or(|(_, k)| k <= window))
            .collect();
        let imgs = exec::map_vec(&cand, |&i| self.dop.iterate(i, p));
        let span = &self.spans[q];
        let residuals: Vec<Vec<RatFunc>> = exec::map_vec(&imgs, |img| span.reduce(img.comps()))
            .into_iter()
            .collect::<Result<_, _>>()?;

        let kernel = rational_kernel(&residuals, self.dim, cand.len())?;
        let mut found = Vec::new();
        for mut cv in kernel {
            c_ech.reduce(&mut cv);
            let Some(pivot) = cv.iter().position(|c| !c.is_zero()) else {
                continue;
            };
            let lead = cv[pivot].clone();
            let coeffs: Vec<BigRational> = cv.iter().map(|c| c / &lead).collect();

            let mut frame = vec![RatFunc::zero(); self.m];
            let mut w = VectorField::zero(self.dim);
            for (pos, c) in coeffs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let item = &self.pool[cand[pos]];
                let row = item.frame_row(self.m);
                let scale = RatFunc::from_poly(Poly::constant(c.clone()));
                for (acc, cell) in frame.iter_mut().zip(&row) {
                    *acc = acc.add(&cell.mul(&scale));
                }
                w = w.add(&item.vec.scale(&scale));
            }
            if f_ech.insert(&frame)? {
                found.push(w);
            }
            c_ech.insert_reduced(coeffs, pivot);
        }
        Ok(found)
    }

    /// The full degree filtration of the frame's jet span.
    fn filtration(&mut self) -> Result<DegreeFiltration, GaugeError> {
        if self.m == 0 {
            return Ok(DegreeFiltration {
                layers: Vec::new(),
                budget: self.budget,
            });
        }
        let mut f_ech = Echelon::new(self.ideal.clone());
        let mut c_ech = QEchelon::new();
        let mut layers = Vec::new();
        for p in 1..=self.degree_limit {
            let window = (p as u16 + 1).min(self.budget);
            let mut gens = self.filtration_round(p, window, &mut f_ech, &mut c_ech)?;
            if gens.is_empty() && window < self.budget {
                // The narrow jet window is only a heuristic; retry the stuck
                // degree against the full budget before moving on.
                gens = self.filtration_round(p, self.budget, &mut f_ech, &mut c_ech)?;
            }
            layers.push(FiltrationLayer {
                degree: p,
                generators: gens,
            });
            if f_ech.rank() == self.m {
                return Ok(DegreeFiltration {
                    layers,
                    budget: self.budget,
                });
            }
        }
        Err(GaugeError::FiltrationOverflow {
            limit: self.degree_limit,
            found: f_ech.rank(),
            expected: self.m,
        })
    }

    /// Applies the derivation `n` times.
    fn apply_n(&self, w: &VectorField, n: u32) -> VectorField {
        let mut out = w.clone();
        for _ in 0..n {
            out = self.dop.apply(&out);
        }
        out
    }

    /// The derivation images `D^j` of the pool for `j ≤ q`, flattened in
    /// `(j, item)` order, as span columns.
    fn descent_columns(&mut self, q: u32) -> Result<Vec<Vec<RatFunc>>, GaugeError> {
        let mut cols = Vec::with_capacity(self.pool.len() * (q as usize + 1));
        for j in 0..=q {
            let idx: Vec<usize> = (0..self.pool.len()).collect();
            let imgs = exec::map_vec(&idx, |&i| self.dop.iterate(i, j));
            cols.extend(imgs.into_iter().map(|img| img.comps().to_vec()));
        }
        Ok(cols)
    }
}

/// ℚ-kernel of the residual family: coefficient vectors `c` with
/// `Σ_i c_i · residual_i ≡ 0` on the surface, component by component. The
/// conditions are assembled exactly by clearing each component's
/// denominators and reading off monomial coefficients.
fn rational_kernel(
    residuals: &[Vec<RatFunc>],
    dim: usize,
    n: usize,
) -> Result<Vec<Vec<BigRational>>, GaugeError> {
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    for comp in 0..dim {
        let mut dens: Vec<Poly> = Vec::new();
        for r in residuals {
            let d = r[comp].den();
            if !dens.iter().any(|e| e == d) {
                dens.push(d.clone());
            }
        }
        let lcd = dens.iter().fold(Poly::one(), |acc, d| acc.mul(d));
        let mut by_monomial: BTreeMap<Monomial, Vec<BigRational>> = BTreeMap::new();
        for (i, r) in residuals.iter().enumerate() {
            if r[comp].is_zero() {
                continue;
            }
            let cofactor = lcd
                .exact_div(r[comp].den())
                .expect("every denominator divides the common product");
            let cleared = r[comp].num().mul(&cofactor);
            for (mono, coeff) in cleared.terms() {
                let row = by_monomial
                    .entry(mono.clone())
                    .or_insert_with(|| vec![BigRational::zero(); n]);
                row[i] = &row[i] + coeff;
            }
        }
        rows.extend(by_monomial.into_values());
    }

    if rows.is_empty() {
        // No conditions: every candidate already qualifies.
        return Ok((0..n)
            .map(|i| {
                let mut v = vec![BigRational::zero(); n];
                v[i] = BigRational::one();
                v
            })
            .collect());
    }

    let entries: Vec<Vec<RatFunc>> = rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| RatFunc::from_poly(Poly::constant(c.clone())))
                .collect()
        })
        .collect();
    let zeros = vec![RatFunc::zero(); entries.len()];
    let kernel = FieldMatrix::new(entries, None)?
        .solve(&zeros)?
        .expect("the homogeneous system is consistent")
        .nullspace;
    Ok(kernel
        .into_iter()
        .map(|v| v.iter().map(rat_const).collect())
        .collect())
}

/// Chain synthesis for a seed of known degree: binomial ansatz first, then
/// the exact descent. Returns the chain fields and their frame rows.
#[allow(clippy::type_complexity)]
fn build_chain(
    engine: &mut Engine,
    w: &VectorField,
    u0: &[RatFunc],
    p: u32,
) -> Result<(Vec<VectorField>, Vec<Vec<RatFunc>>), GaugeError> {
    // Binomial ansatz: w_k = C(p,k) · ∂^k w, with ∂ the formal jet shift.
    let mut cand_fields = Vec::with_capacity(p as usize);
    let mut cand_rows = Vec::with_capacity(p as usize);
    let mut shifted = w.clone();
    let mut shifted_row = u0.to_vec();
    for k in 1..=p {
        shifted = shifted.jet_shift();
        shifted_row = shifted_row.iter().map(RatFunc::jet_shift).collect();
        let c = binom(p, k);
        cand_fields.push(shifted.scale(&RatFunc::from_poly(Poly::constant(c.clone()))));
        cand_rows.push(shifted_row.iter().map(|r| r.scale(&c)).collect::<Vec<_>>());
    }
    let mut residual = engine.apply_n(w, p);
    for (k, wk) in cand_fields.iter().enumerate() {
        residual = residual.add(&engine.apply_n(wk, p - 1 - k as u32));
    }
    if residual.is_zero_mod(&engine.ideal) {
        return Ok((cand_fields, cand_rows));
    }

    // Descent: peel the top derivation layer of the remainder at each step.
    // The layer subtraction is exact up to lower-order terms, so the
    // remainder provably drops one level per step and lands in the ideal.
    let mut chain: Vec<VectorField> = Vec::with_capacity(p as usize);
    let mut rows: Vec<Vec<RatFunc>> = Vec::with_capacity(p as usize);
    let mut r = engine.apply_n(w, p);
    for k in 1..=p {
        let q = p - k;
        let cols = engine.descent_columns(q)?;
        let sol = FieldMatrix::span_membership(r.comps(), &cols, Some(engine.ideal.clone()))?
            .ok_or_else(|| GaugeError::StaleCertificate {
                detail: format!(
                    "the degree-{p} certificate does not descend past derivation order {q}"
                ),
            })?;
        let top = &sol[engine.pool.len() * q as usize..];
        let mut wk = VectorField::zero(engine.dim);
        let mut row = vec![RatFunc::zero(); engine.m];
        for (i, y) in top.iter().enumerate() {
            if y.is_zero() {
                continue;
            }
            let item = &engine.pool[i];
            wk = wk.sub(&item.vec.scale(y));
            for (acc, cell) in row.iter_mut().zip(item.frame_row(engine.m)) {
                *acc = acc.sub(&cell.mul(y));
            }
        }
        r = r.add(&engine.apply_n(&wk, q));
        chain.push(wk);
        rows.push(row);
    }
    if !r.is_zero_mod(&engine.ideal) {
        return Err(GaugeError::StaleCertificate {
            detail: format!("the degree-{p} chain leaves a non-vanishing remainder"),
        });
    }
    Ok((chain, rows))
}

/// Core synthesis once the seed's frame row and degree are known.
fn synthesize_in(
    engine: &mut Engine,
    w: VectorField,
    u0: Vec<RatFunc>,
    p: u32,
) -> Result<GaugeGenerator, GaugeError> {
    let (chain, mut rows) = build_chain(engine, &w, &u0, p)?;
    let mut u = Vec::with_capacity(p as usize + 1);
    u.push(u0);
    u.append(&mut rows);

    // R_(n) = D R_(n−1) + W_(n), starting from R_(0) = w.
    let mut r = Vec::with_capacity(p as usize);
    r.push(w.clone());
    for n in 1..p as usize {
        let prev = engine.dop.apply(&r[n - 1]);
        r.push(prev.add(&chain[n - 1]));
    }

    let rows_trivial = u.iter().flatten().try_fold(true, |acc, c| {
        Ok::<_, RatFuncError>(acc && engine.ideal.normal_form_rat(c)?.is_zero())
    })?;
    let fields_trivial = r.iter().all(|f| f.is_zero_mod(&engine.ideal));
    Ok(GaugeGenerator {
        order: p,
        seed: w,
        chain,
        r,
        u,
        parameter: "eps".to_string(),
        trivial: rows_trivial && fields_trivial,
    })
}

/// Frame coefficients of `w` over the tangential fields, with denominators
/// cleared by their common product. Returns the cleared field and row.
fn frame_coordinates(
    engine: &Engine,
    w: &VectorField,
) -> Result<(VectorField, Vec<RatFunc>), GaugeError> {
    let spanning: Vec<Vec<RatFunc>> = engine.fields.iter().map(|z| z.comps().to_vec()).collect();
    let u0 = FieldMatrix::span_membership(w.comps(), &spanning, Some(engine.ideal.clone()))?
        .ok_or_else(|| GaugeError::StaleCertificate {
            detail: "the seed does not lie in the tangential span".to_string(),
        })?;
    let mut dens: Vec<Poly> = Vec::new();
    for c in &u0 {
        if !c.is_polynomial() && !dens.iter().any(|d| d == c.den()) {
            dens.push(c.den().clone());
        }
    }
    if dens.is_empty() {
        return Ok((w.clone(), u0));
    }
    let lcd = dens.iter().fold(Poly::one(), |acc, d| acc.mul(d));
    if engine.ideal.vanishes_on_locus(&lcd) {
        return Err(GaugeError::DenominatorClearing {
            lcd: lcd.render(&engine.reg),
        });
    }
    let scale = RatFunc::from_poly(lcd);
    Ok((
        w.scale(&scale),
        u0.iter().map(|c| c.mul(&scale)).collect(),
    ))
}

/// The bracket closure of the tangential frame under itself and the complete
/// drift, with flag growth, span certificates for every closure direction,
/// and the degree filtration.
pub fn gauge_distribution(c: &CompleteNormalForm) -> Result<GaugeDistribution, GaugeError> {
    let mut engine = Engine::new(c)?;
    let basis: Vec<VectorField> = engine
        .closure
        .basis
        .iter()
        .map(|&i| engine.closure.elements[i].clone())
        .collect();
    let (growth, depth) = if basis.is_empty() {
        (Vec::new(), 0)
    } else {
        (engine.closure.growth.clone(), engine.closure.growth.len())
    };

    let mut closure_witnesses = Vec::with_capacity(basis.len());
    let cap = (depth * basis.len()) as u32;
    for (element, field) in basis.iter().enumerate() {
        let mut witness = None;
        let mut cols: Vec<Vec<RatFunc>> = Vec::new();
        for order in 0..=cap {
            for alpha in 0..engine.m {
                cols.push(engine.dop.iterate(alpha, order).comps().to_vec());
            }
            if let Some(coefficients) =
                FieldMatrix::span_membership(field.comps(), &cols, Some(engine.ideal.clone()))?
            {
                witness = Some(SpanWitness {
                    element,
                    order,
                    coefficients,
                });
                break;
            }
        }
        closure_witnesses.push(witness.ok_or(GaugeError::SpanDeficit { element })?);
    }

    let filtration = engine.filtration()?;
    Ok(GaugeDistribution {
        basis,
        growth,
        depth,
        filtration,
        closure_witnesses,
    })
}

/// The degree filtration of the tangential frame's jet span.
pub fn degree_filtration(c: &CompleteNormalForm) -> Result<DegreeFiltration, GaugeError> {
    Engine::new(c)?.filtration()
}

/// Synthesizes the gauge generator seeded by `w`, a combination of the
/// tangential frame with jet-dependent coefficients. The degree is
/// recomputed from scratch, so any combination in the span is accepted.
pub fn synthesize_generator(
    w: &VectorField,
    c: &CompleteNormalForm,
) -> Result<GaugeGenerator, GaugeError> {
    let mut engine = Engine::new(c)?;
    if engine.m == 0 {
        return Err(GaugeError::StaleCertificate {
            detail: "the tangential frame is empty".to_string(),
        });
    }
    let (cleared, u0) = frame_coordinates(&engine, w)?;
    let p = engine.degree_of(&cleared)?;
    synthesize_in(&mut engine, cleared, u0, p)
}

/// Synthesizes one generator per graded direction of the filtration, prunes
/// trivial ones, names the parameters, and checks that the velocity
/// coefficients of all generators are jointly independent on the surface.
pub fn gauge_basis(c: &CompleteNormalForm) -> Result<Vec<GaugeGenerator>, GaugeError> {
    let mut engine = Engine::new(c)?;
    let filtration = engine.filtration()?;
    let seeds: Vec<(u32, VectorField)> = filtration
        .seeds()
        .map(|(p, w)| (p, w.clone()))
        .collect();

    let mut generators = Vec::new();
    for (p, w) in seeds {
        let (cleared, u0) = frame_coordinates(&engine, &w)?;
        // The filtration certified this degree; re-check it against the span
        // ladder so a stale seed cannot slip through.
        let dw = engine.apply_n(&cleared, p);
        engine.ensure_span(p as usize - 1)?;
        let residual = engine.spans[p as usize - 1].reduce(dw.comps())?;
        if !residual.iter().all(RatFunc::is_zero) {
            return Err(GaugeError::StaleCertificate {
                detail: format!("a graded seed lost its degree-{p} certificate"),
            });
        }
        let g = synthesize_in(&mut engine, cleared, u0, p)?;
        if !g.trivial {
            generators.push(g);
        }
    }
    for (i, g) in generators.iter_mut().enumerate() {
        g.parameter = format!("eps{}", i + 1);
    }

    // Joint independence of all velocity coefficients over the surface.
    let expected: usize = generators.iter().map(|g| g.order as usize).sum();
    if expected > 0 {
        let rows: Vec<Vec<RatFunc>> = generators
            .iter()
            .flat_map(|g| g.r.iter().map(|f| f.comps().to_vec()))
            .collect();
        let got = FieldMatrix::new(rows, Some(engine.ideal.clone()))?.generic_rank()?;
        if got != expected {
            return Err(GaugeError::DependentSymmetries { got, expected });
        }
    }
    Ok(generators)
}

/// Substitutes the generator into the varied equation of motion and the
/// complete constraints, reducing every coefficient of `ε⁽ⁿ⁾` to the
/// surface. Returns the non-vanishing residuals; an intact generator
/// produces none.
pub fn verify_symmetry(
    g: &GaugeGenerator,
    c: &CompleteNormalForm,
) -> Result<SymmetryReport, GaugeError> {
    let reg = c.spec.registry.clone();
    let ideal = Arc::new(c.spec.ideal());
    let dim = c.spec.phase_count();
    let dop = DOperator::new(
        c.spec.drift.clone(),
        c.spec.char_fields.clone(),
        Vec::new(),
        reg.clone(),
    );
    let p = g.order as usize;
    let zero = VectorField::zero(dim);
    // A_n = R_(p−1−n) inside 0..p, zero outside.
    let a = |n: isize| -> &VectorField {
        if n < 0 || n >= p as isize {
            &zero
        } else {
            &g.r[p - 1 - n as usize]
        }
    };

    let mut velocity_residuals = Vec::new();
    for n in 0..=p {
        let mut w_field = VectorField::zero(dim);
        for (beta, z) in c.spec.char_fields.iter().enumerate() {
            w_field = w_field.add(&z.scale(&g.u[p - n][beta]));
        }
        let res = a(n as isize - 1)
            .sub(&dop.apply(a(n as isize)))
            .sub(&w_field)
            .normal_form(&ideal)?;
        if !res.is_zero() {
            velocity_residuals.push((n as u32, res));
        }
    }

    let mut constraint_residuals = Vec::new();
    for n in 0..p {
        for (idx, t) in c.spec.constraints.iter().enumerate() {
            let val = ideal.normal_form_rat(&a(n as isize).apply_poly(t, &reg))?;
            if !val.is_zero() {
                constraint_residuals.push((n as u32, idx, val));
            }
        }
    }

    Ok(SymmetryReport {
        ok: velocity_residuals.is_empty() && constraint_residuals.is_empty(),
        velocity_residuals,
        constraint_residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorField;
    use crate::reduction::SystemSpec;
    use crate::stabilization::stabilize;

    fn rf(p: Poly) -> RatFunc {
        RatFunc::from_poly(p)
    }

    fn ph(i: u16) -> Poly {
        Poly::var(Var::Phase(i))
    }

    fn jet(family: u16, order: u16) -> RatFunc {
        jet_rf(family, order)
    }

    /// Four nilpotent-style fields on ℝ¹⁰ whose pairwise brackets sweep out
    /// the remaining six directions, with no drift and no constraints.
    fn layered_frame() -> CompleteNormalForm {
        let names: Vec<String> = (1..=10).map(|i| format!("x{i}")).collect();
        let reg = Arc::new(
            VarRegistry::new(
                names.iter().map(String::as_str).collect(),
                vec!["l1", "l2", "l3", "l4"],
            )
            .unwrap(),
        );
        let unit = |i: usize| VectorField::unit(10, i);
        let z1 = unit(0)
            .add(&unit(7).scale(&rf(ph(1))))
            .add(&unit(8).scale(&rf(ph(2))))
            .add(&unit(9).scale(&rf(ph(3))));
        let z2 = unit(1)
            .add(&unit(5).scale(&rf(ph(2))))
            .add(&unit(6).scale(&rf(ph(3))));
        let z3 = unit(2).add(&unit(4).scale(&rf(ph(3))));
        let z4 = unit(3);
        let spec = SystemSpec::new(
            reg,
            VectorField::zero(10),
            vec![z1, z2, z3, z4],
            vec![],
            vec![],
        )
        .unwrap();
        stabilize(&spec).unwrap()
    }

    /// Two commuting shift fields with a drift that stretches the first
    /// coordinate: brackets stay in the frame, so the whole frame has
    /// degree one.
    fn stretched_frame() -> CompleteNormalForm {
        let reg = Arc::new(
            VarRegistry::new(vec!["x1", "x2", "x3"], vec!["mu1", "mu2"]).unwrap(),
        );
        let drift = VectorField::unit(3, 0).scale(&rf(ph(0)));
        let spec = SystemSpec::new(
            reg,
            drift,
            vec![VectorField::unit(3, 0), VectorField::unit(3, 1)],
            vec![],
            vec![],
        )
        .unwrap();
        stabilize(&spec).unwrap()
    }

    /// One driftless field: the only symmetry is reparametrization.
    fn lone_field() -> CompleteNormalForm {
        let reg = Arc::new(VarRegistry::new(vec!["x1", "x2"], vec!["lam"]).unwrap());
        let z = VectorField::unit(2, 0).add(&VectorField::unit(2, 1).scale(&rf(ph(0))));
        let spec =
            SystemSpec::new(reg, VectorField::zero(2), vec![z], vec![], vec![]).unwrap();
        stabilize(&spec).unwrap()
    }

    /// The degenerate model whose multiplier survives: an exponential drift
    /// annihilated by the constraint surface, leaving a pure shift symmetry.
    fn shift_model() -> CompleteNormalForm {
        let reg = Arc::new(
            VarRegistry::new(vec!["X", "Y", "p_X", "p_Y"], vec!["lam"])
                .unwrap()
                .with_ext_var("u", ph(1).neg())
                .unwrap(),
        );
        let u = reg.resolve("u").unwrap();
        let px = ph(2);
        let upx = Poly::var(u).mul(&px);
        let half = BigRational::new(1.into(), 2.into());
        let drift = VectorField::new(vec![
            rf(upx.clone()),
            RatFunc::zero(),
            RatFunc::zero(),
            rf(upx.mul(&px).scale(&half)),
        ]);
        let spec = SystemSpec::new(
            reg,
            drift,
            vec![VectorField::unit(4, 1)],
            vec![Poly::var(Var::Phase(3)), px],
            vec![],
        )
        .unwrap();
        stabilize(&spec).unwrap()
    }

    fn pendulum() -> CompleteNormalForm {
        let reg = Arc::new(VarRegistry::new(vec!["q", "p"], vec!["lam"]).unwrap());
        let drift = VectorField::new(vec![rf(ph(1)), rf(ph(0).neg())]);
        let spec = SystemSpec::new(
            reg,
            drift,
            vec![VectorField::unit(2, 1)],
            vec![ph(0)],
            vec![],
        )
        .unwrap();
        stabilize(&spec).unwrap()
    }

    #[test]
    fn reparametrization_of_a_driftless_flow() {
        let c = lone_field();
        let z = &c.spec.char_fields[0];
        let seed = z.scale(&jet(0, 0));
        let g = synthesize_generator(&seed, &c).unwrap();

        assert_eq!(g.order, 1);
        assert_eq!(g.r, vec![seed.clone()]);
        assert_eq!(g.u, vec![vec![jet(0, 0)], vec![jet(0, 1)]]);
        assert!(!g.trivial);

        let report = verify_symmetry(&g, &c).unwrap();
        assert!(report.ok, "residuals: {:?}", report.velocity_residuals);

        // The plain field is itself a first-degree symmetry — the filtration
        // picks it as the canonical graded representative.
        let filt = degree_filtration(&c).unwrap();
        assert_eq!(filt.indices(), vec![1]);
        assert_eq!(filt.layers[0].generators[0], *z);
    }

    #[test]
    fn stretched_frame_splits_into_first_order_shifts() {
        let c = stretched_frame();
        let basis = gauge_basis(&c).unwrap();
        assert_eq!(basis.len(), 2);
        assert!(basis.iter().all(|g| g.order == 1));
        assert_eq!(basis[0].parameter, "eps1");
        assert_eq!(basis[1].parameter, "eps2");

        // The stretched direction feeds its bracket defect back into the
        // multiplier variation; the untouched direction is a clean shift.
        assert_eq!(basis[0].seed, VectorField::unit(3, 0));
        assert_eq!(
            basis[0].u,
            vec![
                vec![RatFunc::one(), RatFunc::zero()],
                vec![RatFunc::from_int(-1), RatFunc::zero()],
            ],
        );
        assert_eq!(basis[1].seed, VectorField::unit(3, 1));
        assert_eq!(
            basis[1].u,
            vec![
                vec![RatFunc::zero(), RatFunc::one()],
                vec![RatFunc::zero(), RatFunc::zero()],
            ],
        );

        for g in &basis {
            let report = verify_symmetry(g, &c).unwrap();
            assert!(report.ok, "residuals: {:?}", report.velocity_residuals);
        }
    }

    #[test]
    fn layered_frame_reproduces_the_graded_symmetry_ladder() {
        let c = layered_frame();

        let dist = gauge_distribution(&c).unwrap();
        assert_eq!(dist.growth, vec![4, 10]);
        assert_eq!(dist.depth, 2);
        assert_eq!(dist.basis.len(), 10);
        assert_eq!(dist.closure_witnesses.len(), 10);
        assert_eq!(dist.filtration.indices(), vec![1, 1, 1, 1]);

        let basis = gauge_basis(&c).unwrap();
        assert_eq!(basis.len(), 4);
        let orders: Vec<u32> = basis.iter().map(|g| g.order).collect();
        assert_eq!(orders, vec![1, 2, 3, 4]);

        // Each graded seed is the matched jet-scaled sum of the frame, and
        // the chain is binomial: U_(k) = C(p,k) · (λ¹_{p−1+k}, …, λ⁴_{p−1+k}).
        for g in &basis {
            let p = g.order;
            for (k, row) in g.u.iter().enumerate() {
                let expect: Vec<RatFunc> = (0..4u16)
                    .map(|beta| {
                        jet(beta, (p - 1) as u16 + k as u16).scale(&binom(p, k as u32))
                    })
                    .collect();
                assert_eq!(row, &expect, "order {p}, row {k}");
            }
            let report = verify_symmetry(g, &c).unwrap();
            assert!(report.ok, "order {p}: {:?}", report.velocity_residuals);
        }

        // The velocity coefficients of the whole basis fill the closure.
        let total: u32 = basis.iter().map(|g| g.order).sum();
        assert_eq!(total as usize, dist.basis.len());
    }

    #[test]
    fn shift_symmetry_survives_on_the_degenerate_branch() {
        let c = shift_model();
        let dist = gauge_distribution(&c).unwrap();
        assert_eq!(dist.basis.len(), 1);
        assert_eq!(dist.basis[0], VectorField::unit(4, 1));
        assert_eq!(dist.growth, vec![1]);
        assert_eq!(dist.filtration.indices(), vec![1]);

        let basis = gauge_basis(&c).unwrap();
        assert_eq!(basis.len(), 1);
        let g = &basis[0];
        assert_eq!(g.order, 1);
        assert_eq!(g.seed, VectorField::unit(4, 1));
        assert_eq!(g.u, vec![vec![RatFunc::one()], vec![RatFunc::zero()]]);

        let report = verify_symmetry(g, &c).unwrap();
        assert!(report.ok, "residuals: {:?}", report.velocity_residuals);

        let table = g.variation_table(&c.spec.registry);
        assert_eq!(
            table,
            vec![
                ("delta x / eps1^(0)".to_string(), "(1) d/dY".to_string()),
                ("delta lam / eps1^(1)".to_string(), "1".to_string()),
            ],
        );
    }

    #[test]
    fn corrupted_multiplier_row_is_reported_not_crashed() {
        let c = shift_model();
        let mut g = gauge_basis(&c).unwrap().remove(0);
        g.u[1][0] = g.u[1][0].add(&RatFunc::one());
        let report = verify_symmetry(&g, &c).unwrap();
        assert!(!report.ok);
        assert_eq!(report.velocity_residuals.len(), 1);
        assert_eq!(report.velocity_residuals[0].0, 0);
        assert_eq!(
            report.velocity_residuals[0].1,
            VectorField::unit(4, 1).neg(),
        );
    }

    #[test]
    fn pinned_systems_have_no_gauge_directions() {
        let c = pendulum();
        let dist = gauge_distribution(&c).unwrap();
        assert!(dist.basis.is_empty());
        assert_eq!(dist.depth, 0);
        assert!(dist.filtration.layers.is_empty());
        assert!(gauge_basis(&c).unwrap().is_empty());

        let err = synthesize_generator(&VectorField::unit(2, 1), &c).unwrap_err();
        assert!(matches!(err, GaugeError::StaleCertificate { .. }));
    }

    #[test]
    fn rational_seed_coefficients_are_cleared_before_synthesis() {
        let c = lone_field();
        let z = &c.spec.char_fields[0];
        // Seed (λ/x1)·Z: clearing multiplies by x1 and synthesis proceeds.
        let seed = z.scale(&RatFunc::new(Poly::one(), ph(0)).unwrap().mul(&jet(0, 0)));
        let g = synthesize_generator(&seed, &c).unwrap();
        assert_eq!(g.order, 1);
        assert_eq!(g.u[0], vec![jet(0, 0)]);
        let report = verify_symmetry(&g, &c).unwrap();
        assert!(report.ok);
    }
}
