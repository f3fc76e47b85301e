//! From modeling input to the first-order affine normal form.
//!
//! Everything downstream works on one shape of data: a drift field `V`, a
//! list of characteristic fields `Z_α` with one free multiplier family each,
//! and a regular set of polynomial constraints. This module produces that
//! shape from three kinds of input:
//!
//! - [`depress`] rewrites an ODE system of arbitrary order as a Pfaffian
//!   system `Θ(x)·ẋ = r(x)` by introducing chain variables for higher
//!   derivatives;
//! - [`pfaffian_to_primary`] solves the Pfaffian relations for `ẋ`, splitting
//!   the solution set into a particular drift and nullspace fields;
//! - [`from_hamiltonian`] builds the same data from a Poisson bivector, a
//!   Hamiltonian, and primary constraints.
//!
//! [`SystemSpec::new`] is the single validation gate: constraint regularity
//! (full-rank Jacobian on the constraint locus, with dependent generators
//! pruned first), linear independence of the characteristic fields over the
//! constraint quotient, and dimension bookkeeping. Regularity deliberately
//! tests Jacobian entries for vanishing *on the locus* rather than modulo the
//! ideal: `p_X²` has the nonzero normal-form row `(2p_X)` but a rank-0
//! Jacobian where it matters, and must be rejected.

use std::sync::Arc;

use thiserror::Error;

use crate::algebra::{
    parse_poly, ConstraintIdeal, ParseError, Poly, RatFunc, Var, VarError, VarRegistry,
};
use crate::geometry::{schouten, MultiVector, VectorField};
use crate::linear::{FieldMatrix, LinearError};

/// A quasi-linear first-order system `Θ(x)·ẋ = r(x)` together with algebraic
/// constraints. Rows of `theta` are covectors; `theta[k]·ẋ = rhs[k]`.
#[derive(Clone, Debug)]
pub struct PfaffianSpec {
    pub registry: Arc<VarRegistry>,
    pub theta: Vec<Vec<RatFunc>>,
    pub rhs: Vec<RatFunc>,
    pub constraints: Vec<Poly>,
}

/// The affine normal form `ẋ = V(x) + λ^α Z_α(x)`, `T_a(x) = 0`, validated
/// for regularity. One multiplier family per characteristic field, in order.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub registry: Arc<VarRegistry>,
    pub drift: VectorField,
    pub char_fields: Vec<VectorField>,
    pub constraints: Vec<Poly>,
    /// Human-readable ledger of the nonvanishing minors and denominators the
    /// construction relied on. Grows as later passes add their own.
    pub certificate: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("dynamically inconsistent Pfaffian system")]
    InconsistentPfaffian,
    #[error("irregular constraint set; offending generators: {}", offenders.join(", "))]
    IrregularConstraints { offenders: Vec<String> },
    #[error("constraints are inconsistent: the regular stratum is empty")]
    EmptyStratum,
    #[error("constraint involves non-phase variables: {constraint}")]
    ConstraintNotPhase { constraint: String },
    #[error("characteristic fields are linearly dependent over the constraint quotient")]
    DependentFields,
    #[error("field dimension {got} does not match the {expected} phase variables")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{fields} characteristic fields need {fields} multiplier families, found {multipliers}")]
    MultiplierMismatch { multipliers: usize, fields: usize },
    #[error("bivector fails the Jacobi identity: {witness}")]
    NotPoisson { witness: String },
    #[error("equivalence scaling matrix is singular over the constraint quotient")]
    SingularEquivalence,
    #[error("equivalence scaling denominator vanishes on the constraint surface: {den}")]
    VanishingScale { den: String },
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Vars(#[from] VarError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl PfaffianSpec {
    pub fn new(
        registry: Arc<VarRegistry>,
        theta: Vec<Vec<RatFunc>>,
        rhs: Vec<RatFunc>,
        constraints: Vec<Poly>,
    ) -> Result<Self, ReductionError> {
        let n = registry.phase_count();
        for row in &theta {
            if row.len() != n {
                return Err(ReductionError::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
        }
        if rhs.len() != theta.len() {
            return Err(ReductionError::DimensionMismatch {
                expected: theta.len(),
                got: rhs.len(),
            });
        }
        check_phase_only(&constraints, &registry)?;
        Ok(PfaffianSpec {
            registry,
            theta,
            rhs,
            constraints,
        })
    }
}

impl SystemSpec {
    /// Validates and assembles a system. Prunes redundant constraint
    /// generators, then demands a full-rank Jacobian on the locus and
    /// independent characteristic fields; the surviving Jacobian minor is
    /// appended to the certificate.
    pub fn new(
        registry: Arc<VarRegistry>,
        drift: VectorField,
        char_fields: Vec<VectorField>,
        constraints: Vec<Poly>,
        mut certificate: Vec<String>,
    ) -> Result<Self, ReductionError> {
        let n = registry.phase_count();
        if drift.dim() != n {
            return Err(ReductionError::DimensionMismatch {
                expected: n,
                got: drift.dim(),
            });
        }
        for z in &char_fields {
            if z.dim() != n {
                return Err(ReductionError::DimensionMismatch {
                    expected: n,
                    got: z.dim(),
                });
            }
        }
        if registry.multiplier_count() != char_fields.len() {
            return Err(ReductionError::MultiplierMismatch {
                multipliers: registry.multiplier_count(),
                fields: char_fields.len(),
            });
        }
        check_phase_only(&constraints, &registry)?;

        let constraints = prune_dependent(constraints);
        let ideal = Arc::new(ConstraintIdeal::new(constraints.clone()));
        if ideal.is_trivial() {
            return Err(ReductionError::EmptyStratum);
        }

        if !constraints.is_empty() {
            let jacobian: Vec<Vec<Poly>> = constraints
                .iter()
                .map(|t| {
                    (0..n as u16)
                        .map(|i| t.diff_phase(i, &registry))
                        .collect()
                })
                .collect();
            let m = FieldMatrix::from_polys(jacobian, Some(ideal.clone()))?
                .with_radical_zero_test();
            let minor = m.maximal_minor()?;
            if minor.rows.len() != constraints.len() {
                let offenders = (0..constraints.len())
                    .filter(|a| !minor.rows.contains(a))
                    .map(|a| constraints[a].render(&registry))
                    .collect();
                return Err(ReductionError::IrregularConstraints { offenders });
            }
            certificate.push(format!(
                "constraint jacobian minor: rows {:?}, cols {:?}, det = {}",
                minor.rows,
                minor.cols,
                minor.det.render(&registry)
            ));
        }

        if !char_fields.is_empty() {
            // Exact independence, not independence on the locus: a
            // characteristic direction may legitimately degenerate on an
            // abnormal branch's smaller surface, where it simply determines
            // fewer multipliers.
            let rows: Vec<Vec<RatFunc>> =
                char_fields.iter().map(|z| z.comps().to_vec()).collect();
            let m = FieldMatrix::new(rows, None)?;
            if m.generic_rank()? != char_fields.len() {
                return Err(ReductionError::DependentFields);
            }
        }

        Ok(SystemSpec {
            registry,
            drift,
            char_fields,
            constraints,
            certificate,
        })
    }

    /// The constraint ideal this system is taken modulo.
    pub fn ideal(&self) -> ConstraintIdeal {
        ConstraintIdeal::new(self.constraints.clone())
    }

    pub fn phase_count(&self) -> usize {
        self.registry.phase_count()
    }
}

fn check_phase_only(constraints: &[Poly], reg: &VarRegistry) -> Result<(), ReductionError> {
    for t in constraints {
        if t.vars().iter().any(Var::is_jet) {
            return Err(ReductionError::ConstraintNotPhase {
                constraint: t.render(reg),
            });
        }
    }
    Ok(())
}

/// Drops generators contained in the ideal of the remaining ones, scanning in
/// order. `{q, q}` keeps one copy; `{x, y, x+y}` keeps two generators.
fn prune_dependent(constraints: Vec<Poly>) -> Vec<Poly> {
    let nonzero: Vec<Poly> = constraints.into_iter().filter(|t| !t.is_zero()).collect();
    let mut kept: Vec<bool> = vec![true; nonzero.len()];
    for a in 0..nonzero.len() {
        let others: Vec<Poly> = nonzero
            .iter()
            .enumerate()
            .filter(|(b, _)| *b != a && kept[*b])
            .map(|(_, t)| t.clone())
            .collect();
        if ConstraintIdeal::new(others).contains(&nonzero[a]) {
            kept[a] = false;
        }
    }
    nonzero
        .into_iter()
        .zip(kept)
        .filter(|(_, k)| *k)
        .map(|(t, _)| t)
        .collect()
}

/// Builds a registry with the same phase and extension variables as `reg`
/// plus the given multiplier family names.
pub fn registry_with_multipliers(
    reg: &VarRegistry,
    multipliers: Vec<String>,
) -> Result<VarRegistry, VarError> {
    let mut out = VarRegistry::new(reg.phase_names().to_vec(), multipliers)?;
    for e in reg.ext_vars() {
        out = out.with_ext_var(e.name.clone(), e.exponent.clone())?;
    }
    Ok(out)
}

/// Picks fresh multiplier family names `lam1..lamN`, falling back to other
/// prefixes when those collide with existing variables.
fn auto_multiplier_names(reg: &VarRegistry, count: usize) -> Result<VarRegistry, VarError> {
    let mut last_err = None;
    for prefix in ["lam", "mult", "mu"] {
        let names = (1..=count).map(|i| format!("{prefix}{i}")).collect();
        match registry_with_multipliers(reg, names) {
            Ok(r) => return Ok(r),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one naming attempt"))
}

/// Solves `Θ·ẋ = r` over the constraint quotient. The particular solution
/// (free velocities zeroed) becomes the drift; a nullspace basis becomes the
/// characteristic fields, each granted a fresh multiplier family.
pub fn pfaffian_to_primary(p: &PfaffianSpec) -> Result<SystemSpec, ReductionError> {
    let n = p.registry.phase_count();
    let ideal = Arc::new(ConstraintIdeal::new(p.constraints.clone()));
    let mut certificate = Vec::new();

    let (drift, fields) = if p.theta.is_empty() {
        // No velocity relations: every direction is characteristic.
        (
            VectorField::zero(n),
            (0..n).map(|i| VectorField::unit(n, i)).collect(),
        )
    } else {
        let m = FieldMatrix::new(p.theta.clone(), Some(ideal))?;
        let minor = m.maximal_minor()?;
        certificate.push(format!(
            "velocity-form pivot minor: rows {:?}, cols {:?}, det = {}",
            minor.rows,
            minor.cols,
            minor.det.render(&p.registry)
        ));
        let sol = m
            .solve(&p.rhs)?
            .ok_or(ReductionError::InconsistentPfaffian)?;
        let fields: Vec<VectorField> =
            sol.nullspace.into_iter().map(VectorField::new).collect();
        (VectorField::new(sol.particular), fields)
    };

    let registry = Arc::new(auto_multiplier_names(&p.registry, fields.len())?);
    SystemSpec::new(registry, drift, fields, p.constraints.clone(), certificate)
}

/// Builds the affine normal form of a constrained Hamiltonian system: the
/// drift is the Hamiltonian field of `hamiltonian` under `poisson`, and each
/// primary constraint contributes its own Hamiltonian field. The bivector
/// must satisfy the Jacobi identity exactly; the bracket convention is the
/// one pinned in [`crate::geometry::schouten`], so for a canonical pair
/// `(q, p)` the constraint `q` yields the field `−∂_p`.
pub fn from_hamiltonian(
    registry: &VarRegistry,
    poisson: &MultiVector,
    hamiltonian: &RatFunc,
    primaries: Vec<Poly>,
) -> Result<SystemSpec, ReductionError> {
    let n = registry.phase_count();
    let jacobiator = schouten(poisson, poisson, registry);
    if !jacobiator.is_zero() {
        let (indices, coeff) = jacobiator
            .comps()
            .find(|(_, c)| !c.is_zero())
            .map(|(i, c)| (i.clone(), c.clone()))
            .expect("nonzero multivector has a nonzero component");
        let axes: Vec<String> = indices
            .iter()
            .map(|&i| registry.var_name(Var::Phase(i)))
            .collect();
        return Err(ReductionError::NotPoisson {
            witness: format!(
                "[P,P] has coefficient {} on ∂_{}",
                coeff.render(registry),
                axes.join("∧∂_")
            ),
        });
    }

    let drift = schouten(poisson, &MultiVector::scalar(hamiltonian.clone()), registry)
        .as_field(n)
        .expect("bracket of a bivector with a scalar is a field");
    let fields: Vec<VectorField> = primaries
        .iter()
        .map(|t| {
            schouten(
                poisson,
                &MultiVector::scalar(RatFunc::from_poly(t.clone())),
                registry,
            )
            .as_field(n)
            .expect("bracket of a bivector with a scalar is a field")
        })
        .collect();

    let certificate = vec!["poisson bivector: jacobi identity verified".to_string()];
    let registry = Arc::new(auto_multiplier_names(registry, fields.len())?);
    SystemSpec::new(registry, drift, fields, primaries, certificate)
}

/// Rewrites a system by an equivalence that fixes its solution set: the
/// constraints by an invertible scaling `T ↦ S·T`, the drift by `V ↦ V +
/// T_a·W^a`, and the fields by `Z_α ↦ Z_α + T_a·X^a_α`. Every downstream
/// invariant (stages, classification, gauge data) must survive unchanged
/// modulo the constraint ideal.
pub fn apply_equivalence(
    spec: &SystemSpec,
    scaling: &[Vec<RatFunc>],
    drift_shift: &[VectorField],
    field_shift: &[Vec<VectorField>],
) -> Result<SystemSpec, ReductionError> {
    let k = spec.constraints.len();
    let ideal = Arc::new(spec.ideal());
    if scaling.len() != k || scaling.iter().any(|row| row.len() != k) {
        return Err(ReductionError::DimensionMismatch {
            expected: k,
            got: scaling.len(),
        });
    }
    if drift_shift.len() != k || field_shift.len() != k {
        return Err(ReductionError::DimensionMismatch {
            expected: k,
            got: drift_shift.len().min(field_shift.len()),
        });
    }

    let mut certificate = spec.certificate.clone();
    if k > 0 {
        let s = FieldMatrix::new(scaling.to_vec(), Some(ideal.clone()))?;
        if s.generic_rank()? != k {
            return Err(ReductionError::SingularEquivalence);
        }

        let det = bareiss_like_det(scaling, &spec.registry);
        certificate.push(format!(
            "equivalence scaling det: {}",
            det.render(&spec.registry)
        ));
    }

    // New constraints: clear the denominator of each S·T row. Multiplying a
    // generator by a denominator that is a unit in the quotient leaves the
    // ideal unchanged; a vanishing denominator would not, so it is an error.
    let mut new_constraints = Vec::with_capacity(k);
    for row in scaling {
        let mut combo = RatFunc::zero();
        for (s_ab, t_b) in row.iter().zip(&spec.constraints) {
            combo = combo.add(&s_ab.mul(&RatFunc::from_poly(t_b.clone())));
        }
        if !combo.is_polynomial() && ideal.normal_form(combo.den()).is_zero() {
            return Err(ReductionError::VanishingScale {
                den: combo.den().render(&spec.registry),
            });
        }
        if !combo.is_polynomial() {
            certificate.push(format!(
                "equivalence cleared denominator: {}",
                combo.den().render(&spec.registry)
            ));
        }
        new_constraints.push(combo.num().clone());
    }

    let shift_by = |base: &VectorField, shifts: &[VectorField]| -> VectorField {
        spec.constraints
            .iter()
            .zip(shifts)
            .fold(base.clone(), |acc, (t, w)| {
                acc.add(&w.scale(&RatFunc::from_poly(t.clone())))
            })
    };
    let drift = shift_by(&spec.drift, drift_shift);
    let char_fields: Vec<VectorField> = spec
        .char_fields
        .iter()
        .enumerate()
        .map(|(alpha, z)| {
            let column: Vec<VectorField> = field_shift
                .iter()
                .map(|per_constraint| per_constraint[alpha].clone())
                .collect();
            shift_by(z, &column)
        })
        .collect();

    SystemSpec::new(
        spec.registry.clone(),
        drift,
        char_fields,
        new_constraints,
        certificate,
    )
}

/// Exact determinant of a small square rational-function matrix by cofactor
/// expansion. Only used for certificates, where matrices are tiny.
fn bareiss_like_det(m: &[Vec<RatFunc>], _reg: &VarRegistry) -> RatFunc {
    let n = m.len();
    match n {
        0 => RatFunc::one(),
        1 => m[0][0].clone(),
        _ => {
            let mut det = RatFunc::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let sub: Vec<Vec<RatFunc>> = (1..n)
                    .map(|i| {
                        (0..n)
                            .filter(|&c| c != j)
                            .map(|c| m[i][c].clone())
                            .collect()
                    })
                    .collect();
                let term = m[0][j].mul(&bareiss_like_det(&sub, _reg));
                det = if j % 2 == 0 {
                    det.add(&term)
                } else {
                    det.sub(&term)
                };
            }
            det
        }
    }
}

// ---------------------------------------------------------------------------
// Order depression
// ---------------------------------------------------------------------------

/// An ODE system of arbitrary order. Equations are polynomials over a
/// registry whose phase variables are the unknowns and their derivative
/// aliases `name_d1, name_d2, …` up to each declared order.
#[derive(Clone, Debug)]
pub struct OdeSystem {
    pub registry: Arc<VarRegistry>,
    unknowns: Vec<Unknown>,
    pub equations: Vec<Poly>,
}

#[derive(Clone, Debug)]
struct Unknown {
    name: String,
    /// Index of the level-0 alias in the input registry.
    base: u16,
}

/// Parses an ODE system. `unknowns` lists `(name, highest derivative order)`;
/// equation strings refer to `y`, `y_d1`, `y_d2`, … for `y, ẏ, ÿ, …`.
pub fn ode_system(
    unknowns: &[(&str, u32)],
    equations: &[&str],
) -> Result<OdeSystem, ReductionError> {
    let mut names = Vec::new();
    let mut meta = Vec::new();
    for (name, order) in unknowns {
        meta.push(Unknown {
            name: (*name).to_string(),
            base: names.len() as u16,
        });
        names.push((*name).to_string());
        for j in 1..=*order {
            names.push(format!("{name}_d{j}"));
        }
    }
    let registry = Arc::new(VarRegistry::new(names, Vec::new())?);
    let parsed = equations
        .iter()
        .map(|e| parse_poly(e, &registry))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OdeSystem {
        registry,
        unknowns: meta,
        equations: parsed,
    })
}

impl OdeSystem {
    /// Maps an input phase index to `(unknown index, derivative level)`.
    fn level_of(&self, idx: u16) -> (usize, u32) {
        let i = self
            .unknowns
            .iter()
            .rposition(|u| u.base <= idx)
            .expect("phase index belongs to an unknown block");
        (i, (idx - self.unknowns[i].base) as u32)
    }
}

/// Chain-variable names for derivative levels, preferred in this order.
const CHAIN_POOL: [&str; 8] = ["v", "w", "s", "r", "g", "h", "m", "k"];

/// Rewrites higher-order equations in first-order Pfaffian form.
///
/// Unknowns appearing with second or higher derivatives get chain variables:
/// `ÿ + y = 0` becomes coordinates `(y, v, w)` with rows `ẏ = v`, `v̇ = w`
/// and the algebraic constraint `w + y = 0` — the top derivative slot keeps a
/// free velocity. First-order equations affine in the velocities map directly
/// to rows of `Θ`; a velocity appearing nonlinearly forces a chain for its
/// unknown too, so `ẏ² = 1` becomes `ẏ = v` with constraint `v² − 1`.
pub fn depress(sys: &OdeSystem) -> Result<PfaffianSpec, ReductionError> {
    let equations: Vec<&Poly> = sys.equations.iter().filter(|e| !e.is_zero()).collect();

    // Observed highest derivative level per unknown.
    let mut observed = vec![0u32; sys.unknowns.len()];
    for e in &equations {
        for v in e.vars() {
            if let Var::Phase(idx) = v {
                let (u, level) = sys.level_of(idx);
                observed[u] = observed[u].max(level);
            }
        }
    }

    // Chain any unknown seen at order ≥ 2, then any unknown whose velocity
    // appears nonlinearly in some equation, to a fixed point.
    let mut chained: Vec<bool> = observed.iter().map(|&k| k >= 2).collect();
    loop {
        let mut changed = false;
        for e in &equations {
            let velocities = velocity_vars(e, sys, &chained);
            if velocities.is_empty() || is_affine_in(e, &velocities) {
                continue;
            }
            for &d in &velocities {
                let (u, _) = sys.level_of(d);
                if !chained[u] {
                    chained[u] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Output coordinates: chain blocks keep their declaration order. Chain
    // level names come from a fixed pool, skipping collisions.
    let mut out_names: Vec<String> = Vec::new();
    let mut taken: std::collections::HashSet<String> = sys
        .unknowns
        .iter()
        .map(|u| u.name.clone())
        .collect();
    let mut pool = CHAIN_POOL.iter();
    // out_index[input phase index] = output phase index (levels that survive).
    let mut out_index: Vec<Option<u16>> = vec![None; sys.registry.phase_count()];
    for (u, meta) in sys.unknowns.iter().enumerate() {
        let top = if chained[u] { observed[u] } else { 0 };
        for level in 0..=top {
            let name = if level == 0 {
                meta.name.clone()
            } else {
                let fresh = pool
                    .by_ref()
                    .map(|s| s.to_string())
                    .find(|s| !taken.contains(s))
                    .unwrap_or_else(|| format!("{}_c{level}", meta.name));
                taken.insert(fresh.clone());
                fresh
            };
            out_index[(meta.base + level as u16) as usize] = Some(out_names.len() as u16);
            out_names.push(name);
        }
    }
    let out_reg = Arc::new(VarRegistry::new(out_names, Vec::new())?);
    let n = out_reg.phase_count();

    let rename = |p: &Poly| -> Poly {
        let mut q = p.clone();
        // Chained blocks only shrink later indices, so ascending substitution
        // never captures an already-substituted variable.
        for (idx, target) in out_index.iter().enumerate() {
            if let Some(t) = target {
                let from = Var::Phase(idx as u16);
                let to = Var::Phase(*t);
                if from != to {
                    q = q.substitute(from, &Poly::var(to));
                }
            }
        }
        q
    };

    let mut theta: Vec<Vec<RatFunc>> = Vec::new();
    let mut rhs: Vec<RatFunc> = Vec::new();
    let mut constraints: Vec<Poly> = Vec::new();

    // Chain rows ċ_j = c_{j+1}.
    for (u, meta) in sys.unknowns.iter().enumerate() {
        if !chained[u] {
            continue;
        }
        for level in 0..observed[u] {
            let row_var = out_index[(meta.base + level as u16) as usize].unwrap();
            let next = out_index[(meta.base + level as u16 + 1) as usize].unwrap();
            let mut row = vec![RatFunc::zero(); n];
            row[row_var as usize] = RatFunc::one();
            theta.push(row);
            rhs.push(RatFunc::from_poly(Poly::var(Var::Phase(next))));
        }
    }

    // Equations become direct rows or algebraic constraints.
    for e in &equations {
        let velocities = velocity_vars(e, sys, &chained);
        if velocities.is_empty() {
            constraints.push(rename(e));
            continue;
        }
        debug_assert!(is_affine_in(e, &velocities));
        let mut row = vec![RatFunc::zero(); n];
        let mut remainder = (*e).clone();
        for &d in &velocities {
            let coeff = e.diff_plain(Var::Phase(d));
            remainder = remainder.substitute(Var::Phase(d), &Poly::zero());
            let (u, _) = sys.level_of(d);
            let col = out_index[sys.unknowns[u].base as usize].unwrap();
            row[col as usize] = RatFunc::from_poly(rename(&coeff));
        }
        theta.push(row);
        rhs.push(RatFunc::from_poly(rename(&remainder).neg()));
    }

    PfaffianSpec::new(out_reg, theta, rhs, constraints)
}

/// Level-1 derivative variables of non-chained unknowns occurring in `e` —
/// exactly the slots that remain genuine velocities after chain substitution.
fn velocity_vars(e: &Poly, sys: &OdeSystem, chained: &[bool]) -> Vec<u16> {
    e.vars()
        .into_iter()
        .filter_map(|v| match v {
            Var::Phase(idx) => {
                let (u, level) = sys.level_of(idx);
                (level == 1 && !chained[u]).then_some(idx)
            }
            _ => None,
        })
        .collect()
}

/// Whether every monomial of `e` has joint degree ≤ 1 in the given variables.
fn is_affine_in(e: &Poly, vars: &[u16]) -> bool {
    e.terms().all(|(m, _)| {
        vars.iter()
            .map(|&d| m.exponent(Var::Phase(d)))
            .sum::<u32>()
            <= 1
    })
}
