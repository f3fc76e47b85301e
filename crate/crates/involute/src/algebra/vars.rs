//! Variable identities and the registry that names them.
//!
//! Three classes of variables coexist in every computation:
//! phase coordinates `x^i`, multiplier jets `λ^α_k` (order-0 jets are the
//! multipliers themselves), and declared transcendental extensions
//! `u = exp(q(x))`. Jets need no registration: a [`Var::Jet`] is identified by
//! its (family, order) pair, so polynomial values stay immutable and shareable
//! while jet orders grow on demand.

use std::fmt;

use crate::algebra::Poly;

/// A single variable. `Ord` is the semantic sequence used by the monomial
/// order: phase variables first, then extension variables, then jets by
/// (family, order). Smaller in `Ord` means earlier in the sequence, which the
/// graded reverse-lexicographic comparison treats as the larger variable.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Var {
    /// Phase coordinate, by position in the registry.
    Phase(u16),
    /// Transcendental extension variable, by position in the registry.
    Ext(u16),
    /// Multiplier jet `λ^family_order`; order 0 is the multiplier itself.
    Jet { family: u16, order: u16 },
}

impl Var {
    pub fn is_phase(&self) -> bool {
        matches!(self, Var::Phase(_))
    }

    pub fn is_jet(&self) -> bool {
        matches!(self, Var::Jet { .. })
    }

    pub fn is_ext(&self) -> bool {
        matches!(self, Var::Ext(_))
    }
}

/// A declared transcendental extension `u = exp(exponent)`.
///
/// The defining exponent must be a polynomial in phase variables only; the
/// induced derivative rule is `∂u/∂x^i = (∂ exponent/∂x^i) · u`, kept as a
/// precomputed gradient so differentiation never re-derives it.
#[derive(Clone, Debug)]
pub struct ExtVar {
    pub name: String,
    pub exponent: Poly,
    /// `grad[i] = ∂ exponent / ∂ x^i`, one entry per phase variable.
    pub grad: Vec<Poly>,
}

/// Names and derivative rules for every registered variable.
///
/// Immutable after construction; shared by `Arc` across the pipeline. Jet
/// variables are never stored — only their family names are.
#[derive(Clone, Debug)]
pub struct VarRegistry {
    phase: Vec<String>,
    multipliers: Vec<String>,
    ext: Vec<ExtVar>,
}

/// Errors raised while building or querying a registry.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum VarError {
    #[error("duplicate or reserved variable name `{0}`")]
    DuplicateName(String),
    #[error("invalid variable name `{0}`: expected an identifier")]
    InvalidName(String),
    #[error("unknown variable `{0}`")]
    Unknown(String),
    #[error("extension variable `{name}` has a non-phase defining exponent")]
    ExtExponentNotPhase { name: String },
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Splits `name` as `<stem>_<digits>` if it has that shape.
fn jet_split(name: &str) -> Option<(&str, u16)> {
    let idx = name.rfind('_')?;
    let (stem, tail) = (&name[..idx], &name[idx + 1..]);
    if stem.is_empty() || tail.is_empty() || !tail.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    tail.parse().ok().map(|k| (stem, k))
}

impl VarRegistry {
    /// Builds a registry from phase coordinate names and multiplier family
    /// names. Extension variables are added afterwards with
    /// [`VarRegistry::with_ext_var`].
    pub fn new<S: Into<String>>(
        phase: Vec<S>,
        multipliers: Vec<S>,
    ) -> Result<Self, VarError> {
        let reg = VarRegistry {
            phase: phase.into_iter().map(Into::into).collect(),
            multipliers: multipliers.into_iter().map(Into::into).collect(),
            ext: Vec::new(),
        };
        reg.validate()?;
        Ok(reg)
    }

    fn validate(&self) -> Result<(), VarError> {
        let mut seen = std::collections::HashSet::new();
        let all = self
            .phase
            .iter()
            .chain(self.multipliers.iter())
            .chain(self.ext.iter().map(|e| &e.name));
        for name in all {
            if !is_identifier(name) {
                return Err(VarError::InvalidName(name.clone()));
            }
            if !seen.insert(name.clone()) {
                return Err(VarError::DuplicateName(name.clone()));
            }
            // A name shaped like `<family>_<k>` shadows that family's jets.
            if let Some((stem, _)) = jet_split(name) {
                if self.multipliers.iter().any(|m| m == stem) {
                    return Err(VarError::DuplicateName(name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Registers `name = exp(exponent)`. The exponent must involve phase
    /// variables only; its gradient is precomputed for the chain rule.
    pub fn with_ext_var(
        mut self,
        name: impl Into<String>,
        exponent: Poly,
    ) -> Result<Self, VarError> {
        let name = name.into();
        if !exponent.vars().iter().all(Var::is_phase) {
            return Err(VarError::ExtExponentNotPhase { name });
        }
        let grad = (0..self.phase.len() as u16)
            .map(|i| exponent.diff_plain(Var::Phase(i)))
            .collect();
        self.ext.push(ExtVar {
            name,
            exponent,
            grad,
        });
        self.validate()?;
        Ok(self)
    }

    pub fn phase_count(&self) -> usize {
        self.phase.len()
    }

    pub fn multiplier_count(&self) -> usize {
        self.multipliers.len()
    }

    pub fn ext_count(&self) -> usize {
        self.ext.len()
    }

    pub fn phase_names(&self) -> &[String] {
        &self.phase
    }

    pub fn multiplier_names(&self) -> &[String] {
        &self.multipliers
    }

    pub fn ext_vars(&self) -> &[ExtVar] {
        &self.ext
    }

    pub fn ext_var(&self, idx: u16) -> &ExtVar {
        &self.ext[idx as usize]
    }

    /// Resolves a textual name to a variable. Multiplier family names resolve
    /// to their order-0 jet; `family_k` resolves to the order-`k` jet.
    pub fn resolve(&self, name: &str) -> Result<Var, VarError> {
        if let Some(i) = self.phase.iter().position(|p| p == name) {
            return Ok(Var::Phase(i as u16));
        }
        if let Some(i) = self.ext.iter().position(|e| e.name == name) {
            return Ok(Var::Ext(i as u16));
        }
        if let Some(i) = self.multipliers.iter().position(|m| m == name) {
            return Ok(Var::Jet {
                family: i as u16,
                order: 0,
            });
        }
        if let Some((stem, k)) = jet_split(name) {
            if let Some(i) = self.multipliers.iter().position(|m| m == stem) {
                return Ok(Var::Jet {
                    family: i as u16,
                    order: k,
                });
            }
        }
        Err(VarError::Unknown(name.to_string()))
    }

    /// Canonical display name of a variable.
    pub fn var_name(&self, v: Var) -> String {
        match v {
            Var::Phase(i) => self.phase[i as usize].clone(),
            Var::Ext(i) => self.ext[i as usize].name.clone(),
            Var::Jet { family, order } => {
                let stem = &self.multipliers[family as usize];
                if order == 0 {
                    stem.clone()
                } else {
                    format!("{stem}_{order}")
                }
            }
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Phase(i) => write!(f, "x{}", i + 1),
            Var::Ext(i) => write!(f, "u{}", i + 1),
            Var::Jet { family, order } => write!(f, "l{}_{}", family + 1, order),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_names_resolve_to_family_and_order() {
        let reg = VarRegistry::new(vec!["q", "p"], vec!["lam"]).unwrap();
        assert_eq!(reg.resolve("q").unwrap(), Var::Phase(0));
        assert_eq!(
            reg.resolve("lam").unwrap(),
            Var::Jet {
                family: 0,
                order: 0
            }
        );
        assert_eq!(
            reg.resolve("lam_3").unwrap(),
            Var::Jet {
                family: 0,
                order: 3
            }
        );
        assert_eq!(reg.var_name(Var::Jet { family: 0, order: 2 }), "lam_2");
    }

    #[test]
    fn names_shadowing_jets_are_rejected() {
        let err = VarRegistry::new(vec!["lam_1"], vec!["lam"]).unwrap_err();
        assert_eq!(err, VarError::DuplicateName("lam_1".into()));
    }

    #[test]
    fn semantic_order_is_phase_then_ext_then_jets() {
        let x = Var::Phase(1);
        let u = Var::Ext(0);
        let l10 = Var::Jet { family: 0, order: 0 };
        let l11 = Var::Jet { family: 0, order: 1 };
        let l20 = Var::Jet { family: 1, order: 0 };
        assert!(x < u && u < l10 && l10 < l11 && l11 < l20);
    }
}
