//! Mixed-integer linear programs in row form.

use std::collections::HashMap;

use crate::error::{MilpError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// Sparse linear expression `Σ c_i x_i + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: usize, c: f64) -> Self {
        Self {
            terms: vec![(v, c)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: usize, c: f64) -> &mut Self {
        self.terms.push((v, c));
        self
    }

    pub fn add(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = LinExpr::default();
        out.add(self, s);
        out
    }

    /// `self − other`.
    pub fn minus(&self, other: &LinExpr) -> Self {
        let mut out = self.clone();
        out.add(other, -1.0);
        out
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn compact(&self) -> Self {
        let mut acc: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for &(v, c) in &self.terms {
            match seen.get(&v) {
                Some(&i) => acc[i].1 += c,
                None => {
                    seen.insert(v, acc.len());
                    acc.push((v, c));
                }
            }
        }
        acc.retain(|&(_, c)| c != 0.0);
        Self {
            terms: acc,
            constant: self.constant,
        }
    }
}

/// `Σ coef · x  sense  rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    /// Which family of the formulation the row belongs to.
    pub tag: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpModel {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Maximized.
    pub objective: Vec<(usize, f64)>,
    names: HashMap<String, usize>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> Result<usize> {
        let name = name.into();
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(MilpError::Model(format!("variable {name} has bounds [{lower}, {upper}]")));
        }
        if self.names.contains_key(&name) {
            return Err(MilpError::Model(format!("duplicate variable {name}")));
        }
        let idx = self.variables.len();
        self.names.insert(name.clone(), idx);
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        Ok(idx)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<usize> {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> Result<usize> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.get(name).copied()
    }

    /// Adds `lhs sense rhs`, moving constants to the right-hand side.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        tag: &str,
        lhs: &LinExpr,
        sense: Sense,
        rhs: &LinExpr,
    ) -> Result<()> {
        let diff = lhs.minus(rhs).compact();
        let name = name.into();
        if let Some(&(v, _)) = diff.terms.iter().find(|&&(v, _)| v >= self.variables.len()) {
            return Err(MilpError::Model(format!("constraint {name} references undeclared variable {v}")));
        }
        self.constraints.push(Constraint {
            name,
            coefs: diff.terms,
            sense,
            rhs: -diff.constant,
            tag: tag.to_owned(),
        });
        Ok(())
    }

    pub fn set_objective(&mut self, expr: &LinExpr) {
        self.objective = expr.compact().terms;
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| i)
    }

    pub fn binary_count(&self) -> usize {
        self.binaries().count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * x[v]).sum()
    }

    /// Largest violation of any row or bound at `x` (binaries must also be
    /// integral within `tol`).
    pub fn max_violation(&self, x: &[f64], tol: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, var) in self.variables.iter().enumerate() {
            worst = worst.max(var.lower - x[v]).max(x[v] - var.upper);
            if var.kind == VarKind::Binary {
                let frac = (x[v] - x[v].round()).abs();
                if frac > tol {
                    worst = worst.max(frac);
                }
            }
        }
        for c in &self.constraints {
            let lhs: f64 = c.coefs.iter().map(|&(v, a)| a * x[v]).sum();
            let viol = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Rows, names and bounds are well formed.
    pub fn validate(&self) -> Result<()> {
        for var in &self.variables {
            if var.kind == VarKind::Binary && !(var.lower >= 0.0 && var.upper <= 1.0) {
                return Err(MilpError::Model(format!("binary {} has bounds [{}, {}]", var.name, var.lower, var.upper)));
            }
        }
        let n = self.variables.len();
        for c in &self.constraints {
            if c.coefs.iter().any(|&(v, a)| v >= n || !a.is_finite()) || !c.rhs.is_finite() {
                return Err(MilpError::Model(format!("constraint {} is malformed", c.name)));
            }
        }
        if self.objective.iter().any(|&(v, a)| v >= n || !a.is_finite()) {
            return Err(MilpError::Model("objective is malformed".into()));
        }
        Ok(())
    }

    /// Copy with binaries treated as continuous on their bounds.
    pub fn relaxed(&self) -> Self {
        let mut m = self.clone();
        for v in &mut m.variables {
            v.kind = VarKind::Continuous;
        }
        m
    }

    pub fn set_bounds(&mut self, v: usize, lower: f64, upper: f64) {
        self.variables[v].lower = lower;
        self.variables[v].upper = upper;
    }
}

/// Rows forcing `q = min{a, b}` for arguments bounded by `big_m`, with
/// selector `z` (`z = 1` picks `a`). Adds the binary and returns its index.
///
/// `q ≤ a`, `q ≤ b`, `q ≥ a − M(1 − z)`, `q ≥ b − M z`.
pub fn linearize_min(
    model: &mut MilpModel,
    name: &str,
    tag: &str,
    q: &LinExpr,
    a: &LinExpr,
    b: &LinExpr,
    big_m: f64,
) -> Result<usize> {
    let z = model.binary(format!("z_{name}"))?;
    linearize_min_with(model, name, tag, q, a, b, big_m, z)?;
    Ok(z)
}

/// Same as [`linearize_min`] with an existing selector binary.
#[allow(clippy::too_many_arguments)]
pub fn linearize_min_with(
    model: &mut MilpModel,
    name: &str,
    tag: &str,
    q: &LinExpr,
    a: &LinExpr,
    b: &LinExpr,
    big_m: f64,
    z: usize,
) -> Result<()> {
    model.add_constraint(format!("{name}_ua"), tag, q, Sense::Le, a)?;
    model.add_constraint(format!("{name}_ub"), tag, q, Sense::Le, b)?;
    // q ≥ a − M + M z
    let mut rhs = a.clone();
    rhs.constant -= big_m;
    rhs.add_term(z, big_m);
    model.add_constraint(format!("{name}_la"), tag, q, Sense::Ge, &rhs)?;
    // q ≥ b − M z
    let mut rhs = b.clone();
    rhs.add_term(z, -big_m);
    model.add_constraint(format!("{name}_lb"), tag, q, Sense::Ge, &rhs)?;
    Ok(())
}
