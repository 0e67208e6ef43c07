//! Hierarchical mixed-discrete design spaces.
//!
//! A [`DesignSpace`] holds the variable definitions, the activation conditions
//! that switch variables on and off, and the forbidden value combinations.
//! Design vectors are plain `f64` slices: continuous variables hold their value,
//! discrete variables hold an option index `0..N_j`.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default limit on the declared discrete size for exhaustive enumeration.
pub const DEFAULT_ENUM_CAP: u128 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid definition for variable `{name}`: {reason}")]
    InvalidDefinition { name: String, reason: String },
    #[error("variable `{var}` has no option matching {value}")]
    InvalidValue { var: String, value: String },
    #[error("activation of `{target}` depends on continuous variable `{driver}`")]
    ContinuousDriver { target: String, driver: String },
    #[error("forbidden clause references continuous variable `{0}`")]
    ContinuousInConstraint(String),
    #[error("activation conditions form a cycle through `{0}`")]
    CyclicActivation(String),
    #[error("value {value} of variable `{var}` is out of range")]
    OutOfRange { var: String, value: f64 },
    #[error("declared size {declared} exceeds the enumeration cap {cap}")]
    EnumerationUnavailable { declared: u128, cap: u128 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarKind {
    Continuous { lower: f64, upper: f64 },
    Integer { lower: i64, upper: i64 },
    Ordinal { values: Vec<f64> },
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableDef {
    pub name: String,
    pub kind: VarKind,
}

impl VariableDef {
    pub fn is_discrete(&self) -> bool {
        !matches!(self.kind, VarKind::Continuous { .. })
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, VarKind::Categorical { .. })
    }

    /// Number of options of a discrete variable; 0 for continuous ones.
    pub fn n_options(&self) -> usize {
        match &self.kind {
            VarKind::Continuous { .. } => 0,
            VarKind::Integer { lower, upper } => (upper - lower + 1) as usize,
            VarKind::Ordinal { values } => values.len(),
            VarKind::Categorical { levels } => levels.len(),
        }
    }

    /// Bounds in vector encoding: value bounds for continuous variables,
    /// `[0, N-1]` for discrete ones.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.kind {
            VarKind::Continuous { lower, upper } => (*lower, *upper),
            _ => (0.0, (self.n_options() - 1) as f64),
        }
    }

    /// Canonical value used for imputation.
    pub fn canonical(&self) -> f64 {
        match &self.kind {
            VarKind::Continuous { lower, upper } => 0.5 * (lower + upper),
            _ => 0.0,
        }
    }

    /// Numeric value of a discrete option, used by comparison predicates.
    /// Categorical options compare by index.
    pub fn numeric(&self, index: usize) -> f64 {
        match &self.kind {
            VarKind::Continuous { .. } => index as f64,
            VarKind::Integer { lower, .. } => (*lower + index as i64) as f64,
            VarKind::Ordinal { values } => values[index],
            VarKind::Categorical { .. } => index as f64,
        }
    }

    fn validate(&self) -> Result<(), SpaceError> {
        let bad = |reason: &str| {
            Err(SpaceError::InvalidDefinition { name: self.name.clone(), reason: reason.to_string() })
        };
        match &self.kind {
            VarKind::Continuous { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return bad("lower bound must be below upper bound");
                }
            }
            VarKind::Integer { lower, upper } => {
                if lower >= upper {
                    return bad("lower bound must be below upper bound");
                }
            }
            VarKind::Ordinal { values } => {
                if values.len() < 2 {
                    return bad("ordinal needs at least two values");
                }
                if values.windows(2).any(|w| !(w[0] < w[1])) {
                    return bad("ordinal values must be strictly increasing");
                }
            }
            VarKind::Categorical { levels } => {
                if levels.len() < 2 {
                    return bad("categorical needs at least two levels");
                }
                let unique: BTreeSet<&String> = levels.iter().collect();
                if unique.len() != levels.len() {
                    return bad("categorical levels must be unique");
                }
            }
        }
        Ok(())
    }
}

/// Value appearing in an equality or membership test: a number, or a
/// categorical level label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Label(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Number(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Number(v as f64)
    }
}

impl From<i32> for Value {
    fn from(v: i32) -> Self {
        Value::Number(v as f64)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Number(v as f64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Label(v.to_string())
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Number(v) => write!(f, "{v}"),
            Value::Label(s) => write!(f, "\"{s}\""),
        }
    }
}

/// Predicate tree over variable names, as written in space files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expr {
    Eq(String, Value),
    In(String, Vec<Value>),
    Gt(String, f64),
    Lt(String, f64),
    Ge(String, f64),
    Le(String, f64),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

impl Expr {
    pub fn eq(var: &str, v: impl Into<Value>) -> Expr {
        Expr::Eq(var.to_string(), v.into())
    }

    pub fn is_in<V: Into<Value>>(var: &str, vs: impl IntoIterator<Item = V>) -> Expr {
        Expr::In(var.to_string(), vs.into_iter().map(Into::into).collect())
    }

    pub fn ge(var: &str, v: f64) -> Expr {
        Expr::Ge(var.to_string(), v)
    }

    pub fn le(var: &str, v: f64) -> Expr {
        Expr::Le(var.to_string(), v)
    }

    pub fn gt(var: &str, v: f64) -> Expr {
        Expr::Gt(var.to_string(), v)
    }

    pub fn lt(var: &str, v: f64) -> Expr {
        Expr::Lt(var.to_string(), v)
    }

    pub fn and(items: Vec<Expr>) -> Expr {
        Expr::And(items)
    }

    pub fn or(items: Vec<Expr>) -> Expr {
        Expr::Or(items)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Gt,
    Lt,
    Ge,
    Le,
}

/// Predicate tree resolved to variable and option indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Eq { var: usize, index: usize },
    In { var: usize, indices: Vec<usize> },
    Cmp { var: usize, op: CmpOp, value: f64 },
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

impl Predicate {
    /// Evaluates the predicate. A leaf on an inactive variable is false.
    pub fn eval(&self, vars: &[VariableDef], x: &[f64], active: &[bool]) -> bool {
        match self {
            Predicate::Eq { var, index } => active[*var] && x[*var] as usize == *index,
            Predicate::In { var, indices } => active[*var] && indices.contains(&(x[*var] as usize)),
            Predicate::Cmp { var, op, value } => {
                if !active[*var] {
                    return false;
                }
                let v = vars[*var].numeric(x[*var] as usize);
                match op {
                    CmpOp::Gt => v > *value,
                    CmpOp::Lt => v < *value,
                    CmpOp::Ge => v >= *value,
                    CmpOp::Le => v <= *value,
                }
            }
            Predicate::And(items) => items.iter().all(|p| p.eval(vars, x, active)),
            Predicate::Or(items) => items.iter().any(|p| p.eval(vars, x, active)),
        }
    }

    pub fn referenced(&self, out: &mut BTreeSet<usize>) {
        match self {
            Predicate::Eq { var, .. } | Predicate::In { var, .. } | Predicate::Cmp { var, .. } => {
                out.insert(*var);
            }
            Predicate::And(items) | Predicate::Or(items) => {
                items.iter().for_each(|p| p.referenced(out));
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Activation {
    target: usize,
    expr: Expr,
    pred: Predicate,
}

#[derive(Debug, Clone)]
struct Clause {
    expr: Expr,
    pred: Predicate,
    refs: Vec<usize>,
}

/// Status ladder of a design point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PointStatus {
    Declared,
    Invalid,
    Correct,
    NonCanonical,
    Valid,
    Failed,
    Viable,
    Infeasible,
    Feasible,
}

impl PointStatus {
    pub fn parent(self) -> Option<PointStatus> {
        use PointStatus::*;
        match self {
            Declared => None,
            Invalid | Correct => Some(Declared),
            NonCanonical | Valid => Some(Correct),
            Failed | Viable => Some(Valid),
            Infeasible | Feasible => Some(Viable),
        }
    }

    /// True if `self` is `other` or lies below it on the ladder.
    pub fn implies(self, other: PointStatus) -> bool {
        let mut cur = Some(self);
        while let Some(s) = cur {
            if s == other {
                return true;
            }
            cur = s.parent();
        }
        false
    }

    /// Status of an evaluated valid point: NaN outputs mean failure.
    pub fn from_evaluation(f: &[f64], g: &[f64]) -> PointStatus {
        if f.iter().chain(g).any(|v| v.is_nan()) {
            PointStatus::Failed
        } else if g.iter().any(|&v| v > 0.0) {
            PointStatus::Infeasible
        } else {
            PointStatus::Feasible
        }
    }
}

/// All valid discrete vectors of a space plus the counts needed for the
/// hierarchy metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    /// Valid vectors in lexicographic order, continuous variables at mid-bounds.
    pub vectors: Vec<Vec<f64>>,
    pub masks: Vec<Vec<bool>>,
    pub n_declared: u128,
    pub n_correct: usize,
    /// Active continuous variables summed over the correct vectors.
    pub correct_active_cont: usize,
}

impl Enumeration {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DesignSpace {
    vars: Vec<VariableDef>,
    activations: Vec<Activation>,
    clauses: Vec<Clause>,
    single_option_inactive: bool,
    order: Vec<usize>,
    conds: Vec<Vec<usize>>,
    /// Clauses whose highest-index referenced variable is the key.
    clauses_of: Vec<Vec<usize>>,
    enum_cache: OnceLock<Result<Arc<Enumeration>, SpaceError>>,
}

#[derive(Debug, Clone)]
pub struct SpaceBuilder {
    vars: Vec<VariableDef>,
    activations: Vec<(String, Expr)>,
    forbidden: Vec<Expr>,
    single_option_inactive: bool,
}

impl Default for SpaceBuilder {
    fn default() -> Self {
        SpaceBuilder { vars: Vec::new(), activations: Vec::new(), forbidden: Vec::new(), single_option_inactive: true }
    }
}

impl SpaceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable(mut self, name: &str, kind: VarKind) -> Self {
        self.vars.push(VariableDef { name: name.to_string(), kind });
        self
    }

    pub fn continuous(self, name: &str, lower: f64, upper: f64) -> Self {
        self.variable(name, VarKind::Continuous { lower, upper })
    }

    pub fn integer(self, name: &str, lower: i64, upper: i64) -> Self {
        self.variable(name, VarKind::Integer { lower, upper })
    }

    pub fn ordinal(self, name: &str, values: &[f64]) -> Self {
        self.variable(name, VarKind::Ordinal { values: values.to_vec() })
    }

    pub fn categorical(self, name: &str, levels: &[&str]) -> Self {
        let levels = levels.iter().map(|s| s.to_string()).collect();
        self.variable(name, VarKind::Categorical { levels })
    }

    /// Adds an activation condition; several conditions on one target are AND-ed.
    pub fn active_if(mut self, target: &str, expr: Expr) -> Self {
        self.activations.push((target.to_string(), expr));
        self
    }

    /// Adds a forbidden clause: vectors for which it holds are incorrect.
    pub fn forbid(mut self, expr: Expr) -> Self {
        self.forbidden.push(expr);
        self
    }

    pub fn single_option_inactive(mut self, on: bool) -> Self {
        self.single_option_inactive = on;
        self
    }

    pub fn build(self) -> Result<DesignSpace, SpaceError> {
        let mut index = HashMap::new();
        for (i, v) in self.vars.iter().enumerate() {
            v.validate()?;
            if index.insert(v.name.clone(), i).is_some() {
                return Err(SpaceError::DuplicateName(v.name.clone()));
            }
        }
        let n = self.vars.len();

        let mut activations = Vec::new();
        let mut conds = vec![Vec::new(); n];
        let mut edges = vec![BTreeSet::new(); n];
        for (target, expr) in self.activations {
            let t = *index.get(&target).ok_or_else(|| SpaceError::UnknownVariable(target.clone()))?;
            let pred = resolve(&expr, &self.vars, &index)?;
            let mut refs = BTreeSet::new();
            pred.referenced(&mut refs);
            for &d in &refs {
                if !self.vars[d].is_discrete() {
                    return Err(SpaceError::ContinuousDriver { target, driver: self.vars[d].name.clone() });
                }
                edges[d].insert(t);
            }
            conds[t].push(activations.len());
            activations.push(Activation { target: t, expr, pred });
        }

        let order = topo_order(&edges).map_err(|v| SpaceError::CyclicActivation(self.vars[v].name.clone()))?;

        let mut clauses = Vec::new();
        let mut clauses_of = vec![Vec::new(); n];
        for expr in self.forbidden {
            let pred = resolve(&expr, &self.vars, &index)?;
            let mut refs = BTreeSet::new();
            pred.referenced(&mut refs);
            for &r in &refs {
                if !self.vars[r].is_discrete() {
                    return Err(SpaceError::ContinuousInConstraint(self.vars[r].name.clone()));
                }
            }
            // a clause restricts the options of the last variable it references
            if let Some(&last) = refs.iter().next_back() {
                clauses_of[last].push(clauses.len());
            }
            clauses.push(Clause { expr, pred, refs: refs.into_iter().collect() });
        }

        Ok(DesignSpace {
            vars: self.vars,
            activations,
            clauses,
            single_option_inactive: self.single_option_inactive,
            order,
            conds,
            clauses_of,
            enum_cache: OnceLock::new(),
        })
    }
}

fn resolve(expr: &Expr, vars: &[VariableDef], index: &HashMap<String, usize>) -> Result<Predicate, SpaceError> {
    let var_of = |name: &str| index.get(name).copied().ok_or_else(|| SpaceError::UnknownVariable(name.to_string()));
    let option_of = |var: usize, value: &Value| -> Result<usize, SpaceError> {
        let def = &vars[var];
        let err = || SpaceError::InvalidValue { var: def.name.clone(), value: value.to_string() };
        match (&def.kind, value) {
            (VarKind::Categorical { levels }, Value::Label(s)) => levels.iter().position(|l| l == s).ok_or_else(err),
            (VarKind::Categorical { levels }, Value::Number(v)) => {
                let i = *v as usize;
                if v.fract() == 0.0 && *v >= 0.0 && i < levels.len() {
                    Ok(i)
                } else {
                    Err(err())
                }
            }
            (VarKind::Integer { .. } | VarKind::Ordinal { .. }, Value::Number(v)) => {
                (0..def.n_options()).find(|&i| def.numeric(i) == *v).ok_or_else(err)
            }
            _ => Err(err()),
        }
    };
    let leaf_var = var_of;
    Ok(match expr {
        Expr::Eq(name, value) => {
            let var = leaf_var(name)?;
            Predicate::Eq { var, index: option_of(var, value)? }
        }
        Expr::In(name, values) => {
            let var = leaf_var(name)?;
            let indices = values.iter().map(|v| option_of(var, v)).collect::<Result<Vec<_>, _>>()?;
            Predicate::In { var, indices }
        }
        Expr::Gt(name, v) => Predicate::Cmp { var: leaf_var(name)?, op: CmpOp::Gt, value: *v },
        Expr::Lt(name, v) => Predicate::Cmp { var: leaf_var(name)?, op: CmpOp::Lt, value: *v },
        Expr::Ge(name, v) => Predicate::Cmp { var: leaf_var(name)?, op: CmpOp::Ge, value: *v },
        Expr::Le(name, v) => Predicate::Cmp { var: leaf_var(name)?, op: CmpOp::Le, value: *v },
        Expr::And(items) => Predicate::And(items.iter().map(|e| resolve(e, vars, index)).collect::<Result<_, _>>()?),
        Expr::Or(items) => Predicate::Or(items.iter().map(|e| resolve(e, vars, index)).collect::<Result<_, _>>()?),
    })
}

/// Kahn's algorithm with smallest-index tie breaking. Returns a variable on a
/// cycle on failure.
fn topo_order(edges: &[BTreeSet<usize>]) -> Result<Vec<usize>, usize> {
    let n = edges.len();
    let mut indeg = vec![0usize; n];
    for targets in edges {
        for &t in targets {
            indeg[t] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(v);
        for &t in &edges[v] {
            indeg[t] -= 1;
            if indeg[t] == 0 {
                ready.insert(t);
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
        return Err(stuck);
    }
    Ok(order)
}

impl PartialEq for DesignSpace {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars
            && self.single_option_inactive == other.single_option_inactive
            && self.activations.len() == other.activations.len()
            && self.activations.iter().zip(&other.activations).all(|(a, b)| a.target == b.target && a.pred == b.pred)
            && self.clauses.len() == other.clauses.len()
            && self.clauses.iter().zip(&other.clauses).all(|(a, b)| a.pred == b.pred)
    }
}

impl DesignSpace {
    pub fn builder() -> SpaceBuilder {
        SpaceBuilder::new()
    }

    pub fn variables(&self) -> &[VariableDef] {
        &self.vars
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn discrete_indices(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&i| self.vars[i].is_discrete()).collect()
    }

    pub fn continuous_indices(&self) -> Vec<usize> {
        (0..self.vars.len()).filter(|&i| !self.vars[i].is_discrete()).collect()
    }

    pub fn single_option_inactive(&self) -> bool {
        self.single_option_inactive
    }

    pub fn activation_exprs(&self) -> Vec<(String, Expr)> {
        self.activations.iter().map(|a| (self.vars[a.target].name.clone(), a.expr.clone())).collect()
    }

    pub fn forbidden_exprs(&self) -> Vec<Expr> {
        self.clauses.iter().map(|c| c.expr.clone()).collect()
    }

    pub fn has_hierarchy(&self) -> bool {
        !self.activations.is_empty() || !self.clauses.is_empty()
    }

    /// Product of the discrete option counts (1 for purely continuous spaces).
    pub fn declared_size(&self) -> u128 {
        self.vars
            .iter()
            .filter(|v| v.is_discrete())
            .fold(1u128, |acc, v| acc.saturating_mul(v.n_options() as u128))
    }

    /// Checks length and ranges of a design vector.
    pub fn check(&self, x: &[f64]) -> Result<(), SpaceError> {
        if x.len() != self.vars.len() {
            return Err(SpaceError::DimensionMismatch { expected: self.vars.len(), got: x.len() });
        }
        for (v, &xi) in self.vars.iter().zip(x) {
            let (lo, hi) = v.bounds();
            let integral = !v.is_discrete() || xi.fract() == 0.0;
            if !(xi >= lo && xi <= hi && integral) {
                return Err(SpaceError::OutOfRange { var: v.name.clone(), value: xi });
            }
        }
        Ok(())
    }

    /// Activeness mask of `x`.
    pub fn activeness(&self, x: &[f64]) -> Result<Vec<bool>, SpaceError> {
        self.check(x)?;
        Ok(self.mask(x))
    }

    /// Activeness mask without input validation.
    ///
    /// With the single-option rule enabled, a discrete variable also becomes
    /// inactive when only one of its options avoids the forbidden clauses in
    /// which it is the last referenced variable, given the values of the
    /// variables before it.
    pub fn mask(&self, x: &[f64]) -> Vec<bool> {
        let n = self.vars.len();
        let mut forced = vec![false; n];
        loop {
            let mask = self.activation_pass(x, &forced);
            if !self.single_option_inactive {
                return mask;
            }
            let mut changed = false;
            for j in 0..n {
                if !mask[j] || forced[j] || self.clauses_of[j].is_empty() {
                    continue;
                }
                let allowed = (0..self.vars[j].n_options())
                    .filter(|&o| !self.option_violates(x, j, o, &forced))
                    .count();
                if allowed == 1 {
                    forced[j] = true;
                    changed = true;
                }
            }
            if !changed {
                return mask;
            }
        }
    }

    fn activation_pass(&self, x: &[f64], forced: &[bool]) -> Vec<bool> {
        let mut mask = vec![true; self.vars.len()];
        for &v in &self.order {
            mask[v] = !forced[v] && self.conds[v].iter().all(|&a| self.activations[a].pred.eval(&self.vars, x, &mask));
        }
        mask
    }

    fn option_violates(&self, x: &[f64], j: usize, option: usize, forced: &[bool]) -> bool {
        let mut xo = x.to_vec();
        xo[j] = option as f64;
        let mask = self.activation_pass(&xo, forced);
        self.clauses_of[j].iter().any(|&c| self.clause_violated(c, &xo, &mask))
    }

    fn clause_violated(&self, c: usize, x: &[f64], mask: &[bool]) -> bool {
        let clause = &self.clauses[c];
        clause.refs.iter().all(|&r| mask[r]) && clause.pred.eval(&self.vars, x, mask)
    }

    fn correct_under(&self, x: &[f64], mask: &[bool]) -> bool {
        (0..self.clauses.len()).all(|c| !self.clause_violated(c, x, mask))
    }

    /// True when no forbidden clause holds; clauses touching inactive
    /// variables count as satisfied.
    pub fn is_correct(&self, x: &[f64]) -> bool {
        let mask = self.mask(x);
        self.correct_under(x, &mask)
    }

    /// Correct and canonical.
    pub fn is_valid(&self, x: &[f64]) -> bool {
        let mask = self.mask(x);
        self.correct_under(x, &mask) && self.is_canonical(x, &mask)
    }

    fn is_canonical(&self, x: &[f64], mask: &[bool]) -> bool {
        self.vars.iter().zip(x).zip(mask).all(|((v, &xi), &a)| a || xi == v.canonical())
    }

    /// Position of `x` on the discrete part of the status ladder.
    pub fn status(&self, x: &[f64]) -> PointStatus {
        let mask = self.mask(x);
        if !self.correct_under(x, &mask) {
            PointStatus::Invalid
        } else if !self.is_canonical(x, &mask) {
            PointStatus::NonCanonical
        } else {
            PointStatus::Valid
        }
    }

    /// Replaces inactive variables by their canonical values.
    pub fn impute_with(&self, x: &[f64], mask: &[bool]) -> Vec<f64> {
        self.vars
            .iter()
            .zip(x)
            .zip(mask)
            .map(|((v, &xi), &a)| if a { xi } else { v.canonical() })
            .collect()
    }

    /// Imputes `x`, returning the imputed vector and its mask.
    pub fn impute(&self, x: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let mask = self.mask(x);
        (self.impute_with(x, &mask), mask)
    }

    /// Cached enumeration with the default cap.
    pub fn enumeration(&self) -> Result<Arc<Enumeration>, SpaceError> {
        self.enum_cache.get_or_init(|| self.enumerate_with_cap(DEFAULT_ENUM_CAP).map(Arc::new)).clone()
    }

    /// Exhaustive scan of the discrete Cartesian product, first variable
    /// slowest.
    pub fn enumerate_with_cap(&self, cap: u128) -> Result<Enumeration, SpaceError> {
        let declared = self.declared_size();
        if declared > cap {
            return Err(SpaceError::EnumerationUnavailable { declared, cap });
        }
        let disc = self.discrete_indices();
        let cont = self.continuous_indices();
        let mut x: Vec<f64> = self.vars.iter().map(|v| v.canonical()).collect();
        let mut out = Enumeration {
            vectors: Vec::new(),
            masks: Vec::new(),
            n_declared: declared,
            n_correct: 0,
            correct_active_cont: 0,
        };
        loop {
            let mask = self.mask(&x);
            if self.correct_under(&x, &mask) {
                out.n_correct += 1;
                out.correct_active_cont += cont.iter().filter(|&&i| mask[i]).count();
                if self.is_canonical(&x, &mask) {
                    out.vectors.push(x.clone());
                    out.masks.push(mask);
                }
            }
            // odometer step, last discrete variable fastest
            let mut k = disc.len();
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                let i = disc[k];
                if (x[i] as usize) + 1 < self.vars[i].n_options() {
                    x[i] += 1.0;
                    break;
                }
                x[i] = 0.0;
            }
        }
    }

    pub fn enumerate_valid_discrete(&self) -> Result<Arc<Enumeration>, SpaceError> {
        self.enumeration()
    }

    /// Key of the discrete part of a vector, for set membership checks.
    pub fn discrete_key(&self, x: &[f64]) -> Vec<u32> {
        self.vars.iter().zip(x).filter(|(v, _)| v.is_discrete()).map(|(_, &xi)| xi as u32).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2() -> DesignSpace {
        DesignSpace::builder()
            .integer("x0", 0, 3)
            .integer("x1", 0, 2)
            .active_if("x1", Expr::is_in("x0", [0, 1]))
            .forbid(Expr::and(vec![Expr::eq("x0", 0), Expr::eq("x1", 2)]))
            .forbid(Expr::and(vec![Expr::eq("x0", 1), Expr::eq("x1", 1)]))
            .build()
            .unwrap()
    }

    #[test]
    fn rejects_cycles() {
        let err = DesignSpace::builder()
            .integer("a", 0, 1)
            .integer("b", 0, 1)
            .active_if("a", Expr::eq("b", 1))
            .active_if("b", Expr::eq("a", 1))
            .build()
            .unwrap_err();
        assert!(matches!(err, SpaceError::CyclicActivation(_)));
    }

    #[test]
    fn rejects_continuous_driver() {
        let err = DesignSpace::builder()
            .continuous("c", 0.0, 1.0)
            .integer("b", 0, 1)
            .active_if("b", Expr::ge("c", 0.5))
            .build()
            .unwrap_err();
        assert!(matches!(err, SpaceError::ContinuousDriver { .. }));
    }

    #[test]
    fn rejects_bad_definitions() {
        assert!(DesignSpace::builder().continuous("c", 1.0, 1.0).build().is_err());
        assert!(DesignSpace::builder().ordinal("o", &[1.0, 1.0]).build().is_err());
        assert!(DesignSpace::builder().categorical("k", &["a", "a"]).build().is_err());
        assert!(DesignSpace::builder().categorical("k", &["a"]).build().is_err());
        assert!(DesignSpace::builder().integer("a", 0, 1).integer("a", 0, 1).build().is_err());
    }

    #[test]
    fn impute_table2_row() {
        let s = table2();
        let (xi, mask) = s.impute(&[2.0, 1.0]);
        assert_eq!(mask, vec![true, false]);
        assert_eq!(xi, vec![2.0, 0.0]);
    }

    #[test]
    fn impute_continuous_mid() {
        let s = DesignSpace::builder()
            .integer("a", 0, 1)
            .continuous("c", 2.0, 10.0)
            .active_if("c", Expr::eq("a", 1))
            .build()
            .unwrap();
        assert_eq!(s.impute(&[0.0, 3.0]).0, vec![0.0, 6.0]);
        assert_eq!(s.impute(&[1.0, 3.0]).0, vec![1.0, 3.0]);
    }

    #[test]
    fn table2_counts() {
        let s = table2();
        assert_eq!(s.declared_size(), 12);
        let e = s.enumeration().unwrap();
        assert_eq!(e.len(), 6);
        assert_eq!(e.n_correct, 10);
        let rows: Vec<Vec<f64>> = e.vectors.clone();
        assert_eq!(
            rows,
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 2.0], vec![2.0, 0.0], vec![3.0, 0.0]]
        );
    }

    #[test]
    fn no_activations_all_active() {
        let s = DesignSpace::builder().integer("a", 0, 2).continuous("c", 0.0, 1.0).build().unwrap();
        assert_eq!(s.activeness(&[1.0, 0.3]).unwrap(), vec![true, true]);
        assert!(s.is_correct(&[2.0, 0.9]));
    }

    #[test]
    fn dimension_mismatch() {
        let s = table2();
        assert!(matches!(s.activeness(&[0.0]), Err(SpaceError::DimensionMismatch { .. })));
    }

    #[test]
    fn enumeration_cap() {
        let s = table2();
        assert!(matches!(s.enumerate_with_cap(5), Err(SpaceError::EnumerationUnavailable { declared: 12, cap: 5 })));
    }

    #[test]
    fn status_ladder() {
        let s = table2();
        assert_eq!(s.status(&[0.0, 2.0]), PointStatus::Invalid);
        assert_eq!(s.status(&[2.0, 1.0]), PointStatus::NonCanonical);
        assert_eq!(s.status(&[2.0, 0.0]), PointStatus::Valid);
        assert!(PointStatus::Feasible.implies(PointStatus::Valid));
        assert!(PointStatus::Valid.implies(PointStatus::Correct));
        assert!(!PointStatus::Invalid.implies(PointStatus::Correct));
        assert_eq!(PointStatus::from_evaluation(&[f64::NAN], &[]), PointStatus::Failed);
        assert_eq!(PointStatus::from_evaluation(&[1.0], &[0.5]), PointStatus::Infeasible);
        assert_eq!(PointStatus::from_evaluation(&[1.0], &[-0.5]), PointStatus::Feasible);
    }

    #[test]
    fn purely_continuous_declared_one() {
        let s = DesignSpace::builder().continuous("c", 0.0, 1.0).build().unwrap();
        assert_eq!(s.declared_size(), 1);
        assert_eq!(s.enumeration().unwrap().len(), 1);
    }
}
