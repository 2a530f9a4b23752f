//! Shared data model: covariate registry, batches, coefficient vectors,
//! shrinkage targets and the sequential estimator state.
//!
//! Covariate sets may differ between batches. Every estimate lives on the
//! registry, the append-only union of all covariate names seen so far, and a
//! batch is zero-filled onto it before fitting. A zero column leaves its
//! coordinate entirely to the penalty, so it is shrunk exactly onto the
//! target.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::tuning::SelectionReport;

/// Simplex tolerance for mixture weights.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Logistic,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Linear => f.write_str("linear"),
            Family::Logistic => f.write_str("logistic"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Family::Linear),
            "logistic" => Ok(Family::Logistic),
            other => validation(format!("unknown family `{other}`")),
        }
    }
}

/// Ordered, append-only set of covariate names.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct CovariateRegistry {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for CovariateRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

impl TryFrom<Vec<String>> for CovariateRegistry {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        Self::new(names)
    }
}

impl From<CovariateRegistry> for Vec<String> {
    fn from(r: CovariateRegistry) -> Self {
        r.names
    }
}

impl CovariateRegistry {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut reg = Self::default();
        for name in names {
            let name = name.into();
            if reg.index.contains_key(&name) {
                return validation(format!("duplicate covariate `{name}`"));
            }
            reg.index.insert(name.clone(), reg.names.len());
            reg.names.push(name);
        }
        Ok(reg)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Returns a registry extended by the names not yet present, in order of
    /// first appearance. Existing indices are unchanged.
    pub fn register<S: AsRef<str>>(&self, names: impl IntoIterator<Item = S>) -> Self {
        let mut reg = self.clone();
        for name in names {
            let name = name.as_ref();
            if !reg.index.contains_key(name) {
                reg.index.insert(name.to_owned(), reg.names.len());
                reg.names.push(name.to_owned());
            }
        }
        reg
    }
}

/// One study's data: design matrix, response and covariate names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BatchRepr", into = "BatchRepr")]
pub struct Batch {
    t: u64,
    x: DMatrix<f64>,
    y: DVector<f64>,
    covariates: Vec<String>,
    family: Family,
}

impl Batch {
    pub fn new(
        t: u64,
        x: DMatrix<f64>,
        y: DVector<f64>,
        covariates: Vec<String>,
        family: Family,
    ) -> Result<Self> {
        if t == 0 {
            return validation("batch time index must be positive");
        }
        if x.ncols() != covariates.len() {
            return validation(format!(
                "design has {} columns but {} covariate names",
                x.ncols(),
                covariates.len()
            ));
        }
        if x.nrows() != y.len() {
            return validation(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            ));
        }
        // reject duplicates
        CovariateRegistry::new(covariates.iter().cloned())?;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return validation("batch contains non-finite values");
        }
        if family == Family::Logistic && y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return validation("logistic response must be 0 or 1");
        }
        Ok(Self {
            t,
            x,
            y,
            covariates,
            family,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn covariates(&self) -> &[String] {
        &self.covariates
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Same data under a different time index.
    pub fn with_t(mut self, t: u64) -> Result<Self> {
        if t == 0 {
            return validation("batch time index must be positive");
        }
        self.t = t;
        Ok(self)
    }
}

#[derive(Serialize, Deserialize)]
struct BatchRepr {
    t: u64,
    family: Family,
    covariates: Vec<String>,
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
}

impl TryFrom<BatchRepr> for Batch {
    type Error = Error;

    fn try_from(r: BatchRepr) -> Result<Self> {
        let p = r.covariates.len();
        if r.rows.iter().any(|row| row.len() != p) {
            return validation("ragged design rows");
        }
        let x = DMatrix::from_fn(r.rows.len(), p, |i, j| r.rows[i][j]);
        Batch::new(r.t, x, DVector::from_vec(r.y), r.covariates, r.family)
    }
}

impl From<Batch> for BatchRepr {
    fn from(b: Batch) -> Self {
        let rows = b
            .x
            .row_iter()
            .map(|row| row.iter().copied().collect())
            .collect();
        Self {
            t: b.t,
            family: b.family,
            covariates: b.covariates,
            rows,
            y: b.y.iter().copied().collect(),
        }
    }
}

/// Named regression coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct CoefficientVector {
    values: BTreeMap<String, f64>,
}

impl TryFrom<BTreeMap<String, f64>> for CoefficientVector {
    type Error = Error;

    fn try_from(values: BTreeMap<String, f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<CoefficientVector> for BTreeMap<String, f64> {
    fn from(c: CoefficientVector) -> Self {
        c.values
    }
}

impl CoefficientVector {
    pub fn new(values: BTreeMap<String, f64>) -> Result<Self> {
        if let Some((k, _)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return validation(format!("coefficient `{k}` is not finite"));
        }
        Ok(Self { values })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn zeros<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Self {
        Self {
            values: names
                .into_iter()
                .map(|n| (n.as_ref().to_owned(), 0.0))
                .collect(),
        }
    }

    /// Coefficients named by registry position.
    pub fn from_dense(registry: &CovariateRegistry, values: &DVector<f64>) -> Result<Self> {
        if values.len() != registry.len() {
            return validation("coefficient length does not match registry");
        }
        Self::new(
            registry
                .names()
                .iter()
                .cloned()
                .zip(values.iter().copied())
                .collect(),
        )
    }

    /// Dense vector in registry order; names missing here take `default`.
    pub fn to_dense(&self, registry: &CovariateRegistry, default: f64) -> DVector<f64> {
        DVector::from_iterator(
            registry.len(),
            registry
                .names()
                .iter()
                .map(|n| self.values.get(n).copied().unwrap_or(default)),
        )
    }

    /// Dense vector in registry order; every registry name must be present.
    pub fn to_dense_strict(&self, registry: &CovariateRegistry) -> Result<DVector<f64>> {
        registry
            .names()
            .iter()
            .map(|n| {
                self.values
                    .get(n)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("no value for covariate `{n}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(DVector::from_vec)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Mixture weights of a [`TargetSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetWeights {
    Fixed(Vec<f64>),
    /// Weights chosen jointly with the penalty by cross-validation.
    Tuned,
}

/// One or more shrinkage targets combined with simplex weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub targets: Vec<CoefficientVector>,
    pub weights: TargetWeights,
}

impl TargetSpec {
    pub fn single(target: CoefficientVector) -> Self {
        Self {
            targets: vec![target],
            weights: TargetWeights::Fixed(vec![1.0]),
        }
    }

    pub fn new(targets: Vec<CoefficientVector>, weights: TargetWeights) -> Result<Self> {
        if targets.is_empty() {
            return validation("target spec needs at least one target");
        }
        if let TargetWeights::Fixed(w) = &weights {
            if w.len() != targets.len() {
                return validation("one weight per target required");
            }
            check_simplex(w)?;
        }
        Ok(Self { targets, weights })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

pub(crate) fn check_simplex(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return validation("empty weight vector");
    }
    if weights
        .iter()
        .any(|&w| !(-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&w))
    {
        return validation("mixture weight outside [0, 1]");
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return validation(format!("mixture weights sum to {sum}, not 1"));
    }
    Ok(())
}

/// Coordinate-wise convex combination of the targets.
pub fn mixture_target(spec: &TargetSpec, weights: &[f64]) -> Result<CoefficientVector> {
    if weights.len() != spec.targets.len() {
        return validation("one weight per target required");
    }
    check_simplex(weights)?;
    let first = &spec.targets[0];
    for other in &spec.targets[1..] {
        if !first.names().eq(other.names()) {
            return validation("mixture targets must share a covariate set");
        }
    }
    // a degenerate weight returns its target untouched
    if let Some(g) = weights.iter().position(|&w| w == 1.0) {
        return Ok(spec.targets[g].clone());
    }
    let values = first
        .names()
        .map(|name| {
            let v = spec
                .targets
                .iter()
                .zip(weights)
                .map(|(t, &w)| w * t.values[name])
                .sum();
            (name.to_owned(), v)
        })
        .collect();
    CoefficientVector::new(values)
}

/// Zero-filled design over the full registry.
pub fn align_batch(batch: &Batch, registry: &CovariateRegistry) -> Result<DMatrix<f64>> {
    let cols = batch
        .covariates()
        .iter()
        .map(|name| {
            registry
                .index_of(name)
                .ok_or_else(|| Error::UnknownCovariate(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut aligned = DMatrix::zeros(batch.n(), registry.len());
    for (local, &global) in cols.iter().enumerate() {
        aligned.set_column(global, &batch.x().column(local));
    }
    Ok(aligned)
}

/// One completed update step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub t: u64,
    pub lambda: f64,
    pub weights: Option<Vec<f64>>,
    pub estimate: CoefficientVector,
    pub diagnostics: Option<SelectionReport>,
}

/// Sequential estimator state: the chain of estimates plus the batches the
/// cross-validation constraint needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    pub family: Family,
    pub registry: CovariateRegistry,
    /// Last processed time index (0 before the first update).
    pub t: u64,
    pub current: CoefficientVector,
    pub history: Vec<HistoryRecord>,
    pub retained: Vec<Batch>,
    pub init_target: CoefficientVector,
    pub init_note: String,
    /// Target value for covariates with no earlier estimate.
    pub new_covariate_value: f64,
}

impl EstimatorState {
    pub fn new(
        family: Family,
        registry: CovariateRegistry,
        init_target: CoefficientVector,
        init_note: impl Into<String>,
    ) -> Result<Self> {
        for name in init_target.names() {
            if !registry.contains(name) {
                return Err(Error::UnknownCovariate(name.to_owned()));
            }
        }
        let current = CoefficientVector::from_dense(&registry, &init_target.to_dense(&registry, 0.0))?;
        Ok(Self {
            family,
            registry,
            t: 0,
            current,
            history: Vec::new(),
            retained: Vec::new(),
            init_target,
            init_note: init_note.into(),
            new_covariate_value: 0.0,
        })
    }

    /// Empty state with an all-zero initial target over `names`.
    pub fn zero_init<S: AsRef<str>>(family: Family, names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(|s| s.as_ref().to_owned()).collect();
        let registry = CovariateRegistry::new(names.iter().cloned())?;
        Self::new(family, registry, CoefficientVector::zeros(&names), "zero target")
    }

    /// Fallback vector used by [`assemble_target`] for never-estimated names.
    pub fn fallback(&self) -> CoefficientVector {
        CoefficientVector {
            values: self
                .registry
                .names()
                .iter()
                .map(|n| (n.clone(), self.new_covariate_value))
                .collect(),
        }
    }

    /// Total sample size of the retained batches.
    pub fn retained_samples(&self) -> usize {
        self.retained.iter().map(Batch::n).sum()
    }

    /// Appends one step. The new batch's covariates are registered.
    pub fn advance(&self, batch: Batch, record: HistoryRecord) -> Result<Self> {
        if record.t <= self.t || batch.t() != record.t {
            return validation(format!(
                "time index {} must exceed the last processed index {}",
                record.t, self.t
            ));
        }
        let registry = self.registry.register(batch.covariates());
        for name in record.estimate.names() {
            if !registry.contains(name) {
                return Err(Error::UnknownCovariate(name.to_owned()));
            }
        }
        let mut next = self.clone();
        next.registry = registry;
        next.t = record.t;
        next.current = record.estimate.clone();
        next.history.push(record);
        next.retained.push(batch);
        Ok(next)
    }

    /// Checks the structural invariants, e.g. after loading from disk.
    pub fn validate(&self) -> Result<()> {
        let mut last = 0;
        for rec in &self.history {
            if rec.t <= last {
                return validation("history time indices must strictly increase");
            }
            last = rec.t;
        }
        if let Some(rec) = self.history.last() {
            if rec.estimate != self.current || rec.t != self.t {
                return validation("current estimate differs from last history entry");
            }
        }
        let known = |c: &CoefficientVector| -> Result<()> {
            match c.names().find(|n| !self.registry.contains(n)) {
                Some(n) => Err(Error::UnknownCovariate(n.to_owned())),
                None => Ok(()),
            }
        };
        known(&self.current)?;
        known(&self.init_target)?;
        for rec in &self.history {
            known(&rec.estimate)?;
        }
        for b in &self.retained {
            if b.family() != self.family {
                return validation("retained batch family differs from state family");
            }
            if let Some(n) = b.covariates().iter().find(|n| !self.registry.contains(n)) {
                return Err(Error::UnknownCovariate(n.clone()));
            }
        }
        if !self.new_covariate_value.is_finite() {
            return validation("fallback value must be finite");
        }
        Ok(())
    }
}

/// Element-wise target: for each requested name, the most recent history
/// estimate containing it, else the initial target, else `fallback`.
pub fn assemble_target<S: AsRef<str>>(
    state: &EstimatorState,
    names: impl IntoIterator<Item = S>,
    fallback: &CoefficientVector,
) -> Result<CoefficientVector> {
    let mut values = BTreeMap::new();
    for name in names {
        let name = name.as_ref();
        let v = state
            .history
            .iter()
            .rev()
            .find_map(|rec| rec.estimate.get(name))
            .or_else(|| state.init_target.get(name))
            .or_else(|| fallback.get(name))
            .ok_or_else(|| {
                Error::Config(format!("no estimate or fallback for covariate `{name}`"))
            })?;
        values.insert(name.to_owned(), v);
    }
    CoefficientVector::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn batch(cov: &[&str], rows: &[&[f64]], y: &[f64]) -> Batch {
        let x = DMatrix::from_fn(rows.len(), cov.len(), |i, j| rows[i][j]);
        Batch::new(1, x, DVector::from_column_slice(y), names(cov), Family::Linear).unwrap()
    }

    fn record(t: u64, est: &[(&str, f64)]) -> HistoryRecord {
        HistoryRecord {
            t,
            lambda: 1.0,
            weights: None,
            estimate: CoefficientVector::from_pairs(est.iter().map(|&(k, v)| (k, v))).unwrap(),
            diagnostics: None,
        }
    }

    #[test]
    fn align_zero_fills_absent_column() {
        let reg = CovariateRegistry::new(["a", "b"]).unwrap();
        let x = align_batch(&batch(&["a"], &[&[3.0]], &[1.0]), &reg).unwrap();
        assert_eq!(x, DMatrix::from_row_slice(1, 2, &[3.0, 0.0]));
    }

    #[test]
    fn align_reorders_columns() {
        let reg = CovariateRegistry::new(["a", "b"]).unwrap();
        let x = align_batch(&batch(&["b", "a"], &[&[1.0, 2.0]], &[1.0]), &reg).unwrap();
        assert_eq!(x, DMatrix::from_row_slice(1, 2, &[2.0, 1.0]));
    }

    #[test]
    fn align_unknown_name_is_registry_error() {
        let reg = CovariateRegistry::new(["a", "b"]).unwrap();
        let err = align_batch(&batch(&["c"], &[&[1.0]], &[1.0]), &reg).unwrap_err();
        assert!(matches!(err, Error::UnknownCovariate(n) if n == "c"));
    }

    #[test]
    fn registry_is_append_only() {
        let reg = CovariateRegistry::new(["a", "b"]).unwrap();
        let grown = reg.register(["c", "a", "d"]);
        assert_eq!(grown.names(), &names(&["a", "b", "c", "d"])[..]);
        assert_eq!(grown.index_of("b"), Some(1));
        assert!(CovariateRegistry::new(["a", "a"]).is_err());
    }

    #[test]
    fn batch_rejects_bad_shapes_and_values() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(Batch::new(1, x.clone(), DVector::from_vec(vec![1.0]), names(&["a"]), Family::Linear).is_err());
        assert!(Batch::new(1, x.clone(), DVector::from_vec(vec![1.0, 2.0]), names(&["a", "b"]), Family::Linear).is_err());
        assert!(Batch::new(1, x.clone(), DVector::from_vec(vec![0.0, 2.0]), names(&["a"]), Family::Logistic).is_err());
        assert!(Batch::new(1, x.clone(), DVector::from_vec(vec![f64::NAN, 2.0]), names(&["a"]), Family::Linear).is_err());
        assert!(Batch::new(1, x, DVector::from_vec(vec![0.0, 1.0]), names(&["a"]), Family::Logistic).is_ok());
    }

    #[test]
    fn assemble_latest_wins_per_coordinate() {
        let mut state = EstimatorState::zero_init(Family::Linear, ["a", "b", "c"]).unwrap();
        state.init_target = CoefficientVector::default();
        state.history = vec![record(1, &[("a", 1.0)]), record(2, &[("a", 1.5), ("b", 2.0)])];
        let fallback = CoefficientVector::zeros(["a", "b", "c"]);
        let target = assemble_target(&state, ["a", "b", "c"], &fallback).unwrap();
        assert_eq!(
            target,
            CoefficientVector::from_pairs([("a", 1.5), ("b", 2.0), ("c", 0.0)]).unwrap()
        );
    }

    #[test]
    fn assemble_uses_fallback_on_empty_history() {
        let mut state = EstimatorState::zero_init(Family::Linear, ["a"]).unwrap();
        state.init_target = CoefficientVector::default();
        let fallback = CoefficientVector::from_pairs([("a", 0.7)]).unwrap();
        let target = assemble_target(&state, ["a"], &fallback).unwrap();
        assert_eq!(target.get("a"), Some(0.7));
    }

    #[test]
    fn assemble_keeps_unobserved_coordinate_from_older_estimate() {
        let mut state = EstimatorState::zero_init(Family::Linear, ["a", "b"]).unwrap();
        state.history = vec![record(1, &[("a", 1.0), ("b", 3.0)]), record(2, &[("a", 2.0)])];
        let target = assemble_target(&state, ["a", "b"], &CoefficientVector::default()).unwrap();
        assert_eq!(target, CoefficientVector::from_pairs([("a", 2.0), ("b", 3.0)]).unwrap());
    }

    #[test]
    fn assemble_without_any_source_is_config_error() {
        let mut state = EstimatorState::zero_init(Family::Linear, ["a"]).unwrap();
        state.init_target = CoefficientVector::default();
        let err = assemble_target(&state, ["a"], &CoefficientVector::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn mixture_examples() {
        let single = TargetSpec::single(CoefficientVector::from_pairs([("a", 2.0)]).unwrap());
        assert_eq!(mixture_target(&single, &[1.0]).unwrap().get("a"), Some(2.0));

        let spec = TargetSpec::new(
            vec![
                CoefficientVector::from_pairs([("a", 0.0)]).unwrap(),
                CoefficientVector::from_pairs([("a", 4.0)]).unwrap(),
            ],
            TargetWeights::Tuned,
        )
        .unwrap();
        assert_eq!(mixture_target(&spec, &[0.5, 0.5]).unwrap().get("a"), Some(2.0));

        let spec = TargetSpec::new(
            vec![
                CoefficientVector::from_pairs([("a", 1.0), ("b", 0.0)]).unwrap(),
                CoefficientVector::from_pairs([("a", 0.0), ("b", 1.0)]).unwrap(),
            ],
            TargetWeights::Tuned,
        )
        .unwrap();
        let m = mixture_target(&spec, &[0.25, 0.75]).unwrap();
        assert_eq!(m, CoefficientVector::from_pairs([("a", 0.25), ("b", 0.75)]).unwrap());
    }

    #[test]
    fn mixture_rejects_off_simplex_weights() {
        let spec = TargetSpec::new(
            vec![CoefficientVector::zeros(["a"]), CoefficientVector::zeros(["a"])],
            TargetWeights::Tuned,
        )
        .unwrap();
        assert!(mixture_target(&spec, &[0.6, 0.6]).is_err());
        assert!(mixture_target(&spec, &[1.5, -0.5]).is_err());
        assert!(mixture_target(&spec, &[0.5, 0.5 + 1e-9]).is_err());
    }

    #[test]
    fn advance_enforces_increasing_time() {
        let state = EstimatorState::zero_init(Family::Linear, ["a"]).unwrap();
        let b = batch(&["a"], &[&[1.0]], &[1.0]);
        let next = state.advance(b.clone(), record(1, &[("a", 1.0)])).unwrap();
        assert_eq!(next.current.get("a"), Some(1.0));
        next.validate().unwrap();
        assert!(next.advance(b, record(1, &[("a", 2.0)])).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn align_preserves_absolute_mass(
                vals in proptest::collection::vec(-10.0f64..10.0, 6),
                perm in Just(["c", "a", "b"]).prop_shuffle(),
            ) {
                let reg = CovariateRegistry::new(["a", "b", "c", "d"]).unwrap();
                let x = DMatrix::from_row_slice(2, 3, &vals);
                let b = Batch::new(1, x.clone(), DVector::from_vec(vec![0.0, 0.0]),
                    perm.iter().map(|s| s.to_string()).collect(), Family::Linear).unwrap();
                let aligned = align_batch(&b, &reg).unwrap();
                // same summation order on both sides: sorted non-zero magnitudes
                let mass = |m: &DMatrix<f64>| {
                    let mut a: Vec<f64> = m.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
                    a.sort_by(f64::total_cmp);
                    a.iter().sum::<f64>()
                };
                let lhs = mass(&aligned);
                let rhs = mass(&x);
                prop_assert_eq!(lhs, rhs);
                for (j, name) in perm.iter().enumerate() {
                    let g = reg.index_of(name).unwrap();
                    prop_assert_eq!(aligned.column(g), x.column(j));
                }
            }

            #[test]
            fn degenerate_mixture_returns_target(
                a in proptest::collection::vec(-5.0f64..5.0, 3),
                b in proptest::collection::vec(-5.0f64..5.0, 3),
                pick in 0usize..2,
            ) {
                let mk = |v: &[f64]| CoefficientVector::from_pairs(
                    ["x", "y", "z"].iter().zip(v).map(|(k, v)| (*k, *v))).unwrap();
                let spec = TargetSpec::new(vec![mk(&a), mk(&b)], TargetWeights::Tuned).unwrap();
                let mut w = [0.0, 0.0];
                w[pick] = 1.0;
                prop_assert_eq!(mixture_target(&spec, &w).unwrap(), spec.targets[pick].clone());
            }

            #[test]
            fn assemble_is_idempotent(vals in proptest::collection::vec(-5.0f64..5.0, 4)) {
                let mut state = EstimatorState::zero_init(Family::Linear, ["a", "b", "c"]).unwrap();
                state.history = vec![record(1, &[("a", vals[0]), ("b", vals[1])]), record(2, &[("b", vals[2])])];
                let fb = CoefficientVector::from_pairs([("c", vals[3])]).unwrap();
                let first = assemble_target(&state, ["a", "b", "c"], &fb).unwrap();
                let second = assemble_target(&state, ["a", "b", "c"], &fb).unwrap();
                prop_assert_eq!(first, second);
            }
        }
    }
}
