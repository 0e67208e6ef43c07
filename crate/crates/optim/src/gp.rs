//! Gaussian-process regression (ordinary kriging) over hierarchical
//! mixed-discrete inputs.
//!
//! The correlation between two points is `exp(-sum_i d_i)`, where `d_i` is a
//! per-variable distance that depends on both values and on whether the
//! variable is active in each point. Numeric variables (continuous, integer,
//! ordinal) are normalized to `[0, 1]`.

use std::f64::consts::{PI, SQRT_2};

use archopt_core::{DesignSpace, VarKind};
use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("need at least 2 training points, got {0}")]
    TooFewPoints(usize),
    #[error("training targets must be finite")]
    NonFiniteTarget,
    #[error("expected {expected} values per point, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("level {level} out of range for a variable with {n_levels} levels")]
    LevelOutOfRange { level: usize, n_levels: usize },
    #[error("expected {expected} kernel parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("covariance factorization failed even with nugget {0:e}")]
    Factorization(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousKernel {
    #[default]
    SquaredExponential,
    AbsoluteExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalKernel {
    #[default]
    Gower,
    ExpOnehot,
    Ehh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub continuous: ContinuousKernel,
    pub categorical: CategoricalKernel,
    /// Use activeness masks. When off, inputs are taken as imputed vectors
    /// with every variable active.
    pub hierarchical: bool,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { continuous: Default::default(), categorical: Default::default(), hierarchical: true }
    }
}

/// Gower-type distance of one categorical variable.
pub fn gower_distance(
    lr: usize,
    ls: usize,
    active_r: bool,
    active_s: bool,
    n_levels: usize,
    theta: f64,
) -> Result<f64, GpError> {
    check_levels(&[(lr, active_r), (ls, active_s)], n_levels)?;
    Ok(gower(lr, ls, active_r, active_s, n_levels, theta))
}

fn gower(lr: usize, ls: usize, ar: bool, as_: bool, n_levels: usize, theta: f64) -> f64 {
    match (ar, as_) {
        (false, false) => 0.0,
        (true, true) if lr == ls => 0.0,
        (true, true) => SQRT_2 * theta,
        _ => 0.5 * n_levels as f64 * theta,
    }
}

/// Exponential one-hot correlation of one categorical variable with diagonal
/// level weights `phi`.
pub fn exp_onehot_correlation(
    lr: usize,
    ls: usize,
    active_r: bool,
    active_s: bool,
    phi: &[f64],
) -> Result<f64, GpError> {
    check_levels(&[(lr, active_r), (ls, active_s)], phi.len())?;
    Ok((-exp_onehot(lr, ls, active_r, active_s, phi)).exp())
}

fn exp_onehot(lr: usize, ls: usize, ar: bool, as_: bool, phi: &[f64]) -> f64 {
    match (ar, as_) {
        (false, false) => 0.0,
        (true, true) if lr == ls => 0.0,
        (true, true) => SQRT_2 * (phi[lr] + phi[ls]),
        _ => phi.iter().sum(),
    }
}

/// Level correlation matrix with unit diagonal from `L(L-1)/2` spherical
/// angles, `C = T T^T` with the rows of `T` on the unit hypersphere.
pub fn hypersphere_matrix(n_levels: usize, angles: &[f64]) -> Result<Vec<Vec<f64>>, GpError> {
    let expected = n_levels * (n_levels - 1) / 2;
    if angles.len() != expected {
        return Err(GpError::ParameterCount { expected, got: angles.len() });
    }
    Ok(hypersphere(n_levels, angles))
}

fn hypersphere(n_levels: usize, angles: &[f64]) -> Vec<Vec<f64>> {
    let mut t = vec![vec![0.0; n_levels]; n_levels];
    let mut k = 0;
    for (r, row) in t.iter_mut().enumerate() {
        let mut sin_prod = 1.0;
        for slot in row.iter_mut().take(r) {
            *slot = sin_prod * angles[k].cos();
            sin_prod *= angles[k].sin();
            k += 1;
        }
        row[r] = sin_prod;
    }
    (0..n_levels)
        .map(|r| (0..n_levels).map(|s| t[r].iter().zip(&t[s]).map(|(a, b)| a * b).sum()).collect())
        .collect()
}

/// Correlation of one categorical variable under the imputed hypersphere
/// kernel: inactive levels are replaced by level 0, then
/// `exp(-theta (1 - C[lr][ls]))`.
pub fn ehh_correlation(
    lr: usize,
    ls: usize,
    active_r: bool,
    active_s: bool,
    theta: f64,
    angles: &[f64],
) -> Result<f64, GpError> {
    let n_levels = levels_from_angles(angles.len());
    check_levels(&[(lr, active_r), (ls, active_s)], n_levels)?;
    let c = hypersphere_matrix(n_levels, angles)?;
    let (lr, ls) = (if active_r { lr } else { 0 }, if active_s { ls } else { 0 });
    Ok((-theta * (1.0 - c[lr][ls])).exp())
}

fn levels_from_angles(n_angles: usize) -> usize {
    (1..).find(|l| l * (l - 1) / 2 >= n_angles).unwrap()
}

fn check_levels(items: &[(usize, bool)], n_levels: usize) -> Result<(), GpError> {
    for &(level, active) in items {
        if active && level >= n_levels {
            return Err(GpError::LevelOutOfRange { level, n_levels });
        }
    }
    Ok(())
}

/// How a design variable enters the kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum VarEncoding {
    Numeric { lower: f64, upper: f64, values: Option<Vec<f64>> },
    Categorical { n_levels: usize },
}

impl VarEncoding {
    pub fn from_space(space: &DesignSpace) -> Vec<VarEncoding> {
        space
            .variables()
            .iter()
            .map(|v| match &v.kind {
                VarKind::Continuous { lower, upper } => VarEncoding::Numeric { lower: *lower, upper: *upper, values: None },
                VarKind::Integer { .. } => {
                    VarEncoding::Numeric { lower: 0.0, upper: (v.n_options() - 1) as f64, values: None }
                }
                VarKind::Ordinal { values } => VarEncoding::Numeric {
                    lower: values[0],
                    upper: values[values.len() - 1],
                    values: Some(values.clone()),
                },
                VarKind::Categorical { levels } => VarEncoding::Categorical { n_levels: levels.len() },
            })
            .collect()
    }

    fn encode(&self, v: f64) -> f64 {
        match self {
            VarEncoding::Numeric { lower, upper, values } => {
                let v = values.as_ref().map_or(v, |vals| vals[v as usize]);
                (v - lower) / (upper - lower)
            }
            VarEncoding::Categorical { .. } => v,
        }
    }
}

/// Number of hyperparameters of one variable and the bounds of each, in
/// optimization coordinates (log10 for scales, radians for angles).
fn param_layout(enc: &VarEncoding, spec: &KernelSpec) -> Vec<(f64, f64)> {
    const LOG: (f64, f64) = (-3.0, 2.0);
    match enc {
        VarEncoding::Numeric { .. } => vec![LOG],
        VarEncoding::Categorical { n_levels } => match spec.categorical {
            CategoricalKernel::Gower => vec![LOG],
            CategoricalKernel::ExpOnehot => vec![LOG; *n_levels],
            CategoricalKernel::Ehh => {
                let mut p = vec![LOG];
                p.extend(vec![(0.0, PI); n_levels * (n_levels - 1) / 2]);
                p
            }
        },
    }
}

/// Kernel parameters decoded from optimization coordinates.
#[derive(Debug, Clone)]
enum VarParams {
    Scale(f64),
    Phi(Vec<f64>),
    Ehh(f64, Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
struct Kernel {
    vars: Vec<VarEncoding>,
    spec: KernelSpec,
    params: Vec<VarParams>,
}

impl Kernel {
    fn new(vars: &[VarEncoding], spec: KernelSpec, raw: &[f64]) -> Self {
        let mut k = 0;
        let mut params = Vec::with_capacity(vars.len());
        for enc in vars {
            let n = param_layout(enc, &spec).len();
            let p = &raw[k..k + n];
            k += n;
            params.push(match enc {
                VarEncoding::Numeric { .. } => VarParams::Scale(10f64.powf(p[0])),
                VarEncoding::Categorical { n_levels } => match spec.categorical {
                    CategoricalKernel::Gower => VarParams::Scale(10f64.powf(p[0])),
                    CategoricalKernel::ExpOnehot => VarParams::Phi(p.iter().map(|v| 10f64.powf(*v)).collect()),
                    CategoricalKernel::Ehh => VarParams::Ehh(10f64.powf(p[0]), hypersphere(*n_levels, &p[1..])),
                },
            });
        }
        Kernel { vars: vars.to_vec(), spec, params }
    }

    /// Kernel with hyperparameters given directly as scales (no log10), for
    /// the kernels that are linear in them.
    fn from_weights(vars: &[VarEncoding], spec: KernelSpec, w: &[f64]) -> Self {
        let mut k = 0;
        let mut params = Vec::with_capacity(vars.len());
        for enc in vars {
            let n = param_layout(enc, &spec).len();
            let p = &w[k..k + n];
            k += n;
            params.push(match (enc, spec.categorical) {
                (VarEncoding::Categorical { .. }, CategoricalKernel::ExpOnehot) => VarParams::Phi(p.to_vec()),
                _ => VarParams::Scale(p[0]),
            });
        }
        Kernel { vars: vars.to_vec(), spec, params }
    }

    fn distance(&self, zr: &[f64], ar: &[bool], zs: &[f64], as_: &[bool]) -> f64 {
        let mut d = 0.0;
        for (i, (enc, p)) in self.vars.iter().zip(&self.params).enumerate() {
            let (a, b) = if self.spec.hierarchical { (ar[i], as_[i]) } else { (true, true) };
            d += match (enc, p) {
                (VarEncoding::Numeric { .. }, VarParams::Scale(theta)) => {
                    let one = |z: f64| match self.spec.continuous {
                        ContinuousKernel::SquaredExponential => (z - 0.5).powi(2) + 1.0,
                        ContinuousKernel::AbsoluteExponential => (z - 0.5).abs() + 1.0,
                    };
                    theta
                        * match (a, b) {
                            (false, false) => 0.0,
                            (true, true) => match self.spec.continuous {
                                ContinuousKernel::SquaredExponential => (zr[i] - zs[i]).powi(2),
                                ContinuousKernel::AbsoluteExponential => (zr[i] - zs[i]).abs(),
                            },
                            (true, false) => one(zr[i]),
                            (false, true) => one(zs[i]),
                        }
                }
                (VarEncoding::Categorical { n_levels }, VarParams::Scale(theta)) => {
                    gower(zr[i] as usize, zs[i] as usize, a, b, *n_levels, *theta)
                }
                (VarEncoding::Categorical { .. }, VarParams::Phi(phi)) => {
                    exp_onehot(zr[i] as usize, zs[i] as usize, a, b, phi)
                }
                (VarEncoding::Categorical { .. }, VarParams::Ehh(theta, c)) => {
                    let lr = if a { zr[i] as usize } else { 0 };
                    let ls = if b { zs[i] as usize } else { 0 };
                    theta * (1.0 - c[lr][ls])
                }
                _ => unreachable!("parameters follow the variable layout"),
            };
        }
        d
    }

    fn correlation(&self, zr: &[f64], ar: &[bool], zs: &[f64], as_: &[bool]) -> f64 {
        (-self.distance(zr, ar, zs, as_)).exp()
    }
}

pub const NUGGET_START: f64 = 1e-8;
pub const NUGGET_MAX: f64 = 1e-4;
/// Tolerated nugget-induced deviation from training targets during the
/// hyperparameter search, in standardized units.
const INTERP_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    pub n_starts: usize,
    /// Nelder-Mead iteration cap per start.
    pub max_iters: u64,
    /// Extra start point (optimization coordinates), tried first.
    pub warm_start: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { n_starts: 10, max_iters: 300, warm_start: None, seed: 0 }
    }
}

/// Training data in kernel coordinates plus the factorized covariance.
#[derive(Debug, Clone)]
struct Factor {
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    r_inv_one: DVector<f64>,
    one_r_inv_one: f64,
    mu: f64,
    sigma2: f64,
    nugget: f64,
    nll: f64,
    /// Largest deviation from a training target caused by the nugget, in
    /// standardized units.
    interp_resid: f64,
}

fn factorize(kernel: &Kernel, z: &[Vec<f64>], a: &[Vec<bool>], y: &DVector<f64>, nugget0: f64) -> Option<Factor> {
    let n = z.len();
    let mut r = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let c = kernel.correlation(&z[i], &a[i], &z[j], &a[j]);
            r[(i, j)] = c;
            r[(j, i)] = c;
        }
    }
    factorize_matrix(r, y, nugget0)
}

/// Pairwise kernel distances as a linear map of the exponentiated
/// hyperparameters, for kernels where that holds (all but EHH). Row `k`
/// belongs to the `k`-th lower-triangle pair in row-major order.
struct DistanceBasis {
    n: usize,
    b: DMatrix<f64>,
}

impl DistanceBasis {
    fn new(vars: &[VarEncoding], spec: KernelSpec, n_params: usize, z: &[Vec<f64>], a: &[Vec<bool>]) -> Option<Self> {
        if spec.categorical == CategoricalKernel::Ehh {
            return None;
        }
        let n = z.len();
        let n_pairs = n * (n - 1) / 2;
        let mut b = DMatrix::<f64>::zeros(n_pairs, n_params);
        for k in 0..n_params {
            let mut w = vec![0.0; n_params];
            w[k] = 1.0;
            let kernel = Kernel::from_weights(vars, spec, &w);
            let mut row = 0;
            for i in 0..n {
                for j in 0..i {
                    b[(row, k)] = kernel.distance(&z[i], &a[i], &z[j], &a[j]);
                    row += 1;
                }
            }
        }
        Some(DistanceBasis { n, b })
    }

    fn correlation_matrix(&self, params: &[f64]) -> DMatrix<f64> {
        let w = DVector::from_iterator(params.len(), params.iter().map(|p| 10f64.powf(*p)));
        let d = &self.b * w;
        let mut r = DMatrix::<f64>::identity(self.n, self.n);
        let mut row = 0;
        for i in 0..self.n {
            for j in 0..i {
                let c = (-d[row]).exp();
                r[(i, j)] = c;
                r[(j, i)] = c;
                row += 1;
            }
        }
        r
    }
}

fn factorize_matrix(r: DMatrix<f64>, y: &DVector<f64>, nugget0: f64) -> Option<Factor> {
    let n = r.nrows();
    let mut nugget = nugget0;
    loop {
        let mut m = r.clone();
        for i in 0..n {
            m[(i, i)] += nugget;
        }
        if let Some(chol) = Cholesky::new(m) {
            let one = DVector::from_element(n, 1.0);
            let r_inv_one = chol.solve(&one);
            let r_inv_y = chol.solve(y);
            let one_r_inv_one = one.dot(&r_inv_one);
            let mu = one.dot(&r_inv_y) / one_r_inv_one;
            let alpha = &r_inv_y - &r_inv_one * mu;
            let resid = y - DVector::from_element(n, mu);
            let sigma2 = (resid.dot(&alpha) / n as f64).max(1e-300);
            let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let nll = 0.5 * (n as f64 * sigma2.ln() + logdet);
            let interp_resid = nugget * alpha.amax();
            return nll.is_finite().then_some(Factor {
                chol,
                alpha,
                r_inv_one,
                one_r_inv_one,
                mu,
                sigma2,
                nugget,
                nll,
                interp_resid,
            });
        }
        nugget *= 10.0;
        if nugget > NUGGET_MAX * (1.0 + 1e-9) {
            return None;
        }
    }
}

#[derive(Clone, Copy)]
struct Likelihood<'a> {
    vars: &'a [VarEncoding],
    spec: KernelSpec,
    bounds: &'a [(f64, f64)],
    z: &'a [Vec<f64>],
    a: &'a [Vec<bool>],
    y: &'a DVector<f64>,
    basis: Option<&'a DistanceBasis>,
}

fn clamp_to(p: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    p.iter().zip(bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect()
}

impl CostFunction for Likelihood<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Vec<f64>) -> Result<f64, ArgminError> {
        let clamped = clamp_to(p, self.bounds);
        // keep the search inside the box with a soft wall
        let outside: f64 = p.iter().zip(&clamped).map(|(a, b)| (a - b).powi(2)).sum();
        let factor = match self.basis {
            Some(b) => factorize_matrix(b.correlation_matrix(&clamped), self.y, NUGGET_START),
            None => factorize(&Kernel::new(self.vars, self.spec, &clamped), self.z, self.a, self.y, NUGGET_START),
        };
        Ok(match factor {
            // ill-conditioned candidates stop interpolating the data
            Some(f) => f.nll + 1e3 * outside + 100.0 * (f.interp_resid / INTERP_TOL).log10().max(0.0),
            None => 1e10 + outside,
        })
    }
}

/// Serializable state of a fitted model; the factorization is recomputed on
/// load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSnapshot {
    pub vars: Vec<VarEncoding>,
    pub spec: KernelSpec,
    pub z: Vec<Vec<f64>>,
    pub active: Vec<Vec<bool>>,
    pub y: Vec<f64>,
    pub y_mean: f64,
    pub y_sd: f64,
    pub params: Vec<f64>,
    pub nugget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    snapshot: GpSnapshot,
    kernel: Kernel,
    factor: Option<Factor>,
}

fn encode(vars: &[VarEncoding], x: &[f64]) -> Vec<f64> {
    vars.iter().zip(x).map(|(e, &v)| e.encode(v)).collect()
}

impl GpModel {
    /// Bounds of the kernel hyperparameters for a space and kernel, in
    /// optimization coordinates.
    pub fn param_bounds(space: &DesignSpace, spec: &KernelSpec) -> Vec<(f64, f64)> {
        VarEncoding::from_space(space).iter().flat_map(|e| param_layout(e, spec)).collect()
    }

    /// Fits hyperparameters by maximizing the concentrated log marginal
    /// likelihood with multi-start Nelder-Mead.
    pub fn fit(
        space: &DesignSpace,
        x: &[Vec<f64>],
        masks: &[Vec<bool>],
        y: &[f64],
        spec: KernelSpec,
        opts: &FitOptions,
    ) -> Result<GpModel, GpError> {
        let vars = VarEncoding::from_space(space);
        let bounds: Vec<(f64, f64)> = vars.iter().flat_map(|e| param_layout(e, &spec)).collect();
        let (z, a, ys, y_mean, y_sd) = prepare(&vars, x, masks, y)?;
        if y_sd == 0.0 {
            let params = default_params(&bounds);
            return Self::assemble(vars, spec, z, a, y.to_vec(), y_mean, 0.0, params, NUGGET_START);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Some(w) = &opts.warm_start {
            if w.len() == bounds.len() {
                starts.push(clamp_to(w, &bounds));
            }
        }
        starts.push(default_params(&bounds));
        while starts.len() < opts.n_starts.max(1) {
            starts.push(bounds.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect());
        }
        starts.truncate(opts.n_starts.max(1));

        let basis = DistanceBasis::new(&vars, spec, bounds.len(), &z, &a);
        let cost = Likelihood { vars: &vars, spec, bounds: &bounds, z: &z, a: &a, y: &ys, basis: basis.as_ref() };
        let mut best: Option<(f64, Vec<f64>)> = None;
        for start in starts {
            let (p, c) = nelder_mead(&cost, &start, &bounds, opts.max_iters);
            if best.as_ref().is_none_or(|(b, _)| c < *b) {
                best = Some((c, p));
            }
        }
        let (_, params) = best.expect("at least one start");
        let params = clamp_to(&params, &bounds);
        let kernel = Kernel::new(&vars, spec, &params);
        let nugget = factorize(&kernel, &z, &a, &ys, NUGGET_START)
            .map(|f| f.nugget)
            .ok_or(GpError::Factorization(NUGGET_MAX))?;
        Self::assemble(vars, spec, z, a, y.to_vec(), y_mean, y_sd, params, nugget)
    }

    /// Builds a model with given hyperparameters (optimization coordinates)
    /// instead of fitting them.
    pub fn with_params(
        space: &DesignSpace,
        x: &[Vec<f64>],
        masks: &[Vec<bool>],
        y: &[f64],
        spec: KernelSpec,
        params: &[f64],
    ) -> Result<GpModel, GpError> {
        let vars = VarEncoding::from_space(space);
        let expected: usize = vars.iter().map(|e| param_layout(e, &spec).len()).sum();
        if params.len() != expected {
            return Err(GpError::ParameterCount { expected, got: params.len() });
        }
        let (z, a, _, y_mean, y_sd) = prepare(&vars, x, masks, y)?;
        Self::assemble(vars, spec, z, a, y.to_vec(), y_mean, y_sd, params.to_vec(), NUGGET_START)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        vars: Vec<VarEncoding>,
        spec: KernelSpec,
        z: Vec<Vec<f64>>,
        active: Vec<Vec<bool>>,
        y: Vec<f64>,
        y_mean: f64,
        y_sd: f64,
        params: Vec<f64>,
        nugget: f64,
    ) -> Result<GpModel, GpError> {
        let snapshot = GpSnapshot { vars, spec, z, active, y, y_mean, y_sd, params, nugget };
        Self::from_snapshot(snapshot)
    }

    pub fn from_snapshot(snapshot: GpSnapshot) -> Result<GpModel, GpError> {
        let kernel = Kernel::new(&snapshot.vars, snapshot.spec, &snapshot.params);
        let factor = if snapshot.y_sd == 0.0 {
            None
        } else {
            let ys = DVector::from_iterator(snapshot.y.len(), snapshot.y.iter().map(|v| (v - snapshot.y_mean) / snapshot.y_sd));
            let f = factorize(&kernel, &snapshot.z, &snapshot.active, &ys, snapshot.nugget)
                .ok_or(GpError::Factorization(NUGGET_MAX))?;
            Some(f)
        };
        let mut snapshot = snapshot;
        if let Some(f) = &factor {
            snapshot.nugget = f.nugget;
        }
        Ok(GpModel { snapshot, kernel, factor })
    }

    pub fn snapshot(&self) -> &GpSnapshot {
        &self.snapshot
    }

    /// Fitted hyperparameters in optimization coordinates.
    pub fn params(&self) -> &[f64] {
        &self.snapshot.params
    }

    pub fn nugget(&self) -> f64 {
        self.snapshot.nugget
    }

    /// Constant prior mean, in target units.
    pub fn prior_mean(&self) -> f64 {
        let s = &self.snapshot;
        s.y_mean + s.y_sd * self.factor.as_ref().map_or(0.0, |f| f.mu)
    }

    /// Process standard deviation, in target units.
    pub fn prior_sd(&self) -> f64 {
        self.snapshot.y_sd * self.factor.as_ref().map_or(0.0, |f| f.sigma2.sqrt())
    }

    /// Negative concentrated log marginal likelihood of the fitted model
    /// (standardized targets).
    pub fn neg_log_likelihood(&self) -> Option<f64> {
        self.factor.as_ref().map(|f| f.nll)
    }

    /// Correlation between two points under the fitted kernel.
    pub fn correlation(&self, x1: &[f64], m1: &[bool], x2: &[f64], m2: &[bool]) -> f64 {
        let v = &self.snapshot.vars;
        self.kernel.correlation(&encode(v, x1), m1, &encode(v, x2), m2)
    }

    pub fn predict(&self, x: &[f64], mask: &[bool]) -> Result<Prediction, GpError> {
        let n_vars = self.snapshot.vars.len();
        if x.len() != n_vars || mask.len() != n_vars {
            return Err(GpError::DimensionMismatch { expected: n_vars, got: x.len().min(mask.len()) });
        }
        let s = &self.snapshot;
        let Some(f) = &self.factor else {
            return Ok(Prediction { mean: s.y_mean, sd: 0.0 });
        };
        let z = encode(&s.vars, x);
        let r = DVector::from_iterator(s.z.len(), s.z.iter().zip(&s.active).map(|(zi, ai)| self.kernel.correlation(&z, mask, zi, ai)));
        let mean = f.mu + r.dot(&f.alpha);
        let v = f.chol.l_dirty().solve_lower_triangular(&r).expect("triangular factor is invertible");
        let u = 1.0 - f.r_inv_one.dot(&r);
        let var = f.sigma2 * (1.0 - v.norm_squared() + u * u / f.one_r_inv_one);
        Ok(Prediction { mean: s.y_mean + s.y_sd * mean, sd: s.y_sd * var.max(0.0).sqrt() })
    }

    /// Gram matrix of the kernel over a point set, without nugget.
    pub fn gram(&self, x: &[Vec<f64>], masks: &[Vec<bool>]) -> DMatrix<f64> {
        let v = &self.snapshot.vars;
        let z: Vec<Vec<f64>> = x.iter().map(|p| encode(v, p)).collect();
        DMatrix::from_fn(x.len(), x.len(), |i, j| self.kernel.correlation(&z[i], &masks[i], &z[j], &masks[j]))
    }
}

type Prepared = (Vec<Vec<f64>>, Vec<Vec<bool>>, DVector<f64>, f64, f64);

fn prepare(vars: &[VarEncoding], x: &[Vec<f64>], masks: &[Vec<bool>], y: &[f64]) -> Result<Prepared, GpError> {
    let n = x.len();
    if n < 2 {
        return Err(GpError::TooFewPoints(n));
    }
    if masks.len() != n || y.len() != n {
        return Err(GpError::DimensionMismatch { expected: n, got: masks.len().min(y.len()) });
    }
    for (p, m) in x.iter().zip(masks) {
        if p.len() != vars.len() || m.len() != vars.len() {
            return Err(GpError::DimensionMismatch { expected: vars.len(), got: p.len().min(m.len()) });
        }
        for (enc, (&v, &a)) in vars.iter().zip(p.iter().zip(m)) {
            if let VarEncoding::Categorical { n_levels } = enc {
                check_levels(&[(v as usize, a)], *n_levels)?;
            }
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GpError::NonFiniteTarget);
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let z = x.iter().map(|p| encode(vars, p)).collect();
    let ys = DVector::from_iterator(n, y.iter().map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 }));
    Ok((z, masks.to_vec(), ys, mean, sd))
}

/// Start point: unit scales and orthogonal (uncorrelated) level vectors.
fn default_params(bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds.iter().map(|&(lo, hi)| if lo < 0.0 { 0.0 } else { 0.5 * (lo + hi) }).collect()
}

fn nelder_mead(cost: &Likelihood, start: &[f64], bounds: &[(f64, f64)], max_iters: u64) -> (Vec<f64>, f64) {
    let mut simplex = vec![start.to_vec()];
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        let mut p = start.to_vec();
        let step = 0.15 * (hi - lo);
        p[k] = if p[k] + step <= hi { p[k] + step } else { p[k] - step };
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-5).expect("valid tolerance");
    match Executor::new(*cost, solver).configure(|s| s.max_iters(max_iters)).run() {
        Ok(res) => {
            let state = res.state();
            let p = state.get_best_param().cloned().unwrap_or_else(|| start.to_vec());
            (p, state.get_best_cost())
        }
        Err(_) => (start.to_vec(), cost.cost(&start.to_vec()).unwrap_or(f64::INFINITY)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypersphere_has_unit_diagonal() {
        let c = hypersphere(3, &[0.3, 1.2, 2.0]);
        for (i, row) in c.iter().enumerate() {
            assert!((row[i] - 1.0).abs() < 1e-12);
            for (j, v) in row.iter().enumerate() {
                assert!((v - c[j][i]).abs() < 1e-12);
            }
        }
        assert!((c[0][1] - 0.3f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn levels_from_angle_count() {
        assert_eq!(levels_from_angles(1), 2);
        assert_eq!(levels_from_angles(3), 3);
        assert_eq!(levels_from_angles(6), 4);
    }

    #[test]
    fn distance_basis_matches_kernel() {
        let space = archopt_core::problems::turbofan_space();
        let doe = archopt_core::sampling::sample_hierarchical(
            &space,
            30,
            archopt_core::Grouping::ByXAct,
            archopt_core::Weighting::Uniform,
            4,
        )
        .unwrap();
        let vars = VarEncoding::from_space(&space);
        for categorical in [CategoricalKernel::Gower, CategoricalKernel::ExpOnehot] {
            for hierarchical in [true, false] {
                let spec = KernelSpec { categorical, hierarchical, ..KernelSpec::default() };
                let bounds: Vec<(f64, f64)> = vars.iter().flat_map(|e| param_layout(e, &spec)).collect();
                let params: Vec<f64> = (0..bounds.len()).map(|k| -2.0 + 0.37 * k as f64 % 3.0).collect();
                let z: Vec<Vec<f64>> = doe.x.iter().map(|x| encode(&vars, x)).collect();
                let basis = DistanceBasis::new(&vars, spec, bounds.len(), &z, &doe.masks).unwrap();
                let r = basis.correlation_matrix(&params);
                let kernel = Kernel::new(&vars, spec, &params);
                for i in 0..z.len() {
                    for j in 0..z.len() {
                        let c = if i == j { 1.0 } else { kernel.correlation(&z[i], &doe.masks[i], &z[j], &doe.masks[j]) };
                        assert!((r[(i, j)] - c).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
