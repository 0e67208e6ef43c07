//! Simple turbofan architecture space with a synthetic evaluator.
//!
//! The space has six architecture choices (fan, mixed nozzle, gearbox, number
//! of shafts, power and bleed offtake shafts) and nine continuous design
//! variables. The evaluator is a smooth stand-in for a cycle analysis: an
//! architecture cost plus quadratic bowls over the active normalized
//! variables, five inequality constraints, and a failed region defined by a
//! threshold on an auxiliary function.

use crate::problems::{Evaluation, KnownOptimum, Problem};
use crate::space::{DesignSpace, Expr};

const FAN: usize = 0;
const MIXED: usize = 1;
const GEARBOX: usize = 2;
const SHAFTS: usize = 3;
const POWER: usize = 4;
const BLEED: usize = 5;
const BPR: usize = 6;
const FPR: usize = 7;
const OPR: usize = 9;
const PRF2: usize = 10;
const PRF3: usize = 11;
const RPM1: usize = 12;

const SHAFT_LEVELS: [&str; 3] = ["shaft1", "shaft2", "shaft3"];

pub fn turbofan_space() -> DesignSpace {
    let mut b = DesignSpace::builder()
        .categorical("IncludeFan", &["no", "yes"])
        .categorical("MixedNozzle", &["no", "yes"])
        .categorical("IncludeGearbox", &["no", "yes"])
        .integer("n_shafts", 1, 3)
        .categorical("PowerOfftake", &SHAFT_LEVELS)
        .categorical("BleedOfftake", &SHAFT_LEVELS)
        .continuous("BPR", 2.0, 12.5)
        .continuous("FPR", 1.1, 1.8)
        .continuous("GearRatio", 1.0, 5.0)
        .continuous("OPR", 1.1, 60.0)
        .continuous("PR_factor_2", 0.1, 0.9)
        .continuous("PR_factor_3", 0.1, 0.9)
        .continuous("RPM_1", 1000.0, 20000.0)
        .continuous("RPM_2", 1000.0, 20000.0)
        .continuous("RPM_3", 1000.0, 20000.0);
    for v in ["MixedNozzle", "IncludeGearbox", "BPR", "FPR"] {
        b = b.active_if(v, Expr::eq("IncludeFan", "yes"));
    }
    b = b.active_if("GearRatio", Expr::eq("IncludeGearbox", "yes"));
    for v in ["PR_factor_2", "RPM_2"] {
        b = b.active_if(v, Expr::ge("n_shafts", 2.0));
    }
    for v in ["PR_factor_3", "RPM_3"] {
        b = b.active_if(v, Expr::ge("n_shafts", 3.0));
    }
    // offtakes can only use existing shafts
    for v in ["PowerOfftake", "BleedOfftake"] {
        b = b.forbid(Expr::and(vec![Expr::eq("n_shafts", 1), Expr::is_in(v, ["shaft2", "shaft3"])]));
        b = b.forbid(Expr::and(vec![Expr::eq("n_shafts", 2), Expr::eq(v, "shaft3")]));
    }
    b.build().expect("turbofan space is well formed")
}

/// Synthetic turbofan problem: one objective, five constraints, and about half
/// of a space-filling design failing to evaluate.
#[derive(Debug, Clone)]
pub struct TurbofanSynthetic {
    space: DesignSpace,
}

/// Weight and target of each continuous variable's quadratic bowl, in
/// normalized coordinates.
const BOWL: [(f64, f64); 9] = [
    (0.30, 0.60), // BPR
    (0.20, 0.40), // FPR
    (0.15, 0.50), // GearRatio
    (0.30, 0.60), // OPR
    (0.20, 0.40), // PR_factor_2
    (0.20, 0.30), // PR_factor_3
    (0.25, 0.30), // RPM_1
    (0.15, 0.40), // RPM_2
    (0.15, 0.60), // RPM_3
];

/// Evaluations with `failure_indicator > FAILURE_THRESHOLD` fail.
pub const FAILURE_THRESHOLD: f64 = 0.672;

impl TurbofanSynthetic {
    pub fn new() -> Self {
        TurbofanSynthetic { space: turbofan_space() }
    }

    fn z(&self, x: &[f64], i: usize) -> f64 {
        let (lo, hi) = self.space.variables()[i].bounds();
        (x[i] - lo) / (hi - lo)
    }

    /// Smooth auxiliary function defining the failed region.
    pub fn failure_indicator(&self, x: &[f64]) -> f64 {
        let (x, mask) = self.space.impute(x);
        let fan = if mask[FPR] { 1.0 } else { 0.0 };
        0.7 * self.z(&x, OPR) + 0.6 * self.z(&x, RPM1) + 0.3 * fan * self.z(&x, FPR) - 0.08 * x[SHAFTS]
    }

    fn architecture_cost(x: &[f64], mask: &[bool]) -> f64 {
        let on = |i: usize| mask[i] && x[i] == 1.0;
        let mut c = 1.0;
        if on(FAN) {
            c -= 0.25;
        }
        if on(MIXED) {
            c -= 0.04;
        }
        if on(GEARBOX) {
            c -= 0.06;
        }
        c -= 0.03 * x[SHAFTS];
        if mask[POWER] {
            c += 0.01 * x[POWER];
        }
        if mask[BLEED] {
            c += 0.01 * x[BLEED];
        }
        c
    }

    /// Constraint values for an imputed vector.
    fn constraints(&self, x: &[f64], mask: &[bool]) -> Vec<f64> {
        let fan = mask[BPR];
        let mixed = mask[MIXED] && x[MIXED] == 1.0;
        let v_jet = 1.0 - if fan { 0.5 * self.z(x, BPR) + if mixed { 0.2 } else { 0.0 } } else { 0.0 };
        let g_jet = v_jet - 0.75;

        let f2 = if mask[PRF2] { x[PRF2] } else { 0.0 };
        let f3 = if mask[PRF3] { x[PRF3] } else { 0.0 };
        let g_split = f2 + f3 - 0.9;

        let n = x[SHAFTS] as usize + 1;
        let shares = [1.0 - f2 - f3, f2, f3];
        let mut g = vec![g_jet, g_split];
        for (k, share) in shares.iter().enumerate() {
            g.push(if k < n { (x[OPR].powf(*share) - 15.0) / 15.0 } else { -1.0 });
        }
        g
    }

    /// A vector attaining the known optimum.
    pub fn optimum_point(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self.space.variables().iter().map(|v| v.canonical()).collect();
        for i in [FAN, MIXED, GEARBOX] {
            x[i] = 1.0;
        }
        x[SHAFTS] = 2.0;
        for (k, &(_, target)) in BOWL.iter().enumerate() {
            let (lo, hi) = self.space.variables()[BPR + k].bounds();
            x[BPR + k] = lo + target * (hi - lo);
        }
        x
    }
}

impl Default for TurbofanSynthetic {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for TurbofanSynthetic {
    fn name(&self) -> String {
        "turbofan".into()
    }

    fn space(&self) -> &DesignSpace {
        &self.space
    }

    fn n_obj(&self) -> usize {
        1
    }

    fn n_con(&self) -> usize {
        5
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let (x, mask) = self.space.impute(x);
        if self.failure_indicator(&x) > FAILURE_THRESHOLD {
            return Evaluation::failed(1, 5);
        }
        let bowl: f64 = BOWL
            .iter()
            .enumerate()
            .filter(|(k, _)| mask[BPR + k])
            .map(|(k, &(w, target))| w * (self.z(&x, BPR + k) - target).powi(2))
            .sum();
        let f = Self::architecture_cost(&x, &mask) + bowl;
        Evaluation { f: vec![f], g: self.constraints(&x, &mask) }
    }

    fn optimum(&self) -> Option<KnownOptimum> {
        Some(KnownOptimum::Value(self.evaluate(&self.optimum_point()).f[0]))
    }
}
