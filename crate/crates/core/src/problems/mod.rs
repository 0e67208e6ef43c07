//! Built-in test problems.

use serde::{Deserialize, Serialize};

use crate::correction::CorrectionHook;
use crate::space::DesignSpace;

mod gnc;
mod tables;
mod toy;
pub mod turbofan;

pub use gnc::{gnc_space, system_failure_probability, Gnc, GncVariant};
pub use tables::{table2_space, table4_space};
pub use toy::{toy_space, Toy};
pub use turbofan::{turbofan_space, TurbofanSynthetic};

/// Objective and constraint values of one evaluation. NaN entries mark a
/// failed evaluation (hidden constraint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl Evaluation {
    pub fn failed(n_f: usize, n_g: usize) -> Self {
        Evaluation { f: vec![f64::NAN; n_f], g: vec![f64::NAN; n_g] }
    }

    pub fn is_failed(&self) -> bool {
        self.f.iter().chain(&self.g).any(|v| v.is_nan())
    }

    pub fn is_feasible(&self) -> bool {
        !self.is_failed() && self.g.iter().all(|&v| v <= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KnownOptimum {
    Value(f64),
    Front(Vec<Vec<f64>>),
}

/// An optimization problem over a hierarchical design space. Objectives are
/// minimized and constraints satisfied when `g <= 0`.
pub trait Problem: Send + Sync {
    fn name(&self) -> String;
    fn space(&self) -> &DesignSpace;
    fn n_obj(&self) -> usize;
    fn n_con(&self) -> usize {
        0
    }
    /// Evaluates a correct vector. Inactive variables are ignored.
    fn evaluate(&self, x: &[f64]) -> Evaluation;
    fn optimum(&self) -> Option<KnownOptimum> {
        None
    }
    fn correction_hook(&self) -> Option<CorrectionHook> {
        None
    }
}

pub const PROBLEM_NAMES: &[&str] = &["toy", "gnc", "gnc-weight", "gnc-failure", "gnc-mo", "turbofan"];

/// Looks up a built-in problem by short name.
pub fn by_name(name: &str) -> Option<Box<dyn Problem>> {
    Some(match name {
        "toy" => Box::new(Toy::new()),
        "gnc" | "gnc-so" => Box::new(Gnc::new(GncVariant::SoScalarized)),
        "gnc-weight" => Box::new(Gnc::new(GncVariant::SoWeight)),
        "gnc-failure" => Box::new(Gnc::new(GncVariant::SoFailure)),
        "gnc-mo" => Box::new(Gnc::new(GncVariant::Multi)),
        "turbofan" => Box::new(TurbofanSynthetic::new()),
        _ => return None,
    })
}

/// Looks up the design space of a built-in problem or fixture.
pub fn space_by_name(name: &str) -> Option<DesignSpace> {
    match name {
        "table2" => Some(table2_space()),
        "table4" | "table5" => Some(table4_space()),
        _ => by_name(name).map(|p| p.space().clone()),
    }
}
