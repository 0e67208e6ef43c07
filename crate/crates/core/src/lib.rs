//! Hierarchical mixed-discrete design spaces for system architecture
//! optimization: space definition, activeness and imputation, enumeration,
//! hierarchy metrics, design-of-experiments sampling, correction, and built-in
//! test problems.

pub mod correction;
pub mod format;
pub mod metrics;
pub mod problems;
pub mod sampling;
pub mod sobol;
pub mod space;

pub use correction::{CorrectionError, CorrectionHook, CorrectionMode, Corrector, LazyOrder, Metric};
pub use metrics::{hierarchy_stats, HierarchyStats, RateRecord};
pub use problems::{Evaluation, KnownOptimum, Problem};
pub use sampling::{Doe, Grouping, Weighting};
pub use space::{DesignSpace, Enumeration, Expr, PointStatus, SpaceBuilder, SpaceError, VarKind, VariableDef};
