use crate::problems::{Evaluation, KnownOptimum, Problem};
use crate::space::{DesignSpace, Expr};

/// One or two energy sources feeding one or two consumers. The source choice
/// of the second consumer only exists when there are two consumers, and with a
/// single source every consumer must use source A.
pub fn toy_space() -> DesignSpace {
    DesignSpace::builder()
        .integer("n_sources", 1, 2)
        .integer("n_consumers", 1, 2)
        .categorical("source_c1", &["A", "B"])
        .categorical("source_c2", &["A", "B"])
        .active_if("source_c2", Expr::eq("n_consumers", 2))
        .forbid(Expr::and(vec![Expr::eq("n_sources", 1), Expr::eq("source_c1", "B")]))
        .forbid(Expr::and(vec![Expr::eq("n_sources", 1), Expr::eq("source_c2", "B")]))
        .single_option_inactive(false)
        .build()
        .expect("toy space is well formed")
}

/// Load-balance cost: 0.5 per installed source, plus the highest source load
/// (consumer demands 1.0 and 0.6), plus 0.4 per idle source.
#[derive(Debug, Clone)]
pub struct Toy {
    space: DesignSpace,
}

impl Toy {
    const DEMAND: [f64; 2] = [1.0, 0.6];

    pub fn new() -> Self {
        Toy { space: toy_space() }
    }
}

impl Default for Toy {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for Toy {
    fn name(&self) -> String {
        "toy".into()
    }

    fn space(&self) -> &DesignSpace {
        &self.space
    }

    fn n_obj(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let (x, mask) = self.space.impute(x);
        let n_src = x[0] as usize + 1;
        let mut load = [0.0; 2];
        load[x[2] as usize] += Self::DEMAND[0];
        if mask[3] {
            load[x[3] as usize] += Self::DEMAND[1];
        }
        let idle = load[..n_src].iter().filter(|&&l| l == 0.0).count();
        let f = 0.5 * n_src as f64 + load.iter().cloned().fold(0.0, f64::max) + 0.4 * idle as f64;
        Evaluation { f: vec![f], g: vec![] }
    }

    fn optimum(&self) -> Option<KnownOptimum> {
        let e = self.space.enumeration().ok()?;
        let best = e.vectors.iter().map(|v| self.evaluate(v).f[0]).fold(f64::INFINITY, f64::min);
        Some(KnownOptimum::Value(best))
    }
}
