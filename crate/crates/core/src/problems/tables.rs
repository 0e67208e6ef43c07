use crate::space::{DesignSpace, Expr};

/// Two variables; `x1` is only active for `x0` in {0, 1}, and two value
/// combinations are forbidden. 12 declared, 10 correct, 6 valid vectors.
pub fn table2_space() -> DesignSpace {
    DesignSpace::builder()
        .integer("x0", 0, 3)
        .integer("x1", 0, 2)
        .active_if("x1", Expr::is_in("x0", [0, 1]))
        .forbid(Expr::and(vec![Expr::eq("x0", 0), Expr::eq("x1", 2)]))
        .forbid(Expr::and(vec![Expr::eq("x0", 1), Expr::eq("x1", 1)]))
        .build()
        .expect("fixture space is well formed")
}

/// Five-variable activation chain with 9 valid vectors, used for the grouping
/// and weighting examples.
pub fn table4_space() -> DesignSpace {
    DesignSpace::builder()
        .integer("x0", 0, 1)
        .integer("x1", 0, 1)
        .integer("x2", 0, 2)
        .integer("x3", 0, 1)
        .integer("x4", 0, 2)
        .active_if("x1", Expr::eq("x0", 0))
        .active_if("x2", Expr::eq("x1", 0))
        .active_if("x3", Expr::is_in("x2", [1, 2]))
        .active_if("x4", Expr::eq("x2", 0))
        .build()
        .expect("fixture space is well formed")
}
