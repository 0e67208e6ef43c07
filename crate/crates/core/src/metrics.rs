//! Hierarchy metrics computed from the enumeration of valid discrete vectors:
//! imputation ratio, correction ratio and fraction, rate diversity.

use serde::{Deserialize, Serialize};

use crate::space::{DesignSpace, Enumeration, SpaceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub name: String,
    /// Fraction of valid vectors where the variable is inactive; `None` if it
    /// is never inactive.
    pub inactive_rate: Option<f64>,
    /// Fraction of valid vectors taking each option.
    pub value_rates: Vec<f64>,
    pub rd_all: f64,
    pub rd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyStats {
    pub n_declared: u128,
    pub n_valid_discr: usize,
    pub n_corr_discr: usize,
    pub ir_d: f64,
    pub ir_c: f64,
    pub ir: f64,
    pub cr_d: f64,
    pub cr_c: f64,
    pub cr: f64,
    pub crf: f64,
    pub rates: Vec<RateRecord>,
    pub mrd: f64,
    pub mrd_all: f64,
}

pub fn imputation_ratio(space: &DesignSpace) -> Result<(f64, f64, f64), SpaceError> {
    let e = space.enumeration()?;
    Ok(ir_from(space, &e))
}

fn ir_from(space: &DesignSpace, e: &Enumeration) -> (f64, f64, f64) {
    let cont = space.continuous_indices();
    let ir_d = e.n_declared as f64 / e.len() as f64;
    let ir_c = if cont.is_empty() {
        1.0
    } else {
        let active: usize = e.masks.iter().map(|m| cont.iter().filter(|&&i| m[i]).count()).sum();
        (e.len() * cont.len()) as f64 / active as f64
    };
    (ir_d, ir_c, ir_d * ir_c)
}

pub fn correction_ratio(space: &DesignSpace) -> Result<(f64, f64, f64), SpaceError> {
    let e = space.enumeration()?;
    Ok(cr_from(space, &e))
}

fn cr_from(space: &DesignSpace, e: &Enumeration) -> (f64, f64, f64) {
    let n_cont = space.continuous_indices().len();
    let cr_d = e.n_declared as f64 / e.n_correct as f64;
    let cr_c = if n_cont == 0 { 1.0 } else { (e.n_correct * n_cont) as f64 / e.correct_active_cont as f64 };
    (cr_d, cr_c, cr_d * cr_c)
}

/// log(cr) / log(ir), defined as 0 for a non-hierarchical space.
pub fn correction_fraction(ir: f64, cr: f64) -> f64 {
    if ir <= 1.0 {
        0.0
    } else {
        cr.ln() / ir.ln()
    }
}

/// Rate record of discrete variable `var` over a set of valid vectors.
pub fn rate_record(space: &DesignSpace, vectors: &[Vec<f64>], masks: &[Vec<bool>], var: usize) -> RateRecord {
    let def = &space.variables()[var];
    let n = vectors.len() as f64;
    let mut counts = vec![0usize; def.n_options()];
    let mut inactive = 0usize;
    for (x, m) in vectors.iter().zip(masks) {
        if m[var] {
            counts[x[var] as usize] += 1;
        } else {
            inactive += 1;
        }
    }
    let value_rates: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let inactive_rate = (inactive > 0).then(|| inactive as f64 / n);

    let mut all = value_rates.clone();
    all.extend(inactive_rate);
    let rd_all = spread(&all);

    let n_active = vectors.len() - inactive;
    let rd = if n_active == 0 {
        0.0
    } else {
        spread(&counts.iter().map(|&c| c as f64 / n_active as f64).collect::<Vec<_>>())
    };
    RateRecord { name: def.name.clone(), inactive_rate, value_rates, rd_all, rd }
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// Rate records for all discrete variables and the (mrd, mrd_all) pair.
pub fn rate_diversity(space: &DesignSpace) -> Result<(Vec<RateRecord>, f64, f64), SpaceError> {
    let e = space.enumeration()?;
    Ok(rd_from(space, &e))
}

fn rd_from(space: &DesignSpace, e: &Enumeration) -> (Vec<RateRecord>, f64, f64) {
    let rates: Vec<RateRecord> =
        space.discrete_indices().into_iter().map(|j| rate_record(space, &e.vectors, &e.masks, j)).collect();
    let mrd = rates.iter().map(|r| r.rd).fold(0.0, f64::max);
    let mrd_all = rates.iter().map(|r| r.rd_all).fold(0.0, f64::max);
    (rates, mrd, mrd_all)
}

pub fn hierarchy_stats(space: &DesignSpace) -> Result<HierarchyStats, SpaceError> {
    let e = space.enumeration()?;
    let (ir_d, ir_c, ir) = ir_from(space, &e);
    let (cr_d, cr_c, cr) = cr_from(space, &e);
    let (rates, mrd, mrd_all) = rd_from(space, &e);
    Ok(HierarchyStats {
        n_declared: e.n_declared,
        n_valid_discr: e.len(),
        n_corr_discr: e.n_correct,
        ir_d,
        ir_c,
        ir,
        cr_d,
        cr_c,
        cr,
        crf: correction_fraction(ir, cr),
        rates,
        mrd,
        mrd_all,
    })
}

impl HierarchyStats {
    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("declared        {}\n", self.n_declared));
        s.push_str(&format!("valid (discr.)  {}\n", self.n_valid_discr));
        s.push_str(&format!("correct         {}\n", self.n_corr_discr));
        s.push_str(&format!("IR   {:8.4}   IR_d {:8.4}   IR_c {:8.4}\n", self.ir, self.ir_d, self.ir_c));
        s.push_str(&format!("CR   {:8.4}   CR_d {:8.4}   CR_c {:8.4}\n", self.cr, self.cr_d, self.cr_c));
        s.push_str(&format!("CRF  {:7.2}%\n", 100.0 * self.crf));
        s.push_str(&format!("MRD  {:7.2}%   MRD_all {:7.2}%\n\n", 100.0 * self.mrd, 100.0 * self.mrd_all));
        let w = self.rates.iter().map(|r| r.name.len()).max().unwrap_or(4).max(8);
        s.push_str(&format!("{:w$}  {:>9}  {:>9}  {:>9}  rates\n", "variable", "inactive", "RD_all", "RD"));
        for r in &self.rates {
            let inactive = r.inactive_rate.map_or("-".to_string(), |v| format!("{:.1}%", 100.0 * v));
            let rates: Vec<String> = r.value_rates.iter().map(|v| format!("{:.1}%", 100.0 * v)).collect();
            s.push_str(&format!(
                "{:w$}  {:>9}  {:>8.1}%  {:>8.1}%  {}\n",
                r.name,
                inactive,
                100.0 * r.rd_all,
                100.0 * r.rd,
                rates.join(" ")
            ));
        }
        s
    }
}
