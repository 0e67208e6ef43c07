//! Guidance, navigation and control architecture problem: choose how many
//! sensors and flight computers to install, how they are connected, and the
//! type (quality) of every unit. Heavier units are more reliable.

use std::sync::{Arc, OnceLock};

use crate::correction::CorrectionHook;
use crate::problems::{Evaluation, KnownOptimum, Problem};
use crate::space::{DesignSpace, Expr};

const MAX_UNITS: usize = 3;
const N_SENSORS: usize = 0;
const N_COMPUTERS: usize = 1;

fn conn_index(i: usize, j: usize) -> usize {
    2 + i * MAX_UNITS + j
}

fn sensor_type_index(i: usize) -> usize {
    2 + MAX_UNITS * MAX_UNITS + i
}

fn computer_type_index(j: usize) -> usize {
    2 + MAX_UNITS * MAX_UNITS + MAX_UNITS + j
}

fn conn_name(i: usize, j: usize) -> String {
    format!("conn_s{}_c{}", i + 1, j + 1)
}

/// Unit failure probability for type selector `t` in [0, 1].
pub fn unit_failure(t: f64) -> f64 {
    10f64.powf(-1.0 - 3.0 * t)
}

/// Unit mass for type selector `t` in [0, 1].
pub fn unit_mass(t: f64) -> f64 {
    1.0 + 9.0 * t
}

pub fn gnc_space() -> DesignSpace {
    let mut b = DesignSpace::builder().integer("n_sensors", 1, 3).integer("n_computers", 1, 3);
    for i in 0..MAX_UNITS {
        for j in 0..MAX_UNITS {
            b = b.categorical(&conn_name(i, j), &["no", "yes"]);
        }
    }
    for i in 0..MAX_UNITS {
        b = b.continuous(&format!("type_s{}", i + 1), 0.0, 1.0);
    }
    for j in 0..MAX_UNITS {
        b = b.continuous(&format!("type_c{}", j + 1), 0.0, 1.0);
    }
    for i in 0..MAX_UNITS {
        for j in 0..MAX_UNITS {
            let mut conds = Vec::new();
            if i > 0 {
                conds.push(Expr::ge("n_sensors", (i + 1) as f64));
            }
            if j > 0 {
                conds.push(Expr::ge("n_computers", (j + 1) as f64));
            }
            if !conds.is_empty() {
                b = b.active_if(&conn_name(i, j), Expr::and(conds));
            }
        }
    }
    for k in 1..MAX_UNITS {
        b = b.active_if(&format!("type_s{}", k + 1), Expr::ge("n_sensors", (k + 1) as f64));
        b = b.active_if(&format!("type_c{}", k + 1), Expr::ge("n_computers", (k + 1) as f64));
    }
    // every installed unit needs at least one connection; one clause per count
    // of the opposite unit type so that all referenced variables are active
    for i in 0..MAX_UNITS {
        for m in 1..=MAX_UNITS {
            let mut items = vec![Expr::ge("n_sensors", (i + 1) as f64), Expr::eq("n_computers", m)];
            items.extend((0..m).map(|j| Expr::eq(&conn_name(i, j), "no")));
            b = b.forbid(Expr::and(items));
        }
    }
    for j in 0..MAX_UNITS {
        for m in 1..=MAX_UNITS {
            let mut items = vec![Expr::ge("n_computers", (j + 1) as f64), Expr::eq("n_sensors", m)];
            items.extend((0..m).map(|i| Expr::eq(&conn_name(i, j), "no")));
            b = b.forbid(Expr::and(items));
        }
    }
    b.single_option_inactive(false).build().expect("gnc space is well formed")
}

/// Discrete part of a GNC vector, with its failed unit states precomputed.
struct Architecture {
    ns: usize,
    nc: usize,
    n_conn: usize,
    failed: Vec<u32>,
}

fn architecture(x: &[f64]) -> Architecture {
    let ns = x[N_SENSORS] as usize + 1;
    let nc = x[N_COMPUTERS] as usize + 1;
    let conn: Vec<Vec<bool>> = (0..ns).map(|i| (0..nc).map(|j| x[conn_index(i, j)] == 1.0).collect()).collect();
    let n_conn = conn.iter().flatten().filter(|&&c| c).count();
    Architecture { ns, nc, n_conn, failed: failed_states(&conn) }
}

fn metrics_of(a: &Architecture, x: &[f64]) -> (f64, f64) {
    let ts: Vec<f64> = (0..a.ns).map(|i| x[sensor_type_index(i)]).collect();
    let tc: Vec<f64> = (0..a.nc).map(|j| x[computer_type_index(j)]).collect();
    let mass = ts.iter().chain(&tc).map(|&t| unit_mass(t)).sum::<f64>() + a.n_conn as f64;
    let ps: Vec<f64> = ts.iter().map(|&t| unit_failure(t)).collect();
    let pc: Vec<f64> = tc.iter().map(|&t| unit_failure(t)).collect();
    (mass, failure_probability_over(&ps, &pc, &a.failed).log10())
}

/// Exact probability that no working sensor is connected to a working
/// computer, by enumerating all unit failure states.
pub fn system_failure_probability(p_sensor: &[f64], p_computer: &[f64], conn: &[Vec<bool>]) -> f64 {
    failure_probability_over(p_sensor, p_computer, &failed_states(conn))
}

/// Unit states (bit set = unit up, sensors first) in which no connected
/// sensor-computer pair survives.
fn failed_states(conn: &[Vec<bool>]) -> Vec<u32> {
    let ns = conn.len();
    let nc = conn.first().map_or(0, |r| r.len());
    (0u32..(1 << (ns + nc)))
        .filter(|&state| {
            let up = |k: usize| state & (1 << k) != 0;
            !(0..ns).any(|i| up(i) && (0..nc).any(|j| up(ns + j) && conn[i][j]))
        })
        .collect()
}

fn failure_probability_over(p_sensor: &[f64], p_computer: &[f64], failed: &[u32]) -> f64 {
    let ns = p_sensor.len();
    let mut total = 0.0;
    for &state in failed {
        let up = |k: usize| state & (1 << k) != 0;
        let mut prob = 1.0;
        for (i, &p) in p_sensor.iter().enumerate() {
            prob *= if up(i) { 1.0 - p } else { p };
        }
        for (j, &p) in p_computer.iter().enumerate() {
            prob *= if up(ns + j) { 1.0 - p } else { p };
        }
        total += prob;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GncVariant {
    /// Minimize mass.
    SoWeight,
    /// Minimize log10 of the system failure probability.
    SoFailure,
    /// Equal-weight sum of both objectives normalized to [0, 1].
    SoScalarized,
    /// Mass and log10 failure probability as two objectives.
    Multi,
}

#[derive(Debug, Clone)]
pub struct Gnc {
    variant: GncVariant,
    space: DesignSpace,
}

const MASS_MIN: f64 = 3.0;
const MASS_MAX: f64 = 69.0;

/// Range of log10 failure probability over the design space: fully connected
/// best-type units, and a single weakest pair.
fn log_failure_range() -> (f64, f64) {
    static RANGE: OnceLock<(f64, f64)> = OnceLock::new();
    *RANGE.get_or_init(|| {
        let full = vec![vec![true; 3]; 3];
        let lo = system_failure_probability(&[unit_failure(1.0); 3], &[unit_failure(1.0); 3], &full).log10();
        let hi = system_failure_probability(&[unit_failure(0.0)], &[unit_failure(0.0)], &[vec![true]]).log10();
        (lo, hi)
    })
}

impl Gnc {
    pub fn new(variant: GncVariant) -> Self {
        Gnc { variant, space: gnc_space() }
    }

    pub fn variant(&self) -> GncVariant {
        self.variant
    }

    /// Mass and log10 failure probability of a vector.
    pub fn metrics(&self, x: &[f64]) -> (f64, f64) {
        let (x, _) = self.space.impute(x);
        metrics_of(&architecture(&x), &x)
    }

    fn scalarize(mass: f64, log_fail: f64) -> f64 {
        let (lo, hi) = log_failure_range();
        0.5 * (mass - MASS_MIN) / (MASS_MAX - MASS_MIN) + 0.5 * (log_fail - lo) / (hi - lo)
    }

    fn scalarized_optimum(&self) -> f64 {
        static OPT: OnceLock<f64> = OnceLock::new();
        *OPT.get_or_init(|| {
            let e = self.space.enumeration().expect("gnc space enumerates");
            let cont = self.space.continuous_indices();
            let mut best = f64::INFINITY;
            for (v, m) in e.vectors.iter().zip(&e.masks) {
                let active: Vec<usize> = cont.iter().copied().filter(|&i| m[i]).collect();
                let arch = architecture(v);
                let f = |x: &[f64]| {
                    let (mass, lf) = metrics_of(&arch, x);
                    Self::scalarize(mass, lf)
                };
                best = best.min(minimize_box(v, &active, f));
            }
            best
        })
    }

    fn pareto_front(&self) -> Vec<Vec<f64>> {
        static FRONT: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
        FRONT
            .get_or_init(|| {
                let e = self.space.enumeration().expect("gnc space enumerates");
                let cont = self.space.continuous_indices();
                let levels = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
                let mut pts = Vec::new();
                for (v, m) in e.vectors.iter().zip(&e.masks) {
                    let active: Vec<usize> = cont.iter().copied().filter(|&i| m[i]).collect();
                    let arch = architecture(v);
                    let mut x = v.clone();
                    for code in 0..levels.len().pow(active.len() as u32) {
                        let mut c = code;
                        for &i in &active {
                            x[i] = levels[c % levels.len()];
                            c /= levels.len();
                        }
                        let (mass, lf) = metrics_of(&arch, &x);
                        pts.push(vec![mass, lf]);
                    }
                }
                nondominated_2d(pts)
            })
            .clone()
    }
}

/// Non-dominated subset of 2-D points, sorted by the first objective.
fn nondominated_2d(mut pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut front: Vec<Vec<f64>> = Vec::new();
    for p in pts {
        if front.last().is_none_or(|q| p[1] < q[1]) {
            front.push(p);
        }
    }
    front
}

/// Box-constrained minimization over the `active` coordinates of `x0` in
/// [0, 1]: best corner as start, then cyclic coordinate search (grid scan plus
/// golden-section refinement) until no coordinate improves.
fn minimize_box(x0: &[f64], active: &[usize], f: impl Fn(&[f64]) -> f64) -> f64 {
    let mut x = x0.to_vec();
    let k = active.len();
    let mut best = f64::INFINITY;
    let mut start = x.clone();
    for code in 0..(1usize << k) {
        for (b, &i) in active.iter().enumerate() {
            x[i] = if code & (1 << b) != 0 { 1.0 } else { 0.0 };
        }
        let v = f(&x);
        if v < best {
            best = v;
            start = x.clone();
        }
    }
    x = start;
    for _ in 0..50 {
        let before = best;
        for &i in active {
            let (t_old, v_old) = (x[i], f(&x));
            let grid: Vec<f64> = (0..=10).map(|g| g as f64 / 10.0).collect();
            let at = |t: f64, x: &mut Vec<f64>| {
                x[i] = t;
                f(x)
            };
            let (mut gi, mut gv) = (0usize, f64::INFINITY);
            for (n, &t) in grid.iter().enumerate() {
                let v = at(t, &mut x);
                if v < gv {
                    gi = n;
                    gv = v;
                }
            }
            let (mut a, mut b) = (grid[gi.saturating_sub(1)], grid[(gi + 1).min(10)]);
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
            let (mut fc, mut fd) = (at(c, &mut x), at(d, &mut x));
            for _ in 0..30 {
                if fc < fd {
                    (b, d, fd) = (d, c, fc);
                    c = b - r * (b - a);
                    fc = at(c, &mut x);
                } else {
                    (a, c, fc) = (c, d, fd);
                    d = a + r * (b - a);
                    fd = at(d, &mut x);
                }
            }
            let tm = 0.5 * (a + b);
            let vm = at(tm, &mut x);
            let (t_best, v_best) = if vm < gv { (tm, vm) } else { (grid[gi], gv) };
            if v_best < v_old {
                x[i] = t_best;
                best = best.min(v_best);
            } else {
                x[i] = t_old;
            }
        }
        if before - best < 1e-13 {
            break;
        }
    }
    best
}

impl Problem for Gnc {
    fn name(&self) -> String {
        match self.variant {
            GncVariant::SoWeight => "gnc-weight",
            GncVariant::SoFailure => "gnc-failure",
            GncVariant::SoScalarized => "gnc",
            GncVariant::Multi => "gnc-mo",
        }
        .into()
    }

    fn space(&self) -> &DesignSpace {
        &self.space
    }

    fn n_obj(&self) -> usize {
        if self.variant == GncVariant::Multi {
            2
        } else {
            1
        }
    }

    fn evaluate(&self, x: &[f64]) -> Evaluation {
        let (mass, lf) = self.metrics(x);
        let f = match self.variant {
            GncVariant::SoWeight => vec![mass],
            GncVariant::SoFailure => vec![lf],
            GncVariant::SoScalarized => vec![Self::scalarize(mass, lf)],
            GncVariant::Multi => vec![mass, lf],
        };
        Evaluation { f, g: vec![] }
    }

    fn optimum(&self) -> Option<KnownOptimum> {
        Some(match self.variant {
            GncVariant::SoWeight => KnownOptimum::Value(MASS_MIN),
            GncVariant::SoFailure => KnownOptimum::Value(log_failure_range().0),
            GncVariant::SoScalarized => KnownOptimum::Value(self.scalarized_optimum()),
            GncVariant::Multi => KnownOptimum::Front(self.pareto_front()),
        })
    }

    /// Connects every unconnected sensor and computer to a partner.
    fn correction_hook(&self) -> Option<CorrectionHook> {
        Some(Arc::new(|_space: &DesignSpace, x: &[f64]| {
            let mut x = x.to_vec();
            let ns = x[N_SENSORS] as usize + 1;
            let nc = x[N_COMPUTERS] as usize + 1;
            for i in 0..ns {
                if (0..nc).all(|j| x[conn_index(i, j)] == 0.0) {
                    x[conn_index(i, i % nc)] = 1.0;
                }
            }
            for j in 0..nc {
                if (0..ns).all(|i| x[conn_index(i, j)] == 0.0) {
                    x[conn_index(j % ns, j)] = 1.0;
                }
            }
            x
        }))
    }
}
