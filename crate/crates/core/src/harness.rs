//! Experiment orchestration: Monte Carlo batches, verification suites and
//! machine-readable reports.
//!
//! Per-path work is parallelized with rayon; rows are keyed by path index,
//! so output is byte-identical regardless of worker count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::analysis::{
    characteristics, lemma1_k, lemma1_kprime, theorem1_verdict, verify_factorization,
    verify_m1_identity, verify_m2_closed, verify_md_identity, LhsClass, RhsClass,
};
use crate::expcore::exponential_closed_form;
use crate::model::{
    validate, JumpLaw, ScenarioSpec, SigmaSegment, SizeDist, Stat, StoppingRule, ValidationError,
};
use crate::pathsim::{simulate_path, SimError, Which};

/// Hard path-wise residual bound for the exact identities.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Default numerically-zero threshold for the exponential.
pub const DEFAULT_THETA: f64 = 1e-8;

/// Default numerically-divergent threshold for the statistics.
pub const DEFAULT_K_DIV: f64 = 50.0;

/// Minimum sample size before the 4*SE statistical checks are applied.
pub const MIN_STAT_PATHS: usize = 100;

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub theta: f64,
    pub k_div: f64,
    /// Worker threads; 0 uses the global rayon pool.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            theta: DEFAULT_THETA,
            k_div: DEFAULT_K_DIV,
            jobs: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario [{}]: {0}", .0.code())]
    ConfigInvalid(#[from] ValidationError),
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Overall outcome, ordered by severity. Maps to process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Ok,
    StatWarnings,
    InvariantFailure,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Ok => 0,
            ExitStatus::StatWarnings => 1,
            ExitStatus::InvariantFailure => 2,
        }
    }
}

/// A report cell: a finite number, or the literal DIVERGENT / ZERO token.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NumCell {
    Num(f64),
    Divergent,
    Zero,
}

impl From<Stat> for NumCell {
    fn from(s: Stat) -> Self {
        match s {
            Stat::Finite(v) => NumCell::Num(v),
            Stat::Divergent => NumCell::Divergent,
        }
    }
}

/// Renders a float exactly as serde_json does (shortest round-trip form),
/// so CSV cells and JSON number tokens are byte-identical.
fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite float")
    } else if v.is_nan() {
        "NaN".to_owned()
    } else if v > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

impl std::fmt::Display for NumCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NumCell::Num(v) => write!(f, "{}", fmt_f64(*v)),
            NumCell::Divergent => write!(f, "DIVERGENT"),
            NumCell::Zero => write!(f, "ZERO"),
        }
    }
}

impl Serialize for NumCell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            NumCell::Num(v) => s.serialize_f64(*v),
            NumCell::Divergent => s.serialize_str("DIVERGENT"),
            NumCell::Zero => s.serialize_str("ZERO"),
        }
    }
}

/// One row per simulated path. CSV columns follow field order exactly.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub path_index: u64,
    pub t_stop: f64,
    pub censored: bool,
    pub e_value: NumCell,
    pub is_zero: bool,
    pub log_e: NumCell,
    pub qv_c: f64,
    pub i_mu_small: NumCell,
    pub i_mu_big: f64,
    pub i_nu_small: NumCell,
    pub i_nu_big: NumCell,
    pub has_minus_one: bool,
    pub lhs: LhsClass,
    pub rhs_i: RhsClass,
    pub rhs_ii: RhsClass,
    pub rhs_iii: RhsClass,
    pub res_factorization: f64,
    pub res_md: f64,
    pub res_m1: f64,
    pub res_m2_closed: f64,
}

pub const CSV_HEADER: &str = "path_index,t_stop,censored,e_value,is_zero,log_e,qv_c,\
i_mu_small,i_mu_big,i_nu_small,i_nu_big,has_minus_one,lhs,rhs_i,rhs_ii,rhs_iii,\
res_factorization,res_md,res_m1,res_m2_closed";

impl ReportRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.path_index,
            fmt_f64(self.t_stop),
            self.censored,
            self.e_value,
            self.is_zero,
            self.log_e,
            fmt_f64(self.qv_c),
            self.i_mu_small,
            fmt_f64(self.i_mu_big),
            self.i_nu_small,
            self.i_nu_big,
            self.has_minus_one,
            self.lhs,
            self.rhs_i,
            self.rhs_ii,
            self.rhs_iii,
            fmt_f64(self.res_factorization),
            fmt_f64(self.res_md),
            fmt_f64(self.res_m1),
            fmt_f64(self.res_m2_closed)
        )
    }
}

/// Mean and standard error of a sample over the finite entries.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

// Kahan-compensated accumulator; aggregation stays order-independent to
// well below the reporting tolerance.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

#[derive(Default)]
struct Moments {
    n: u64,
    sum: Kahan,
    sumsq: Kahan,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum.add(v);
        self.sumsq.add(v * v);
    }

    fn stats(&self) -> MeanSe {
        if self.n == 0 {
            return MeanSe::default();
        }
        let n = self.n as f64;
        let mean = self.sum.sum / n;
        let var = (self.sumsq.sum / n - mean * mean).max(0.0);
        MeanSe {
            mean,
            se: (var / n).sqrt(),
            n: self.n,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateSummary {
    pub n_paths: u64,
    pub censor_rate: f64,
    /// Agreement between {lhs zero-ish} and {rhs divergent-ish}, per part.
    pub agreement_i: f64,
    pub agreement_ii: f64,
    pub agreement_iii: f64,
    pub max_identity_residual: f64,
    pub e_mean: MeanSe,
    pub e_median: f64,
    pub e_q10: f64,
    pub e_q90: f64,
    pub log_e_mean: MeanSe,
    pub qv_c_mean: MeanSe,
    pub i_mu_small_mean: MeanSe,
    pub i_mu_small_divergent: u64,
    pub i_mu_big_mean: MeanSe,
    pub i_nu_small_mean: MeanSe,
    pub i_nu_small_divergent: u64,
    pub i_nu_big_mean: MeanSe,
    pub i_nu_big_divergent: u64,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub rows: Vec<ReportRow>,
    pub summary: AggregateSummary,
    pub exit: ExitStatus,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

fn build_row(spec: &ScenarioSpec, opts: &RunOptions, i: u64) -> Result<ReportRow, SimError> {
    let p = simulate_path(spec, i)?;
    let e = exponential_closed_form(&p, Which::M, p.t_stop);
    let ch = characteristics(&p, spec);
    let verdict = theorem1_verdict(&ch, &e, opts.theta, opts.k_div);
    let (e_value, log_e) = if e.is_zero {
        (NumCell::Zero, NumCell::Zero)
    } else {
        (NumCell::Num(e.value()), NumCell::Num(e.log_mag))
    };
    Ok(ReportRow {
        path_index: i,
        t_stop: p.t_stop,
        censored: p.censored,
        e_value,
        is_zero: e.is_zero,
        log_e,
        qv_c: ch.qv_c,
        i_mu_small: ch.i_mu_small.into(),
        i_mu_big: ch.i_mu_big,
        i_nu_small: ch.i_nu_small.into(),
        i_nu_big: ch.i_nu_big.into(),
        has_minus_one: ch.has_minus_one,
        lhs: verdict.lhs_zero,
        rhs_i: verdict.rhs_i,
        rhs_ii: verdict.rhs_ii,
        rhs_iii: verdict.rhs_iii,
        res_factorization: verify_factorization(&p),
        res_md: verify_md_identity(&p),
        res_m1: verify_m1_identity(&p),
        res_m2_closed: verify_m2_closed(&p),
    })
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(f)
    }
}

/// Simulates every path of the scenario and assembles rows plus summary.
///
/// `exit` is `InvariantFailure` iff a hard (non-statistical) check failed:
/// an identity residual above the tolerance, or a mismatch between the
/// exact-zero flag and the minus-one-jump flag. Statistical checks only
/// produce warnings.
pub fn run_scenario(spec: &ScenarioSpec, opts: &RunOptions) -> Result<ScenarioOutcome, HarnessError> {
    validate(spec)?;
    let rows: Vec<ReportRow> = with_pool(opts.jobs, || {
        (0..spec.n_paths)
            .into_par_iter()
            .map(|i| build_row(spec, opts, i))
            .collect::<Result<Vec<_>, SimError>>()
    })?;

    let mut exit = ExitStatus::Ok;
    let mut warnings = Vec::new();

    let mut max_residual: f64 = 0.0;
    let mut censored = 0u64;
    let (mut agree_i, mut agree_ii, mut agree_iii) = (0u64, 0u64, 0u64);
    let mut e_stats = Moments::default();
    let mut log_e_stats = Moments::default();
    let mut qv_stats = Moments::default();
    let mut mu_small = Moments::default();
    let mut mu_big = Moments::default();
    let mut nu_small = Moments::default();
    let mut nu_big = Moments::default();
    let (mut mu_small_div, mut nu_small_div, mut nu_big_div) = (0u64, 0u64, 0u64);
    let mut diff_small = Moments::default();
    let mut diff_big = Moments::default();
    let mut e_values = Vec::with_capacity(rows.len());

    for row in &rows {
        let res = row
            .res_factorization
            .max(row.res_md)
            .max(row.res_m1)
            .max(row.res_m2_closed);
        max_residual = max_residual.max(res);
        if res > IDENTITY_TOL {
            warnings.push(format!(
                "INVARIANT_FAILURE: identity residual {res:.3e} at path {}",
                row.path_index
            ));
            exit = ExitStatus::InvariantFailure;
        }
        if row.is_zero != row.has_minus_one {
            warnings.push(format!(
                "INVARIANT_FAILURE: zero/minus-one flag mismatch at path {}",
                row.path_index
            ));
            exit = ExitStatus::InvariantFailure;
        }
        if row.censored {
            censored += 1;
        }
        if row.lhs.as_zero() == row.rhs_i.as_divergent() {
            agree_i += 1;
        }
        if row.lhs.as_zero() == row.rhs_ii.as_divergent() {
            agree_ii += 1;
        }
        if row.lhs.as_zero() == row.rhs_iii.as_divergent() {
            agree_iii += 1;
        }
        let e_val = match row.e_value {
            NumCell::Num(v) => v,
            _ => 0.0,
        };
        e_stats.push(e_val);
        e_values.push(e_val);
        if let NumCell::Num(v) = row.log_e {
            log_e_stats.push(v);
        }
        qv_stats.push(row.qv_c);
        match row.i_mu_small {
            NumCell::Num(v) => mu_small.push(v),
            _ => mu_small_div += 1,
        }
        mu_big.push(row.i_mu_big);
        match row.i_nu_small {
            NumCell::Num(v) => nu_small.push(v),
            _ => nu_small_div += 1,
        }
        match row.i_nu_big {
            NumCell::Num(v) => nu_big.push(v),
            _ => nu_big_div += 1,
        }
        if let (NumCell::Num(m), NumCell::Num(n)) = (row.i_mu_small, row.i_nu_small) {
            diff_small.push(m - n);
        }
        if let NumCell::Num(n) = row.i_nu_big {
            diff_big.push(row.i_mu_big - n);
        }
    }

    let n = rows.len() as f64;
    // statistical checks: trend and calibration only, never per-path asserts;
    // skipped below MIN_STAT_PATHS where the SE estimate itself is noise
    let stats_apply = rows.len() >= MIN_STAT_PATHS;
    let em = e_stats.stats();
    if stats_apply && em.mean > 1.0 + 4.0 * em.se {
        warnings.push(format!(
            "STAT_WARNING: mean E_T {} exceeds supermartingale bound 1 + 4*SE ({})",
            em.mean,
            1.0 + 4.0 * em.se
        ));
        exit = exit.max(ExitStatus::StatWarnings);
    }
    if stats_apply && mu_small_div == 0 && nu_small_div == 0 {
        let d = diff_small.stats();
        if d.n > 1 && d.mean.abs() > 4.0 * d.se && d.se > 0.0 {
            warnings.push(format!(
                "STAT_WARNING: small-band compensator mismatch: mean(i_mu - i_nu) = {} vs 4*SE = {}",
                d.mean,
                4.0 * d.se
            ));
            exit = exit.max(ExitStatus::StatWarnings);
        }
    }
    if stats_apply && nu_big_div == 0 {
        let d = diff_big.stats();
        if d.n > 1 && d.mean.abs() > 4.0 * d.se && d.se > 0.0 {
            warnings.push(format!(
                "STAT_WARNING: big-band compensator mismatch: mean(i_mu - i_nu) = {} vs 4*SE = {}",
                d.mean,
                4.0 * d.se
            ));
            exit = exit.max(ExitStatus::StatWarnings);
        }
    }

    e_values.sort_by(|a, b| a.total_cmp(b));
    let summary = AggregateSummary {
        n_paths: rows.len() as u64,
        censor_rate: censored as f64 / n,
        agreement_i: agree_i as f64 / n,
        agreement_ii: agree_ii as f64 / n,
        agreement_iii: agree_iii as f64 / n,
        max_identity_residual: max_residual,
        e_mean: em,
        e_median: quantile(&e_values, 0.5),
        e_q10: quantile(&e_values, 0.1),
        e_q90: quantile(&e_values, 0.9),
        log_e_mean: log_e_stats.stats(),
        qv_c_mean: qv_stats.stats(),
        i_mu_small_mean: mu_small.stats(),
        i_mu_small_divergent: mu_small_div,
        i_mu_big_mean: mu_big.stats(),
        i_nu_small_mean: nu_small.stats(),
        i_nu_small_divergent: nu_small_div,
        i_nu_big_mean: nu_big.stats(),
        i_nu_big_divergent: nu_big_div,
        warnings,
    };
    Ok(ScenarioOutcome {
        rows,
        summary,
        exit,
    })
}

/// Max residuals of the four exact identities over every path.
#[derive(Debug, Clone, Serialize)]
pub struct IdentitySummary {
    pub n_paths: u64,
    pub max_factorization: f64,
    pub max_md: f64,
    pub max_m1: f64,
    pub max_m2_closed: f64,
    pub pass: bool,
}

impl IdentitySummary {
    pub fn max_residual(&self) -> f64 {
        self.max_factorization
            .max(self.max_md)
            .max(self.max_m1)
            .max(self.max_m2_closed)
    }
}

pub fn run_identity_suite(
    spec: &ScenarioSpec,
    opts: &RunOptions,
) -> Result<IdentitySummary, HarnessError> {
    validate(spec)?;
    let residuals: Vec<[f64; 4]> = with_pool(opts.jobs, || {
        (0..spec.n_paths)
            .into_par_iter()
            .map(|i| {
                let p = simulate_path(spec, i)?;
                Ok([
                    verify_factorization(&p),
                    verify_md_identity(&p),
                    verify_m1_identity(&p),
                    verify_m2_closed(&p),
                ])
            })
            .collect::<Result<Vec<_>, SimError>>()
    })?;
    let mut max = [0.0f64; 4];
    for r in &residuals {
        for k in 0..4 {
            max[k] = max[k].max(r[k]);
        }
    }
    let pass = max.iter().all(|&m| m <= IDENTITY_TOL);
    Ok(IdentitySummary {
        n_paths: spec.n_paths,
        max_factorization: max[0],
        max_md: max[1],
        max_m1: max[2],
        max_m2_closed: max[3],
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaSummary {
    pub grid_size: u64,
    pub epsilon: f64,
    pub k_min: f64,
    pub k_min_x: f64,
    pub max_kprime_rel_err: f64,
    pub pass: bool,
}

/// Sweeps k and k' over a grid of (-1 + epsilon, 1 - epsilon).
///
/// Checks: k >= -1e-12 everywhere, k(0) = 0 exactly, the sign pattern of
/// k' (negative left of 0, positive right of 0), and the closed-form k'
/// against central differences on |x| <= 0.9.
pub fn run_lemma_suite(grid_size: u64, epsilon: f64) -> Result<LemmaSummary, HarnessError> {
    if grid_size < 2 {
        return Err(HarnessError::CheckFailed("grid_size must be >= 2".into()));
    }
    if !(0.0..0.5).contains(&epsilon) || epsilon == 0.0 {
        return Err(HarnessError::CheckFailed(
            "epsilon must be in (0, 0.5)".into(),
        ));
    }
    let lo = -1.0 + epsilon;
    let hi = 1.0 - epsilon;
    let mut k_min = f64::INFINITY;
    let mut k_min_x = f64::NAN;
    let mut max_rel = 0.0f64;
    let h = 1e-5;
    for i in 0..grid_size {
        let x = lo + (hi - lo) * (i as f64) / ((grid_size - 1) as f64);
        let k = lemma1_k(x).map_err(|e| HarnessError::CheckFailed(e.to_string()))?;
        if k < k_min {
            k_min = k;
            k_min_x = x;
        }
        if k < -1e-12 {
            return Err(HarnessError::CheckFailed(format!(
                "k({x}) = {k} below -1e-12"
            )));
        }
        let kp = lemma1_kprime(x).map_err(|e| HarnessError::CheckFailed(e.to_string()))?;
        if x < 0.0 && kp >= 0.0 || x > 0.0 && kp <= 0.0 {
            return Err(HarnessError::CheckFailed(format!(
                "k'({x}) = {kp} violates the sign pattern"
            )));
        }
        if x.abs() <= 0.9 && x.abs() > 10.0 * h {
            let num = (lemma1_k(x + h).unwrap() - lemma1_k(x - h).unwrap()) / (2.0 * h);
            let rel = (num - kp).abs() / kp.abs().max(1e-9);
            max_rel = max_rel.max(rel);
            if rel > 1e-6 {
                return Err(HarnessError::CheckFailed(format!(
                    "k'({x}): closed form {kp} vs central difference {num}"
                )));
            }
        }
    }
    if lemma1_k(0.0).unwrap() != 0.0 {
        return Err(HarnessError::CheckFailed("k(0) != 0".into()));
    }
    Ok(LemmaSummary {
        grid_size,
        epsilon,
        k_min,
        k_min_x,
        max_kprime_rel_err: max_rel,
        pass: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Writes rows (CSV) or {summary, rows} (JSON) to the writer.
pub fn emit_report<W: Write>(
    rows: &[ReportRow],
    summary: &AggregateSummary,
    format: ReportFormat,
    out: &mut W,
) -> Result<(), HarnessError> {
    match format {
        ReportFormat::Csv => {
            writeln!(out, "{CSV_HEADER}")?;
            for row in rows {
                writeln!(out, "{}", row.to_csv_line())?;
            }
        }
        ReportFormat::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                summary: &'a AggregateSummary,
                rows: &'a [ReportRow],
            }
            serde_json::to_writer_pretty(&mut *out, &Doc { summary, rows })
                .map_err(std::io::Error::other)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Built-in scenario library S0-S5.
pub fn builtin_scenario(name: &str) -> Option<ScenarioSpec> {
    let seg = |t0: f64, t1: f64, value: f64| SigmaSegment { t0, t1, value };
    let law = |intensity: f64, dist: SizeDist| JumpLaw { intensity, dist };
    let spec = match name.to_ascii_uppercase().as_str() {
        // trivial: sigma = 0, no jumps
        "S0" => ScenarioSpec {
            horizon: 1.0,
            grid_dt: 0.01,
            n_paths: 1000,
            base_seed: 0x5300,
            sigma: vec![seg(0.0, 1.0, 0.0)],
            jumps: vec![],
            stopping: StoppingRule::FixedTime { t: 1.0 },
        },
        // minus-one-jump dichotomy
        "S1" => ScenarioSpec {
            horizon: 10.0,
            grid_dt: 0.01,
            n_paths: 1000,
            base_seed: 0x5301,
            sigma: vec![seg(0.0, 10.0, 0.0)],
            jumps: vec![law(5.0, SizeDist::Degenerate { x0: -1.0 })],
            stopping: StoppingRule::FirstMinusOneJump,
        },
        // pure-continuous Kazamaki check, <M^c>_1 = 1
        "S2" => ScenarioSpec {
            horizon: 1.0,
            grid_dt: 0.001,
            n_paths: 10_000,
            base_seed: 0x5302,
            sigma: vec![seg(0.0, 1.0, 1.0)],
            jumps: vec![],
            stopping: StoppingRule::FixedTime { t: 1.0 },
        },
        // heavy negative small jumps near -1
        "S3" => ScenarioSpec {
            horizon: 1.0,
            grid_dt: 0.01,
            n_paths: 10_000,
            base_seed: 0x5303,
            sigma: vec![seg(0.0, 1.0, 0.5)],
            jumps: vec![law(
                2.0,
                SizeDist::BetaShifted {
                    alpha: 4.0,
                    beta: 20.0,
                },
            )],
            stopping: StoppingRule::FixedTime { t: 1.0 },
        },
        // big-jump Pareto band
        "S4" => ScenarioSpec {
            horizon: 1.0,
            grid_dt: 0.01,
            n_paths: 10_000,
            base_seed: 0x5304,
            sigma: vec![seg(0.0, 1.0, 0.5)],
            jumps: vec![law(
                1.0,
                SizeDist::Pareto {
                    x_min: 1.0,
                    alpha: 2.5,
                },
            )],
            stopping: StoppingRule::FixedTime { t: 1.0 },
        },
        // mixed bands, two-segment volatility
        "S5" => ScenarioSpec {
            horizon: 1.0,
            grid_dt: 0.005,
            n_paths: 1000,
            base_seed: 0x5305,
            sigma: vec![seg(0.0, 0.5, 0.8), seg(0.5, 1.0, 1.2)],
            jumps: vec![
                law(3.0, SizeDist::Uniform { a: -0.5, b: 0.5 }),
                law(
                    0.5,
                    SizeDist::Pareto {
                        x_min: 1.0,
                        alpha: 3.0,
                    },
                ),
                law(
                    1.0,
                    SizeDist::ShiftedExponential {
                        shift: -0.2,
                        rate: 4.0,
                    },
                ),
            ],
            stopping: StoppingRule::FixedTime { t: 1.0 },
        },
        _ => return None,
    };
    Some(spec)
}

pub fn builtin_names() -> &'static [&'static str] {
    &["S0", "S1", "S2", "S3", "S4", "S5"]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_scenarios_validate() {
        for name in builtin_names() {
            let spec = builtin_scenario(name).unwrap();
            assert!(validate(&spec).is_ok(), "{name} fails validation");
        }
        assert!(builtin_scenario("S9").is_none());
    }

    #[test]
    fn s0_all_unit_exponentials() {
        let mut spec = builtin_scenario("S0").unwrap();
        spec.n_paths = 50;
        let out = run_scenario(&spec, &RunOptions::default()).unwrap();
        assert_eq!(out.exit, ExitStatus::Ok);
        for row in &out.rows {
            assert_eq!(row.e_value, NumCell::Num(1.0));
            assert_eq!(row.rhs_i, RhsClass::Finite);
        }
    }

    #[test]
    fn s1_dichotomy_is_exact() {
        let mut spec = builtin_scenario("S1").unwrap();
        spec.n_paths = 200;
        let out = run_scenario(&spec, &RunOptions::default()).unwrap();
        assert_eq!(out.exit, ExitStatus::Ok);
        assert_eq!(out.summary.agreement_i, 1.0);
        for row in &out.rows {
            assert!(row.is_zero);
            assert_eq!(row.lhs, LhsClass::ExactZero);
            assert_eq!(row.rhs_i, RhsClass::DivergentExact);
        }
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let mut spec = builtin_scenario("S0").unwrap();
        spec.n_paths = 1;
        let out = run_scenario(&spec, &RunOptions::default()).unwrap();
        let mut buf = Vec::new();
        emit_report(&out.rows, &out.summary, ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[0].split(',').count(),
            lines[1].split(',').count()
        );
    }

    #[test]
    fn divergent_literal_appears_in_csv() {
        let mut spec = builtin_scenario("S1").unwrap();
        spec.n_paths = 5;
        let out = run_scenario(&spec, &RunOptions::default()).unwrap();
        let line = out.rows[0].to_csv_line();
        assert!(line.contains("DIVERGENT"));
        assert!(line.contains("ZERO"));
    }

    #[test]
    fn json_report_parses_back() {
        let mut spec = builtin_scenario("S0").unwrap();
        spec.n_paths = 3;
        let out = run_scenario(&spec, &RunOptions::default()).unwrap();
        let mut buf = Vec::new();
        emit_report(&out.rows, &out.summary, ReportFormat::Json, &mut buf).unwrap();
        let doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
        assert_eq!(doc["summary"]["n_paths"].as_u64().unwrap(), 3);
    }

    #[test]
    fn deterministic_across_worker_counts() {
        let mut spec = builtin_scenario("S5").unwrap();
        spec.n_paths = 100;
        let render = |jobs: usize| {
            let out = run_scenario(
                &spec,
                &RunOptions {
                    jobs,
                    ..Default::default()
                },
            )
            .unwrap();
            let mut buf = Vec::new();
            emit_report(&out.rows, &out.summary, ReportFormat::Csv, &mut buf).unwrap();
            buf
        };
        assert_eq!(render(1), render(4));
    }

    #[test]
    fn lemma_suite_passes() {
        let s = run_lemma_suite(10_000, 1e-3).unwrap();
        assert!(s.pass);
        assert!(s.k_min >= -1e-12);
        assert!(s.k_min_x.abs() < 1e-3 + 1e-4);
    }

    #[test]
    fn lemma_suite_rejects_bad_args() {
        assert!(run_lemma_suite(1, 1e-3).is_err());
        assert!(run_lemma_suite(100, 0.7).is_err());
    }

    #[test]
    fn identity_suite_on_mixed_scenario() {
        let mut spec = builtin_scenario("S5").unwrap();
        spec.n_paths = 100;
        let s = run_identity_suite(&spec, &RunOptions::default()).unwrap();
        assert!(s.pass, "max residual {}", s.max_residual());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut spec = builtin_scenario("S0").unwrap();
        spec.jumps.push(JumpLaw {
            intensity: -1.0,
            dist: SizeDist::Degenerate { x0: 0.5 },
        });
        match run_scenario(&spec, &RunOptions::default()) {
            Err(HarnessError::ConfigInvalid(e)) => assert_eq!(e.code(), "NEGATIVE_RATE"),
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
