//! Characteristic statistics, identity verification, and path classification.
//!
//! The divergence statistic is built from <M^c>_T plus the mu- and
//! nu-integrals of x^2/(1+x) over the small and big jump bands. The
//! verify_* functions check the product identities used to relate the
//! exponential to those statistics; each must hold path-wise up to
//! floating-point rounding.

use serde::Serialize;
use thiserror::Error;

use crate::expcore::{exponential_closed_form, exponential_m2_closed, exponential_scaled, ExpValue};
use crate::model::{nu_integrand, Band, ScenarioSpec, Stat};
use crate::pathsim::{SamplePath, Which};

/// Per-path divergence statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristics {
    pub qv_c: f64,
    /// Sum of x^2/(1+x) over realized small-band jumps; divergent iff some
    /// jump equals -1.
    pub i_mu_small: Stat,
    pub i_mu_big: f64,
    /// Compensator-side integral: nu-rate times realized t_stop.
    pub i_nu_small: Stat,
    pub i_nu_big: Stat,
    pub has_minus_one: bool,
}

/// Classification of the left side {E_T(M) = 0} at threshold theta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LhsClass {
    ExactZero,
    BelowThreshold,
    Positive,
}

impl LhsClass {
    pub fn as_zero(self) -> bool {
        matches!(self, LhsClass::ExactZero | LhsClass::BelowThreshold)
    }
}

impl std::fmt::Display for LhsClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LhsClass::ExactZero => "exact_zero",
            LhsClass::BelowThreshold => "below_threshold",
            LhsClass::Positive => "positive",
        };
        write!(f, "{s}")
    }
}

/// Classification of a right-side divergence statistic at threshold K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsClass {
    DivergentExact,
    AboveThreshold,
    Finite,
}

impl RhsClass {
    pub fn as_divergent(self) -> bool {
        matches!(self, RhsClass::DivergentExact | RhsClass::AboveThreshold)
    }
}

impl std::fmt::Display for RhsClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RhsClass::DivergentExact => "divergent_exact",
            RhsClass::AboveThreshold => "above_threshold",
            RhsClass::Finite => "finite",
        };
        write!(f, "{s}")
    }
}

/// Per-path verdict for the three set-equality statistics.
///
/// rhs_i pairs the mu-integral on the small band with the nu-integral on
/// the big band; rhs_ii uses nu on both bands; rhs_iii uses mu on both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Theorem1Verdict {
    pub lhs_zero: LhsClass,
    pub rhs_i: RhsClass,
    pub rhs_ii: RhsClass,
    pub rhs_iii: RhsClass,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("argument {value} outside (-1, 1)")]
    Domain { value: f64 },
}

/// Divergence statistics of one path.
pub fn characteristics(path: &SamplePath, spec: &ScenarioSpec) -> Characteristics {
    let mut i_mu_small = Stat::Finite(0.0);
    let mut i_mu_big = 0.0;
    let mut has_minus_one = false;
    for j in &path.jumps {
        if j.size == -1.0 {
            has_minus_one = true;
            i_mu_small = Stat::Divergent;
            continue;
        }
        match j.band {
            Band::Small => i_mu_small = i_mu_small.add(Stat::Finite(nu_integrand(j.size))),
            Band::Big => i_mu_big += nu_integrand(j.size),
        }
    }
    Characteristics {
        qv_c: *path.qv_c.last().unwrap_or(&0.0),
        i_mu_small,
        i_mu_big,
        i_nu_small: spec.nu_stat_rate(Band::Small).scale(path.t_stop),
        i_nu_big: spec.nu_stat_rate(Band::Big).scale(path.t_stop),
        has_minus_one,
    }
}

fn residual_of(lhs: ExpValue, rhs: ExpValue) -> f64 {
    match (lhs.is_zero, rhs.is_zero) {
        (true, true) => 0.0,
        (false, false) => (lhs.log_mag - rhs.log_mag).abs(),
        _ => f64::INFINITY,
    }
}

/// |log E(M) - log E(M^c) E(M^1) E(M^2)|; infinity sentinel on a zero-flag
/// mismatch.
pub fn verify_factorization(path: &SamplePath) -> f64 {
    let t = path.t_stop;
    let whole = exponential_closed_form(path, Which::M, t);
    let prod = exponential_closed_form(path, Which::Mc, t)
        .mul(&exponential_closed_form(path, Which::M1, t))
        .mul(&exponential_closed_form(path, Which::M2, t));
    residual_of(whole, prod)
}

/// E(M^d) against E^2(M^d/2) * exp{-sum ln(1 + x^2/(4(1+x)))} over all jumps.
pub fn verify_md_identity(path: &SamplePath) -> f64 {
    let t = path.t_stop;
    let lhs = exponential_closed_form(path, Which::Md, t);
    let half = exponential_scaled(path, Which::Md, 0.5, t);
    let rhs = if half.is_zero {
        ExpValue::zero()
    } else {
        let mut log_mag = 2.0 * half.log_mag;
        for j in path.jumps_of(Which::Md, t, false) {
            if j.size == -1.0 {
                return if lhs.is_zero { 0.0 } else { f64::INFINITY };
            }
            log_mag -= (0.25 * nu_integrand(j.size)).ln_1p();
        }
        ExpValue {
            is_zero: false,
            log_mag,
        }
    };
    residual_of(lhs, rhs)
}

/// E(M^1) E^2(-M^1/2) against exp{sum ln[(1+x)(1-x/2)^2]} over small jumps.
pub fn verify_m1_identity(path: &SamplePath) -> f64 {
    let t = path.t_stop;
    let e1 = exponential_closed_form(path, Which::M1, t);
    let half = exponential_scaled(path, Which::M1, -0.5, t);
    let lhs = e1.mul(&half).mul(&half);
    let mut rhs_log = 0.0;
    let mut rhs_zero = false;
    for j in path.jumps_of(Which::M1, t, false) {
        if j.size == -1.0 {
            rhs_zero = true;
            continue;
        }
        rhs_log += j.size.ln_1p() + 2.0 * (-0.5 * j.size).ln_1p();
    }
    let rhs = if rhs_zero {
        ExpValue::zero()
    } else {
        ExpValue {
            is_zero: false,
            log_mag: rhs_log,
        }
    };
    residual_of(lhs, rhs)
}

/// Closed-form E(M^2) against the generic product form.
pub fn verify_m2_closed(path: &SamplePath) -> f64 {
    let t = path.t_stop;
    residual_of(
        exponential_closed_form(path, Which::M2, t),
        exponential_m2_closed(path, t),
    )
}

/// k(x) = 2x^2/(1+x) + ln[(1+x)(1-x/2)^2], nonnegative on (-1, 1).
pub fn lemma1_k(x: f64) -> Result<f64, AnalysisError> {
    if !(-1.0..1.0).contains(&x) || x <= -1.0 {
        return Err(AnalysisError::Domain { value: x });
    }
    Ok(2.0 * x * x / (1.0 + x) + x.ln_1p() + 2.0 * (-0.5 * x).ln_1p())
}

/// Closed form of k'(x) = x(2x+5)(1-x) / ((1+x)^2 (2-x)).
pub fn lemma1_kprime(x: f64) -> Result<f64, AnalysisError> {
    if !(-1.0..1.0).contains(&x) {
        return Err(AnalysisError::Domain { value: x });
    }
    let denom = (1.0 + x) * (1.0 + x) * (2.0 - x);
    Ok(x * (2.0 * x + 5.0) * (1.0 - x) / denom)
}

/// A single scalar-inequality violation, with the offending input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityViolation {
    pub check: &'static str,
    pub input: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct InequalityReport {
    pub n_checked: u64,
    pub violations: Vec<InequalityViolation>,
}

impl InequalityReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

const INEQ_SLACK: f64 = 1e-12;

/// Checks the three scalar inequalities used in the proof:
/// log subadditivity ln(1 + sum x_n) <= sum ln(1 + x_n) on nonnegative
/// tuples; x <= 2x^2/(1+x) for x >= 1; and the Lemma-1 consequence
/// -ln[(1+x)(1-x/2)^2] <= 2x^2/(1+x) on (-1, 1).
pub fn scalar_inequalities_check(
    nonneg_tuples: &[Vec<f64>],
    big_samples: &[f64],
    small_samples: &[f64],
) -> InequalityReport {
    let mut report = InequalityReport::default();
    for xs in nonneg_tuples {
        report.n_checked += 1;
        let sum: f64 = xs.iter().sum();
        let lhs = sum.ln_1p();
        let rhs: f64 = xs.iter().map(|x| x.ln_1p()).sum();
        if lhs > rhs + INEQ_SLACK {
            report.violations.push(InequalityViolation {
                check: "log_subadditivity",
                input: xs.clone(),
                lhs,
                rhs,
            });
        }
    }
    for &x in big_samples {
        report.n_checked += 1;
        let rhs = 2.0 * nu_integrand(x);
        if x > rhs + INEQ_SLACK {
            report.violations.push(InequalityViolation {
                check: "big_jump_bound",
                input: vec![x],
                lhs: x,
                rhs,
            });
        }
    }
    for &x in small_samples {
        report.n_checked += 1;
        let lhs = -(x.ln_1p() + 2.0 * (-0.5 * x).ln_1p());
        let rhs = 2.0 * nu_integrand(x);
        if lhs > rhs + INEQ_SLACK {
            report.violations.push(InequalityViolation {
                check: "lemma1_consequence",
                input: vec![x],
                lhs,
                rhs,
            });
        }
    }
    report
}

fn classify_rhs(value: Stat, k: f64) -> RhsClass {
    match value {
        Stat::Divergent => RhsClass::DivergentExact,
        Stat::Finite(v) if v > k => RhsClass::AboveThreshold,
        Stat::Finite(_) => RhsClass::Finite,
    }
}

/// Classifies a path's Theorem-1 left and right sides at thresholds
/// theta (numerically-zero) and K (numerically-divergent).
pub fn theorem1_verdict(
    ch: &Characteristics,
    e: &ExpValue,
    theta: f64,
    k: f64,
) -> Theorem1Verdict {
    let lhs_zero = if e.is_zero {
        LhsClass::ExactZero
    } else if e.log_mag < theta.ln() {
        LhsClass::BelowThreshold
    } else {
        LhsClass::Positive
    };
    let qv = Stat::Finite(ch.qv_c);
    let rhs_i = qv.add(ch.i_mu_small).add(ch.i_nu_big);
    let rhs_ii = qv.add(ch.i_nu_small).add(ch.i_nu_big);
    let rhs_iii = qv.add(ch.i_mu_small).add(Stat::Finite(ch.i_mu_big));
    Theorem1Verdict {
        lhs_zero,
        rhs_i: classify_rhs(rhs_i, k),
        rhs_ii: classify_rhs(rhs_ii, k),
        rhs_iii: classify_rhs(rhs_iii, k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JumpLaw, ScenarioSpec, SigmaSegment, SizeDist, StoppingRule};
    use crate::pathsim::simulate_path;

    fn spec(sigma: f64, jumps: Vec<JumpLaw>) -> ScenarioSpec {
        let s = ScenarioSpec {
            horizon: 1.0,
            grid_dt: 0.01,
            n_paths: 1,
            base_seed: 99,
            sigma: vec![SigmaSegment {
                t0: 0.0,
                t1: 1.0,
                value: sigma,
            }],
            jumps,
            stopping: StoppingRule::FixedTime { t: 1.0 },
        };
        crate::model::validate(&s).unwrap();
        s
    }

    fn mixed_spec() -> ScenarioSpec {
        spec(
            1.0,
            vec![
                JumpLaw {
                    intensity: 3.0,
                    dist: SizeDist::Uniform { a: -0.7, b: 0.7 },
                },
                JumpLaw {
                    intensity: 0.8,
                    dist: SizeDist::Pareto {
                        x_min: 1.0,
                        alpha: 3.0,
                    },
                },
            ],
        )
    }

    #[test]
    fn characteristics_no_jumps() {
        let s = spec(1.0, vec![]);
        let p = simulate_path(&s, 0).unwrap();
        let ch = characteristics(&p, &s);
        assert!((ch.qv_c - 1.0).abs() < 1e-12);
        assert_eq!(ch.i_mu_small, Stat::Finite(0.0));
        assert_eq!(ch.i_mu_big, 0.0);
        assert!(!ch.has_minus_one);
    }

    #[test]
    fn characteristics_single_small_jump() {
        let s = spec(
            0.0,
            vec![JumpLaw {
                intensity: 1.0,
                dist: SizeDist::Degenerate { x0: 0.5 },
            }],
        );
        for i in 0..100 {
            let p = simulate_path(&s, i).unwrap();
            if p.jumps.len() == 1 {
                let ch = characteristics(&p, &s);
                match ch.i_mu_small {
                    Stat::Finite(v) => assert!((v - 1.0 / 6.0).abs() < 1e-12),
                    Stat::Divergent => panic!(),
                }
                return;
            }
        }
        panic!("no single-jump path");
    }

    #[test]
    fn minus_one_jump_is_divergent() {
        let s = spec(
            0.0,
            vec![JumpLaw {
                intensity: 5.0,
                dist: SizeDist::Degenerate { x0: -1.0 },
            }],
        );
        for i in 0..20 {
            let p = simulate_path(&s, i).unwrap();
            if !p.jumps.is_empty() {
                let ch = characteristics(&p, &s);
                assert!(ch.has_minus_one);
                assert!(ch.i_mu_small.is_divergent());
                return;
            }
        }
        panic!("no jump path");
    }

    #[test]
    fn identities_hold_on_random_paths() {
        let s = mixed_spec();
        let mut worst: f64 = 0.0;
        for i in 0..100 {
            let p = simulate_path(&s, i).unwrap();
            worst = worst
                .max(verify_factorization(&p))
                .max(verify_md_identity(&p))
                .max(verify_m1_identity(&p))
                .max(verify_m2_closed(&p));
        }
        assert!(worst <= 1e-9, "max residual {worst}");
    }

    #[test]
    fn identities_zero_on_no_jump_paths() {
        let s = spec(0.0, vec![]);
        let p = simulate_path(&s, 0).unwrap();
        assert_eq!(verify_factorization(&p), 0.0);
        assert_eq!(verify_md_identity(&p), 0.0);
        assert_eq!(verify_m1_identity(&p), 0.0);
        assert_eq!(verify_m2_closed(&p), 0.0);
    }

    #[test]
    fn identities_flag_agreement_on_minus_one_paths() {
        let s = spec(
            0.5,
            vec![JumpLaw {
                intensity: 4.0,
                dist: SizeDist::Degenerate { x0: -1.0 },
            }],
        );
        for i in 0..50 {
            let p = simulate_path(&s, i).unwrap();
            if p.has_minus_one_jump() {
                assert_eq!(verify_factorization(&p), 0.0);
                assert_eq!(verify_md_identity(&p), 0.0);
                assert_eq!(verify_m1_identity(&p), 0.0);
            }
        }
    }

    #[test]
    fn lemma1_values() {
        assert_eq!(lemma1_k(0.0).unwrap(), 0.0);
        // frozen from direct evaluation of the formula
        let k_half = lemma1_k(0.5).unwrap();
        let expect = 2.0 * 0.25 / 1.5 + (1.5f64 * 0.75 * 0.75).ln();
        assert!((k_half - expect).abs() < 1e-12);
        assert!((k_half - 0.163434).abs() < 1e-6, "{k_half}");
        let k_neg = lemma1_k(-0.5).unwrap();
        let expect_neg = 1.0 + (0.5f64 * 1.25 * 1.25).ln();
        assert!((k_neg - expect_neg).abs() < 1e-12);
        assert!((k_neg - 0.753140).abs() < 1e-6, "{k_neg}");
        assert!(lemma1_k(1.0).is_err());
        assert!(lemma1_k(-1.0).is_err());
    }

    #[test]
    fn kprime_values_and_sign() {
        assert_eq!(lemma1_kprime(0.0).unwrap(), 0.0);
        let v = lemma1_kprime(0.5).unwrap();
        assert!((v - 0.5 * 6.0 * 0.5 / (2.25 * 1.5)).abs() < 1e-12);
        assert!((v - 4.0 / 9.0).abs() < 1e-12);
        assert!(lemma1_kprime(-0.5).unwrap() < 0.0);
        assert!(lemma1_kprime(0.5).unwrap() > 0.0);
    }

    #[test]
    fn kprime_matches_central_difference() {
        let h = 1e-5;
        let mut x: f64 = -0.9;
        while x <= 0.9 {
            if x.abs() > 1e-3 {
                let num = (lemma1_k(x + h).unwrap() - lemma1_k(x - h).unwrap()) / (2.0 * h);
                let exact = lemma1_kprime(x).unwrap();
                let rel = (num - exact).abs() / exact.abs().max(1e-12);
                assert!(rel < 1e-6, "x={x}: {num} vs {exact}");
            }
            x += 0.01;
        }
    }

    #[test]
    fn scalar_inequalities_spot_checks() {
        let report = scalar_inequalities_check(&[vec![0.5, 0.5]], &[1.0], &[0.5, -0.5]);
        assert!(report.ok(), "{:?}", report.violations);
        // boundary x = 1 is equality: 1 <= 2*1/2
        let lhs = 2.0f64.ln();
        let rhs = 2.0 * 1.5f64.ln();
        assert!(lhs < rhs);
    }

    #[test]
    fn scalar_inequalities_random_sweep() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        let mut tuples = Vec::new();
        let mut big = Vec::new();
        let mut small = Vec::new();
        for _ in 0..100_000 {
            let n = rng.gen_range(1..=4);
            tuples.push((0..n).map(|_| rng.gen::<f64>() * 10.0).collect());
            big.push(1.0 + rng.gen::<f64>() * 100.0);
            small.push(rng.gen_range(-0.999..0.999));
        }
        let report = scalar_inequalities_check(&tuples, &big, &small);
        assert!(report.ok(), "first violation {:?}", report.violations.first());
    }

    #[test]
    fn verdict_minus_one_agreement() {
        let s = spec(
            0.0,
            vec![JumpLaw {
                intensity: 5.0,
                dist: SizeDist::Degenerate { x0: -1.0 },
            }],
        );
        for i in 0..20 {
            let p = simulate_path(&s, i).unwrap();
            if !p.has_minus_one_jump() {
                continue;
            }
            let ch = characteristics(&p, &s);
            let e = exponential_closed_form(&p, Which::M, p.t_stop);
            let v = theorem1_verdict(&ch, &e, 1e-8, 50.0);
            assert_eq!(v.lhs_zero, LhsClass::ExactZero);
            assert_eq!(v.rhs_i, RhsClass::DivergentExact);
            return;
        }
        panic!("no minus-one path");
    }

    #[test]
    fn verdict_trivial_path() {
        let s = spec(0.0, vec![]);
        let p = simulate_path(&s, 0).unwrap();
        let ch = characteristics(&p, &s);
        let e = exponential_closed_form(&p, Which::M, p.t_stop);
        let v = theorem1_verdict(&ch, &e, 1e-8, 50.0);
        assert_eq!(v.lhs_zero, LhsClass::Positive);
        assert_eq!(v.rhs_i, RhsClass::Finite);
        assert_eq!(v.rhs_ii, RhsClass::Finite);
        assert_eq!(v.rhs_iii, RhsClass::Finite);
    }

    #[test]
    fn compensator_means_match_across_paths() {
        let s = mixed_spec();
        let n = 3000;
        let (mut sum_s, mut sq_s, mut sum_b, mut sq_b) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let p = simulate_path(&s, i).unwrap();
            let ch = characteristics(&p, &s);
            let ms = ch.i_mu_small.finite().unwrap();
            sum_s += ms;
            sq_s += ms * ms;
            sum_b += ch.i_mu_big;
            sq_b += ch.i_mu_big * ch.i_mu_big;
        }
        let nf = n as f64;
        let nu_s = s.nu_stat_rate(Band::Small).finite().unwrap();
        let nu_b = s.nu_stat_rate(Band::Big).finite().unwrap();
        let mean_s = sum_s / nf;
        let mean_b = sum_b / nf;
        let se_s = ((sq_s / nf - mean_s * mean_s) / nf).sqrt();
        let se_b = ((sq_b / nf - mean_b * mean_b) / nf).sqrt();
        assert!((mean_s - nu_s).abs() <= 4.0 * se_s, "{mean_s} vs {nu_s}");
        assert!((mean_b - nu_b).abs() <= 4.0 * se_b, "{mean_b} vs {nu_b}");
    }
}
