//! Scenario specifications: the generative law of the local martingale M.
//!
//! A scenario fixes a piecewise-constant volatility schedule for the
//! continuous part, a list of finite-activity jump laws (intensity plus a
//! size distribution supported in [-1, inf)), a stopping rule and the
//! simulation grid. This module validates scenarios and provides the
//! analytic jump-law moments the compensators need.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::quad::adaptive_simpson;

/// Absolute tolerance for moment quadrature.
const QUAD_TOL: f64 = 1e-12;

/// Jump band split: small = [-1, 1), big = [1, inf).
///
/// A jump of exactly -1 belongs to the small band; the boundary x = 1 is
/// assigned to the big band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Small,
    Big,
}

impl Band {
    pub fn of(size: f64) -> Band {
        if size < 1.0 {
            Band::Small
        } else {
            Band::Big
        }
    }

    /// Half-open interval [lo, hi) covered by this band.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Band::Small => (-1.0, 1.0),
            Band::Big => (1.0, f64::INFINITY),
        }
    }
}

/// Band selector for moments: a single band or the whole support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandSel {
    Small,
    Big,
    All,
}

impl BandSel {
    fn bounds(self) -> (f64, f64) {
        match self {
            BandSel::Small => (-1.0, 1.0),
            BandSel::Big => (1.0, f64::INFINITY),
            BandSel::All => (-1.0, f64::INFINITY),
        }
    }
}

/// A real statistic that may be exactly infinite.
///
/// Divergence is a symbolic state, distinct from any large float: the
/// characterization of {E_T(M) = 0} hinges on "= infinity", not "large".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stat {
    Finite(f64),
    Divergent,
}

impl Stat {
    pub fn is_divergent(self) -> bool {
        matches!(self, Stat::Divergent)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Stat::Finite(v) => Some(v),
            Stat::Divergent => None,
        }
    }

    pub fn add(self, other: Stat) -> Stat {
        match (self, other) {
            (Stat::Finite(a), Stat::Finite(b)) => Stat::Finite(a + b),
            _ => Stat::Divergent,
        }
    }

    pub fn scale(self, c: f64) -> Stat {
        match self {
            Stat::Finite(v) => Stat::Finite(c * v),
            Stat::Divergent => Stat::Divergent,
        }
    }
}

impl std::fmt::Display for Stat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stat::Finite(v) => write!(f, "{v}"),
            Stat::Divergent => write!(f, "DIVERGENT"),
        }
    }
}

/// Jump size distribution. All mass lies in [-1, inf).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeDist {
    Degenerate { x0: f64 },
    Uniform { a: f64, b: f64 },
    ShiftedExponential { shift: f64, rate: f64 },
    Pareto { x_min: f64, alpha: f64 },
    BetaShifted { alpha: f64, beta: f64 },
}

// Hand-written so unknown keys inside the dist object are rejected;
// serde's deny_unknown_fields does not reach internally tagged variants.
impl<'de> Deserialize<'de> for SizeDist {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut map = serde_json::Map::deserialize(d)?;
        let kind = map
            .remove("kind")
            .ok_or_else(|| D::Error::missing_field("kind"))?;
        let kind = kind
            .as_str()
            .ok_or_else(|| D::Error::custom("dist kind must be a string"))?
            .to_owned();
        let rest = serde_json::Value::Object(map);
        macro_rules! params {
            ($t:ty) => {
                serde_json::from_value::<$t>(rest)
                    .map_err(|e| D::Error::custom(format!("dist `{kind}`: {e}")))?
            };
        }
        Ok(match kind.as_str() {
            "degenerate" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    x0: f64,
                }
                let p = params!(P);
                SizeDist::Degenerate { x0: p.x0 }
            }
            "uniform" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    a: f64,
                    b: f64,
                }
                let p = params!(P);
                SizeDist::Uniform { a: p.a, b: p.b }
            }
            "shifted_exponential" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    shift: f64,
                    rate: f64,
                }
                let p = params!(P);
                SizeDist::ShiftedExponential {
                    shift: p.shift,
                    rate: p.rate,
                }
            }
            "pareto" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    x_min: f64,
                    alpha: f64,
                }
                let p = params!(P);
                SizeDist::Pareto {
                    x_min: p.x_min,
                    alpha: p.alpha,
                }
            }
            "beta_shifted" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    alpha: f64,
                    beta: f64,
                }
                let p = params!(P);
                SizeDist::BetaShifted {
                    alpha: p.alpha,
                    beta: p.beta,
                }
            }
            other => return Err(D::Error::custom(format!("unknown dist kind `{other}`"))),
        })
    }
}

/// One finite-activity jump source: Poisson arrivals at `intensity` per unit
/// time, i.i.d. sizes from `dist`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpLaw {
    pub intensity: f64,
    pub dist: SizeDist,
}

/// One piecewise-constant volatility segment on [t0, t1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaSegment {
    pub t0: f64,
    pub t1: f64,
    pub value: f64,
}

/// Stopping rule, evaluable from path history only. The scenario horizon
/// acts as a hard cap for every rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoppingRule {
    /// Stop at deterministic time t (or the horizon, whichever is first).
    FixedTime { t: f64 },
    /// Stop at the first grid point where <M^c> >= v.
    QvLevel { v: f64 },
    /// Stop exactly at the first jump of size -1.
    FirstMinusOneJump,
    /// Stop at the first jump time where the running sum of x^2/(1+x)
    /// over all realized jumps reaches c.
    IntegralLevel { c: f64 },
}

impl<'de> Deserialize<'de> for StoppingRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut map = serde_json::Map::deserialize(d)?;
        let kind = map
            .remove("kind")
            .ok_or_else(|| D::Error::missing_field("kind"))?;
        let kind = kind
            .as_str()
            .ok_or_else(|| D::Error::custom("stopping kind must be a string"))?
            .to_owned();
        let rest = serde_json::Value::Object(map);
        macro_rules! params {
            ($t:ty) => {
                serde_json::from_value::<$t>(rest)
                    .map_err(|e| D::Error::custom(format!("stopping `{kind}`: {e}")))?
            };
        }
        Ok(match kind.as_str() {
            "fixed_time" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    t: f64,
                }
                let p = params!(P);
                StoppingRule::FixedTime { t: p.t }
            }
            "qv_level" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    v: f64,
                }
                let p = params!(P);
                StoppingRule::QvLevel { v: p.v }
            }
            "first_minus_one_jump" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {}
                let _ = params!(P);
                StoppingRule::FirstMinusOneJump
            }
            "integral_level" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    c: f64,
                }
                let p = params!(P);
                StoppingRule::IntegralLevel { c: p.c }
            }
            other => {
                return Err(D::Error::custom(format!(
                    "unknown stopping kind `{other}`"
                )))
            }
        })
    }
}

/// Full generative model of M plus the Monte Carlo configuration.
///
/// Serializes to/from the scenario JSON document; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Hard horizon (cap) for every stopping rule.
    pub horizon: f64,
    pub grid_dt: f64,
    pub n_paths: u64,
    pub base_seed: u64,
    /// Piecewise-constant volatility schedule covering [0, horizon].
    pub sigma: Vec<SigmaSegment>,
    pub jumps: Vec<JumpLaw>,
    pub stopping: StoppingRule,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("jump law {law}: distribution has mass below -1")]
    SupportViolation { law: usize },
    #[error("jump law {law}: negative or non-finite intensity {value}")]
    NegativeRate { law: usize, value: f64 },
    #[error("volatility schedule is empty")]
    EmptySchedule,
    #[error("volatility segments must be contiguous, start at 0 and cover [0, horizon]")]
    BrokenSchedule,
    #[error("segment {segment}: sigma {value} is negative or non-finite")]
    NegativeSigma { segment: usize, value: f64 },
    #[error("grid_dt {value} must be positive and finite")]
    BadGrid { value: f64 },
    #[error("grid_dt does not divide the segment boundary at t={boundary}")]
    GridMisaligned { boundary: f64 },
    #[error("horizon {value} must be positive and finite")]
    BadHorizon { value: f64 },
    #[error("n_paths must be >= 1")]
    ZeroPaths,
    #[error("jump law {law}: {what}")]
    BadParams { law: usize, what: String },
    #[error("jump law {law}: degenerate size 0 is not a jump")]
    ZeroJumpSize { law: usize },
    #[error("jump law {law}: mean jump size is not finite")]
    NonIntegrable { law: usize },
    #[error("stopping rule: {what}")]
    BadStopping { what: String },
}

impl ValidationError {
    /// Machine-readable code for reports and exit paths.
    pub fn code(&self) -> &'static str {
        use ValidationError::*;
        match self {
            SupportViolation { .. } => "SUPPORT_VIOLATION",
            NegativeRate { .. } => "NEGATIVE_RATE",
            EmptySchedule => "EMPTY_SCHEDULE",
            BrokenSchedule => "BROKEN_SCHEDULE",
            NegativeSigma { .. } => "NEGATIVE_SIGMA",
            BadGrid { .. } => "BAD_GRID",
            GridMisaligned { .. } => "GRID_MISALIGNED",
            BadHorizon { .. } => "BAD_HORIZON",
            ZeroPaths => "ZERO_PATHS",
            BadParams { .. } => "BAD_PARAMS",
            ZeroJumpSize { .. } => "ZERO_JUMP_SIZE",
            NonIntegrable { .. } => "NON_INTEGRABLE",
            BadStopping { .. } => "BAD_STOPPING",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("law has infinite mean on the requested band")]
    NonIntegrable,
}

impl SizeDist {
    fn validate(&self, law: usize) -> Result<(), ValidationError> {
        let bad = |what: &str| ValidationError::BadParams {
            law,
            what: what.to_owned(),
        };
        match *self {
            SizeDist::Degenerate { x0 } => {
                if !x0.is_finite() {
                    return Err(bad("x0 must be finite"));
                }
                if x0 < -1.0 {
                    return Err(ValidationError::SupportViolation { law });
                }
                if x0 == 0.0 {
                    return Err(ValidationError::ZeroJumpSize { law });
                }
            }
            SizeDist::Uniform { a, b } => {
                if !a.is_finite() || !b.is_finite() || a >= b {
                    return Err(bad("uniform requires finite a < b"));
                }
                if a < -1.0 {
                    return Err(ValidationError::SupportViolation { law });
                }
            }
            SizeDist::ShiftedExponential { shift, rate } => {
                if !rate.is_finite() || rate <= 0.0 {
                    return Err(bad("shifted_exponential requires rate > 0"));
                }
                if !shift.is_finite() {
                    return Err(bad("shift must be finite"));
                }
                if shift < -1.0 {
                    return Err(ValidationError::SupportViolation { law });
                }
            }
            SizeDist::Pareto { x_min, alpha } => {
                if !x_min.is_finite() || x_min <= 0.0 {
                    return Err(bad("pareto requires x_min > 0"));
                }
                if !alpha.is_finite() || alpha <= 0.0 {
                    return Err(bad("pareto requires alpha > 0"));
                }
                if alpha <= 1.0 {
                    return Err(ValidationError::NonIntegrable { law });
                }
            }
            SizeDist::BetaShifted { alpha, beta } => {
                if !alpha.is_finite() || alpha <= 0.0 || !beta.is_finite() || beta <= 0.0 {
                    return Err(bad("beta_shifted requires alpha > 0 and beta > 0"));
                }
            }
        }
        Ok(())
    }
}

/// Checks every scenario invariant; returns the first violation.
pub fn validate(spec: &ScenarioSpec) -> Result<(), ValidationError> {
    if !spec.horizon.is_finite() || spec.horizon <= 0.0 {
        return Err(ValidationError::BadHorizon {
            value: spec.horizon,
        });
    }
    if !spec.grid_dt.is_finite() || spec.grid_dt <= 0.0 {
        return Err(ValidationError::BadGrid {
            value: spec.grid_dt,
        });
    }
    if spec.n_paths < 1 {
        return Err(ValidationError::ZeroPaths);
    }
    if spec.sigma.is_empty() {
        return Err(ValidationError::EmptySchedule);
    }
    let tol = 1e-9 * spec.horizon.max(1.0);
    let mut cursor = 0.0;
    for (i, seg) in spec.sigma.iter().enumerate() {
        if !seg.value.is_finite() || seg.value < 0.0 {
            return Err(ValidationError::NegativeSigma {
                segment: i,
                value: seg.value,
            });
        }
        if (seg.t0 - cursor).abs() > tol || seg.t1 <= seg.t0 {
            return Err(ValidationError::BrokenSchedule);
        }
        cursor = seg.t1;
        if i + 1 < spec.sigma.len() {
            let ratio = seg.t1 / spec.grid_dt;
            if (ratio - ratio.round()).abs() > 1e-6 * ratio.abs().max(1.0) {
                return Err(ValidationError::GridMisaligned { boundary: seg.t1 });
            }
        }
    }
    if (cursor - spec.horizon).abs() > tol {
        return Err(ValidationError::BrokenSchedule);
    }
    for (i, law) in spec.jumps.iter().enumerate() {
        if !law.intensity.is_finite() || law.intensity < 0.0 {
            return Err(ValidationError::NegativeRate {
                law: i,
                value: law.intensity,
            });
        }
        law.dist.validate(i)?;
    }
    match spec.stopping {
        StoppingRule::FixedTime { t } => {
            if !t.is_finite() || t <= 0.0 {
                return Err(ValidationError::BadStopping {
                    what: format!("fixed_time requires t > 0, got {t}"),
                });
            }
        }
        StoppingRule::QvLevel { v } => {
            if !v.is_finite() || v <= 0.0 {
                return Err(ValidationError::BadStopping {
                    what: format!("qv_level requires v > 0, got {v}"),
                });
            }
        }
        StoppingRule::IntegralLevel { c } => {
            if !c.is_finite() || c <= 0.0 {
                return Err(ValidationError::BadStopping {
                    what: format!("integral_level requires c > 0, got {c}"),
                });
            }
        }
        StoppingRule::FirstMinusOneJump => {}
    }
    Ok(())
}

/// E[x * 1_{x in band}] for a valid law. Exact for degenerate, uniform,
/// shifted-exponential, pareto and beta; no quadrature needed.
pub fn jump_mean(law: &JumpLaw, band: BandSel) -> Result<f64, ModelError> {
    let (lo, hi) = band.bounds();
    match law.dist {
        SizeDist::Degenerate { x0 } => {
            let in_band = x0 >= lo && (hi.is_infinite() || x0 < hi) || (x0 == -1.0 && lo == -1.0);
            Ok(if in_band { x0 } else { 0.0 })
        }
        SizeDist::Uniform { a, b } => {
            let l = lo.max(a);
            let h = hi.min(b);
            if h <= l {
                return Ok(0.0);
            }
            Ok((h * h - l * l) / (2.0 * (b - a)))
        }
        SizeDist::ShiftedExponential { shift, rate } => {
            // antiderivative of x*rate*exp(-rate*(x-shift)) is
            // -(x + 1/rate)*exp(-rate*(x-shift))
            let prim = |x: f64| -(x + 1.0 / rate) * (-rate * (x - shift)).exp();
            let l = lo.max(shift);
            if hi.is_finite() {
                if hi <= l {
                    return Ok(0.0);
                }
                Ok(prim(hi) - prim(l))
            } else {
                Ok(-prim(l))
            }
        }
        SizeDist::Pareto { x_min, alpha } => {
            if alpha <= 1.0 {
                return Err(ModelError::NonIntegrable);
            }
            // E[x 1_{x>=c}] = alpha*x_min^alpha/(alpha-1) * c^(1-alpha)
            let tail = |c: f64| {
                let c = c.max(x_min);
                alpha * x_min.powf(alpha) / (alpha - 1.0) * c.powf(1.0 - alpha)
            };
            let l = lo.max(x_min);
            if hi.is_finite() {
                if hi <= l {
                    return Ok(0.0);
                }
                Ok(tail(l) - tail(hi))
            } else {
                Ok(tail(l))
            }
        }
        SizeDist::BetaShifted { alpha, beta } => {
            // support (-1, 0), entirely inside the small band
            let mean = alpha / (alpha + beta) - 1.0;
            Ok(match band {
                BandSel::Big => 0.0,
                BandSel::Small | BandSel::All => mean,
            })
        }
    }
}

/// The divergence-statistic integrand x^2/(1+x), nonnegative on (-1, inf).
pub fn nu_integrand(x: f64) -> f64 {
    x * x / (1.0 + x)
}

/// E[x^2/(1+x) * 1_{x in band}]. Divergent exactly when the law puts the
/// singularity at -1 inside the band (mass at -1, or density not vanishing
/// there).
pub fn characteristic_nu_rate(law: &JumpLaw, band: Band) -> Stat {
    let (lo, hi) = band.bounds();
    match law.dist {
        SizeDist::Degenerate { x0 } => {
            if x0 == -1.0 {
                return if band == Band::Small {
                    Stat::Divergent
                } else {
                    Stat::Finite(0.0)
                };
            }
            let in_band = x0 >= lo && (hi.is_infinite() || x0 < hi);
            Stat::Finite(if in_band { nu_integrand(x0) } else { 0.0 })
        }
        SizeDist::Uniform { a, b } => {
            if a <= -1.0 && band == Band::Small {
                // log-divergence of the 1/(1+x) piece at the left edge
                return Stat::Divergent;
            }
            let l = lo.max(a);
            let h = hi.min(b);
            if h <= l {
                return Stat::Finite(0.0);
            }
            // antiderivative of x^2/(1+x) = x - 1 + 1/(1+x)
            let prim = |x: f64| 0.5 * x * x - x + (1.0 + x).ln();
            Stat::Finite((prim(h) - prim(l)) / (b - a))
        }
        SizeDist::ShiftedExponential { shift, rate } => {
            if shift <= -1.0 && band == Band::Small {
                return Stat::Divergent;
            }
            let l = lo.max(shift);
            let cutoff = shift + 60.0 / rate;
            let h = if hi.is_finite() { hi.min(cutoff) } else { cutoff };
            if h <= l {
                return Stat::Finite(0.0);
            }
            let f = |x: f64| nu_integrand(x) * rate * (-rate * (x - shift)).exp();
            Stat::Finite(adaptive_simpson(&f, l, h, QUAD_TOL))
        }
        SizeDist::Pareto { x_min, alpha } => {
            let l = lo.max(x_min);
            if hi.is_finite() {
                if hi <= l {
                    return Stat::Finite(0.0);
                }
                let f = |x: f64| nu_integrand(x) * alpha * x_min.powf(alpha) * x.powf(-alpha - 1.0);
                Stat::Finite(adaptive_simpson(&f, l, hi, QUAD_TOL))
            } else {
                // x^2/(1+x) = x - 1 + 1/(1+x); first two terms in closed
                // form, the bounded remainder by quadrature with a tail
                // cutoff chosen so the neglected mass is < 1e-14
                let pow = |c: f64, p: f64| c.powf(p);
                let tail_mean = alpha * pow(x_min, alpha) / (alpha - 1.0) * pow(l, 1.0 - alpha);
                let tail_prob = pow(x_min / l, alpha);
                let cutoff = (alpha * pow(x_min, alpha) / ((alpha + 1.0) * 1e-14))
                    .powf(1.0 / (alpha + 1.0))
                    .max(l * 2.0);
                let f = |x: f64| {
                    alpha * pow(x_min, alpha) * x.powf(-alpha - 1.0) / (1.0 + x)
                };
                let recip = adaptive_simpson(&f, l, cutoff, QUAD_TOL);
                Stat::Finite(tail_mean - tail_prob + recip)
            }
        }
        SizeDist::BetaShifted { alpha, beta } => {
            if band == Band::Big {
                return Stat::Finite(0.0);
            }
            // x = y - 1, y ~ Beta(alpha, beta): E[(y-1)^2/y] = E[y] - 2 + E[1/y]
            if alpha <= 1.0 {
                return Stat::Divergent;
            }
            let mean_y = alpha / (alpha + beta);
            let mean_inv_y = (alpha + beta - 1.0) / (alpha - 1.0);
            Stat::Finite(mean_y - 2.0 + mean_inv_y)
        }
    }
}

impl ScenarioSpec {
    /// Deterministic <M^c>_t = integral of sigma^2 over [0, t].
    pub fn qv_c_at(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for seg in &self.sigma {
            if t <= seg.t0 {
                break;
            }
            let upper = t.min(seg.t1);
            acc += seg.value * seg.value * (upper - seg.t0);
        }
        acc
    }

    /// Integral of sigma^2 over [t0, t1].
    pub fn qv_c_between(&self, t0: f64, t1: f64) -> f64 {
        self.qv_c_at(t1) - self.qv_c_at(t0)
    }

    /// Compensator drift rate for the band: sum of intensity * E[x 1_band].
    pub fn drift_rate(&self, band: BandSel) -> Result<f64, ModelError> {
        let mut acc = 0.0;
        for law in &self.jumps {
            acc += law.intensity * jump_mean(law, band)?;
        }
        Ok(acc)
    }

    /// Per-unit-time rate of the nu divergence statistic over the band.
    pub fn nu_stat_rate(&self, band: Band) -> Stat {
        let mut acc = Stat::Finite(0.0);
        for law in &self.jumps {
            acc = acc.add(characteristic_nu_rate(law, band).scale(law.intensity));
        }
        acc
    }

    pub fn total_jump_intensity(&self) -> f64 {
        self.jumps.iter().map(|l| l.intensity).sum()
    }
}
