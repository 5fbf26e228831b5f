//! Path generation: realizations of M = M^c + M^1 + M^2 from a scenario.
//!
//! Jumps are stored exactly at their event times; only the continuous part
//! lives on the grid. Every path is a deterministic function of
//! (base_seed, path_index), independent of thread schedule.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution};
use thiserror::Error;

use crate::model::{Band, BandSel, ScenarioSpec, SizeDist, StoppingRule};

pub const DEFAULT_MAX_GRID_STEPS: u64 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("grid would need {steps} steps, more than the limit {limit}")]
    GridOverflow { steps: u64, limit: u64 },
}

/// One atom of the jump measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
    pub band: Band,
}

/// Which stopping rule actually ended the path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCause {
    FixedTime,
    QvLevel,
    MinusOneJump,
    IntegralLevel,
    /// The hard horizon hit before the rule fired.
    Cap,
}

impl std::fmt::Display for StopCause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopCause::FixedTime => "fixed_time",
            StopCause::QvLevel => "qv_level",
            StopCause::MinusOneJump => "minus_one_jump",
            StopCause::IntegralLevel => "integral_level",
            StopCause::Cap => "cap",
        };
        write!(f, "{s}")
    }
}

/// One simulated realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    /// Strictly increasing times from 0 to t_stop.
    pub grid: Vec<f64>,
    /// M^c at grid points.
    pub mc_values: Vec<f64>,
    /// Running <M^c> at grid points (deterministic).
    pub qv_c: Vec<f64>,
    /// Time-sorted jump events, all at times <= t_stop.
    pub jumps: Vec<JumpEvent>,
    /// Cumulative small-band compensator drift at grid points.
    pub drift_small: Vec<f64>,
    /// Cumulative big-band compensator drift at grid points.
    pub drift_big: Vec<f64>,
    pub t_stop: f64,
    pub stopped_by: StopCause,
    /// True when the rule never fired and the horizon cut the path.
    pub censored: bool,
    /// Small-band drift per unit time (sum of intensity * E[x 1_small]).
    pub drift_rate_small: f64,
    /// Big-band drift per unit time.
    pub drift_rate_big: f64,
}

/// Martingale component selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Mc,
    M1,
    M2,
    Md,
    M,
}

impl Which {
    /// Whether the component contains the continuous part.
    pub fn has_continuous(self) -> bool {
        matches!(self, Which::Mc | Which::M)
    }

    /// Which jump bands feed the component.
    pub fn accepts(self, band: Band) -> bool {
        match self {
            Which::Mc => false,
            Which::M1 => band == Band::Small,
            Which::M2 => band == Band::Big,
            Which::Md | Which::M => true,
        }
    }
}

// splitmix64; stable across platforms.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Stable per-path RNG: hash (base_seed, path_index) into a ChaCha12 seed.
pub fn path_rng(base_seed: u64, path_index: u64) -> ChaCha12Rng {
    let mut state = base_seed ^ path_index.wrapping_mul(0xd1b54a32d192ed03);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

fn sample_exp(rng: &mut ChaCha12Rng, rate: f64) -> f64 {
    // inverse CDF on (0, 1]; avoids ln(0)
    let u: f64 = 1.0 - rng.gen::<f64>();
    -u.ln() / rate
}

fn sample_size(rng: &mut ChaCha12Rng, dist: &SizeDist) -> f64 {
    loop {
        let x = match *dist {
            SizeDist::Degenerate { x0 } => return x0,
            SizeDist::Uniform { a, b } => a + (b - a) * rng.gen::<f64>(),
            SizeDist::ShiftedExponential { shift, rate } => shift + sample_exp(rng, rate),
            SizeDist::Pareto { x_min, alpha } => {
                let u: f64 = 1.0 - rng.gen::<f64>();
                x_min * u.powf(-1.0 / alpha)
            }
            SizeDist::BetaShifted { alpha, beta } => {
                let y = Beta::new(alpha, beta).expect("validated params").sample(rng);
                y - 1.0
            }
        };
        // zero-size samples are not jumps; exact -1 from a continuous law is
        // a probability-zero artifact of finite precision
        if x != 0.0 && x != -1.0 {
            return x;
        }
    }
}

fn draw_jumps(spec: &ScenarioSpec, rng: &mut ChaCha12Rng) -> Vec<JumpEvent> {
    let mut events = Vec::new();
    for law in &spec.jumps {
        if law.intensity == 0.0 {
            continue;
        }
        let mut t = 0.0;
        loop {
            t += sample_exp(rng, law.intensity);
            if t > spec.horizon {
                break;
            }
            let size = sample_size(rng, &law.dist);
            events.push(JumpEvent {
                time: t,
                size,
                band: Band::of(size),
            });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    events
}

/// Applies the stopping rule; returns (t_stop, cause, censored).
fn apply_stopping(spec: &ScenarioSpec, jumps: &[JumpEvent]) -> (f64, StopCause, bool) {
    match spec.stopping {
        StoppingRule::FixedTime { t } => {
            if t <= spec.horizon {
                (t, StopCause::FixedTime, false)
            } else {
                (spec.horizon, StopCause::Cap, true)
            }
        }
        StoppingRule::QvLevel { v } => {
            // <M^c> is deterministic; check at grid points
            let mut k = 0u64;
            loop {
                let t = (k as f64) * spec.grid_dt;
                if t >= spec.horizon {
                    return (spec.horizon, StopCause::Cap, true);
                }
                if spec.qv_c_at(t) >= v {
                    return (t, StopCause::QvLevel, false);
                }
                k += 1;
            }
        }
        StoppingRule::FirstMinusOneJump => {
            for j in jumps {
                if j.size == -1.0 {
                    return (j.time, StopCause::MinusOneJump, false);
                }
            }
            (spec.horizon, StopCause::Cap, true)
        }
        StoppingRule::IntegralLevel { c } => {
            let mut acc = 0.0;
            for j in jumps {
                if j.size == -1.0 {
                    return (j.time, StopCause::IntegralLevel, false);
                }
                acc += crate::model::nu_integrand(j.size);
                if acc >= c {
                    return (j.time, StopCause::IntegralLevel, false);
                }
            }
            (spec.horizon, StopCause::Cap, true)
        }
    }
}

/// Simulates one path with the default grid-size limit.
pub fn simulate_path(spec: &ScenarioSpec, path_index: u64) -> Result<SamplePath, SimError> {
    simulate_path_with_limit(spec, path_index, DEFAULT_MAX_GRID_STEPS)
}

pub fn simulate_path_with_limit(
    spec: &ScenarioSpec,
    path_index: u64,
    max_steps: u64,
) -> Result<SamplePath, SimError> {
    let steps = (spec.horizon / spec.grid_dt).ceil() as u64;
    if steps > max_steps {
        return Err(SimError::GridOverflow {
            steps,
            limit: max_steps,
        });
    }
    let mut rng = path_rng(spec.base_seed, path_index);

    // Jumps and the stopping time first: none of the rules depends on the
    // Brownian part, so the truncated grid is known before drawing it.
    let mut jumps = draw_jumps(spec, &mut rng);
    let (t_stop, stopped_by, censored) = apply_stopping(spec, &jumps);
    jumps.retain(|j| j.time <= t_stop);

    // Grid: 0, dt, 2dt, ..., then t_stop as the final point.
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let t = (k as f64) * spec.grid_dt;
        if t >= t_stop - 1e-12 * spec.grid_dt {
            break;
        }
        grid.push(t);
        k += 1;
    }
    grid.push(t_stop);

    let n = grid.len();
    let mut mc_values = Vec::with_capacity(n);
    let mut qv_c = Vec::with_capacity(n);
    let mut drift_small = Vec::with_capacity(n);
    let mut drift_big = Vec::with_capacity(n);

    let rate_small = spec
        .drift_rate(BandSel::Small)
        .expect("validated spec has finite band means");
    let rate_big = spec
        .drift_rate(BandSel::Big)
        .expect("validated spec has finite band means");

    let mut mc = 0.0;
    for i in 0..n {
        if i > 0 {
            let var = spec.qv_c_between(grid[i - 1], grid[i]);
            if var > 0.0 {
                let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
                mc += var.sqrt() * z;
            }
        }
        mc_values.push(mc);
        qv_c.push(spec.qv_c_at(grid[i]));
        drift_small.push(rate_small * grid[i]);
        drift_big.push(rate_big * grid[i]);
    }

    Ok(SamplePath {
        grid,
        mc_values,
        qv_c,
        jumps,
        drift_small,
        drift_big,
        t_stop,
        stopped_by,
        censored,
        drift_rate_small: rate_small,
        drift_rate_big: rate_big,
    })
}

impl SamplePath {
    /// Index of the last grid point <= t.
    fn grid_index_at(&self, t: f64) -> usize {
        match self.grid.binary_search_by(|g| g.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    /// M^c at time t (constant between grid points).
    pub fn mc_at(&self, t: f64) -> f64 {
        self.mc_values[self.grid_index_at(t)]
    }

    /// <M^c> at time t, exact: piecewise linear between grid points because
    /// segment boundaries are grid-aligned.
    pub fn qv_c_at(&self, t: f64) -> f64 {
        let i = self.grid_index_at(t);
        if i + 1 >= self.grid.len() || t <= self.grid[i] {
            return self.qv_c[i];
        }
        let (t0, t1) = (self.grid[i], self.grid[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.qv_c[i] + w * (self.qv_c[i + 1] - self.qv_c[i])
    }

    /// Jumps of the selected component up to time t (strict excludes t).
    pub fn jumps_of(&self, which: Which, t: f64, strict: bool) -> impl Iterator<Item = &JumpEvent> {
        self.jumps.iter().filter(move |j| {
            which.accepts(j.band) && if strict { j.time < t } else { j.time <= t }
        })
    }

    /// Compensator drift of the selected component at time t.
    pub fn drift_of(&self, which: Which, t: f64) -> f64 {
        match which {
            Which::Mc => 0.0,
            Which::M1 => self.drift_rate_small * t,
            Which::M2 => self.drift_rate_big * t,
            Which::Md | Which::M => (self.drift_rate_small + self.drift_rate_big) * t,
        }
    }

    /// Component value at time t <= t_stop.
    pub fn component_at(&self, which: Which, t: f64) -> f64 {
        self.component_inner(which, t, false)
    }

    /// Left limit of the component at time t.
    pub fn component_left(&self, which: Which, t: f64) -> f64 {
        self.component_inner(which, t, true)
    }

    fn component_inner(&self, which: Which, t: f64, strict: bool) -> f64 {
        let cont = if which.has_continuous() {
            self.mc_at(t)
        } else {
            0.0
        };
        let jump_sum: f64 = self.jumps_of(which, t, strict).map(|j| j.size).sum();
        cont + jump_sum - self.drift_of(which, t)
    }

    /// Realized variance of the continuous part over the grid.
    pub fn empirical_qv(&self) -> f64 {
        self.mc_values
            .windows(2)
            .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
            .sum()
    }

    pub fn has_minus_one_jump(&self) -> bool {
        self.jumps.iter().any(|j| j.size == -1.0)
    }
}
