//! Independent Monte Carlo simulator for Parisian stopping times.
//!
//! Paths are generated by Euler discretization on a fixed grid. The age
//! of the running excursion below a and above b is tracked per step;
//! the first time an age reaches its window, the corresponding Parisian
//! time fires. Level crossings that happen strictly inside a grid step
//! are recovered with the Brownian bridge correction: conditionally on
//! the two endpoints standing on the same side at distances d0 and d1,
//! the bridge touches the level with probability exp(-2 d0 d1 / dt).
//!
//! Nothing here shares code with the closed-form engine: this module is
//! the independent check, so it deliberately works from the stochastic
//! differential equation alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DiffusionModel, Recurrence, Sign};

/// Return probability below which a high path of an upward-transient
/// model is declared escaped and its pending lower Parisian time
/// infinite. The truncation bias is of the same order.
const ESCAPE_RETURN_PROB: f64 = 1e-12;

/// Largest exponent for which the bridge probability is worth computing;
/// beyond it the probability is below 4e-18.
const BRIDGE_EXP_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Enables the Brownian bridge crossing correction.
    #[serde(default = "default_true")]
    pub bridge: bool,
}

fn default_true() -> bool {
    true
}

/// Barrier layout shared with the formula side: window u below a,
/// window v above b. The one-barrier case is a == b.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimScenario {
    pub a: f64,
    pub b: f64,
    pub start: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    /// The Parisian time fired inside the horizon.
    Observed { time: f64, position: f64 },
    /// The path escaped; the time is almost surely infinite.
    Infinite,
    /// Still unresolved when the path was stopped.
    Censored,
}

impl Outcome {
    pub fn observed_time(&self) -> Option<f64> {
        match self {
            Outcome::Observed { time, .. } => Some(*time),
            _ => None,
        }
    }
}

/// Order of the two Parisian times; `Unknown` only arises from horizon
/// censoring, never from an escape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriState {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, Copy)]
pub struct ParisianSample {
    pub kappa_minus: Outcome,
    pub kappa_plus: Outcome,
    /// Whether kappa_v^{(b,+)} <= kappa_u^{(a,-)} < infinity.
    pub plus_before_minus: TriState,
    /// Level crossings seen by this path, bridge touches included.
    pub detected_crossings: u64,
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub samples: Vec<ParisianSample>,
    /// Fraction of steps on which the positivity floor was hit
    /// (Bessel-type models only). Above roughly 1e-3 the discretization
    /// bias near the boundary becomes visible.
    pub floor_hit_fraction: f64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-path generator. Separate streams keep the path
/// skeleton identical whether or not bridge uniforms are consumed.
fn stream_rng(seed: u64, path: u64, stream: u64) -> ChaCha8Rng {
    let mut state = seed ^ path.wrapping_mul(0xA24B_AED4_963E_E407) ^ stream.wrapping_mul(0x9FB2_1C65_1E98_DF25);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

struct AgeClock {
    level: f64,
    window: f64,
    /// Age of the running excursion on the tracked side; 0 when the path
    /// is on the other side of the level.
    age: f64,
    resolved: Option<(f64, f64)>,
}

impl AgeClock {
    fn new(level: f64, window: f64) -> Self {
        AgeClock {
            level,
            window,
            age: 0.0,
            resolved: None,
        }
    }

    /// Advances the clock over [t, t + dt]. `on0`/`on1` say whether the
    /// endpoints lie strictly on the tracked side; `touch` is the bridge
    /// verdict when both do. Returns the number of crossings registered.
    fn step(&mut self, t: f64, dt: f64, x0: f64, x1: f64, on0: bool, on1: bool, touch: bool) -> u64 {
        if self.resolved.is_some() {
            return 0;
        }
        let mut crossings = 0;
        if on0 {
            if on1 && touch {
                // The excursion was interrupted mid-step; if the age
                // budget ran out before the touch, the time fired first.
                if self.age + 0.5 * dt >= self.window {
                    self.fire(t, dt, x0, x1);
                } else {
                    self.age = 0.5 * dt;
                    crossings = 2;
                }
            } else if on1 {
                self.age += dt;
                if self.age >= self.window {
                    self.fire(t, dt, x0, x1);
                }
            } else {
                // Direct crossing out of the tracked side: full credit up
                // to the grid point where the clock resets.
                if self.age + dt >= self.window {
                    self.fire(t, dt, x0, x1);
                } else {
                    self.age = 0.0;
                }
                crossings = 1;
            }
        } else if on1 {
            // Entered the tracked side; the excursion is counted from the
            // next grid point.
            self.age = 0.0;
            crossings = 1;
        }
        crossings
    }

    fn fire(&mut self, t: f64, dt: f64, x0: f64, x1: f64) {
        let fire_time = t + (self.window - self.age);
        let frac = ((fire_time - t) / dt).clamp(0.0, 1.0);
        let position = x0 + (x1 - x0) * frac;
        // The recorded position must sit strictly on the tracked side;
        // interpolation across a touch step may land on the wrong one.
        let position = if (position - self.level).abs() < f64::EPSILON || ((position < self.level) != (x0 < self.level)) {
            x0
        } else {
            position
        };
        self.resolved = Some((fire_time, position));
    }
}

fn validate(model: &DiffusionModel, scenario: &SimScenario, config: &SimConfig) -> Result<()> {
    model.check_interior(scenario.a, "a")?;
    model.check_interior(scenario.b, "b")?;
    model.check_interior(scenario.start, "start")?;
    if scenario.a > scenario.b {
        return Err(Error::Domain(format!(
            "need a <= b, got a = {}, b = {}",
            scenario.a, scenario.b
        )));
    }
    if !(scenario.u > 0.0 && scenario.v > 0.0) {
        return Err(Error::Domain(format!(
            "windows must be > 0, got u = {}, v = {}",
            scenario.u, scenario.v
        )));
    }
    if config.n_paths == 0 {
        return Err(Error::Domain("n_paths must be >= 1".into()));
    }
    if !(config.dt > 0.0 && config.dt < scenario.u.min(scenario.v)) {
        return Err(Error::Domain(format!(
            "dt = {} must be positive and well below both windows",
            config.dt
        )));
    }
    if !(config.horizon > scenario.u.max(scenario.v)) {
        return Err(Error::Domain(format!(
            "horizon = {} must exceed both windows",
            config.horizon
        )));
    }
    Ok(())
}

struct PathOutput {
    sample: ParisianSample,
    steps: u64,
    floor_hits: u64,
}

fn bridge_touch<R: Rng>(rng: &mut R, enabled: bool, d0: f64, d1: f64, dt: f64) -> bool {
    if !enabled {
        return false;
    }
    let expo = 2.0 * d0 * d1 / dt;
    if expo > BRIDGE_EXP_CUTOFF {
        // Touch probability below 4e-18; not worth a uniform. The path
        // skeleton lives on its own stream, so skipping the draw keeps
        // the trajectory unchanged.
        return false;
    }
    let uniform: f64 = rng.gen();
    uniform < (-expo).exp()
}

/// Position above which a return to `a` has probability below
/// [`ESCAPE_RETURN_PROB`], for models drifting to the upper end.
/// Bisection on the monotone return probability, computed once per run.
fn escape_threshold(model: &DiffusionModel, a: f64, b: f64) -> Option<f64> {
    if model.recurrence() != Recurrence::TransientToSup {
        return None;
    }
    let returns = |x: f64| model.hit_prob(x, a).unwrap_or(1.0);
    let mut lo = b.max(a) + 1.0;
    let mut hi = lo;
    while returns(hi) >= ESCAPE_RETURN_PROB {
        hi = a + 2.0 * (hi - a);
        if hi - a > 1e6 {
            return None;
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if returns(mid) >= ESCAPE_RETURN_PROB {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

fn run_path(
    model: &DiffusionModel,
    scenario: &SimScenario,
    config: &SimConfig,
    escape_above: Option<f64>,
    path_idx: u64,
) -> PathOutput {
    let mut normals = stream_rng(config.seed, path_idx, 0);
    let mut bridges = stream_rng(config.seed, path_idx, 1);
    let dt = config.dt;
    let sdt = dt.sqrt();
    let floor = dt;

    // Reflected motion is simulated through the free underlying motion.
    let reflected = model.family_kind() == crate::model::FamilyKind::ReflectedBm;
    let bessel_like = model.family_kind() == crate::model::FamilyKind::Bessel3Drift;

    let mut w = scenario.start;
    let mut x = scenario.start;
    let mut minus = AgeClock::new(scenario.a, scenario.u);
    let mut plus = AgeClock::new(scenario.b, scenario.v);
    let mut t = 0.0;
    let mut steps = 0u64;
    let mut floor_hits = 0u64;
    let mut crossings = 0u64;
    let mut kappa_minus = Outcome::Censored;
    let mut kappa_plus = Outcome::Censored;

    while t < config.horizon {
        let z: f64 = normals.sample(StandardNormal);
        let x0 = x;
        if reflected {
            w += sdt * z;
            x = w.abs();
        } else if bessel_like {
            let xe = x.max(floor);
            x += model.drift(xe) * dt + sdt * z;
            if x < floor {
                x = floor;
                floor_hits += 1;
            }
        } else {
            x += model.drift(x) * dt + sdt * z;
        }
        steps += 1;

        // Lower level, excursions below a.
        if minus.resolved.is_none() {
            let on0 = x0 < scenario.a;
            let on1 = x < scenario.a;
            let touch = if on0 && on1 {
                bridge_touch(&mut bridges, config.bridge, scenario.a - x0, scenario.a - x, dt)
            } else {
                false
            };
            crossings += minus.step(t, dt, x0, x, on0, on1, touch);
        }
        // Upper level, excursions above b.
        if plus.resolved.is_none() {
            let on0 = x0 > scenario.b;
            let on1 = x > scenario.b;
            let touch = if on0 && on1 {
                bridge_touch(&mut bridges, config.bridge, x0 - scenario.b, x - scenario.b, dt)
            } else {
                false
            };
            crossings += plus.step(t, dt, x0, x, on0, on1, touch);
        }

        if let Some((time, position)) = plus.resolved {
            kappa_plus = Outcome::Observed { time, position };
        }
        if let Some((time, position)) = minus.resolved {
            kappa_minus = Outcome::Observed { time, position };
            break;
        }
        // Escape cutoff: once the upper time is settled and the path has
        // drifted so high that a return to a has negligible probability,
        // the lower Parisian time is almost surely infinite.
        if let Some(threshold) = escape_above {
            if plus.resolved.is_some() && x > threshold {
                kappa_minus = Outcome::Infinite;
                break;
            }
        }
        t += dt;
    }

    let plus_before_minus = match (&kappa_plus, &kappa_minus) {
        (Outcome::Observed { time: tp, .. }, Outcome::Observed { time: tm, .. }) => {
            if tp <= tm {
                TriState::Yes
            } else {
                TriState::No
            }
        }
        (_, Outcome::Infinite) => TriState::No,
        (Outcome::Censored, Outcome::Observed { .. }) => TriState::No,
        // Upper time already seen, lower one still pending at the
        // horizon: unless the process can drift away upward the lower
        // time is almost surely finite, so the order is decided.
        (Outcome::Observed { .. }, Outcome::Censored) => {
            if model.recurrence() == Recurrence::TransientToSup {
                TriState::Unknown
            } else {
                TriState::Yes
            }
        }
        (Outcome::Censored, Outcome::Censored) => TriState::Unknown,
        (Outcome::Infinite, _) => unreachable!("upper time never declared infinite"),
    };

    PathOutput {
        sample: ParisianSample {
            kappa_minus,
            kappa_plus,
            plus_before_minus,
            detected_crossings: crossings,
        },
        steps,
        floor_hits,
    }
}

/// Simulates `config.n_paths` independent paths. Deterministic for a
/// fixed seed regardless of thread count: every path owns counter-based
/// generators derived from (seed, path index).
pub fn simulate(
    model: &DiffusionModel,
    scenario: &SimScenario,
    config: &SimConfig,
) -> Result<SimReport> {
    validate(model, scenario, config)?;
    let escape_above = escape_threshold(model, scenario.a, scenario.b);
    let outputs: Vec<PathOutput> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|idx| run_path(model, scenario, config, escape_above, idx))
        .collect();
    let total_steps: u64 = outputs.iter().map(|o| o.steps).sum();
    let total_floor: u64 = outputs.iter().map(|o| o.floor_hits).sum();
    Ok(SimReport {
        samples: outputs.into_iter().map(|o| o.sample).collect(),
        floor_hit_fraction: if total_steps > 0 {
            total_floor as f64 / total_steps as f64
        } else {
            0.0
        },
    })
}

/// Path functionals whose expectations have closed-form counterparts.
pub enum Functional<'a> {
    /// P(kappa_v^{(b,+)} <= kappa_u^{(a,-)} < inf).
    OrderProbability,
    /// E[e^{-gamma kappa_minus - lambda kappa_plus} 1{plus first}].
    PairLaplace { gamma: f64, lambda: f64 },
    /// P(kappa_minus <= t); requires t within the simulation horizon.
    KappaCdf { t: f64 },
    /// E[weight(position at the Parisian time)] on the relevant event:
    /// all observed lower times for `Minus`, the plus-first event for
    /// `Plus`. Both match the corresponding meander expectation.
    PositionMean {
        sign: Sign,
        weight: &'a dyn Fn(f64) -> f64,
    },
    /// Sample covariance of e^{-rate kappa_plus} and weight(position at
    /// kappa_minus) on the plus-first event; zero under the independence
    /// property of the two-barrier decomposition.
    IndependenceCovariance {
        rate: f64,
        weight: &'a dyn Fn(f64) -> f64,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct EstimateWithError {
    pub mean: f64,
    pub std_error: f64,
    /// Number of samples entering the mean.
    pub n: usize,
    /// Fraction of all paths excluded because of censoring.
    pub censored_fraction: f64,
}

fn mean_with_error(values: &[f64], censored: usize, total: usize) -> Result<EstimateWithError> {
    if values.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n.max(2) - 1) as f64;
    Ok(EstimateWithError {
        mean,
        std_error: (var / n as f64).sqrt(),
        n,
        censored_fraction: censored as f64 / total.max(1) as f64,
    })
}

/// Turns raw path samples into the estimate of one functional.
pub fn estimate(samples: &[ParisianSample], functional: &Functional<'_>) -> Result<EstimateWithError> {
    let total = samples.len();
    let mut values = Vec::with_capacity(total);
    let mut censored = 0usize;
    match functional {
        Functional::OrderProbability => {
            for s in samples {
                match s.plus_before_minus {
                    TriState::Yes => values.push(1.0),
                    TriState::No => values.push(0.0),
                    TriState::Unknown => censored += 1,
                }
            }
            mean_with_error(&values, censored, total)
        }
        Functional::PairLaplace { gamma, lambda } => {
            if !(*gamma > 0.0 && *lambda > 0.0) {
                return Err(Error::Domain("PairLaplace rates must be > 0".into()));
            }
            for s in samples {
                match (s.plus_before_minus, &s.kappa_minus, &s.kappa_plus) {
                    (
                        TriState::Yes,
                        Outcome::Observed { time: tm, .. },
                        Outcome::Observed { time: tp, .. },
                    ) => values.push((-gamma * tm - lambda * tp).exp()),
                    (TriState::No, _, _) => values.push(0.0),
                    // An unresolved pair at the horizon contributes at
                    // most e^{-(gamma+lambda) horizon}; count it as zero
                    // but report the censoring.
                    (TriState::Unknown, _, _) => {
                        values.push(0.0);
                        censored += 1;
                    }
                    _ => values.push(0.0),
                }
            }
            mean_with_error(&values, censored, total)
        }
        Functional::KappaCdf { t } => {
            for s in samples {
                match s.kappa_minus {
                    Outcome::Observed { time, .. } => {
                        values.push(if time <= *t { 1.0 } else { 0.0 })
                    }
                    Outcome::Infinite => values.push(0.0),
                    // Censoring happens at the horizon, beyond t.
                    Outcome::Censored => {
                        values.push(0.0);
                        censored += 1;
                    }
                }
            }
            mean_with_error(&values, censored, total)
        }
        Functional::PositionMean { sign, weight } => {
            for s in samples {
                match sign {
                    Sign::Minus => {
                        if let Outcome::Observed { position, .. } = s.kappa_minus {
                            values.push(weight(position));
                        } else if s.kappa_minus == Outcome::Censored {
                            censored += 1;
                        }
                    }
                    Sign::Plus => {
                        if s.plus_before_minus == TriState::Yes {
                            if let Outcome::Observed { position, .. } = s.kappa_plus {
                                values.push(weight(position));
                            }
                        } else if s.plus_before_minus == TriState::Unknown {
                            censored += 1;
                        }
                    }
                }
            }
            mean_with_error(&values, censored, total)
        }
        Functional::IndependenceCovariance { rate, weight } => {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for s in samples {
                if s.plus_before_minus == TriState::Yes {
                    if let (
                        Outcome::Observed { time: tp, .. },
                        Outcome::Observed { position, .. },
                    ) = (&s.kappa_plus, &s.kappa_minus)
                    {
                        xs.push((-rate * tp).exp());
                        ys.push(weight(*position));
                    }
                } else if s.plus_before_minus == TriState::Unknown {
                    censored += 1;
                }
            }
            if xs.len() < 2 {
                return Err(Error::EmptySamples);
            }
            let n = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / n;
            let my = ys.iter().sum::<f64>() / n;
            let products: Vec<f64> = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (x - mx) * (y - my))
                .collect();
            let cov = products.iter().sum::<f64>() / (n - 1.0);
            let var = products.iter().map(|p| (p - cov) * (p - cov)).sum::<f64>() / (n - 1.0);
            Ok(EstimateWithError {
                mean: cov,
                std_error: (var / n).sqrt(),
                n: xs.len(),
                censored_fraction: censored as f64 / total.max(1) as f64,
            })
        }
    }
}
