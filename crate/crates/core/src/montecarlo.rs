//! Brute-force estimator of `H₁`, `Q₁` and `C₁` by sampling the received
//! signal model directly: Poisson interferer counts per ring, uniform
//! positions in each annulus, unit-mean exponential fading powers.
//!
//! The SIR test is applied per ring against that ring's aggregate
//! interference, mirroring the per-ring structure of the analytic model.
//! Trials are split into fixed-size chunks, each driven by its own ChaCha
//! stream derived from the master seed, so results do not depend on the
//! number of worker threads. Random draws never depend on thresholds, so
//! reusing a seed while varying `γ` or `δ` gives common random numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use rayon::prelude::*;

use crate::analytic::{path_gain, AnalyticError, TypicalNode};
use crate::scenario::{FadingCoupling, Scenario};

const CHUNK: u64 = 1 << 14;

/// Frequency estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub trials: u64,
}

impl McEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let mean = successes as f64 / trials as f64;
        Self {
            mean,
            standard_error: (mean * (1.0 - mean) / trials as f64).sqrt(),
            trials,
        }
    }

    /// `|mean − value|` in units of the standard error; a zero SE with an
    /// exact match counts as zero.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (self.mean - value).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.standard_error
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimate {
    pub h1: McEstimate,
    pub q1: McEstimate,
    pub c1: McEstimate,
}

/// One interferer's contribution to a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    pub ring: usize,
    pub distance: f64,
    /// `|h_k|²`
    pub fading: f64,
}

/// Every random quantity of one trial.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelSample {
    pub interferers: Vec<Interferer>,
    /// `|h₁|²` used by the SNR event.
    pub desired_fading_snr: f64,
    /// `|h₁|²` used by each ring's SIR event (all equal to the SNR draw when shared).
    pub desired_fading_sir: Vec<f64>,
    /// `σ_w²`, mW.
    pub noise_power: f64,
}

/// Per-trial outcome of the three events.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub snr_ok: bool,
    pub sir_ok: Vec<bool>,
}

impl TrialOutcome {
    pub fn captured(&self) -> bool {
        self.sir_ok.iter().all(|&ok| ok)
    }

    pub fn covered(&self) -> bool {
        self.snr_ok && self.captured()
    }
}

/// Signal-to-interference ratio with interference summed in linear power.
pub fn sir(desired_power: f64, interferer_powers: &[f64]) -> f64 {
    let total: f64 = interferer_powers.iter().sum();
    if total == 0.0 {
        f64::INFINITY
    } else {
        desired_power / total
    }
}

struct Sampler {
    ring_bounds: Vec<(f64, f64)>,
    counts: Vec<Option<Poisson<f64>>>,
    fading: FadingCoupling,
    noise_power: f64,
}

impl Sampler {
    fn new(scenario: &Scenario) -> Self {
        let topo = &scenario.topology;
        let rings = topo.num_rings();
        Self {
            ring_bounds: (0..rings).map(|j| topo.ring_bounds(j)).collect(),
            counts: (0..rings)
                .map(|j| {
                    let mean = topo.intensity(j) * topo.area(j);
                    (mean > 0.0).then(|| Poisson::new(mean).expect("finite positive mean"))
                })
                .collect(),
            fading: scenario.montecarlo.fading,
            noise_power: scenario.radio.noise_power_mw(),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, sample: &mut ChannelSample) {
        sample.interferers.clear();
        sample.desired_fading_sir.clear();
        sample.noise_power = self.noise_power;
        sample.desired_fading_snr = Exp1.sample(rng);
        for (ring, count) in self.counts.iter().enumerate() {
            let own: f64 = Exp1.sample(rng);
            sample.desired_fading_sir.push(match self.fading {
                FadingCoupling::Independent => own,
                FadingCoupling::Shared => sample.desired_fading_snr,
            });
            let Some(count) = count else { continue };
            let n = count.sample(rng) as u64;
            let (inner, outer) = self.ring_bounds[ring];
            let (i2, o2) = (inner * inner, outer * outer);
            for _ in 0..n {
                let u: f64 = rng.random();
                let distance = (i2 + u * (o2 - i2)).sqrt();
                let fading = Exp1.sample(rng);
                sample.interferers.push(Interferer {
                    ring,
                    distance,
                    fading,
                });
            }
        }
    }
}

/// Evaluates the SNR event and every ring's SIR event for one sample.
pub fn evaluate_trial(
    sample: &ChannelSample,
    typical: &TypicalNode,
    scenario: &Scenario,
) -> Result<TrialOutcome, AnalyticError> {
    let radio = &scenario.radio;
    let topo = &scenario.topology;
    let p_tx = radio.tx_power_mw();
    let mean_signal = p_tx * path_gain(typical.distance, radio)?;
    let snr = mean_signal * sample.desired_fading_snr / sample.noise_power;
    let snr_ok = snr > scenario.thresholds.snr_floor(typical.sf);
    let mut interference = vec![0.0; topo.num_rings()];
    for k in &sample.interferers {
        interference[k.ring] += p_tx * path_gain(k.distance, radio)? * k.fading;
    }
    let sir_ok = interference
        .iter()
        .enumerate()
        .map(|(j, &i_j)| {
            let delta = scenario.thresholds.sir(typical.sf, topo.ring_sf(j));
            i_j == 0.0 || mean_signal * sample.desired_fading_sir[j] / i_j > delta
        })
        .collect();
    Ok(TrialOutcome { snr_ok, sir_ok })
}

#[derive(Default, Clone, Copy)]
struct Tally {
    snr: u64,
    sir: u64,
    both: u64,
    ring: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            snr: self.snr + o.snr,
            sir: self.sir + o.sir,
            both: self.both + o.both,
            ring: self.ring + o.ring,
        }
    }
}

fn run_chunks(
    typical: &TypicalNode,
    scenario: &Scenario,
    trials: u64,
    seed: u64,
    ring: Option<usize>,
) -> Result<Tally, AnalyticError> {
    assert!(trials >= 1, "at least one trial");
    // validates the distance once up front
    path_gain(typical.distance, &scenario.radio)?;
    let sampler = Sampler::new(scenario);
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = CHUNK.min(trials - c * CHUNK);
            let mut sample = ChannelSample::default();
            let mut tally = Tally::default();
            for _ in 0..n {
                sampler.draw(&mut rng, &mut sample);
                let out = evaluate_trial(&sample, typical, scenario)?;
                let captured = out.captured();
                tally.snr += u64::from(out.snr_ok);
                tally.sir += u64::from(captured);
                tally.both += u64::from(out.snr_ok && captured);
                if let Some(j) = ring {
                    tally.ring += u64::from(out.sir_ok[j]);
                }
            }
            Ok(tally)
        })
        .try_reduce(Tally::default, |a, b| Ok(a + b))
}

/// Monte Carlo estimates of `H₁`, `Q₁`, `C₁` for `typical`.
pub fn estimate_coverage(
    typical: &TypicalNode,
    scenario: &Scenario,
    trials: u64,
    seed: u64,
) -> Result<CoverageEstimate, AnalyticError> {
    let t = run_chunks(typical, scenario, trials, seed, None)?;
    Ok(CoverageEstimate {
        h1: McEstimate::from_counts(t.snr, trials),
        q1: McEstimate::from_counts(t.sir, trials),
        c1: McEstimate::from_counts(t.both, trials),
    })
}

/// Monte Carlo estimate of a single ring's `P_SIRj`.
pub fn estimate_sir_ring(
    typical: &TypicalNode,
    ring: usize,
    scenario: &Scenario,
    trials: u64,
    seed: u64,
) -> Result<McEstimate, AnalyticError> {
    assert!(ring < scenario.topology.num_rings(), "ring index out of range");
    let t = run_chunks(typical, scenario, trials, seed, Some(ring))?;
    Ok(McEstimate::from_counts(t.ring, trials))
}

/// Draws one channel sample (exposed for inspection and tests).
pub fn draw_channel_sample<R: Rng>(scenario: &Scenario, rng: &mut R) -> ChannelSample {
    let mut sample = ChannelSample::default();
    Sampler::new(scenario).draw(rng, &mut sample);
    sample
}
