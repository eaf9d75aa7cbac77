//! Seeded forward-model generators for every fitter in the crate.
//!
//! Noise is additive Gaussian with standard deviation
//! `reference * 10^(-snr_db / 20)`, where the reference is the off-resonant
//! amplitude for S21 and the signal amplitude for time-domain traces. Complex
//! noise splits the variance equally between quadratures. An infinite SNR
//! never touches the random stream, so it is bit-identical to the noiseless
//! model.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::loss::{spin_boson_t1, TemperatureModel};
use crate::resonator::{max_participation, participation_from_freqs, q_term_from_loss, terminated_frequency, NotchParams, S21Trace};
use crate::timedomain::{rabi_population, ChevronGrid, DecayTrace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
    /// Negate every draw; pairs with the unmirrored noise of the same seed for
    /// antithetic Monte-Carlo.
    pub mirrored: bool,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self { snr_db, seed, mirrored: false }
    }

    pub fn mirrored(snr_db: f64, seed: u64) -> Self {
        Self { snr_db, seed, mirrored: true }
    }

    pub fn noiseless() -> Self {
        Self { snr_db: f64::INFINITY, seed: 0, mirrored: false }
    }

    pub fn is_noiseless(&self) -> bool {
        self.snr_db == f64::INFINITY
    }

    pub fn sigma(&self, reference: f64) -> f64 {
        if self.is_noiseless() {
            0.0
        } else {
            reference.abs() * 10f64.powf(-self.snr_db / 20.0)
        }
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

struct Noise {
    sigma: f64,
    rng: Option<ChaCha8Rng>,
}

impl Noise {
    fn new(spec: &NoiseSpec, reference: f64) -> Self {
        let rng = (!spec.is_noiseless()).then(|| spec.rng());
        let sigma = spec.sigma(reference);
        Self { sigma: if spec.mirrored { -sigma } else { sigma }, rng }
    }

    fn real(&mut self, v: f64) -> f64 {
        match &mut self.rng {
            Some(rng) => v + self.sigma * rng.sample::<f64, _>(StandardNormal),
            None => v,
        }
    }

    fn complex(&mut self, v: Complex64) -> Complex64 {
        match &mut self.rng {
            Some(rng) => {
                let s = self.sigma / 2f64.sqrt();
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                v + Complex64::new(s * re, s * im)
            }
            None => v,
        }
    }
}

fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect()
}

/// Notch S21 on `n_points` frequencies spanning `span_hz` centred on fr.
pub fn gen_s21(params: &NotchParams, span_hz: f64, n_points: usize, noise: &NoiseSpec) -> Result<S21Trace> {
    if !(span_hz > 0.0) || n_points < 2 {
        return Err(Error::Domain("S21 generation needs a positive span and >= 2 points".into()));
    }
    let freqs = linspace(params.fr_hz - span_hz / 2.0, params.fr_hz + span_hz / 2.0, n_points);
    let mut n = Noise::new(noise, params.a);
    let values = freqs.iter().map(|&f| n.complex(params.s21(f))).collect();
    S21Trace::new(freqs, values)
}

/// A exp(-t/T) + B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayModel {
    pub time_us: f64,
    pub amplitude: f64,
    pub offset: f64,
}

impl DecayModel {
    pub fn eval(&self, t_s: f64) -> f64 {
        self.amplitude * (-t_s * 1e6 / self.time_us).exp() + self.offset
    }
}

pub fn gen_decay(model: &DecayModel, delays_s: &[f64], noise: &NoiseSpec) -> Result<DecayTrace> {
    let mut n = Noise::new(noise, model.amplitude);
    let pops = delays_s.iter().map(|&t| n.real(model.eval(t))).collect();
    DecayTrace::new(delays_s.to_vec(), pops)
}

/// A exp(-t/T2*) cos(2 pi df t + phase) + B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseyModel {
    pub t2_star_us: f64,
    pub detuning_hz: f64,
    pub phase: f64,
    pub amplitude: f64,
    pub offset: f64,
}

impl RamseyModel {
    pub fn eval(&self, t_s: f64) -> f64 {
        self.amplitude * (-t_s * 1e6 / self.t2_star_us).exp() * (2.0 * PI * self.detuning_hz * t_s + self.phase).cos()
            + self.offset
    }
}

pub fn gen_ramsey(model: &RamseyModel, delays_s: &[f64], noise: &NoiseSpec) -> Result<DecayTrace> {
    let mut n = Noise::new(noise, model.amplitude);
    let pops = delays_s.iter().map(|&t| n.real(model.eval(t))).collect();
    DecayTrace::new(delays_s.to_vec(), pops)
}

/// B + A * Rabi formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChevronModel {
    pub rabi_hz: f64,
    pub f01_hz: f64,
    pub amplitude: f64,
    pub offset: f64,
}

pub fn gen_chevron(
    model: &ChevronModel,
    pulse_lengths_s: &[f64],
    drive_freqs_hz: &[f64],
    noise: &NoiseSpec,
) -> Result<ChevronGrid> {
    let mut n = Noise::new(noise, model.amplitude);
    let pops = drive_freqs_hz
        .iter()
        .map(|&f| {
            pulse_lengths_s
                .iter()
                .map(|&t| n.real(model.offset + model.amplitude * rabi_population(model.rabi_hz, f - model.f01_hz, t)))
                .collect()
        })
        .collect();
    ChevronGrid::new(pulse_lengths_s.to_vec(), drive_freqs_hz.to_vec(), pops)
}

/// T1 versus temperature with per-point relative scatter.
#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureSweep {
    pub temps_k: Vec<f64>,
    pub t1_us: Vec<f64>,
    /// Per-point one-sigma error used for the noise draw (zero if noiseless).
    pub sigma_us: Vec<f64>,
}

/// Spin-boson T1(T); the SNR sets the relative error of each point.
pub fn gen_temperature_sweep(model: &TemperatureModel, temps_k: &[f64], noise: &NoiseSpec) -> Result<TemperatureSweep> {
    let mut n = Noise::new(noise, 1.0);
    let mut t1_us = Vec::with_capacity(temps_k.len());
    let mut sigma_us = Vec::with_capacity(temps_k.len());
    for &t in temps_k {
        let clean = spin_boson_t1(t, model)?;
        let rel = n.real(0.0);
        t1_us.push(clean * (1.0 + rel));
        sigma_us.push(clean * n.sigma.abs());
    }
    Ok(TemperatureSweep { temps_k: temps_k.to_vec(), t1_us, sigma_us })
}

/// Normal draws standing in for repeated lifetime measurements.
pub fn gen_lifetime_samples(mean: f64, std_dev: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| mean + std_dev * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// How the termination of a generated pair is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadSpec {
    /// Target participation; the solution nearer f_open is used.
    Participation(f64),
    CapacitanceFf(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSpec {
    pub load: LoadSpec,
    pub tan_delta: f64,
    pub q_open: f64,
    pub z0_ohm: f64,
    pub f_open_hz: f64,
    /// Coupling and environment shared by both traces; its fr and ql are ignored.
    pub template: NotchParams,
    /// Span of each trace in its own linewidths.
    pub span_linewidths: f64,
    pub n_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminatedPair {
    pub open: S21Trace,
    pub terminated: S21Trace,
    pub f_term_hz: f64,
    pub q_term: f64,
    pub p: f64,
    pub open_params: NotchParams,
    pub terminated_params: NotchParams,
}

/// Phase phi in [phi_max, 2 pi] where the participation equals `p`.
fn phi_for_participation(p: f64) -> Result<f64> {
    let (phi_max, p_max) = max_participation();
    if !(0.0..=p_max).contains(&p) {
        return Err(Error::Branch(format!(
            "participation {p} is not reachable with a capacitive load (maximum {p_max:.6})"
        )));
    }
    if p == 0.0 {
        return Ok(2.0 * PI);
    }
    let part = |phi: f64| {
        let s = phi.sin().abs();
        s / (phi + s)
    };
    let (mut lo, mut hi) = (phi_max, 2.0 * PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if part(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Open reference and capacitively terminated traces from one set of inputs.
pub fn gen_terminated_pair(spec: &PairSpec, noise: &NoiseSpec) -> Result<TerminatedPair> {
    if !(spec.q_open > 0.0) || !(spec.tan_delta >= 0.0) {
        return Err(Error::Domain("need q_open > 0 and tan_delta >= 0".into()));
    }
    let (f_term, p) = match spec.load {
        LoadSpec::Participation(p) => {
            let phi = phi_for_participation(p)?;
            let f_term = if p == 0.0 { spec.f_open_hz } else { phi * spec.f_open_hz / (2.0 * PI) };
            (f_term, p)
        }
        LoadSpec::CapacitanceFf(c) => {
            let f_term = terminated_frequency(c, spec.z0_ohm, spec.f_open_hz)?;
            (f_term, participation_from_freqs(f_term, spec.f_open_hz)?)
        }
    };
    let q_term = q_term_from_loss(p, spec.tan_delta, spec.q_open);
    let t = &spec.template;
    let build = |fr: f64, qi: f64| NotchParams { fr_hz: fr, ql: NotchParams::loaded_q(qi, t.qc_mag, t.phi0), ..*t };
    let open_params = build(spec.f_open_hz, spec.q_open);
    let terminated_params = build(f_term, q_term);
    let open = gen_s21(&open_params, spec.span_linewidths * open_params.linewidth_hz(), spec.n_points, noise)?;
    let second = NoiseSpec { seed: noise.seed.wrapping_add(0x9E37_79B9_7F4A_7C15), ..*noise };
    let terminated =
        gen_s21(&terminated_params, spec.span_linewidths * terminated_params.linewidth_hz(), spec.n_points, &second)?;
    Ok(TerminatedPair { open, terminated, f_term_hz: f_term, q_term, p, open_params, terminated_params })
}
