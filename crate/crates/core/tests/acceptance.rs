//! Acceptance suite. Prints one PASS/FAIL line per criterion (and per
//! sub-check) and exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use metkit::constants::{BOLTZMANN, PLANCK};
use metkit::design::{met_parameters, participation, IcCalibration, JunctionGeometry};
use metkit::loss::{
    fit_spin_boson, retention, retention_temperature, spin_boson_bracket, spin_boson_t1, t1_from_loss, tand_from_t1,
    LossBudget, TemperatureModel, DEFAULT_TAN_DELTA_HBN,
};
use metkit::qubit::{exact_spectrum, invert_spectrum, EnergyPair};
use metkit::resonator::{
    circle_fit, extract, participation_from_freqs, q_term_from_loss, tand_from_q, terminated_frequency, NotchParams,
};
use metkit::synth::{
    gen_chevron, gen_decay, gen_ramsey, gen_s21, gen_temperature_sweep, gen_terminated_pair, ChevronModel, DecayModel,
    LoadSpec, NoiseSpec, PairSpec, RamseyModel,
};
use metkit::tables;
use metkit::timedomain::{fit_chevron, fit_echo, fit_ramsey, fit_t1};

const SEEDS: u64 = 200;
// Criterion 7 draws SEEDS / 2 seeds, each used with plain and negated noise.
const ANTITHETIC_SEEDS: u64 = SEEDS / 2;
const SNR_DB: f64 = 40.0;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("[{}] {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn timed(&mut self, id: &str, elapsed: Duration, limit: Duration) {
        self.line(
            &format!("{id} runtime"),
            elapsed < limit,
            format!("{:.3} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs_f64()),
        );
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let listed = [(1, 3.09), (2, 1.69), (3, 12.20), (4, 15.76)];
    let records = tables::qubits();
    for (device, expected) in listed {
        let rec = records.iter().find(|d| d.device == device).unwrap();
        let (t1, std, _) = rec.t1_for_loss().unwrap();
        let tand = tand_from_t1(t1, std, rec.f01_ghz, rec.p, 5.0e-6).unwrap().value.value * 1e5;
        r.line(
            &format!("1 loss tangent device {device}"),
            (tand - expected).abs() <= 0.02,
            format!("{tand:.4} vs {expected:.2} (x1e-5, tol 0.02)"),
        );
    }
    r.timed("1", start.elapsed(), Duration::from_secs(1));
}

fn criterion_2(r: &mut Report) {
    let start = Instant::now();
    for (device, f01, alpha, listed) in [(1, 4.76, -0.174, 101.0), (2, 5.79, -0.618, 14.0)] {
        let ratio = invert_spectrum(f01, alpha).unwrap().ratio;
        r.line(
            &format!("2 E_J/E_C device {device}"),
            (ratio - listed).abs() <= 1.0,
            format!("{ratio:.2} vs {listed} (tol 1)"),
        );
    }
    let rows = tables::check_spectra(&tables::qubits(), tables::DEFAULT_RATIO_TOLERANCE).unwrap();
    let d3 = rows.iter().find(|row| row.device == 3).unwrap();
    let flagged = !d3.pass && d3.note.as_deref().is_some_and(|n| n.contains("inconsistent"));
    r.line(
        "2 device 3 flagged inconsistent",
        flagged && (d3.computed - 363.0).abs() < 1.0,
        format!("computed {:.1} vs listed {}, flagged = {flagged}", d3.computed, d3.listed),
    );
    r.timed("2", start.elapsed(), Duration::from_secs(1));
}

fn criterion_3(r: &mut Report) {
    let start = Instant::now();
    let calib = IcCalibration::default();
    let anchor = met_parameters(&JunctionGeometry::new(20.0, 17).unwrap(), &calib, 0.0).unwrap();
    r.line(
        "3 anchor f01 at 17 layers",
        (anchor.asymptotic.f01 - 6.0).abs() < 1e-12,
        format!("{:.15} GHz", anchor.asymptotic.f01),
    );
    let alphas: Vec<f64> = (0..=40)
        .map(|i| {
            let area = 10.0 + 0.5 * i as f64;
            met_parameters(&JunctionGeometry::new(area, 17).unwrap(), &calib, 0.0).unwrap().asymptotic.alpha * 1e3
        })
        .collect();
    let lo = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    r.line(
        "3 anharmonicity bracket over 10-30 um^2",
        rel(lo, -300.0) <= 0.05 && rel(hi, -100.0) <= 0.05,
        format!("[{lo:.2}, {hi:.2}] MHz vs [-300, -100] within 5%"),
    );
    r.timed("3", start.elapsed(), Duration::from_secs(1));
}

fn criterion_4(r: &mut Report) {
    let start = Instant::now();
    let t1 = t1_from_loss(6.0, &LossBudget::new(0.01, 1.69e-5, 0.0).unwrap()).unwrap().as_us();
    r.line("4 projected T1", rel(t1, 160.0) <= 0.05, format!("{t1:.2} us vs 160 us within 5%"));
    r.timed("4", start.elapsed(), Duration::from_secs(1));
}

fn criterion_5(r: &mut Report) {
    let start = Instant::now();
    let f01 = 4.76;
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        // h f / 2 kB T from 7 to 40
        let x = 7.0 + 33.0 * i as f64 / 49.0;
        let t = PLANCK * f01 * 1e9 / (2.0 * BOLTZMANN * x);
        worst = worst.max((spin_boson_bracket(f01, t).unwrap() / 2.0 - 1.0).abs());
    }
    r.line("5 zero-temperature limit", worst < 1e-6, format!("max |bracket / 2 - 1| = {worst:.2e} for x > 7"));

    // Scalar oracle: 1 + coth x written with tanh.
    let oracle = |t: f64| {
        let x = PLANCK * f01 * 1e9 / (2.0 * BOLTZMANN * t);
        1.0 / (1.0 + 1.0 / x.tanh())
    };
    let model = TemperatureModel { f01_ghz: f01, q_qubit: 3.3e4 };
    let ratio = spin_boson_t1(0.2, &model).unwrap() / spin_boson_t1(0.015, &model).unwrap();
    let oracle_ratio = oracle(0.2) / oracle(0.015);
    r.line(
        "5 T1(200 mK)/T1(15 mK) at 4.76 GHz",
        (ratio - 0.681).abs() <= 0.001 && (ratio - oracle_ratio).abs() < 1e-12,
        format!("{ratio:.5} (oracle {oracle_ratio:.5}) vs 0.681 +- 0.001"),
    );
    let keep = retention(25.0, 0.4).unwrap();
    let half = retention_temperature(25.0, 0.5).unwrap();
    r.line(
        "5 25 GHz retention",
        keep >= 0.95 && half > 1.6 && half < 1.8,
        format!("{:.2}% at 400 mK, 50% at {half:.3} K", keep * 100.0),
    );
    r.timed("5", start.elapsed(), Duration::from_secs(1));
}

fn template() -> NotchParams {
    NotchParams { fr_hz: 6e9, ql: 5e4, qc_mag: 6e4, phi0: 0.1, tau_s: 40e-9, a: 0.8, alpha: 0.3 }
}

fn pair_spec() -> PairSpec {
    PairSpec {
        load: LoadSpec::Participation(0.16),
        tan_delta: 3.31e-5,
        q_open: 1e5,
        z0_ohm: 50.0,
        f_open_hz: 6e9,
        template: template(),
        span_linewidths: 10.0,
        n_points: 601,
    }
}

fn criterion_6(r: &mut Report) {
    let spec = pair_spec();
    let pair = gen_terminated_pair(&spec, &NoiseSpec::noiseless()).unwrap();
    let open = circle_fit(&pair.open).unwrap();
    let term = circle_fit(&pair.terminated).unwrap();
    let x = extract(&term, &open, spec.z0_ohm).unwrap();
    let (ep, et) = (rel(x.p, 0.16), rel(x.tan_delta, 3.31e-5));
    r.line(
        "6 noiseless round trip",
        ep <= 1e-10 && et <= 1e-10,
        format!("relative error p {ep:.1e}, tan_delta {et:.1e} (tol 1e-10)"),
    );

    let start = Instant::now();
    let hits: Vec<(bool, bool)> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let pair = gen_terminated_pair(&spec, &NoiseSpec::new(SNR_DB, seed)).unwrap();
            let x = circle_fit(&pair.open)
                .and_then(|o| circle_fit(&pair.terminated).and_then(|t| extract(&t, &o, spec.z0_ohm)));
            match x {
                Ok(x) => ((x.p - 0.16).abs() <= x.sigma_p, (x.tan_delta - 3.31e-5).abs() <= x.sigma_tan_delta),
                Err(_) => (false, false),
            }
        })
        .collect();
    let elapsed = start.elapsed();
    let cover_p = hits.iter().filter(|h| h.0).count() as f64 / SEEDS as f64;
    let cover_t = hits.iter().filter(|h| h.1).count() as f64 / SEEDS as f64;
    r.line(
        "6 Monte-Carlo 1-sigma coverage at 40 dB",
        cover_p >= 0.60 && cover_t >= 0.60,
        format!("p {:.1}%, tan_delta {:.1}% over {SEEDS} seeds (>= 60%, target 68 +- 8)", cover_p * 100.0, cover_t * 100.0),
    );
    r.timed("6 Monte-Carlo", elapsed, Duration::from_secs(60));

    let inverse = tand_from_q(50401.0, 1e5, 0.17507).unwrap().value;
    r.line(
        "6 worked point inverse (q_term 50401 -> tan_delta)",
        (inverse * 1e5 * 100.0).round() / 100.0 == 3.31,
        format!("{:.4}e-5 vs 3.31e-5", inverse * 1e5),
    );
    let forward = q_term_from_loss(0.17507, 3.31e-5, 1e5);
    r.line(
        "6 worked point forward (tan_delta -> q_term = 50401)",
        forward.round() == 50401.0,
        format!("{forward:.2} vs 50401"),
    );
}

struct Bias {
    name: &'static str,
    mean_error: f64,
    mean_sigma: f64,
    failures: usize,
}

impl Bias {
    fn from(name: &'static str, truth: f64, samples: &[Option<(f64, f64)>]) -> Self {
        let ok: Vec<(f64, f64)> = samples.iter().flatten().copied().collect();
        let n = ok.len() as f64;
        Self {
            name,
            mean_error: ok.iter().map(|s| s.0 - truth).sum::<f64>() / n,
            mean_sigma: ok.iter().map(|s| s.1).sum::<f64>() / n,
            failures: samples.len() - ok.len(),
        }
    }

    fn report(&self, r: &mut Report) {
        let ratio = self.mean_error.abs() / self.mean_sigma;
        r.line(
            &format!("7 {} bias at 40 dB", self.name),
            ratio < 0.1 && self.failures == 0,
            format!(
                "|bias| = {:.3} sigma over {SEEDS} antithetic realizations ({} failed fits, limit 0.1 sigma)",
                ratio, self.failures
            ),
        );
    }
}

fn delays(n: usize, span_s: f64) -> Vec<f64> {
    (0..n).map(|i| span_s * i as f64 / (n - 1) as f64).collect()
}

fn criterion_7(r: &mut Report) {
    let start = Instant::now();
    let noiseless = NoiseSpec::noiseless();

    let t_decay = delays(101, 6e-6);
    let t1_model = DecayModel { time_us: 1.11, amplitude: 0.9, offset: 0.05 };
    let echo_model = DecayModel { time_us: 1.26, amplitude: 0.45, offset: 0.5 };
    let t_ramsey = delays(201, 3e-6);
    let ramsey_model = RamseyModel { t2_star_us: 0.70, detuning_hz: 2e6, phase: 0.2, amplitude: 0.45, offset: 0.5 };
    let pulses = delays(81, 400e-9);
    let drives: Vec<f64> = (0..41).map(|i| 4.76e9 - 20e6 + i as f64 * 1e6).collect();
    let chevron_model = ChevronModel { rabi_hz: 5e6, f01_hz: 4.76e9, amplitude: 0.95, offset: 0.02 };
    let temps: Vec<f64> = (0..25).map(|i| 0.015 + 0.02 * i as f64).collect();
    let sb_model = TemperatureModel { f01_ghz: 4.76, q_qubit: 3.3e4 };
    let notch = template();
    let span = 10.0 * notch.linewidth_hz();

    // Noiseless residuals.
    let t1 = fit_t1(&gen_decay(&t1_model, &t_decay, &noiseless).unwrap()).unwrap();
    let echo = fit_echo(&gen_decay(&echo_model, &t_decay, &noiseless).unwrap()).unwrap();
    let ramsey = fit_ramsey(&gen_ramsey(&ramsey_model, &t_ramsey, &noiseless).unwrap()).unwrap();
    let chevron = fit_chevron(&gen_chevron(&chevron_model, &pulses, &drives, &noiseless).unwrap()).unwrap();
    let sweep = gen_temperature_sweep(&sb_model, &temps, &noiseless).unwrap();
    let sb = fit_spin_boson(&sweep.temps_k, &sweep.t1_us, None, 4.76).unwrap();
    let sb_rms = (sb.residuals.iter().map(|v| v * v).sum::<f64>() / sb.residuals.len() as f64).sqrt();
    let circle = circle_fit(&gen_s21(&notch, span, 801, &noiseless).unwrap()).unwrap();
    for (name, residual) in [
        ("T1", t1.residual_rms),
        ("echo", echo.residual_rms),
        ("Ramsey", ramsey.residual_rms),
        ("chevron", chevron.residual_rms),
        ("spin-boson", sb_rms),
        ("circle fit", circle.residual_rms),
    ] {
        r.line(&format!("7 {name} noiseless residual"), residual < 1e-9, format!("rms {residual:.2e} (< 1e-9)"));
    }

    let realizations: Vec<NoiseSpec> = (0..ANTITHETIC_SEEDS)
        .flat_map(|seed| [NoiseSpec::new(SNR_DB, seed), NoiseSpec::mirrored(SNR_DB, seed)])
        .collect();
    let runs: Vec<[Option<(f64, f64)>; 8]> = realizations
        .par_iter()
        .map(|&noise| {
            let t1 = gen_decay(&t1_model, &t_decay, &noise).and_then(|t| fit_t1(&t)).ok();
            let echo = gen_decay(&echo_model, &t_decay, &noise).and_then(|t| fit_echo(&t)).ok();
            let ramsey = gen_ramsey(&ramsey_model, &t_ramsey, &noise).and_then(|t| fit_ramsey(&t)).ok();
            let chevron = gen_chevron(&chevron_model, &pulses, &drives, &noise).and_then(|g| fit_chevron(&g)).ok();
            let sb = gen_temperature_sweep(&sb_model, &temps, &noise)
                .and_then(|s| fit_spin_boson(&s.temps_k, &s.t1_us, Some(&s.sigma_us), 4.76))
                .ok();
            let circle = gen_s21(&notch, span, 801, &noise).and_then(|t| circle_fit(&t)).ok();
            [
                t1.map(|f| (f.time_us, f.sigma_time_us)),
                echo.map(|f| (f.time_us, f.sigma_time_us)),
                ramsey.as_ref().map(|f| (f.t2_star_us, f.sigma_t2_star_us)),
                ramsey.as_ref().map(|f| (f.detuning_hz, f.sigma_detuning_hz)),
                chevron.map(|f| (f.rabi_hz, f.sigma_rabi_hz)),
                sb.map(|f| (f.q_qubit, f.sigma)),
                circle.as_ref().map(|f| (f.params.fr_hz, f.errors.fr_hz)),
                circle.as_ref().map(|f| (f.qi, f.errors.qi)),
            ]
        })
        .collect();
    let column = |k: usize| runs.iter().map(|row| row[k]).collect::<Vec<_>>();
    let truths = [
        ("T1", t1_model.time_us),
        ("echo T2E", echo_model.time_us),
        ("Ramsey T2*", ramsey_model.t2_star_us),
        ("Ramsey detuning", ramsey_model.detuning_hz),
        ("chevron Rabi frequency", chevron_model.rabi_hz),
        ("spin-boson Q", sb_model.q_qubit),
        ("circle fit fr", notch.fr_hz),
        ("circle fit Qi", notch.qi()),
    ];
    for (k, (name, truth)) in truths.into_iter().enumerate() {
        Bias::from(name, truth, &column(k)).report(r);
    }
    r.timed("7", start.elapsed(), Duration::from_secs(120));
}

fn criterion_8(r: &mut Report) {
    let start = Instant::now();

    // Participation maximum over the capacitive branch on a dense grid.
    let (mut p_max, mut phi_at_max) = (0.0, 0.0);
    for i in 1..200_000 {
        let ft = 0.5 + 0.5 * i as f64 / 200_000.0;
        let p = participation_from_freqs(ft, 1.0).unwrap();
        if p > p_max {
            p_max = p;
            phi_at_max = 2.0 * PI * ft;
        }
    }
    r.line(
        "8 participation maximum 0.17507 at 1.5 pi",
        (p_max - 0.17507).abs() <= 1e-6 && (phi_at_max - 1.5 * PI).abs() < 1e-3,
        format!("max {p_max:.6} at phi = {phi_at_max:.5} ({:.4} pi)", phi_at_max / PI),
    );

    let caps: Vec<f64> = (0..400).map(|i| 10f64.powf(-2.0 + 8.0 * i as f64 / 399.0)).collect();
    let freqs: Vec<f64> = caps.iter().map(|&c| terminated_frequency(c, 50.0, 6e9).unwrap()).collect();
    let monotone = freqs.windows(2).all(|w| w[1] < w[0]);
    let open = terminated_frequency(0.0, 50.0, 6e9).unwrap();
    let short = terminated_frequency(1e12, 50.0, 6e9).unwrap();
    r.line(
        "8 terminated frequency monotone with correct limits",
        monotone && open == 6e9 && rel(short, 3e9) < 1e-6 && freqs.iter().all(|&f| f > 3e9 && f < 6e9),
        format!("decreasing over 1e-2..1e6 fF; C=0 -> {open:.6e} Hz, C=1e12 fF -> {short:.6e} Hz"),
    );

    let mut worst: f64 = 0.0;
    for i in 0..50 {
        for j in 0..50 {
            let (a, b) = (0.1 + 10.0 * i as f64, 0.1 + 7.0 * j as f64);
            worst = worst.max((participation(a, b).unwrap() + participation(b, a).unwrap() - 1.0).abs());
        }
    }
    r.line("8 participation complement", worst < 1e-15, format!("max |p(a,b) + p(b,a) - 1| = {worst:.1e}"));

    let mut periodic: f64 = 0.0;
    let mut converged: f64 = 0.0;
    for (ej, ec) in [(17.57, 0.174), (8.65, 0.618), (5.0, 1.0)] {
        let e = EnergyPair::new(ej, ec).unwrap();
        for ng in [0.0, 0.13, 0.25, 0.4, 0.5] {
            let base = exact_spectrum(&e, ng, 30).unwrap();
            let shifted = exact_spectrum(&e, ng + 1.0, 30).unwrap();
            let mirrored = exact_spectrum(&e, -ng, 30).unwrap();
            periodic = periodic.max((base.f01 - shifted.f01).abs()).max((base.f01 - mirrored.f01).abs());
            let wide = exact_spectrum(&e, ng, 60).unwrap();
            converged = converged.max((base.f01 - wide.f01).abs());
        }
    }
    r.line(
        "8 exact spectrum ng periodicity and basis convergence",
        periodic < 1e-9 && converged < 1e-9,
        format!("max periodicity/parity error {periodic:.1e} GHz, n_max 30 vs 60 shift {converged:.1e} GHz"),
    );
    r.timed("8", start.elapsed(), Duration::from_secs(10));
}

fn main() {
    let mut report = Report { failures: 0 };
    assert_eq!(DEFAULT_TAN_DELTA_HBN, 5.0e-6);
    criterion_1(&mut report);
    criterion_2(&mut report);
    criterion_3(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report);
    criterion_7(&mut report);
    criterion_8(&mut report);
    println!("acceptance: {} failed check(s)", report.failures);
    if report.failures > 0 {
        std::process::exit(1);
    }
}
