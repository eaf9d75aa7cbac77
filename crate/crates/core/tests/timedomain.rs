use metkit::synth::{gen_chevron, gen_decay, gen_lifetime_samples, gen_ramsey, ChevronModel, DecayModel, NoiseSpec, RamseyModel};
use metkit::timedomain::{distribution_stats, fit_chevron, fit_echo, fit_ramsey, fit_t1, FitMethod};

fn delays(n: usize, span_s: f64) -> Vec<f64> {
    (0..n).map(|i| span_s * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn device1_scale_decays() {
    let t = delays(101, 6e-6);
    for seed in 0..10 {
        let noise = NoiseSpec::new(30.0, seed);
        let t1 = fit_t1(&gen_decay(&DecayModel { time_us: 1.11, amplitude: 0.9, offset: 0.05 }, &t, &noise).unwrap())
            .unwrap();
        assert!((t1.time_us - 1.11).abs() < 4.0 * t1.sigma_time_us, "{t1:?}");
        let echo = fit_echo(&gen_decay(&DecayModel { time_us: 1.26, amplitude: 0.45, offset: 0.5 }, &t, &noise).unwrap())
            .unwrap();
        assert!((echo.time_us - 1.26).abs() < 4.0 * echo.sigma_time_us, "{echo:?}");
    }
}

#[test]
fn ramsey_recovers_detuning_within_a_percent() {
    let model = RamseyModel { t2_star_us: 0.70, detuning_hz: 2e6, phase: 0.0, amplitude: 0.45, offset: 0.5 };
    let t = delays(201, 3e-6);
    for seed in 0..10 {
        let fit = fit_ramsey(&gen_ramsey(&model, &t, &NoiseSpec::new(40.0, seed)).unwrap()).unwrap();
        assert!(fit.oscillating);
        assert!((fit.detuning_hz / 2e6 - 1.0).abs() < 0.01);
        assert!((fit.t2_star_us / 0.70 - 1.0).abs() < 0.05);
    }
}

#[test]
fn chevron_pi_length() {
    let model = ChevronModel { rabi_hz: 5e6, f01_hz: 4.76e9, amplitude: 1.0, offset: 0.0 };
    let lengths = delays(61, 300e-9);
    let freqs: Vec<f64> = (0..31).map(|i| 4.76e9 - 15e6 + i as f64 * 1e6).collect();
    let fit = fit_chevron(&gen_chevron(&model, &lengths, &freqs, &NoiseSpec::new(30.0, 4)).unwrap()).unwrap();
    assert!((fit.pi_length_s / 100e-9 - 1.0).abs() < 0.01, "{fit:?}");
    assert!((fit.f01_hz - 4.76e9).abs() < 0.1e6);
}

#[test]
fn lifetime_distribution_of_device1_draws() {
    for seed in 0..5 {
        let samples = gen_lifetime_samples(1.11, 0.12, 100, seed);
        let d = distribution_stats(&samples).unwrap();
        assert_eq!(d.method, FitMethod::Gaussian);
        assert!((d.mean - 1.11).abs() < 0.03, "seed {seed}: {d:?}");
        assert!((d.std_dev - 0.12).abs() < 0.03, "seed {seed}: {d:?}");
        assert_eq!(d.best, samples.iter().cloned().fold(f64::MIN, f64::max));
    }
}

#[test]
fn distribution_error_shrinks_with_sample_count() {
    // Mean absolute error of the sample mean over 40 seeds at N and 16 N.
    let err = |n: usize| {
        (0..40u64)
            .map(|s| (distribution_stats(&gen_lifetime_samples(1.11, 0.12, n, 1000 + s)).unwrap().sample_mean - 1.11).abs())
            .sum::<f64>()
            / 40.0
    };
    let ratio = err(25) / err(400);
    assert!(ratio > 2.5 && ratio < 6.5, "{ratio}");
}
