//! Cross-checks between the estimators and the spectral layer, driven only
//! through the public API.

use wegner_core::hamiltonian::sup_potential;
use wegner_core::kernel_field::ModulusMode;
use wegner_core::spectral::{eigensolve, spectral_distance, EigenCount};
use wegner_core::wegner::SamplingSetup;
use wegner_core::{
    assemble, wegner_two, AssemblyOptions, CovarianceKernel, FieldSampler, GridSpec,
    InteractionPotential, SolverOptions, TwoParticleBox, WegnerTwoConfig,
};

fn setup(samples: usize, seed: u64) -> SamplingSetup {
    SamplingSetup {
        kernel: CovarianceKernel::exponential(1.0, 0.5),
        interaction: InteractionPotential::square(0.5, 0.3),
        h: 0.25,
        coupling: 1.0,
        epsilons: vec![0.05, 0.1, 0.3],
        samples,
        seed,
        modulus: ModulusMode::ClosedFormGaussian,
        solver: SolverOptions::default(),
    }
}

fn separated_pair() -> (TwoParticleBox, TwoParticleBox) {
    (
        TwoParticleBox::symmetric(vec![0.0], 1.0).unwrap(),
        TwoParticleBox::symmetric(vec![20.0], 1.0).unwrap(),
    )
}

/// With J covering both spectra, the two-volume event is the union over
/// the levels E' of H' of the one-volume events at E'.
#[test]
fn wide_window_two_volume_matches_one_volume_events() {
    let (bx, bx_prime) = separated_pair();
    let cfg = WegnerTwoConfig {
        bx: bx.clone(),
        bx_prime: bx_prime.clone(),
        j_center: 0.0,
        j_half_width: 1e4,
        setup: setup(100, 4),
    };
    let report = wegner_two(&cfg).unwrap();

    let grid = GridSpec::interior_nodes(&bx.shadow().union(&bx_prime.shadow()), cfg.setup.h).unwrap();
    let sampler = FieldSampler::new(&cfg.setup.kernel, grid.clone()).unwrap();
    let opts = AssemblyOptions::default();
    let mut closest = Vec::new();
    for i in 0..cfg.setup.samples as u64 {
        let v = sampler.sample_stream(cfg.setup.seed, i);
        let a = assemble(&bx, &grid, &cfg.setup.interaction, &v, &opts).unwrap();
        let b = assemble(&bx_prime, &grid, &cfg.setup.interaction, &v, &opts).unwrap();
        let sa = eigensolve(&a, EigenCount::All).unwrap();
        let sb = eigensolve(&b, EigenCount::All).unwrap();
        assert!(sb.eigenvalues().iter().all(|e| e.abs() < 1e4), "window must cover the spectrum");
        let one_volume = sb
            .eigenvalues()
            .iter()
            .map(|&e| sa.distance_to(e))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(one_volume, spectral_distance(&sa, &sb, cfg.window()).unwrap());
        closest.push(one_volume);
    }
    for r in &report.rows {
        let hits = closest.iter().filter(|&&d| d <= r.epsilon).count();
        assert_eq!(hits, r.hits, "eps {}", r.epsilon);
    }
}

/// The field moment entering the right-hand side is stable: two halves of
/// the sample agree within 20%.
#[test]
fn field_moment_is_stable_across_half_samples() {
    let bx = TwoParticleBox::symmetric(vec![0.0], 1.0).unwrap();
    let grid = GridSpec::interior_nodes(&bx.shadow(), 0.25).unwrap();
    let sampler = FieldSampler::new(&CovarianceKernel::exponential(1.0, 0.5), grid.clone()).unwrap();
    let moments: Vec<f64> = (0..400u64)
        .map(|i| {
            let v = sampler.sample_stream(8, i);
            let hd = assemble(&bx, &grid, &InteractionPotential::none(), &v, &AssemblyOptions::default()).unwrap();
            1.0 + sup_potential(&hd).w_bar
        })
        .collect();
    let (first, second) = moments.split_at(200);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (m1, m2) = (mean(first), mean(second));
    assert!(m1.is_finite() && m2.is_finite());
    assert!((m1 - m2).abs() <= 0.2 * m1.max(m2), "{m1} vs {m2}");
}
