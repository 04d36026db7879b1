use std::f64::consts::PI;

use approx::assert_relative_eq;
use mrqm::matching::{
    bandwidth, impedance_kappa, kappa_lorentzian, kappa_rectangular, solve_match, MatchConditions,
};
use mrqm::model::DEFAULT_DETUNING_CAP;
use mrqm::spectral::{
    cavity_transfer, form_factor, form_factor_narrowband, mode_response, reflection,
};
use mrqm::{
    derive_params, AtomSampling, CombVariant, FrequencyGrid, Pulse, SpectralResponse,
    Susceptibility, SystemParams,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn unit_comb(resonators: usize, delta_in: f64, gamma_sigma: f64) -> SystemParams {
    let mut p = SystemParams::comb(resonators, delta_in);
    p.force_chi_one = true;
    p.with_total_linewidth(gamma_sigma).unwrap()
}

fn matched(p: &SystemParams, variant: CombVariant) -> SystemParams {
    solve_match(p, variant, MatchConditions::BOTH)
        .unwrap()
        .apply(p)
}

/// Truncated Cauchy distribution function on `[-cap w, cap w]`.
fn truncated_lorentzian_cdf(x: f64, w: f64, cap: f64) -> f64 {
    ((x / w).atan() + cap.atan()) / (2.0 * cap.atan())
}

#[test]
fn quantile_nodes_follow_the_lorentzian() {
    let width = 3.0;
    let s = AtomSampling::lorentzian(1, 2001, width, DEFAULT_DETUNING_CAP).unwrap();
    let nodes = &s.detunings[0];
    let n = nodes.len() as f64;
    let mut ks: f64 = 0.0;
    for (k, &x) in nodes.iter().enumerate() {
        let cdf = truncated_lorentzian_cdf(x, width, DEFAULT_DETUNING_CAP);
        ks = ks
            .max((cdf - k as f64 / n).abs())
            .max((cdf - (k + 1) as f64 / n).abs());
    }
    assert!(ks < 0.01, "KS distance {ks}");
}

#[test]
fn derivation_is_bitwise_repeatable() {
    let p = unit_comb(7, 3.3, 1.7);
    let a = derive_params(&p).unwrap();
    let b = derive_params(&p.clone()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn pulling_vanishes_for_a_wide_line() {
    let mut last = f64::INFINITY;
    for width in [1e2, 1e3, 1e4, 1e5, 1e6] {
        let mut p = SystemParams::comb(4, 1.0);
        p.delta_in_atomic = width;
        let dp = derive_params(&p.with_absorption_rate(0.5)).unwrap();
        assert!(dp.chi > 1.0 && dp.chi - 1.0 < last);
        last = dp.chi - 1.0;
    }
    assert!(last < 1e-5);
}

#[test]
fn linearized_mode_is_a_pulled_lorentzian() {
    let mut p = SystemParams::comb(5, 10.0);
    p.delta_in_atomic = 50.0;
    p.gamma_b = 0.2;
    let p = p.with_absorption_rate(1.5);
    let dp = derive_params(&p).unwrap();
    let delta_m = dp.comb_frequencies[3];
    let grid = FrequencyGrid::symmetric(1.0, 8.0, 160_001).unwrap();
    let mags: Vec<f64> = grid
        .samples()
        .iter()
        .map(|&w| {
            mode_response(&dp, delta_m, w, Susceptibility::Linearized)
                .unwrap()
                .norm()
        })
        .collect();
    let (k, peak) = mags.iter().enumerate().fold(
        (0, 0.0),
        |acc, (k, &m)| if m > acc.1 { (k, m) } else { acc },
    );
    let w = grid.samples();
    let step = w[1] - w[0];
    assert!((w[k] - dp.chi * delta_m).abs() <= step);
    // Half maximum of |M|^2 sits at |M| = peak / sqrt 2.
    let half = peak / 2f64.sqrt();
    let upper = (k..mags.len()).find(|&j| mags[j] < half).unwrap();
    let lower = (0..k).rev().find(|&j| mags[j] < half).unwrap();
    let hwhm = 0.5 * (w[upper] - w[lower]);
    assert_relative_eq!(hwhm, dp.chi * dp.gamma_sigma, max_relative = 1e-3);
}

#[test]
fn exact_and_linearized_modes_agree_near_the_line_center() {
    let mut p = SystemParams::comb(5, 2.0);
    p.delta_in_atomic = 200.0;
    let p = p.with_absorption_rate(1.0);
    let dp = derive_params(&p).unwrap();
    for m in 0..5 {
        let delta_m = dp.comb_frequencies[m];
        for k in -100..=100 {
            let w = 0.03 * dp.delta_in_a * k as f64 / 100.0;
            let exact = mode_response(&dp, delta_m, w, Susceptibility::Exact).unwrap();
            let lin = mode_response(&dp, delta_m, w, Susceptibility::Linearized).unwrap();
            let peak = dp.chi / (dp.chi * dp.gamma_sigma);
            assert!((exact - lin).norm() / peak < 0.01, "m = {m}, w = {w}");
        }
    }
}

#[test]
fn narrowband_form_factor_expansion() {
    for ratio in [0.01, 0.05, 0.1] {
        let dp = derive_params(&unit_comb(8, 10.0, ratio * 10.0)).unwrap();
        for k in -20..=20 {
            let w = 0.1 * dp.delta_in * k as f64 / 20.0;
            let exact = form_factor(CombVariant::RectangularF1, &dp, w).unwrap();
            let approx = form_factor_narrowband(&dp, w);
            assert!(
                (exact - approx).norm() / exact.norm() < 0.05,
                "Gamma/delta = {ratio}, w = {w}"
            );
        }
    }
}

#[test]
fn form_factor_is_real_at_line_center() {
    for gs in [0.0, 0.3, 4.0, 40.0] {
        let dp = derive_params(&unit_comb(8, 10.0, gs)).unwrap();
        assert_eq!(
            form_factor(CombVariant::RectangularF1, &dp, 0.0)
                .unwrap()
                .im,
            0.0
        );
    }
}

#[test]
fn form_factor_example_value() {
    let dp = derive_params(&unit_comb(8, 10.0, 10.0)).unwrap();
    let f1 = form_factor(CombVariant::RectangularF1, &dp, 0.0).unwrap();
    assert_relative_eq!(f1.re, 1.0 / (PI - 2.0 * 2f64.atan()), max_relative = 1e-14);
    assert_relative_eq!(f1.re, 1.07840, max_relative = 1e-5);
}

fn max_transfer_gap(resonators: usize, gamma_sigma: f64, delta_in: f64) -> f64 {
    let p = unit_comb(resonators, delta_in, gamma_sigma);
    let p = matched(&p, CombVariant::RectangularF1);
    let dp = derive_params(&p).unwrap();
    let mut worst: f64 = 0.0;
    for k in -200..=200 {
        let w = 0.4 * delta_in * k as f64 / 200.0;
        let c = cavity_transfer(&p, &dp, CombVariant::RectangularF1, w)
            .unwrap()
            .norm();
        let d = cavity_transfer(&p, &dp, CombVariant::DiscreteSum, w)
            .unwrap()
            .norm();
        worst = worst.max((d - c).abs() / c);
    }
    worst
}

#[test]
fn discrete_comb_tracks_continuum_when_lines_overlap() {
    // Loaded linewidth of half the comb spacing and above.
    for m in [8, 16, 32] {
        let spacing = 10.0 / m as f64;
        for gs in [0.5 * spacing, spacing, 2.0 * spacing] {
            let gap = max_transfer_gap(m, gs, 10.0);
            assert!(gap < 0.03, "M = {m}, Gamma = {gs}: {gap}");
        }
    }
}

#[test]
fn discrete_comb_converges_with_resonator_count() {
    let gs = 1.0;
    let at8 = max_transfer_gap(8, gs, 10.0);
    let at16 = max_transfer_gap(16, gs, 10.0);
    let at32 = max_transfer_gap(32, gs, 10.0);
    assert!(at32 < at16 && at16 < at8, "{at8} {at16} {at32}");
}

#[test]
fn matched_cavity_passes_the_pulse_straight_through() {
    let p = matched(&unit_comb(8, 10.0, 2.0), CombVariant::RectangularF1);
    let dp = derive_params(&p).unwrap();
    let t = cavity_transfer(&p, &dp, CombVariant::RectangularF1, 0.0).unwrap();
    assert_relative_eq!(t.re, 1.0 / p.kappa.sqrt(), max_relative = 1e-12);
    assert!(t.im.abs() < 1e-12);
}

#[test]
fn captured_spectrum_peaks_on_each_mode() {
    let p = matched(&unit_comb(5, 10.0, 0.2), CombVariant::RectangularF1);
    let dp = derive_params(&p).unwrap();
    // Spectrally flat over the comb.
    let pulse = Pulse::gaussian_with_bandwidth(1.0, 1e3, 0.0).unwrap();
    let grid = FrequencyGrid::default_for(dp.delta_in).unwrap();
    let r = SpectralResponse::evaluate(&p, &dp, CombVariant::RectangularF1, &grid)
        .unwrap()
        .with_mode_spectra(&p, &dp, &pulse)
        .unwrap();
    let w = grid.samples();
    let step = w[1] - w[0];
    for (m, spec) in r.b_m_spectra.as_ref().unwrap().iter().enumerate() {
        let k = (0..w.len())
            .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
            .unwrap();
        assert!(
            (w[k] - dp.chi * dp.comb_frequencies[m]).abs() <= 0.5 * step + 1e-12,
            "mode {m}: peak at {} vs {}",
            w[k],
            dp.chi * dp.comb_frequencies[m]
        );
    }
}

#[test]
fn impedance_kappa_falls_with_loading() {
    let mut last = f64::INFINITY;
    for gs in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0] {
        let mut p = unit_comb(8, 10.0, gs);
        p.g = 1.5;
        p.gamma_c = 0.2;
        let dp = derive_params(&p).unwrap();
        let k = kappa_rectangular(&p, &dp);
        assert!(k < last, "Gamma = {gs}: {k} >= {last}");
        last = k;
    }
}

#[test]
fn comb_shapes_agree_for_narrow_lines() {
    for ratio in [0.001, 0.01, 0.05, 0.1] {
        let mut p = unit_comb(8, 10.0, ratio * 10.0);
        p.g = 1.0;
        let dp = derive_params(&p).unwrap();
        let (r, l) = (kappa_rectangular(&p, &dp), kappa_lorentzian(&p, &dp));
        assert!((r - l).abs() / r < 0.1, "Gamma/delta = {ratio}: {r} vs {l}");
    }
}

#[test]
fn strongly_loaded_band_exceeds_a_fifth_of_the_comb() {
    let p = matched(&unit_comb(8, 10.0, 10.0), CombVariant::RectangularF1);
    let dp = derive_params(&p).unwrap();
    let r = SpectralResponse::evaluate(
        &p,
        &dp,
        CombVariant::RectangularF1,
        &FrequencyGrid::default_for(10.0).unwrap(),
    )
    .unwrap();
    assert!(bandwidth(&r, 0.01).unwrap().width >= 2.0);
}

prop_compose! {
    fn device()(
        m in 1usize..24,
        delta_in in 0.05f64..50.0,
        ratio in 0.0f64..5.0,
        gamma_b_share in 0.0f64..0.9,
        gamma_c in 0.0f64..3.0,
        g in 0.01f64..20.0,
        kappa in 0.01f64..100.0,
        pull in any::<bool>(),
    ) -> SystemParams {
        let mut p = SystemParams::comb(m, delta_in);
        p.gamma_b = gamma_b_share * ratio * delta_in;
        p.gamma_c = gamma_c * delta_in;
        p.g = g;
        p.kappa = kappa;
        p.force_chi_one = !pull;
        p.delta_in_atomic = 1e3 * delta_in.max(ratio * delta_in);
        p.with_total_linewidth(ratio * delta_in).unwrap()
    }
}

fn finite_or_singular(r: mrqm::Result<Complex64>) -> Option<Complex64> {
    match r {
        Ok(z) => Some(z),
        Err(mrqm::Error::SingularResponse { .. } | mrqm::Error::SingularFormFactor { .. }) => None,
        Err(e) => panic!("unexpected error {e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reflection_is_passive(p in device(), x in -3.0f64..3.0) {
        let dp = derive_params(&p).unwrap();
        for variant in CombVariant::ALL {
            if let Some(u) = finite_or_singular(reflection(&p, &dp, variant, x * dp.delta_in)) {
                prop_assert!(u.norm_sqr() <= 1.0 + 1e-12, "{variant}: {}", u.norm_sqr());
            }
        }
    }

    #[test]
    fn continuum_reflection_is_even(p in device(), x in 0.0f64..3.0) {
        let dp = derive_params(&p).unwrap();
        let w = x * dp.delta_in;
        for variant in [CombVariant::RectangularF1, CombVariant::LorentzianF2] {
            let plus = finite_or_singular(reflection(&p, &dp, variant, w));
            let minus = finite_or_singular(reflection(&p, &dp, variant, -w));
            if let (Some(a), Some(b)) = (plus, minus) {
                prop_assert!((a.norm() - b.norm()).abs() <= 1e-10 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn impedance_matching_empties_line_center(p in device()) {
        let dp = derive_params(&p).unwrap();
        for variant in CombVariant::ALL {
            let mut q = p.clone();
            q.kappa = impedance_kappa(&p, &dp, variant).unwrap();
            prop_assume!(q.kappa > 0.0);
            let u0 = reflection(&q, &dp, variant, 0.0).unwrap();
            prop_assert!(u0.norm_sqr() < 1e-12, "{variant}: {}", u0.norm_sqr());
        }
    }

    #[test]
    fn linewidth_grows_with_atoms_and_coupling(
        n in 10u64..100_000,
        f in 1e-3f64..0.1,
        width in 10.0f64..1e4,
    ) {
        let mut p = SystemParams::comb(4, 1.0);
        p.delta_in_atomic = width;
        p.atoms = n;
        p.f = f;
        if let Ok(base) = derive_params(&p) {
            let more_atoms = SystemParams { atoms: n + 1, ..p.clone() };
            let stronger = SystemParams { f: f * 1.01, ..p.clone() };
            if let Ok(a) = derive_params(&more_atoms) {
                prop_assert!(a.gamma_sigma > base.gamma_sigma);
            }
            if let Ok(b) = derive_params(&stronger) {
                prop_assert!(b.gamma_sigma > base.gamma_sigma);
            }
        }
    }
}
