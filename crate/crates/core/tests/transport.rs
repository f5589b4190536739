mod common;

use ionflow::magnet::{build_hamiltonian, diagonalize, ExchangeDrive, SpinModel};
use ionflow::reservoir::{ReservoirLabel, ReservoirSpec};
use ionflow::transport::{
    co_swept_grid, current_sweep, generator_for, ChannelLabel, DensityMatrix, Dissipator, GeneratorOptions,
    SteadyOptions, SweepPoint, SweepSetup, TransportGenerator,
};
use ionflow::{CMatrix, CVector};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Setup {
    spins: usize,
    couplings: Vec<f64>,
    field: f64,
    g: Vec<(f64, f64)>,
    kappa: [f64; 2],
    nbar: [f64; 2],
    delta: [f64; 2],
    state: Vec<(f64, f64)>,
}

fn arb_setup(max_spins: usize) -> impl Strategy<Value = Setup> {
    (1usize..=max_spins).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(-1.0f64..1.0, 9),
            -0.5f64..0.5,
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * n),
            (0.3f64..1.0, 0.3f64..1.0),
            (0.0f64..0.6, 0.0f64..0.6),
            (-3.0f64..3.0, -3.0f64..3.0),
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n),
        )
            .prop_map(|(spins, couplings, field, g, k, nb, d, state)| Setup {
                spins,
                couplings,
                field,
                g,
                kappa: [k.0, k.1],
                nbar: [nb.0, nb.1],
                delta: [d.0, d.1],
                state,
            })
    })
}

fn pairs(n: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for a in 0..n {
        for b in a + 1..n {
            m[(a, b)] = v[k];
            m[(b, a)] = v[k];
            k += 1;
        }
    }
    m
}

/// XYZ magnet, or XXZ when `conserving` so that the excitation number is
/// a good quantum number and quanta can only enter or leave via the baths.
fn build_model(s: &Setup, dissipator: Dissipator, conserving: bool) -> TransportGenerator {
    let n = s.spins;
    let jy = if conserving { &s.couplings[0..3] } else { &s.couplings[3..6] };
    let model = SpinModel::xyz(s.field, pairs(n, &s.couplings[0..3]), pairs(n, jy), pairs(n, &s.couplings[6..9])).unwrap();
    let spec = diagonalize(&build_hamiltonian(&model, 12).unwrap()).unwrap();
    // |g| ≤ 0.05 κ on every spin
    let c = |r: usize| -> Vec<Complex64> {
        s.g[r * n..(r + 1) * n].iter().map(|&(a, b)| Complex64::new(a, b) * (0.035 * s.kappa[r])).collect()
    };
    let drive = ExchangeDrive::new(c(0), c(1)).unwrap();
    let res = [
        ReservoirSpec::from_width(ReservoirLabel::Source, 5.0, s.kappa[0], s.nbar[0], s.delta[0]).unwrap(),
        ReservoirSpec::from_width(ReservoirLabel::Drain, 7.0, s.kappa[1], s.nbar[1], s.delta[1]).unwrap(),
    ];
    generator_for(&spec, &drive, res, GeneratorOptions { dissipator, ..Default::default() }).unwrap()
}

fn build(s: &Setup, dissipator: Dissipator) -> TransportGenerator {
    build_model(s, dissipator, false)
}

fn random_state(s: &Setup) -> DensityMatrix {
    let v = CVector::from_iterator(s.state.len(), s.state.iter().map(|&(a, b)| Complex64::new(a, b + 1e-3)));
    let v = &v / Complex64::new(v.norm(), 0.0);
    // mix with the maximally mixed state so the rank is full
    let d = v.len() as f64;
    let m: CMatrix = (&v * v.adjoint()) * Complex64::new(0.7, 0.0) + CMatrix::identity(v.len(), v.len()) * Complex64::new(0.3 / d, 0.0);
    DensityMatrix::new(m).unwrap()
}

fn dimer(g: f64, kappa: f64, nbar: [f64; 2]) -> TransportGenerator {
    common::dimer_gen(&common::dimer_cfg(g / kappa, kappa, -2.0 * common::J, nbar))
}

#[test]
fn empty_grid_gives_empty_table() {
    assert!(co_swept_grid(&[], &[1.0]).is_empty());
    let setup = SweepSetup {
        spectrum: diagonalize(&build_hamiltonian(&SpinModel::ising_dimer(1.0), 2).unwrap()).unwrap(),
        drive: ExchangeDrive::homogeneous(2, 0.01, 0.01),
        reservoirs: common::reservoirs([0.2; 2], [0.1, 0.0], [-2.0; 2]),
        g_over_kappa: None,
        generator: GeneratorOptions::default(),
        steady: SteadyOptions::default(),
        frozen_ratio: 0.0,
        rho0: DensityMatrix::basis_state(4, 0),
    };
    assert!(current_sweep(&setup, &[]).is_empty());
}

#[test]
fn zero_bias_carries_no_current() {
    let gen = dimer(0.002 * common::J, 0.05 * common::J, [0.2, 0.2]);
    let rho = gen.steady_state(&gen.all_down(), &SteadyOptions::default()).unwrap();
    let i = gen.current(&rho);
    let scale = gen.dominant_rate();
    assert!(i.source.abs() < 1e-12 * scale && i.drain.abs() < 1e-12 * scale);
}

#[test]
fn singlet_population_is_conserved() {
    let gen = dimer(0.002 * common::J, 0.05 * common::J, [0.3, 0.05]);
    let s = CVector::from_vec(vec![0.0, 1.0, -1.0, 0.0].into_iter().map(|x| Complex64::new(x * 0.5f64.sqrt(), 0.0)).collect());
    let singlet = &s * s.adjoint();
    let mut m = singlet.clone() * Complex64::new(0.3, 0.0);
    m[(0, 0)] += Complex64::new(0.5, 0.0);
    m[(3, 3)] += Complex64::new(0.2, 0.0);
    let rho0 = gen.to_eigenbasis(&DensityMatrix::new(m).unwrap());
    let g = gen.dominant_rate();
    let times: Vec<f64> = [0.1, 1.0, 10.0, 100.0].iter().map(|t| t / g).collect();
    for rho in gen.propagate_many(&rho0, &times, Default::default()).unwrap() {
        let p = (s.adjoint() * gen.to_computational(&rho).matrix() * &s)[(0, 0)].re;
        assert!((p - 0.3).abs() < 1e-10, "{p}");
    }
}

#[test]
fn peak_position_ignores_coupling_scale() {
    let kappa = 0.1 * common::J;
    let deltas = common::linspace(-5.0 * common::J, 3.0 * common::J, 33);
    let argmax = |g: f64| {
        let setup = SweepSetup {
            spectrum: diagonalize(&build_hamiltonian(&SpinModel::ising_dimer(common::J), 2).unwrap()).unwrap(),
            drive: ExchangeDrive::homogeneous(2, g, g),
            reservoirs: common::reservoirs([kappa; 2], [0.05, 0.005], [-2.0 * common::J; 2]),
            g_over_kappa: None,
            generator: GeneratorOptions::default(),
            steady: SteadyOptions::default(),
            frozen_ratio: 0.0,
            rho0: DensityMatrix::basis_state(4, 0),
        };
        let pts: Vec<SweepPoint> = deltas.iter().map(|&d| SweepPoint { detuning: [d; 2], kappa: [kappa; 2] }).collect();
        let cur: Vec<f64> = current_sweep(&setup, &pts).into_iter().map(|r| r.unwrap().source).collect();
        (0..cur.len()).max_by(|&a, &b| cur[a].total_cmp(&cur[b])).unwrap()
    };
    let a = argmax(0.05 * kappa);
    assert_eq!(a, argmax(0.025 * kappa));
    assert_eq!(a, argmax(0.01 * kappa));
    assert!((deltas[a] + 2.0 * common::J).abs() < 0.3 * common::J);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagation_keeps_a_valid_state(s in arb_setup(3), t in 0.1f64..30.0) {
        let gen = build(&s, Dissipator::Secular);
        let g = gen.dominant_rate().max(1e-12);
        let rho = gen.propagate(&random_state(&s), t / g, Default::default()).unwrap();
        prop_assert!(rho.hermiticity_error() < 1e-12);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-9);
        prop_assert!(rho.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn grouped_propagation_keeps_a_valid_state(s in arb_setup(2), t in 0.1f64..30.0) {
        let gen = build(&s, Dissipator::BohrGrouped);
        prop_assume!(gen.dominant_rate() > 0.0);
        let g = gen.dominant_rate();
        let w = gen.spectrum.energies.iter().map(|e| e.abs()).fold(1.0, f64::max);
        let rho = gen.propagate(&random_state(&s), (t / g).min(1e3 / w), Default::default()).unwrap();
        prop_assert!(rho.hermiticity_error() < 1e-12);
        prop_assert!((rho.trace() - 1.0).abs() < 1e-9);
        prop_assert!(rho.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn rates_obey_detailed_balance(s in arb_setup(3)) {
        let gen = build(&s, Dissipator::Secular);
        for c in &gen.channels {
            for (r, label) in [ReservoirLabel::Source, ReservoirLabel::Drain].into_iter().enumerate() {
                let n = s.nbar[r];
                let up = gen.absorption_rate(label, c.up, c.down);
                let down = gen.emission_rate(label, c.down, c.up);
                prop_assert!(up >= 0.0 && down >= 0.0);
                prop_assert!((up * (1.0 + n) - down * n).abs() <= 1e-12 * (up * (1.0 + n)).max(1e-300));
            }
        }
    }

    #[test]
    fn steady_currents_balance(s in arb_setup(3)) {
        let gen = build_model(&s, Dissipator::Secular, true);
        let rho = gen.steady_state(&gen.all_down(), &SteadyOptions::default()).unwrap();
        let i = gen.current(&rho);
        let scale = gen.dominant_rate().max(1e-300);
        prop_assert!((i.source - i.drain).abs() < 1e-10 * scale);
        let sum: f64 = i.channels.iter().map(|c| c.source).sum();
        prop_assert!((sum - i.source).abs() <= 1e-12 * scale);
        let per_transition = i.channels.iter().all(|c| matches!(c.label, ChannelLabel::Transition { .. }));
        prop_assert!(per_transition);
    }

    #[test]
    fn grouped_steady_currents_balance(s in arb_setup(2)) {
        let gen = build_model(&s, Dissipator::BohrGrouped, true);
        prop_assume!(gen.dominant_rate() > 0.0);
        let rho = gen.steady_state(&gen.all_down(), &SteadyOptions::default()).unwrap();
        let i = gen.current(&rho);
        let scale = gen.dominant_rate().max(1e-300);
        prop_assert!((i.source - i.drain).abs() < 1e-10 * scale);
        prop_assert!(rho.validate().is_ok());
    }
}
