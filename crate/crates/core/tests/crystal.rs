mod common;

use ionflow::crystal::{dimensionless_positions, solve_crystal, Branch, CrystalArrangement, IonSpecies, TrapConfig};
use ionflow::units::mhz;
use ionflow::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Axial gradient of Σ z²/2 + Σ_{i<j} 1/|z_i − z_j|.
fn gradient(z: &[f64]) -> f64 {
    (0..z.len())
        .map(|i| {
            let c: f64 = (0..z.len())
                .filter(|&j| j != i)
                .map(|j| (z[i] - z[j]).signum() / (z[i] - z[j]).powi(2))
                .sum();
            (z[i] - c).abs()
        })
        .fold(0.0, f64::max)
}

fn chain(masses: &[f64], coolant: usize) -> CrystalArrangement {
    CrystalArrangement::new(
        masses
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                if i == coolant {
                    IonSpecies::coolant("c", m, mhz(41.4)).unwrap()
                } else {
                    IonSpecies::spin("s", m).unwrap()
                }
            })
            .collect(),
    )
    .unwrap()
}

fn trap() -> TrapConfig {
    TrapConfig::new(mhz(6.0), mhz(6.5), mhz(1.0)).unwrap()
}

#[test]
fn two_ions_balance_trap_and_coulomb() {
    // z = 1/(2z)² at equilibrium
    let z = dimensionless_positions(2).unwrap();
    assert!((z[1] - 0.25f64.cbrt()).abs() < 1e-12);
    assert!((z[0] + z[1]).abs() < 1e-14);
}

#[test]
fn mixed_crystal_is_close_to_single_species() {
    let (_, _, mg) = common::mg_crystal();
    let pure = [1.0, 3f64.sqrt(), (29.0f64 / 5.0).sqrt()];
    for (w, p) in mg.z.frequencies.iter().zip(pure) {
        assert!((w / mhz(1.0) / p - 1.0).abs() < 0.05);
    }
}

#[test]
fn symmetric_crystal_has_even_and_odd_modes() {
    let (_, _, mg) = common::mg_crystal();
    for n in 0..3 {
        let v = &mg.z.vectors;
        assert!((v[(0, n)].abs() - v[(2, n)].abs()).abs() < 1e-12);
    }
}

#[test]
fn sign_convention_makes_largest_component_positive() {
    let (_, _, mg) = common::mg_crystal();
    for b in [Branch::X, Branch::Y, Branch::Z] {
        let v = &mg.branch(b).vectors;
        for n in 0..v.ncols() {
            let col = v.column(n);
            let max = col.amax();
            let first = col.iter().copied().find(|x| x.abs() >= max * (1.0 - 1e-9)).unwrap();
            assert!(first > 0.0);
        }
    }
}

#[test]
fn unstable_radial_branch_is_named() {
    let t = TrapConfig::new(mhz(1.05), mhz(1.1), mhz(1.0)).unwrap();
    let err = solve_crystal(&t, &chain(&[25.0; 5], 2)).unwrap_err();
    assert!(matches!(err, Error::Unstable { branch: 'x', .. }), "{err:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn positions_are_sorted_symmetric_and_balanced(n in 1usize..10) {
        let z = dimensionless_positions(n).unwrap();
        prop_assert!(z.windows(2).all(|w| w[1] > w[0]));
        for i in 0..n {
            prop_assert!((z[i] + z[n - 1 - i]).abs() < 1e-10);
        }
        prop_assert!(gradient(&z) < 1e-10);
    }

    #[test]
    fn modes_are_orthonormal_and_positive(
        masses in prop::collection::vec(9.0f64..60.0, 2..6),
        pick in 0usize..6,
    ) {
        let coolant = pick % masses.len();
        let m = solve_crystal(&trap(), &chain(&masses, coolant)).unwrap();
        for b in [Branch::X, Branch::Y, Branch::Z] {
            let br = m.branch(b);
            let v = &br.vectors;
            let err = (v.transpose() * v - DMatrix::identity(v.ncols(), v.ncols())).amax();
            prop_assert!(err < 1e-12);
            prop_assert!(br.frequencies.iter().all(|w| *w > 0.0));
            prop_assert!(br.frequencies.windows(2).all(|w| w[1] >= w[0]));
        }
        prop_assert!(m.positions.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn one_percent_mass_change_is_a_small_perturbation(
        masses in prop::collection::vec(20.0f64..40.0, 3..5),
        which in 0usize..5,
    ) {
        let a = solve_crystal(&trap(), &chain(&masses, 0)).unwrap();
        let mut moved = masses.clone();
        let k = which % masses.len();
        moved[k] *= 1.01;
        let b = solve_crystal(&trap(), &chain(&moved, 0)).unwrap();
        for br in [Branch::X, Branch::Y, Branch::Z] {
            for (x, y) in a.branch(br).frequencies.iter().zip(&b.branch(br).frequencies) {
                prop_assert!((x / y - 1.0).abs() < 0.05);
            }
        }
    }
}
