use larc_core::fock::{Branch, FockError, ModeKind, ModeRegistry, Momentum, Position, SuperpositionState};
use num_complex::Complex64;
use proptest::prelude::*;

const CUTOFF: usize = 12;

/// Truncated number-basis matrices for `a` and `a^dagger`.
fn dense_ladder() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut a = vec![vec![0.0; CUTOFF]; CUTOFF];
    let mut ad = vec![vec![0.0; CUTOFF]; CUTOFF];
    for n in 1..CUTOFF {
        a[n - 1][n] = (n as f64).sqrt();
        ad[n][n - 1] = (n as f64).sqrt();
    }
    (a, ad)
}

/// Coefficient vector of a single-mode superposition in the number basis.
fn to_vector(state: &SuperpositionState, mode: larc_core::fock::ModeId) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); CUTOFF + 1];
    for b in state.branches() {
        v[b.occupation(mode).unwrap_or(0) as usize] += b.amplitude;
    }
    v
}

fn matvec(m: &[Vec<f64>], v: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|row| row.iter().zip(v).map(|(x, c)| c * *x).sum()).collect()
}

#[test]
fn ladder_operators_match_dense_matrices() {
    let mut registry = ModeRegistry::new();
    let mode = registry.register_mode("gamma", ModeKind::PhotonField).unwrap();
    let (a, ad) = dense_ladder();
    for n in 0..CUTOFF as u32 - 1 {
        let branch = Branch::new(Complex64::new(0.3, -0.4), Position::X1).with_occupation(mode, n).unwrap();
        let basis = to_vector(&SuperpositionState::new(vec![branch.clone()]), mode);

        let up = SuperpositionState::new(vec![branch.apply_creation(mode).unwrap()]);
        let expected = matvec(&ad, &basis[..CUTOFF]);
        for (k, e) in expected.iter().enumerate() {
            assert!((to_vector(&up, mode)[k] - e).norm() < 1e-14, "a^dagger |{n}>");
        }

        match branch.apply_annihilation(mode) {
            Ok(down) => {
                let got = to_vector(&SuperpositionState::new(vec![down]), mode);
                let expected = matvec(&a, &basis[..CUTOFF]);
                for (k, e) in expected.iter().enumerate() {
                    assert!((got[k] - e).norm() < 1e-14, "a |{n}>");
                }
            }
            Err(FockError::VacuumAnnihilation(_)) => assert_eq!(n, 0),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn commutator_is_identity_below_cutoff() {
    let mut registry = ModeRegistry::new();
    let mode = registry.register_mode("gamma", ModeKind::PhotonField).unwrap();
    for n in 0..8u32 {
        let b = Branch::new(Complex64::new(1.0, 0.0), Position::X2).with_occupation(mode, n).unwrap();
        let a_ad = b.apply_creation(mode).unwrap().apply_annihilation(mode).unwrap();
        let ad_a = b.apply_annihilation_lenient(mode).unwrap();
        let ad_a = if ad_a.amplitude.norm() == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            ad_a.apply_creation(mode).unwrap().amplitude
        };
        assert!((a_ad.amplitude - ad_a - 1.0).norm() < 1e-12, "n = {n}");
    }
}

#[test]
fn pauli_and_empty_orbitals_are_rejected() {
    let mut registry = ModeRegistry::new();
    let molecule = registry.register_molecule("m", false).unwrap();
    let ground = Branch::new(Complex64::new(1.0, 0.0), Position::X1)
        .with_ground_molecule(&molecule, Momentum::ZERO)
        .unwrap();
    assert!(matches!(ground.apply_lowering(molecule.orbitals), Err(FockError::EmptyOrbital(_))));
    let excited = ground.apply_raising(molecule.orbitals).unwrap();
    assert!(matches!(excited.apply_raising(molecule.orbitals), Err(FockError::EmptyOrbital(_))));
    assert!(matches!(excited.apply_creation(molecule.orbitals.excited), Err(FockError::Pauli(_))));
    assert_eq!(excited.apply_lowering(molecule.orbitals).unwrap().key(), ground.key());
}

#[derive(Debug, Clone)]
enum Op {
    Create(usize),
    Annihilate(usize),
    Raise(usize),
    Lower(usize),
    Kick(usize, i64, i64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..2usize).prop_map(Op::Create),
        (0..2usize).prop_map(Op::Annihilate),
        (0..3usize).prop_map(Op::Raise),
        (0..3usize).prop_map(Op::Lower),
        (0..3usize, -5..5i64, -5..5i64).prop_map(|(m, x, y)| Op::Kick(m, x, y)),
    ]
}

proptest! {
    #[test]
    fn operator_sequences_conserve_electrons_and_photons(ops in prop::collection::vec(op(), 0..40), n in 0..6u32) {
        let mut registry = ModeRegistry::new();
        let fields = [
            registry.register_mode("gamma@1", ModeKind::PhotonField).unwrap(),
            registry.register_mode("gamma@2", ModeKind::PhotonField).unwrap(),
        ];
        let molecules: Vec<_> = (0..3).map(|j| registry.register_molecule(&format!("m{j}"), true).unwrap()).collect();
        let mut branch = Branch::new(Complex64::new(1.0, 0.0), Position::X1).with_occupation(fields[0], n).unwrap();
        for m in &molecules {
            branch = branch.with_ground_molecule(m, Momentum::new(1, 1)).unwrap();
        }
        for op in ops {
            let next = match op {
                Op::Create(k) => branch.shift_up(fields[k]),
                Op::Annihilate(k) => branch.shift_down(fields[k]),
                Op::Raise(j) => branch.apply_raising(molecules[j].orbitals),
                Op::Lower(j) => branch.apply_lowering(molecules[j].orbitals),
                Op::Kick(j, x, y) => branch.apply_raising_momentum(molecules[j].com.unwrap(), Momentum::new(x, y)),
            };
            if let Ok(b) = next {
                branch = b;
            }
            let state = SuperpositionState::new(vec![branch.clone()]);
            prop_assert!(registry.check_state(&state).is_ok());
            prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
            let total: i64 = fields.iter().map(|f| i64::from(branch.occupation(*f).unwrap_or(0))).sum();
            prop_assert_eq!(total + branch.ledger().photons_absorbed, i64::from(n));
        }
    }

    #[test]
    fn momentum_components_reassemble(x in -1_000_000i64..1_000_000, y in -1_000_000i64..1_000_000) {
        let p = Momentum::new(x, y);
        let (px, py) = p.components();
        prop_assert_eq!(px + py, p);
        prop_assert_eq!(px.y, 0);
        prop_assert_eq!(py.x, 0);
    }

    #[test]
    fn normalize_yields_unit_norm(amps in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..8)) {
        let mut registry = ModeRegistry::new();
        let mode = registry.register_mode("gamma", ModeKind::PhotonField).unwrap();
        prop_assume!(amps.iter().any(|(r, i)| r.abs() + i.abs() > 1e-3));
        let branches = amps
            .iter()
            .enumerate()
            .map(|(k, (r, i))| Branch::new(Complex64::new(*r, *i), Position::X1).with_occupation(mode, k as u32).unwrap())
            .collect();
        let state = SuperpositionState::new(branches).normalize().unwrap();
        prop_assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
