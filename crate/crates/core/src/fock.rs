//! Symbolic number-basis states.
//!
//! A [`Branch`] is one additive term of a superposition: a complex amplitude
//! together with definite occupation numbers for every mode it carries, a
//! position label for the illuminated body, and a momentum record for every
//! molecule whose centre of mass is tracked. A field mode that is absent from
//! a branch's occupation map is not merely empty; the branch does not carry
//! that field at all (the illumination went elsewhere).
//!
//! Two flavours of ladder operator live here. [`Branch::apply_annihilation`]
//! and [`Branch::apply_creation`] carry the usual `sqrt(n)` / `sqrt(n + 1)`
//! matrix elements. [`Branch::shift_down`] and [`Branch::shift_up`] move the
//! occupation without touching the amplitude; the larc engine uses those,
//! because scenario amplitudes already absorb every matrix element.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default pruning threshold on `|amplitude|^2`.
pub const DEFAULT_EPSILON: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("mode label `{0}` is already registered")]
    DuplicateLabel(String),
    #[error("annihilation of the vacuum on mode {0}")]
    VacuumAnnihilation(ModeId),
    #[error("Pauli exclusion: mode {0} is already occupied")]
    Pauli(ModeId),
    #[error("no electron in the initial orbital {0}")]
    EmptyOrbital(ModeId),
    #[error("operator not defined for mode {mode} of kind {kind:?}")]
    WrongKind { mode: ModeId, kind: ModeKind },
    #[error("branch carries no momentum record for mode {0}")]
    UnknownMolecule(ModeId),
    #[error("state has zero norm")]
    DegenerateState,
    #[error("fermionic mode {mode} cannot hold {count} quanta")]
    FermionCount { mode: ModeId, count: u32 },
    #[error("mode {0} is not registered")]
    Unregistered(ModeId),
    #[error("electron number violated on molecule `{label}`: i + f = {sum}")]
    ElectronConservation { label: String, sum: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeKind {
    PhotonField,
    /// Massive field quanta (electrons, positrons) created by pair production.
    MatterField,
    ElectronInitial,
    ElectronFinal,
    ComMomentum,
}

impl ModeKind {
    pub fn is_field(self) -> bool {
        matches!(self, ModeKind::PhotonField | ModeKind::MatterField)
    }

    pub fn is_fermionic_orbital(self) -> bool {
        matches!(self, ModeKind::ElectronInitial | ModeKind::ElectronFinal)
    }
}

/// Handle for a registered mode. The kind travels with the handle so that
/// operator preconditions can be checked without a registry lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeId {
    index: u32,
    kind: ModeKind,
}

impl ModeId {
    pub fn index(self) -> u32 {
        self.index
    }

    pub fn kind(self) -> ModeKind {
        self.kind
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.index)
    }
}

/// The initial/final orbital pair of one light-sensitive molecule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Orbitals {
    pub initial: ModeId,
    pub excited: ModeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Molecule {
    pub orbitals: Orbitals,
    pub com: Option<ModeId>,
}

#[derive(Debug, Clone, Default)]
pub struct ModeRegistry {
    labels: Vec<String>,
    kinds: Vec<ModeKind>,
    by_label: HashMap<String, ModeId>,
    molecules: Vec<(String, Molecule)>,
}

impl ModeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_mode(&mut self, label: &str, kind: ModeKind) -> Result<ModeId, FockError> {
        if self.by_label.contains_key(label) {
            return Err(FockError::DuplicateLabel(label.to_owned()));
        }
        let id = ModeId {
            index: self.labels.len() as u32,
            kind,
        };
        self.labels.push(label.to_owned());
        self.kinds.push(kind);
        self.by_label.insert(label.to_owned(), id);
        Ok(id)
    }

    /// Registers `e_i@label` and `e_f@label`, plus `com@label` when the
    /// molecule's centre-of-mass momentum is tracked.
    pub fn register_molecule(&mut self, label: &str, track_com: bool) -> Result<Molecule, FockError> {
        let initial = self.register_mode(&format!("e_i@{label}"), ModeKind::ElectronInitial)?;
        let excited = self.register_mode(&format!("e_f@{label}"), ModeKind::ElectronFinal)?;
        let com = if track_com {
            Some(self.register_mode(&format!("com@{label}"), ModeKind::ComMomentum)?)
        } else {
            None
        };
        let molecule = Molecule {
            orbitals: Orbitals { initial, excited },
            com,
        };
        self.molecules.push((label.to_owned(), molecule));
        Ok(molecule)
    }

    pub fn lookup(&self, label: &str) -> Option<ModeId> {
        self.by_label.get(label).copied()
    }

    pub fn label(&self, mode: ModeId) -> Option<&str> {
        self.labels.get(mode.index as usize).map(String::as_str)
    }

    pub fn contains(&self, mode: ModeId) -> bool {
        self.kinds.get(mode.index as usize) == Some(&mode.kind)
    }

    pub fn molecules(&self) -> impl Iterator<Item = (&str, &Molecule)> {
        self.molecules.iter().map(|(l, m)| (l.as_str(), m))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Checks that every branch references registered modes only and that
    /// every registered molecule holds exactly one electron in every branch.
    pub fn check_state(&self, state: &SuperpositionState) -> Result<(), FockError> {
        for branch in state.branches() {
            for mode in branch.occupations.keys().chain(branch.kicks.keys()) {
                if !self.contains(*mode) {
                    return Err(FockError::Unregistered(*mode));
                }
            }
            for (label, molecule) in &self.molecules {
                let sum = branch.occupation(molecule.orbitals.initial).unwrap_or(0)
                    + branch.occupation(molecule.orbitals.excited).unwrap_or(0);
                if sum != 1 {
                    return Err(FockError::ElectronConservation {
                        label: label.clone(),
                        sum,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Centre-of-mass momentum on an integer lattice (units of one photon
/// momentum quantum). Integer components keep kick labels exact under
/// addition and component decomposition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Momentum {
    pub x: i64,
    pub y: i64,
}

impl Momentum {
    pub const ZERO: Momentum = Momentum { x: 0, y: 0 };

    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    /// Splits into `(x, 0)` and `(0, y)`.
    pub fn components(self) -> (Momentum, Momentum) {
        (Momentum::new(self.x, 0), Momentum::new(0, self.y))
    }
}

impl Add for Momentum {
    type Output = Momentum;
    fn add(self, rhs: Momentum) -> Momentum {
        Momentum::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Momentum {
    type Output = Momentum;
    fn sub(self, rhs: Momentum) -> Momentum {
        Momentum::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Momentum {
    type Output = Momentum;
    fn neg(self) -> Momentum {
        Momentum::new(-self.x, -self.y)
    }
}

impl fmt::Display for Momentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.x, self.y)
    }
}

/// Momentum label `p_i + transferred` of one molecule's centre of mass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Kick {
    pub initial: Momentum,
    pub transferred: Momentum,
}

impl Kick {
    pub fn at_rest(initial: Momentum) -> Self {
        Self {
            initial,
            transferred: Momentum::ZERO,
        }
    }

    pub fn total(&self) -> Momentum {
        self.initial + self.transferred
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Position {
    X1,
    X2,
}

impl Position {
    pub fn other(self) -> Position {
        match self {
            Position::X1 => Position::X2,
            Position::X2 => Position::X1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Position::X1 => 0,
            Position::X2 => 1,
        }
    }
}

/// Per-branch photon bookkeeping. Class-3 reductions eliminate branches
/// instead of removing quanta from surviving ones, so a balanced branch has
/// `photons_absorbed == excitations`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhotonLedger {
    /// Photon annihilations minus photon creations.
    pub photons_absorbed: i64,
    /// Electron raisings minus electron lowerings.
    pub excitations: i64,
}

impl PhotonLedger {
    pub fn is_balanced(&self) -> bool {
        self.photons_absorbed == self.excitations
    }
}

/// Labels that identify a branch up to its amplitude.
pub type BranchKey = (BTreeMap<ModeId, u32>, Position, BTreeMap<ModeId, Kick>);

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub amplitude: Complex64,
    occupations: BTreeMap<ModeId, u32>,
    pub position: Position,
    kicks: BTreeMap<ModeId, Kick>,
    ledger: PhotonLedger,
}

impl Branch {
    pub fn new(amplitude: Complex64, position: Position) -> Self {
        Self {
            amplitude,
            occupations: BTreeMap::new(),
            position,
            kicks: BTreeMap::new(),
            ledger: PhotonLedger::default(),
        }
    }

    pub fn with_occupation(mut self, mode: ModeId, count: u32) -> Result<Self, FockError> {
        if mode.kind.is_fermionic_orbital() && count > 1 {
            return Err(FockError::FermionCount { mode, count });
        }
        if mode.kind == ModeKind::ComMomentum {
            return Err(FockError::WrongKind {
                mode,
                kind: mode.kind,
            });
        }
        self.occupations.insert(mode, count);
        Ok(self)
    }

    /// Puts a molecule in its ground configuration `(i, f) = (1, 0)`.
    pub fn with_ground_molecule(self, molecule: &Molecule, initial_momentum: Momentum) -> Result<Self, FockError> {
        let mut b = self
            .with_occupation(molecule.orbitals.initial, 1)?
            .with_occupation(molecule.orbitals.excited, 0)?;
        if let Some(com) = molecule.com {
            b.kicks.insert(com, Kick::at_rest(initial_momentum));
        }
        Ok(b)
    }

    pub fn occupation(&self, mode: ModeId) -> Option<u32> {
        self.occupations.get(&mode).copied()
    }

    pub fn carries(&self, mode: ModeId) -> bool {
        self.occupations.contains_key(&mode)
    }

    pub fn occupations(&self) -> &BTreeMap<ModeId, u32> {
        &self.occupations
    }

    pub fn kick(&self, com: ModeId) -> Option<Kick> {
        self.kicks.get(&com).copied()
    }

    pub fn kicks(&self) -> &BTreeMap<ModeId, Kick> {
        &self.kicks
    }

    pub fn ledger(&self) -> PhotonLedger {
        self.ledger
    }

    pub fn weight(&self) -> f64 {
        self.amplitude.norm_sqr()
    }

    pub fn key(&self) -> BranchKey {
        (self.occupations.clone(), self.position, self.kicks.clone())
    }

    fn count(&self, mode: ModeId) -> u32 {
        self.occupation(mode).unwrap_or(0)
    }

    fn require_field(mode: ModeId) -> Result<(), FockError> {
        if mode.kind.is_field() {
            Ok(())
        } else {
            Err(FockError::WrongKind {
                mode,
                kind: mode.kind,
            })
        }
    }

    fn note_field_change(&mut self, mode: ModeId, delta: i64) {
        if mode.kind == ModeKind::PhotonField {
            self.ledger.photons_absorbed += delta;
        }
    }

    /// `a |n> = sqrt(n) |n - 1>`.
    pub fn apply_annihilation(&self, mode: ModeId) -> Result<Branch, FockError> {
        Self::require_field(mode)?;
        let n = self.count(mode);
        if n == 0 {
            return Err(FockError::VacuumAnnihilation(mode));
        }
        let mut out = self.shift_down(mode)?;
        out.amplitude *= f64::from(n).sqrt();
        Ok(out)
    }

    /// Like [`Branch::apply_annihilation`] but maps the vacuum to a
    /// zero-amplitude branch instead of failing.
    pub fn apply_annihilation_lenient(&self, mode: ModeId) -> Result<Branch, FockError> {
        match self.apply_annihilation(mode) {
            Err(FockError::VacuumAnnihilation(_)) => {
                let mut zero = self.clone();
                zero.amplitude = Complex64::new(0.0, 0.0);
                Ok(zero)
            }
            other => other,
        }
    }

    /// `a^dagger |n> = sqrt(n + 1) |n + 1>`; fermionic orbitals obey Pauli.
    pub fn apply_creation(&self, mode: ModeId) -> Result<Branch, FockError> {
        if mode.kind == ModeKind::ComMomentum {
            return Err(FockError::WrongKind {
                mode,
                kind: mode.kind,
            });
        }
        let n = self.count(mode);
        if mode.kind.is_fermionic_orbital() && n >= 1 {
            return Err(FockError::Pauli(mode));
        }
        let mut out = self.clone();
        out.occupations.insert(mode, n + 1);
        out.amplitude *= f64::from(n + 1).sqrt();
        out.note_field_change(mode, -1);
        Ok(out)
    }

    /// Removes one quantum without the `sqrt(n)` matrix element.
    pub fn shift_down(&self, mode: ModeId) -> Result<Branch, FockError> {
        Self::require_field(mode)?;
        let n = self.count(mode);
        if n == 0 {
            return Err(FockError::VacuumAnnihilation(mode));
        }
        let mut out = self.clone();
        out.occupations.insert(mode, n - 1);
        out.note_field_change(mode, 1);
        Ok(out)
    }

    /// Adds one field quantum without the `sqrt(n + 1)` matrix element.
    pub fn shift_up(&self, mode: ModeId) -> Result<Branch, FockError> {
        Self::require_field(mode)?;
        let n = self.count(mode);
        let mut out = self.clone();
        out.occupations.insert(mode, n + 1);
        out.note_field_change(mode, -1);
        Ok(out)
    }

    /// Electron raising: the initial orbital empties and the final orbital
    /// fills, `(i, f) = (1, 0) -> (0, 1)`.
    pub fn apply_raising(&self, orbitals: Orbitals) -> Result<Branch, FockError> {
        if self.count(orbitals.initial) == 0 {
            return Err(FockError::EmptyOrbital(orbitals.initial));
        }
        if self.count(orbitals.excited) >= 1 {
            return Err(FockError::Pauli(orbitals.excited));
        }
        let mut out = self.clone();
        out.occupations.insert(orbitals.initial, 0);
        out.occupations.insert(orbitals.excited, 1);
        out.ledger.excitations += 1;
        Ok(out)
    }

    /// Electron lowering, `(0, 1) -> (1, 0)`.
    pub fn apply_lowering(&self, orbitals: Orbitals) -> Result<Branch, FockError> {
        if self.count(orbitals.excited) == 0 {
            return Err(FockError::EmptyOrbital(orbitals.excited));
        }
        if self.count(orbitals.initial) >= 1 {
            return Err(FockError::Pauli(orbitals.initial));
        }
        let mut out = self.clone();
        out.occupations.insert(orbitals.excited, 0);
        out.occupations.insert(orbitals.initial, 1);
        out.ledger.excitations -= 1;
        Ok(out)
    }

    /// Centre-of-mass raising `r_p phi(p_i) = phi(p_i + p)`; amplitude unchanged.
    pub fn apply_raising_momentum(&self, com: ModeId, kick: Momentum) -> Result<Branch, FockError> {
        let mut out = self.clone();
        let record = out.kicks.get_mut(&com).ok_or(FockError::UnknownMolecule(com))?;
        record.transferred = record.transferred + kick;
        Ok(out)
    }
}

/// A superposition of branches. Operations keep it free of duplicate
/// labels; construction through [`SuperpositionState::new`] does not.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionState {
    branches: Vec<Branch>,
    epsilon: f64,
}

impl SuperpositionState {
    pub fn new(branches: Vec<Branch>) -> Self {
        Self {
            branches,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn into_branches(self) -> Vec<Branch> {
        self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.branches.iter().map(Branch::weight).sum()
    }

    /// Rescales to unit norm; relative phases are untouched.
    pub fn normalize(mut self) -> Result<Self, FockError> {
        let norm = self.norm_sqr();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(FockError::DegenerateState);
        }
        let scale = norm.sqrt().recip();
        for b in &mut self.branches {
            b.amplitude *= scale;
        }
        Ok(self)
    }

    /// Sums amplitudes of branches with identical labels, drops branches with
    /// `|amplitude|^2 < epsilon`, then renormalizes if anything is left.
    pub fn merge_and_prune(self) -> Self {
        let epsilon = self.epsilon;
        let mut index: HashMap<BranchKey, usize> = HashMap::with_capacity(self.branches.len());
        let mut merged: Vec<Branch> = Vec::with_capacity(self.branches.len());
        for branch in self.branches {
            match index.get(&branch.key()) {
                Some(&at) => merged[at].amplitude += branch.amplitude,
                None => {
                    index.insert(branch.key(), merged.len());
                    merged.push(branch);
                }
            }
        }
        merged.retain(|b| b.weight() >= epsilon);
        let state = SuperpositionState {
            branches: merged,
            epsilon,
        };
        if state.norm_sqr() > 0.0 {
            state.normalize().expect("positive norm")
        } else {
            state
        }
    }

    /// Branches whose position label is `position`.
    pub fn sector_weight(&self, position: Position) -> f64 {
        self.branches
            .iter()
            .filter(|b| b.position == position)
            .map(Branch::weight)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn photon_branch(n: u32, amp: f64) -> (ModeId, Branch) {
        let mut reg = ModeRegistry::new();
        let g = reg.register_mode("gamma@xi1", ModeKind::PhotonField).unwrap();
        (g, Branch::new(c(amp), Position::X1).with_occupation(g, n).unwrap())
    }

    #[test]
    fn register_assigns_fresh_ids_and_rejects_duplicates() {
        let mut reg = ModeRegistry::new();
        let g = reg.register_mode("gamma@xi1", ModeKind::PhotonField).unwrap();
        let e = reg.register_mode("e_i@1;q", ModeKind::ElectronInitial).unwrap();
        assert_eq!(g.index(), 0);
        assert_eq!(e.index(), 1);
        assert_eq!(e.kind(), ModeKind::ElectronInitial);
        assert_eq!(
            reg.register_mode("gamma@xi1", ModeKind::PhotonField),
            Err(FockError::DuplicateLabel("gamma@xi1".into()))
        );
        assert_eq!(reg.lookup("e_i@1;q"), Some(e));
    }

    #[test]
    fn annihilation_carries_sqrt_n() {
        let (g, b) = photon_branch(4, 1.0);
        let out = b.apply_annihilation(g).unwrap();
        assert_eq!(out.occupation(g), Some(3));
        assert!((out.amplitude - c(2.0)).norm() < 1e-15);

        let (g, b) = photon_branch(1, 0.5);
        let out = b.apply_annihilation(g).unwrap();
        assert_eq!(out.occupation(g), Some(0));
        assert_eq!(out.amplitude, c(0.5));
    }

    #[test]
    fn vacuum_annihilation_errors_unless_lenient() {
        let (g, b) = photon_branch(0, 1.0);
        assert_eq!(b.apply_annihilation(g), Err(FockError::VacuumAnnihilation(g)));
        let zero = b.apply_annihilation_lenient(g).unwrap();
        assert_eq!(zero.amplitude, c(0.0));
        assert_eq!(zero.occupation(g), Some(0));
    }

    #[test]
    fn creation_carries_sqrt_n_plus_one() {
        let (g, b) = photon_branch(3, 1.0);
        let out = b.apply_creation(g).unwrap();
        assert_eq!(out.occupation(g), Some(4));
        assert!((out.amplitude - c(2.0)).norm() < 1e-15);
    }

    #[test]
    fn electron_final_creation_respects_pauli() {
        let mut reg = ModeRegistry::new();
        let f = reg.register_mode("e_f@1;q", ModeKind::ElectronFinal).unwrap();
        let b = Branch::new(c(1.0), Position::X1).with_occupation(f, 0).unwrap();
        let raised = b.apply_creation(f).unwrap();
        assert_eq!(raised.occupation(f), Some(1));
        assert_eq!(raised.apply_creation(f), Err(FockError::Pauli(f)));
    }

    #[test]
    fn raising_moves_the_electron() {
        let mut reg = ModeRegistry::new();
        let m = reg.register_molecule("1;q", false).unwrap();
        let b = Branch::new(c(1.0), Position::X1)
            .with_ground_molecule(&m, Momentum::ZERO)
            .unwrap();
        let up = b.apply_raising(m.orbitals).unwrap();
        assert_eq!(up.occupation(m.orbitals.initial), Some(0));
        assert_eq!(up.occupation(m.orbitals.excited), Some(1));
        assert_eq!(up.apply_raising(m.orbitals), Err(FockError::EmptyOrbital(m.orbitals.initial)));
        let down = up.apply_lowering(m.orbitals).unwrap();
        assert_eq!(down.key(), b.key());
    }

    #[test]
    fn momentum_raising_adds_labels() {
        let mut reg = ModeRegistry::new();
        let m = reg.register_molecule("M", true).unwrap();
        let com = m.com.unwrap();
        let p_i = Momentum::new(1, 1);
        let p1 = Momentum::new(5, -2);
        let b = Branch::new(c(1.0), Position::X1).with_ground_molecule(&m, p_i).unwrap();

        let kicked = b.apply_raising_momentum(com, p1).unwrap();
        assert_eq!(kicked.kick(com).unwrap().total(), p_i + p1);
        assert_eq!(kicked.amplitude, b.amplitude);

        let still = b.apply_raising_momentum(com, Momentum::ZERO).unwrap();
        assert_eq!(still.kick(com), b.kick(com));

        let (px, py) = p1.components();
        let split = b
            .apply_raising_momentum(com, px)
            .unwrap()
            .apply_raising_momentum(com, py)
            .unwrap();
        assert_eq!(split, kicked);

        let stranger = reg.register_molecule("N", true).unwrap().com.unwrap();
        assert_eq!(
            b.apply_raising_momentum(stranger, p1),
            Err(FockError::UnknownMolecule(stranger))
        );
    }

    #[test]
    fn normalize_examples() {
        let (g, _) = photon_branch(1, 1.0);
        let mk = |a: f64, b: f64| {
            SuperpositionState::new(vec![
                Branch::new(c(a), Position::X1).with_occupation(g, 1).unwrap(),
                Branch::new(c(b), Position::X2),
            ])
        };
        let s = mk(0.6, 0.8).normalize().unwrap();
        assert!((s.branches()[0].amplitude.re - 0.6).abs() < 1e-15);
        assert!((s.branches()[1].amplitude.re - 0.8).abs() < 1e-15);

        let s = mk(1.0, 1.0).normalize().unwrap();
        for b in s.branches() {
            assert!((b.amplitude.re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
        assert_eq!(mk(0.0, 0.0).normalize(), Err(FockError::DegenerateState));
    }

    #[test]
    fn normalize_keeps_relative_phase() {
        let s = SuperpositionState::new(vec![
            Branch::new(Complex64::new(0.0, 3.0), Position::X1),
            Branch::new(Complex64::new(4.0, 0.0), Position::X2),
        ])
        .normalize()
        .unwrap();
        let ratio = s.branches()[0].amplitude / s.branches()[1].amplitude;
        assert!((ratio - Complex64::new(0.0, 0.75)).norm() < 1e-15);
    }

    #[test]
    fn merge_adds_duplicates_and_prunes() {
        let a = Branch::new(c(0.5), Position::X1);
        let merged = SuperpositionState::new(vec![a.clone(), a.clone()]);
        // pre-normalization sum is 1.0, so normalizing leaves it there
        let out = merged.merge_and_prune();
        assert_eq!(out.len(), 1);
        assert!((out.branches()[0].amplitude - c(1.0)).norm() < 1e-15);

        let tiny = SuperpositionState::new(vec![Branch::new(c(1.0), Position::X1), Branch::new(c(1e-20), Position::X2)])
            .with_epsilon(1e-15)
            .merge_and_prune();
        assert_eq!(tiny.len(), 1);
        assert_eq!(tiny.branches()[0].position, Position::X1);

        let distinct = SuperpositionState::new(vec![Branch::new(c(0.6), Position::X1), Branch::new(c(0.8), Position::X2)]);
        assert_eq!(distinct.clone().merge_and_prune(), distinct);
    }

    #[test]
    fn check_state_reports_electron_violations() {
        let mut reg = ModeRegistry::new();
        let m = reg.register_molecule("1;1", false).unwrap();
        let ok = SuperpositionState::new(vec![Branch::new(c(1.0), Position::X1)
            .with_ground_molecule(&m, Momentum::ZERO)
            .unwrap()]);
        assert!(reg.check_state(&ok).is_ok());
        let bad = SuperpositionState::new(vec![Branch::new(c(1.0), Position::X1)
            .with_occupation(m.orbitals.initial, 1)
            .unwrap()
            .with_occupation(m.orbitals.excited, 1)
            .unwrap()]);
        assert!(matches!(reg.check_state(&bad), Err(FockError::ElectronConservation { sum: 2, .. })));
    }

    #[test]
    fn ledger_balances_after_absorption() {
        let mut reg = ModeRegistry::new();
        let g = reg.register_mode("gamma", ModeKind::PhotonField).unwrap();
        let m = reg.register_molecule("1;1", false).unwrap();
        let b = Branch::new(c(1.0), Position::X1)
            .with_occupation(g, 2)
            .unwrap()
            .with_ground_molecule(&m, Momentum::ZERO)
            .unwrap();
        let half = b.shift_down(g).unwrap();
        assert!(!half.ledger().is_balanced());
        assert!(half.apply_raising(m.orbitals).unwrap().ledger().is_balanced());
    }
}
