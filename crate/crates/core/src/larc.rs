//! Larc events on explicit superpositions: well-formedness, branching,
//! classification into number-basis outcome classes, and reduction.
//!
//! A larc is a cluster of annihilation/lowering operators followed by
//! creation/raising operators. Once a branching larc is present in the state
//! it is *pending*: it contributes a constant probability per unit time
//! `P_t` of a reduction. A reduction picks one of three outcome classes for
//! the larc's host and zeroes every branch outside it:
//!
//! | class | tuple          | members                                                  |
//! |-------|----------------|----------------------------------------------------------|
//! | 1     | `(n-1, 0, 1)`  | host absorbed                                            |
//! | 2     | `(n, 1, 0)`    | branch carries the larc's field mode, host not absorbed  |
//! | 3     | `(n-1, 1, 0)`  | branch does not carry the larc's field mode at all       |

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{Branch, FockError, ModeId, ModeKind, Momentum, Orbitals, SuperpositionState};

/// Tolerance on `|b1|^2 + |b2|^2 = 1` and on outcome-weight completeness.
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LarcError {
    #[error("malformed larc: {0}")]
    Malformed(&'static str),
    #[error("branching error: {0}")]
    Branching(String),
    #[error("larc {0} is not pending")]
    NotPending(LarcId),
    #[error("outcome {0:?} has zero weight")]
    ImpossibleOutcome(OutcomeKind),
    #[error(transparent)]
    Fock(#[from] FockError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LarcId(pub usize);

impl std::fmt::Display for LarcId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "L{}", self.0)
    }
}

/// One ladder operator inside a larc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderOp {
    Annihilate(ModeId),
    Create(ModeId),
    Lower(Orbitals),
    Raise(Orbitals),
    /// Centre-of-mass raising by a momentum kick.
    Kick(ModeId, Momentum),
}

impl LadderOp {
    fn is_descending(&self) -> bool {
        matches!(self, LadderOp::Annihilate(_) | LadderOp::Lower(_))
    }

    fn is_ascending(&self) -> bool {
        matches!(self, LadderOp::Create(_) | LadderOp::Raise(_) | LadderOp::Kick(..))
    }

    fn apply(&self, branch: &Branch) -> Result<Branch, FockError> {
        match *self {
            LadderOp::Annihilate(mode) => branch.shift_down(mode),
            LadderOp::Create(mode) => branch.shift_up(mode),
            LadderOp::Lower(orbitals) => branch.apply_lowering(orbitals),
            LadderOp::Raise(orbitals) => branch.apply_raising(orbitals),
            LadderOp::Kick(com, p) => branch.apply_raising_momentum(com, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LarcStatus {
    Dormant,
    Pending,
    Resolved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LarcEvent {
    pub id: LarcId,
    pub annihilations: Vec<LadderOp>,
    pub creations: Vec<LadderOp>,
    /// Site (molecule) identifier of the host.
    pub host: usize,
    /// Photons in the illumination field the larc draws from; labels tuples.
    pub field_quanta: u32,
    pub activated_at: Option<f64>,
    pub status: LarcStatus,
}

impl LarcEvent {
    pub fn new(id: LarcId, host: usize, annihilations: Vec<LadderOp>, creations: Vec<LadderOp>, field_quanta: u32) -> Self {
        Self {
            id,
            annihilations,
            creations,
            host,
            field_quanta,
            activated_at: None,
            status: LarcStatus::Dormant,
        }
    }

    /// Photon absorption: `a_gamma` on `field`, then the electron raising of
    /// `host`, then any centre-of-mass kicks.
    pub fn absorption(id: LarcId, host: usize, field: ModeId, orbitals: Orbitals, kicks: &[(ModeId, Momentum)], field_quanta: u32) -> Self {
        let mut creations = vec![LadderOp::Raise(orbitals)];
        creations.extend(kicks.iter().map(|&(com, p)| LadderOp::Kick(com, p)));
        Self::new(id, host, vec![LadderOp::Annihilate(field)], creations, field_quanta)
    }

    /// Checks operator ordering and mode/operator compatibility.
    pub fn validate(&self) -> Result<(), LarcError> {
        if self.annihilations.is_empty() {
            return Err(LarcError::Malformed("no annihilation or lowering operator"));
        }
        if self.creations.is_empty() {
            return Err(LarcError::Malformed("no creation or raising operator"));
        }
        if !self.annihilations.iter().all(LadderOp::is_descending) {
            return Err(LarcError::Malformed("raising operator precedes the annihilations"));
        }
        if !self.creations.iter().all(LadderOp::is_ascending) {
            return Err(LarcError::Malformed("lowering operator follows the creations"));
        }
        for op in self.annihilations.iter().chain(&self.creations) {
            let ok = match *op {
                LadderOp::Annihilate(m) | LadderOp::Create(m) => m.kind().is_field(),
                LadderOp::Lower(o) | LadderOp::Raise(o) => {
                    o.initial.kind() == ModeKind::ElectronInitial && o.excited.kind() == ModeKind::ElectronFinal
                }
                LadderOp::Kick(m, _) => m.kind() == ModeKind::ComMomentum,
            };
            if !ok {
                return Err(LarcError::Malformed("operator applied to a mode of the wrong kind"));
            }
        }
        // one electron per molecule: an orbital pair may change at most once
        let mut touched: Vec<Orbitals> = Vec::new();
        for op in self.annihilations.iter().chain(&self.creations) {
            if let LadderOp::Lower(o) | LadderOp::Raise(o) = *op {
                if touched.contains(&o) {
                    return Err(LarcError::Malformed("electron moved twice on one molecule"));
                }
                touched.push(o);
            }
        }
        Ok(())
    }

    /// The single field mode a branching larc annihilates from.
    pub fn field_mode(&self) -> Result<ModeId, LarcError> {
        match self.annihilations.as_slice() {
            [LadderOp::Annihilate(mode)] => Ok(*mode),
            _ => Err(LarcError::Branching("branching needs exactly one field annihilation".into())),
        }
    }

    /// Whether the host in `branch` is in the post-absorption configuration
    /// this larc produces: every raised orbital filled and every kicked
    /// centre of mass carrying exactly this larc's transferred momentum.
    pub fn realized_in(&self, branch: &Branch) -> bool {
        let mut any = false;
        let mut kicks: Vec<(ModeId, Momentum)> = Vec::new();
        for op in &self.creations {
            match *op {
                LadderOp::Raise(o) => {
                    any = true;
                    if branch.occupation(o.excited) != Some(1) {
                        return false;
                    }
                }
                LadderOp::Kick(com, p) => match kicks.iter_mut().find(|(m, _)| *m == com) {
                    Some((_, sum)) => *sum = *sum + p,
                    None => kicks.push((com, p)),
                },
                _ => {}
            }
        }
        for (com, sum) in kicks {
            any = true;
            match branch.kick(com) {
                Some(k) if k.transferred == sum => {}
                _ => return false,
            }
        }
        any
    }

    fn raised_orbitals(&self) -> impl Iterator<Item = Orbitals> + '_ {
        self.creations.iter().filter_map(|op| match op {
            LadderOp::Raise(o) => Some(*o),
            _ => None,
        })
    }

    fn host_unabsorbed(&self, branch: &Branch) -> bool {
        self.raised_orbitals().all(|o| branch.occupation(o.excited) == Some(0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeKind {
    Absorbed,
    NotAbsorbed,
    RemovedWithoutAbsorption,
}

impl OutcomeKind {
    /// Fixed selection order.
    pub const ALL: [OutcomeKind; 3] = [OutcomeKind::Absorbed, OutcomeKind::NotAbsorbed, OutcomeKind::RemovedWithoutAbsorption];

    pub fn index(self) -> usize {
        match self {
            OutcomeKind::Absorbed => 0,
            OutcomeKind::NotAbsorbed => 1,
            OutcomeKind::RemovedWithoutAbsorption => 2,
        }
    }

    /// `(n, i, f)` eigenvalue tuple of the class for a field of `n` photons.
    pub fn tuple(self, n: u32) -> NumberTuple {
        let less = n.saturating_sub(1);
        match self {
            OutcomeKind::Absorbed => NumberTuple { n: less, i: 0, f: 1 },
            OutcomeKind::NotAbsorbed => NumberTuple { n, i: 1, f: 0 },
            OutcomeKind::RemovedWithoutAbsorption => NumberTuple { n: less, i: 1, f: 0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NumberTuple {
    pub n: u32,
    pub i: u8,
    pub f: u8,
}

impl std::fmt::Display for NumberTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.n, self.i, self.f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeClass {
    pub kind: OutcomeKind,
    pub tuple: NumberTuple,
    pub site: usize,
    pub members: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionEvent {
    pub time: f64,
    pub larc: LarcId,
    pub outcome: OutcomeKind,
    pub tuple: NumberTuple,
    /// `log2` of the number of branches before the reduction.
    pub pre_entropy: f64,
    /// `log2` of the number of branches after it.
    pub post_entropy: f64,
}

fn check_unit(b1: Complex64, b2: Complex64) -> Result<(), LarcError> {
    let sum = b1.norm_sqr() + b2.norm_sqr();
    if (sum - 1.0).abs() > UNIT_TOLERANCE {
        return Err(LarcError::Branching(format!("|b1|^2+|b2|^2 = {sum} != 1")));
    }
    Ok(())
}

/// Splits every branch that carries the larc's field with at least one photon
/// and an unabsorbed host into an absorbed part (`x b1`) and a pass-through
/// part (`x b2`). Other branches are untouched. The event becomes pending.
pub fn branch_on_larc(state: &SuperpositionState, event: &mut LarcEvent, b1: Complex64, b2: Complex64) -> Result<SuperpositionState, LarcError> {
    check_unit(b1, b2)?;
    event.validate()?;
    if event.status != LarcStatus::Dormant {
        return Err(LarcError::Branching(format!("larc {} already activated", event.id)));
    }
    let field = event.field_mode()?;
    if event.raised_orbitals().next().is_none() {
        return Err(LarcError::Branching("branching needs an electron raising".into()));
    }
    if !state.branches().iter().any(|b| b.carries(field) && event.host_unabsorbed(b)) {
        return Err(LarcError::Branching(format!("no branch of larc {} carries its field with the host unabsorbed", event.id)));
    }

    let mut out = Vec::with_capacity(state.len() * 2);
    for branch in state.branches() {
        let splits = branch.occupation(field).is_some_and(|n| n >= 1) && event.host_unabsorbed(branch);
        if !splits {
            out.push(branch.clone());
            continue;
        }
        let mut absorbed = branch.clone();
        for op in event.annihilations.iter().chain(&event.creations) {
            absorbed = op.apply(&absorbed)?;
        }
        absorbed.amplitude *= b1;
        let mut passed = branch.clone();
        passed.amplitude *= b2;
        out.push(absorbed);
        out.push(passed);
    }
    event.status = LarcStatus::Pending;
    Ok(SuperpositionState::new(out).with_epsilon(state.epsilon()).merge_and_prune())
}

fn classify_branch(event: &LarcEvent, field: ModeId, branch: &Branch) -> OutcomeKind {
    if event.realized_in(branch) {
        OutcomeKind::Absorbed
    } else if branch.carries(field) {
        OutcomeKind::NotAbsorbed
    } else {
        OutcomeKind::RemovedWithoutAbsorption
    }
}

/// The three outcome classes of a pending larc, in fixed order.
pub fn classify_outcomes(state: &SuperpositionState, event: &LarcEvent) -> Result<[OutcomeClass; 3], LarcError> {
    if event.status != LarcStatus::Pending {
        return Err(LarcError::NotPending(event.id));
    }
    let field = event.field_mode()?;
    let mut classes = OutcomeKind::ALL.map(|kind| OutcomeClass {
        kind,
        tuple: kind.tuple(event.field_quanta),
        site: event.host,
        members: Vec::new(),
        weight: 0.0,
    });
    for (i, branch) in state.branches().iter().enumerate() {
        let class = &mut classes[classify_branch(event, field, branch).index()];
        class.members.push(i);
        class.weight += branch.weight();
    }
    let total: f64 = classes.iter().map(|c| c.weight).sum();
    if !(total > 0.0) {
        return Err(FockError::DegenerateState.into());
    }
    for class in &mut classes {
        class.weight /= total;
    }
    Ok(classes)
}

/// Picks a class with one uniform draw `u` in `[0, 1)` against cumulative
/// weights in fixed class order. Zero-weight classes are never chosen.
pub fn select_outcome(weights: [f64; 3], u: f64) -> OutcomeKind {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = None;
    for kind in OutcomeKind::ALL {
        let w = weights[kind.index()];
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(kind);
        if target < acc {
            return kind;
        }
    }
    last.expect("at least one class has positive weight")
}

/// Zeroes every branch outside `chosen`, renormalizes, and resolves the larc.
pub fn reduce(state: &SuperpositionState, event: &mut LarcEvent, chosen: OutcomeKind, time: f64) -> Result<(SuperpositionState, ReductionEvent), LarcError> {
    let classes = classify_outcomes(state, event)?;
    let class = &classes[chosen.index()];
    if class.weight <= 0.0 {
        return Err(LarcError::ImpossibleOutcome(chosen));
    }
    let survivors: Vec<Branch> = class.members.iter().map(|&i| state.branches()[i].clone()).collect();
    let reduced = SuperpositionState::new(survivors).with_epsilon(state.epsilon()).normalize()?;
    event.status = LarcStatus::Resolved;
    let record = ReductionEvent {
        time,
        larc: event.id,
        outcome: chosen,
        tuple: class.tuple,
        pre_entropy: (state.len() as f64).log2(),
        post_entropy: (reduced.len() as f64).log2(),
    };
    Ok((reduced, record))
}

/// Classifies, draws a class with `rng`, and reduces.
pub fn sample_and_reduce<R: Rng + ?Sized>(state: &SuperpositionState, event: &mut LarcEvent, time: f64, rng: &mut R) -> Result<(SuperpositionState, ReductionEvent), LarcError> {
    let classes = classify_outcomes(state, event)?;
    let chosen = select_outcome(classes.each_ref().map(|c| c.weight), rng.random::<f64>());
    reduce(state, event, chosen, time)
}

/// Draws the next reduction among `pending` larcs, each contributing rate
/// `p_t`. Returns the reduction time and the index of the triggering larc,
/// or `None` when the set is empty or the time falls beyond `horizon`.
pub fn sample_reduction<T, R: Rng + ?Sized>(pending: &[T], p_t: f64, t_now: f64, horizon: f64, rng: &mut R) -> Option<(f64, usize)> {
    if pending.is_empty() || !(p_t > 0.0) {
        return None;
    }
    let rate = p_t * pending.len() as f64;
    let wait = Exp::new(rate).expect("positive rate").sample(rng);
    let t = t_now + wait;
    if t > horizon {
        return None;
    }
    Some((t, rng.random_range(0..pending.len())))
}
