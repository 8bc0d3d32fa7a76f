//! The two worked localization setups and their time evolution.
//!
//! *Pinhole*: a body `B` sits at `x1` or `x2`; its image falls on patch
//! `xi1` or `xi2` of a photographic plate with `m1`, `m2` molecules. Each
//! molecule the light reaches forms a larc that is absorbed with amplitude
//! `b1` or passed with `b2`.
//!
//! *Momentum*: light scattered off `B` reaches a set of free molecules from
//! direction 1 (body at `x1`) or direction 2 (body at `x2`); an absorption
//! kicks the molecule's centre of mass by `p1` or `p2`.
//!
//! Both map onto a [`ProductState`] with one sector per body position. The
//! driver interleaves scheduled activations with reductions sampled at rate
//! `P_t` per pending larc. [`ExplicitModel`] runs the same process on
//! explicit branches through the larc engine and is used for cross-checks
//! at small sizes.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{Branch, FockError, ModeId, ModeKind, ModeRegistry, Molecule, Momentum, Position, SuperpositionState};
use crate::larc::{self, LarcError, LarcEvent, LarcId, LarcStatus, OutcomeKind, ReductionEvent, UNIT_TOLERANCE};
use crate::product::{ProductError, ProductState, SiteRef};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("{constraint} (sum is {value})")]
    Normalization { constraint: &'static str, value: f64 },
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error(transparent)]
    Larc(#[from] LarcError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Photon arrival times relative to `t_i + transit_delay`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    /// Every molecule is reached at the same instant.
    Simultaneous,
    /// Molecule `j` of a patch with `m` molecules arrives at `window * j / m`.
    Stagger { window: f64 },
    /// Explicit offsets per site, indexed `[sector][site]`.
    Custom([Vec<f64>; 2]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub a1: Complex64,
    pub a2: Complex64,
    pub b1: Complex64,
    pub b2: Complex64,
}

impl Amplitudes {
    pub fn real(a1: f64, a2: f64, b1: f64, b2: f64) -> Self {
        let c = |x| Complex64::new(x, 0.0);
        Self {
            a1: c(a1),
            a2: c(a2),
            b1: c(b1),
            b2: c(b2),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let pairs = [
            ("|a1|^2+|a2|^2 != 1", self.a1, self.a2),
            ("|b1|^2+|b2|^2 != 1", self.b1, self.b2),
        ];
        for (constraint, x, y) in pairs {
            let value = x.norm_sqr() + y.norm_sqr();
            if !((value - 1.0).abs() <= UNIT_TOLERANCE) {
                return Err(ScenarioError::Normalization { constraint, value });
            }
        }
        Ok(())
    }

    fn position(&self, position: Position) -> Complex64 {
        match position {
            Position::X1 => self.a1,
            Position::X2 => self.a2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    /// Light-on time.
    pub t_i: f64,
    /// Delay between light-on and the first arrival at the plate.
    pub transit_delay: f64,
    pub schedule: Schedule,
    /// Reduction probability per unit time per pending larc.
    pub p_t: f64,
    pub horizon: f64,
    /// End a trajectory at its first reduction instead of resolving every
    /// larc.
    pub stop_after_localization: bool,
}

impl Timing {
    pub fn simultaneous(p_t: f64, horizon: f64) -> Self {
        Self {
            t_i: 0.0,
            transit_delay: 0.0,
            schedule: Schedule::Simultaneous,
            p_t,
            horizon,
            stop_after_localization: false,
        }
    }

    fn validate(&self, sites: [usize; 2]) -> Result<(), ScenarioError> {
        let finite = [self.t_i, self.transit_delay, self.p_t, self.horizon];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(ScenarioError::Invalid("times and rates must be finite".into()));
        }
        if self.p_t < 0.0 {
            return Err(ScenarioError::Invalid("P_t must be >= 0".into()));
        }
        if self.transit_delay < 0.0 {
            return Err(ScenarioError::Invalid("transit_delay must be >= 0".into()));
        }
        if self.horizon < self.t_i {
            return Err(ScenarioError::Invalid("horizon must not precede t_i".into()));
        }
        match &self.schedule {
            Schedule::Simultaneous => {}
            Schedule::Stagger { window } => {
                if !(window.is_finite() && *window >= 0.0) {
                    return Err(ScenarioError::Invalid("stagger_window must be finite and >= 0".into()));
                }
            }
            Schedule::Custom(offsets) => {
                for k in 0..2 {
                    if offsets[k].len() != sites[k] {
                        return Err(ScenarioError::Invalid(format!("custom schedule for sector {} needs {} offsets", k + 1, sites[k])));
                    }
                    if offsets[k].iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                        return Err(ScenarioError::Invalid("custom offsets must be finite and >= 0".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Activation times of every site, sorted by time then sector then site.
    fn arrivals(&self, sites: [usize; 2]) -> Vec<(f64, SiteRef)> {
        let start = self.t_i + self.transit_delay;
        let mut out = Vec::with_capacity(sites[0] + sites[1]);
        for position in [Position::X1, Position::X2] {
            let count = sites[position.index()];
            for site in 0..count {
                let offset = match &self.schedule {
                    Schedule::Simultaneous => 0.0,
                    Schedule::Stagger { window } => window * site as f64 / count as f64,
                    Schedule::Custom(offsets) => offsets[position.index()][site],
                };
                out.push((start + offset, SiteRef::new(position, site)));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinholeScenario {
    pub amplitudes: Amplitudes,
    /// Photons in each illumination field.
    pub n: u32,
    pub m1: usize,
    pub m2: usize,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumScenario {
    pub amplitudes: Amplitudes,
    pub n: u32,
    /// Kick transferred by a photon from direction 1 (body at `x1`).
    pub p1: Momentum,
    /// Kick transferred by a photon from direction 2 (body at `x2`).
    pub p2: Momentum,
    /// Initial centre-of-mass momentum of each molecule.
    pub molecules: Vec<Momentum>,
    /// Apply each kick as its `x` then `y` component.
    pub decompose: bool,
    pub timing: Timing,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Pinhole(PinholeScenario),
    Momentum(MomentumScenario),
}

impl From<PinholeScenario> for Scenario {
    fn from(s: PinholeScenario) -> Self {
        Scenario::Pinhole(s)
    }
}

impl From<MomentumScenario> for Scenario {
    fn from(s: MomentumScenario) -> Self {
        Scenario::Momentum(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalPosition {
    X1,
    X2,
    Unresolved,
}

impl FinalPosition {
    pub fn as_str(self) -> &'static str {
        match self {
            FinalPosition::X1 => "x1",
            FinalPosition::X2 => "x2",
            FinalPosition::Unresolved => "unresolved",
        }
    }
}

impl From<Position> for FinalPosition {
    fn from(p: Position) -> Self {
        match p {
            Position::X1 => FinalPosition::X1,
            Position::X2 => FinalPosition::X2,
        }
    }
}

impl std::fmt::Display for FinalPosition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub index: u64,
    pub reductions: Vec<ReductionEvent>,
    pub final_position: FinalPosition,
    /// Time from the first activation to the first reduction.
    pub first_reduction_time: Option<f64>,
    pub resolved_molecule_count: usize,
}

/// Closed-form localization prediction at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationPrediction {
    pub p_x1: f64,
    pub p_x2: f64,
    pub p_unresolved: f64,
}

/// A fully resolved configuration: surviving position and absorbing sites.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Outcome {
    pub position: Position,
    pub absorbed: Vec<usize>,
}

impl Scenario {
    pub fn amplitudes(&self) -> &Amplitudes {
        match self {
            Scenario::Pinhole(s) => &s.amplitudes,
            Scenario::Momentum(s) => &s.amplitudes,
        }
    }

    pub fn timing(&self) -> &Timing {
        match self {
            Scenario::Pinhole(s) => &s.timing,
            Scenario::Momentum(s) => &s.timing,
        }
    }

    pub fn timing_mut(&mut self) -> &mut Timing {
        match self {
            Scenario::Pinhole(s) => &mut s.timing,
            Scenario::Momentum(s) => &mut s.timing,
        }
    }

    pub fn photons(&self) -> u32 {
        match self {
            Scenario::Pinhole(s) => s.n,
            Scenario::Momentum(s) => s.n,
        }
    }

    /// Larc sites per sector. A momentum molecule is a site in both.
    pub fn sites(&self) -> [usize; 2] {
        match self {
            Scenario::Pinhole(s) => [s.m1, s.m2],
            Scenario::Momentum(s) => [s.molecules.len(); 2],
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.amplitudes().validate()?;
        if self.photons() < 1 {
            return Err(ScenarioError::Invalid("n must be >= 1".into()));
        }
        match self {
            Scenario::Pinhole(s) => {
                if s.m1 < 1 || s.m2 < 1 {
                    return Err(ScenarioError::Invalid("m1 and m2 must be >= 1".into()));
                }
            }
            Scenario::Momentum(s) => {
                if s.molecules.is_empty() {
                    return Err(ScenarioError::Invalid("molecules must be >= 1".into()));
                }
                if s.p1 == s.p2 {
                    return Err(ScenarioError::Invalid("kicks p1 and p2 must differ".into()));
                }
            }
        }
        self.timing().validate(self.sites())
    }

    /// Larc identifier of a site: sector 1 sites first.
    pub fn larc_id(&self, site: SiteRef) -> LarcId {
        match site.sector {
            Position::X1 => LarcId(site.site),
            Position::X2 => LarcId(self.sites()[0] + site.site),
        }
    }

    pub fn site_of(&self, id: LarcId) -> SiteRef {
        let s1 = self.sites()[0];
        if id.0 < s1 {
            SiteRef::new(Position::X1, id.0)
        } else {
            SiteRef::new(Position::X2, id.0 - s1)
        }
    }

    /// Sorted activation schedule.
    pub fn arrivals(&self) -> Vec<(f64, SiteRef)> {
        self.timing().arrivals(self.sites())
    }

    /// The initial two-position state with every site dormant, plus its
    /// activation schedule.
    pub fn build(&self) -> Result<(ProductState, Vec<(f64, SiteRef)>), ScenarioError> {
        self.validate()?;
        let a = self.amplitudes();
        let state = ProductState::new(a.a1, a.a2, a.b1, a.b2, self.photons(), self.sites())?;
        Ok((state, self.arrivals()))
    }

    /// Probability of each final position at the horizon. Only sectors
    /// present at build time contribute larcs.
    pub fn localization_probability(&self) -> LocalizationPrediction {
        let a = self.amplitudes();
        let t = self.timing();
        let exposure: f64 = self
            .arrivals()
            .iter()
            .filter(|(_, s)| a.position(s.sector).norm_sqr() > 0.0)
            .map(|(time, _)| (t.horizon - time).max(0.0))
            .sum();
        let p_unresolved = (-t.p_t * exposure).exp();
        LocalizationPrediction {
            p_x1: a.a1.norm_sqr() * (1.0 - p_unresolved),
            p_x2: a.a2.norm_sqr() * (1.0 - p_unresolved),
            p_unresolved,
        }
    }

    pub fn run_trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrajectoryRecord, ScenarioError> {
        self.run_trajectory_observed(rng, |_, _| {})
    }

    /// Runs one trajectory, calling `observe` after every reduction.
    pub fn run_trajectory_observed<R, F>(&self, rng: &mut R, mut observe: F) -> Result<TrajectoryRecord, ScenarioError>
    where
        R: Rng + ?Sized,
        F: FnMut(&ProductState, &ReductionEvent),
    {
        let (mut state, arrivals) = self.build()?;
        let timing = self.timing();
        let n = self.photons();
        let mut reductions = Vec::new();
        let mut next = 0;
        let mut t = timing.t_i;
        loop {
            while next < arrivals.len() && arrivals[next].0 <= t {
                state.activate(arrivals[next].1)?;
                next += 1;
            }
            if timing.stop_after_localization && !reductions.is_empty() {
                break;
            }
            let limit = arrivals.get(next).map_or(timing.horizon, |a| a.0.min(timing.horizon));
            match larc::sample_reduction(state.pending(), timing.p_t, t, limit, rng) {
                Some((time, index)) => {
                    let site = state.pending()[index];
                    let weights = state.class_weights(site)?;
                    let outcome = larc::select_outcome(weights, rng.random::<f64>());
                    let step = state.reduce(site, outcome)?;
                    let event = ReductionEvent {
                        time,
                        larc: self.larc_id(site),
                        outcome,
                        tuple: outcome.tuple(n),
                        pre_entropy: step.pre_entropy,
                        post_entropy: step.post_entropy,
                    };
                    observe(&state, &event);
                    reductions.push(event);
                    t = time;
                }
                None if limit < timing.horizon => t = limit,
                None => break,
            }
        }
        Ok(self.record(&state, &arrivals, reductions))
    }

    fn record(&self, state: &ProductState, arrivals: &[(f64, SiteRef)], reductions: Vec<ReductionEvent>) -> TrajectoryRecord {
        let final_position = match (reductions.is_empty(), state.localized()) {
            (false, Some(p)) => p.into(),
            _ => FinalPosition::Unresolved,
        };
        let first_reduction_time = reductions.first().map(|r| r.time - arrivals[0].0);
        TrajectoryRecord {
            seed: 0,
            index: 0,
            reductions,
            final_position,
            first_reduction_time,
            resolved_molecule_count: state.resolved_sites(),
        }
    }

    /// Exact distribution of fully resolved outcomes when every larc is
    /// pending before the first reduction and the horizon is unbounded:
    /// each pending larc triggers next with equal probability and its class
    /// is drawn by weight. Exponential in the number of sites.
    pub fn exact_outcomes(&self) -> Result<BTreeMap<Outcome, f64>, ScenarioError> {
        let (mut state, arrivals) = self.build()?;
        for (_, site) in arrivals {
            state.activate(site)?;
        }
        let mut out = BTreeMap::new();
        enumerate(&state, 1.0, &mut out)?;
        Ok(out)
    }
}

fn enumerate(state: &ProductState, prob: f64, out: &mut BTreeMap<Outcome, f64>) -> Result<(), ScenarioError> {
    let pending = state.pending();
    if pending.is_empty() {
        let position = state
            .localized()
            .ok_or_else(|| ScenarioError::Invalid("no larc left to resolve the position".into()))?;
        let outcome = Outcome {
            position,
            absorbed: state.absorbed_sites(position),
        };
        *out.entry(outcome).or_insert(0.0) += prob;
        return Ok(());
    }
    let share = prob / pending.len() as f64;
    for &site in pending {
        let weights = state.class_weights(site)?;
        for kind in OutcomeKind::ALL {
            let w = weights[kind.index()];
            if w <= 0.0 {
                continue;
            }
            let mut next = state.clone();
            next.reduce(site, kind)?;
            enumerate(&next, share * w, out)?;
        }
    }
    Ok(())
}

/// The same scenario on explicit branches: registered modes, one
/// [`LarcEvent`] per site, and the larc engine for branching and reduction.
#[derive(Debug, Clone)]
pub struct ExplicitModel {
    scenario: Scenario,
    registry: ModeRegistry,
    fields: [ModeId; 2],
    /// Molecule hosting each site, per sector.
    hosts: [Vec<Molecule>; 2],
    /// Centre-of-mass kicks applied by a sector's absorption, in order.
    kicks: [Vec<Momentum>; 2],
    initial: SuperpositionState,
    larcs: Vec<LarcEvent>,
}

impl ExplicitModel {
    pub fn new(scenario: &Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let mut registry = ModeRegistry::new();
        let fields = [
            registry.register_mode("gamma@1", ModeKind::PhotonField)?,
            registry.register_mode("gamma@2", ModeKind::PhotonField)?,
        ];
        let (hosts, kicks, initial_momenta): ([Vec<Molecule>; 2], [Vec<Momentum>; 2], Vec<Momentum>) = match scenario {
            Scenario::Pinhole(s) => {
                let mut patch = |k: usize, m: usize| -> Result<Vec<Molecule>, FockError> {
                    (0..m).map(|j| registry.register_molecule(&format!("{};{}", k, j + 1), false)).collect()
                };
                let hosts = [patch(1, s.m1)?, patch(2, s.m2)?];
                (hosts, [Vec::new(), Vec::new()], vec![Momentum::ZERO; s.m1 + s.m2])
            }
            Scenario::Momentum(s) => {
                let molecules: Vec<Molecule> = (0..s.molecules.len())
                    .map(|j| registry.register_molecule(&format!("{}", j + 1), true))
                    .collect::<Result<_, _>>()?;
                let split = |p: Momentum| {
                    if s.decompose {
                        let (x, y) = p.components();
                        vec![x, y]
                    } else {
                        vec![p]
                    }
                };
                ([molecules.clone(), molecules], [split(s.p1), split(s.p2)], s.molecules.clone())
            }
        };

        let a = scenario.amplitudes();
        let n = scenario.photons();
        let all_molecules: Vec<&Molecule> = match scenario {
            Scenario::Pinhole(_) => hosts[0].iter().chain(&hosts[1]).collect(),
            Scenario::Momentum(_) => hosts[0].iter().collect(),
        };
        let mut branches = Vec::new();
        for position in [Position::X1, Position::X2] {
            let mut b = Branch::new(a.position(position), position).with_occupation(fields[position.index()], n)?;
            for (molecule, p) in all_molecules.iter().zip(&initial_momenta) {
                b = b.with_ground_molecule(molecule, *p)?;
            }
            branches.push(b);
        }
        let initial = SuperpositionState::new(branches).merge_and_prune();

        let mut larcs = Vec::new();
        for position in [Position::X1, Position::X2] {
            let k = position.index();
            for (site, molecule) in hosts[k].iter().enumerate() {
                let com_kicks: Vec<(ModeId, Momentum)> = match molecule.com {
                    Some(com) => kicks[k].iter().map(|&p| (com, p)).collect(),
                    None => Vec::new(),
                };
                let id = scenario.larc_id(SiteRef::new(position, site));
                larcs.push(LarcEvent::absorption(id, site, fields[k], molecule.orbitals, &com_kicks, n));
            }
        }
        Ok(Self {
            scenario: scenario.clone(),
            registry,
            fields,
            hosts,
            kicks,
            initial,
            larcs,
        })
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    pub fn field(&self, position: Position) -> ModeId {
        self.fields[position.index()]
    }

    /// Molecule hosting a site.
    pub fn host(&self, site: SiteRef) -> &Molecule {
        &self.hosts[site.sector.index()][site.site]
    }

    /// Total kick a sector's absorption transfers.
    pub fn kick(&self, position: Position) -> Momentum {
        self.kicks[position.index()].iter().fold(Momentum::ZERO, |acc, &p| acc + p)
    }

    pub fn initial_state(&self) -> &SuperpositionState {
        &self.initial
    }

    pub fn larc(&self, id: LarcId) -> &LarcEvent {
        &self.larcs[id.0]
    }

    /// Explicit branches of a lazy state of the same scenario.
    pub fn expand(&self, state: &ProductState) -> Result<SuperpositionState, ScenarioError> {
        let mut branches = Vec::new();
        for config in state.configurations()? {
            let k = config.position.index();
            let mut branch = self
                .initial
                .branches()
                .iter()
                .find(|b| b.position == config.position)
                .cloned()
                .ok_or_else(|| ScenarioError::Invalid("configuration in a sector absent at build".into()))?;
            branch.amplitude = config.amplitude;
            for &site in &config.absorbed {
                let molecule = &self.hosts[k][site];
                branch = branch.shift_down(self.fields[k])?.apply_raising(molecule.orbitals)?;
                if let Some(com) = molecule.com {
                    for &p in &self.kicks[k] {
                        branch = branch.apply_raising_momentum(com, p)?;
                    }
                }
            }
            branches.push(branch);
        }
        Ok(SuperpositionState::new(branches))
    }

    fn activate(&mut self, state: &SuperpositionState, id: LarcId) -> Result<Option<SuperpositionState>, ScenarioError> {
        let event = &mut self.larcs[id.0];
        let field = event.field_mode()?;
        if !state.branches().iter().any(|b| b.carries(field)) {
            return Ok(None);
        }
        let a = self.scenario.amplitudes();
        Ok(Some(larc::branch_on_larc(state, event, a.b1, a.b2)?))
    }

    /// Runs one trajectory on explicit branches with the same random draws
    /// as [`Scenario::run_trajectory_observed`], calling `observe` after
    /// every reduction.
    pub fn run_trajectory_observed<R, F>(&self, rng: &mut R, mut observe: F) -> Result<TrajectoryRecord, ScenarioError>
    where
        R: Rng + ?Sized,
        F: FnMut(&SuperpositionState, &ReductionEvent),
    {
        let mut model = self.clone();
        let scenario = &self.scenario;
        let arrivals = scenario.arrivals();
        let timing = scenario.timing();
        let mut state = self.initial.clone();
        let mut pending: Vec<LarcId> = Vec::new();
        let mut reductions = Vec::new();
        let mut next = 0;
        let mut t = timing.t_i;
        loop {
            while next < arrivals.len() && arrivals[next].0 <= t {
                let id = scenario.larc_id(arrivals[next].1);
                if let Some(s) = model.activate(&state, id)? {
                    state = s;
                    pending.push(id);
                }
                next += 1;
            }
            if timing.stop_after_localization && !reductions.is_empty() {
                break;
            }
            let limit = arrivals.get(next).map_or(timing.horizon, |a| a.0.min(timing.horizon));
            match larc::sample_reduction(&pending, timing.p_t, t, limit, rng) {
                Some((time, index)) => {
                    let id = pending[index];
                    let (reduced, event) = larc::sample_and_reduce(&state, &mut model.larcs[id.0], time, rng)?;
                    state = reduced;
                    let fields_left: Vec<ModeId> = self.fields.iter().copied().filter(|f| state.branches().iter().any(|b| b.carries(*f))).collect();
                    pending.retain(|p| {
                        let larc = &model.larcs[p.0];
                        larc.status == LarcStatus::Pending && larc.field_mode().is_ok_and(|f| fields_left.contains(&f))
                    });
                    observe(&state, &event);
                    reductions.push(event);
                    t = time;
                }
                None if limit < timing.horizon => t = limit,
                None => break,
            }
        }
        let positions: Vec<Position> = state.branches().iter().map(|b| b.position).collect();
        let final_position = match positions.split_first() {
            Some((first, rest)) if !reductions.is_empty() && rest.iter().all(|p| p == first) => (*first).into(),
            _ => FinalPosition::Unresolved,
        };
        let resolved = model.larcs.iter().filter(|l| l.status == LarcStatus::Resolved).count();
        Ok(TrajectoryRecord {
            seed: 0,
            index: 0,
            first_reduction_time: reductions.first().map(|r: &ReductionEvent| r.time - arrivals[0].0),
            reductions,
            final_position,
            resolved_molecule_count: resolved,
        })
    }
}
