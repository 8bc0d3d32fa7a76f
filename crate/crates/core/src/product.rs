//! Lazy product-form superpositions for many-molecule plates.
//!
//! The illuminated plate state has one *sector* per body position. Inside a
//! sector every activated molecule contributes a binary factor
//! `b2 |unabsorbed> + b1 |absorbed>`, so the number of explicit branches
//! grows as `2^m`. This module keeps the factors unexpanded: a sector is its
//! position amplitude, its photon budget, and the status of every site.
//!
//! Factors stay independent only while photons are plentiful. When a patch
//! has fewer photons than activated molecules, a molecule that arrives after
//! the field is exhausted cannot split; the sector's weight is then a sum
//! over absorption paths, computed by a dynamic program over the activation
//! order with the remaining photon count as state. Reductions only restrict
//! the set of configurations, so the same formula serves before and after
//! any number of reductions.
//!
//! All weights are handled as natural logarithms, which keeps plates of
//! `10^4` resolved molecules away from underflow.

use num_complex::Complex64;
use thiserror::Error;

use crate::fock::Position;
use crate::larc::{OutcomeKind, UNIT_TOLERANCE};

/// Explicit expansion refuses states with more pending sites than this.
pub const MAX_EXPANDED_PENDING: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProductError {
    #[error("site {0:?} does not exist")]
    UnknownSite(SiteRef),
    #[error("site {0:?} was already activated")]
    AlreadyActive(SiteRef),
    #[error("site {0:?} has no pending larc")]
    NotPending(SiteRef),
    #[error("outcome {0:?} has zero weight")]
    ImpossibleOutcome(OutcomeKind),
    #[error("{0} pending sites are too many to expand explicitly")]
    TooLarge(usize),
    #[error("invalid amplitudes: {0}")]
    Amplitudes(String),
}

/// A larc site: molecule `site` of the sector at `sector`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteRef {
    pub sector: Position,
    pub site: usize,
}

impl SiteRef {
    pub fn new(sector: Position, site: usize) -> Self {
        Self { sector, site }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteStatus {
    /// Not yet reached by the illumination.
    Dormant,
    /// Superposed between absorbed and unabsorbed; its larc is pending.
    Pending,
    Absorbed,
    Passed,
}

#[derive(Debug, Clone, PartialEq)]
struct Sector {
    amplitude: Complex64,
    sites: Vec<SiteStatus>,
    order: Vec<usize>,
    pending: usize,
    absorbed: usize,
    passed: usize,
}

#[derive(Debug, Clone, Copy)]
struct Factors {
    absorb: f64,
    pass: f64,
}

fn ln_pow(count: usize, x: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * x.ln()
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

impl Sector {
    fn status(&self, site: usize, fixed: Option<(usize, SiteStatus)>) -> SiteStatus {
        match fixed {
            Some((q, s)) if q == site => s,
            _ => self.sites[site],
        }
    }

    /// `ln` of the sum over configurations of the product of per-site
    /// factors; a site reached with no photon left contributes 1 when
    /// unabsorbed and 0 when absorbed.
    fn log_sum(&self, photons: u32, fixed: Option<(usize, SiteStatus)>, f: Factors) -> f64 {
        let active = self.order.len();
        if photons as usize >= active {
            let (mut p, mut a, mut s) = (self.pending, self.absorbed, self.passed);
            if let Some((q, st)) = fixed {
                match (self.sites[q], st) {
                    (SiteStatus::Pending, SiteStatus::Absorbed) => {
                        p -= 1;
                        a += 1;
                    }
                    (SiteStatus::Pending, SiteStatus::Passed) => {
                        p -= 1;
                        s += 1;
                    }
                    _ => {}
                }
            }
            return ln_pow(p, f.absorb + f.pass) + ln_pow(a, f.absorb) + ln_pow(s, f.pass);
        }

        // dp[k]: summed weight of paths with k absorptions so far
        let cap = (photons as usize).min(active);
        let mut dp = vec![0.0f64; cap + 1];
        let mut next = vec![0.0f64; cap + 1];
        dp[0] = 1.0;
        let mut log_scale = 0.0;
        for &site in &self.order {
            let status = self.status(site, fixed);
            next.iter_mut().for_each(|x| *x = 0.0);
            for k in 0..=cap {
                let w = dp[k];
                if w == 0.0 {
                    continue;
                }
                let has_photon = (k as u32) < photons;
                if matches!(status, SiteStatus::Absorbed | SiteStatus::Pending) && has_photon {
                    next[k + 1] += w * f.absorb;
                }
                if matches!(status, SiteStatus::Passed | SiteStatus::Pending) {
                    next[k] += w * if has_photon { f.pass } else { 1.0 };
                }
            }
            std::mem::swap(&mut dp, &mut next);
            let max = dp.iter().copied().fold(0.0, f64::max);
            if max == 0.0 {
                return f64::NEG_INFINITY;
            }
            dp.iter_mut().for_each(|x| *x /= max);
            log_scale += max.ln();
        }
        log_scale + dp.iter().sum::<f64>().ln()
    }
}

/// One configuration of an expanded product state.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    pub position: Position,
    /// Absorbing sites in ascending order.
    pub absorbed: Vec<usize>,
    pub amplitude: Complex64,
}

/// Outcome of one lazy reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LazyReduction {
    pub outcome: OutcomeKind,
    pub weights: [f64; 3],
    pub pre_entropy: f64,
    pub post_entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    sectors: [Option<Sector>; 2],
    absorb: Complex64,
    pass: Complex64,
    photons: u32,
    pending: Vec<SiteRef>,
}

impl ProductState {
    /// Two-position state `a1 |x1> + a2 |x2>` with `sites[k]` dormant
    /// molecules in sector `k` and `photons` quanta in each illumination
    /// field. A sector with zero amplitude is omitted.
    pub fn new(a1: Complex64, a2: Complex64, b1: Complex64, b2: Complex64, photons: u32, sites: [usize; 2]) -> Result<Self, ProductError> {
        let a = a1.norm_sqr() + a2.norm_sqr();
        if (a - 1.0).abs() > UNIT_TOLERANCE {
            return Err(ProductError::Amplitudes(format!("|a1|^2+|a2|^2 = {a}")));
        }
        let b = b1.norm_sqr() + b2.norm_sqr();
        if (b - 1.0).abs() > UNIT_TOLERANCE {
            return Err(ProductError::Amplitudes(format!("|b1|^2+|b2|^2 = {b}")));
        }
        let sector = |amplitude: Complex64, count: usize| {
            (amplitude.norm_sqr() > 0.0).then(|| Sector {
                amplitude,
                sites: vec![SiteStatus::Dormant; count],
                order: Vec::new(),
                pending: 0,
                absorbed: 0,
                passed: 0,
            })
        };
        Ok(Self {
            sectors: [sector(a1, sites[0]), sector(a2, sites[1])],
            absorb: b1,
            pass: b2,
            photons,
            pending: Vec::new(),
        })
    }

    pub fn photons(&self) -> u32 {
        self.photons
    }

    pub fn is_alive(&self, sector: Position) -> bool {
        self.sectors[sector.index()].is_some()
    }

    /// The single surviving position, if only one sector is left.
    pub fn localized(&self) -> Option<Position> {
        match (&self.sectors[0], &self.sectors[1]) {
            (Some(_), None) => Some(Position::X1),
            (None, Some(_)) => Some(Position::X2),
            _ => None,
        }
    }

    pub fn pending(&self) -> &[SiteRef] {
        &self.pending
    }

    pub fn site_status(&self, site: SiteRef) -> Option<SiteStatus> {
        self.sectors[site.sector.index()].as_ref()?.sites.get(site.site).copied()
    }

    pub fn site_count(&self, sector: Position) -> usize {
        self.sectors[sector.index()].as_ref().map_or(0, |s| s.sites.len())
    }

    /// Molecules of surviving sectors whose absorption question is settled.
    pub fn resolved_sites(&self) -> usize {
        self.sectors.iter().flatten().map(|s| s.absorbed + s.passed).sum()
    }

    pub fn absorbed_sites(&self, sector: Position) -> Vec<usize> {
        self.sectors[sector.index()].as_ref().map_or_else(Vec::new, |s| {
            (0..s.sites.len()).filter(|&i| s.sites[i] == SiteStatus::Absorbed).collect()
        })
    }

    fn weight_factors(&self) -> Factors {
        Factors {
            absorb: self.absorb.norm_sqr(),
            pass: self.pass.norm_sqr(),
        }
    }

    fn count_factors(&self) -> Factors {
        Factors {
            absorb: if self.absorb.norm_sqr() > 0.0 { 1.0 } else { 0.0 },
            pass: if self.pass.norm_sqr() > 0.0 { 1.0 } else { 0.0 },
        }
    }

    fn log_sector_weight(&self, index: usize, fixed: Option<(usize, SiteStatus)>) -> f64 {
        match &self.sectors[index] {
            Some(s) => s.amplitude.norm_sqr().ln() + s.log_sum(self.photons, fixed, self.weight_factors()),
            None => f64::NEG_INFINITY,
        }
    }

    fn log_norm(&self) -> f64 {
        log_sum_exp(&[self.log_sector_weight(0, None), self.log_sector_weight(1, None)])
    }

    /// Probability mass on `position`; exactly zero for an eliminated sector.
    pub fn sector_weight(&self, position: Position) -> f64 {
        if !self.is_alive(position) {
            return 0.0;
        }
        (self.log_sector_weight(position.index(), None) - self.log_norm()).exp()
    }

    /// `log2` of the number of configurations with non-zero amplitude.
    pub fn entropy(&self) -> f64 {
        let f = self.count_factors();
        let terms: Vec<f64> = self
            .sectors
            .iter()
            .flatten()
            .map(|s| s.log_sum(self.photons, None, f))
            .collect();
        log_sum_exp(&terms) / std::f64::consts::LN_2
    }

    /// Moves a dormant site into superposition and makes its larc pending.
    /// Returns `false` when the site's sector no longer exists, in which
    /// case no larc forms.
    pub fn activate(&mut self, site: SiteRef) -> Result<bool, ProductError> {
        let Some(sector) = self.sectors[site.sector.index()].as_mut() else {
            return Ok(false);
        };
        match sector.sites.get(site.site) {
            None => return Err(ProductError::UnknownSite(site)),
            Some(SiteStatus::Dormant) => {}
            Some(_) => return Err(ProductError::AlreadyActive(site)),
        }
        sector.sites[site.site] = SiteStatus::Pending;
        sector.order.push(site.site);
        sector.pending += 1;
        self.pending.push(site);
        Ok(true)
    }

    fn require_pending(&self, site: SiteRef) -> Result<(), ProductError> {
        match self.site_status(site) {
            Some(SiteStatus::Pending) => Ok(()),
            _ => Err(ProductError::NotPending(site)),
        }
    }

    /// Outcome-class weights `[absorbed, not absorbed, removed]` for the
    /// pending larc at `site`.
    pub fn class_weights(&self, site: SiteRef) -> Result<[f64; 3], ProductError> {
        self.require_pending(site)?;
        let own = site.sector.index();
        let logs = [
            self.log_sector_weight(own, Some((site.site, SiteStatus::Absorbed))),
            self.log_sector_weight(own, Some((site.site, SiteStatus::Passed))),
            self.log_sector_weight(1 - own, None),
        ];
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw = logs.map(|l| if l == f64::NEG_INFINITY { 0.0 } else { (l - max).exp() });
        let total: f64 = raw.iter().sum();
        Ok(raw.map(|r| r / total))
    }

    /// Applies the chosen reduction for the larc at `site`. Larcs of an
    /// eliminated sector leave the pending set with it.
    pub fn reduce(&mut self, site: SiteRef, outcome: OutcomeKind) -> Result<LazyReduction, ProductError> {
        let weights = self.class_weights(site)?;
        if weights[outcome.index()] <= 0.0 {
            return Err(ProductError::ImpossibleOutcome(outcome));
        }
        let pre_entropy = self.entropy();
        let own = site.sector.index();
        match outcome {
            OutcomeKind::Absorbed | OutcomeKind::NotAbsorbed => {
                let sector = self.sectors[own].as_mut().expect("pending site has a sector");
                sector.pending -= 1;
                if outcome == OutcomeKind::Absorbed {
                    sector.absorbed += 1;
                    sector.sites[site.site] = SiteStatus::Absorbed;
                } else {
                    sector.passed += 1;
                    sector.sites[site.site] = SiteStatus::Passed;
                }
                self.sectors[1 - own] = None;
            }
            OutcomeKind::RemovedWithoutAbsorption => {
                self.sectors[own] = None;
            }
        }
        let sectors = &self.sectors;
        self.pending
            .retain(|s| *s != site && sectors[s.sector.index()].is_some());
        Ok(LazyReduction {
            outcome,
            weights,
            pre_entropy,
            post_entropy: self.entropy(),
        })
    }

    /// Normalized amplitude of one configuration. Sites outside the
    /// activated set or contradicting a resolution give exactly zero.
    pub fn amplitude(&self, position: Position, absorbed: &[usize]) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        let Some(sector) = &self.sectors[position.index()] else {
            return zero;
        };
        let mut flags = vec![false; sector.sites.len()];
        for &i in absorbed {
            match flags.get_mut(i) {
                Some(f) => *f = true,
                None => return zero,
            }
        }
        for (i, status) in sector.sites.iter().enumerate() {
            let bad = match status {
                SiteStatus::Dormant | SiteStatus::Passed => flags[i],
                SiteStatus::Absorbed => !flags[i],
                SiteStatus::Pending => false,
            };
            if bad {
                return zero;
            }
        }
        let mut log_mag = sector.amplitude.norm().ln();
        let mut phase = Complex64::new(1.0, 0.0);
        let mut left = self.photons;
        for &i in &sector.order {
            let factor = if left == 0 {
                if flags[i] {
                    return zero;
                }
                continue;
            } else if flags[i] {
                left -= 1;
                self.absorb
            } else {
                self.pass
            };
            if factor.norm_sqr() == 0.0 {
                return zero;
            }
            log_mag += factor.norm().ln();
            phase *= factor / factor.norm();
        }
        phase * (log_mag - 0.5 * self.log_norm()).exp()
    }

    /// Every configuration with non-zero amplitude, normalized.
    pub fn configurations(&self) -> Result<Vec<Configuration>, ProductError> {
        let pending: usize = self.sectors.iter().flatten().map(|s| s.pending).sum();
        if pending > MAX_EXPANDED_PENDING {
            return Err(ProductError::TooLarge(pending));
        }
        let mut out = Vec::new();
        for position in [Position::X1, Position::X2] {
            let Some(sector) = &self.sectors[position.index()] else {
                continue;
            };
            let fixed: Vec<usize> = (0..sector.sites.len())
                .filter(|&i| sector.sites[i] == SiteStatus::Absorbed)
                .collect();
            let open: Vec<usize> = sector.order.iter().copied().filter(|&i| sector.sites[i] == SiteStatus::Pending).collect();
            for mask in 0u32..(1 << open.len()) {
                let mut absorbed = fixed.clone();
                absorbed.extend(open.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, &i)| i));
                absorbed.sort_unstable();
                let amplitude = self.amplitude(position, &absorbed);
                if amplitude.norm_sqr() > 0.0 {
                    out.push(Configuration {
                        position,
                        absorbed,
                        amplitude,
                    });
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn plate(a1: f64, b1: f64, n: u32, m: usize) -> ProductState {
        let a2 = (1.0 - a1 * a1).sqrt();
        let b2 = (1.0 - b1 * b1).sqrt();
        let mut s = ProductState::new(c(a1), c(a2), c(b1), c(b2), n, [m, m]).unwrap();
        for site in 0..m {
            s.activate(SiteRef::new(Position::X1, site)).unwrap();
            s.activate(SiteRef::new(Position::X2, site)).unwrap();
        }
        s
    }

    #[test]
    fn zero_amplitude_sector_is_dropped() {
        let s = ProductState::new(c(1.0), c(0.0), c(0.6), c(0.8), 3, [2, 2]).unwrap();
        assert!(!s.is_alive(Position::X2));
        assert_eq!(s.localized(), Some(Position::X1));
    }

    #[test]
    fn activation_is_skipped_in_a_dead_sector() {
        let mut s = ProductState::new(c(1.0), c(0.0), c(0.6), c(0.8), 3, [1, 1]).unwrap();
        assert_eq!(s.activate(SiteRef::new(Position::X2, 0)), Ok(false));
        assert_eq!(s.activate(SiteRef::new(Position::X1, 0)), Ok(true));
        assert_eq!(
            s.activate(SiteRef::new(Position::X1, 0)),
            Err(ProductError::AlreadyActive(SiteRef::new(Position::X1, 0)))
        );
        assert_eq!(
            s.activate(SiteRef::new(Position::X1, 5)),
            Err(ProductError::UnknownSite(SiteRef::new(Position::X1, 5)))
        );
    }

    #[test]
    fn weights_factorize_with_plentiful_photons() {
        let s = plate(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 1000, 100);
        for site in [0, 17, 99] {
            let w = s.class_weights(SiteRef::new(Position::X1, site)).unwrap();
            for (got, want) in w.iter().zip([0.25, 0.25, 0.5]) {
                assert!((got - want).abs() < 1e-12);
            }
        }
        assert!((s.sector_weight(Position::X1) - 0.5).abs() < 1e-12);
        assert!((s.entropy() - 101.0).abs() < 1e-9);
    }

    #[test]
    fn photon_shortage_matches_hand_enumeration() {
        // n = 1, two molecules per patch, both in superposition:
        // sector 1 paths: A? -> (absorb, b1) then B sees no photon -> 1
        //                 A passes (b2) then B absorbs (b1) or passes (b2)
        // configs: {A}: a1 b1, {B}: a1 b2 b1, {}: a1 b2 b2
        let (a1, b1) = (0.6, 0.6);
        let (a2, b2) = (0.8, 0.8);
        let s = plate(a1, b1, 1, 2);
        let cfg = s.configurations().unwrap();
        let x1: Vec<_> = cfg.iter().filter(|c| c.position == Position::X1).collect();
        assert_eq!(x1.len(), 3);
        let norm = a1 * a1 * (b1 * b1 + b2 * b2 * b1 * b1 + b2 * b2 * b2 * b2) + a2 * a2 * (b1 * b1 + b2 * b2 * b1 * b1 + b2 * b2 * b2 * b2);
        let want_a = a1 * b1 / norm.sqrt();
        let got_a = s.amplitude(Position::X1, &[0]).re;
        assert!((got_a - want_a).abs() < 1e-14);
        assert_eq!(s.amplitude(Position::X1, &[0, 1]), c(0.0));
        let total: f64 = cfg.iter().map(|c| c.amplitude.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-12);

        // absorbed weight at A: a1^2 b1^2 / norm
        let w = s.class_weights(SiteRef::new(Position::X1, 0)).unwrap();
        assert!((w[0] - a1 * a1 * b1 * b1 / norm).abs() < 1e-14);
    }

    #[test]
    fn reductions_eliminate_sectors_and_their_larcs() {
        let mut s = plate(0.6, 0.6, 10, 3);
        assert_eq!(s.pending().len(), 6);
        let r = s.reduce(SiteRef::new(Position::X1, 1), OutcomeKind::Absorbed).unwrap();
        assert!(r.post_entropy <= r.pre_entropy);
        assert_eq!(s.localized(), Some(Position::X1));
        assert_eq!(s.sector_weight(Position::X2), 0.0);
        assert_eq!(s.pending().len(), 2);
        assert_eq!(s.amplitude(Position::X2, &[]), c(0.0));
        assert_eq!(s.amplitude(Position::X1, &[0]), c(0.0));
        let w = s.class_weights(SiteRef::new(Position::X1, 0)).unwrap();
        assert!((w[0] - 0.36).abs() < 1e-12 && (w[1] - 0.64).abs() < 1e-12 && w[2] == 0.0);

        let mut s = plate(0.6, 0.6, 10, 3);
        s.reduce(SiteRef::new(Position::X1, 0), OutcomeKind::RemovedWithoutAbsorption).unwrap();
        assert_eq!(s.localized(), Some(Position::X2));
        assert!(s.pending().iter().all(|p| p.sector == Position::X2));
        assert_eq!(s.pending().len(), 3);
    }

    #[test]
    fn impossible_and_unknown_reductions_error() {
        let mut s = ProductState::new(c(1.0), c(0.0), c(0.6), c(0.8), 5, [1, 1]).unwrap();
        let site = SiteRef::new(Position::X1, 0);
        assert_eq!(s.class_weights(site), Err(ProductError::NotPending(site)));
        s.activate(site).unwrap();
        assert_eq!(
            s.reduce(site, OutcomeKind::RemovedWithoutAbsorption),
            Err(ProductError::ImpossibleOutcome(OutcomeKind::RemovedWithoutAbsorption))
        );
    }

    #[test]
    fn large_plates_stay_finite() {
        let mut s = plate(0.6, 0.6, 20_000, 10_000);
        for site in 0..2000 {
            s.reduce(SiteRef::new(Position::X1, site), OutcomeKind::NotAbsorbed).unwrap();
        }
        let w = s.class_weights(SiteRef::new(Position::X1, 5000)).unwrap();
        assert!((w[0] - 0.36).abs() < 1e-12);
        assert!(s.entropy().is_finite());

        let mut short = plate(0.6, 0.6, 50, 200);
        for site in 0..150 {
            short.reduce(SiteRef::new(Position::X1, site), OutcomeKind::NotAbsorbed).unwrap();
        }
        let w = short.class_weights(SiteRef::new(Position::X1, 199)).unwrap();
        assert!(w.iter().all(|x| x.is_finite()));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
