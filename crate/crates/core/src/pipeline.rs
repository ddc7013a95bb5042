//! The full generation scheme: unbalanced splitting of the cat beam,
//! displacement of the pair photon, balanced mixing, polarization-resolved
//! detection and heralding, plus parameter sweeps.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use rayon::prelude::*;

use crate::analytic::{self, Amplitude, PairOrderProbabilities};
use crate::detection::{build_scheme_herald, herald_unnormalized, Detectors, HERALD_FLOOR};
use crate::error::{Error, Result};
use crate::fock::{DensityOperator, Ensemble, PureState, Register, C64};
use crate::labels::{A_H, A_V, B, FOUR_H, FOUR_V, TWO_H, TWO_V};
use crate::math::unit_phase;
use crate::metrics::{fidelity, negativity, target_hybrid, Bipartition};
use crate::optics::{
    apply_beam_splitter, apply_displacement, displacement_cutoff, pbs_route_state, polarization_rotation,
    BsParams, DisplacementSpec,
};
use crate::resources::{
    coherent_cutoff, pair_source, scs, squeezed_single_photon, PairSourceSpec, ScsSpec, SpdcWeighting,
    SqueezedPhotonSpec,
};

/// Largest accumulated truncation loss a run may report.
pub const TAIL_BOUND: f64 = 1e-8;
/// Heralding probabilities at or below this count as exactly zero; finite
/// cutoffs leave residues far below it.
pub const ZERO_PROBABILITY: f64 = 1e-16;

pub const DEFAULT_DETECTOR_CUTOFF: usize = 4;
pub const DEFAULT_BEAM_CUTOFF: usize = 14;
/// Tails targeted by automatic cutoffs. The beam mode is a single cheap
/// mode; the four detector modes dominate the state size.
const AUTO_TAIL: f64 = 1e-16;
const DETECTOR_TAIL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScsSource {
    /// Exact cat state of amplitude α_i and phase φ.
    Ideal,
    /// Squeezed single photon standing in for an odd cat.
    Squeezed(SqueezedPhotonSpec),
}

/// Polarization carried by the cat beam and the matching displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DisplacementConvention {
    /// Both beams split equally over H and V.
    Diagonal,
    /// Both beams horizontally polarized.
    ParallelH,
}

/// Optional cutoff overrides; `None` picks a value from the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Cutoffs {
    /// Pair-photon modes A_H, A_V (and the pair side of mode 2).
    pub pair: Option<usize>,
    /// Modes 2, 4, 5 and 6.
    pub detector: Option<usize>,
    /// Output beam B (also holds the cat before splitting).
    pub beam: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedCutoffs {
    pub pair: usize,
    pub detector: usize,
    pub beam: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub amplitude: Amplitude,
    pub t: f64,
    pub phi: f64,
    pub scs_source: ScsSource,
    pub pair_source: PairSourceSpec,
    pub detectors: Detectors,
    pub eta: f64,
    pub convention: DisplacementConvention,
    pub cutoffs: Cutoffs,
}

impl SchemeConfig {
    /// Ideal cat, ideal Bell pair, perfect number-resolving detectors.
    pub fn ideal(amplitude: Amplitude, t: f64) -> Self {
        SchemeConfig {
            amplitude,
            t,
            phi: PI,
            scs_source: ScsSource::Ideal,
            pair_source: PairSourceSpec::IdealChi,
            detectors: Detectors::Pnr,
            eta: 1.0,
            convention: DisplacementConvention::Diagonal,
            cutoffs: Cutoffs::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::invalid(format!("transmissivity {} outside (0, 1]", self.t)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::invalid(format!("detector efficiency {} outside [0, 1]", self.eta)));
        }
        let a = self.amplitude.value();
        if !a.is_finite() || a < 0.0 {
            return Err(Error::invalid(format!("amplitude {a} must be finite and >= 0")));
        }
        match self.scs_source {
            ScsSource::Ideal => {
                ScsSpec::new(self.alpha_i(), self.phi)?;
            }
            ScsSource::Squeezed(spec) => {
                spec.validate()?;
                if unit_phase(self.phi) != C64::new(-1.0, 0.0) {
                    return Err(Error::invalid("a squeezed-photon source only approximates the odd cat (phi = π)"));
                }
            }
        }
        self.pair_source.validate()?;
        if self.cutoffs.pair == Some(0) {
            return Err(Error::invalid("pair cutoff must be >= 1"));
        }
        Ok(())
    }

    pub fn alpha_i(&self) -> f64 {
        self.amplitude.initial(self.t)
    }

    pub fn alpha_f(&self) -> f64 {
        self.amplitude.final_amplitude(self.t)
    }

    /// Displacement amplitude per displaced polarization channel.
    pub fn displacement_amplitude(&self) -> f64 {
        let r = 1.0 - self.t;
        match self.convention {
            DisplacementConvention::Diagonal => (r / 2.0).sqrt() * self.alpha_i(),
            DisplacementConvention::ParallelH => r.sqrt() * self.alpha_i(),
        }
    }

    pub fn resolved_cutoffs(&self) -> ResolvedCutoffs {
        let pair_photons = self.pair_source.max_photons_per_mode();
        let pair = self.cutoffs.pair.unwrap_or(pair_photons);
        let detector = self.cutoffs.detector.unwrap_or_else(|| {
            // the balanced mixer sends up to √2 β of coherent amplitude plus
            // the pair photons into one output port
            let beta = self.displacement_amplitude();
            let mixed = coherent_cutoff(SQRT_2 * beta, DETECTOR_TAIL) + pair_photons + 1;
            DEFAULT_DETECTOR_CUTOFF.max(displacement_cutoff(beta)).max(mixed)
        });
        let beam = self.cutoffs.beam.unwrap_or_else(|| {
            let needed = match self.scs_source {
                ScsSource::Ideal => coherent_cutoff(self.alpha_i(), AUTO_TAIL),
                ScsSource::Squeezed(spec) => spec.fock_cutoff(),
            };
            DEFAULT_BEAM_CUTOFF.max(needed)
        });
        ResolvedCutoffs { pair, detector, beam }
    }

    /// Whether the closed forms for probability and fidelity describe this
    /// configuration.
    pub fn has_closed_form(&self) -> bool {
        matches!(self.scs_source, ScsSource::Ideal)
            && matches!(self.detectors, Detectors::Pnr)
            && matches!(self.convention, DisplacementConvention::Diagonal)
            && matches!(self.pair_source, PairSourceSpec::IdealChi | PairSourceSpec::VacuumMixed { .. })
    }
}

/// Four-detector input state, one branch per pair-source branch.
#[derive(Debug, Clone)]
pub struct Prestate {
    pub ensemble: Ensemble,
    /// Norm lost to Fock cutoffs, summed over every step.
    pub tail_mass: f64,
    /// Norm dropped by the finite squeezed-photon series. Part of the source
    /// model, so not held to [`TAIL_BOUND`].
    pub source_tail_mass: f64,
    pub cutoffs: ResolvedCutoffs,
}

/// Cat side: modes (4H, 4V, B) after the unbalanced splitter and, under the
/// diagonal convention, the polarization split of the reflected arm.
/// Returns the state, the numerical truncation loss and the norm dropped by
/// the finite squeezed-photon series.
fn cat_side(config: &SchemeConfig, cut: ResolvedCutoffs) -> Result<(PureState, f64, f64)> {
    let mut tail = 0.0;
    let mut source_tail = 0.0;
    let source = match config.scs_source {
        ScsSource::Ideal => {
            let cat = scs(B, ScsSpec::new(config.alpha_i(), config.phi)?, cut.beam)?;
            tail += cat.tail_mass;
            cat.state
        }
        ScsSource::Squeezed(spec) => {
            let sq = squeezed_single_photon(B, spec)?;
            source_tail = sq.tail_mass;
            let (state, dropped) = sq.state.with_cutoff(B, cut.beam)?;
            tail += dropped;
            if dropped > 0.0 {
                state.normalized()?
            } else {
                state
            }
        }
    };
    let arms = Register::from_cutoffs(&[(FOUR_H, cut.detector), (FOUR_V, cut.detector)])?;
    let state = PureState::vacuum(arms).tensor(&source)?;
    let split = apply_beam_splitter(&state, FOUR_H, B, BsParams::Transmissivity(config.t))?;
    tail += split.truncation_loss;
    let state = match config.convention {
        DisplacementConvention::Diagonal => {
            let rotated = polarization_rotation(&split.state, FOUR_H, FOUR_V, -FRAC_PI_4)?;
            tail += rotated.truncation_loss;
            rotated.state
        }
        DisplacementConvention::ParallelH => split.state,
    };
    Ok((state, tail, source_tail))
}

/// Prestate for an arbitrary pair ensemble on (A_H, A_V, 2H, 2V).
pub fn prestate_from_pair(config: &SchemeConfig, pair: &Ensemble) -> Result<Prestate> {
    config.validate()?;
    let cut = config.resolved_cutoffs();
    let (cat, mut tail, source_tail) = cat_side(config, cut)?;

    let beta = config.displacement_amplitude();
    let displaced: Vec<&str> = match config.convention {
        DisplacementConvention::Diagonal => vec![TWO_H, TWO_V],
        DisplacementConvention::ParallelH => vec![TWO_H],
    };
    let mut worst_branch_loss = 0.0f64;
    let joint = pair.map_states(|s| {
        let (s, d1) = s.with_cutoff(TWO_H, cut.detector)?;
        let (s, d2) = s.with_cutoff(TWO_V, cut.detector)?;
        let mut loss = d1 + d2;
        let mut s = s;
        for mode in &displaced {
            let before = s.norm_sqr();
            s = apply_displacement(&s, &DisplacementSpec::new(*mode, C64::new(beta, 0.0)))?;
            loss += (before - s.norm_sqr()).max(0.0);
        }
        let mut s = s.tensor(&cat)?;
        for (arm, photon) in [(FOUR_H, TWO_H), (FOUR_V, TWO_V)] {
            let mixed = apply_beam_splitter(&s, arm, photon, BsParams::fifty_fifty())?;
            loss += mixed.truncation_loss;
            s = mixed.state;
        }
        for (from, to) in [(TWO_H, "5H"), (TWO_V, "5V"), (FOUR_H, "6H"), (FOUR_V, "6V")] {
            s = s.relabel(from, to)?;
        }
        s = pbs_route_state(&s, "5")?;
        s = pbs_route_state(&s, "6")?;
        worst_branch_loss = worst_branch_loss.max(loss);
        Ok(s)
    })?;
    tail += worst_branch_loss;
    if tail > TAIL_BOUND {
        return Err(Error::Truncation {
            mass: tail,
            bound: TAIL_BOUND,
            context: format!("prestate with cutoffs {cut:?}"),
        });
    }
    Ok(Prestate {
        ensemble: joint,
        tail_mass: tail,
        source_tail_mass: source_tail,
        cutoffs: cut,
    })
}

pub fn build_prestate(config: &SchemeConfig) -> Result<Prestate> {
    config.validate()?;
    let cut = config.resolved_cutoffs();
    let pair = pair_source(config.pair_source, cut.pair)?;
    prestate_from_pair(config, &pair)
}

/// Heralded but unnormalized output of one prestate branch.
#[derive(Debug, Clone)]
pub struct BranchOutcome {
    pub weight: f64,
    /// Unit-weight operator for the first herald pattern.
    pub direct: DensityOperator,
    /// Unit-weight operator for the flipped pattern, after the A bit flip.
    pub flipped: DensityOperator,
}

impl BranchOutcome {
    /// Outcome probability of this branch alone (both patterns).
    pub fn probability(&self) -> f64 {
        self.direct.trace() + self.flipped.trace()
    }
}

pub fn herald_branches(config: &SchemeConfig, prestate: &Prestate) -> Result<Vec<BranchOutcome>> {
    let reg = prestate.ensemble.register();
    let direct_spec = build_scheme_herald(reg, config.detectors, config.eta, false)?;
    let flipped_spec = build_scheme_herald(reg, config.detectors, config.eta, true)?;
    prestate
        .ensemble
        .branches()
        .iter()
        .map(|(w, s)| {
            let single = Ensemble::pure(s.clone());
            let (direct, _) = herald_unnormalized(&single, &direct_spec)?;
            let (flipped, _) = herald_unnormalized(&single, &flipped_spec)?;
            Ok(BranchOutcome {
                weight: *w,
                direct,
                flipped: flipped.swap_modes(A_H, A_V)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Weighted probabilities of the direct and flipped herald patterns.
    pub pattern_probabilities: [f64; 2],
    /// Unit-weight heralding probability of each source branch.
    pub branch_probabilities: Vec<f64>,
    pub branch_weights: Vec<f64>,
    pub tail_mass: f64,
    pub source_tail_mass: f64,
    /// Largest elementwise difference between the two normalized
    /// pattern outputs after the bit flip.
    pub pattern_state_difference: f64,
    /// Numeric total probability over the printed closed form.
    pub printed_probability_ratio: Option<f64>,
    pub analytic_probability: Option<f64>,
    pub analytic_fidelity: Option<f64>,
    pub p_vac: Option<f64>,
    pub p_chi: Option<f64>,
    pub p_phi2: Option<f64>,
    pub cutoffs: Option<ResolvedCutoffs>,
}

#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub probability_total: f64,
    /// Normalized state of (A_H, A_V, B).
    pub post_state: DensityOperator,
    pub fidelity: f64,
    pub negativity: f64,
    pub diagnostics: Diagnostics,
}

fn combine(outcomes: &[BranchOutcome]) -> Result<(DensityOperator, [f64; 2])> {
    let mut acc: Option<DensityOperator> = None;
    let mut patterns = [0.0, 0.0];
    for o in outcomes {
        patterns[0] += o.weight * o.direct.trace();
        patterns[1] += o.weight * o.flipped.trace();
        let part = o.direct.plus(&o.flipped)?.scaled(o.weight);
        acc = Some(match acc {
            None => part,
            Some(a) => a.plus(&part)?,
        });
    }
    acc.map(|a| (a, patterns)).ok_or_else(|| Error::invalid("no source branches"))
}

fn pattern_difference(outcomes: &[BranchOutcome]) -> Result<f64> {
    let mut direct: Option<DensityOperator> = None;
    let mut flipped: Option<DensityOperator> = None;
    for o in outcomes {
        let d = o.direct.scaled(o.weight);
        let f = o.flipped.scaled(o.weight);
        direct = Some(match direct {
            None => d,
            Some(a) => a.plus(&d)?,
        });
        flipped = Some(match flipped {
            None => f,
            Some(a) => a.plus(&f)?,
        });
    }
    match (direct, flipped) {
        (Some(d), Some(f)) if d.trace() > HERALD_FLOOR && f.trace() > HERALD_FLOOR => {
            let diff = d.normalized()?.matrix() - f.normalized()?.matrix();
            Ok(diff.iter().map(|z| z.norm()).fold(0.0, f64::max))
        }
        _ => Ok(f64::NAN),
    }
}

fn finish(config: &SchemeConfig, prestate: &Prestate, outcomes: &[BranchOutcome]) -> Result<SchemeResult> {
    let (rho, patterns) = combine(outcomes)?;
    let probability_total = rho.trace();
    if !(probability_total > HERALD_FLOOR) {
        return Err(Error::HeraldImpossible(probability_total));
    }
    let post_state = rho.scaled(1.0 / probability_total);
    let target = target_hybrid(config.alpha_f(), config.phi, post_state.register())?;
    let fid = fidelity(&post_state, &target)?;
    let neg = negativity(&post_state, &Bipartition::qubit_vs_beam(post_state.register())?)?;

    let mut diag = Diagnostics {
        pattern_probabilities: patterns,
        branch_probabilities: outcomes.iter().map(BranchOutcome::probability).collect(),
        branch_weights: outcomes.iter().map(|o| o.weight).collect(),
        tail_mass: prestate.tail_mass,
        source_tail_mass: prestate.source_tail_mass,
        pattern_state_difference: pattern_difference(outcomes)?,
        cutoffs: Some(prestate.cutoffs),
        ..Diagnostics::default()
    };
    if config.has_closed_form() {
        let z = match config.pair_source {
            PairSourceSpec::VacuumMixed { z } => z,
            _ => 1.0,
        };
        let printed = z * analytic::p_tot_eta_printed(config.alpha_f(), config.t, config.eta, config.phi)?;
        if printed > 0.0 {
            diag.printed_probability_ratio = Some(probability_total / printed);
        }
        diag.analytic_probability = Some(z * analytic::p_tot_eta(config.alpha_f(), config.t, config.eta, config.phi)?);
        diag.analytic_fidelity = Some(analytic::fidelity_eta(config.alpha_f(), config.t, config.eta)?);
    }
    if let PairSourceSpec::Spdc { .. } = config.pair_source {
        // branches are the pair orders present with nonzero weight, in order
        let orders = spdc_order_indices(config);
        for (k, n) in orders.iter().enumerate() {
            let p = diag.branch_probabilities[k];
            match n {
                0 => diag.p_vac = Some(p),
                1 => diag.p_chi = Some(p),
                2 => diag.p_phi2 = Some(p),
                _ => {}
            }
        }
    }
    Ok(SchemeResult {
        probability_total,
        post_state,
        fidelity: fid,
        negativity: neg,
        diagnostics: diag,
    })
}

fn spdc_order_indices(config: &SchemeConfig) -> Vec<usize> {
    match config.pair_source {
        PairSourceSpec::Spdc {
            lambda,
            order_max,
            weighting,
        } => crate::resources::spdc_order_weights(lambda, order_max, weighting)
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(n, _)| n)
            .collect(),
        _ => Vec::new(),
    }
}

pub fn run_scheme(config: &SchemeConfig) -> Result<SchemeResult> {
    let prestate = build_prestate(config)?;
    let outcomes = herald_branches(config, &prestate)?;
    finish(config, &prestate, &outcomes)
}

/// Per-order heralding results of a down-conversion source, independent of λ.
#[derive(Debug, Clone)]
pub struct SpdcDecomposition {
    pub probabilities: PairOrderProbabilities,
    /// Fidelity of the state heralded from the one-pair input alone.
    pub f_chi: f64,
    pub tail_mass: f64,
    orders: Vec<BranchOutcome>,
    alpha_f: f64,
    phi: f64,
}

/// Scalars of a down-conversion source at one interaction strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdcPoint {
    pub lambda: f64,
    /// Expanded effective fidelity.
    pub f_eff: f64,
    /// Expanded total probability.
    pub p_tot: f64,
    /// Unexpanded forms under the requested weighting.
    pub f_eff_weighted: f64,
    pub p_tot_weighted: f64,
}

impl SpdcDecomposition {
    pub fn at(&self, lambda: f64, weighting: SpdcWeighting) -> Result<SpdcPoint> {
        Ok(SpdcPoint {
            lambda,
            f_eff: analytic::f_eff_expansion(self.probabilities, lambda, self.f_chi)?,
            p_tot: analytic::p_tot_expansion(self.probabilities, lambda)?,
            f_eff_weighted: analytic::f_eff_weighted(self.probabilities, lambda, self.f_chi, weighting)?,
            p_tot_weighted: analytic::p_tot_weighted(self.probabilities, lambda, weighting)?,
        })
    }

    /// Heralded state of the order mixture at λ, normalized.
    pub fn state_at(&self, lambda: f64, weighting: SpdcWeighting) -> Result<DensityOperator> {
        let weights = analytic::order_weights(lambda, weighting)?;
        let weighted: Vec<BranchOutcome> = self
            .orders
            .iter()
            .zip(weights)
            .map(|(o, w)| BranchOutcome {
                weight: w,
                ..o.clone()
            })
            .collect();
        let (rho, _) = combine(&weighted)?;
        rho.normalized()
    }

    /// Fidelity of [`Self::state_at`] to the target, computed from the state.
    pub fn fidelity_at(&self, lambda: f64, weighting: SpdcWeighting) -> Result<f64> {
        let rho = self.state_at(lambda, weighting)?;
        let target = target_hybrid(self.alpha_f, self.phi, rho.register())?;
        fidelity(&rho, &target)
    }
}

/// Herald the vacuum, one-pair and two-pair inputs separately.
pub fn spdc_decomposition(config: &SchemeConfig) -> Result<SpdcDecomposition> {
    let order_max = match config.pair_source {
        PairSourceSpec::Spdc { order_max, .. } => order_max,
        _ => return Err(Error::invalid("SPDC decomposition needs a down-conversion pair source")),
    };
    if order_max < 2 {
        return Err(Error::invalid("SPDC decomposition needs order_max >= 2"));
    }
    config.validate()?;
    let cut = config.resolved_cutoffs();
    let mut pair = Ensemble::empty(Register::from_cutoffs(&[
        (A_H, cut.pair),
        (A_V, cut.pair),
        (TWO_H, cut.pair),
        (TWO_V, cut.pair),
    ])?);
    for n in 0..=2 {
        pair.push(1.0, crate::resources::pair_order(n, cut.pair)?)?;
    }
    let prestate = prestate_from_pair(config, &pair)?;
    let orders = herald_branches(config, &prestate)?;
    let p: Vec<f64> = orders.iter().map(BranchOutcome::probability).collect();
    let probabilities = PairOrderProbabilities {
        p_vac: p[0],
        p_chi: p[1],
        p_phi2: p[2],
    };
    let chi = &orders[1];
    let rho_chi = chi.direct.plus(&chi.flipped)?;
    if !(rho_chi.trace() > HERALD_FLOOR) {
        return Err(Error::HeraldImpossible(rho_chi.trace()));
    }
    let rho_chi = rho_chi.normalized()?;
    let target = target_hybrid(config.alpha_f(), config.phi, rho_chi.register())?;
    let f_chi = fidelity(&rho_chi, &target)?;
    Ok(SpdcDecomposition {
        probabilities,
        f_chi,
        tail_mass: prestate.tail_mass,
        orders,
        alpha_f: config.alpha_f(),
        phi: config.phi,
    })
}

/// Parameters a sweep may vary, in canonical (row-ordering) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepParam {
    T,
    Eta,
    AlphaF,
    Lambda,
    S,
    Z,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::T,
        SweepParam::Eta,
        SweepParam::AlphaF,
        SweepParam::Lambda,
        SweepParam::S,
        SweepParam::Z,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::T => "t",
            SweepParam::Eta => "eta",
            SweepParam::AlphaF => "alpha_f",
            SweepParam::Lambda => "lambda",
            SweepParam::S => "s",
            SweepParam::Z => "z",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        SweepParam::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Copy of `config` with this parameter set to `value`.
    pub fn apply(&self, config: &SchemeConfig, value: f64) -> Result<SchemeConfig> {
        let mut c = config.clone();
        match self {
            SweepParam::T => c.t = value,
            SweepParam::Eta => c.eta = value,
            SweepParam::AlphaF => c.amplitude = Amplitude::Final(value),
            SweepParam::Lambda => match &mut c.pair_source {
                PairSourceSpec::Spdc { lambda, .. } => *lambda = value,
                _ => return Err(Error::invalid("sweeping lambda needs a down-conversion pair source")),
            },
            SweepParam::S => match &mut c.scs_source {
                ScsSource::Squeezed(spec) => spec.s = value,
                ScsSource::Ideal => return Err(Error::invalid("sweeping s needs a squeezed-photon source")),
            },
            SweepParam::Z => match &mut c.pair_source {
                PairSourceSpec::VacuumMixed { z } => *z = value,
                _ => return Err(Error::invalid("sweeping z needs a vacuum-mixed pair source")),
            },
        }
        Ok(c)
    }
}

/// Grid axes; values are sorted and deduplicated on construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepGrid {
    axes: Vec<(SweepParam, Vec<f64>)>,
}

impl SweepGrid {
    pub fn new(axes: Vec<(SweepParam, Vec<f64>)>) -> Result<Self> {
        let mut axes = axes;
        axes.sort_by_key(|(p, _)| *p);
        for w in axes.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!("sweep axis `{}` given twice", w[0].0.name())));
            }
        }
        for (p, values) in axes.iter_mut() {
            if values.is_empty() {
                return Err(Error::invalid(format!("sweep axis `{}` has no values", p.name())));
            }
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("sweep axis `{}` has non-finite value {v}", p.name())));
            }
            values.sort_by(|a, b| a.total_cmp(b));
            values.dedup();
        }
        if axes.is_empty() {
            return Err(Error::invalid("sweep grid has no axes"));
        }
        Ok(SweepGrid { axes })
    }

    pub fn axes(&self) -> &[(SweepParam, Vec<f64>)] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in lexicographic order over the canonical axis order.
    pub fn points(&self) -> Vec<Vec<(SweepParam, f64)>> {
        let mut out = vec![Vec::new()];
        for (p, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    values.iter().map(move |v| {
                        let mut row = prefix.clone();
                        row.push((*p, *v));
                        row
                    })
                })
                .collect();
        }
        out
    }
}

/// Scalar outputs of one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMetrics {
    pub fidelity: f64,
    pub probability_total: f64,
    pub negativity: f64,
    pub p_vac: Option<f64>,
    pub p_chi: Option<f64>,
    pub p_phi2: Option<f64>,
    pub tail_mass: f64,
}

impl From<&SchemeResult> for RowMetrics {
    fn from(r: &SchemeResult) -> Self {
        RowMetrics {
            fidelity: r.fidelity,
            probability_total: r.probability_total,
            negativity: r.negativity,
            p_vac: r.diagnostics.p_vac,
            p_chi: r.diagnostics.p_chi,
            p_phi2: r.diagnostics.p_phi2,
            tail_mass: r.diagnostics.tail_mass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub params: Vec<(SweepParam, f64)>,
    pub outcome: std::result::Result<RowMetrics, Error>,
}

pub fn config_at(base: &SchemeConfig, point: &[(SweepParam, f64)]) -> Result<SchemeConfig> {
    point.iter().try_fold(base.clone(), |c, (p, v)| p.apply(&c, *v))
}

/// Evaluate labelled configurations in parallel, keeping input order.
pub fn run_points(points: Vec<(Vec<(SweepParam, f64)>, SchemeConfig)>) -> Vec<SweepRow> {
    points
        .into_par_iter()
        .map(|(params, config)| SweepRow {
            params,
            outcome: run_scheme(&config).map(|r| RowMetrics::from(&r)),
        })
        .collect()
}

/// Evaluate every grid point (in parallel) and return rows in grid order.
/// Failures are kept as row-level errors.
pub fn sweep(base: &SchemeConfig, grid: &SweepGrid) -> Vec<SweepRow> {
    grid.points()
        .into_par_iter()
        .map(|point| {
            let outcome = config_at(base, &point).and_then(|c| run_scheme(&c)).map(|r| RowMetrics::from(&r));
            SweepRow { params: point, outcome }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ideal_scheme_reaches_the_target() {
        let r = run_scheme(&SchemeConfig::ideal(Amplitude::Initial(1.0), 0.75)).unwrap();
        assert!(r.fidelity > 1.0 - 1e-8, "{}", r.fidelity);
        assert!((r.post_state.trace() - 1.0).abs() < 1e-12);
        let ratio = r.diagnostics.printed_probability_ratio.unwrap();
        assert!((ratio - analytic::PRINTED_PROBABILITY_FACTOR).abs() < 1e-9, "{ratio}");
        assert!(r.diagnostics.pattern_state_difference < 1e-9);
        let [p1, p2] = r.diagnostics.pattern_probabilities;
        assert!((p1 - p2).abs() < 1e-10 * p1);
    }

    #[test]
    fn parallel_convention_fails_the_target() {
        let mut c = SchemeConfig::ideal(Amplitude::Initial(1.0), 0.75);
        c.convention = DisplacementConvention::ParallelH;
        match run_scheme(&c) {
            Ok(r) => assert!(r.fidelity < 0.9),
            Err(Error::HeraldImpossible(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn cutoff_defaults() {
        let c = SchemeConfig::ideal(Amplitude::Final(1.0), 0.99);
        let cut = c.resolved_cutoffs();
        assert_eq!(cut.pair, 1);
        assert!(cut.detector >= DEFAULT_DETECTOR_CUTOFF);
        assert!(cut.beam >= DEFAULT_BEAM_CUTOFF);
        let mut spdc = c.clone();
        spdc.pair_source = PairSourceSpec::Spdc {
            lambda: 0.02,
            order_max: 2,
            weighting: SpdcWeighting::Geometric,
        };
        assert_eq!(spdc.resolved_cutoffs().pair, 2);
        assert_eq!(spdc.resolved_cutoffs().detector, cut.detector + 1);
    }

    #[test]
    fn invalid_configs() {
        let mut c = SchemeConfig::ideal(Amplitude::Initial(1.0), 1.5);
        assert!(matches!(run_scheme(&c), Err(Error::Invalid(_))));
        c.t = 0.9;
        c.eta = -0.1;
        assert!(matches!(run_scheme(&c), Err(Error::Invalid(_))));
        c.eta = 1.0;
        c.scs_source = ScsSource::Squeezed(SqueezedPhotonSpec::new(0.2));
        c.phi = 0.0;
        assert!(matches!(run_scheme(&c), Err(Error::Invalid(_))));
    }

    #[test]
    fn forced_truncation_is_reported() {
        let mut c = SchemeConfig::ideal(Amplitude::Initial(3.0), 0.9);
        c.cutoffs.beam = Some(5);
        assert!(matches!(run_scheme(&c), Err(Error::CutoffTooSmall { .. })));
    }

    #[test]
    fn grid_order_is_lexicographic() {
        let g = SweepGrid::new(vec![(SweepParam::Eta, vec![0.9, 0.7, 0.9]), (SweepParam::T, vec![0.99, 0.9])]).unwrap();
        assert_eq!(g.len(), 4);
        let pts = g.points();
        assert_eq!(pts[0], vec![(SweepParam::T, 0.9), (SweepParam::Eta, 0.7)]);
        assert_eq!(pts[1], vec![(SweepParam::T, 0.9), (SweepParam::Eta, 0.9)]);
        assert_eq!(pts[3], vec![(SweepParam::T, 0.99), (SweepParam::Eta, 0.9)]);
        assert!(SweepGrid::new(vec![(SweepParam::T, vec![])]).is_err());
        assert!(SweepGrid::new(vec![]).is_err());
    }

    #[test]
    fn sweep_keeps_row_errors() {
        let base = SchemeConfig::ideal(Amplitude::Final(0.7), 0.9);
        let g = SweepGrid::new(vec![(SweepParam::T, vec![0.9, 1.5])]).unwrap();
        let rows = sweep(&base, &g);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].outcome.is_ok());
        assert!(rows[1].outcome.is_err());
        let bad = SweepGrid::new(vec![(SweepParam::Lambda, vec![0.01])]).unwrap();
        assert!(sweep(&base, &bad)[0].outcome.is_err());
    }
    fn coh(x: f64, n: usize) -> f64 {
        let mut a = (-x * x / 2.0).exp();
        for k in 1..=n {
            a *= x / (k as f64).sqrt();
        }
        a
    }

    /// ((a†_6 + a†_5)/√2 − β) acting on |x⟩_6 |y⟩_5, amplitude at (n6, n5).
    fn photon_on_pair(x: f64, y: f64, beta: f64, n6: usize, n5: usize) -> f64 {
        let mut a = -beta * coh(x, n6) * coh(y, n5);
        if n6 > 0 {
            a += (n6 as f64).sqrt() * coh(x, n6 - 1) * coh(y, n5) / SQRT_2;
        }
        if n5 > 0 {
            a += (n5 as f64).sqrt() * coh(x, n6) * coh(y, n5 - 1) / SQRT_2;
        }
        a
    }

    #[test]
    fn prestate_matches_direct_construction() {
        for (alpha, t, phi) in [(1.0, 0.75, PI), (0.7, 0.9, 0.0), (1.2, 0.6, 1.1)] {
            let mut c = SchemeConfig::ideal(Amplitude::Initial(alpha), t);
            c.phi = phi;
            c.cutoffs = Cutoffs {
                pair: None,
                detector: Some(10),
                beam: Some(22),
            };
            let pre = build_prestate(&c).unwrap();
            assert_eq!(pre.ensemble.len(), 1);
            let built = &pre.ensemble.branches()[0].1;
            let reg = built.register().clone();
            let labels: Vec<&str> = reg.labels().collect();
            assert_eq!(labels, [A_H, A_V, "5H", "5V", "6H", "6V", B]);

            let beta = ((1.0 - t) / 2.0).sqrt() * alpha;
            let ab = t.sqrt() * alpha;
            let n_phi = 1.0 / (2.0 + 2.0 * (phi.cos()) * (-2.0 * alpha * alpha).exp()).sqrt();
            let mut amps = vec![C64::new(0.0, 0.0); reg.dim()];
            for (idx, amp) in amps.iter_mut().enumerate() {
                let o = reg.occupations(idx);
                let (ah, av, n5h, n5v, n6h, n6v, nb) = (o[0], o[1], o[2], o[3], o[4], o[5], o[6]);
                if ah + av != 1 {
                    continue;
                }
                for (sigma, weight) in [(1.0, C64::new(1.0, 0.0)), (-1.0, C64::from_polar(1.0, phi))] {
                    let x6 = (1.0 + sigma) * beta / SQRT_2;
                    let x5 = (1.0 - sigma) * beta / SQRT_2;
                    // photon in the pair arm of the opposite polarization to A
                    let detectors = if av == 1 {
                        photon_on_pair(x6, x5, beta, n6h, n5h) * coh(x6, n6v) * coh(x5, n5v)
                    } else {
                        photon_on_pair(x6, x5, beta, n6v, n5v) * coh(x6, n6h) * coh(x5, n5h)
                    };
                    *amp += weight * (n_phi / SQRT_2 * detectors * coh(sigma * ab, nb));
                }
            }
            let oracle = PureState::from_amplitudes(reg, amps).unwrap();
            let overlap = oracle.inner(built).unwrap().norm() / oracle.norm() / built.norm();
            assert!((overlap - 1.0).abs() < 1e-10, "{alpha} {t} {phi}: {overlap}");
        }
    }

    #[test]
    fn beam_mean_photon_number() {
        let alpha: f64 = 1.0;
        let t = 0.8;
        let pre = build_prestate(&SchemeConfig::ideal(Amplitude::Initial(alpha), t)).unwrap();
        let pops = pre.ensemble.branches()[0].1.mode_populations(B).unwrap();
        let mean: f64 = pops.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        let a2 = alpha * alpha;
        let odd_cat = t * a2 / a2.tanh();
        assert!((mean - odd_cat).abs() < 1e-9, "{mean} vs {odd_cat}");
        assert!((mean - t * a2).abs() < 0.4 * t * a2);
    }

    #[test]
    fn vacuum_pair_is_filtered() {
        let c = SchemeConfig::ideal(Amplitude::Initial(1.0), 0.9);
        let vac = Ensemble::pure(crate::resources::pair_order(0, 1).unwrap());
        let pre = prestate_from_pair(&c, &vac).unwrap();
        let outcome = &herald_branches(&c, &pre).unwrap()[0];
        assert!(outcome.probability() <= ZERO_PROBABILITY, "{}", outcome.probability());
    }

    #[test]
    fn vacuum_mixing_scales_probability_only() {
        let ideal = SchemeConfig::ideal(Amplitude::Final(0.8), 0.9);
        let base = run_scheme(&ideal).unwrap();
        for z in [0.25, 0.5, 0.9] {
            let mut c = ideal.clone();
            c.pair_source = PairSourceSpec::VacuumMixed { z };
            let r = run_scheme(&c).unwrap();
            assert!((r.probability_total / base.probability_total - z).abs() < 1e-12);
            assert!((r.fidelity - base.fidelity).abs() < 1e-9);
        }
    }

    #[test]
    fn spdc_lambda_scaling() {
        let mut c = SchemeConfig::ideal(Amplitude::Final(0.8), 0.99);
        c.detectors = Detectors::OnOff;
        c.eta = 0.6;
        c.pair_source = PairSourceSpec::Spdc {
            lambda: 0.03,
            order_max: 2,
            weighting: SpdcWeighting::Geometric,
        };
        let d = spdc_decomposition(&c).unwrap();
        for lambda in [0.01, 0.03, 0.05] {
            if let PairSourceSpec::Spdc { lambda: l, .. } = &mut c.pair_source {
                *l = lambda;
            }
            let full = run_scheme(&c).unwrap();
            let fit = d.at(lambda, SpdcWeighting::Geometric).unwrap().p_tot;
            assert!((full.probability_total / fit - 1.0).abs() < 0.01);
            let f_state = d.fidelity_at(lambda, SpdcWeighting::Geometric).unwrap();
            assert!((full.fidelity - f_state).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn numeric_result_follows_closed_form(alpha_f in 0.3f64..1.5, t in 0.6f64..0.99, eta in 0.4f64..1.0) {
            let mut c = SchemeConfig::ideal(Amplitude::Final(alpha_f), t);
            c.eta = eta;
            let r = run_scheme(&c).unwrap();
            let d = &r.diagnostics;
            prop_assert!((r.fidelity - d.analytic_fidelity.unwrap()).abs() < 1e-8);
            prop_assert!((r.probability_total / d.analytic_probability.unwrap() - 1.0).abs() < 1e-7);
            prop_assert!((r.post_state.trace() - 1.0).abs() < 1e-12);
            prop_assert!(d.tail_mass < TAIL_BOUND);
        }

        #[test]
        fn grid_is_a_sorted_product(
            ts in proptest::collection::vec(0.1f64..1.0, 1..5),
            etas in proptest::collection::vec(0.1f64..1.0, 1..5),
        ) {
            let g = SweepGrid::new(vec![(SweepParam::T, ts.clone()), (SweepParam::Eta, etas.clone())]).unwrap();
            let distinct = |v: &[f64]| { let mut v = v.to_vec(); v.sort_by(f64::total_cmp); v.dedup(); v.len() };
            prop_assert_eq!(g.len(), distinct(&ts) * distinct(&etas));
            let pts = g.points();
            prop_assert_eq!(pts.len(), g.len());
            for w in pts.windows(2) {
                let key = |p: &Vec<(SweepParam, f64)>| (p[0].1, p[1].1);
                prop_assert!(key(&w[0]) < key(&w[1]));
            }
        }
    }
}
