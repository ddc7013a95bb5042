//! Input states of the scheme: coherent states, cat states, squeezed single
//! photons, the polarization Bell pair and its realistic variants.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{Ensemble, PureState, Register, C64};
use crate::labels::{A_H, A_V, TWO_H, TWO_V};
use crate::math::unit_phase;

/// Truncation tail allowed before a factory refuses a cutoff.
pub const FACTORY_TAIL_BOUND: f64 = 1e-10;

/// A factory output together with the probability mass cut off by the
/// finite Fock space (before renormalization).
#[derive(Debug, Clone)]
pub struct Truncated {
    pub state: PureState,
    pub tail_mass: f64,
}

/// Unnormalized coherent amplitudes e^{-|α|²/2} αⁿ/√n! for n ≤ cutoff.
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(cutoff + 1);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    amps.push(c);
    for n in 1..=cutoff {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    amps
}

/// Probability of finding more than `cutoff` photons in |α⟩.
pub fn coherent_tail(alpha: f64, cutoff: usize) -> f64 {
    // sum the tail directly; 1 - head loses everything below 1e-16
    let mu = alpha * alpha;
    let mut term = (-mu).exp();
    for n in 1..=cutoff {
        term *= mu / n as f64;
    }
    let mut tail = 0.0;
    for n in cutoff + 1..cutoff + 400 {
        term *= mu / n as f64;
        tail += term;
        if term <= 1e-30 * tail {
            break;
        }
    }
    tail
}

/// Smallest cutoff whose coherent-state tail is at most `tol`.
pub fn coherent_cutoff(alpha: f64, tol: f64) -> usize {
    (0..).find(|&c| coherent_tail(alpha, c) <= tol).expect("tail eventually vanishes")
}

/// Coherent state |α⟩ on a single mode, renormalized after truncation.
pub fn coherent(label: &str, alpha: C64, cutoff: usize) -> Result<Truncated> {
    let tail = coherent_tail(alpha.norm(), cutoff);
    if tail > FACTORY_TAIL_BOUND {
        return Err(Error::CutoffTooSmall {
            mode: label.to_string(),
            have: cutoff,
            required: coherent_cutoff(alpha.norm(), FACTORY_TAIL_BOUND),
        });
    }
    let state = PureState::single_mode(label, coherent_amplitudes(alpha, cutoff))?.normalized()?;
    Ok(Truncated {
        state,
        tail_mass: tail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScsSpec {
    pub alpha: f64,
    pub phi: f64,
}

impl ScsSpec {
    pub fn new(alpha: f64, phi: f64) -> Result<Self> {
        let spec = ScsSpec { alpha, phi };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::invalid(format!("cat amplitude {} must be finite and >= 0", self.alpha)));
        }
        if !(0.0..2.0 * PI).contains(&self.phi) {
            return Err(Error::invalid(format!("cat phase {} outside [0, 2π)", self.phi)));
        }
        if unit_phase(self.phi) == C64::new(-1.0, 0.0) && self.alpha <= 1e-6 {
            return Err(Error::invalid("odd cat state with amplitude <= 1e-6 has no normalization"));
        }
        Ok(())
    }

    /// N_φ = (2 + 2e^{-2α²} cos φ)^{-1/2}.
    pub fn normalization(&self) -> f64 {
        (2.0 + 2.0 * (-2.0 * self.alpha * self.alpha).exp() * self.phi.cos()).powf(-0.5)
    }
}

/// Cat state N_φ(|α⟩ + e^{iφ}|−α⟩).
pub fn scs(label: &str, spec: ScsSpec, cutoff: usize) -> Result<Truncated> {
    spec.validate()?;
    let tail = coherent_tail(spec.alpha, cutoff);
    if tail > FACTORY_TAIL_BOUND {
        return Err(Error::CutoffTooSmall {
            mode: label.to_string(),
            have: cutoff,
            required: coherent_cutoff(spec.alpha, FACTORY_TAIL_BOUND),
        });
    }
    let phase = unit_phase(spec.phi);
    let nphi = spec.normalization();
    let amps: Vec<C64> = coherent_amplitudes(C64::new(spec.alpha, 0.0), cutoff)
        .into_iter()
        .enumerate()
        .map(|(n, c)| {
            let parity = if n % 2 == 0 { phase } else { -phase };
            c * (C64::new(1.0, 0.0) + parity) * nphi
        })
        .collect();
    let raw = PureState::single_mode(label, amps)?;
    let tail_mass = (1.0 - raw.norm_sqr()).max(0.0);
    Ok(Truncated {
        state: raw.normalized()?,
        tail_mass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedPhotonSpec {
    pub s: f64,
    /// Number of retained odd terms minus one; the Fock cutoff is 2·n_cut+1.
    pub n_cut: usize,
}

impl SqueezedPhotonSpec {
    pub const DEFAULT_N_CUT: usize = 7;

    pub fn new(s: f64) -> Self {
        SqueezedPhotonSpec {
            s,
            n_cut: Self::DEFAULT_N_CUT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s.is_finite() || self.s < 0.0 {
            return Err(Error::invalid(format!("squeezing parameter {} must be finite and >= 0", self.s)));
        }
        if self.n_cut < 1 {
            return Err(Error::invalid("squeezed-photon n_cut must be >= 1"));
        }
        Ok(())
    }

    pub fn fock_cutoff(&self) -> usize {
        2 * self.n_cut + 1
    }
}

/// Unnormalized odd-term amplitudes of Ŝ(s)|1⟩: entry n is the |2n+1⟩ amplitude.
pub fn squeezed_photon_series(s: f64, n_cut: usize) -> Vec<f64> {
    let th = s.tanh();
    let mut a = s.cosh().powf(-1.5);
    let mut out = vec![a];
    for n in 1..=n_cut {
        let nf = n as f64;
        a *= th * ((2.0 * nf + 1.0) / (2.0 * nf)).sqrt();
        out.push(a);
    }
    out
}

/// Squeezed single photon Ŝ(s)|1⟩ on odd occupations up to 2·n_cut+1.
pub fn squeezed_single_photon(label: &str, spec: SqueezedPhotonSpec) -> Result<Truncated> {
    spec.validate()?;
    let series = squeezed_photon_series(spec.s, spec.n_cut);
    let mut amps = vec![C64::new(0.0, 0.0); spec.fock_cutoff() + 1];
    for (n, a) in series.iter().enumerate() {
        amps[2 * n + 1] = C64::new(*a, 0.0);
    }
    let raw = PureState::single_mode(label, amps)?;
    let tail_mass = (1.0 - raw.norm_sqr()).max(0.0);
    Ok(Truncated {
        state: raw.normalized()?,
        tail_mass,
    })
}

fn pair_register(cutoff: usize) -> Result<Arc<Register>> {
    Register::from_cutoffs(&[(A_H, cutoff), (A_V, cutoff), (TWO_H, cutoff), (TWO_V, cutoff)])
}

/// |Φ_n⟩ = (n+1)^{-1/2} Σ_m |m⟩_{1H}|n−m⟩_{1V}|n−m⟩_{2H}|m⟩_{2V}, the n-pair
/// component of a polarization-entangled down-conversion source.
pub fn pair_order(n: usize, cutoff: usize) -> Result<PureState> {
    if n > cutoff {
        return Err(Error::CutoffTooSmall {
            mode: A_H.to_string(),
            have: cutoff,
            required: n,
        });
    }
    let reg = pair_register(cutoff)?;
    let mut s = PureState::zeros(reg.clone());
    let amp = C64::new(1.0 / ((n + 1) as f64).sqrt(), 0.0);
    for m in 0..=n {
        let single = PureState::basis(reg.clone(), &[m, n - m, n - m, m])?;
        s = s.plus(amp, &single)?;
    }
    Ok(s)
}

/// (|H⟩₁|V⟩₂ + |V⟩₁|H⟩₂)/√2 in (1H, 1V, 2H, 2V) order.
pub fn bell_chi(cutoff: usize) -> Result<PureState> {
    if cutoff < 1 {
        return Err(Error::CutoffTooSmall {
            mode: A_H.to_string(),
            have: cutoff,
            required: 1,
        });
    }
    pair_order(1, cutoff)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpdcWeighting {
    /// Amplitudes ∝ λⁿ on |Φ_n⟩.
    Geometric,
    /// Product of two two-mode squeezers: amplitudes ∝ λⁿ√(n+1).
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairSourceSpec {
    IdealChi,
    VacuumMixed { z: f64 },
    Spdc {
        lambda: f64,
        order_max: usize,
        weighting: SpdcWeighting,
    },
}

impl PairSourceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PairSourceSpec::IdealChi => Ok(()),
            PairSourceSpec::VacuumMixed { z } => {
                if z > 0.0 && z <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("pair weight z = {z} outside (0, 1]")))
                }
            }
            PairSourceSpec::Spdc { lambda, order_max, .. } => {
                if !(0.0..1.0).contains(&lambda) {
                    return Err(Error::invalid(format!("interaction strength λ = {lambda} outside [0, 1)")));
                }
                if order_max < 1 {
                    return Err(Error::invalid("SPDC order_max must be >= 1"));
                }
                Ok(())
            }
        }
    }

    /// Largest photon number any single pair mode carries.
    pub fn max_photons_per_mode(&self) -> usize {
        match *self {
            PairSourceSpec::Spdc { order_max, .. } => order_max,
            _ => 1,
        }
    }
}

/// Probability weight of |Φ_n⟩ for n = 0..=order_max.
pub fn spdc_order_weights(lambda: f64, order_max: usize, weighting: SpdcWeighting) -> Vec<f64> {
    let l2 = lambda * lambda;
    (0..=order_max)
        .map(|n| match weighting {
            SpdcWeighting::Geometric => (1.0 - l2) * l2.powi(n as i32),
            SpdcWeighting::Exact => (1.0 - l2).powi(2) * (n + 1) as f64 * l2.powi(n as i32),
        })
        .collect()
}

/// Pure SPDC state truncated at `order_max`, renormalized.
pub fn spdc_state(lambda: f64, order_max: usize, weighting: SpdcWeighting, cutoff: usize) -> Result<Truncated> {
    if order_max > cutoff {
        return Err(Error::CutoffTooSmall {
            mode: A_H.to_string(),
            have: cutoff,
            required: order_max,
        });
    }
    let weights = spdc_order_weights(lambda, order_max, weighting);
    let mut s = PureState::zeros(pair_register(cutoff)?);
    for (n, w) in weights.iter().enumerate() {
        s = s.plus(C64::new(w.sqrt(), 0.0), &pair_order(n, cutoff)?)?;
    }
    let tail_mass = (1.0 - s.norm_sqr()).max(0.0);
    Ok(Truncated {
        state: s.normalized()?,
        tail_mass,
    })
}

/// Polarization-pair input as an ensemble on (1H, 1V, 2H, 2V).
///
/// Down-conversion orders are returned as separate branches |Φ_n⟩ with
/// weights from [`spdc_order_weights`], not renormalized: the pump phase is
/// not locked to the cat source, so orders do not interfere, and the mass
/// above `order_max` is left out of the model rather than redistributed.
pub fn pair_source(spec: PairSourceSpec, cutoff: usize) -> Result<Ensemble> {
    spec.validate()?;
    if spec.max_photons_per_mode() > cutoff {
        return Err(Error::CutoffTooSmall {
            mode: A_H.to_string(),
            have: cutoff,
            required: spec.max_photons_per_mode(),
        });
    }
    match spec {
        PairSourceSpec::IdealChi => Ok(Ensemble::pure(bell_chi(cutoff)?)),
        PairSourceSpec::VacuumMixed { z } => {
            let chi = bell_chi(cutoff)?;
            let mut ens = Ensemble::empty(chi.register().clone());
            let vac = PureState::vacuum(chi.register().clone());
            ens.push(z, chi)?;
            if z < 1.0 {
                ens.push(1.0 - z, vac)?;
            }
            Ok(ens)
        }
        PairSourceSpec::Spdc {
            lambda,
            order_max,
            weighting,
        } => {
            let reg = pair_register(cutoff)?;
            let mut ens = Ensemble::empty(reg);
            for (n, w) in spdc_order_weights(lambda, order_max, weighting).into_iter().enumerate() {
                if w > 0.0 {
                    ens.push(w, pair_order(n, cutoff)?)?;
                }
            }
            Ok(ens)
        }
    }
}

pub fn mean_photon_number(state: &PureState, label: &str) -> Result<f64> {
    Ok(state
        .mode_populations(label)?
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum())
}

/// |⟨SCS_π(α)|Ŝ(s)|1⟩|² evaluated numerically from the two truncated kets.
pub fn squeezed_scs_overlap(alpha: f64, spec: SqueezedPhotonSpec) -> Result<f64> {
    let sq = squeezed_single_photon("m", spec)?.state;
    let cutoff = spec.fock_cutoff().max(coherent_cutoff(alpha, 1e-14));
    let (sq, _) = sq.with_cutoff("m", cutoff)?;
    let cat = scs("m", ScsSpec::new(alpha, PI)?, cutoff)?.state;
    Ok(cat.inner(&sq)?.norm_sqr())
}
