//! Detector POVMs and heralding by diagonal weighting plus partial trace.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::fock::{weighted_partial_trace, DensityOperator, Ensemble, Register};
use crate::labels::{FIVE_H, FIVE_V, SIX_H, SIX_V};
use crate::math::binomial;

/// Below this outcome probability the heralded state is undefined.
pub const HERALD_FLOOR: f64 = 1e-300;

/// Diagonal POVM element on one mode: weight `weights[k]` for |k⟩⟨k|.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmElement {
    pub mode: String,
    pub weights: Vec<f64>,
}

impl PovmElement {
    pub fn new(mode: impl Into<String>, weights: Vec<f64>) -> Result<Self> {
        let mode = mode.into();
        if weights.is_empty() {
            return Err(Error::invalid(format!("POVM on `{mode}` has no weights")));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::invalid(format!("POVM weight {w} on `{mode}` outside [0, 1]")));
        }
        Ok(PovmElement { mode, weights })
    }

    pub fn identity(mode: impl Into<String>, cutoff: usize) -> Self {
        PovmElement {
            mode: mode.into(),
            weights: vec![1.0; cutoff + 1],
        }
    }

    /// 1 − E, the other outcome of a two-outcome measurement.
    pub fn complement(&self) -> Self {
        PovmElement {
            mode: self.mode.clone(),
            weights: self.weights.iter().map(|w| 1.0 - w).collect(),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.weights.len() - 1
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::invalid(format!("detector efficiency {eta} outside [0, 1]")))
    }
}

/// Number-resolving detector of efficiency `eta` reporting `n` photons:
/// d_k = C(k, n) ηⁿ (1−η)^{k−n}.
pub fn povm_pnr(mode: &str, n: usize, eta: f64, cutoff: usize) -> Result<PovmElement> {
    check_eta(eta)?;
    if n > cutoff {
        return Err(Error::invalid(format!("photon count {n} exceeds cutoff {cutoff}")));
    }
    let weights = (0..=cutoff)
        .map(|k| {
            if k < n {
                0.0
            } else {
                binomial(k, n) * eta.powi(n as i32) * (1.0 - eta).powi((k - n) as i32)
            }
        })
        .collect();
    PovmElement::new(mode, weights)
}

/// On-off detector click: d_m = 1 − (1−η)^m.
pub fn povm_click(mode: &str, eta: f64, cutoff: usize) -> Result<PovmElement> {
    check_eta(eta)?;
    let weights = (0..=cutoff).map(|m| 1.0 - (1.0 - eta).powi(m as i32)).collect();
    PovmElement::new(mode, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detectors {
    /// Photon-number resolving.
    Pnr,
    OnOff,
}

/// Measurements applied to a set of distinct modes; measured modes are
/// removed from the output register.
#[derive(Debug, Clone, PartialEq)]
pub struct HeraldSpec {
    elements: Vec<PovmElement>,
}

impl HeraldSpec {
    pub fn new(elements: Vec<PovmElement>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &elements {
            if !seen.insert(e.mode.as_str()) {
                return Err(Error::invalid(format!("mode `{}` measured twice", e.mode)));
            }
        }
        Ok(HeraldSpec { elements })
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn element(&self, mode: &str) -> Option<&PovmElement> {
        self.elements.iter().find(|e| e.mode == mode)
    }

    pub fn measured_modes(&self) -> impl Iterator<Item = &str> {
        self.elements.iter().map(|e| e.mode.as_str())
    }
}

/// The four-detector herald of the scheme. Unflipped: no photon in 5H and
/// 6V, one photon (or a click) in 5V and 6H. Flipped swaps the roles.
pub fn build_scheme_herald(register: &Register, detectors: Detectors, eta: f64, flipped: bool) -> Result<HeraldSpec> {
    check_eta(eta)?;
    let firing: [&str; 2] = if flipped { [FIVE_H, SIX_V] } else { [FIVE_V, SIX_H] };
    let mut elements = Vec::with_capacity(4);
    for label in [FIVE_H, FIVE_V, SIX_H, SIX_V] {
        let cutoff = register
            .mode(label)
            .map_err(|_| Error::invalid(format!("detector channel `{label}` missing from register")))?
            .cutoff;
        let fires = firing.contains(&label);
        let e = match (detectors, fires) {
            (_, false) => povm_pnr(label, 0, eta, cutoff)?,
            (Detectors::Pnr, true) => povm_pnr(label, 1, eta, cutoff)?,
            (Detectors::OnOff, true) => povm_click(label, eta, cutoff)?,
        };
        elements.push(e);
    }
    HeraldSpec::new(elements)
}

#[derive(Debug, Clone)]
pub struct HeraldResult {
    pub probability: f64,
    /// Normalized state of the unmeasured modes.
    pub post: DensityOperator,
    /// Contribution of each ensemble branch to `probability`.
    pub branch_probabilities: Vec<f64>,
}

/// Unnormalized conditional state Σ_b w_b Tr_meas[Π |ψ_b⟩⟨ψ_b|] and the
/// per-branch outcome probabilities. The trace of the operator is the total
/// outcome probability.
pub fn herald_unnormalized(source: &Ensemble, spec: &HeraldSpec) -> Result<(DensityOperator, Vec<f64>)> {
    let reg = source.register();
    for e in spec.elements() {
        let mode = reg.mode(&e.mode)?;
        if mode.dim() != e.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "POVM on `{}` has {} weights, mode dimension is {}",
                e.mode,
                e.weights.len(),
                mode.dim()
            )));
        }
    }
    let measured: HashSet<&str> = spec.measured_modes().collect();
    let keep: Vec<&str> = reg.labels().filter(|l| !measured.contains(l)).collect();
    if keep.is_empty() {
        return Err(Error::invalid("herald measures every mode; nothing left to keep"));
    }
    let weights: Vec<(&str, &[f64])> = spec
        .elements()
        .iter()
        .map(|e| (e.mode.as_str(), e.weights.as_slice()))
        .collect();

    let mut total: Option<DensityOperator> = None;
    let mut per_branch = Vec::with_capacity(source.len());
    for (w, state) in source.branches() {
        let mut single = Ensemble::empty(reg.clone());
        single.push(*w, state.clone())?;
        let part = weighted_partial_trace(&single, &keep, &weights)?;
        per_branch.push(part.trace());
        total = Some(match total {
            None => part,
            Some(acc) => acc.plus(&part)?,
        });
    }
    let total = match total {
        Some(t) => t,
        None => return Err(Error::invalid("cannot herald an empty ensemble")),
    };
    Ok((total, per_branch))
}

/// Herald `source` on `spec`; errors if the outcome is (numerically) impossible.
pub fn herald(source: &Ensemble, spec: &HeraldSpec) -> Result<HeraldResult> {
    let (rho, branch_probabilities) = herald_unnormalized(source, spec)?;
    let probability = rho.trace();
    if !(probability >= HERALD_FLOOR) {
        return Err(Error::HeraldImpossible(probability));
    }
    Ok(HeraldResult {
        probability,
        post: rho.scaled(1.0 / probability),
        branch_probabilities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{PureState, C64};
    use crate::labels::{A_H, A_V, B};
    use proptest::prelude::*;

    #[test]
    fn pnr_cases() {
        let ideal = povm_pnr("m", 2, 1.0, 4).unwrap();
        assert_eq!(ideal.weights, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        let none = povm_pnr("m", 0, 0.3, 4).unwrap();
        for (k, w) in none.weights.iter().enumerate() {
            assert!((w - 0.7f64.powi(k as i32)).abs() < 1e-15);
        }
        assert!((povm_pnr("m", 1, 0.5, 2).unwrap().weights[2] - 0.5).abs() < 1e-15);
        assert!(povm_pnr("m", 0, 1.2, 4).is_err());
        assert!(povm_pnr("m", 5, 0.5, 4).is_err());
    }

    #[test]
    fn click_cases() {
        let c = povm_click("m", 0.5, 3).unwrap();
        assert_eq!(c.weights[0], 0.0);
        assert!((c.weights[2] - 0.75).abs() < 1e-15);
        let ideal = povm_click("m", 1.0, 3).unwrap();
        assert_eq!(ideal.weights, vec![0.0, 1.0, 1.0, 1.0]);
        assert!(povm_click("m", -0.1, 3).is_err());
    }

    proptest! {
        #[test]
        fn pnr_outcomes_are_complete(eta in 0.0f64..=1.0, k in 0usize..12) {
            let total: f64 = (0..=12).map(|n| povm_pnr("m", n, eta, 12).unwrap().weights[k]).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn no_click_plus_click_is_identity(eta in 0.0f64..=1.0) {
            let none = povm_pnr("m", 0, eta, 10).unwrap();
            let click = povm_click("m", eta, 10).unwrap();
            for (a, b) in none.weights.iter().zip(&click.weights) {
                prop_assert_eq!(a + b, 1.0);
            }
            for (a, b) in click.complement().weights.iter().zip(&none.weights) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }
    }

    fn detector_register() -> std::sync::Arc<Register> {
        Register::from_cutoffs(&[(A_H, 1), (A_V, 1), (FIVE_H, 3), (FIVE_V, 3), (SIX_H, 3), (SIX_V, 3), (B, 2)]).unwrap()
    }

    #[test]
    fn scheme_patterns() {
        let reg = detector_register();
        let pi = build_scheme_herald(&reg, Detectors::Pnr, 1.0, false).unwrap();
        assert_eq!(pi.element(FIVE_H).unwrap().weights, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(pi.element(FIVE_V).unwrap().weights, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(pi.element(SIX_H).unwrap().weights, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(pi.element(SIX_V).unwrap().weights, vec![1.0, 0.0, 0.0, 0.0]);

        let flipped = build_scheme_herald(&reg, Detectors::Pnr, 1.0, true).unwrap();
        assert_eq!(flipped.element(FIVE_H).unwrap().weights, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(flipped.element(SIX_V).unwrap().weights, vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(flipped.element(FIVE_V).unwrap().weights, vec![1.0, 0.0, 0.0, 0.0]);

        let onoff = build_scheme_herald(&reg, Detectors::OnOff, 0.5, false).unwrap();
        assert!((onoff.element(SIX_H).unwrap().weights[3] - 0.875).abs() < 1e-15);
        assert!((onoff.element(FIVE_H).unwrap().weights[3] - 0.125).abs() < 1e-15);

        let partial = Register::from_cutoffs(&[(FIVE_H, 2), (FIVE_V, 2)]).unwrap();
        assert!(build_scheme_herald(&partial, Detectors::Pnr, 1.0, false).is_err());
    }

    #[test]
    fn identity_herald_returns_reduced_state() {
        let reg = Register::from_cutoffs(&[("a", 1), ("b", 1)]).unwrap();
        let s = PureState::basis(reg.clone(), &[0, 1])
            .unwrap()
            .plus(C64::new(1.0, 0.0), &PureState::basis(reg, &[1, 0]).unwrap())
            .unwrap()
            .normalized()
            .unwrap();
        let ens = Ensemble::pure(s);
        let spec = HeraldSpec::new(vec![PovmElement::identity("b", 1)]).unwrap();
        let out = herald(&ens, &spec).unwrap();
        assert!((out.probability - 1.0).abs() < 1e-15);
        let reduced = ens.partial_trace(&["a"]).unwrap();
        assert!((out.post.matrix() - reduced.matrix()).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn impossible_outcome_is_reported() {
        let reg = detector_register();
        let ens = Ensemble::pure(PureState::vacuum(reg.clone()));
        let spec = build_scheme_herald(&reg, Detectors::Pnr, 1.0, false).unwrap();
        assert!(matches!(herald(&ens, &spec), Err(Error::HeraldImpossible(p)) if p == 0.0));
        assert!(HeraldSpec::new(vec![PovmElement::identity("x", 1), PovmElement::identity("x", 1)]).is_err());
    }

    #[test]
    fn per_branch_probabilities_add_up() {
        let reg = Register::from_cutoffs(&[("a", 1), ("d", 2)]).unwrap();
        let mut ens = Ensemble::empty(reg.clone());
        ens.push(0.25, PureState::basis(reg.clone(), &[0, 1]).unwrap()).unwrap();
        ens.push(0.75, PureState::basis(reg, &[1, 2]).unwrap()).unwrap();
        let spec = HeraldSpec::new(vec![povm_click("d", 0.5, 2).unwrap()]).unwrap();
        let out = herald(&ens, &spec).unwrap();
        assert!((out.branch_probabilities[0] - 0.125).abs() < 1e-15);
        assert!((out.branch_probabilities[1] - 0.5625).abs() < 1e-15);
        assert!((out.probability - 0.6875).abs() < 1e-15);
        assert!((out.post.trace() - 1.0).abs() < 1e-12);
    }
}
