//! Closed-form success probabilities, fidelities and negativities for the
//! ideal-resource scheme, used as fast paths and as cross-checks.

use crate::error::{Error, Result};
use crate::resources::{ScsSpec, SpdcWeighting};

/// Cat amplitude given either before the unbalanced beam splitter (α_i)
/// or in the output beam (α_f = √t α_i).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    Initial(f64),
    Final(f64),
}

impl Amplitude {
    pub fn initial(&self, t: f64) -> f64 {
        match *self {
            Amplitude::Initial(a) => a,
            Amplitude::Final(a) => a / t.sqrt(),
        }
    }

    pub fn final_amplitude(&self, t: f64) -> f64 {
        match *self {
            Amplitude::Initial(a) => a * t.sqrt(),
            Amplitude::Final(a) => a,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Amplitude::Initial(a) | Amplitude::Final(a) => a,
        }
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("transmissivity {t} outside (0, 1]")))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::invalid(format!("detector efficiency {eta} outside [0, 1]")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("amplitude {alpha} must be finite and >= 0")))
    }
}

fn cat_norm_sqr(alpha_i: f64, phi: f64) -> Result<f64> {
    Ok(ScsSpec::new(alpha_i, phi)?.normalization().powi(2))
}

/// Ratio between the simulated heralding probability and the printed
/// closed forms N_φ²(…): each herald pattern fires with half the printed
/// weight, because the cat and displacement beams are split evenly over
/// both polarizations. With this factor the large-α optimum is 1/(8e).
pub const PRINTED_PROBABILITY_FACTOR: f64 = 0.5;

/// Printed single-pattern form N_φ²(1−t)α_i² e^{−2(1−t)α_i²}
/// (equivalently N_φ²(1/t−1)α_f² e^{−2(1/t−1)α_f²}).
pub fn p_success_printed(alpha: Amplitude, t: f64, phi: f64) -> Result<f64> {
    check_t(t)?;
    check_alpha(alpha.value())?;
    let n2 = cat_norm_sqr(alpha.initial(t), phi)?;
    let x = match alpha {
        Amplitude::Initial(a) => (1.0 - t) * a * a,
        Amplitude::Final(a) => (1.0 / t - 1.0) * a * a,
    };
    Ok(n2 * x * (-2.0 * x).exp())
}

/// Success probability of one herald pattern with ideal resources and
/// detectors.
pub fn p_success_ideal(alpha: Amplitude, t: f64, phi: f64) -> Result<f64> {
    Ok(PRINTED_PROBABILITY_FACTOR * p_success_printed(alpha, t, phi)?)
}

/// Transmissivity maximizing [`p_success_ideal`] at fixed α_i.
pub fn optimal_transmissivity(alpha_i: f64) -> Result<f64> {
    if !(alpha_i.is_finite() && alpha_i > std::f64::consts::FRAC_1_SQRT_2) {
        return Err(Error::invalid(format!("optimum needs α_i > 1/√2, got {alpha_i}")));
    }
    Ok(1.0 - 1.0 / (2.0 * alpha_i * alpha_i))
}

/// Fidelity with number-resolving detectors of efficiency η:
/// ½(1 + e^{−2(1−η)(1/t−1)α_f²}).
pub fn fidelity_eta(alpha_f: f64, t: f64, eta: f64) -> Result<f64> {
    check_t(t)?;
    check_eta(eta)?;
    check_alpha(alpha_f)?;
    Ok(0.5 * (1.0 + (-2.0 * (1.0 - eta) * (1.0 / t - 1.0) * alpha_f * alpha_f).exp()))
}

/// Printed two-pattern form 2N_φ²η²(1/t−1)α_f² e^{−2η(1/t−1)α_f²}.
pub fn p_tot_eta_printed(alpha_f: f64, t: f64, eta: f64, phi: f64) -> Result<f64> {
    check_t(t)?;
    check_eta(eta)?;
    check_alpha(alpha_f)?;
    let n2 = cat_norm_sqr(alpha_f / t.sqrt(), phi)?;
    let x = (1.0 / t - 1.0) * alpha_f * alpha_f;
    Ok(2.0 * n2 * eta * eta * x * (-2.0 * eta * x).exp())
}

/// Total success probability over both herald patterns with
/// number-resolving detectors of efficiency η.
pub fn p_tot_eta(alpha_f: f64, t: f64, eta: f64, phi: f64) -> Result<f64> {
    Ok(PRINTED_PROBABILITY_FACTOR * p_tot_eta_printed(alpha_f, t, eta, phi)?)
}

/// Fidelity of the squeezed single photon Ŝ(s)|1⟩ to the odd cat of amplitude α.
pub fn scs_fidelity(alpha: f64, s: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("cat amplitude {alpha} must be > 0")));
    }
    if !(s.is_finite() && s >= 0.0) {
        return Err(Error::invalid(format!("squeezing {s} must be >= 0")));
    }
    let a2 = alpha * alpha;
    // 1 − e^{−2α²} via expm1 keeps the small-α limit accurate
    let denom = s.cosh().powi(3) * -(-2.0 * a2).exp_m1();
    Ok(2.0 * a2 * (a2 * (s.tanh() - 1.0)).exp() / denom)
}

/// Heralding probabilities of the vacuum, one-pair and two-pair inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOrderProbabilities {
    pub p_vac: f64,
    pub p_chi: f64,
    pub p_phi2: f64,
}

impl PairOrderProbabilities {
    fn validate(&self) -> Result<()> {
        for p in [self.p_vac, self.p_chi, self.p_phi2] {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::invalid(format!("order probability {p} must be >= 0")));
            }
        }
        if self.p_vac == 0.0 && self.p_chi == 0.0 && self.p_phi2 == 0.0 {
            return Err(Error::invalid("all order probabilities are zero"));
        }
        Ok(())
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::invalid(format!("λ = {lambda} outside [0, 1)")))
    }
}

/// Expanded effective fidelity P_χ F_χ / (λ⁻² P_vac + P_χ + λ² P_Φ2).
pub fn f_eff_expansion(p: PairOrderProbabilities, lambda: f64, f_chi: f64) -> Result<f64> {
    p.validate()?;
    check_lambda(lambda)?;
    if lambda == 0.0 {
        return Ok(if p.p_vac > 0.0 || p.p_chi == 0.0 { 0.0 } else { f_chi });
    }
    let l2 = lambda * lambda;
    Ok(p.p_chi * f_chi / (p.p_vac / l2 + p.p_chi + l2 * p.p_phi2))
}

/// Expanded total probability (1−λ²)(P_vac + λ²P_χ + λ⁴P_Φ2).
pub fn p_tot_expansion(p: PairOrderProbabilities, lambda: f64) -> Result<f64> {
    p.validate()?;
    check_lambda(lambda)?;
    let l2 = lambda * lambda;
    Ok((1.0 - l2) * (p.p_vac + l2 * p.p_chi + l2 * l2 * p.p_phi2))
}

/// Order weights (w₀, w₁, w₂) of the pair source at interaction strength λ.
pub fn order_weights(lambda: f64, weighting: SpdcWeighting) -> Result<[f64; 3]> {
    check_lambda(lambda)?;
    let w = crate::resources::spdc_order_weights(lambda, 2, weighting);
    Ok([w[0], w[1], w[2]])
}

/// Unexpanded w₁P_χF_χ / Σ wₙPₙ for either weighting.
pub fn f_eff_weighted(p: PairOrderProbabilities, lambda: f64, f_chi: f64, weighting: SpdcWeighting) -> Result<f64> {
    p.validate()?;
    let [w0, w1, w2] = order_weights(lambda, weighting)?;
    let total = w0 * p.p_vac + w1 * p.p_chi + w2 * p.p_phi2;
    if total == 0.0 {
        return Err(Error::invalid("heralding probability is zero"));
    }
    Ok(w1 * p.p_chi * f_chi / total)
}

/// Σ wₙPₙ for either weighting.
pub fn p_tot_weighted(p: PairOrderProbabilities, lambda: f64, weighting: SpdcWeighting) -> Result<f64> {
    p.validate()?;
    let [w0, w1, w2] = order_weights(lambda, weighting)?;
    Ok(w0 * p.p_vac + w1 * p.p_chi + w2 * p.p_phi2)
}

/// Negativity of the ideal hybrid state, √(1 − e^{−4α_f²}).
pub fn ideal_negativity(alpha_f: f64) -> f64 {
    (-(-4.0 * alpha_f * alpha_f).exp_m1()).max(0.0).sqrt()
}
