//! Browser bindings. Each exported function is a thin wrapper over a pure
//! function that returns a flat `Vec<f64>` and is tested natively.

use hybrid_core::analytic::{self, Amplitude};
use hybrid_core::detection::Detectors;
use hybrid_core::pipeline::{run_scheme, spdc_decomposition, SchemeConfig, ScsSource};
use hybrid_core::resources::{PairSourceSpec, SpdcWeighting, SqueezedPhotonSpec};
use wasm_bindgen::prelude::*;

const ODD_CAT: f64 = std::f64::consts::PI;
/// Largest number of curve samples a caller may request.
pub const MAX_SAMPLES: usize = 2000;

fn samples(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(2..=MAX_SAMPLES).contains(&n) {
        return Err(format!("sample count must be in 2..={MAX_SAMPLES}"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err("range must satisfy lo < hi".into());
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

/// `[t, fidelity, probability]` triples for an ideal cat and number-resolving
/// detectors, from the closed forms.
pub fn closed_form_curve(alpha_f: f64, eta: f64, t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(t_min > 0.0 && t_max <= 1.0) {
        return Err("transmissivity range must lie in (0, 1]".into());
    }
    let mut out = Vec::with_capacity(3 * n);
    for t in samples(t_min, t_max, n)? {
        let f = analytic::fidelity_eta(alpha_f, t, eta).map_err(|e| e.to_string())?;
        let p = analytic::p_tot_eta(alpha_f, t, eta, ODD_CAT).map_err(|e| e.to_string())?;
        out.extend([t, f, p]);
    }
    Ok(out)
}

fn squeezed(s: f64, alpha_i: f64, t: f64, eta: f64, on_off: bool) -> SchemeConfig {
    let mut c = SchemeConfig::ideal(Amplitude::Initial(alpha_i), t);
    c.scs_source = ScsSource::Squeezed(SqueezedPhotonSpec::new(s));
    c.eta = eta;
    c.detectors = if on_off { Detectors::OnOff } else { Detectors::Pnr };
    c
}

/// Full simulation with a squeezed-photon source and a vacuum-mixed pair:
/// `[fidelity, probability, negativity]`.
pub fn squeezed_point(s: f64, alpha_i: f64, t: f64, eta: f64, z: f64, on_off: bool) -> Result<Vec<f64>, String> {
    let mut c = squeezed(s, alpha_i, t, eta, on_off);
    c.pair_source = PairSourceSpec::VacuumMixed { z };
    let r = run_scheme(&c).map_err(|e| e.to_string())?;
    Ok(vec![r.fidelity, r.probability_total, r.negativity])
}

/// `[lambda, F_eff, P_tot]` triples for a down-conversion pair source with
/// on-off detectors; the three pair orders are simulated once.
pub fn spdc_curve(s: f64, alpha_i: f64, t: f64, eta: f64, lambda_max: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(lambda_max > 0.0 && lambda_max < 1.0) {
        return Err("lambda_max must lie in (0, 1)".into());
    }
    let mut c = squeezed(s, alpha_i, t, eta, true);
    c.pair_source = PairSourceSpec::Spdc {
        lambda: lambda_max,
        order_max: 2,
        weighting: SpdcWeighting::Geometric,
    };
    let d = spdc_decomposition(&c).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(3 * n);
    for lambda in samples(lambda_max / n as f64, lambda_max, n)? {
        let p = d.at(lambda, SpdcWeighting::Geometric).map_err(|e| e.to_string())?;
        out.extend([lambda, p.f_eff, p.p_tot]);
    }
    Ok(out)
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = closedFormCurve)]
pub fn closed_form_curve_js(alpha_f: f64, eta: f64, t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    js(closed_form_curve(alpha_f, eta, t_min, t_max, n))
}

#[wasm_bindgen(js_name = squeezedPoint)]
pub fn squeezed_point_js(s: f64, alpha_i: f64, t: f64, eta: f64, z: f64, on_off: bool) -> Result<Vec<f64>, JsValue> {
    js(squeezed_point(s, alpha_i, t, eta, z, on_off))
}

#[wasm_bindgen(js_name = spdcCurve)]
pub fn spdc_curve_js(s: f64, alpha_i: f64, t: f64, eta: f64, lambda_max: f64, n: usize) -> Result<Vec<f64>, JsValue> {
    js(spdc_curve(s, alpha_i, t, eta, lambda_max, n))
}
