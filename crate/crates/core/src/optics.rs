//! Linear optics in the truncated Fock basis: beam splitters, displacements,
//! polarizing-beam-splitter routing and polarization rotation.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{apply, apply_tracked, ModeOperator, ModeRole, PureState, Register, Tracked, C64};
use crate::math::{binomial, factorial, unit_phase};

/// Largest truncation loss a beam splitter may cause before it is an error.
pub const TRUNCATION_BOUND: f64 = 1e-8;

/// Beam splitter given either by its transmissivity or by a mixing angle
/// and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BsParams {
    /// Intensity transmissivity t ∈ (0, 1]; reflectivity is 1 − t.
    Transmissivity(f64),
    /// Mixing angle ξ ∈ [0, π/2] and phase; t = cos²ξ.
    Mixing { xi: f64, phase: f64 },
}

impl BsParams {
    /// The balanced mixer of the scheme: ξ = π/4, phase π/2.
    pub fn fifty_fifty() -> Self {
        BsParams::Mixing {
            xi: FRAC_PI_4,
            phase: FRAC_PI_2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BsParams::Transmissivity(t) if t > 0.0 && t <= 1.0 => Ok(()),
            BsParams::Transmissivity(t) => Err(Error::invalid(format!("transmissivity {t} outside (0, 1]"))),
            BsParams::Mixing { xi, phase } => {
                if !(0.0..=FRAC_PI_2).contains(&xi) {
                    return Err(Error::invalid(format!("mixing angle {xi} outside [0, π/2]")));
                }
                if !phase.is_finite() {
                    return Err(Error::invalid("beam-splitter phase must be finite"));
                }
                Ok(())
            }
        }
    }

    pub fn transmissivity(&self) -> f64 {
        match *self {
            BsParams::Transmissivity(t) => t,
            BsParams::Mixing { xi, .. } => xi.cos().powi(2),
        }
    }

    pub fn reflectivity(&self) -> f64 {
        1.0 - self.transmissivity()
    }

    /// Creation-operator transfer `[u11, u12, u21, u22]`:
    /// a†_i → u11 a†_i + u12 a†_j and a†_j → u21 a†_i + u22 a†_j.
    pub fn transfer(&self) -> [C64; 4] {
        match *self {
            BsParams::Transmissivity(t) => {
                let (st, sr) = (t.sqrt(), (1.0 - t).max(0.0).sqrt());
                [C64::new(st, 0.0), C64::new(-sr, 0.0), C64::new(sr, 0.0), C64::new(st, 0.0)]
            }
            BsParams::Mixing { xi, phase } => {
                let (s, c) = if xi == FRAC_PI_4 {
                    (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
                } else {
                    xi.sin_cos()
                };
                let minus_i = C64::new(0.0, -1.0);
                [
                    C64::new(c, 0.0),
                    minus_i * unit_phase(-phase) * s,
                    minus_i * unit_phase(phase) * s,
                    C64::new(c, 0.0),
                ]
            }
        }
    }
}

/// Real transmissivity coefficient
/// B_pq = [C(n,p) C(m,q) t^{p+q} r^{n+m−p−q}]^{1/2} (−1)^{n−p}
/// for the path that keeps p of n photons in mode i and q of m in mode j.
///
/// Its squares sum to one over (p, q). The Fock amplitude of the output
/// state is this coefficient times [`multiplicity`].
pub fn bs_fock_coefficient(n: usize, m: usize, p: usize, q: usize, t: f64) -> Result<f64> {
    if p > n || q > m {
        return Err(Error::invalid(format!("path ({p}, {q}) out of range for input ({n}, {m})")));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("transmissivity {t} outside [0, 1]")));
    }
    let r = 1.0 - t;
    let mag = binomial(n, p) * binomial(m, q) * t.powi((p + q) as i32) * r.powi((n + m - p - q) as i32);
    let sign = if (n - p).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * mag.sqrt())
}

/// Bosonic combinatorial factor relating [`bs_fock_coefficient`] to the
/// Fock amplitude of output |p+m−q⟩_i |n−p+q⟩_j.
pub fn multiplicity(n: usize, m: usize, p: usize, q: usize) -> f64 {
    let out_i = p + m - q;
    let out_j = n - p + q;
    (binomial(n, p) * binomial(m, q) * factorial(out_i) * factorial(out_j) / (factorial(n) * factorial(m))).sqrt()
}

/// Amplitude of the (p, q) path for a general transfer `[u11, u12, u21, u22]`.
pub fn path_amplitude(u: [C64; 4], n: usize, m: usize, p: usize, q: usize) -> C64 {
    let [u11, u12, u21, u22] = u;
    let pw = |z: C64, k: usize| if k == 0 { C64::new(1.0, 0.0) } else { z.powu(k as u32) };
    let out_i = p + m - q;
    let out_j = n - p + q;
    let comb = binomial(n, p)
        * binomial(m, q)
        * (factorial(out_i) * factorial(out_j) / (factorial(n) * factorial(m))).sqrt();
    pw(u11, p) * pw(u12, n - p) * pw(u21, m - q) * pw(u22, q) * comb
}

/// Two-mode block of a beam splitter on modes of dimensions `(dim_i, dim_j)`.
/// Outputs beyond either cutoff are dropped.
pub fn beam_splitter_operator(params: BsParams, dim_i: usize, dim_j: usize) -> Result<ModeOperator> {
    params.validate()?;
    let u = params.transfer();
    let d = dim_i * dim_j;
    let mut m = DMatrix::<C64>::zeros(d, d);
    for n in 0..dim_i {
        for mm in 0..dim_j {
            let col = n * dim_j + mm;
            for p in 0..=n {
                for q in 0..=mm {
                    let out_i = p + mm - q;
                    let out_j = n - p + q;
                    if out_i >= dim_i || out_j >= dim_j {
                        continue;
                    }
                    m[(out_i * dim_j + out_j, col)] += path_amplitude(u, n, mm, p, q);
                }
            }
        }
    }
    ModeOperator::pair(dim_i, dim_j, m)
}

/// Beam splitter on `(mode_i, mode_j)`; the outputs stay in the same slots.
/// Errors when more than [`TRUNCATION_BOUND`] of the norm leaves the cutoffs.
pub fn apply_beam_splitter(state: &PureState, mode_i: &str, mode_j: &str, params: BsParams) -> Result<Tracked> {
    let reg = state.register();
    let di = reg.mode(mode_i)?.dim();
    let dj = reg.mode(mode_j)?.dim();
    let op = beam_splitter_operator(params, di, dj)?;
    let tracked = apply_tracked(&op, &[mode_i, mode_j], state)?;
    if tracked.truncation_loss > TRUNCATION_BOUND {
        return Err(Error::Truncation {
            mass: tracked.truncation_loss,
            bound: TRUNCATION_BOUND,
            context: format!("beam splitter on ({mode_i}, {mode_j})"),
        });
    }
    Ok(tracked)
}

/// Smallest cutoff allowed for a displacement of magnitude `|alpha|`.
pub fn displacement_cutoff(alpha_abs: f64) -> usize {
    (alpha_abs * alpha_abs + 6.0 * alpha_abs + 4.0).ceil() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementSpec {
    pub alpha: C64,
    pub mode: String,
}

impl DisplacementSpec {
    pub fn new(mode: impl Into<String>, alpha: C64) -> Self {
        DisplacementSpec {
            alpha,
            mode: mode.into(),
        }
    }
}

/// L_k^{(a)}(x) for k = 0..=k_max by the three-term recurrence.
fn laguerre_column(k_max: usize, a: usize, x: f64) -> Vec<f64> {
    let a = a as f64;
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(1.0);
    if k_max >= 1 {
        out.push(1.0 + a - x);
    }
    for k in 1..k_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * out[k] - (kf + a) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Matrix ⟨m|D(α)|n⟩ for m, n ≤ cutoff from the associated-Laguerre closed
/// form. The truncated matrix is not unitary near the cutoff corner.
pub fn displacement_matrix(alpha: C64, cutoff: usize) -> Result<ModeOperator> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::invalid("displacement amplitude must be finite"));
    }
    let required = displacement_cutoff(alpha.norm());
    if cutoff < required {
        return Err(Error::CutoffTooSmall {
            mode: "displacement".to_string(),
            have: cutoff,
            required,
        });
    }
    let d = cutoff + 1;
    let x = alpha.norm_sqr();
    let envelope = (-x / 2.0).exp();
    let lower = -alpha.conj();
    let mut mat = DMatrix::<C64>::zeros(d, d);
    for delta in 0..d {
        // L_k^{(delta)} for all k that fit
        let lag = laguerre_column(d - 1 - delta, delta, x);
        for (k, l) in lag.iter().enumerate() {
            // √(k!/(k+delta)!) as a product
            let mut ratio = 1.0;
            for j in k + 1..=k + delta {
                ratio /= (j as f64).sqrt();
            }
            let scale = envelope * ratio * l;
            if delta == 0 {
                mat[(k, k)] = C64::new(scale, 0.0);
            } else {
                mat[(k + delta, k)] = alpha.powu(delta as u32) * scale;
                mat[(k, k + delta)] = lower.powu(delta as u32) * scale;
            }
        }
    }
    ModeOperator::single(mat)
}

pub fn apply_displacement(state: &PureState, spec: &DisplacementSpec) -> Result<PureState> {
    let mode = state.register().mode(&spec.mode)?;
    let op = displacement_matrix(spec.alpha, mode.cutoff).map_err(|e| match e {
        Error::CutoffTooSmall { have, required, .. } => Error::CutoffTooSmall {
            mode: spec.mode.clone(),
            have,
            required,
        },
        other => other,
    })?;
    apply(&op, &[spec.mode.as_str()], state)
}

/// Mark the H and V channels of spatial mode `spatial` as detector inputs.
/// Amplitudes are untouched; only the register changes.
pub fn pbs_route(register: &Register, spatial: &str) -> Result<Arc<Register>> {
    let h = format!("{spatial}H");
    let v = format!("{spatial}V");
    for label in [&h, &v] {
        let mode = register
            .mode(label)
            .map_err(|_| Error::invalid(format!("spatial mode `{spatial}` has no `{label}` channel")))?;
        if mode.role == ModeRole::Detector {
            return Err(Error::invalid(format!("channel `{label}` is already routed to a detector")));
        }
    }
    let routed = register.with_role(&h, ModeRole::Detector)?;
    routed.with_role(&v, ModeRole::Detector)
}

pub fn pbs_route_state(state: &PureState, spatial: &str) -> Result<PureState> {
    let reg = pbs_route(state.register(), spatial)?;
    state.with_register(reg)
}

/// Rotate the polarization basis of (mode_h, mode_v) by `angle`:
/// a†_H → cos θ a†_H − sin θ a†_V, a†_V → sin θ a†_H + cos θ a†_V.
pub fn polarization_rotation(state: &PureState, mode_h: &str, mode_v: &str, angle: f64) -> Result<Tracked> {
    if !angle.is_finite() {
        return Err(Error::invalid("rotation angle must be finite"));
    }
    let reg = state.register();
    let dh = reg.mode(mode_h)?.dim();
    let dv = reg.mode(mode_v)?.dim();
    let (s, c) = angle.sin_cos();
    let u = [C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)];
    let d = dh * dv;
    let mut m = DMatrix::<C64>::zeros(d, d);
    for n in 0..dh {
        for mm in 0..dv {
            for p in 0..=n {
                for q in 0..=mm {
                    let (oi, oj) = (p + mm - q, n - p + q);
                    if oi < dh && oj < dv {
                        m[(oi * dv + oj, n * dv + mm)] += path_amplitude(u, n, mm, p, q);
                    }
                }
            }
        }
    }
    let op = ModeOperator::pair(dh, dv, m)?;
    let tracked = apply_tracked(&op, &[mode_h, mode_v], state)?;
    if tracked.truncation_loss > TRUNCATION_BOUND {
        return Err(Error::Truncation {
            mass: tracked.truncation_loss,
            bound: TRUNCATION_BOUND,
            context: format!("polarization rotation on ({mode_h}, {mode_v})"),
        });
    }
    Ok(tracked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Register;
    use crate::resources::coherent;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn max_diff(a: &PureState, b: &PureState) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    fn coherent_pair(a: (&str, C64), b: (&str, C64), cutoff: usize) -> PureState {
        let x = coherent(a.0, a.1, cutoff).unwrap().state;
        let y = coherent(b.0, b.1, cutoff).unwrap().state;
        x.tensor(&y).unwrap()
    }

    /// exp(g) by Taylor series; adequate for the small generators used here.
    fn expm(g: &DMatrix<C64>) -> DMatrix<C64> {
        let d = g.nrows();
        let mut term = DMatrix::<C64>::identity(d, d);
        let mut sum = term.clone();
        for k in 1..120 {
            term = &term * g / c(k as f64);
            sum += &term;
        }
        sum
    }

    #[test]
    fn printed_coefficient_cases() {
        for (n, m) in [(0, 0), (2, 1), (3, 3)] {
            for p in 0..=n {
                for q in 0..=m {
                    let b = bs_fock_coefficient(n, m, p, q, 1.0).unwrap();
                    let expect = if p == n && q == m { 1.0 } else { 0.0 };
                    assert_eq!(b, expect);
                }
            }
        }
        let kept = bs_fock_coefficient(1, 0, 1, 0, 0.5).unwrap();
        let moved = bs_fock_coefficient(1, 0, 0, 0, 0.5).unwrap();
        assert!((kept - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((moved + FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(bs_fock_coefficient(1, 0, 2, 0, 0.5).is_err());
    }

    #[test]
    fn printed_coefficient_squares_sum_to_one() {
        let mut total = 0.0;
        for p in 0..=2 {
            for q in 0..=1 {
                total += bs_fock_coefficient(2, 1, p, q, 0.3).unwrap().powi(2);
            }
        }
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fock_amplitudes_are_unitary() {
        for t in [0.3, 0.5, 0.9] {
            let op = beam_splitter_operator(BsParams::Transmissivity(t), 7, 7).unwrap();
            let u = op.matrix();
            for n in 0..7 {
                for m in 0..7 - n {
                    let col = u.column(n * 7 + m);
                    let norm: f64 = col.iter().map(|z| z.norm_sqr()).sum();
                    assert!((norm - 1.0).abs() < 1e-12, "t={t} n={n} m={m}");
                    // matches printed coefficient times multiplicity
                    for p in 0..=n {
                        for q in 0..=m {
                            let row = (p + m - q) * 7 + (n - p + q);
                            let via = bs_fock_coefficient(n, m, p, q, t).unwrap() * multiplicity(n, m, p, q);
                            let paths: C64 = (0..=n)
                                .flat_map(|pp| (0..=m).map(move |qq| (pp, qq)))
                                .filter(|&(pp, qq)| pp + m - qq == p + m - q)
                                .map(|(pp, qq)| path_amplitude(BsParams::Transmissivity(t).transfer(), n, m, pp, qq))
                                .sum();
                            assert!((u[(row, n * 7 + m)] - paths).norm() < 1e-12);
                            let direct = path_amplitude(BsParams::Transmissivity(t).transfer(), n, m, p, q);
                            assert!((direct.re - via).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn matches_exponentiated_generator() {
        // U = exp(θ(a†b − b†a)), cos θ = √t, on total photon number ≤ 4
        let t: f64 = 0.37;
        let theta = t.sqrt().acos();
        let d = 5;
        let mut a = DMatrix::<C64>::zeros(d, d);
        for k in 1..d {
            a[(k - 1, k)] = c((k as f64).sqrt());
        }
        let id = DMatrix::<C64>::identity(d, d);
        let ai = a.kronecker(&id);
        let bj = id.kronecker(&a);
        let gen = (ai.adjoint() * &bj - bj.adjoint() * &ai) * c(theta);
        let exact = expm(&gen);
        let op = beam_splitter_operator(BsParams::Transmissivity(t), d, d).unwrap();
        for n in 0..d {
            for m in 0..d - n {
                let col = n * d + m;
                for row in 0..d * d {
                    assert!((exact[(row, col)] - op.matrix()[(row, col)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn coherent_state_splits() {
        for alpha in [0.5, 1.0] {
            let t = 0.8;
            let reg_in = coherent_pair(("4", c(0.0)), ("B", c(alpha)), 24);
            let out = apply_beam_splitter(&reg_in, "4", "B", BsParams::Transmissivity(t)).unwrap();
            let expect = coherent_pair(("4", c((1.0 - t).sqrt() * alpha)), ("B", c(t.sqrt() * alpha)), 24);
            assert!(max_diff(&out.state, &expect) < 1e-10);
        }
    }

    #[test]
    fn balanced_mixer_mode_maps() {
        let reg = Register::from_cutoffs(&[("4", 2), ("2", 2)]).unwrap();
        let photon_in_2 = PureState::basis(reg.clone(), &[0, 1]).unwrap();
        let out = apply_beam_splitter(&photon_in_2, "4", "2", BsParams::fifty_fifty()).unwrap().state;
        // slot of 4 becomes 6, slot of 2 becomes 5: a†_2 → (a†_5 + a†_6)/√2
        assert!((out.amplitude(&[1, 0]).unwrap() - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((out.amplitude(&[0, 1]).unwrap() - c(FRAC_1_SQRT_2)).norm() < 1e-15);

        let photon_in_4 = PureState::basis(reg, &[1, 0]).unwrap();
        let out = apply_beam_splitter(&photon_in_4, "4", "2", BsParams::fifty_fifty()).unwrap().state;
        assert!((out.amplitude(&[1, 0]).unwrap() - c(FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((out.amplitude(&[0, 1]).unwrap() + c(FRAC_1_SQRT_2)).norm() < 1e-15);

        let half = BsParams::Transmissivity(0.5).transfer();
        for (x, y) in BsParams::fifty_fifty().transfer().iter().zip(half.iter()) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn photon_number_is_conserved() {
        let reg = Register::from_cutoffs(&[("i", 6), ("j", 6)]).unwrap();
        let s = PureState::basis(reg.clone(), &[2, 1])
            .unwrap()
            .plus(c(1.0), &PureState::basis(reg, &[0, 1]).unwrap())
            .unwrap()
            .normalized()
            .unwrap();
        let out = apply_beam_splitter(&s, "i", "j", BsParams::Transmissivity(0.3)).unwrap();
        let total = |st: &PureState| {
            let mut dist = [0.0; 13];
            for (idx, a) in st.amplitudes().iter().enumerate() {
                let occ = st.register().occupations(idx);
                dist[occ[0] + occ[1]] += a.norm_sqr();
            }
            dist
        };
        for (x, y) in total(&s).iter().zip(total(&out.state).iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_is_an_error() {
        let reg = Register::from_cutoffs(&[("i", 2), ("j", 2)]).unwrap();
        let s = PureState::basis(reg, &[2, 2]).unwrap();
        assert!(matches!(
            apply_beam_splitter(&s, "i", "j", BsParams::Transmissivity(0.5)),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn displacement_basics() {
        let id = displacement_matrix(c(0.0), 6).unwrap();
        assert_eq!(id.matrix(), &DMatrix::<C64>::identity(7, 7));

        let alpha = C64::new(0.6, -0.3);
        let vac = PureState::vacuum(Register::from_cutoffs(&[("m", 24)]).unwrap());
        let shifted = apply_displacement(&vac, &DisplacementSpec::new("m", alpha)).unwrap();
        let coh = PureState::single_mode("m", crate::resources::coherent_amplitudes(alpha, 24)).unwrap();
        assert!(max_diff(&shifted, &coh) < 1e-12);

        let back = apply_displacement(&shifted, &DisplacementSpec::new("m", -alpha)).unwrap();
        assert!(max_diff(&back, &vac) < 1e-10);

        assert!(matches!(
            displacement_matrix(c(2.0), 10),
            Err(Error::CutoffTooSmall { required: 20, .. })
        ));
    }

    fn low_block_defect(alpha: f64, cutoff: usize, block: usize) -> f64 {
        let op = displacement_matrix(c(alpha), cutoff).unwrap();
        let prod = op.matrix().adjoint() * op.matrix();
        let mut worst = 0.0f64;
        for i in 0..block {
            for j in 0..block {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - c(expect)).norm());
            }
        }
        worst
    }

    #[test]
    fn displacement_low_block_is_unitary() {
        // at cutoff 15 only the columns whose displaced support fits are unitary
        assert!(low_block_defect(1.0, 15, 3) < 1e-8);
        assert!(low_block_defect(1.0, 15, 10) > 1e-2);
        assert!(low_block_defect(1.0, 40, 10) < 1e-8);
    }

    #[test]
    fn displacement_matches_exponentiated_generator() {
        let alpha = C64::new(0.4, 0.25);
        let big = 40;
        let mut a = DMatrix::<C64>::zeros(big + 1, big + 1);
        for k in 1..=big {
            a[(k - 1, k)] = c((k as f64).sqrt());
        }
        let gen = a.adjoint() * alpha - &a * alpha.conj();
        let exact = expm(&gen);
        let op = displacement_matrix(alpha, 12).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                assert!((exact[(i, j)] - op.matrix()[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn displacement_composition() {
        let (a, b) = (C64::new(0.3, 0.1), C64::new(-0.2, 0.25));
        let vac = PureState::vacuum(Register::from_cutoffs(&[("m", 14)]).unwrap());
        let two = apply_displacement(
            &apply_displacement(&vac, &DisplacementSpec::new("m", b)).unwrap(),
            &DisplacementSpec::new("m", a),
        )
        .unwrap();
        let phase = C64::from_polar(1.0, (a * b.conj()).im);
        let one = apply_displacement(&vac, &DisplacementSpec::new("m", a + b)).unwrap().scaled(phase);
        assert!(max_diff(&two, &one) < 1e-9);
    }

    #[test]
    fn interference_leaves_single_displacement() {
        for (alpha, beta) in [(0.3, 0.3), (0.1, -0.2), (0.25, 0.05)] {
            let reg = Register::from_cutoffs(&[("4", 18), ("2", 18)]).unwrap();
            let vac = PureState::vacuum(reg);
            let lhs = apply_displacement(&vac, &DisplacementSpec::new("4", c(alpha))).unwrap();
            let lhs = apply_displacement(&lhs, &DisplacementSpec::new("2", c(beta))).unwrap();
            let lhs = apply_beam_splitter(&lhs, "4", "2", BsParams::fifty_fifty()).unwrap().state;
            // slot "4" now holds mode 6 and slot "2" holds mode 5
            let rhs = apply_displacement(&vac, &DisplacementSpec::new("4", c((alpha + beta) * FRAC_1_SQRT_2))).unwrap();
            let rhs = apply_displacement(&rhs, &DisplacementSpec::new("2", c((beta - alpha) * FRAC_1_SQRT_2))).unwrap();
            assert!(max_diff(&lhs, &rhs) < 1e-10);
        }
        // equal displacements: mode 5 stays in vacuum, mode 6 carries √2 α
        let a = 0.1;
        let reg = Register::from_cutoffs(&[("4", 8), ("2", 8)]).unwrap();
        let s = PureState::vacuum(reg);
        let s = apply_displacement(&s, &DisplacementSpec::new("4", c(a))).unwrap();
        let s = apply_displacement(&s, &DisplacementSpec::new("2", c(a))).unwrap();
        let s = apply_beam_splitter(&s, "4", "2", BsParams::fifty_fifty()).unwrap().state;
        let five = s.mode_populations("2").unwrap();
        assert!((five[0] - 1.0).abs() < 1e-12);
        let six = s.mode_populations("4").unwrap();
        let mean: f64 = six.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        assert!((mean - 2.0 * a * a).abs() < 1e-10);
    }

    #[test]
    fn pbs_routing() {
        let reg = Register::from_cutoffs(&[("5H", 2), ("5V", 2), ("B", 3)]).unwrap();
        let s = PureState::basis(reg.clone(), &[0, 1, 2]).unwrap();
        let routed = pbs_route_state(&s, "5").unwrap();
        assert_eq!(routed.amplitudes(), s.amplitudes());
        assert_eq!(routed.register().mode("5H").unwrap().role, ModeRole::Detector);
        assert_eq!(routed.norm(), s.norm());
        assert!(pbs_route(routed.register(), "5").is_err());
        assert!(pbs_route(&reg, "6").is_err());
    }

    #[test]
    fn polarization_rotation_cases() {
        let beta = 0.9;
        let s = coherent_pair(("H", c(beta * FRAC_1_SQRT_2)), ("V", c(beta * FRAC_1_SQRT_2)), 26);
        let rotated = polarization_rotation(&s, "H", "V", FRAC_PI_4).unwrap().state;
        let expect = coherent_pair(("H", c(beta)), ("V", c(0.0)), 26);
        assert!(max_diff(&rotated, &expect) < 1e-10);

        let same = polarization_rotation(&s, "H", "V", 0.0).unwrap().state;
        assert!(max_diff(&same, &s) < 1e-15);

        let back = polarization_rotation(&rotated, "H", "V", -FRAC_PI_4).unwrap().state;
        assert!(max_diff(&back, &s) < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn beam_splitter_preserves_norm_and_photon_number(
            t in 0.01f64..1.0,
            re in proptest::collection::vec(-1.0f64..1.0, 16),
            im in proptest::collection::vec(-1.0f64..1.0, 16),
        ) {
            let reg = Register::from_cutoffs(&[("x", 3), ("y", 3)]).unwrap();
            // keep total photon number within the cutoff so nothing is truncated
            let amps: Vec<C64> = re.iter().zip(&im).enumerate()
                .map(|(k, (r, i))| if reg.occupations(k).iter().sum::<usize>() <= 3 { C64::new(*r, *i) } else { c(0.0) })
                .collect();
            let s = PureState::from_amplitudes(reg, amps).unwrap();
            prop_assume!(s.norm() > 1e-3);
            let s = s.normalized().unwrap();
            let out = apply_beam_splitter(&s, "x", "y", BsParams::Transmissivity(t)).unwrap();
            prop_assert!(out.truncation_loss < 1e-14);
            prop_assert!((out.state.norm_sqr() - 1.0).abs() < 1e-12);
            let photons = |st: &PureState| -> f64 {
                let r = st.register();
                st.amplitudes().iter().enumerate()
                    .map(|(i, a)| a.norm_sqr() * r.occupations(i).iter().sum::<usize>() as f64)
                    .sum()
            };
            prop_assert!((photons(&out.state) - photons(&s)).abs() < 1e-12);
        }
    }
}
