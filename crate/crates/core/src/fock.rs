//! Truncated multimode Fock-space linear algebra.
//!
//! A [`Register`] is an ordered list of bosonic modes, each truncated at a
//! maximum occupation. Basis states are addressed by a mixed-radix flat
//! index with the last listed mode varying fastest. Operators act on one or
//! two modes at a time and are applied by iterating over the fibres of the
//! untouched modes, so the joint operator is never formed.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Norm tolerance for states that are declared normalized.
pub const NORM_TOL: f64 = 1e-10;
/// Truncation loss above this value is reported by [`apply_tracked`].
pub const TAIL_DIAGNOSTIC: f64 = 1e-10;

/// Whether a mode is still a travelling beam or has been routed onto a
/// detector by a polarizing beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeRole {
    Beam,
    Detector,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModeSpec {
    pub label: String,
    /// Maximum occupation kept (inclusive).
    pub cutoff: usize,
    pub role: ModeRole,
}

impl ModeSpec {
    pub fn new(label: impl Into<String>, cutoff: usize) -> Self {
        ModeSpec {
            label: label.into(),
            cutoff,
            role: ModeRole::Beam,
        }
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    modes: Vec<ModeSpec>,
    strides: Vec<usize>,
    dim: usize,
}

impl Register {
    pub fn new(specs: Vec<ModeSpec>) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::invalid("register needs at least one mode"));
        }
        let mut seen = HashSet::new();
        for spec in &specs {
            if !seen.insert(spec.label.as_str()) {
                return Err(Error::invalid(format!("duplicate mode label `{}`", spec.label)));
            }
        }
        let mut strides = vec![1; specs.len()];
        for k in (0..specs.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * specs[k + 1].dim();
        }
        let dim = strides[0] * specs[0].dim();
        Ok(Register {
            modes: specs,
            strides,
            dim,
        })
    }

    /// Convenience constructor from `(label, cutoff)` pairs.
    pub fn from_cutoffs(modes: &[(&str, usize)]) -> Result<Arc<Self>> {
        Register::new(modes.iter().map(|&(l, c)| ModeSpec::new(l, c)).collect()).map(Arc::new)
    }

    pub fn modes(&self) -> &[ModeSpec] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self, position: usize) -> usize {
        self.strides[position]
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.modes.iter().map(|m| m.label.as_str())
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    pub fn mode(&self, label: &str) -> Result<&ModeSpec> {
        self.position(label).map(|p| &self.modes[p])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.modes.iter().any(|m| m.label == label)
    }

    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} occupations for a {}-mode register",
                occupations.len(),
                self.modes.len()
            )));
        }
        let mut idx = 0;
        for (k, (&n, mode)) in occupations.iter().zip(&self.modes).enumerate() {
            if n > mode.cutoff {
                return Err(Error::CutoffTooSmall {
                    mode: mode.label.clone(),
                    have: mode.cutoff,
                    required: n,
                });
            }
            idx += n * self.strides[k];
        }
        Ok(idx)
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.modes.len()];
        for k in 0..self.modes.len() {
            occ[k] = index / self.strides[k];
            index %= self.strides[k];
        }
        occ
    }

    pub(crate) fn with_modes(&self, modes: Vec<ModeSpec>) -> Result<Arc<Register>> {
        Register::new(modes).map(Arc::new)
    }

    /// Same modes with one label replaced.
    pub fn relabeled(&self, from: &str, to: &str) -> Result<Arc<Register>> {
        let p = self.position(from)?;
        let mut modes = self.modes.clone();
        modes[p].label = to.to_string();
        self.with_modes(modes)
    }

    /// Same modes with one role replaced. Amplitude layout is unchanged.
    pub fn with_role(&self, label: &str, role: ModeRole) -> Result<Arc<Register>> {
        let p = self.position(label)?;
        let mut modes = self.modes.clone();
        modes[p].role = role;
        self.with_modes(modes)
    }

    /// Base flat indices of every fibre over the given target positions
    /// (target occupations all zero), in increasing order.
    fn fibre_bases(&self, targets: &[usize]) -> Vec<usize> {
        let others: Vec<usize> = (0..self.len()).filter(|k| !targets.contains(k)).collect();
        let count: usize = others.iter().map(|&k| self.modes[k].dim()).product();
        let mut bases = Vec::with_capacity(count);
        let mut occ = vec![0usize; others.len()];
        let mut base = 0usize;
        for _ in 0..count {
            bases.push(base);
            for slot in (0..others.len()).rev() {
                let k = others[slot];
                if occ[slot] < self.modes[k].cutoff {
                    occ[slot] += 1;
                    base += self.strides[k];
                    break;
                }
                base -= occ[slot] * self.strides[k];
                occ[slot] = 0;
            }
        }
        bases
    }
}

/// `build_register`: validated register from mode specs.
pub fn build_register(specs: Vec<ModeSpec>) -> Result<Arc<Register>> {
    Register::new(specs).map(Arc::new)
}

fn same_register(a: &Arc<Register>, b: &Arc<Register>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

#[derive(Debug, Clone)]
pub struct PureState {
    register: Arc<Register>,
    amps: Vec<C64>,
}

impl PureState {
    pub fn zeros(register: Arc<Register>) -> Self {
        let amps = vec![C64::new(0.0, 0.0); register.dim()];
        PureState { register, amps }
    }

    pub fn vacuum(register: Arc<Register>) -> Self {
        let mut s = PureState::zeros(register);
        s.amps[0] = C64::new(1.0, 0.0);
        s
    }

    pub fn from_amplitudes(register: Arc<Register>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != register.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for register of dimension {}",
                amps.len(),
                register.dim()
            )));
        }
        Ok(PureState { register, amps })
    }

    /// Single-mode state from Fock amplitudes `amps[n]`.
    pub fn single_mode(label: &str, amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::invalid("single-mode state needs at least one amplitude"));
        }
        let reg = Register::from_cutoffs(&[(label, amps.len() - 1)])?;
        PureState::from_amplitudes(reg, amps)
    }

    /// `basis_state`: unit amplitude on one occupation tuple.
    pub fn basis(register: Arc<Register>, occupations: &[usize]) -> Result<Self> {
        let idx = register.index_of(occupations)?;
        let mut s = PureState::zeros(register);
        s.amps[idx] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn register(&self) -> &Arc<Register> {
        &self.register
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Result<C64> {
        Ok(self.amps[self.register.index_of(occupations)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::invalid("cannot normalize the zero vector"));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, c: C64) -> Self {
        PureState {
            register: self.register.clone(),
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// Coherent sum `self + c·other` on a shared register.
    pub fn plus(&self, c: C64, other: &PureState) -> Result<Self> {
        self.check_register(other)?;
        let amps = self.amps.iter().zip(&other.amps).map(|(a, b)| a + c * b).collect();
        Ok(PureState {
            register: self.register.clone(),
            amps,
        })
    }

    pub fn inner(&self, other: &PureState) -> Result<C64> {
        inner(self, other)
    }

    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        tensor(self, other)
    }

    fn check_register(&self, other: &PureState) -> Result<()> {
        if same_register(&self.register, &other.register) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("states live on different registers".into()))
        }
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        Ok(PureState {
            register: self.register.relabeled(from, to)?,
            amps: self.amps.clone(),
        })
    }

    /// Pure relabeling of the register; amplitudes are shared bit-for-bit.
    pub fn with_register(&self, register: Arc<Register>) -> Result<Self> {
        let compatible = register.len() == self.register.len()
            && register
                .modes()
                .iter()
                .zip(self.register.modes())
                .all(|(a, b)| a.cutoff == b.cutoff);
        if !compatible {
            return Err(Error::DimensionMismatch("register layout differs".into()));
        }
        Ok(PureState {
            register,
            amps: self.amps.clone(),
        })
    }

    /// Change one mode's cutoff. Growing pads with zeros; shrinking drops
    /// the amplitudes above the new cutoff and returns their total weight.
    pub fn with_cutoff(&self, label: &str, cutoff: usize) -> Result<(Self, f64)> {
        let p = self.register.position(label)?;
        let mut modes = self.register.modes().to_vec();
        modes[p].cutoff = cutoff;
        let reg = self.register.with_modes(modes)?;
        let mut out = PureState::zeros(reg.clone());
        let mut dropped = 0.0;
        let old = &self.register;
        let old_stride = old.stride(p);
        let old_dim = old.modes()[p].dim();
        let new_stride = reg.stride(p);
        for (i, a) in self.amps.iter().enumerate() {
            let n = (i / old_stride) % old_dim;
            if n > cutoff {
                dropped += a.norm_sqr();
                continue;
            }
            let hi = i / (old_stride * old_dim);
            let lo = i % old_stride;
            out.amps[hi * new_stride * (cutoff + 1) + n * new_stride + lo] = *a;
        }
        Ok((out, dropped))
    }

    /// Population of each occupation of one mode.
    pub fn mode_populations(&self, label: &str) -> Result<Vec<f64>> {
        let p = self.register.position(label)?;
        let stride = self.register.stride(p);
        let dim = self.register.modes()[p].dim();
        let mut pops = vec![0.0; dim];
        for (i, a) in self.amps.iter().enumerate() {
            pops[(i / stride) % dim] += a.norm_sqr();
        }
        Ok(pops)
    }
}

/// `tensor`: joint state on the concatenated register (a's modes first).
pub fn tensor(a: &PureState, b: &PureState) -> Result<PureState> {
    for label in b.register.labels() {
        if a.register.contains(label) {
            return Err(Error::invalid(format!("mode `{label}` present in both factors")));
        }
    }
    let mut modes = a.register.modes().to_vec();
    modes.extend_from_slice(b.register.modes());
    let reg = Arc::new(Register::new(modes)?);
    let mut amps = Vec::with_capacity(reg.dim());
    for x in &a.amps {
        amps.extend(b.amps.iter().map(|y| x * y));
    }
    Ok(PureState { register: reg, amps })
}

/// `inner`: ⟨a|b⟩, conjugate-linear in `a`.
pub fn inner(a: &PureState, b: &PureState) -> Result<C64> {
    a.check_register(b)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

pub fn norm(a: &PureState) -> f64 {
    a.norm()
}

/// Matrix block acting on one or two modes. For two modes the block index
/// is `n_first * dim_second + n_second`.
#[derive(Debug, Clone)]
pub struct ModeOperator {
    dims: Vec<usize>,
    matrix: DMatrix<C64>,
    unitary_tol: Option<f64>,
}

impl ModeOperator {
    pub fn single(matrix: DMatrix<C64>) -> Result<Self> {
        let d = matrix.nrows();
        ModeOperator::new(vec![d], matrix)
    }

    pub fn pair(dim_first: usize, dim_second: usize, matrix: DMatrix<C64>) -> Result<Self> {
        ModeOperator::new(vec![dim_first, dim_second], matrix)
    }

    fn new(dims: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "operator block is {}x{}, targets need {d}x{d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(ModeOperator {
            dims,
            matrix,
            unitary_tol: None,
        })
    }

    pub fn identity(dims: &[usize]) -> Self {
        let d = dims.iter().product();
        ModeOperator {
            dims: dims.to_vec(),
            matrix: DMatrix::identity(d, d),
            unitary_tol: Some(0.0),
        }
    }

    /// Flag as unitary, failing if `‖U†U − 1‖_max` exceeds `tol`.
    pub fn declare_unitary(mut self, tol: f64) -> Result<Self> {
        let defect = self.unitarity_defect();
        if defect > tol {
            return Err(Error::invalid(format!(
                "unitarity defect {defect:.3e} exceeds declared tolerance {tol:.1e}"
            )));
        }
        self.unitary_tol = Some(tol);
        Ok(self)
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary_tol.is_some()
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn unitarity_defect(&self) -> f64 {
        let d = self.matrix.nrows();
        let prod = self.matrix.adjoint() * &self.matrix;
        let diff = prod - DMatrix::<C64>::identity(d, d);
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn nonzeros(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::new();
        for c in 0..self.matrix.ncols() {
            for r in 0..self.matrix.nrows() {
                let v = self.matrix[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    out.push((r, c, v));
                }
            }
        }
        out
    }
}

/// `apply`: act with `op` on the named modes (in block order).
pub fn apply(op: &ModeOperator, targets: &[&str], state: &PureState) -> Result<PureState> {
    if targets.len() != op.arity() {
        return Err(Error::DimensionMismatch(format!(
            "operator of arity {} given {} target modes",
            op.arity(),
            targets.len()
        )));
    }
    let reg = state.register();
    let positions = targets
        .iter()
        .map(|t| reg.position(t))
        .collect::<Result<Vec<_>>>()?;
    if positions.len() == 2 && positions[0] == positions[1] {
        return Err(Error::invalid("two-mode operator needs two distinct modes"));
    }
    for (&p, &d) in positions.iter().zip(op.dims()) {
        if reg.modes()[p].dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "mode `{}` has dimension {}, operator expects {d}",
                reg.modes()[p].label,
                reg.modes()[p].dim()
            )));
        }
    }

    // offsets of each block index inside a fibre
    let offsets: Vec<usize> = match positions.as_slice() {
        [p] => (0..op.dims[0]).map(|n| n * reg.stride(*p)).collect(),
        [p, q] => {
            let mut v = Vec::with_capacity(op.dims[0] * op.dims[1]);
            for n in 0..op.dims[0] {
                for m in 0..op.dims[1] {
                    v.push(n * reg.stride(*p) + m * reg.stride(*q));
                }
            }
            v
        }
        _ => unreachable!(),
    };
    let nz = op.nonzeros();
    let zero = C64::new(0.0, 0.0);
    let mut out = vec![zero; state.amps.len()];
    let mut fibre = vec![zero; offsets.len()];
    let mut result = vec![zero; offsets.len()];
    for base in reg.fibre_bases(&positions) {
        let mut any = false;
        for (f, &off) in fibre.iter_mut().zip(&offsets) {
            *f = state.amps[base + off];
            any |= *f != zero;
        }
        if !any {
            continue;
        }
        result.iter_mut().for_each(|r| *r = zero);
        for &(r, c, v) in &nz {
            result[r] += v * fibre[c];
        }
        for (&r, &off) in result.iter().zip(&offsets) {
            out[base + off] = r;
        }
    }
    Ok(PureState {
        register: state.register.clone(),
        amps: out,
    })
}

/// Outcome of applying a unitary block, with the norm lost to truncation.
#[derive(Debug, Clone)]
pub struct Tracked {
    pub state: PureState,
    pub truncation_loss: f64,
}

impl Tracked {
    /// True when the truncation loss exceeds [`TAIL_DIAGNOSTIC`].
    pub fn tail_flagged(&self) -> bool {
        self.truncation_loss > TAIL_DIAGNOSTIC
    }
}

/// [`apply`] plus the squared-norm difference before and after.
pub fn apply_tracked(op: &ModeOperator, targets: &[&str], state: &PureState) -> Result<Tracked> {
    let before = state.norm_sqr();
    let after = apply(op, targets, state)?;
    let loss = (before - after.norm_sqr()).max(0.0);
    Ok(Tracked {
        state: after,
        truncation_loss: loss,
    })
}

/// Weighted pure-state mixture on a common register.
#[derive(Debug, Clone)]
pub struct Ensemble {
    register: Arc<Register>,
    branches: Vec<(f64, PureState)>,
}

impl Ensemble {
    pub fn empty(register: Arc<Register>) -> Self {
        Ensemble {
            register,
            branches: Vec::new(),
        }
    }

    pub fn pure(state: PureState) -> Self {
        Ensemble {
            register: state.register.clone(),
            branches: vec![(1.0, state)],
        }
    }

    pub fn push(&mut self, weight: f64, state: PureState) -> Result<()> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::invalid(format!("ensemble weight {weight} must be finite and >= 0")));
        }
        if !same_register(&self.register, &state.register) {
            return Err(Error::DimensionMismatch("branch register differs from ensemble".into()));
        }
        self.branches.push((weight, state));
        Ok(())
    }

    pub fn register(&self) -> &Arc<Register> {
        &self.register
    }

    pub fn branches(&self) -> &[(f64, PureState)] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Σ weight·‖ψ‖².
    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|(w, s)| w * s.norm_sqr()).sum()
    }

    /// Apply the same map to every branch.
    pub fn map_states<F>(&self, mut f: F) -> Result<Ensemble>
    where
        F: FnMut(&PureState) -> Result<PureState>,
    {
        let mut branches = Vec::with_capacity(self.branches.len());
        for (w, s) in &self.branches {
            branches.push((*w, f(s)?));
        }
        let register = match branches.first() {
            Some((_, s)) => s.register.clone(),
            None => self.register.clone(),
        };
        let mut out = Ensemble::empty(register);
        for (w, s) in branches {
            out.push(w, s)?;
        }
        Ok(out)
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator> {
        partial_trace(&TraceSource::Ensemble(self), keep)
    }
}

/// `to_density`: Σ w |ψ⟩⟨ψ|.
pub fn to_density(source: &Ensemble) -> Result<DensityOperator> {
    let d = source.register.dim();
    let mut m = DMatrix::<C64>::zeros(d, d);
    for (w, s) in &source.branches {
        if *w < 0.0 {
            return Err(Error::invalid("negative ensemble weight"));
        }
        rank_one_update(&mut m, *w, &s.amps);
    }
    hermitian_fill(&mut m);
    Ok(DensityOperator {
        register: source.register.clone(),
        matrix: m,
    })
}

/// Upper-triangle accumulation of `w·v v†`; call [`hermitian_fill`] after.
fn rank_one_update(m: &mut DMatrix<C64>, w: f64, v: &[C64]) {
    let d = v.len();
    for c in 0..d {
        let vc = v[c].conj() * w;
        if vc == C64::new(0.0, 0.0) {
            continue;
        }
        let d_rows = m.nrows();
        let col = &mut m.as_mut_slice()[c * d_rows..c * d_rows + c + 1];
        for (r, x) in col.iter_mut().enumerate() {
            *x += v[r] * vc;
        }
    }
}

fn hermitian_fill(m: &mut DMatrix<C64>) {
    let d = m.nrows();
    for c in 0..d {
        m[(c, c)].im = 0.0;
        for r in 0..c {
            m[(c, r)] = m[(r, c)].conj();
        }
    }
}

#[derive(Debug, Clone)]
pub struct DensityOperator {
    register: Arc<Register>,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    pub fn new(register: Arc<Register>, matrix: DMatrix<C64>) -> Result<Self> {
        let d = register.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "density matrix {}x{} for register of dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DensityOperator { register, matrix })
    }

    pub fn from_pure(state: &PureState) -> Self {
        to_density(&Ensemble::pure(state.clone())).expect("unit weight is valid")
    }

    pub fn register(&self) -> &Arc<Register> {
        &self.register
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn scaled(&self, s: f64) -> Self {
        DensityOperator {
            register: self.register.clone(),
            matrix: self.matrix.map(|z| z * s),
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::invalid("cannot normalize an operator with non-positive trace"));
        }
        Ok(self.scaled(1.0 / tr))
    }

    pub fn plus(&self, other: &DensityOperator) -> Result<Self> {
        if !same_register(&self.register, &other.register) {
            return Err(Error::DimensionMismatch("operators live on different registers".into()));
        }
        Ok(DensityOperator {
            register: self.register.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    /// ⟨ψ|ρ|ψ⟩.
    pub fn expectation(&self, state: &PureState) -> Result<C64> {
        if !same_register(&self.register, state.register()) {
            return Err(Error::DimensionMismatch("state and operator registers differ".into()));
        }
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Ok((v.adjoint() * &self.matrix * &v)[(0, 0)])
    }

    /// Exchange two modes of equal cutoff (e.g. a polarization bit flip).
    pub fn swap_modes(&self, a: &str, b: &str) -> Result<Self> {
        let reg = &self.register;
        let (pa, pb) = (reg.position(a)?, reg.position(b)?);
        if reg.modes()[pa].cutoff != reg.modes()[pb].cutoff {
            return Err(Error::DimensionMismatch(format!("cannot swap `{a}` and `{b}`: cutoffs differ")));
        }
        let d = reg.dim();
        let perm: Vec<usize> = (0..d)
            .map(|i| {
                let mut occ = reg.occupations(i);
                occ.swap(pa, pb);
                reg.index_of(&occ).expect("swapped occupations stay in range")
            })
            .collect();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for c in 0..d {
            for r in 0..d {
                m[(perm[r], perm[c])] = self.matrix[(r, c)];
            }
        }
        Ok(DensityOperator {
            register: self.register.clone(),
            matrix: m,
        })
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator> {
        partial_trace(&TraceSource::Density(self), keep)
    }
}

pub enum TraceSource<'a> {
    Ensemble(&'a Ensemble),
    Density(&'a DensityOperator),
}

/// Kept-mode positions (in register order) for a keep list.
fn keep_mask(reg: &Register, keep: &[&str]) -> Result<Vec<bool>> {
    if keep.is_empty() {
        return Err(Error::invalid("partial trace needs a non-empty keep set"));
    }
    let mut mask = vec![false; reg.len()];
    for label in keep {
        mask[reg.position(label)?] = true;
    }
    Ok(mask)
}

/// Split every flat index into (kept index, traced index).
struct Split {
    keep_reg: Arc<Register>,
    keep_idx: Vec<u32>,
    traced_idx: Vec<u32>,
    traced_dims: Vec<usize>,
    traced_positions: Vec<usize>,
}

impl Split {
    fn new(reg: &Register, mask: &[bool]) -> Result<Self> {
        let keep_modes: Vec<ModeSpec> = reg
            .modes()
            .iter()
            .zip(mask)
            .filter(|(_, &k)| k)
            .map(|(m, _)| m.clone())
            .collect();
        let keep_reg = Arc::new(Register::new(keep_modes)?);
        let traced_positions: Vec<usize> = (0..reg.len()).filter(|&k| !mask[k]).collect();
        let traced_dims: Vec<usize> = traced_positions.iter().map(|&k| reg.modes()[k].dim()).collect();
        // per-mode strides within the kept and traced sub-registers
        let mut sub_stride = vec![0usize; reg.len()];
        let (mut ks, mut ts) = (1usize, 1usize);
        for k in (0..reg.len()).rev() {
            if mask[k] {
                sub_stride[k] = ks;
                ks *= reg.modes()[k].dim();
            } else {
                sub_stride[k] = ts;
                ts *= reg.modes()[k].dim();
            }
        }
        let d = reg.dim();
        let mut keep_idx = Vec::with_capacity(d);
        let mut traced_idx = Vec::with_capacity(d);
        let mut occ = vec![0usize; reg.len()];
        let (mut ki, mut ti) = (0usize, 0usize);
        for _ in 0..d {
            keep_idx.push(ki as u32);
            traced_idx.push(ti as u32);
            for k in (0..reg.len()).rev() {
                let (acc, s) = if mask[k] { (&mut ki, sub_stride[k]) } else { (&mut ti, sub_stride[k]) };
                if occ[k] < reg.modes()[k].cutoff {
                    occ[k] += 1;
                    *acc += s;
                    break;
                }
                *acc -= occ[k] * s;
                occ[k] = 0;
            }
        }
        Ok(Split {
            keep_reg,
            keep_idx,
            traced_idx,
            traced_dims,
            traced_positions,
        })
    }

    fn traced_dim(&self) -> usize {
        self.traced_dims.iter().product()
    }
}

/// `partial_trace` over every mode not in `keep`.
pub fn partial_trace(source: &TraceSource<'_>, keep: &[&str]) -> Result<DensityOperator> {
    match source {
        TraceSource::Ensemble(ens) => weighted_partial_trace(ens, keep, &[]),
        TraceSource::Density(rho) => {
            let reg = &rho.register;
            let mask = keep_mask(reg, keep)?;
            let split = Split::new(reg, &mask)?;
            let dk = split.keep_reg.dim();
            let dt = split.traced_dim();
            // rows grouped by traced index
            let mut by_traced: Vec<Vec<(usize, usize)>> = vec![Vec::new(); dt];
            for i in 0..reg.dim() {
                by_traced[split.traced_idx[i] as usize].push((i, split.keep_idx[i] as usize));
            }
            let mut m = DMatrix::<C64>::zeros(dk, dk);
            for group in &by_traced {
                for &(ci, ck) in group {
                    for &(ri, rk) in group {
                        m[(rk, ck)] += rho.matrix[(ri, ci)];
                    }
                }
            }
            DensityOperator::new(split.keep_reg, m)
        }
    }
}

/// Σ_branches w · Tr_traced[(⊗ diag(weights)) |ψ⟩⟨ψ|], keeping `keep`.
///
/// Traced modes listed in `weights` get the given diagonal weight vector;
/// the remaining traced modes are traced with unit weight. The result is not
/// normalized: its trace is the outcome probability.
pub fn weighted_partial_trace(
    source: &Ensemble,
    keep: &[&str],
    weights: &[(&str, &[f64])],
) -> Result<DensityOperator> {
    let reg = source.register();
    let mask = keep_mask(reg, keep)?;
    let split = Split::new(reg, &mask)?;

    let mut mode_weights: Vec<Option<&[f64]>> = vec![None; reg.len()];
    for (label, w) in weights {
        let p = reg.position(label)?;
        if mask[p] {
            return Err(Error::invalid(format!("mode `{label}` is both kept and measured")));
        }
        if w.len() != reg.modes()[p].dim() {
            return Err(Error::DimensionMismatch(format!(
                "weight vector for `{label}` has {} entries, mode dimension is {}",
                w.len(),
                reg.modes()[p].dim()
            )));
        }
        mode_weights[p] = Some(w);
    }

    // combined diagonal weight for every traced basis index
    let dt = split.traced_dim();
    let mut tw = vec![1.0f64; dt];
    let mut occ = vec![0usize; split.traced_positions.len()];
    for w in tw.iter_mut() {
        for (slot, &p) in split.traced_positions.iter().enumerate() {
            if let Some(v) = mode_weights[p] {
                *w *= v[occ[slot]];
            }
        }
        for slot in (0..occ.len()).rev() {
            if occ[slot] + 1 < split.traced_dims[slot] {
                occ[slot] += 1;
                break;
            }
            occ[slot] = 0;
        }
    }

    let dk = split.keep_reg.dim();
    let zero = C64::new(0.0, 0.0);
    let mut m = DMatrix::<C64>::zeros(dk, dk);
    let mut columns = vec![zero; dk * dt];
    for (bw, state) in source.branches() {
        if *bw == 0.0 {
            continue;
        }
        columns.iter_mut().for_each(|c| *c = zero);
        for (i, a) in state.amplitudes().iter().enumerate() {
            let t = split.traced_idx[i] as usize;
            columns[t * dk + split.keep_idx[i] as usize] = *a;
        }
        for t in 0..dt {
            let w = tw[t] * bw;
            if w == 0.0 {
                continue;
            }
            let col = &columns[t * dk..(t + 1) * dk];
            if col.iter().all(|z| *z == zero) {
                continue;
            }
            rank_one_update(&mut m, w, col);
        }
    }
    hermitian_fill(&mut m);
    DensityOperator::new(split.keep_reg, m)
}
