//! Spin Hamiltonians, their eigen-decomposition and the dressed exchange
//! couplings seen by the reservoirs.
//!
//! Computational basis: bit i of the basis index is 1 when spin i is up, so
//! index 0 is the all-down state. σ⁺ = |↑⟩⟨↓|.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::crystal::{Branch, NormalModes};
use crate::{CMatrix, Error, Result};

pub const DEFAULT_MAX_SPINS: usize = 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Ising,
    Xy,
    Xxz,
    Xyz,
}

/// H = −h Σ_i σ_i^a + Σ_{i<j} (J^x_ij σ^x_iσ^x_j + J^y_ij σ^y_iσ^y_j + J^z_ij σ^z_iσ^z_j)
/// with the field axis a = x for Ising and z otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinModel {
    kind: ModelKind,
    field: f64,
    jx: DMatrix<f64>,
    jy: DMatrix<f64>,
    jz: DMatrix<f64>,
}

fn check_coupling(name: &str, j: &DMatrix<f64>, n: usize) -> Result<()> {
    if j.nrows() != n || j.ncols() != n {
        return Err(Error::InvalidInput(format!("{name} must be {n}x{n}")));
    }
    for a in 0..n {
        if j[(a, a)] != 0.0 {
            return Err(Error::InvalidInput(format!("{name} must have a zero diagonal")));
        }
        for b in 0..n {
            if !j[(a, b)].is_finite() || j[(a, b)] != j[(b, a)] {
                return Err(Error::InvalidInput(format!("{name} must be symmetric and finite")));
            }
        }
    }
    Ok(())
}

impl SpinModel {
    /// Validates kind-dependent occupancy and builds the model.
    pub fn new(
        kind: ModelKind,
        field: f64,
        jx: DMatrix<f64>,
        jy: DMatrix<f64>,
        jz: DMatrix<f64>,
    ) -> Result<Self> {
        let n = jz.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("spin model needs at least one spin".into()));
        }
        if !field.is_finite() {
            return Err(Error::InvalidInput("field must be finite".into()));
        }
        check_coupling("J^x", &jx, n)?;
        check_coupling("J^y", &jy, n)?;
        check_coupling("J^z", &jz, n)?;
        let zero = |m: &DMatrix<f64>| m.iter().all(|v| *v == 0.0);
        let ok = match kind {
            ModelKind::Ising => zero(&jx) && zero(&jy),
            ModelKind::Xy => zero(&jz),
            ModelKind::Xxz => jx == jy,
            ModelKind::Xyz => true,
        };
        if !ok {
            return Err(Error::InvalidInput(format!("couplings not allowed for {kind:?} model")));
        }
        Ok(Self { kind, field, jx, jy, jz })
    }

    pub fn ising(field: f64, jz: DMatrix<f64>) -> Result<Self> {
        let n = jz.nrows();
        Self::new(ModelKind::Ising, field, DMatrix::zeros(n, n), DMatrix::zeros(n, n), jz)
    }

    pub fn xy(field: f64, jx: DMatrix<f64>, jy: DMatrix<f64>) -> Result<Self> {
        let n = jx.nrows();
        Self::new(ModelKind::Xy, field, jx, jy, DMatrix::zeros(n, n))
    }

    pub fn xxz(field: f64, jperp: DMatrix<f64>, jpar: DMatrix<f64>) -> Result<Self> {
        Self::new(ModelKind::Xxz, field, jperp.clone(), jperp, jpar)
    }

    pub fn xyz(field: f64, jx: DMatrix<f64>, jy: DMatrix<f64>, jz: DMatrix<f64>) -> Result<Self> {
        Self::new(ModelKind::Xyz, field, jx, jy, jz)
    }

    /// Antiferromagnetic Ising dimer H = J σ^z_1σ^z_2.
    pub fn ising_dimer(j: f64) -> Self {
        Self::ising(0.0, DMatrix::from_row_slice(2, 2, &[0.0, j, j, 0.0])).expect("valid dimer")
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn spins(&self) -> usize {
        self.jz.nrows()
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn couplings(&self) -> [&DMatrix<f64>; 3] {
        [&self.jx, &self.jy, &self.jz]
    }
}

fn up(state: usize, i: usize) -> bool {
    state >> i & 1 == 1
}

fn spin_z(state: usize, i: usize) -> f64 {
    if up(state, i) {
        1.0
    } else {
        -1.0
    }
}

/// Dense Hamiltonian on 2^N states.
pub fn build_hamiltonian(model: &SpinModel, max_spins: usize) -> Result<CMatrix> {
    let n = model.spins();
    if n > max_spins {
        return Err(Error::SizeCap { what: "spin register".into(), size: n, cap: max_spins });
    }
    let d = 1usize << n;
    let mut h = CMatrix::zeros(d, d);
    let [jx, jy, jz] = model.couplings();
    for s in 0..d {
        for i in 0..n {
            match model.kind {
                ModelKind::Ising => h[(s ^ (1 << i), s)] -= model.field,
                _ => h[(s, s)] -= model.field * spin_z(s, i),
            }
            for j in i + 1..n {
                let (x, y, z) = (jx[(i, j)], jy[(i, j)], jz[(i, j)]);
                h[(s, s)] += z * spin_z(s, i) * spin_z(s, j);
                if x != 0.0 || y != 0.0 {
                    // σ^yσ^y flips both spins with sign −1 for aligned, +1 for opposite
                    let same = up(s, i) == up(s, j);
                    let yy = if same { -y } else { y };
                    h[(s ^ (1 << i) ^ (1 << j), s)] += x + yy;
                }
            }
        }
    }
    Ok(h)
}

/// Matrix of Σ_i c_i σ_i^+ on 2^N states.
pub fn raising_operator(coeffs: &[Complex64]) -> CMatrix {
    let n = coeffs.len();
    let d = 1usize << n;
    let mut x = CMatrix::zeros(d, d);
    for s in 0..d {
        for (i, c) in coeffs.iter().enumerate() {
            if !up(s, i) {
                x[(s | 1 << i, s)] += c;
            }
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinSpectrum {
    /// Ascending eigenvalues (rad/s).
    pub energies: Vec<f64>,
    /// Column ℓ is |ε_ℓ⟩ in the computational basis.
    pub vectors: CMatrix,
    /// Index ranges of degenerate levels.
    pub blocks: Vec<std::ops::Range<usize>>,
}

impl SpinSpectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn block_of(&self, l: usize) -> usize {
        self.blocks.iter().position(|b| b.contains(&l)).expect("level inside a block")
    }

    /// U† ρ U
    pub fn to_eigenbasis(&self, rho: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * rho * &self.vectors
    }

    /// U ρ U†
    pub fn to_computational(&self, rho: &CMatrix) -> CMatrix {
        &self.vectors * rho * self.vectors.adjoint()
    }

    /// Rotates each degenerate block so that it diagonalizes
    /// Σ_r P_b (X_r P_o X_r† + X_r† P_o X_r) P_b, with X_r = Σ_i g_{i,r} σ_i^+
    /// and P_o the projector outside the block. Levels that couple to the rest
    /// of the spectrum come first inside a block; uncoupled (dark) ones last.
    pub fn adapted_to(&self, drive: &ExchangeDrive) -> Result<SpinSpectrum> {
        let n_spins = drive.spins();
        if 1usize << n_spins != self.dim() {
            return Err(Error::InvalidInput("drive and spectrum act on different registers".into()));
        }
        let mut out = self.clone();
        if self.blocks.iter().all(|b| b.len() == 1) {
            return Ok(out);
        }
        let g: Vec<CMatrix> = drive
            .couplings
            .iter()
            .map(|c| self.vectors.adjoint() * raising_operator(c) * &self.vectors)
            .collect();
        let d = self.dim();
        for b in &self.blocks {
            let k = b.len();
            if k == 1 {
                continue;
            }
            let mut m = CMatrix::zeros(k, k);
            for gr in &g {
                for (a, la) in b.clone().enumerate() {
                    for (c, lc) in b.clone().enumerate() {
                        let mut acc = ZERO;
                        for o in (0..d).filter(|o| !b.contains(o)) {
                            acc += gr[(la, o)] * gr[(lc, o)].conj() + gr[(o, la)].conj() * gr[(o, lc)];
                        }
                        m[(a, c)] += acc;
                    }
                }
            }
            let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if scale == 0.0 {
                continue;
            }
            let eig = SymmetricEigen::new(m);
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&p, &q| eig.eigenvalues[q].total_cmp(&eig.eigenvalues[p]));
            let block_vecs = self.vectors.columns(b.start, k).into_owned();
            let mut col = b.start;
            for cluster in clusters(&order, |i| eig.eigenvalues[i], 1e-9 * scale) {
                let sub = CMatrix::from_columns(
                    &cluster.iter().map(|&i| &block_vecs * eig.eigenvectors.column(i)).collect::<Vec<_>>(),
                );
                let refs = (0..k).map(|c| block_vecs.column(c).into_owned());
                let canon = canonicalize(&sub, refs);
                for v in canon.column_iter() {
                    out.vectors.set_column(col, &v);
                    col += 1;
                }
            }
        }
        Ok(out)
    }
}

/// Groups consecutive entries of `order` whose values differ by at most `tol`.
fn clusters(order: &[usize], value: impl Fn(usize) -> f64, tol: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &i in order {
        match out.last_mut() {
            Some(c) if (value(*c.last().unwrap()) - value(i)).abs() <= tol => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Deterministic orthonormal basis of span(`sub`): Gram–Schmidt over the
/// projections of the reference vectors, taken in order.
fn canonicalize(sub: &CMatrix, refs: impl Iterator<Item = crate::CVector>) -> CMatrix {
    let c = sub.ncols();
    let mut chosen: Vec<crate::CVector> = Vec::with_capacity(c);
    for r in refs {
        if chosen.len() == c {
            break;
        }
        let mut v = sub * (sub.adjoint() * r);
        for u in &chosen {
            let p = u.dotc(&v);
            v -= u * p;
        }
        let norm = v.norm();
        if norm > 1e-3 {
            v /= Complex64::new(norm, 0.0);
            // second pass for accuracy
            for u in &chosen {
                let p = u.dotc(&v);
                v -= u * p;
            }
            let norm = v.norm();
            v /= Complex64::new(norm, 0.0);
            fix_phase(&mut v);
            chosen.push(v);
        }
    }
    if chosen.len() < c {
        // references did not span the subspace; fall back to the given basis
        return CMatrix::from_columns(
            &sub.column_iter().map(|v| {
                let mut v = v.into_owned();
                fix_phase(&mut v);
                v
            }).collect::<Vec<_>>(),
        );
    }
    CMatrix::from_columns(&chosen)
}

/// Makes the largest component real and positive (first one on ties).
pub(crate) fn fix_phase(v: &mut crate::CVector) {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let i = v.iter().position(|c| c.norm() >= max * (1.0 - 1e-9)).unwrap();
    let phase = v[i].conj() / v[i].norm();
    for x in v.iter_mut() {
        *x *= phase;
    }
    v[i] = Complex64::new(v[i].re, 0.0);
}

fn is_hermitian(h: &CMatrix, tol: f64) -> bool {
    let scale = h.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    (h - h.adjoint()).iter().all(|v| v.norm() <= tol * scale)
}

/// Hermitian eigensolve with ascending eigenvalues. Levels closer than
/// 1e-9·max(max|ε|, `floor`) are grouped into one degenerate block.
pub fn diagonalize_with_floor(h: &CMatrix, floor: f64) -> Result<SpinSpectrum> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::InvalidInput("Hamiltonian must be a non-empty square matrix".into()));
    }
    if !is_hermitian(h, 1e-12) {
        return Err(Error::InvalidInput("Hamiltonian is not Hermitian".into()));
    }
    let d = h.nrows();
    let real = h.iter().all(|v| v.im == 0.0);
    let (vals, vecs): (Vec<f64>, CMatrix) = if real {
        let eig = SymmetricEigen::new(h.map(|v| v.re));
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|v| Complex64::new(v, 0.0)))
    } else {
        let eig = SymmetricEigen::new(h.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let energies: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let emax = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let tol = 1e-9 * emax.max(floor);
    let mut vectors = CMatrix::zeros(d, d);
    let mut blocks = Vec::new();
    let mut start = 0;
    for l in 1..=d {
        if l == d || energies[l] - energies[l - 1] > tol {
            let sub = CMatrix::from_columns(
                &order[start..l].iter().map(|&i| vecs.column(i)).collect::<Vec<_>>(),
            );
            let canon = if l - start == 1 {
                let mut v = sub.column(0).into_owned();
                fix_phase(&mut v);
                CMatrix::from_columns(&[v])
            } else {
                let refs = (0..d).map(|s| crate::CVector::from_fn(d, |i, _| {
                    if i == s { Complex64::new(1.0, 0.0) } else { ZERO }
                }));
                canonicalize(&sub, refs)
            };
            for (k, v) in canon.column_iter().enumerate() {
                vectors.set_column(start + k, &v);
            }
            blocks.push(start..l);
            start = l;
        }
    }
    Ok(SpinSpectrum { energies, vectors, blocks })
}

/// [`diagonalize_with_floor`] with a 1 rad/s floor on the degeneracy scale.
pub fn diagonalize(h: &CMatrix) -> Result<SpinSpectrum> {
    diagonalize_with_floor(h, 1.0)
}

/// Red-sideband exchange couplings g_{i,r} on the spin register (index 0 is
/// the source, 1 the drain).
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeDrive {
    pub couplings: [Vec<Complex64>; 2],
}

impl ExchangeDrive {
    pub fn new(source: Vec<Complex64>, drain: Vec<Complex64>) -> Result<Self> {
        if source.len() != drain.len() || source.is_empty() {
            return Err(Error::InvalidInput(
                "source and drain couplings must cover the same spin register".into(),
            ));
        }
        if source.iter().chain(&drain).any(|g| !g.re.is_finite() || !g.im.is_finite()) {
            return Err(Error::InvalidInput("couplings must be finite".into()));
        }
        Ok(Self { couplings: [source, drain] })
    }

    /// Same real coupling on every spin.
    pub fn homogeneous(spins: usize, g_source: f64, g_drain: f64) -> Self {
        let c = |g: f64| vec![Complex64::new(g, 0.0); spins];
        Self { couplings: [c(g_source), c(g_drain)] }
    }

    pub fn spins(&self) -> usize {
        self.couplings[0].len()
    }

    pub fn max_coupling(&self, r: usize) -> f64 {
        self.couplings[r].iter().map(|g| g.norm()).fold(0.0, f64::max)
    }
}

/// Transition frequencies and dressed couplings in the drive-adapted basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionData {
    pub spectrum: SpinSpectrum,
    /// g̃_{ℓ,ℓ',r} = ⟨ε_ℓ| Σ_i g_{i,r} σ_i^+ |ε_ℓ'⟩, one matrix per reservoir.
    pub dressed: [CMatrix; 2],
}

impl TransitionData {
    /// ω_{ℓ,ℓ'} = ε_ℓ − ε_ℓ'
    pub fn frequency(&self, l: usize, lp: usize) -> f64 {
        self.spectrum.energies[l] - self.spectrum.energies[lp]
    }

    /// |ε_ℓ⟩⟨ε_ℓ'| in the computational basis.
    pub fn operator(&self, l: usize, lp: usize) -> CMatrix {
        let v = &self.spectrum.vectors;
        v.column(l) * v.column(lp).adjoint()
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }
}

pub fn transition_data(spectrum: &SpinSpectrum, drive: &ExchangeDrive) -> Result<TransitionData> {
    let spectrum = spectrum.adapted_to(drive)?;
    let u = &spectrum.vectors;
    let dressed = [0, 1].map(|r| u.adjoint() * raising_operator(&drive.couplings[r]) * u);
    Ok(TransitionData { spectrum, dressed })
}

/// Spin-spin couplings mediated by a state-dependent force on one radial
/// branch: J_ij = (F x₀)²/2 Σ_n M_in M_jn (ω_α/ω_n)/(μ − ω_n), with beat note
/// μ = ω_α + `detuning`. Indices of the result follow `sites`.
pub fn mediated_couplings(
    modes: &NormalModes,
    branch: Branch,
    sites: &[usize],
    force: f64,
    detuning: f64,
    guard: f64,
) -> Result<DMatrix<f64>> {
    if branch == Branch::Z {
        return Err(Error::InvalidInput("mediated couplings use a radial branch".into()));
    }
    let b = modes.branch(branch);
    let w_trap = modes.trap.radial(branch);
    let mu = w_trap + detuning;
    if let Some(&s) = sites.iter().find(|&&s| s >= b.len()) {
        return Err(Error::InvalidInput(format!("site {s} outside the crystal")));
    }
    for (n, &w) in b.frequencies.iter().enumerate() {
        if (mu - w).abs() < guard {
            return Err(Error::Resonance { mode: n + 1, beat: mu, omega: w });
        }
    }
    let k = sites.len();
    let mut j = DMatrix::zeros(k, k);
    for a in 0..k {
        for c in a + 1..k {
            let v: f64 = (0..b.len())
                .map(|n| {
                    let w = b.frequencies[n];
                    b.displacement(sites[a], n) * b.displacement(sites[c], n) * (w_trap / w) / (mu - w)
                })
                .sum();
            let v = 0.5 * force * force * v;
            j[(a, c)] = v;
            j[(c, a)] = v;
        }
    }
    Ok(j)
}

/// J^x and J^y from forces on the two radial branches; the branches must be
/// non-degenerate so the two interactions can be addressed separately.
pub fn mediated_xy_couplings(
    modes: &NormalModes,
    sites: &[usize],
    force: f64,
    detuning: f64,
    guard: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if modes.trap.omega_x == modes.trap.omega_y {
        return Err(Error::InvalidInput("XY couplings need omega_x != omega_y".into()));
    }
    Ok((
        mediated_couplings(modes, Branch::X, sites, force, detuning, guard)?,
        mediated_couplings(modes, Branch::Y, sites, force, detuning, guard)?,
    ))
}
