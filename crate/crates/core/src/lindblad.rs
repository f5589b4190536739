//! Dense Lindblad generators: time evolution and direct steady-state solves.
//!
//! dρ/dt = −i[H, ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ode::{self, OdeOptions};
use crate::{CMatrix, CVector, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub hamiltonian: CMatrix,
    pub jumps: Vec<CMatrix>,
    /// Σ_k L_k† L_k
    decay: CMatrix,
    /// H − (i/2) Σ_k L_k† L_k
    h_eff: CMatrix,
    /// Nonzero entries of each jump, or `None` where a dense product is cheaper.
    sparse: Vec<Option<Vec<(usize, usize, Complex64)>>>,
}

impl LindbladModel {
    pub fn new(hamiltonian: CMatrix, jumps: Vec<CMatrix>) -> Result<Self> {
        let d = hamiltonian.nrows();
        if !hamiltonian.is_square() || jumps.iter().any(|l| l.shape() != (d, d)) {
            return Err(Error::InvalidInput("operators must be square and of equal size".into()));
        }
        let mut decay = CMatrix::zeros(d, d);
        for l in &jumps {
            decay += l.adjoint() * l;
        }
        let h_eff = &hamiltonian - &decay * Complex64::new(0.0, 0.5);
        let sparse = jumps
            .iter()
            .map(|l| {
                let nz: Vec<_> = (0..d)
                    .flat_map(|j| (0..d).map(move |i| (i, j)))
                    .filter(|&(i, j)| l[(i, j)] != ZERO)
                    .map(|(i, j)| (i, j, l[(i, j)]))
                    .collect();
                (nz.len() * nz.len() < 2 * d * d * d).then_some(nz)
            })
            .collect();
        Ok(Self { hamiltonian, jumps, decay, h_eff, sparse })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn rhs(&self, rho: &CMatrix) -> CMatrix {
        let a = &self.h_eff * rho;
        let b = rho * self.h_eff.adjoint();
        let mut out = (a - b) * (-I);
        for (l, sp) in self.jumps.iter().zip(&self.sparse) {
            match sp {
                Some(nz) => {
                    for &(a, i, la) in nz {
                        for &(b, j, lb) in nz {
                            out[(a, b)] += la * rho[(i, j)] * lb.conj();
                        }
                    }
                }
                None => out += l * rho * l.adjoint(),
            }
        }
        out
    }

    /// Propagates ρ0 to each of the sorted times.
    pub fn propagate(&self, rho0: &CMatrix, times: &[f64], opts: OdeOptions) -> Result<Vec<CMatrix>> {
        let d = self.dim();
        let y0 = pack(rho0);
        let ys = ode::integrate(
            |_, y, dy| {
                let r = unpack(y, d);
                dy.copy_from_slice(&pack(&self.rhs(&r)));
            },
            0.0,
            &y0,
            times,
            opts,
        )?;
        Ok(ys.iter().map(|y| unpack(y, d)).collect())
    }

    /// Liouvillian matrix element ⟨E_cd| L |E_ab⟩.
    fn element(&self, c: usize, d: usize, a: usize, b: usize) -> Complex64 {
        let h = &self.hamiltonian;
        let k = &self.decay;
        let mut v = ZERO;
        if b == d {
            v += -I * h[(c, a)] - 0.5 * k[(c, a)];
        }
        if a == c {
            v += I * h[(b, d)] - 0.5 * k[(b, d)];
        }
        for l in &self.jumps {
            v += l[(c, a)] * l[(d, b)].conj();
        }
        v
    }

    /// Same model seen through the isometry Q (columns orthonormal), valid
    /// when span(Q) is invariant under H, L_k and L_k†L_k.
    fn restricted(&self, q: &CMatrix) -> Self {
        let qa = q.adjoint();
        let jumps = self.jumps.iter().map(|l| &qa * l * q).collect();
        Self::new(&qa * &self.hamiltonian * q, jumps).expect("restriction keeps shapes")
    }
}

pub(crate) fn pack(m: &CMatrix) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * m.len());
    for z in m.iter() {
        v.push(z.re);
        v.push(z.im);
    }
    v
}

pub(crate) fn unpack(v: &[f64], d: usize) -> CMatrix {
    CMatrix::from_iterator(d, d, v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])))
}

/// Smallest subspace containing the support of ρ0 and invariant under H,
/// every L_k and Σ L_k†L_k. When `charges` is given and every operator shifts
/// the charge by a fixed amount, the basis vectors carry definite charges.
#[derive(Debug, Clone)]
pub struct Subspace {
    pub basis: CMatrix,
    pub charges: Option<Vec<i64>>,
}

/// Fixed charge shift of an operator, if it has one.
fn charge_shift(op: &CMatrix, charges: &[i64]) -> Option<Option<i64>> {
    let scale = op.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut shift = None;
    for ((r, c), v) in op.iter().enumerate().map(|(k, v)| ((k % op.nrows(), k / op.nrows()), v)) {
        if v.norm() > 1e-13 * scale {
            let s = charges[r] - charges[c];
            match shift {
                None => shift = Some(s),
                Some(t) if t != s => return None,
                _ => {}
            }
        }
    }
    Some(shift)
}

pub fn reachable_subspace(model: &LindbladModel, rho0: &CMatrix, charges: Option<&[i64]>) -> Subspace {
    let d = model.dim();
    let mut ops: Vec<&CMatrix> = vec![&model.hamiltonian, &model.decay];
    ops.extend(model.jumps.iter());
    let charges = charges.filter(|q| ops.iter().all(|op| charge_shift(op, q).is_some()));

    // seeds: eigenvectors of ρ0 split into charge sectors
    let herm = (rho0 + rho0.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut seeds: Vec<CVector> = Vec::new();
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() <= 1e-14 * lmax {
            continue;
        }
        let v = eig.eigenvectors.column(k).into_owned();
        match charges {
            Some(q) => {
                let mut sectors: Vec<i64> = q.to_vec();
                sectors.sort_unstable();
                sectors.dedup();
                for s in sectors {
                    let p = CVector::from_fn(d, |i, _| if q[i] == s { v[i] } else { ZERO });
                    seeds.push(p);
                }
            }
            None => seeds.push(v),
        }
    }

    let mut basis: Vec<CVector> = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    let mut queue: std::collections::VecDeque<CVector> = seeds.into();
    while let Some(mut v) = queue.pop_front() {
        let norm0 = v.norm();
        if norm0 < 1e-300 {
            continue;
        }
        for _ in 0..2 {
            for u in &basis {
                let p = u.dotc(&v);
                v -= u * p;
            }
        }
        let norm = v.norm();
        if norm <= 1e-10 * norm0 {
            continue;
        }
        v /= Complex64::new(norm, 0.0);
        if let Some(q) = charges {
            let i = (0..d).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap();
            labels.push(q[i]);
        }
        for op in &ops {
            queue.push_back(*op * &v);
        }
        basis.push(v);
    }
    Subspace {
        basis: CMatrix::from_columns(&basis),
        charges: charges.map(|_| labels),
    }
}

/// Options for [`steady_state`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseSteadyOptions {
    /// Cap on the number of unknowns in the dense fallback.
    pub max_dense_unknowns: usize,
    /// Largest charge-sector block (unknowns) the block solver accepts.
    pub max_block_unknowns: usize,
}

impl Default for DenseSteadyOptions {
    fn default() -> Self {
        Self { max_dense_unknowns: 2500, max_block_unknowns: 4000 }
    }
}

#[derive(Debug, Clone)]
pub struct DenseSteadyState {
    pub rho: CMatrix,
    /// max |L ρ| relative to max |L| entries.
    pub residual: f64,
    pub subspace_dim: usize,
    pub unknowns: usize,
}

/// Stationary state reached from ρ0, solved directly on the reachable
/// subspace. With conserved charges only the charge-diagonal part is solved,
/// as a block-tridiagonal system ordered by charge.
pub fn steady_state(
    model: &LindbladModel,
    rho0: &CMatrix,
    charges: Option<&[i64]>,
    opts: DenseSteadyOptions,
) -> Result<DenseSteadyState> {
    let sub = reachable_subspace(model, rho0, charges);
    let m = sub.basis.ncols();
    if m == 0 {
        return Err(Error::SteadyState("initial state is zero".into()));
    }
    let reduced = model.restricted(&sub.basis);
    let labels = match &sub.charges {
        Some(q) if reduced.jumps.iter().all(|l| {
            matches!(charge_shift(l, q), Some(None) | Some(Some(-1..=1)))
        }) => q.clone(),
        _ => vec![0; m],
    };
    let (rho_v, unknowns) = sector_solve(&reduced, &labels, opts)?;
    let rho = &sub.basis * &rho_v * sub.basis.adjoint();
    let amax = |x: &CMatrix| x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let scale = amax(&reduced.hamiltonian) + amax(&reduced.decay);
    let res = amax(&reduced.rhs(&rho_v)) / (scale * amax(&rho_v)).max(1e-300);
    Ok(DenseSteadyState {
        rho,
        residual: res,
        subspace_dim: m,
        unknowns,
    })
}

fn sector_solve(model: &LindbladModel, labels: &[i64], opts: DenseSteadyOptions) -> Result<(CMatrix, usize)> {
    let m = model.dim();
    let mut sectors: Vec<i64> = labels.to_vec();
    sectors.sort_unstable();
    sectors.dedup();
    let members: Vec<Vec<usize>> =
        sectors.iter().map(|s| (0..m).filter(|&i| labels[i] == *s).collect()).collect();
    let unknowns: usize = members.iter().map(|v| v.len() * v.len()).sum();
    if sectors.len() == 1 && unknowns > opts.max_dense_unknowns {
        return Err(Error::SizeCap { what: "dense Liouvillian".into(), size: unknowns, cap: opts.max_dense_unknowns });
    }
    if let Some(big) = members.iter().map(|v| v.len() * v.len()).max() {
        if big > opts.max_block_unknowns.max(opts.max_dense_unknowns) {
            return Err(Error::SizeCap { what: "Liouvillian sector".into(), size: big, cap: opts.max_block_unknowns });
        }
    }
    let pairs = |s: usize| -> Vec<(usize, usize)> {
        let v = &members[s];
        v.iter().flat_map(|&a| v.iter().map(move |&b| (a, b))).collect()
    };
    let block = |out: usize, inp: usize| -> DMatrix<Complex64> {
        let po = pairs(out);
        let pi = pairs(inp);
        DMatrix::from_fn(po.len(), pi.len(), |r, c| {
            let (cc, dd) = po[r];
            let (a, b) = pi[c];
            model.element(cc, dd, a, b)
        })
    };
    let ns = sectors.len();
    // unknown 0 of sector 0 (a diagonal element) is pinned to 1 and its
    // equation dropped; trace preservation makes that equation redundant.
    let first = members[0][0];
    let pin = pairs(0).iter().position(|&p| p == (first, first)).unwrap();
    let keep = |s: usize, n: usize| -> Vec<usize> {
        if s == 0 { (0..n).filter(|&i| i != pin).collect() } else { (0..n).collect() }
    };
    let sub = |mat: DMatrix<Complex64>, rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| mat[(rows[r], cols[c])])
    };
    let sizes: Vec<usize> = (0..ns).map(|s| members[s].len().pow(2)).collect();
    let idx: Vec<Vec<usize>> = (0..ns).map(|s| keep(s, sizes[s])).collect();

    // rhs: −(column of the pinned unknown)
    let mut rhs: Vec<CVector> = (0..ns).map(|s| CVector::zeros(idx[s].len())).collect();
    for s in 0..ns.min(2) {
        let col = block(s, 0);
        for (r, &row) in idx[s].iter().enumerate() {
            rhs[s][r] = -col[(row, pin)];
        }
    }
    let adjacent = |a: usize, b: usize| sectors[a].abs_diff(sectors[b]) <= 1;

    // block Thomas: D'_s = D_s − A_s D'_{s−1}^{-1} C_{s−1}
    let mut lus: Vec<BlockLu> = Vec::with_capacity(ns);
    let mut upper: Vec<Option<DMatrix<Complex64>>> = Vec::with_capacity(ns);
    let mut y: Vec<CVector> = Vec::with_capacity(ns);
    for s in 0..ns {
        let mut d = sub(block(s, s), &idx[s], &idx[s]);
        let mut r = rhs[s].clone();
        if s > 0 && adjacent(s, s - 1) {
            let a = sub(block(s, s - 1), &idx[s], &idx[s - 1]);
            if let Some(c_prev) = &upper[s - 1] {
                let x = solve_mat(&lus[s - 1], c_prev)?;
                d -= &a * x;
            }
            let z = solve_vec(&lus[s - 1], &y[s - 1])?;
            r -= &a * z;
        }
        upper.push(if s + 1 < ns && adjacent(s, s + 1) {
            Some(sub(block(s, s + 1), &idx[s], &idx[s + 1]))
        } else {
            None
        });
        lus.push(d.lu());
        y.push(r);
    }
    let mut x: Vec<CVector> = vec![CVector::zeros(0); ns];
    for s in (0..ns).rev() {
        let mut r = y[s].clone();
        if let (Some(c), true) = (&upper[s], s + 1 < ns) {
            r -= c * &x[s + 1];
        }
        x[s] = solve_vec(&lus[s], &r)?;
    }

    let mut rho = CMatrix::zeros(m, m);
    for s in 0..ns {
        let p = pairs(s);
        for (k, &u) in idx[s].iter().enumerate() {
            rho[p[u]] = x[s][k];
        }
    }
    rho[(first, first)] = Complex64::new(1.0, 0.0);
    rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = rho.trace();
    if tr.norm() < 1e-300 || !tr.re.is_finite() {
        return Err(singular());
    }
    rho /= tr;
    Ok((rho, unknowns))
}

type BlockLu = nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>;

// nalgebra's LU solve does not accept empty systems
fn solve_vec(lu: &BlockLu, b: &CVector) -> Result<CVector> {
    if b.is_empty() {
        return Ok(b.clone());
    }
    lu.solve(b).ok_or_else(singular)
}

fn solve_mat(lu: &BlockLu, b: &CMatrix) -> Result<CMatrix> {
    if b.nrows() == 0 {
        return Ok(CMatrix::zeros(0, b.ncols()));
    }
    lu.solve(b).ok_or_else(singular)
}

fn singular() -> Error {
    Error::SteadyState("Liouvillian is singular on the reachable subspace (ambiguous steady state)".into())
}
