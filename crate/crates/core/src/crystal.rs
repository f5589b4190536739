//! Equilibrium positions and normal modes of a linear mixed-species crystal.
//!
//! Lengths are scaled by the Coulomb length of the reference mass and spring
//! constants by M_ref ω_z². The axial confinement is mass independent; the
//! radial (pseudopotential) spring constant of an ion of mass m is
//! M_ref ω_r² · (M_ref/m), so ω_x and ω_y are the trap frequencies of the
//! reference species.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::units;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Coolant,
    Spin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    pub name: String,
    /// Mass in amu.
    pub mass: f64,
    /// Natural linewidth Γ of the cooling transition (rad/s); zero for spins.
    pub linewidth: f64,
    pub role: Role,
}

impl IonSpecies {
    pub fn new(name: impl Into<String>, mass: f64, linewidth: f64, role: Role) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidInput(format!("ion mass must be positive, got {mass}")));
        }
        if !(linewidth >= 0.0) || !linewidth.is_finite() {
            return Err(Error::InvalidInput(format!("linewidth must be >= 0, got {linewidth}")));
        }
        Ok(Self { name: name.into(), mass, linewidth, role })
    }

    pub fn spin(name: impl Into<String>, mass: f64) -> Result<Self> {
        Self::new(name, mass, 0.0, Role::Spin)
    }

    pub fn coolant(name: impl Into<String>, mass: f64, linewidth: f64) -> Result<Self> {
        Self::new(name, mass, linewidth, Role::Coolant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapConfig {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
}

impl TrapConfig {
    pub fn new(omega_x: f64, omega_y: f64, omega_z: f64) -> Result<Self> {
        for (name, w) in [("omega_x", omega_x), ("omega_y", omega_y), ("omega_z", omega_z)] {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {w}")));
            }
        }
        if omega_z >= omega_x.min(omega_y) {
            return Err(Error::InvalidInput(
                "axial frequency must be below both radial frequencies".into(),
            ));
        }
        Ok(Self { omega_x, omega_y, omega_z })
    }

    pub fn radial(&self, branch: Branch) -> f64 {
        match branch {
            Branch::X => self.omega_x,
            Branch::Y => self.omega_y,
            Branch::Z => self.omega_z,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrystalArrangement {
    pub ions: Vec<IonSpecies>,
    /// Mass that sets the length scale and the radial trap frequencies.
    /// Defaults to the first ion's mass.
    pub reference_mass: Option<f64>,
}

impl CrystalArrangement {
    pub fn new(ions: Vec<IonSpecies>) -> Result<Self> {
        if ions.is_empty() {
            return Err(Error::InvalidInput("crystal has no ions".into()));
        }
        Ok(Self { ions, reference_mass: None })
    }

    pub fn len(&self) -> usize {
        self.ions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ions.is_empty()
    }

    pub fn reference_mass(&self) -> f64 {
        self.reference_mass.unwrap_or(self.ions[0].mass)
    }

    pub fn spin_sites(&self) -> Vec<usize> {
        self.sites(Role::Spin)
    }

    pub fn coolant_sites(&self) -> Vec<usize> {
        self.sites(Role::Coolant)
    }

    fn sites(&self, role: Role) -> Vec<usize> {
        (0..self.ions.len()).filter(|&i| self.ions[i].role == role).collect()
    }

    /// Checks the requirements of a transport run.
    pub fn check_transport(&self) -> Result<()> {
        if self.ions.len() < 2 {
            return Err(Error::InvalidInput("transport needs at least two ions".into()));
        }
        if self.coolant_sites().is_empty() {
            return Err(Error::InvalidInput("transport needs a coolant ion".into()));
        }
        if self.spin_sites().len() < 2 {
            return Err(Error::InvalidInput("transport needs at least two spin ions".into()));
        }
        Ok(())
    }

    fn relative_masses(&self) -> Vec<f64> {
        let m0 = self.reference_mass();
        self.ions.iter().map(|s| s.mass / m0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    X,
    Y,
    Z,
}

impl Branch {
    pub fn label(self) -> char {
        match self {
            Branch::X => 'x',
            Branch::Y => 'y',
            Branch::Z => 'z',
        }
    }
}

/// One phonon branch: ascending frequencies and mass-weighted eigenvectors
/// (column n is mode n, row i is ion i).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBranch {
    pub frequencies: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl ModeBranch {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// M_{i,n}
    pub fn displacement(&self, ion: usize, mode: usize) -> f64 {
        self.vectors[(ion, mode)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalModes {
    pub trap: TrapConfig,
    pub masses: Vec<f64>,
    /// Equilibrium positions in metres.
    pub positions: Vec<f64>,
    pub x: ModeBranch,
    pub y: ModeBranch,
    pub z: ModeBranch,
}

impl NormalModes {
    pub fn branch(&self, b: Branch) -> &ModeBranch {
        match b {
            Branch::X => &self.x,
            Branch::Y => &self.y,
            Branch::Z => &self.z,
        }
    }
}

fn axial_gradient(z: &[f64]) -> DVector<f64> {
    let n = z.len();
    DVector::from_fn(n, |i, _| {
        let mut g = z[i];
        for j in 0..n {
            if j != i {
                let d = z[i] - z[j];
                g -= d.signum() / (d * d);
            }
        }
        g
    })
}

fn axial_energy(z: &[f64]) -> f64 {
    let mut e = 0.0;
    for i in 0..z.len() {
        e += 0.5 * z[i] * z[i];
        for j in i + 1..z.len() {
            e += 1.0 / (z[i] - z[j]).abs();
        }
    }
    e
}

/// Coulomb coupling matrix c_ij = 1/|z_i - z_j|³ (zero diagonal).
fn inverse_cubes(z: &[f64]) -> DMatrix<f64> {
    let n = z.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (z[i] - z[j]).abs().powi(-3) })
}

fn axial_hessian(z: &[f64]) -> DMatrix<f64> {
    let c = inverse_cubes(z);
    let n = z.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 + 2.0 * c.row(i).sum()
        } else {
            -2.0 * c[(i, j)]
        }
    })
}

fn radial_hessian(z: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let c = inverse_cubes(z);
    let n = z.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { beta[i] - c.row(i).sum() } else { c[(i, j)] })
}

/// Dimensionless equilibrium positions (units of the Coulomb length).
pub fn dimensionless_positions(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let spacing = 2.018 * (n as f64).powf(-0.559);
    let mut z: Vec<f64> = (0..n).map(|i| (i as f64 - 0.5 * (n as f64 - 1.0)) * spacing).collect();
    let mut residual = axial_gradient(&z).amax();
    for _ in 0..200 {
        if residual < 1e-13 {
            return Ok(z);
        }
        let g = axial_gradient(&z);
        let h = axial_hessian(&z);
        let step = h
            .cholesky()
            .map(|c| c.solve(&g))
            .unwrap_or_else(|| g.clone());
        // keep the ordering and require descent
        let mut alpha: f64 = 1.0;
        for i in 0..n.saturating_sub(1) {
            let gap = z[i + 1] - z[i];
            let closing = step[i + 1] - step[i];
            if closing > 0.0 {
                alpha = alpha.min(0.9 * gap / closing);
            }
        }
        let e0 = axial_energy(&z);
        let mut trial = z.clone();
        loop {
            for i in 0..n {
                trial[i] = z[i] - alpha * step[i];
            }
            if axial_energy(&trial) <= e0 + 1e-14 * e0.abs() || alpha < 1e-12 {
                break;
            }
            alpha *= 0.5;
        }
        z.copy_from_slice(&trial);
        residual = axial_gradient(&z).amax();
    }
    if residual < 1e-10 {
        return Ok(z);
    }
    Err(Error::NoConvergence { what: "equilibrium positions".into(), residual })
}

fn beta(trap: &TrapConfig, arr: &CrystalArrangement, branch: Branch) -> Vec<f64> {
    let r = (trap.radial(branch) / trap.omega_z).powi(2);
    arr.relative_masses().iter().map(|mu| r / mu).collect()
}

/// Mass-weighted eigen-decomposition, ascending, sign-fixed.
fn mass_weighted_modes(k: &DMatrix<f64>, mu: &[f64], branch: Branch) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = mu.len();
    let d = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / (mu[i] * mu[j]).sqrt());
    let eig = SymmetricEigen::new(d);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut lambdas = Vec::with_capacity(n);
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &idx) in order.iter().enumerate() {
        let lam = eig.eigenvalues[idx];
        if lam <= 0.0 {
            return Err(Error::Unstable { branch: branch.label(), mode: col + 1, eigenvalue: lam });
        }
        lambdas.push(lam);
        let mut v = eig.eigenvectors.column(idx).into_owned();
        fix_sign(&mut v);
        vecs.set_column(col, &v);
    }
    Ok((lambdas, vecs))
}

/// Makes the largest-magnitude component positive (first one on ties).
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let max = v.amax();
    if let Some(i) = v.iter().position(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if v[i] < 0.0 {
            v.neg_mut();
        }
    }
}

/// Equilibrium positions in metres, ascending. Fails when the linear chain is
/// unstable against a zig-zag transition in either radial direction.
pub fn equilibrium_positions(trap: &TrapConfig, arr: &CrystalArrangement) -> Result<Vec<f64>> {
    let z = dimensionless_positions(arr.len())?;
    let mu = arr.relative_masses();
    for branch in [Branch::X, Branch::Y] {
        mass_weighted_modes(&radial_hessian(&z, &beta(trap, arr, branch)), &mu, branch)?;
    }
    let l = units::coulomb_length(arr.reference_mass(), trap.omega_z);
    Ok(z.iter().map(|x| x * l).collect())
}

/// All three branches at the given equilibrium positions (metres).
pub fn normal_modes(
    trap: &TrapConfig,
    arr: &CrystalArrangement,
    positions: &[f64],
) -> Result<NormalModes> {
    if positions.len() != arr.len() {
        return Err(Error::InvalidInput("positions do not match the arrangement".into()));
    }
    let l = units::coulomb_length(arr.reference_mass(), trap.omega_z);
    let z: Vec<f64> = positions.iter().map(|p| p / l).collect();
    if z.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("positions must be strictly increasing".into()));
    }
    let mu = arr.relative_masses();
    let build = |branch: Branch, k: DMatrix<f64>| -> Result<ModeBranch> {
        let (lam, vectors) = mass_weighted_modes(&k, &mu, branch)?;
        Ok(ModeBranch {
            frequencies: lam.iter().map(|l| trap.omega_z * l.sqrt()).collect(),
            vectors,
        })
    };
    let zb = build(Branch::Z, axial_hessian(&z))?;
    let xb = build(Branch::X, radial_hessian(&z, &beta(trap, arr, Branch::X)))?;
    let yb = build(Branch::Y, radial_hessian(&z, &beta(trap, arr, Branch::Y)))?;
    Ok(NormalModes {
        trap: *trap,
        masses: arr.ions.iter().map(|s| s.mass).collect(),
        positions: positions.to_vec(),
        x: xb,
        y: yb,
        z: zb,
    })
}

/// Convenience: positions and modes in one call.
pub fn solve_crystal(trap: &TrapConfig, arr: &CrystalArrangement) -> Result<NormalModes> {
    let pos = equilibrium_positions(trap, arr)?;
    normal_modes(trap, arr, &pos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mhz;

    fn equal(n: usize) -> CrystalArrangement {
        CrystalArrangement::new((0..n).map(|_| IonSpecies::spin("Mg25", 25.0).unwrap()).collect())
            .unwrap()
    }

    fn trap() -> TrapConfig {
        TrapConfig::new(mhz(4.0), mhz(4.5), mhz(1.0)).unwrap()
    }

    #[test]
    fn single_ion_at_centre() {
        assert_eq!(dimensionless_positions(1).unwrap(), vec![0.0]);
    }

    #[test]
    fn two_and_three_ions() {
        let z = dimensionless_positions(2).unwrap();
        assert!((z[1] - 0.25f64.cbrt()).abs() < 1e-12 && (z[0] + z[1]).abs() < 1e-12);
        let z = dimensionless_positions(3).unwrap();
        assert!((z[2] - 1.25f64.cbrt()).abs() < 1e-12 && z[1].abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_for_longer_chains() {
        for n in 2..12 {
            let z = dimensionless_positions(n).unwrap();
            assert!(axial_gradient(&z).amax() < 1e-10, "n={n}");
            assert!(z.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn three_ion_axial_frequencies() {
        let m = solve_crystal(&trap(), &equal(3)).unwrap();
        let w = mhz(1.0);
        let expect = [1.0, 3f64.sqrt(), (29.0f64 / 5.0).sqrt()];
        for (f, e) in m.z.frequencies.iter().zip(expect) {
            assert!((f / w - e).abs() < 1e-10);
        }
        for i in 0..3 {
            assert!((m.z.vectors[(i, 0)] - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        }
        assert!(m.z.vectors[(1, 1)].abs() < 1e-12);
    }

    #[test]
    fn radial_com_mode_at_trap_frequency() {
        let m = solve_crystal(&trap(), &equal(3)).unwrap();
        assert!((m.x.frequencies[2] / mhz(4.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zig_zag_is_reported() {
        let weak = TrapConfig::new(mhz(1.05), mhz(1.1), mhz(1.0)).unwrap();
        match equilibrium_positions(&weak, &equal(5)) {
            Err(Error::Unstable { branch: 'x', mode: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_trap() {
        assert!(TrapConfig::new(-1.0, 2.0, 0.5).is_err());
        assert!(TrapConfig::new(1.0, 2.0, 1.5).is_err());
    }
}
