//! Synthetic dimers and model Hamiltonians.
//!
//! A dimer is built from a small non-orthogonal AO basis split into an A region
//! and a B region. Each monomer gets canonical RHF orbitals over the whole
//! (dimer-centred) basis, and every bundle tensor is an exact MO transform of
//! the AO quantities, which are kept in [`UnionIntegrals`] for brute-force checks.

use crate::bundle::{transform4, ActiveSpaceSpec, FoldedActiveHamiltonian, IntegralBundle};
use crate::error::{Error, Result};
use crate::linalg::sym_eig;
use ndarray::{s, Array1, Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub x: f64,
    pub charge: f64,
    /// `(exponent, power)` of each basis function `(x - X)^power exp(-exponent (x - X)^2)`.
    pub shells: Vec<(f64, u32)>,
}

impl Atom {
    pub fn hydrogenic(x: f64) -> Atom {
        Atom { x, charge: 1.0, shells: vec![(0.8, 0)] }
    }
}

/// One-dimensional soft-Coulomb dimer with Gaussian basis functions.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub atoms_a: Vec<Atom>,
    pub atoms_b: Vec<Atom>,
    pub n_elec_a: usize,
    pub n_elec_b: usize,
    /// Number of MOs kept per monomer; `None` keeps all of them.
    pub n_mo_a: Option<usize>,
    pub n_mo_b: Option<usize>,
    /// `a` in the interaction kernel `1/sqrt(d^2 + a^2)`.
    pub softening: f64,
    /// Random displacement of atoms and relative change of exponents.
    pub jitter: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Two chains of hydrogen-like atoms along the axis, B starting `separation` after the end of A.
    pub fn chains(n_a: usize, bond_a: f64, n_b: usize, bond_b: f64, separation: f64) -> SyntheticSpec {
        let atoms_a: Vec<Atom> = (0..n_a).map(|i| Atom::hydrogenic(i as f64 * bond_a)).collect();
        let start = (n_a.max(1) - 1) as f64 * bond_a + separation;
        let atoms_b = (0..n_b).map(|i| Atom::hydrogenic(start + i as f64 * bond_b)).collect();
        SyntheticSpec {
            atoms_a,
            atoms_b,
            n_elec_a: n_a,
            n_elec_b: n_b,
            n_mo_a: None,
            n_mo_b: None,
            softening: 1.0,
            jitter: 0.0,
            seed: 0,
        }
    }

    pub fn with_mos(mut self, n_mo_a: usize, n_mo_b: usize) -> SyntheticSpec {
        self.n_mo_a = Some(n_mo_a);
        self.n_mo_b = Some(n_mo_b);
        self
    }

    pub fn jittered(mut self, jitter: f64, seed: u64) -> SyntheticSpec {
        self.jitter = jitter;
        self.seed = seed;
        self
    }
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec::chains(2, 1.4, 2, 1.4, 3.5)
    }
}

/// AO-level data of a synthetic dimer.
#[derive(Debug, Clone)]
pub struct UnionIntegrals {
    pub s: Array2<f64>,
    pub t: Array2<f64>,
    pub v_a: Array2<f64>,
    pub v_b: Array2<f64>,
    pub eri: Array4<f64>,
    pub v0: f64,
    pub c_a: Array2<f64>,
    pub c_b: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticDimer {
    pub bundle: IntegralBundle,
    pub union: UnionIntegrals,
}

fn sym_noise(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let x = scale * rng.random_range(-1.0..1.0);
            m[[i, j]] = x;
            m[[j, i]] = x;
        }
    }
    m
}

/// Canonical RHF orbitals of `h` with two-electron AO integrals `eri` in metric `s`.
pub fn rhf_orbitals(h: &Array2<f64>, eri: &Array4<f64>, s: &Array2<f64>, n_elec: usize) -> Result<(Array2<f64>, Array1<f64>)> {
    let n = h.nrows();
    let nocc = n_elec / 2;
    let se = sym_eig(s)?;
    let x = Array2::from_shape_fn((n, n), |(i, j)| se.eigenvectors[[i, j]] / se.eigenvalues[j].sqrt());
    let solve = |f: &Array2<f64>| -> Result<(Array2<f64>, Array1<f64>)> {
        let fp = x.t().dot(f).dot(&x);
        let fp = (&fp + &fp.t()) * 0.5;
        let e = sym_eig(&fp)?;
        Ok((x.dot(&e.eigenvectors), e.eigenvalues))
    };
    let fock = |c: &Array2<f64>| {
        let occ = c.slice(s![.., ..nocc]);
        let d = occ.dot(&occ.t());
        let mut f = h.clone();
        for p in 0..n {
            for q in 0..n {
                let mut v = 0.0;
                for r in 0..n {
                    for t in 0..n {
                        v += d[[r, t]] * (2.0 * eri[[p, q, r, t]] - eri[[p, t, r, q]]);
                    }
                }
                f[[p, q]] += v;
            }
        }
        let fds = f.dot(&d).dot(s);
        let err = &fds - &fds.t();
        (f, err)
    };
    let (mut c, _) = solve(h)?;
    let mut history: Vec<(Array2<f64>, Array2<f64>)> = Vec::new();
    for _ in 0..1000 {
        let (f, err) = fock(&c);
        if err.iter().fold(0.0_f64, |m, x| m.max(x.abs())) < 1e-11 {
            return solve(&f);
        }
        history.push((f, err));
        if history.len() > 8 {
            history.remove(0);
        }
        let k = history.len();
        let mut b = nalgebra::DMatrix::<f64>::zeros(k + 1, k + 1);
        let mut rhs = nalgebra::DVector::<f64>::zeros(k + 1);
        for i in 0..k {
            for j in 0..k {
                b[(i, j)] = history[i].1.iter().zip(history[j].1.iter()).map(|(x, y)| x * y).sum();
            }
            b[(i, k)] = -1.0;
            b[(k, i)] = -1.0;
        }
        rhs[k] = -1.0;
        let f_next = match b.lu().solve(&rhs) {
            Some(w) if k > 1 => history.iter().enumerate().fold(Array2::zeros((n, n)), |acc, (i, (f, _))| acc + f * w[i]),
            _ => history[k - 1].0.clone(),
        };
        c = solve(&f_next)?.0;
    }
    Err(Error::ConvergenceFailure)
}

const GRID_STEP: f64 = 0.05;
const GRID_MARGIN: f64 = 10.0;

pub fn synthetic_dimer(spec: &SyntheticSpec) -> Result<SyntheticDimer> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut shake = |atoms: &[Atom]| -> Vec<Atom> {
        atoms
            .iter()
            .map(|at| Atom {
                x: at.x + spec.jitter * rng.random_range(-1.0..1.0),
                charge: at.charge,
                shells: at.shells.iter().map(|&(e, l)| (e * (1.0 + 0.2 * spec.jitter * rng.random_range(-1.0..1.0)), l)).collect(),
            })
            .collect()
    };
    let atoms_a = shake(&spec.atoms_a);
    let atoms_b = shake(&spec.atoms_b);
    let kernel = |d: f64| 1.0 / (d * d + spec.softening * spec.softening).sqrt();

    let all = atoms_a.iter().chain(&atoms_b);
    let lo = all.clone().map(|a| a.x).fold(f64::INFINITY, f64::min) - GRID_MARGIN;
    let hi = all.map(|a| a.x).fold(f64::NEG_INFINITY, f64::max) + GRID_MARGIN;
    let n_grid = ((hi - lo) / GRID_STEP).ceil() as usize + 1;
    let grid: Vec<f64> = (0..n_grid).map(|g| lo + g as f64 * GRID_STEP).collect();

    let mut phi = Vec::new();
    let mut dphi = Vec::new();
    for at in atoms_a.iter().chain(&atoms_b) {
        for &(alpha, l) in &at.shells {
            let f: Vec<f64> = grid.iter().map(|&x| (x - at.x).powi(l as i32) * (-alpha * (x - at.x).powi(2)).exp()).collect();
            let d: Vec<f64> = grid
                .iter()
                .map(|&x| {
                    let u = x - at.x;
                    let lower = if l == 0 { 0.0 } else { l as f64 * u.powi(l as i32 - 1) };
                    (lower - 2.0 * alpha * u.powi(l as i32 + 1)) * (-alpha * u * u).exp()
                })
                .collect();
            let norm = (f.iter().map(|v| v * v).sum::<f64>() * GRID_STEP).sqrt();
            phi.push(f.iter().map(|v| v / norm).collect::<Vec<f64>>());
            dphi.push(d.iter().map(|v| v / norm).collect::<Vec<f64>>());
        }
    }
    let k = phi.len();
    let quad = |f: &dyn Fn(usize) -> f64, a: &[f64], b: &[f64]| (0..n_grid).map(|g| f(g) * a[g] * b[g]).sum::<f64>() * GRID_STEP;
    let potential = |atoms: &[Atom]| -> Vec<f64> { grid.iter().map(|&x| -atoms.iter().map(|a| a.charge * kernel(x - a.x)).sum::<f64>()).collect() };
    let (pa, pb) = (potential(&atoms_a), potential(&atoms_b));
    let s = Array2::from_shape_fn((k, k), |(i, j)| quad(&|_| 1.0, &phi[i], &phi[j]));
    let t = Array2::from_shape_fn((k, k), |(i, j)| 0.5 * quad(&|_| 1.0, &dphi[i], &dphi[j]));
    let v_a = Array2::from_shape_fn((k, k), |(i, j)| quad(&|g| pa[g], &phi[i], &phi[j]));
    let v_b = Array2::from_shape_fn((k, k), |(i, j)| quad(&|g| pb[g], &phi[i], &phi[j]));
    if sym_eig(&s)?.eigenvalues[0] < 1e-3 {
        return Err(Error::Config("synthetic basis is nearly linearly dependent".into()));
    }

    // (mn|ls) = rho_mn^T W rho_ls with a positive definite kernel
    let rho = Array2::from_shape_fn((k * k, n_grid), |(mn, g)| phi[mn / k][g] * phi[mn % k][g] * GRID_STEP);
    let w = Array2::from_shape_fn((n_grid, n_grid), |(g, h)| kernel(grid[g] - grid[h]));
    let eri = rho.dot(&w).dot(&rho.t()).into_shape_with_order((k, k, k, k)).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let eri = symmetrize4(eri, &[[1, 0, 2, 3], [0, 1, 3, 2], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 0, 1], [2, 3, 1, 0], [3, 2, 1, 0]]);

    let pair_sum = |x: &[Atom], y: &[Atom], same: bool| -> f64 {
        let mut e = 0.0;
        for (i, a) in x.iter().enumerate() {
            for (j, b) in y.iter().enumerate() {
                if !same || j > i {
                    e += a.charge * b.charge * kernel(a.x - b.x);
                }
            }
        }
        e
    };
    let v0 = pair_sum(&atoms_a, &atoms_b, false);
    let e_nuc_a = pair_sum(&atoms_a, &atoms_a, true);
    let e_nuc_b = pair_sum(&atoms_b, &atoms_b, true);

    let (ca, _) = rhf_orbitals(&(&t + &v_a), &eri, &s, spec.n_elec_a)?;
    let (cb, _) = rhf_orbitals(&(&t + &v_b), &eri, &s, spec.n_elec_b)?;
    let na = spec.n_mo_a.unwrap_or(k).min(k);
    let nb = spec.n_mo_b.unwrap_or(k).min(k);
    let c_a = ca.slice(s![.., ..na]).to_owned();
    let c_b = cb.slice(s![.., ..nb]).to_owned();

    let union = UnionIntegrals { s, t, v_a, v_b, eri, v0, c_a, c_b };
    let bundle = union.to_bundle(spec.n_elec_a, spec.n_elec_b, e_nuc_a, e_nuc_b);
    bundle.validate()?;
    Ok(SyntheticDimer { bundle, union })
}

fn symmetrize4(t: Array4<f64>, perms: &[[usize; 4]]) -> Array4<f64> {
    let mut acc = t.clone();
    for p in perms {
        acc = acc + t.view().permuted_axes(*p);
    }
    acc / (perms.len() + 1) as f64
}

impl UnionIntegrals {
    pub fn to_bundle(&self, n_elec_a: usize, n_elec_b: usize, e_nuc_a: f64, e_nuc_b: f64) -> IntegralBundle {
        let (a, b) = (&self.c_a, &self.c_b);
        let sym2 = |m: Array2<f64>| (&m + &m.t()) * 0.5;
        let h_a = sym2(a.t().dot(&(&self.t + &self.v_a)).dot(a));
        let h_b = sym2(b.t().dot(&(&self.t + &self.v_b)).dot(b));
        let eight = [[1, 0, 2, 3], [0, 1, 3, 2], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 0, 1], [2, 3, 1, 0], [3, 2, 1, 0]];
        let eri_a = symmetrize4(transform4(&self.eri, [Some(a), Some(a), Some(a), Some(a)]), &eight);
        let eri_b = symmetrize4(transform4(&self.eri, [Some(b), Some(b), Some(b), Some(b)]), &eight);
        let mut bundle = IntegralBundle::from_monomers(
            (h_a, eri_a, n_elec_a, e_nuc_a),
            (h_b, eri_b, n_elec_b, e_nuc_b),
        );
        bundle.v_nuc_ab = self.v0;
        bundle.s_ab = a.t().dot(&self.s).dot(b);
        bundle.u_b_on_a = sym2(a.t().dot(&self.v_b).dot(a));
        bundle.u_a_on_b = sym2(b.t().dot(&self.v_a).dot(b));
        bundle.u_a_cross = a.t().dot(&self.v_a).dot(b);
        bundle.u_b_cross = a.t().dot(&self.v_b).dot(b);
        bundle.v_inter = symmetrize4(transform4(&self.eri, [Some(a), Some(a), Some(b), Some(b)]), &[[1, 0, 2, 3], [0, 1, 3, 2], [1, 0, 3, 2]]);
        bundle.eri_abab = symmetrize4(transform4(&self.eri, [Some(a), Some(b), Some(a), Some(b)]), &[[2, 3, 0, 1]]);
        bundle.eri_abbb = symmetrize4(transform4(&self.eri, [Some(a), Some(b), Some(b), Some(b)]), &[[0, 1, 3, 2]]);
        bundle.eri_abaa = symmetrize4(transform4(&self.eri, [Some(a), Some(b), Some(a), Some(a)]), &[[0, 1, 3, 2]]);
        bundle
    }
}

/// Minimal-basis H2 at R = 1.4 bohr in its MO basis: `(h, eri, n_elec, e_nuc)`.
pub fn h2_minimal() -> (Array2<f64>, Array4<f64>, usize, f64) {
    let h = ndarray::array![[-1.2528, 0.0], [0.0, -0.4756]];
    let (j11, j12, j22, k12) = (0.6746, 0.6636, 0.6975, 0.1813);
    let mut eri = Array4::zeros((2, 2, 2, 2));
    eri[[0, 0, 0, 0]] = j11;
    eri[[1, 1, 1, 1]] = j22;
    eri[[0, 0, 1, 1]] = j12;
    eri[[1, 1, 0, 0]] = j12;
    for (p, q, r, s) in [(0, 1, 0, 1), (0, 1, 1, 0), (1, 0, 0, 1), (1, 0, 1, 0)] {
        eri[[p, q, r, s]] = k12;
    }
    (h, eri, 2, 1.0 / 1.4)
}

/// Two non-interacting minimal-basis H2 molecules.
pub fn h2_pair_bundle() -> IntegralBundle {
    IntegralBundle::from_monomers(h2_minimal(), h2_minimal())
}

/// Half-filled Hubbard chain with open ends, as an active-space Hamiltonian.
pub fn hubbard_chain(n_sites: usize, t: f64, u: f64) -> FoldedActiveHamiltonian {
    let mut h = Array2::zeros((n_sites, n_sites));
    for i in 0..n_sites.saturating_sub(1) {
        h[[i, i + 1]] = -t;
        h[[i + 1, i]] = -t;
    }
    let mut eri = Array4::zeros((n_sites, n_sites, n_sites, n_sites));
    for i in 0..n_sites {
        eri[[i, i, i, i]] = u;
    }
    FoldedActiveHamiltonian { h_tilde: h, eri_act: eri, e_core: 0.0 }
}

/// Random real Hamiltonian with 8-fold symmetric positive-semidefinite ERIs.
pub fn random_folded(n: usize, seed: u64) -> FoldedActiveHamiltonian {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = sym_noise(&mut rng, n, 0.3);
    for i in 0..n {
        h[[i, i]] = -1.5 + 0.6 * i as f64 + 0.1 * rng.random_range(-1.0..1.0);
    }
    let factors: Vec<Array2<f64>> = (0..2 * n).map(|_| sym_noise(&mut rng, n, 0.4)).collect();
    let eri = Array4::from_shape_fn((n, n, n, n), |(p, q, r, t)| {
        factors.iter().map(|l| l[[p, q]] * l[[r, t]]).sum::<f64>()
    });
    FoldedActiveHamiltonian { h_tilde: h, eri_act: eri, e_core: rng.random_range(0.0..1.0) }
}

/// Full active space over a monomer's orbitals.
pub fn full_active(n_orb: usize, n_elec: usize) -> ActiveSpaceSpec {
    ActiveSpaceSpec::full(n_orb, n_elec)
}
