//! Exact diagonalization of an active-space Hamiltonian in the fixed
//! `(N_alpha, N_beta)` determinant basis.

use crate::bundle::{ActiveSpaceSpec, FoldedActiveHamiltonian};
use crate::error::{Error, Result};
use crate::fermion::{hop, Sector};
use crate::linalg::sym_eig;
use crate::rdm::{transition_rdms, SpinSummedRDMs};
use ndarray::{Array2, Array4};

pub const MAX_CASCI_ORBITALS: usize = 8;
const MAX_STORED_ORBITALS: usize = 6;

#[derive(Debug, Clone)]
pub struct CasciSolution {
    pub m_act: usize,
    pub n_act_elec: usize,
    pub energies: Vec<f64>,
    pub ground_rdms: SpinSummedRDMs,
    /// Sector-basis eigenvectors as columns, kept for `m_act <= 6`.
    pub eigenvectors: Option<Array2<f64>>,
    pub sector: Sector,
    pub s_squared: f64,
}

/// `<S^2>` of a real full-space vector with `N_alpha = N_beta`.
pub fn spin_squared(psi: &[f64], m: usize) -> f64 {
    let mut out = vec![0.0; psi.len()];
    for (st, &a) in psi.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for p in 0..m {
            if let Some((s, f)) = hop(st, p, m + p) {
                out[s] += f * a;
            }
        }
    }
    out.iter().map(|x| x * x).sum()
}

impl CasciSolution {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn state(&self, k: usize) -> Option<Vec<f64>> {
        let v = self.eigenvectors.as_ref()?;
        Some(self.sector.scatter(&v.column(k).to_vec()))
    }

    /// `<0|E_pq|mu>` for every excited state `mu`, embedded in `n_orb` orbitals.
    pub fn transition_gammas(&self, spec: &ActiveSpaceSpec, n_orb: usize) -> Result<Vec<Array2<f64>>> {
        let v = self.eigenvectors.as_ref().ok_or_else(|| {
            Error::DimensionTooLarge(format!("eigenvectors not stored for {} active orbitals", self.m_act))
        })?;
        let m = self.m_act;
        let ground = self.sector.scatter(&v.column(0).to_vec());
        let mut out = Vec::with_capacity(self.energies.len() - 1);
        for k in 1..self.energies.len() {
            let ket = self.sector.scatter(&v.column(k).to_vec());
            let mut g = Array2::zeros((m, m));
            for (st, &a) in ket.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for sigma in 0..2 {
                    for p in 0..m {
                        for q in 0..m {
                            if let Some((s, f)) = hop(st, p + sigma * m, q + sigma * m) {
                                g[[p, q]] += ground[s] * f * a;
                            }
                        }
                    }
                }
            }
            let mut full = Array2::zeros((n_orb, n_orb));
            for (t, &pt) in spec.active.iter().enumerate() {
                for (u, &pu) in spec.active.iter().enumerate() {
                    full[[pt, pu]] = g[[t, u]];
                }
            }
            out.push(full);
        }
        Ok(out)
    }

    pub fn excitation_energies(&self) -> Vec<f64> {
        self.energies[1..].iter().map(|e| e - self.energies[0]).collect()
    }
}

pub fn solve_casci(folded: &FoldedActiveHamiltonian, n_act_elec: usize, n_roots: Option<usize>) -> Result<CasciSolution> {
    let m = folded.n_act();
    if n_act_elec % 2 != 0 || n_act_elec > 2 * m {
        return Err(Error::InvalidFilling(format!("{n_act_elec} electrons in {m} orbitals")));
    }
    if m > MAX_CASCI_ORBITALS {
        return Err(Error::DimensionTooLarge(format!("{m} active orbitals exceeds {MAX_CASCI_ORBITALS}")));
    }
    let sector = Sector::new(m, n_act_elec / 2, n_act_elec / 2);
    let h = sector.hamiltonian(folded.e_core, &folded.h_tilde, &folded.eri_act);
    let h = (&h + &h.t()) * 0.5;
    let eig = sym_eig(&h)?;
    let mut energies = eig.eigenvalues.to_vec();
    let ground = sector.scatter(&eig.eigenvectors.column(0).to_vec());
    let ground_rdms = transition_rdms(&ground, &ground, m);
    let s_squared = spin_squared(&ground, m);
    if s_squared > 1e-6 {
        log::warn!("CAS-CI ground state has <S^2> = {s_squared:.3e}");
    }
    let mut vecs = eig.eigenvectors;
    if let Some(n) = n_roots {
        let n = n.min(energies.len());
        energies.truncate(n);
        vecs = vecs.slice(ndarray::s![.., ..n]).to_owned();
    }
    let eigenvectors = (m <= MAX_STORED_ORBITALS).then_some(vecs);
    Ok(CasciSolution { m_act: m, n_act_elec, energies, ground_rdms, eigenvectors, sector, s_squared })
}

/// Sum-over-states induction and dispersion from exact monomer spectra.
///
/// `gammas_*` are ground-to-excited transition 1-RDMs in the full orbital space,
/// `omegas_*` the matching excitation energies.
pub fn sos_second_order(
    (gammas_a, omegas_a): (&[Array2<f64>], &[f64]),
    (gammas_b, omegas_b): (&[Array2<f64>], &[f64]),
    omega_b_on_a: &Array2<f64>,
    omega_a_on_b: &Array2<f64>,
    v_inter: &Array4<f64>,
) -> Result<(f64, f64)> {
    for &w in omegas_a.iter().chain(omegas_b) {
        if w <= 1e-10 {
            return Err(Error::ZeroDenominator(w));
        }
    }
    let dot = |a: &Array2<f64>, b: &Array2<f64>| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f64>();
    let mut e_ind = 0.0;
    for (g, w) in gammas_a.iter().zip(omegas_a) {
        e_ind -= dot(g, omega_b_on_a).powi(2) / w;
    }
    for (g, w) in gammas_b.iter().zip(omegas_b) {
        e_ind -= dot(g, omega_a_on_b).powi(2) / w;
    }
    let (na, nb) = (v_inter.shape()[0], v_inter.shape()[2]);
    let v = v_inter.view().into_shape_with_order((na * na, nb * nb)).unwrap();
    let mut e_disp = 0.0;
    for (ga, wa) in gammas_a.iter().zip(omegas_a) {
        let ga = ga.as_standard_layout();
        let row = ga.view().into_shape_with_order(na * na).unwrap().dot(&v);
        for (gb, wb) in gammas_b.iter().zip(omegas_b) {
            let t: f64 = row.iter().zip(gb.iter()).map(|(x, y)| x * y).sum();
            e_disp -= t * t / (wa + wb);
        }
    }
    Ok((e_ind, e_disp))
}
