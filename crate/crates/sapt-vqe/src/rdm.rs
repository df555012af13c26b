//! Spin-summed reduced density matrices.
//!
//! `gamma[p,q] = <E_pq>`, `big_gamma[p,q,r,s] = <e_pqrs>` in chemist pairing,
//! `e_pqrs = sum_{sigma,tau} a†_{p sigma} a†_{r tau} a_{s tau} a_{q sigma}`.

use crate::fermion::{annihilate, create};
use ndarray::{Array2, Array4};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSummedRDMs {
    pub gamma: Array2<f64>,
    pub big_gamma: Array4<f64>,
}

impl SpinSummedRDMs {
    pub fn n_orb(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.gamma.diag().sum()
    }

    /// `e0 + sum h gamma + 1/2 sum (pq|rs) Gamma`.
    pub fn energy(&self, e0: f64, h: &Array2<f64>, eri: &Array4<f64>) -> f64 {
        let one: f64 = h.iter().zip(self.gamma.iter()).map(|(a, b)| a * b).sum();
        let two: f64 = eri.iter().zip(self.big_gamma.iter()).map(|(a, b)| a * b).sum();
        e0 + one + 0.5 * two
    }

    /// Single-determinant RDMs for the diagonal occupation vector `occ` (entries 0 or 2).
    pub fn determinant(occ: &[f64]) -> SpinSummedRDMs {
        let gamma = Array2::from_diag(&ndarray::Array1::from(occ.to_vec()));
        let big_gamma = mean_field_tpdm(&gamma);
        SpinSummedRDMs { gamma, big_gamma }
    }

    /// Largest violation of the pair-exchange symmetries of Gamma.
    pub fn symmetry_error(&self) -> f64 {
        let n = self.n_orb();
        let g = &self.big_gamma;
        let mut d = 0.0_f64;
        for p in 0..n {
            for q in 0..n {
                d = d.max((self.gamma[[p, q]] - self.gamma[[q, p]]).abs());
                for r in 0..n {
                    for s in 0..n {
                        d = d.max((g[[p, q, r, s]] - g[[r, s, p, q]]).abs());
                        d = d.max((g[[p, q, r, s]] - g[[q, p, s, r]]).abs());
                    }
                }
            }
        }
        d
    }
}

/// `gamma_pq gamma_rs - 1/2 gamma_ps gamma_rq`.
pub fn mean_field_tpdm(gamma: &Array2<f64>) -> Array4<f64> {
    let n = gamma.nrows();
    Array4::from_shape_fn((n, n, n, n), |(p, q, r, s)| {
        gamma[[p, q]] * gamma[[r, s]] - 0.5 * gamma[[p, s]] * gamma[[r, q]]
    })
}

/// Transition RDMs `<bra|E_pq|ket>` and `<bra|e_pqrs|ket>` for real full-space
/// vectors over `m` spatial orbitals.
pub fn transition_rdms(bra: &[f64], ket: &[f64], m: usize) -> SpinSummedRDMs {
    let mut gamma = Array2::<f64>::zeros((m, m));
    let mut big = Array4::<f64>::zeros((m, m, m, m));
    let so = 2 * m;
    for (st, &amp) in ket.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        for qm in 0..so {
            let Some((s1, f1)) = annihilate(st, qm) else { continue };
            let (q, sigma) = (qm % m, qm / m);
            for p in 0..m {
                if let Some((s2, f2)) = create(s1, p + sigma * m) {
                    gamma[[p, q]] += bra[s2] * f1 * f2 * amp;
                }
            }
            for sm in 0..so {
                let Some((s2, f2)) = annihilate(s1, sm) else { continue };
                let (s, tau) = (sm % m, sm / m);
                for r in 0..m {
                    let Some((s3, f3)) = create(s2, r + tau * m) else { continue };
                    for p in 0..m {
                        let Some((s4, f4)) = create(s3, p + sigma * m) else { continue };
                        let b = bra[s4];
                        if b != 0.0 {
                            big[[p, q, r, s]] += b * f1 * f2 * f3 * f4 * amp;
                        }
                    }
                }
            }
        }
    }
    SpinSummedRDMs { gamma, big_gamma: big }
}
