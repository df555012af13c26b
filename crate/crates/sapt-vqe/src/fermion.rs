//! Occupation-number bit strings in Jordan-Wigner order: spin-orbital
//! `(p, alpha)` is mode `p`, `(p, beta)` is mode `M + p`, and mode `m` is bit `m`
//! of the basis-state index.

use ndarray::Array2;
use std::collections::HashMap;

#[inline]
pub fn alpha(p: usize) -> usize {
    p
}

#[inline]
pub fn beta(m: usize, p: usize) -> usize {
    m + p
}

#[inline]
fn sign_below(state: usize, mode: usize) -> f64 {
    if (state & ((1usize << mode) - 1)).count_ones() & 1 == 1 {
        -1.0
    } else {
        1.0
    }
}

#[inline]
pub fn annihilate(state: usize, mode: usize) -> Option<(usize, f64)> {
    if state & (1 << mode) == 0 {
        None
    } else {
        Some((state ^ (1 << mode), sign_below(state, mode)))
    }
}

#[inline]
pub fn create(state: usize, mode: usize) -> Option<(usize, f64)> {
    if state & (1 << mode) != 0 {
        None
    } else {
        Some((state | (1 << mode), sign_below(state, mode)))
    }
}

/// `a†_p a_q` on a basis state.
#[inline]
pub fn hop(state: usize, p: usize, q: usize) -> Option<(usize, f64)> {
    let (s1, f1) = annihilate(state, q)?;
    let (s2, f2) = create(s1, p)?;
    Some((s2, f1 * f2))
}

/// `(N_alpha, N_beta)` of a basis state.
pub fn spin_counts(state: usize, m: usize) -> (u32, u32) {
    let mask = (1usize << m) - 1;
    ((state & mask).count_ones(), ((state >> m) & mask).count_ones())
}

/// All basis states with fixed `(N_alpha, N_beta)`, ascending.
#[derive(Debug, Clone)]
pub struct Sector {
    pub m: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub states: Vec<usize>,
    pub index: HashMap<usize, usize>,
}

impl Sector {
    pub fn new(m: usize, n_alpha: usize, n_beta: usize) -> Sector {
        let mut states = Vec::new();
        for s in 0..(1usize << (2 * m)) {
            let (a, b) = spin_counts(s, m);
            if a as usize == n_alpha && b as usize == n_beta {
                states.push(s);
            }
        }
        let index = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        Sector { m, n_alpha, n_beta, states, index }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Dense Hamiltonian `sum h_pq E_pq + 1/2 sum (pq|rs) e_pqrs + e0` on this sector.
    pub fn hamiltonian(&self, e0: f64, h: &Array2<f64>, eri: &ndarray::Array4<f64>) -> Array2<f64> {
        let m = self.m;
        let d = self.dim();
        let mut out = Array2::<f64>::zeros((d, d));
        let so = 2 * m;
        for (col, &st) in self.states.iter().enumerate() {
            out[[col, col]] += e0;
            for sigma in 0..2 {
                for q in 0..m {
                    let qm = q + sigma * m;
                    let Some((s1, f1)) = annihilate(st, qm) else { continue };
                    for p in 0..m {
                        let pm = p + sigma * m;
                        if let Some((s2, f2)) = create(s1, pm) {
                            let v = h[[p, q]];
                            if v != 0.0 {
                                out[[self.index[&s2], col]] += v * f1 * f2;
                            }
                        }
                    }
                }
            }
            for qm in 0..so {
                let Some((s1, f1)) = annihilate(st, qm) else { continue };
                for sm in 0..so {
                    let Some((s2, f2)) = annihilate(s1, sm) else { continue };
                    let (q, sigma) = (qm % m, qm / m);
                    let (s, tau) = (sm % m, sm / m);
                    for r in 0..m {
                        let Some((s3, f3)) = create(s2, r + tau * m) else { continue };
                        for p in 0..m {
                            let Some((s4, f4)) = create(s3, p + sigma * m) else { continue };
                            let v = eri[[p, q, r, s]];
                            if v != 0.0 {
                                out[[self.index[&s4], col]] += 0.5 * v * f1 * f2 * f3 * f4;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.states.iter().map(|&s| full[s]).collect()
    }

    pub fn scatter(&self, v: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; 1usize << (2 * self.m)];
        for (&s, &x) in self.states.iter().zip(v) {
            full[s] = x;
        }
        full
    }
}

/// `sum_pq c_pq E_pq |psi>` for a real full-space vector.
pub fn apply_one_body(m: usize, c: &Array2<f64>, psi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; psi.len()];
    for (st, &amp) in psi.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        for sigma in 0..2 {
            for q in 0..m {
                for p in 0..m {
                    let v = c[[p, q]];
                    if v == 0.0 {
                        continue;
                    }
                    if let Some((s, f)) = hop(st, p + sigma * m, q + sigma * m) {
                        out[s] += v * f * amp;
                    }
                }
            }
        }
    }
    out
}

/// `sum_pqrs c_pqrs e_pqrs |psi>` for a real full-space vector.
pub fn apply_two_body(m: usize, c: &ndarray::Array4<f64>, psi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; psi.len()];
    let so = 2 * m;
    for (st, &amp) in psi.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        for qm in 0..so {
            let Some((s1, f1)) = annihilate(st, qm) else { continue };
            for sm in 0..so {
                let Some((s2, f2)) = annihilate(s1, sm) else { continue };
                let (q, sigma) = (qm % m, qm / m);
                let (s, tau) = (sm % m, sm / m);
                for r in 0..m {
                    let Some((s3, f3)) = create(s2, r + tau * m) else { continue };
                    for p in 0..m {
                        let Some((s4, f4)) = create(s3, p + sigma * m) else { continue };
                        let v = c[[p, q, r, s]];
                        if v != 0.0 {
                            out[s4] += v * f1 * f2 * f3 * f4 * amp;
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
