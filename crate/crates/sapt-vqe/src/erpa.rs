//! Spin-restricted extended RPA in the natural-orbital basis.
//!
//! Excitation pairs `(p, q)` have `p > q`, so with occupations sorted in
//! descending order the metric `N_pq = n_q - n_p` is non-negative.
//! With `T+ = X + Y` and `T- = Y - X` the generalized problem reads
//! `(A+B) T+ = w N T-`, `(A-B) T- = w N T+`, normalized by `T-^T N T+ = 1`.

use crate::error::{Error, Result};
use crate::linalg::{canonical_orthogonalization, contract, max_asymmetry, sqrt_pair_clamped, sym_eig};
use crate::rdm::SpinSummedRDMs;
use ndarray::{Array1, Array2, Array4, ArrayD};
use serde::{Deserialize, Serialize};

pub const PAIR_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_ORTHO_THRESHOLD: f64 = 1e-5;
pub const MIN_OMEGA: f64 = 1e-8;
const NEG_TOL: f64 = 1e-8;
const CLAMP_FLOOR: f64 = 1e-12;
pub const MAX_DENSE_ORBITALS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ErpaMode {
    #[default]
    Coupled,
    Uncoupled,
}

#[derive(Debug, Clone)]
pub struct ErpaProblem {
    pub pairs: Vec<(usize, usize)>,
    pub occupations: Vec<f64>,
    /// `A_{pq,rs} = <[E_pq,[H,E_sr]]>`
    pub a: Array2<f64>,
    /// `B_{pq,rs} = <[E_pq,[H,E_rs]]>`
    pub b: Array2<f64>,
    /// Symmetrized `A + B`.
    pub a_plus: Array2<f64>,
    /// Symmetrized `A - B`.
    pub a_minus: Array2<f64>,
    pub n_metric: Array1<f64>,
    /// Largest asymmetry removed from `A +- B`.
    pub asymmetry: f64,
}

#[derive(Debug, Clone)]
pub struct ErpaSolution {
    pub n_orb: usize,
    pub pairs: Vec<(usize, usize)>,
    pub occupations: Vec<f64>,
    pub omegas: Vec<f64>,
    /// Columns are modes.
    pub t_plus: Array2<f64>,
    pub t_minus: Array2<f64>,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub kept_metric: usize,
    pub discarded_metric: usize,
    pub discarded_modes: usize,
}

#[derive(Debug, Clone)]
pub struct Transition1Rdm {
    /// `<0|E_pq|nu>`.
    pub gamma: Array2<f64>,
    /// `gamma + gamma^T`.
    pub gamma_t: Array2<f64>,
}

fn pair_list(occ: &[f64]) -> Vec<(usize, usize)> {
    let n = occ.len();
    let mut pairs = Vec::new();
    for p in 0..n {
        for q in 0..p {
            if occ[q] - occ[p] >= PAIR_THRESHOLD {
                pairs.push((p, q));
            }
        }
    }
    pairs
}

fn check_natural(gamma: &Array2<f64>) -> Result<Vec<f64>> {
    let n = gamma.nrows();
    let mut off = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off = off.max(gamma[[i, j]].abs());
            }
        }
    }
    if off > 1e-8 {
        return Err(Error::BasisNotNatural(off));
    }
    Ok((0..n).map(|i| gamma[[i, i]]).collect())
}

fn d4(t: &Array4<f64>) -> ArrayD<f64> {
    t.clone().into_dyn()
}

/// `G[p,q,s,r] = <[E_pq,[H,E_sr]]>` for all index quadruples.
pub fn double_commutator(rdms: &SpinSummedRDMs, h: &Array2<f64>, eri: &Array4<f64>) -> Result<Array4<f64>> {
    let n = h.nrows();
    let g1 = &rdms.gamma;
    let gg = d4(&rdms.big_gamma);
    let v = d4(eri);
    let c = |spec: &str| -> Result<Array4<f64>> { contract(spec, &[&v, &gg])?.into_dimensionality().map_err(|e| Error::ShapeMismatch(e.to_string())) };
    let c2 = |spec: &str| -> Result<Array2<f64>> { contract(spec, &[&v, &gg])?.into_dimensionality().map_err(|e| Error::ShapeMismatch(e.to_string())) };
    let x1 = c2("rjkl,pjkl->rp")?;
    let x2 = c2("jskl,jqkl->sq")?;
    let t1b = c("rpkl,sqkl->rpsq")?;
    let t1c = c("rjql,sjpl->rqsp")?;
    let t1d = c("rjkp,sjkq->rpsq")?;
    let t2a = c("qskl,prkl->qspr")?;
    let t2c = c("jsql,jrpl->sqrp")?;
    let t2d = c("jskp,jrkq->sprq")?;
    let hg = h.t().dot(g1); // sum_i h_is gamma_iq -> [s,q]
    let gh = g1.dot(&h.t()); // sum_j gamma_pj h_rj -> [p,r]
    let mut out = Array4::zeros((n, n, n, n));
    for p in 0..n {
        for q in 0..n {
            for s in 0..n {
                for r in 0..n {
                    let mut val = h[[q, s]] * g1[[p, r]] + h[[r, p]] * g1[[s, q]];
                    if p == r {
                        val -= hg[[s, q]] + x2[[s, q]];
                    }
                    if q == s {
                        val -= gh[[p, r]] + x1[[r, p]];
                    }
                    val += t1b[[r, p, s, q]] - t1c[[r, q, s, p]] + t1d[[r, p, s, q]];
                    val += t2a[[q, s, p, r]] + t2c[[s, q, r, p]] - t2d[[s, p, r, q]];
                    out[[p, q, s, r]] = val;
                }
            }
        }
    }
    Ok(out)
}

fn symmetrize(m: &Array2<f64>) -> Array2<f64> {
    (m + &m.t()) * 0.5
}

fn assemble(pairs: Vec<(usize, usize)>, occ: Vec<f64>, a: Array2<f64>, b: Array2<f64>) -> ErpaProblem {
    let plus = &a + &b;
    let minus = &a - &b;
    let asymmetry = max_asymmetry(&plus).max(max_asymmetry(&minus));
    if asymmetry > 1e-8 {
        log::warn!("ERPA Hessians asymmetric by {asymmetry:.3e}; symmetrizing");
    }
    let n_metric = Array1::from_iter(pairs.iter().map(|&(p, q)| occ[q] - occ[p]));
    ErpaProblem { pairs, occupations: occ, a, b, a_plus: symmetrize(&plus), a_minus: symmetrize(&minus), n_metric, asymmetry }
}

pub fn build_hessians(rdms: &SpinSummedRDMs, h: &Array2<f64>, eri: &Array4<f64>) -> Result<ErpaProblem> {
    let occ = check_natural(&rdms.gamma)?;
    let pairs = pair_list(&occ);
    let g = double_commutator(rdms, h, eri)?;
    let np = pairs.len();
    let mut a = Array2::zeros((np, np));
    let mut b = Array2::zeros((np, np));
    for (i, &(p, q)) in pairs.iter().enumerate() {
        for (j, &(r, s)) in pairs.iter().enumerate() {
            a[[i, j]] = g[[p, q, s, r]];
            b[[i, j]] = g[[p, q, r, s]];
        }
    }
    Ok(assemble(pairs, occ, a, b))
}

/// Mean-field orbital energies `h_pp + sum_rs gamma_rs [(pp|rs) - 1/2 (pr|sp)]`.
pub fn orbital_energies(rdms: &SpinSummedRDMs, h: &Array2<f64>, eri: &Array4<f64>) -> Vec<f64> {
    let n = h.nrows();
    let g = &rdms.gamma;
    (0..n)
        .map(|p| {
            let mut e = h[[p, p]];
            for r in 0..n {
                for s in 0..n {
                    e += g[[r, s]] * (eri[[p, p, r, s]] - 0.5 * eri[[p, r, s, p]]);
                }
            }
            e
        })
        .collect()
}

/// Diagonal replacement `A +- B = (n_q - n_p)(e_p - e_q)`.
pub fn build_uncoupled(rdms: &SpinSummedRDMs, h: &Array2<f64>, eri: &Array4<f64>) -> Result<ErpaProblem> {
    let occ = check_natural(&rdms.gamma)?;
    let pairs = pair_list(&occ);
    let eps = orbital_energies(rdms, h, eri);
    let np = pairs.len();
    let mut a = Array2::zeros((np, np));
    for (i, &(p, q)) in pairs.iter().enumerate() {
        a[[i, i]] = (occ[q] - occ[p]) * (eps[p] - eps[q]);
    }
    let b = Array2::zeros((np, np));
    Ok(assemble(pairs, occ, a, b))
}

pub fn build_problem(rdms: &SpinSummedRDMs, h: &Array2<f64>, eri: &Array4<f64>, mode: ErpaMode) -> Result<ErpaProblem> {
    match mode {
        ErpaMode::Coupled => build_hessians(rdms, h, eri),
        ErpaMode::Uncoupled => build_uncoupled(rdms, h, eri),
    }
}

pub fn solve_erpa(problem: &ErpaProblem, ortho_threshold: f64) -> Result<ErpaSolution> {
    let np = problem.pairs.len();
    let n_orb = problem.occupations.len();
    if np == 0 {
        return Err(Error::AllModesDiscarded);
    }
    let ortho = canonical_orthogonalization(&Array2::from_diag(&problem.n_metric), ortho_threshold)?;
    let w = &ortho.n_inv_half;
    let ap = symmetrize(&w.t().dot(&problem.a_plus).dot(w));
    let am = symmetrize(&w.t().dot(&problem.a_minus).dot(w));
    let (ap_half, ap_inv_half) = sqrt_pair_clamped(&ap, NEG_TOL, CLAMP_FLOOR)?;
    let m = symmetrize(&ap_half.dot(&am).dot(&ap_half));
    let eig = sym_eig(&m)?;
    let mut cols = Vec::new();
    for (k, &w2) in eig.eigenvalues.iter().enumerate() {
        if w2 < -NEG_TOL * m.iter().fold(1.0_f64, |a, b| a.max(b.abs())) {
            return Err(Error::NotPositiveDefinite(w2));
        }
        let omega = w2.max(0.0).sqrt();
        if omega > MIN_OMEGA {
            cols.push((omega, k));
        }
    }
    let nm = cols.len();
    if nm == 0 {
        return Err(Error::AllModesDiscarded);
    }
    let mut t_plus = Array2::zeros((np, nm));
    let mut t_minus = Array2::zeros((np, nm));
    let mut omegas = Vec::with_capacity(nm);
    for (c, &(omega, k)) in cols.iter().enumerate() {
        let z = eig.eigenvectors.column(k);
        let tp = ap_inv_half.dot(&z) * omega.sqrt();
        let tm = ap_half.dot(&z) / omega.sqrt();
        t_plus.column_mut(c).assign(&w.dot(&tp));
        t_minus.column_mut(c).assign(&w.dot(&tm));
        omegas.push(omega);
    }
    let x = (&t_plus - &t_minus) * 0.5;
    let y = (&t_plus + &t_minus) * 0.5;
    Ok(ErpaSolution {
        n_orb,
        pairs: problem.pairs.clone(),
        occupations: problem.occupations.clone(),
        omegas,
        t_plus,
        t_minus,
        x,
        y,
        kept_metric: ortho.kept,
        discarded_metric: np - ortho.kept,
        discarded_modes: ortho.kept - nm,
    })
}

impl ErpaSolution {
    pub fn n_modes(&self) -> usize {
        self.omegas.len()
    }

    /// `Q^nu` and `R^nu = (Q^nu)^T`, with `Q_ab = Y_ab` for `a > b` and `Q_ab = X_ba` for `a < b`.
    pub fn qr_intermediates(&self, nu: usize) -> (Array2<f64>, Array2<f64>) {
        let n = self.n_orb;
        let mut q = Array2::zeros((n, n));
        for (i, &(p, r)) in self.pairs.iter().enumerate() {
            q[[p, r]] = self.y[[i, nu]];
            q[[r, p]] = self.x[[i, nu]];
        }
        let r = q.t().to_owned();
        (q, r)
    }

    pub fn transition_gamma(&self, nu: usize) -> Transition1Rdm {
        let (_, r) = self.qr_intermediates(nu);
        let n = self.n_orb;
        let occ = &self.occupations;
        let gamma = Array2::from_shape_fn((n, n), |(p, q)| (occ[p] - occ[q]) * r[[p, q]]);
        let gamma_t = &gamma + &gamma.t();
        Transition1Rdm { gamma, gamma_t }
    }

    pub fn transition_gammas(&self) -> Vec<Transition1Rdm> {
        (0..self.n_modes()).map(|nu| self.transition_gamma(nu)).collect()
    }

    /// `Gamma^nu_pqrs = sum_m (-Q_mp G_mqrs + R_mq G_pmrs - Q_mr G_pqms + R_ms G_pqrm)`.
    pub fn dense_transition_tpdm(&self, nu: usize, big_gamma: &Array4<f64>) -> Result<Array4<f64>> {
        if self.n_orb > MAX_DENSE_ORBITALS {
            return Err(Error::DimensionTooLarge(format!(
                "dense transition 2-RDM limited to {MAX_DENSE_ORBITALS} orbitals, got {}",
                self.n_orb
            )));
        }
        Ok(transition_tpdm(&self.qr_intermediates(nu), big_gamma))
    }

    /// Largest violation of `T-^T N T+ = 1` and `T+^T (A+B) T+ = w`.
    pub fn normalization_error(&self, problem: &ErpaProblem) -> f64 {
        let mut err = 0.0_f64;
        for nu in 0..self.n_modes() {
            let tp = self.t_plus.column(nu);
            let tm = self.t_minus.column(nu);
            let norm: f64 = tm.iter().zip(tp.iter()).zip(problem.n_metric.iter()).map(|((a, b), n)| a * b * n).sum();
            let curv = tp.dot(&problem.a_plus.dot(&tp));
            err = err.max((norm - 1.0).abs()).max((curv - self.omegas[nu]).abs());
        }
        err
    }

    /// Residual of `A X + B Y = -w N X`, `B X + A Y = w N Y` with the raw Hessians.
    pub fn residual(&self, problem: &ErpaProblem) -> f64 {
        let mut err = 0.0_f64;
        for nu in 0..self.n_modes() {
            let x = self.x.column(nu);
            let y = self.y.column(nu);
            let w = self.omegas[nu];
            let r1 = problem.a.dot(&x) + problem.b.dot(&y) + &(&problem.n_metric * &x * w);
            let r2 = problem.b.dot(&x) + problem.a.dot(&y) - &(&problem.n_metric * &y * w);
            err = err.max(r1.iter().chain(r2.iter()).fold(0.0_f64, |m, v| m.max(v.abs())));
        }
        err
    }
}

/// Transition 2-RDM from `(Q, R)` and a ground-state 2-RDM.
pub fn transition_tpdm((q, r): &(Array2<f64>, Array2<f64>), big_gamma: &Array4<f64>) -> Array4<f64> {
    let gg = d4(big_gamma);
    let (qd, rd) = (q.clone().into_dyn(), r.clone().into_dyn());
    let t = |spec: &str, m: &ArrayD<f64>| -> Array4<f64> { contract(spec, &[m, &gg]).unwrap().into_dimensionality().unwrap() };
    -t("mp,mqrs->pqrs", &qd) + t("mq,pmrs->pqrs", &rd) - t("mr,pqms->pqrs", &qd) + t("ms,pqrm->pqrs", &rd)
}

/// Single-determinant closed form of the transition 2-RDM.
pub fn hf_transition_tpdm(gamma_nu: &Array2<f64>, occ: &[f64]) -> Array4<f64> {
    let n = occ.len();
    let g = gamma_nu;
    Array4::from_shape_fn((n, n, n, n), |(p, q, r, s)| {
        let mut v = 0.0;
        if r == s {
            v += g[[p, q]] * occ[s];
        }
        if p == q {
            v += g[[r, s]] * occ[p];
        }
        if r == q {
            v -= 0.5 * g[[p, s]] * occ[q];
        }
        if p == s {
            v -= 0.5 * g[[r, q]] * occ[s];
        }
        v
    })
}
