//! Variational optimization of k-muCJ parameters with layer-growth warm starts.

use crate::bundle::FoldedActiveHamiltonian;
use crate::error::{Error, Result};
use crate::fermion::{annihilate, create, Sector};
use crate::linalg::expm;
use crate::rdm::SpinSummedRDMs;
use crate::statevector::{measure_rdms, prepare_mucj, tau_pairs, MucjLayer, MucjParams};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Sector dimension above which the dense sector Hamiltonian is refused.
pub const MAX_SECTOR_DIM: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqeConfig {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    /// L-BFGS history length.
    pub memory: usize,
    /// Variance of the Gaussian padding for newly added layers.
    pub warm_start_variance: f64,
}

impl Default for VqeConfig {
    fn default() -> Self {
        VqeConfig { grad_tol: 1e-6, max_iter: 1500, fd_step: 1e-5, memory: 10, warm_start_variance: 0.001 }
    }
}

impl VqeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.fd_step > 0.0 && self.warm_start_variance >= 0.0) || self.memory == 0 {
            return Err(Error::Config("grad_tol, fd_step and memory must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct VqeResult {
    pub k: usize,
    pub params: MucjParams,
    pub energy: f64,
    /// Max-norm of the finite-difference gradient at `params`.
    pub grad_norm: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub rdms: SpinSummedRDMs,
}

/// k-muCJ circuit restricted to the `(N/2, N/2)` sector, stored as a
/// beta-string by alpha-string matrix.
#[derive(Debug, Clone)]
pub struct SectorSimulator {
    pub m: usize,
    pub n_act_elec: usize,
    strings: Vec<usize>,
    pair_moves: Vec<Vec<(usize, usize, f64)>>,
    hamiltonian: Array2<f64>,
    hf: usize,
}

fn det(mut a: Vec<f64>, n: usize) -> f64 {
    let mut d = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
        if a[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..n {
                a.swap(piv * n + k, c * n + k);
            }
            d = -d;
        }
        let p = a[c * n + c];
        d *= p;
        for r in (c + 1)..n {
            let f = a[r * n + c] / p;
            if f != 0.0 {
                for k in c..n {
                    a[r * n + k] -= f * a[c * n + k];
                }
            }
        }
    }
    d
}

fn bits(s: usize) -> Vec<usize> {
    (0..usize::BITS as usize).filter(|b| s & (1 << b) != 0).collect()
}

impl SectorSimulator {
    pub fn new(folded: &FoldedActiveHamiltonian, n_act_elec: usize) -> Result<SectorSimulator> {
        let m = folded.n_act();
        if n_act_elec % 2 != 0 || n_act_elec > 2 * m {
            return Err(Error::InvalidFilling(format!("{n_act_elec} electrons in {m} orbitals")));
        }
        let n = n_act_elec / 2;
        let strings: Vec<usize> = (0..(1usize << m)).filter(|s| s.count_ones() as usize == n).collect();
        let ns = strings.len();
        if ns * ns > MAX_SECTOR_DIM {
            return Err(Error::DimensionTooLarge(format!("sector dimension {} exceeds {MAX_SECTOR_DIM}", ns * ns)));
        }
        let pos = |s: usize| strings.binary_search(&s).unwrap();
        let index = |full: usize| pos(full >> m) * ns + pos(full & ((1 << m) - 1));
        let mut pair_moves = Vec::new();
        for (p, q) in tau_pairs(m) {
            let from = (1usize << p) | (1usize << (m + p));
            let to = (1usize << q) | (1usize << (m + q));
            let mut moves = Vec::new();
            for &b in &strings {
                for &a in &strings {
                    let i = a | (b << m);
                    if i & from == from && i & to == 0 {
                        let (s1, f1) = annihilate(i, p).unwrap();
                        let (s2, f2) = annihilate(s1, m + p).unwrap();
                        let (s3, f3) = create(s2, m + q).unwrap();
                        let (j, f4) = create(s3, q).unwrap();
                        moves.push((index(i), index(j), f1 * f2 * f3 * f4));
                    }
                }
            }
            pair_moves.push(moves);
        }
        let sector = Sector::new(m, n, n);
        let hamiltonian = sector.hamiltonian(folded.e_core, &folded.h_tilde, &folded.eri_act);
        let hamiltonian = (&hamiltonian + &hamiltonian.t()) * 0.5;
        Ok(SectorSimulator { m, n_act_elec, strings, pair_moves, hamiltonian, hf: 0 })
    }

    pub fn dim(&self) -> usize {
        self.strings.len() * self.strings.len()
    }

    /// String-space representation `D_IJ = det U[I, J]` of `exp(K)`.
    fn string_rotation(&self, kappa: &Array2<f64>) -> Array2<f64> {
        let u = expm(kappa).t().to_owned();
        let n = self.n_act_elec / 2;
        let occ: Vec<Vec<usize>> = self.strings.iter().map(|&s| bits(s)).collect();
        let ns = self.strings.len();
        Array2::from_shape_fn((ns, ns), |(i, j)| {
            let mut a = Vec::with_capacity(n * n);
            for &r in &occ[i] {
                for &c in &occ[j] {
                    a.push(u[[r, c]]);
                }
            }
            det(a, n)
        })
    }

    fn rotate(psi: &Array2<f64>, d: &Array2<f64>) -> Array2<f64> {
        d.dot(psi).dot(&d.t())
    }

    fn pair_gates(&self, psi: &mut Array2<f64>, tau: &[f64]) {
        let flat = psi.as_slice_mut().unwrap();
        for (moves, &t) in self.pair_moves.iter().zip(tau) {
            if t == 0.0 {
                continue;
            }
            let (c, s) = (t.cos(), t.sin());
            for &(i, j, f) in moves {
                let (x, y) = (flat[i], flat[j]);
                flat[i] = x * c - y * s * f;
                flat[j] = x * s * f + y * c;
            }
        }
    }

    /// Sector amplitudes of the prepared state, row-major over (beta string, alpha string).
    pub fn prepare(&self, params: &MucjParams) -> Array2<f64> {
        let ns = self.strings.len();
        let mut psi = Array2::zeros((ns, ns));
        psi[[self.hf, self.hf]] = 1.0;
        for l in &params.layers {
            if l.tau.iter().all(|&t| t == 0.0) {
                continue;
            }
            let d = self.string_rotation(&l.kappa);
            psi = Self::rotate(&psi, &d);
            self.pair_gates(&mut psi, &l.tau);
            psi = Self::rotate(&psi, &d.t().to_owned());
        }
        if params.kappa_final.iter().any(|&x| x != 0.0) {
            psi = Self::rotate(&psi, &self.string_rotation(&params.kappa_final));
        }
        psi
    }

    pub fn energy(&self, params: &MucjParams) -> f64 {
        let psi = self.prepare(params);
        let v = psi.as_slice().unwrap();
        let hv = self.hamiltonian.dot(&ndarray::ArrayView1::from(v));
        v.iter().zip(hv.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn energy_flat(&self, k: usize, x: &[f64]) -> Result<f64> {
        Ok(self.energy(&MucjParams::from_flat(self.m, k, x)?))
    }

    /// Central finite-difference gradient in flattened parameter order.
    pub fn gradient_flat(&self, k: usize, x: &[f64], h: f64) -> Result<Vec<f64>> {
        MucjParams::from_flat(self.m, k, x)?;
        Ok((0..x.len())
            .into_par_iter()
            .map(|i| {
                let mut xp = x.to_vec();
                xp[i] = x[i] + h;
                let ep = self.energy_flat(k, &xp).unwrap();
                xp[i] = x[i] - h;
                let em = self.energy_flat(k, &xp).unwrap();
                (ep - em) / (2.0 * h)
            })
            .collect())
    }
}

/// VQE energy from the full statevector and its RDMs.
pub fn objective(params: &MucjParams, folded: &FoldedActiveHamiltonian, n_act_elec: usize) -> Result<f64> {
    let psi = prepare_mucj(params, folded.n_act(), n_act_elec)?;
    Ok(measure_rdms(&psi).energy(folded.e_core, &folded.h_tilde, &folded.eri_act))
}

pub fn gradient(params: &MucjParams, folded: &FoldedActiveHamiltonian, n_act_elec: usize, fd_step: f64) -> Result<Vec<f64>> {
    let sim = SectorSimulator::new(folded, n_act_elec)?;
    sim.gradient_flat(params.layers.len(), &params.flatten(), fd_step)
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn vdot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

fn interpolate(lo: f64, hi: f64, f_lo: f64, d_lo: f64, f_hi: f64) -> f64 {
    let w = hi - lo;
    let denom = 2.0 * (f_hi - f_lo - d_lo * w);
    let mut a = if denom > 0.0 { lo - d_lo * w * w / denom } else { lo + 0.5 * w };
    let (a_min, a_max) = if lo < hi { (lo + 0.1 * w, hi - 0.1 * w) } else { (hi - 0.1 * w, lo + 0.1 * w) };
    if !a.is_finite() || a < a_min || a > a_max {
        a = lo + 0.5 * w;
    }
    a
}

/// Strong-Wolfe line search along `d`; gradients are only requested at points
/// passing the sufficient-decrease test.
fn line_search<F, G>(f: &F, g: &G, x: &[f64], fx: f64, gx: &[f64], d: &[f64], a0: f64) -> Option<(f64, f64, Vec<f64>)>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let d0 = vdot(gx, d);
    let mut a_prev = 0.0;
    let mut f_prev = fx;
    let mut d_prev = d0;
    let mut g_prev: Option<Vec<f64>> = None;
    let mut a = a0;
    let zoom = |mut lo: f64, mut hi: f64, mut f_lo: f64, mut d_lo: f64, mut g_lo: Option<Vec<f64>>, mut f_hi: f64| {
        for _ in 0..40 {
            let aj = interpolate(lo, hi, f_lo, d_lo, f_hi);
            let xj = axpy(x, aj, d);
            let fj = f(&xj);
            if fj > fx + C1 * aj * d0 || fj >= f_lo {
                hi = aj;
                f_hi = fj;
            } else {
                let gj = g(&xj);
                let dj = vdot(&gj, d);
                if dj.abs() <= -C2 * d0 {
                    return Some((aj, fj, gj));
                }
                if dj * (hi - lo) >= 0.0 {
                    hi = lo;
                    f_hi = f_lo;
                }
                lo = aj;
                f_lo = fj;
                d_lo = dj;
                g_lo = Some(gj);
            }
            if (hi - lo).abs() < 1e-14 * lo.abs().max(1e-10) {
                break;
            }
        }
        g_lo.map(|gl| (lo, f_lo, gl)).filter(|_| lo > 0.0 && f_lo < fx)
    };
    for i in 0..30 {
        let xa = axpy(x, a, d);
        let fa = f(&xa);
        if !fa.is_finite() {
            a = 0.5 * (a_prev + a);
            continue;
        }
        if fa > fx + C1 * a * d0 || (i > 0 && fa >= f_prev) {
            return zoom(a_prev, a, f_prev, d_prev, g_prev, fa);
        }
        let ga = g(&xa);
        let da = vdot(&ga, d);
        if da.abs() <= -C2 * d0 {
            return Some((a, fa, ga));
        }
        if da >= 0.0 {
            return zoom(a, a_prev, fa, da, Some(ga), f_prev);
        }
        a_prev = a;
        f_prev = fa;
        d_prev = da;
        g_prev = Some(ga);
        a *= 2.0;
    }
    g_prev.map(|gp| (a_prev, f_prev, gp))
}

/// Limited-memory BFGS with a strong-Wolfe line search. Convergence is
/// `max|g| <= grad_tol`.
pub fn lbfgs<F, G>(f: F, g: G, x0: Vec<f64>, grad_tol: f64, max_iter: usize, memory: usize) -> Minimum
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = x0;
    let mut fx = f(&x);
    let mut gx = g(&x);
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    loop {
        let gn = inf_norm(&gx);
        if gn <= grad_tol {
            return Minimum { x, f: fx, grad_norm: gn, iterations, converged: true };
        }
        if iterations >= max_iter {
            return Minimum { x, f: fx, grad_norm: gn, iterations, converged: false };
        }
        let mut q = gx.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * vdot(s, &q);
            q = axpy(&q, -a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let scale = vdot(s, y) / vdot(y, y);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * vdot(y, &q);
            q = axpy(&q, a - b, s);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        if vdot(&d, &gx) >= 0.0 {
            hist.clear();
            d = gx.iter().map(|v| -v).collect();
        }
        let a0 = if hist.is_empty() { (1.0 / vdot(&gx, &gx).sqrt()).min(1.0) } else { 1.0 };
        match line_search(&f, &g, &x, fx, &gx, &d, a0) {
            Some((a, f_new, g_new)) => {
                let s: Vec<f64> = d.iter().map(|v| a * v).collect();
                let y: Vec<f64> = g_new.iter().zip(&gx).map(|(u, v)| u - v).collect();
                let sy = vdot(&s, &y);
                if sy > 1e-14 * vdot(&y, &y).sqrt() * vdot(&s, &s).sqrt() {
                    if hist.len() == memory {
                        hist.pop_front();
                    }
                    hist.push_back((s.clone(), y, 1.0 / sy));
                }
                x = axpy(&x, 1.0, &s);
                fx = f_new;
                gx = g_new;
                iterations += 1;
            }
            None if !hist.is_empty() => hist.clear(),
            None => {
                log::warn!("line search stalled at |g| = {gn:.3e} after {iterations} iterations");
                return Minimum { x, f: fx, grad_norm: gn, iterations, converged: false };
            }
        }
    }
}

fn pad_layers(prev: &MucjParams, k: usize, rng: Option<&mut ChaCha8Rng>, variance: f64) -> MucjParams {
    let m = prev.m();
    let mut out = prev.clone();
    let mut extra = MucjParams::zeros(m, k - prev.layers.len());
    if let Some(rng) = rng {
        let normal = Normal::new(0.0, variance.sqrt()).unwrap();
        for l in &mut extra.layers {
            for p in 0..m {
                for q in (p + 1)..m {
                    let v = normal.sample(rng);
                    l.kappa[[p, q]] = v;
                    l.kappa[[q, p]] = -v;
                }
            }
            l.tau.iter_mut().for_each(|t| *t = normal.sample(rng));
        }
    }
    out.layers.extend(extra.layers.into_iter().map(|l| MucjLayer { kappa: l.kappa, tau: l.tau }));
    out
}

fn run_k(sim: &SectorSimulator, k: usize, start: &MucjParams, config: &VqeConfig) -> Minimum {
    let f = |x: &[f64]| sim.energy_flat(k, x).unwrap();
    let g = |x: &[f64]| sim.gradient_flat(k, x, config.fd_step).unwrap();
    lbfgs(f, g, start.flatten(), config.grad_tol, config.max_iter, config.memory)
}

/// Optimizes the ansatz for every `k` in `k_schedule`, each warm-started from the
/// previous optimum with the new layers drawn from `N(0, warm_start_variance)`.
pub fn optimize(
    folded: &FoldedActiveHamiltonian,
    n_act_elec: usize,
    k_schedule: &[usize],
    seed: u64,
    config: &VqeConfig,
) -> Result<Vec<VqeResult>> {
    config.validate()?;
    if k_schedule.is_empty() || k_schedule[0] == 0 || k_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("k_schedule must be positive and strictly increasing, got {k_schedule:?}")));
    }
    let m = folded.n_act();
    let sim = SectorSimulator::new(folded, n_act_elec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<VqeResult> = Vec::new();
    for &k in k_schedule {
        let min = match out.last() {
            None => run_k(&sim, k, &MucjParams::zeros(m, k), config),
            Some(prev) => {
                let warm = run_k(&sim, k, &pad_layers(&prev.params, k, Some(&mut rng), config.warm_start_variance), config);
                if warm.f > prev.energy + 1e-9 {
                    log::info!("k={k}: warm start ended above k={} energy, retrying with zero padding", prev.k);
                    let zero = run_k(&sim, k, &pad_layers(&prev.params, k, None, 0.0), config);
                    if zero.f < warm.f { zero } else { warm }
                } else {
                    warm
                }
            }
        };
        if !min.converged {
            log::warn!("k={k}: optimizer stopped at |g| = {:.3e} after {} iterations", min.grad_norm, min.iterations);
        }
        let params = MucjParams::from_flat(m, k, &min.x)?;
        let rdms = measure_rdms(&prepare_mucj(&params, m, n_act_elec)?);
        let energy = rdms.energy(folded.e_core, &folded.h_tilde, &folded.eri_act);
        log::info!("k={k}: E = {energy:.12} after {} iterations (|g| = {:.2e})", min.iterations, min.grad_norm);
        out.push(VqeResult {
            k,
            params,
            energy,
            grad_norm: min.grad_norm,
            n_iterations: min.iterations,
            converged: min.converged,
            rdms,
        });
    }
    Ok(out)
}
