//! Ideal statevector simulation of the k-layer muCJ circuit.

use crate::error::{Error, Result};
use crate::fermion::{annihilate, create};
use crate::linalg::expm;
use crate::rdm::{transition_rdms, SpinSummedRDMs};
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

pub const MAX_ACTIVE_ORBITALS: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    pub m_act: usize,
    pub amplitudes: Vec<Complex64>,
}

impl Statevector {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.re).collect()
    }

    pub fn from_real(m_act: usize, v: &[f64]) -> Statevector {
        Statevector { m_act, amplitudes: v.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn max_imag(&self) -> f64 {
        self.amplitudes.iter().fold(0.0_f64, |m, a| m.max(a.im.abs()))
    }

    /// Probability weight outside the `(n_alpha, n_beta)` sector.
    pub fn leakage(&self, n_alpha: usize, n_beta: usize) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(s, _)| crate::fermion::spin_counts(*s, self.m_act) != (n_alpha as u32, n_beta as u32))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MucjLayer {
    pub kappa: Array2<f64>,
    pub tau: Vec<f64>,
}

/// Layers are applied in order, then one closing orbital rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MucjParams {
    pub layers: Vec<MucjLayer>,
    pub kappa_final: Array2<f64>,
}

/// `(p', p'+1)` orbital pairs coupled by the paired-double block, in application order.
pub fn tau_pairs(m: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if m < 2 {
        return out;
    }
    for p in 0..m {
        let mut q = p % 2;
        while q + 2 <= m {
            out.push((q, q + 1));
            q += 2;
        }
    }
    out
}

fn n_kappa(m: usize) -> usize {
    m * (m - 1) / 2
}

impl MucjParams {
    pub fn zeros(m: usize, k: usize) -> MucjParams {
        MucjParams {
            layers: (0..k)
                .map(|_| MucjLayer { kappa: Array2::zeros((m, m)), tau: vec![0.0; tau_pairs(m).len()] })
                .collect(),
            kappa_final: Array2::zeros((m, m)),
        }
    }

    pub fn n_params(m: usize, k: usize) -> usize {
        k * (n_kappa(m) + tau_pairs(m).len()) + n_kappa(m)
    }

    pub fn m(&self) -> usize {
        self.kappa_final.nrows()
    }

    fn push_kappa(out: &mut Vec<f64>, kappa: &Array2<f64>) {
        let m = kappa.nrows();
        for p in 0..m {
            for q in (p + 1)..m {
                out.push(kappa[[p, q]]);
            }
        }
    }

    fn read_kappa(m: usize, x: &[f64], pos: &mut usize) -> Array2<f64> {
        let mut k = Array2::zeros((m, m));
        for p in 0..m {
            for q in (p + 1)..m {
                k[[p, q]] = x[*pos];
                k[[q, p]] = -x[*pos];
                *pos += 1;
            }
        }
        k
    }

    /// Per layer: upper-triangle kappa (row-major), then tau; the closing rotation last.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            Self::push_kappa(&mut out, &l.kappa);
            out.extend_from_slice(&l.tau);
        }
        Self::push_kappa(&mut out, &self.kappa_final);
        out
    }

    pub fn from_flat(m: usize, k: usize, x: &[f64]) -> Result<MucjParams> {
        if x.len() != Self::n_params(m, k) {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters for M={m}, k={k}; expected {}",
                x.len(),
                Self::n_params(m, k)
            )));
        }
        let nt = tau_pairs(m).len();
        let mut pos = 0;
        let mut layers = Vec::with_capacity(k);
        for _ in 0..k {
            let kappa = Self::read_kappa(m, x, &mut pos);
            let tau = x[pos..pos + nt].to_vec();
            pos += nt;
            layers.push(MucjLayer { kappa, tau });
        }
        let kappa_final = Self::read_kappa(m, x, &mut pos);
        Ok(MucjParams { layers, kappa_final })
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        let check = |k: &Array2<f64>| -> Result<()> {
            if k.dim() != (m, m) {
                return Err(Error::ShapeMismatch("kappa must be M x M".into()));
            }
            for p in 0..m {
                for q in 0..m {
                    if k[[p, q]] != -k[[q, p]] {
                        return Err(Error::ShapeMismatch("kappa must be antisymmetric".into()));
                    }
                }
            }
            Ok(())
        };
        for l in &self.layers {
            check(&l.kappa)?;
            if l.tau.len() != tau_pairs(m).len() {
                return Err(Error::ShapeMismatch(format!("tau has {} entries, expected {}", l.tau.len(), tau_pairs(m).len())));
            }
        }
        check(&self.kappa_final)
    }
}

trait Amp: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}
impl Amp for f64 {}
impl Amp for Complex64 {}

/// Plane rotation on modes `a < b`: `a†_a -> c a†_a + s a†_b`, `a†_b -> -s a†_a + c a†_b`.
fn givens<T: Amp>(psi: &mut [T], a: usize, b: usize, c: f64, s: f64) {
    let between = ((1usize << b) - 1) & !((1usize << (a + 1)) - 1);
    let (ba, bb) = (1usize << a, 1usize << b);
    for i in 0..psi.len() {
        if i & ba != 0 && i & bb == 0 {
            let j = i ^ ba ^ bb;
            let sg = if (i & between).count_ones() & 1 == 1 { -s } else { s };
            let x = psi[i];
            let y = psi[j];
            psi[i] = x * c - y * sg;
            psi[j] = x * sg + y * c;
        }
    }
}

/// One-particle rotation `W` as `(plane, c, s)` rotations on neighbouring rows,
/// applied right-to-left after the diagonal sign matrix:
/// `W = g_1 g_2 ... g_n D`.
pub fn givens_decomposition(w: &Array2<f64>) -> (Vec<(usize, usize, f64, f64)>, Vec<f64>) {
    let m = w.nrows();
    let mut a = w.clone();
    let mut rots = Vec::new();
    for j in 0..m.saturating_sub(1) {
        for i in ((j + 1)..m).rev() {
            let x = a[[i - 1, j]];
            let y = a[[i, j]];
            let r = x.hypot(y);
            let (c, s) = if r < 1e-300 { (1.0, 0.0) } else { (x / r, y / r) };
            for k in 0..m {
                let u = a[[i - 1, k]];
                let v = a[[i, k]];
                a[[i - 1, k]] = c * u + s * v;
                a[[i, k]] = -s * u + c * v;
            }
            rots.push((i - 1, i, c, s));
        }
    }
    let diag = (0..m).map(|i| if a[[i, i]] < 0.0 { -1.0 } else { 1.0 }).collect();
    (rots, diag)
}

fn rotate_orbitals<T: Amp>(psi: &mut [T], m: usize, kappa: &Array2<f64>) {
    if kappa.iter().all(|&x| x == 0.0) {
        return;
    }
    let w = expm(kappa).t().to_owned();
    let (rots, diag) = givens_decomposition(&w);
    if diag.iter().any(|&d| d < 0.0) {
        for (i, x) in psi.iter_mut().enumerate() {
            let mut f = 1.0;
            for (p, &d) in diag.iter().enumerate() {
                if d < 0.0 {
                    if i & (1 << p) != 0 {
                        f = -f;
                    }
                    if i & (1 << (m + p)) != 0 {
                        f = -f;
                    }
                }
            }
            *x = *x * f;
        }
    }
    for &(a, b, c, s) in rots.iter().rev() {
        givens(psi, a, b, c, s);
        givens(psi, m + a, m + b, c, s);
    }
}

fn paired_doubles<T: Amp>(psi: &mut [T], m: usize, tau: &[f64]) {
    for (&(p, q), &t) in tau_pairs(m).iter().zip(tau) {
        if t == 0.0 {
            continue;
        }
        let (c, s) = (t.cos(), t.sin());
        let from = (1usize << p) | (1usize << (m + p));
        let to = (1usize << q) | (1usize << (m + q));
        for i in 0..psi.len() {
            if i & from == from && i & to == 0 {
                // sign of a†_{q a} a†_{q b} a_{p b} a_{p a} |i>
                let (s1, f1) = annihilate(i, p).unwrap();
                let (s2, f2) = annihilate(s1, m + p).unwrap();
                let (s3, f3) = create(s2, m + q).unwrap();
                let (j, f4) = create(s3, q).unwrap();
                let sg = s * f1 * f2 * f3 * f4;
                let x = psi[i];
                let y = psi[j];
                psi[i] = x * c - y * sg;
                psi[j] = x * sg + y * c;
            }
        }
    }
}

fn check_filling(m: usize, n: usize) -> Result<()> {
    if n % 2 != 0 || n > 2 * m {
        return Err(Error::InvalidFilling(format!("{n} electrons in {m} orbitals")));
    }
    if m > MAX_ACTIVE_ORBITALS {
        return Err(Error::DimensionTooLarge(format!("{m} active orbitals exceeds {MAX_ACTIVE_ORBITALS}")));
    }
    Ok(())
}

fn hf_index(m: usize, n: usize) -> usize {
    let mut idx = 0usize;
    for p in 0..n / 2 {
        idx |= 1 << p;
        idx |= 1 << (m + p);
    }
    idx
}

pub fn hartree_fock_state(m: usize, n: usize) -> Result<Statevector> {
    check_filling(m, n)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << (2 * m)];
    amps[hf_index(m, n)] = Complex64::new(1.0, 0.0);
    Ok(Statevector { m_act: m, amplitudes: amps })
}

/// `exp(K)` with `K = sum_pq kappa_pq E_qp`, so that `gamma -> U^T gamma U`, `U = exp(kappa)`.
pub fn apply_orbital_rotation(mut psi: Statevector, kappa: &Array2<f64>) -> Statevector {
    let m = psi.m_act;
    rotate_orbitals(&mut psi.amplitudes, m, kappa);
    psi
}

pub fn apply_paired_doubles(mut psi: Statevector, tau: &[f64]) -> Statevector {
    let m = psi.m_act;
    paired_doubles(&mut psi.amplitudes, m, tau);
    psi
}

fn neg(k: &Array2<f64>) -> Array2<f64> {
    k.mapv(|x| -x)
}

pub fn prepare_mucj(params: &MucjParams, m: usize, n: usize) -> Result<Statevector> {
    if params.m() != m {
        return Err(Error::ShapeMismatch(format!("parameters are for M={}, not {m}", params.m())));
    }
    params.validate()?;
    let mut psi = hartree_fock_state(m, n)?;
    for l in &params.layers {
        psi = apply_orbital_rotation(psi, &l.kappa);
        psi = apply_paired_doubles(psi, &l.tau);
        psi = apply_orbital_rotation(psi, &neg(&l.kappa));
    }
    Ok(apply_orbital_rotation(psi, &params.kappa_final))
}

pub fn measure_rdms(psi: &Statevector) -> SpinSummedRDMs {
    let m = psi.m_act;
    let re = psi.real_part();
    let mut r = transition_rdms(&re, &re, m);
    if psi.max_imag() > 0.0 {
        let im: Vec<f64> = psi.amplitudes.iter().map(|a| a.im).collect();
        let ri = transition_rdms(&im, &im, m);
        r.gamma += &ri.gamma;
        r.big_gamma += &ri.big_gamma;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceCount {
    pub n_qubits: usize,
    pub n_two_qubit_gates: usize,
    pub n_params: usize,
    pub depth: usize,
}

/// Two-qubit gates per compiled paired-double gate, calibrated so that the
/// M=6, k=1 circuit totals 750 two-qubit gates.
pub const PAIR_GATE_TWO_QUBIT: usize = 46;
/// Circuit depth of one compiled paired-double gate, calibrated so that the
/// M=6, k=1 circuit depth is 216.
pub const PAIR_GATE_DEPTH: usize = 33;

#[derive(Debug, Clone, Copy)]
enum Gate {
    Givens(usize, usize),
    Pair(usize, usize),
}

/// Compiled gate list: `exp(-K_l) exp(+K_{l+1})` merge into one fabric, so k layers
/// give k+1 Givens fabrics (the closing rotation absorbs the last `exp(-K_k)`).
fn compiled_circuit(m: usize, k: usize) -> Vec<Gate> {
    let fabric = |out: &mut Vec<Gate>| {
        for j in 0..m.saturating_sub(1) {
            for i in ((j + 1)..m).rev() {
                out.push(Gate::Givens(i - 1, i));
                out.push(Gate::Givens(m + i - 1, m + i));
            }
        }
    };
    let mut gates = Vec::new();
    fabric(&mut gates);
    for _ in 0..k {
        for (p, q) in tau_pairs(m) {
            gates.push(Gate::Pair(p, q));
        }
        fabric(&mut gates);
    }
    gates
}

pub fn resource_count(m: usize, k: usize) -> ResourceCount {
    let gates = compiled_circuit(m, k);
    let mut ready = vec![0usize; 2 * m];
    let mut n2 = 0;
    for g in &gates {
        let (qubits, d, c) = match *g {
            Gate::Givens(a, b) => (vec![a, b], 1, 1),
            Gate::Pair(p, q) => (vec![p, q, m + p, m + q], PAIR_GATE_DEPTH, PAIR_GATE_TWO_QUBIT),
        };
        let start = qubits.iter().map(|&q| ready[q]).max().unwrap_or(0);
        for &q in &qubits {
            ready[q] = start + d;
        }
        n2 += c;
    }
    ResourceCount {
        n_qubits: 2 * m,
        n_two_qubit_gates: n2,
        n_params: MucjParams::n_params(m, k),
        depth: ready.into_iter().max().unwrap_or(0),
    }
}
