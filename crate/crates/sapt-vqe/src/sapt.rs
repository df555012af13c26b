//! SAPT through second order on spin-summed monomer densities.
//!
//! Lower-case indices label A orbitals, upper-case B orbitals. Transition
//! densities are `<0|E_pq|mu>` and `<0|e_pqrs|mu>`. The exchange functional is
//! `F = <Psi_A Psi_B|(V - E_pol1) P|Psi'_A Psi'_B>` with `P = -sum_ij P_ij`.

use crate::bundle::IntegralBundle;
use crate::erpa::ErpaSolution;
use crate::error::{Error, Result};
use crate::linalg::contract;
use crate::rdm::SpinSummedRDMs;
use ndarray::{Array1, Array2, Array4, ArrayD, Ix2};
use serde::{Deserialize, Serialize};

pub const HARTREE_TO_KCAL: f64 = 627.509474;

fn d<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> ArrayD<f64> {
    a.clone().into_dyn()
}

fn scalar(t: ArrayD<f64>) -> f64 {
    t.iter().sum()
}

fn mat(t: ArrayD<f64>, rows: usize, cols: usize) -> Array2<f64> {
    t.into_shape_with_order((rows, cols)).unwrap()
}

fn dot2(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone)]
pub struct InterMonomerOperators {
    pub n_orb_a: usize,
    pub n_orb_b: usize,
    pub s: Array2<f64>,
    pub v: Array4<f64>,
    /// `v~(qR|pS)`: both pairs mixed.
    pub vt_abab: Array4<f64>,
    /// `v~(qP|QS)`
    pub vt_abbb: Array4<f64>,
    /// `v~(qs|pQ)`
    pub vt_aaab: Array4<f64>,
    /// `v~(qs|QS)`
    pub vt_aabb: Array4<f64>,
    pub omega_b_on_a: Array2<f64>,
    pub omega_a_on_b: Array2<f64>,
    pub e_pol1: f64,
    pub p_bar: f64,
    pub gamma_a: Array2<f64>,
    pub big_gamma_a: Array4<f64>,
    pub gamma_b: Array2<f64>,
    pub big_gamma_b: Array4<f64>,
}

pub fn electrostatics(gamma_a: &Array2<f64>, gamma_b: &Array2<f64>, bundle: &IntegralBundle) -> f64 {
    let coul = scalar(contract("pq,pqrs,rs->", &[&d(gamma_a), &d(&bundle.v_inter), &d(gamma_b)]).unwrap());
    bundle.v_nuc_ab + dot2(gamma_a, &bundle.u_b_on_a) + dot2(gamma_b, &bundle.u_a_on_b) + coul
}

impl InterMonomerOperators {
    pub fn new(bundle: &IntegralBundle, rdms_a: &SpinSummedRDMs, rdms_b: &SpinSummedRDMs) -> Result<InterMonomerOperators> {
        let (na, nb) = (bundle.n_orb_a, bundle.n_orb_b);
        if rdms_a.n_orb() != na || rdms_b.n_orb() != nb {
            return Err(Error::ShapeMismatch(format!(
                "RDMs over {}+{} orbitals, bundle has {na}+{nb}",
                rdms_a.n_orb(),
                rdms_b.n_orb()
            )));
        }
        let (ea, eb) = (bundle.n_elec_a as f64, bundle.n_elec_b as f64);
        let s = &bundle.s_ab;
        let v0 = bundle.v_nuc_ab;
        let da = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
        let inv_b = if eb > 0.0 { 1.0 / eb } else { 0.0 };
        let inv_a = if ea > 0.0 { 1.0 / ea } else { 0.0 };
        let vt_abab = Array4::from_shape_fn((na, nb, na, nb), |(q, r, p, t)| {
            bundle.eri_abab[[q, r, p, t]]
                + bundle.u_b_cross[[q, r]] * s[[p, t]] * inv_b
                + s[[q, r]] * bundle.u_a_cross[[p, t]] * inv_a
                + v0 * s[[q, r]] * s[[p, t]] * inv_a * inv_b
        });
        let vt_abbb = Array4::from_shape_fn((na, nb, nb, nb), |(q, pp, qq, ss)| {
            bundle.eri_abbb[[q, pp, qq, ss]]
                + bundle.u_b_cross[[q, pp]] * da(qq, ss) * inv_b
                + s[[q, pp]] * bundle.u_a_on_b[[qq, ss]] * inv_a
                + v0 * s[[q, pp]] * da(qq, ss) * inv_a * inv_b
        });
        let vt_aaab = Array4::from_shape_fn((na, na, na, nb), |(q, t, p, qq)| {
            bundle.eri_abaa[[p, qq, q, t]]
                + bundle.u_b_on_a[[q, t]] * s[[p, qq]] * inv_b
                + da(q, t) * bundle.u_a_cross[[p, qq]] * inv_a
                + v0 * da(q, t) * s[[p, qq]] * inv_a * inv_b
        });
        let vt_aabb = Array4::from_shape_fn((na, na, nb, nb), |(q, t, qq, ss)| {
            bundle.v_inter[[q, t, qq, ss]]
                + bundle.u_b_on_a[[q, t]] * da(qq, ss) * inv_b
                + da(q, t) * bundle.u_a_on_b[[qq, ss]] * inv_a
                + v0 * da(q, t) * da(qq, ss) * inv_a * inv_b
        });

        let field = |u: &Array2<f64>, spec: &str, g: &Array2<f64>| -> Array2<f64> {
            let f = u + &contract(spec, &[&d(&bundle.v_inter), &d(g)]).unwrap().into_dimensionality::<Ix2>().unwrap();
            (&f + &f.t()) * 0.5
        };
        let omega_b_on_a = field(&bundle.u_b_on_a, "pqrs,rs->pq", &rdms_b.gamma);
        let omega_a_on_b = field(&bundle.u_a_on_b, "pqrs,pq->rs", &rdms_a.gamma);
        let e_pol1 = electrostatics(&rdms_a.gamma, &rdms_b.gamma, bundle);
        let p_bar = -0.5 * scalar(contract("ab,YX,aX,bY->", &[&d(&rdms_a.gamma), &d(&rdms_b.gamma), &d(s), &d(s)])?);
        if p_bar > 1e-12 {
            log::warn!("P_bar = {p_bar:.3e} is positive");
        }
        Ok(InterMonomerOperators {
            n_orb_a: na,
            n_orb_b: nb,
            s: s.clone(),
            v: bundle.v_inter.clone(),
            vt_abab,
            vt_abbb,
            vt_aaab,
            vt_aabb,
            omega_b_on_a,
            omega_a_on_b,
            e_pol1,
            p_bar,
            gamma_a: rdms_a.gamma.clone(),
            big_gamma_a: rdms_a.big_gamma.clone(),
            gamma_b: rdms_b.gamma.clone(),
            big_gamma_b: rdms_b.big_gamma.clone(),
        })
    }

    fn operand(&self, name: &str) -> ArrayD<f64> {
        match name {
            "S" => d(&self.s),
            "abab" => d(&self.vt_abab),
            "abbb" => d(&self.vt_abbb),
            "aaab" => d(&self.vt_aaab),
            "aabb" => d(&self.vt_aabb),
            "gA" => d(&self.gamma_a),
            "GA" => d(&self.big_gamma_a),
            "gB" => d(&self.gamma_b),
            "GB" => d(&self.big_gamma_b),
            _ => unreachable!("operand {name}"),
        }
    }
}

/// The four terms of `F` beyond the pure 1-RDM ones, plus the overlap term,
/// as einsum operand lists over named tensors.
const T1: (&str, &[&str]) = ("ab,YX,aXbY", &["gA", "gB", "abab"]);
const T2: (&str, &[&str]) = ("ab,RPSQ,bR,aPQS", &["gA", "GB", "S", "abbb"]);
const T3: (&str, &[&str]) = ("rpsq,QP,rP,qspQ", &["GA", "gB", "S", "aaab"]);
const T4: (&str, &[&str]) = ("rpsq,RPSQ,rP,pR,qsQS", &["GA", "GB", "S", "S", "aabb"]);
const T5: (&str, &[&str]) = ("ab,YX,aX,bY", &["gA", "gB", "S", "S"]);

/// `F[gamma_A, Gamma_A, gamma_B, Gamma_B]` evaluated directly on the given densities.
pub fn exchange_functional(
    ops: &InterMonomerOperators,
    (ga, gga): (&Array2<f64>, &Array4<f64>),
    (gb, ggb): (&Array2<f64>, &Array4<f64>),
) -> f64 {
    let eval = |(spec, names): (&str, &[&str])| -> f64 {
        let ts: Vec<ArrayD<f64>> = names
            .iter()
            .map(|n| match *n {
                "gA" => d(ga),
                "GA" => d(gga),
                "gB" => d(gb),
                "GB" => d(ggb),
                other => ops.operand(other),
            })
            .collect();
        let refs: Vec<&ArrayD<f64>> = ts.iter().collect();
        scalar(contract(&format!("{spec}->"), &refs).unwrap())
    };
    -0.5 * (eval(T1) + eval(T2) + eval(T3) + eval(T4) - ops.e_pol1 * eval(T5))
}

pub fn exchange_s2(ops: &InterMonomerOperators) -> f64 {
    exchange_functional(ops, (&ops.gamma_a, &ops.big_gamma_a), (&ops.gamma_b, &ops.big_gamma_b))
}

/// Replaces slot `pos` of operand `target` by `open`, and the same letter in
/// every other operand by `kernel`.
fn substitute(ops: &[String], target: usize, pos: usize, open: char, kernel: char) -> Vec<String> {
    let c = ops[target].chars().nth(pos).unwrap();
    ops.iter()
        .enumerate()
        .map(|(k, o)| {
            if k == target {
                o.chars().enumerate().map(|(i, x)| if i == pos { open } else { x }).collect()
            } else {
                o.chars().map(|x| if x == c { kernel } else { x }).collect()
            }
        })
        .collect()
}

/// `[-Q, R, -Q, R]`: the coefficient of `Gamma` with slot `t` replaced, in
/// `Gamma^nu_pqrs = sum_m (-Q_mp G_mqrs + R_mq G_pmrs - Q_mr G_pqms + R_ms G_pqrm)`.
fn slot_weights(erpa: &ErpaSolution, nu: usize) -> [Array2<f64>; 4] {
    let (q, r) = erpa.qr_intermediates(nu);
    let mq = -q;
    [mq.clone(), r.clone(), mq, r]
}

/// Mode-by-orbital-pair matrices: row `nu` holds `gamma^nu` and the four slot weights.
struct ModeRows {
    gamma: Array2<f64>,
    slots: [Array2<f64>; 4],
}

fn mode_rows(erpa: &ErpaSolution) -> ModeRows {
    let n = erpa.n_orb;
    let nm = erpa.n_modes();
    let mut gamma = Array2::zeros((nm, n * n));
    let mut slots: [Array2<f64>; 4] = std::array::from_fn(|_| Array2::zeros((nm, n * n)));
    for nu in 0..nm {
        let g = erpa.transition_gamma(nu).gamma;
        gamma.row_mut(nu).assign(&Array1::from_iter(g.iter().copied()));
        for (t, w) in slot_weights(erpa, nu).iter().enumerate() {
            slots[t].row_mut(nu).assign(&Array1::from_iter(w.iter().copied()));
        }
    }
    ModeRows { gamma, slots }
}

fn run(ops: &InterMonomerOperators, letters: &[String], names: &[&str], out: &str) -> ArrayD<f64> {
    let ts: Vec<ArrayD<f64>> = names.iter().map(|n| ops.operand(n)).collect();
    let refs: Vec<&ArrayD<f64>> = ts.iter().collect();
    contract(&format!("{}->{out}", letters.join(",")), &refs).unwrap()
}

fn split(spec: &str) -> Vec<String> {
    spec.split(',').map(String::from).collect()
}

/// `F^mu` for every ERPA mode of A with B in its ground state, through
/// mode-independent intermediates: `F^mu = -1/2 (gamma^mu . G + sum_t C^mu_t . W_t)`.
pub fn exchange_induction_functionals(ops: &InterMonomerOperators, erpa_a: &ErpaSolution) -> Vec<f64> {
    let na = ops.n_orb_a;
    // terms linear in gamma^mu: T1, T2 and the overlap term
    let g_lin = {
        let mut t5: Vec<String> = split(T5.0);
        t5.remove(0);
        let mut t1 = split(T1.0);
        t1.remove(0);
        let mut t2 = split(T2.0);
        t2.remove(0);
        let a = run(ops, &t1, &T1.1[1..], "ab");
        let b = run(ops, &t2, &T2.1[1..], "ab");
        let c = run(ops, &t5, &T5.1[1..], "ab");
        mat(a + b - c * ops.e_pol1, na, na)
    };
    // W_t from T3 and T4 with slot t of Gamma_A opened
    let w: Vec<Array2<f64>> = (0..4)
        .map(|t| {
            let mut acc = Array2::<f64>::zeros((na, na));
            for (spec, names) in [T3, T4] {
                let l = substitute(&split(spec), 0, t, 'm', 'x');
                acc += &mat(run(ops, &l, names, "mx"), na, na);
            }
            acc
        })
        .collect();
    (0..erpa_a.n_modes())
        .map(|mu| {
            let g = erpa_a.transition_gamma(mu).gamma;
            let cw: f64 = slot_weights(erpa_a, mu).iter().zip(&w).map(|(c, w)| dot2(c, w)).sum();
            -0.5 * (dot2(&g, &g_lin) + cw)
        })
        .collect()
}

/// `F^{mu nu}` for all mode pairs: 1-RDM-only terms, the mixed terms with one
/// transition 2-RDM expanded, and the sixteen doubly expanded `T4` terms.
pub fn exchange_dispersion_functionals(ops: &InterMonomerOperators, erpa_a: &ErpaSolution, erpa_b: &ErpaSolution) -> Array2<f64> {
    let (na, nb) = (ops.n_orb_a, ops.n_orb_b);
    let (n2a, n2b) = (na * na, nb * nb);
    let ra = mode_rows(erpa_a);
    let rb = mode_rows(erpa_b);

    // T1 - E_pol1 T5 with both 1-RDMs open
    let k15 = {
        let a = d(&ops.vt_abab).permuted_axes(ndarray::IxDyn(&[0, 2, 3, 1])).as_standard_layout().into_owned();
        let ss = contract("aX,bY->abYX", &[&d(&ops.s), &d(&ops.s)]).unwrap();
        mat(a - ss * ops.e_pol1, n2a, n2b)
    };
    let mut total = ra.gamma.dot(&k15).dot(&rb.gamma.t());

    // T2: gamma^mu against Gamma^nu_B
    let t2 = split(T2.0);
    for u in 0..4 {
        let l = substitute(&t2[1..], 0, u, 'M', 'X');
        let k = mat(run(ops, &l, &T2.1[1..], &format!("{}MX", t2[0])), n2a, n2b);
        total += &ra.gamma.dot(&k).dot(&rb.slots[u].t());
    }
    // T3: Gamma^mu_A against gamma^nu
    let t3 = split(T3.0);
    let t3_rest: Vec<String> = vec![t3[0].clone(), t3[2].clone(), t3[3].clone()];
    let t3_names = [T3.1[0], T3.1[2], T3.1[3]];
    for t in 0..4 {
        let l = substitute(&t3_rest, 0, t, 'm', 'x');
        let k = mat(run(ops, &l, &t3_names, &format!("mx{}", t3[1])), n2a, n2b);
        total += &ra.slots[t].dot(&k).dot(&rb.gamma.t());
    }
    // T4: sixteen terms
    let t4 = split(T4.0);
    for t in 0..4 {
        let la = substitute(&t4, 0, t, 'm', 'x');
        for u in 0..4 {
            let l = substitute(&la, 1, u, 'M', 'X');
            let k = mat(run(ops, &l, T4.1, "mxMX"), n2a, n2b);
            total += &ra.slots[t].dot(&k).dot(&rb.slots[u].t());
        }
    }
    total * -0.5
}

/// Dense reference for `F^mu`: transition 2-RDMs built explicitly, one mode at a time.
pub fn dense_exchange_induction_functionals(ops: &InterMonomerOperators, erpa_a: &ErpaSolution) -> Result<Vec<f64>> {
    (0..erpa_a.n_modes())
        .map(|mu| {
            let gg = erpa_a.dense_transition_tpdm(mu, &ops.big_gamma_a)?;
            let g = erpa_a.transition_gamma(mu).gamma;
            Ok(exchange_functional(ops, (&g, &gg), (&ops.gamma_b, &ops.big_gamma_b)))
        })
        .collect()
}

/// Dense reference for `F^{mu nu}`.
pub fn dense_exchange_dispersion_functionals(
    ops: &InterMonomerOperators,
    erpa_a: &ErpaSolution,
    erpa_b: &ErpaSolution,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((erpa_a.n_modes(), erpa_b.n_modes()));
    let b_side: Vec<(Array2<f64>, Array4<f64>)> = (0..erpa_b.n_modes())
        .map(|nu| Ok((erpa_b.transition_gamma(nu).gamma, erpa_b.dense_transition_tpdm(nu, &ops.big_gamma_b)?)))
        .collect::<Result<_>>()?;
    for mu in 0..erpa_a.n_modes() {
        let gg = erpa_a.dense_transition_tpdm(mu, &ops.big_gamma_a)?;
        let g = erpa_a.transition_gamma(mu).gamma;
        for (nu, (gb, ggb)) in b_side.iter().enumerate() {
            out[[mu, nu]] = exchange_functional(ops, (&g, &gg), (gb, ggb));
        }
    }
    Ok(out)
}

fn check_omegas(w: &[f64]) -> Result<()> {
    match w.iter().find(|&&x| x <= 1e-10) {
        Some(&x) => Err(Error::ZeroDenominator(x)),
        None => Ok(()),
    }
}

/// `t^mu = gamma^mu . Omega` for every mode.
pub fn induction_numerators(erpa: &ErpaSolution, omega: &Array2<f64>) -> Vec<f64> {
    (0..erpa.n_modes()).map(|mu| dot2(&erpa.transition_gamma(mu).gamma, omega)).collect()
}

/// `t^{mu nu} = gamma^mu_A v gamma^nu_B`.
pub fn dispersion_numerators(ops: &InterMonomerOperators, erpa_a: &ErpaSolution, erpa_b: &ErpaSolution) -> Array2<f64> {
    let (na, nb) = (ops.n_orb_a, ops.n_orb_b);
    let v = ops.v.view().into_shape_with_order((na * na, nb * nb)).unwrap();
    mode_rows(erpa_a).gamma.dot(&v).dot(&mode_rows(erpa_b).gamma.t())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InductionParts {
    pub a_from_b: f64,
    pub b_from_a: f64,
    pub per_mode_a: Vec<f64>,
    pub per_mode_b: Vec<f64>,
}

impl InductionParts {
    pub fn total(&self) -> f64 {
        self.a_from_b + self.b_from_a
    }
}

fn polarize(t: &[f64], w: &[f64]) -> Vec<f64> {
    t.iter().zip(w).map(|(t, w)| -t * t / w).collect()
}

pub fn induction(erpa_a: &ErpaSolution, erpa_b: &ErpaSolution, ops: &InterMonomerOperators) -> Result<InductionParts> {
    check_omegas(&erpa_a.omegas)?;
    check_omegas(&erpa_b.omegas)?;
    let pa = polarize(&induction_numerators(erpa_a, &ops.omega_b_on_a), &erpa_a.omegas);
    let pb = polarize(&induction_numerators(erpa_b, &ops.omega_a_on_b), &erpa_b.omegas);
    Ok(InductionParts { a_from_b: pa.iter().sum(), b_from_a: pb.iter().sum(), per_mode_a: pa, per_mode_b: pb })
}

/// `ops_swapped` describes the same dimer with the monomer roles exchanged.
pub fn exchange_induction(
    erpa_a: &ErpaSolution,
    erpa_b: &ErpaSolution,
    ops: &InterMonomerOperators,
    ops_swapped: &InterMonomerOperators,
    dense: bool,
) -> Result<(InductionParts, InductionParts)> {
    let ind = induction(erpa_a, erpa_b, ops)?;
    let (fa, fb) = if dense {
        (dense_exchange_induction_functionals(ops, erpa_a)?, dense_exchange_induction_functionals(ops_swapped, erpa_b)?)
    } else {
        (exchange_induction_functionals(ops, erpa_a), exchange_induction_functionals(ops_swapped, erpa_b))
    };
    let side = |f: &[f64], t: &[f64], w: &[f64], e_ind: f64| -> (f64, Vec<f64>) {
        let per: Vec<f64> = f.iter().zip(t).zip(w).map(|((f, t), w)| -f * t / w).collect();
        (per.iter().sum::<f64>() - e_ind * ops.p_bar, per)
    };
    let (a, pa) = side(&fa, &induction_numerators(erpa_a, &ops.omega_b_on_a), &erpa_a.omegas, ind.a_from_b);
    let (b, pb) = side(&fb, &induction_numerators(erpa_b, &ops.omega_a_on_b), &erpa_b.omegas, ind.b_from_a);
    Ok((ind, InductionParts { a_from_b: a, b_from_a: b, per_mode_a: pa, per_mode_b: pb }))
}

pub fn dispersion(erpa_a: &ErpaSolution, erpa_b: &ErpaSolution, ops: &InterMonomerOperators) -> Result<(f64, Array2<f64>)> {
    check_omegas(&erpa_a.omegas)?;
    check_omegas(&erpa_b.omegas)?;
    let t = dispersion_numerators(ops, erpa_a, erpa_b);
    let per = Array2::from_shape_fn(t.dim(), |(m, n)| -t[[m, n]].powi(2) / (erpa_a.omegas[m] + erpa_b.omegas[n]));
    Ok((per.sum(), per))
}

pub fn exchange_dispersion(
    erpa_a: &ErpaSolution,
    erpa_b: &ErpaSolution,
    ops: &InterMonomerOperators,
    dense: bool,
) -> Result<f64> {
    let (e_disp, _) = dispersion(erpa_a, erpa_b, ops)?;
    let t = dispersion_numerators(ops, erpa_a, erpa_b);
    let f = if dense {
        dense_exchange_dispersion_functionals(ops, erpa_a, erpa_b)?
    } else {
        exchange_dispersion_functionals(ops, erpa_a, erpa_b)
    };
    let mut s = 0.0;
    for ((m, n), f) in f.indexed_iter() {
        s -= f * t[[m, n]] / (erpa_a.omegas[m] + erpa_b.omegas[n]);
    }
    Ok(s - e_disp * ops.p_bar)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Energy {
    pub hartree: f64,
    pub kcal_mol: f64,
}

impl From<f64> for Energy {
    fn from(h: f64) -> Energy {
        Energy { hartree: h, kcal_mol: h * HARTREE_TO_KCAL }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VqeStep {
    pub k: usize,
    pub energy: f64,
    pub grad_norm: f64,
    pub n_iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MonomerSummary {
    pub label: String,
    pub method: String,
    pub energy: f64,
    pub natural_occupations: Vec<f64>,
    pub vqe_trajectory: Vec<VqeStep>,
}

/// VQE run against its CAS-CI reference, all in kcal/mol.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReferenceComparison {
    pub reference_total: f64,
    /// `term -> E(method) - E(CAS-CI)`
    pub term_errors: std::collections::BTreeMap<String, f64>,
    pub interaction_error: f64,
    pub monomer_energy_errors: Vec<f64>,
    /// `|interaction_error| / max |monomer_energy_errors|`
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct Diagnostics {
    pub n_modes_a: usize,
    pub n_modes_b: usize,
    pub discarded_metric_a: usize,
    pub discarded_metric_b: usize,
    pub discarded_modes_a: usize,
    pub discarded_modes_b: usize,
    pub p_bar: f64,
    pub e_pol1: f64,
    pub omega_a: Vec<f64>,
    pub omega_b: Vec<f64>,
    pub ind_per_mode_a: Vec<f64>,
    pub ind_per_mode_b: Vec<f64>,
    pub exch_ind_per_mode_a: Vec<f64>,
    pub exch_ind_per_mode_b: Vec<f64>,
    /// Largest `|dense - contracted|` over all `F^mu` and `F^{mu nu}`, when requested.
    pub dense_validation: Option<f64>,
    /// Seconds per pipeline stage.
    pub timings: std::collections::BTreeMap<String, f64>,
    pub monomers: Vec<MonomerSummary>,
    pub reference: Option<ReferenceComparison>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SaptReport {
    pub elst: Energy,
    pub exch: Energy,
    pub ind_u: Energy,
    pub exch_ind_u: Energy,
    pub disp: Energy,
    pub exch_disp: Energy,
    pub total: Energy,
    pub units: String,
    pub diagnostics: Diagnostics,
    pub provenance: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaptTerms {
    pub elst: f64,
    pub exch: f64,
    pub ind_u: f64,
    pub exch_ind_u: f64,
    pub disp: f64,
    pub exch_disp: f64,
}

impl SaptTerms {
    pub fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("elst", self.elst),
            ("exch", self.exch),
            ("ind_u", self.ind_u),
            ("exch_ind_u", self.exch_ind_u),
            ("disp", self.disp),
            ("exch_disp", self.exch_disp),
            ("total", self.total()),
        ]
    }

    pub fn total(&self) -> f64 {
        self.elst + self.exch + self.ind_u + self.exch_ind_u + self.disp + self.exch_disp
    }
}

pub fn assemble_report(terms: SaptTerms, diagnostics: Diagnostics, provenance: serde_json::Value) -> SaptReport {
    SaptReport {
        elst: terms.elst.into(),
        exch: terms.exch.into(),
        ind_u: terms.ind_u.into(),
        exch_ind_u: terms.exch_ind_u.into(),
        disp: terms.disp.into(),
        exch_disp: terms.exch_disp.into(),
        total: terms.total().into(),
        units: "hartree, kcal/mol".into(),
        diagnostics,
        provenance,
    }
}

/// All six components for a dimer whose orbitals are the monomer natural orbitals
/// that `erpa_a`, `erpa_b` were solved in.
pub fn compute_sapt(
    bundle: &IntegralBundle,
    rdms_a: &SpinSummedRDMs,
    rdms_b: &SpinSummedRDMs,
    erpa_a: &ErpaSolution,
    erpa_b: &ErpaSolution,
    dense_validation: bool,
) -> Result<(SaptTerms, Diagnostics)> {
    let ops = InterMonomerOperators::new(bundle, rdms_a, rdms_b)?;
    let ops_swapped = InterMonomerOperators::new(&bundle.swapped(), rdms_b, rdms_a)?;
    let exch = exchange_s2(&ops);
    let (ind, exch_ind) = exchange_induction(erpa_a, erpa_b, &ops, &ops_swapped, false)?;
    let (disp, _) = dispersion(erpa_a, erpa_b, &ops)?;
    let exch_disp = exchange_dispersion(erpa_a, erpa_b, &ops, false)?;

    let dense_validation = if dense_validation {
        let mut err = 0.0_f64;
        for (o, e) in [(&ops, erpa_a), (&ops_swapped, erpa_b)] {
            let c = exchange_induction_functionals(o, e);
            let dn = dense_exchange_induction_functionals(o, e)?;
            err = c.iter().zip(&dn).fold(err, |m, (x, y)| m.max((x - y).abs()));
        }
        let c = exchange_dispersion_functionals(&ops, erpa_a, erpa_b);
        let dn = dense_exchange_dispersion_functionals(&ops, erpa_a, erpa_b)?;
        Some(c.iter().zip(dn.iter()).fold(err, |m, (x, y)| m.max((x - y).abs())))
    } else {
        None
    };

    let terms = SaptTerms {
        elst: ops.e_pol1,
        exch,
        ind_u: ind.total(),
        exch_ind_u: exch_ind.total(),
        disp,
        exch_disp,
    };
    let diagnostics = Diagnostics {
        n_modes_a: erpa_a.n_modes(),
        n_modes_b: erpa_b.n_modes(),
        discarded_metric_a: erpa_a.discarded_metric,
        discarded_metric_b: erpa_b.discarded_metric,
        discarded_modes_a: erpa_a.discarded_modes,
        discarded_modes_b: erpa_b.discarded_modes,
        p_bar: ops.p_bar,
        e_pol1: ops.e_pol1,
        omega_a: erpa_a.omegas.clone(),
        omega_b: erpa_b.omegas.clone(),
        ind_per_mode_a: ind.per_mode_a,
        ind_per_mode_b: ind.per_mode_b,
        exch_ind_per_mode_a: exch_ind.per_mode_a,
        exch_ind_per_mode_b: exch_ind.per_mode_b,
        dense_validation,
        ..Diagnostics::default()
    };
    Ok((terms, diagnostics))
}
