#![allow(dead_code)]

use ndarray::{Array2, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sapt_vqe::bundle::{to_natural_orbitals, FoldedActiveHamiltonian, IntegralBundle, Monomer};
use sapt_vqe::casci::{solve_casci, CasciSolution};
use sapt_vqe::erpa::{build_hessians, build_uncoupled, orbital_energies, solve_erpa, ErpaSolution};
use sapt_vqe::fermion::{annihilate, apply_one_body, apply_two_body, create, dot, Sector};
use sapt_vqe::rdm::SpinSummedRDMs;
use sapt_vqe::synthetic::{synthetic_dimer, SyntheticSpec};

pub fn unit(n: usize, p: usize, q: usize) -> Array2<f64> {
    let mut m = Array2::zeros((n, n));
    m[[p, q]] = 1.0;
    m
}

/// `E_pq |psi>`
pub fn e_op(m: usize, p: usize, q: usize, psi: &[f64]) -> Vec<f64> {
    apply_one_body(m, &unit(m, p, q), psi)
}

/// `H |psi>` with `H = e0 + sum h E + 1/2 sum (pq|rs) e_pqrs`.
pub fn apply_h(m: usize, e0: f64, h: &Array2<f64>, eri: &Array4<f64>, psi: &[f64]) -> Vec<f64> {
    let one = apply_one_body(m, h, psi);
    let two = apply_two_body(m, eri, psi);
    psi.iter().zip(one.iter().zip(&two)).map(|(x, (a, b))| e0 * x + a + 0.5 * b).collect()
}

pub fn random_state(m: usize, n_elec: usize, seed: u64) -> Vec<f64> {
    let sector = Sector::new(m, n_elec / 2, n_elec / 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..sector.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dot(&v, &v).sqrt();
    sector.scatter(&v.iter().map(|x| x / norm).collect::<Vec<_>>())
}

/// `<psi|[E_pq,[H,E_sr]]|psi>` by explicit operator application.
pub fn double_commutator_oracle(m: usize, h: &Array2<f64>, eri: &Array4<f64>, psi: &[f64], p: usize, q: usize, s: usize, r: usize) -> f64 {
    let hp = |v: &[f64]| apply_h(m, 0.0, h, eri, v);
    let e_qp = e_op(m, q, p, psi);
    let e_sr = e_op(m, s, r, psi);
    let e_rs = e_op(m, r, s, psi);
    let e_pq = e_op(m, p, q, psi);
    let h0 = hp(psi);
    let t1 = dot(&e_qp, &hp(&e_sr));
    let t2 = dot(&e_qp, &e_op(m, s, r, &h0));
    let t3 = dot(&e_op(m, r, s, &h0), &e_pq);
    let t4 = dot(&e_rs, &hp(&e_pq));
    t1 - t2 - t3 + t4
}

pub fn max_diff<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    a.into_iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `E_pq |psi>` built directly from ladder operators.
pub fn bare_e_op(m: usize, p: usize, q: usize, psi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; psi.len()];
    for (i, &x) in psi.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for off in [0, m] {
            if let Some((s1, f1)) = annihilate(i, off + q) {
                if let Some((j, f2)) = create(s1, off + p) {
                    out[j] += f1 * f2 * x;
                }
            }
        }
    }
    out
}

pub fn folded(b: &IntegralBundle, m: Monomer) -> FoldedActiveHamiltonian {
    FoldedActiveHamiltonian { h_tilde: b.h(m).clone(), eri_act: b.eri(m).clone(), e_core: b.e_nuc(m) }
}

pub fn casci(b: &IntegralBundle, m: Monomer) -> CasciSolution {
    solve_casci(&folded(b, m), b.n_elec(m), None).unwrap()
}

pub struct Prepared {
    pub bundle: IntegralBundle,
    pub ra: SpinSummedRDMs,
    pub rb: SpinSummedRDMs,
    pub ea: ErpaSolution,
    pub eb: ErpaSolution,
}

pub fn prepare(d: &IntegralBundle, uncoupled: bool) -> Prepared {
    let (ca, cb) = (casci(d, Monomer::A), casci(d, Monomer::B));
    let (ra, b1, _, _) = to_natural_orbitals(&ca.ground_rdms, d, Monomer::A).unwrap();
    let (rb, bundle, _, _) = to_natural_orbitals(&cb.ground_rdms, &b1, Monomer::B).unwrap();
    let solve = |r: &SpinSummedRDMs, m: Monomer| {
        let p = if uncoupled {
            build_uncoupled(r, bundle.h(m), bundle.eri(m)).unwrap()
        } else {
            build_hessians(r, bundle.h(m), bundle.eri(m)).unwrap()
        };
        solve_erpa(&p, 1e-5).unwrap()
    };
    let ea = solve(&ra, Monomer::A);
    let eb = solve(&rb, Monomer::B);
    Prepared { bundle, ra, rb, ea, eb }
}

pub fn dimer_for(seed: u64, chains: (usize, usize), mos: (usize, usize)) -> IntegralBundle {
    synthetic_dimer(&SyntheticSpec::chains(chains.0, 1.5, chains.1, 1.4, 2.8).jittered(0.25, seed).with_mos(mos.0, mos.1))
        .unwrap()
        .bundle
}

pub fn rhf(b: &IntegralBundle) -> (SpinSummedRDMs, SpinSummedRDMs) {
    let occ = |n: usize, ne: usize| (0..n).map(|i| if i < ne / 2 { 2.0 } else { 0.0 }).collect::<Vec<_>>();
    (SpinSummedRDMs::determinant(&occ(b.n_orb_a, b.n_elec_a)), SpinSummedRDMs::determinant(&occ(b.n_orb_b, b.n_elec_b)))
}

/// Rayleigh-Schrodinger second order in the product space of the two monomer sectors.
pub fn rspt2(b: &IntegralBundle, ca: &CasciSolution, cb: &CasciSolution) -> (f64, f64) {
    let sector = |m: Monomer| Sector::new(b.n_orb(m), b.n_elec(m) / 2, b.n_elec(m) / 2);
    let (sa, sb) = (sector(Monomer::A), sector(Monomer::B));
    let e_mats = |s: &Sector, m: usize| -> Vec<Vec<Array2<f64>>> {
        (0..m)
            .map(|p| {
                (0..m)
                    .map(|q| {
                        let mut out = Array2::zeros((s.dim(), s.dim()));
                        for j in 0..s.dim() {
                            let mut u = vec![0.0; s.dim()];
                            u[j] = 1.0;
                            let col = s.gather(&e_op(m, p, q, &s.scatter(&u)));
                            for i in 0..s.dim() {
                                out[[i, j]] = col[i];
                            }
                        }
                        out
                    })
                    .collect()
            })
            .collect()
    };
    let (ma, mb) = (b.n_orb_a, b.n_orb_b);
    let (xa, xb) = (e_mats(&sa, ma), e_mats(&sb, mb));
    let ga = sa.gather(&ca.state(0).unwrap());
    let gb = sb.gather(&cb.state(0).unwrap());
    let (da, db) = (sa.dim(), sb.dim());
    // |V 00> as a da x db matrix
    let mut w = Array2::<f64>::zeros((da, db));
    let ea: Vec<Vec<Vec<f64>>> = (0..ma).map(|p| (0..ma).map(|q| xa[p][q].dot(&ndarray::arr1(&ga)).to_vec()).collect()).collect();
    let eb: Vec<Vec<Vec<f64>>> = (0..mb).map(|p| (0..mb).map(|q| xb[p][q].dot(&ndarray::arr1(&gb)).to_vec()).collect()).collect();
    for i in 0..da {
        for j in 0..db {
            let mut v = b.v_nuc_ab * ga[i] * gb[j];
            for p in 0..ma {
                for q in 0..ma {
                    v += b.u_b_on_a[[p, q]] * ea[p][q][i] * gb[j];
                    for r in 0..mb {
                        for s in 0..mb {
                            v += b.v_inter[[p, q, r, s]] * ea[p][q][i] * eb[r][s][j];
                        }
                    }
                }
            }
            for r in 0..mb {
                for s in 0..mb {
                    v += b.u_a_on_b[[r, s]] * ga[i] * eb[r][s][j];
                }
            }
            w[[i, j]] = v;
        }
    }
    let ha = sa.hamiltonian(0.0, &b.h_a, &b.eri_a);
    let hb = sb.hamiltonian(0.0, &b.h_b, &b.eri_b);
    let eiga = sapt_vqe::linalg::sym_eig(&ha).unwrap();
    let eigb = sapt_vqe::linalg::sym_eig(&hb).unwrap();
    let wt = eiga.eigenvectors.t().dot(&w).dot(&eigb.eigenvectors);
    let (e0a, e0b) = (eiga.eigenvalues[0], eigb.eigenvalues[0]);
    let (mut ind, mut disp) = (0.0, 0.0);
    for i in 0..da {
        for j in 0..db {
            if i == 0 && j == 0 {
                continue;
            }
            let c = -wt[[i, j]].powi(2) / (eiga.eigenvalues[i] - e0a + eigb.eigenvalues[j] - e0b);
            if i == 0 || j == 0 {
                ind += c;
            } else {
                disp += c;
            }
        }
    }
    (ind, disp)
}

/// SAPT0 dispersion from orbital energies: `-4 sum (ia|jb)^2 / (e_a - e_i + e_b - e_j)`.
pub fn sapt0_dispersion(b: &IntegralBundle, ra: &SpinSummedRDMs, rb: &SpinSummedRDMs) -> f64 {
    let eps_a = orbital_energies(ra, &b.h_a, &b.eri_a);
    let eps_b = orbital_energies(rb, &b.h_b, &b.eri_b);
    let (oa, ob) = (b.n_elec_a / 2, b.n_elec_b / 2);
    let mut oracle = 0.0;
    for i in 0..oa {
        for a in oa..b.n_orb_a {
            for j in 0..ob {
                for bb in ob..b.n_orb_b {
                    let v = b.v_inter[[i, a, j, bb]];
                    oracle -= 4.0 * v * v / (eps_a[a] - eps_a[i] + eps_b[bb] - eps_b[j]);
                }
            }
        }
    }
    oracle
}
