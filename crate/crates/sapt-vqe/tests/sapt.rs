mod common;

use common::{casci, dimer_for, max_diff, prepare, rhf, rspt2, sapt0_dispersion};
use ndarray::{Array2, Array4};
use sapt_vqe::bundle::{transform4, IntegralBundle, Monomer};
use sapt_vqe::casci::{sos_second_order, spin_squared, CasciSolution};
use sapt_vqe::erpa::{build_uncoupled, solve_erpa};
use sapt_vqe::rdm::{transition_rdms, SpinSummedRDMs};
use sapt_vqe::sapt::*;
use sapt_vqe::synthetic::{synthetic_dimer, SyntheticDimer, SyntheticSpec, UnionIntegrals};

/// First-quantized amplitude list `(spin-orbital indices, coefficient)` of a
/// two-electron full-space vector; spin-orbital `k < m` is alpha orbital `k`.
fn first_quantized(psi: &[f64], m: usize, offset: usize) -> Vec<([(usize, usize); 2], f64)> {
    let mut out = Vec::new();
    for (st, &c) in psi.iter().enumerate() {
        if c.abs() < 1e-14 {
            continue;
        }
        let modes: Vec<usize> = (0..2 * m).filter(|k| st >> k & 1 == 1).collect();
        assert_eq!(modes.len(), 2);
        let so = |k: usize| (offset + k % m, k / m);
        let f = c / 2f64.sqrt();
        out.push(([so(modes[0]), so(modes[1])], f));
        out.push(([so(modes[1]), so(modes[0])], -f));
    }
    out
}

/// Union-orbital integrals of the kernel `v~(1,2) = 1/r12 + u_B(1)/N_B + u_A(2)/N_A + V0/(N_A N_B)`.
struct Kernel {
    s: Array2<f64>,
    vt: Array4<f64>,
}

fn kernel(u: &UnionIntegrals, na: f64, nb: f64) -> Kernel {
    let k = u.c_a.nrows();
    let (ma, mb) = (u.c_a.ncols(), u.c_b.ncols());
    let mut c = Array2::zeros((k, ma + mb));
    c.slice_mut(ndarray::s![.., ..ma]).assign(&u.c_a);
    c.slice_mut(ndarray::s![.., ma..]).assign(&u.c_b);
    let s = c.t().dot(&u.s).dot(&c);
    let va = c.t().dot(&u.v_a).dot(&c);
    let vb = c.t().dot(&u.v_b).dot(&c);
    let eri = transform4(&u.eri, [Some(&c), Some(&c), Some(&c), Some(&c)]);
    let vt = Array4::from_shape_fn(eri.dim(), |(a, b, g, h)| {
        eri[[a, b, g, h]] + vb[[a, b]] * s[[g, h]] / nb + s[[a, b]] * va[[g, h]] / na + u.v0 * s[[a, b]] * s[[g, h]] / (na * nb)
    });
    Kernel { s, vt }
}

struct Brute {
    /// `sum_ij <bra| v~(i,j) |ket>`
    coulomb: f64,
    /// `sum_ij sum_kl <bra| v~(i,j) P_kl |ket>`
    exchange: f64,
    /// `sum_kl <bra| P_kl |ket>`
    overlap: f64,
}

/// Matrix elements between products `Psi_A(1,2) Psi_B(3,4)` with electrons 1,2 on A.
fn brute(k: &Kernel, bra: [&[([(usize, usize); 2], f64)]; 2], ket: [&[([(usize, usize); 2], f64)]; 2]) -> Brute {
    let ov = |f: (usize, usize), g: (usize, usize)| if f.1 == g.1 { k.s[[f.0, g.0]] } else { 0.0 };
    let vt = |f: (usize, usize), g: (usize, usize), h: (usize, usize), l: (usize, usize)| {
        if f.1 == g.1 && h.1 == l.1 {
            k.vt[[f.0, g.0, h.0, l.0]]
        } else {
            0.0
        }
    };
    let perms: Vec<Option<(usize, usize)>> = std::iter::once(None).chain([(0, 2), (0, 3), (1, 2), (1, 3)].map(Some)).collect();
    let mut out = Brute { coulomb: 0.0, exchange: 0.0, overlap: 0.0 };
    for (fa, ca) in bra[0] {
        for (fb, cb) in bra[1] {
            let f = [fa[0], fa[1], fb[0], fb[1]];
            for (ga, da) in ket[0] {
                for (gb, db) in ket[1] {
                    let w = ca * cb * da * db;
                    for perm in &perms {
                        let mut g = [ga[0], ga[1], gb[0], gb[1]];
                        if let Some((x, y)) = *perm {
                            g.swap(x, y);
                        }
                        let ovs: Vec<f64> = (0..4).map(|n| ov(f[n], g[n])).collect();
                        let mut op = 0.0;
                        for i in 0..2 {
                            for j in 2..4 {
                                let rest: f64 = (0..4).filter(|&n| n != i && n != j).map(|n| ovs[n]).product();
                                op += rest * vt(f[i], g[i], f[j], g[j]);
                            }
                        }
                        match perm {
                            None => out.coulomb += w * op,
                            Some(_) => {
                                out.exchange += w * op;
                                out.overlap += w * ovs.iter().product::<f64>();
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn two_electron_dimer(seed: u64, mos: (usize, usize)) -> SyntheticDimer {
    synthetic_dimer(&SyntheticSpec::chains(2, 1.4, 2, 1.5, 2.6).jittered(0.2, seed).with_mos(mos.0, mos.1)).unwrap()
}

fn singlets(c: &CasciSolution) -> Vec<(usize, Vec<f64>)> {
    (0..c.energies.len())
        .filter_map(|k| {
            let v = c.state(k).unwrap();
            (spin_squared(&v, c.m_act) < 1e-8).then_some((k, v))
        })
        .collect()
}

#[test]
fn exchange_functional_matches_first_quantized_oracle() {
    for (seed, mos) in [(1u64, (2, 2)), (2, (3, 2)), (3, (2, 3))] {
        let d = two_electron_dimer(seed, mos);
        let b = &d.bundle;
        let (ma, mb) = (b.n_orb_a, b.n_orb_b);
        let (ca, cb) = (casci(b, Monomer::A), casci(b, Monomer::B));
        let ops = InterMonomerOperators::new(b, &ca.ground_rdms, &cb.ground_rdms).unwrap();
        let k = kernel(&d.union, 2.0, 2.0);
        let (sa, sb) = (singlets(&ca), singlets(&cb));
        assert!(sa.len() > 1 && sb.len() > 1);
        let fq_a: Vec<_> = sa.iter().map(|(_, v)| first_quantized(v, ma, 0)).collect();
        let fq_b: Vec<_> = sb.iter().map(|(_, v)| first_quantized(v, mb, ma)).collect();

        let g = brute(&k, [&fq_a[0], &fq_b[0]], [&fq_a[0], &fq_b[0]]);
        assert!((g.coulomb - ops.e_pol1).abs() < 1e-10, "elst {} vs {}", g.coulomb, ops.e_pol1);
        assert!((-g.overlap - ops.p_bar).abs() < 1e-10, "P_bar {} vs {}", -g.overlap, ops.p_bar);
        assert!(ops.p_bar < 0.0);
        let e_pol1 = g.coulomb;
        let f_oracle = |x: &Brute| -x.exchange + e_pol1 * x.overlap;
        assert!((exchange_s2(&ops) - f_oracle(&g)).abs() < 1e-10, "exch {} vs {}", exchange_s2(&ops), f_oracle(&g));

        let rdm = |bra: &[f64], ket: &[f64], m: usize| transition_rdms(bra, ket, m);
        for (mu, (_, va)) in sa.iter().enumerate() {
            for (nu, (_, vb)) in sb.iter().enumerate() {
                if mu == 0 && nu == 0 {
                    continue;
                }
                let x = brute(&k, [&fq_a[0], &fq_b[0]], [&fq_a[mu], &fq_b[nu]]);
                let ta = rdm(&sa[0].1, va, ma);
                let tb = rdm(&sb[0].1, vb, mb);
                let f = exchange_functional(&ops, (&ta.gamma, &ta.big_gamma), (&tb.gamma, &tb.big_gamma));
                assert!((f - f_oracle(&x)).abs() < 1e-10, "F^({mu},{nu}) {f} vs {}", f_oracle(&x));
                // <00|V|mu nu> through Omega and v
                let t = if nu == 0 {
                    ta.gamma.iter().zip(ops.omega_b_on_a.iter()).map(|(a, b)| a * b).sum::<f64>()
                } else if mu == 0 {
                    tb.gamma.iter().zip(ops.omega_a_on_b.iter()).map(|(a, b)| a * b).sum::<f64>()
                } else {
                    sapt_vqe::linalg::contract("pq,pqrs,rs->", &[&ta.gamma.clone().into_dyn(), &b.v_inter.clone().into_dyn(), &tb.gamma.clone().into_dyn()])
                        .unwrap()
                        .sum()
                };
                assert!((t - x.coulomb).abs() < 1e-10, "t^({mu},{nu}) {t} vs {}", x.coulomb);
            }
        }
    }
}

#[test]
fn dense_and_contracted_exchange_agree() {
    let cases = [((2, 2), (2, 2)), ((2, 2), (3, 3)), ((4, 2), (4, 3)), ((2, 4), (3, 5))];
    for (i, (chains, mos)) in cases.into_iter().enumerate() {
        let p = prepare(&dimer_for(40 + i as u64, chains, mos), false);
        let ops = InterMonomerOperators::new(&p.bundle, &p.ra, &p.rb).unwrap();
        let sw = InterMonomerOperators::new(&p.bundle.swapped(), &p.rb, &p.ra).unwrap();
        for (o, e) in [(&ops, &p.ea), (&sw, &p.eb)] {
            let c = exchange_induction_functionals(o, e);
            let dn = dense_exchange_induction_functionals(o, e).unwrap();
            assert!(max_diff(&c, &dn) < 1e-9, "F^mu {c:?} vs {dn:?}");
        }
        let c = exchange_dispersion_functionals(&ops, &p.ea, &p.eb);
        let dn = dense_exchange_dispersion_functionals(&ops, &p.ea, &p.eb).unwrap();
        assert!(max_diff(&c, &dn) < 1e-9, "F^mu nu {c:?} vs {dn:?}");
        assert!(c.iter().any(|x| x.abs() > 1e-6));
    }
}

/// With an inversion-symmetric two-orbital monomer the ERPA excitation operator
/// reproduces the exact singlet excitation, so transition 2-RDMs and `F^mu` are exact.
#[test]
fn symmetric_two_orbital_erpa_is_exact() {
    let mut d = dimer_for(7, (2, 2), (2, 2));
    let (h, eri, _, e_nuc) = sapt_vqe::synthetic::h2_minimal();
    (d.h_a, d.eri_a, d.e_nuc_a) = (h, eri, e_nuc);
    let p = prepare(&d, false);
    let ops = InterMonomerOperators::new(&p.bundle, &p.ra, &p.rb).unwrap();
    let c = casci(&p.bundle, Monomer::A);
    let ground = c.state(0).unwrap();
    assert_eq!(p.ea.n_modes(), 1);
    let dense = p.ea.dense_transition_tpdm(0, &p.ra.big_gamma).unwrap();
    let g = p.ea.transition_gamma(0).gamma;
    let mut found = false;
    for k in 1..c.energies.len() {
        let t = transition_rdms(&ground, &c.state(k).unwrap(), 2);
        if t.gamma[[0, 1]].abs() + t.gamma[[1, 0]].abs() < 1e-8 {
            continue;
        }
        assert!(!found);
        found = true;
        let sign = if (t.gamma[[0, 1]] * g[[0, 1]] + t.gamma[[1, 0]] * g[[1, 0]]) < 0.0 { -1.0 } else { 1.0 };
        assert!(max_diff(&(&t.gamma * sign), &g) < 1e-8);
        assert!(max_diff(&(&t.big_gamma * sign), &dense) < 1e-8);
        let exact = sign * exchange_functional(&ops, (&t.gamma, &t.big_gamma), (&p.rb.gamma, &p.rb.big_gamma));
        let f = exchange_induction_functionals(&ops, &p.ea)[0];
        assert!((f - exact).abs() < 1e-8, "{f} vs {exact}");
    }
    assert!(found);
}

#[test]
fn swapping_monomers_leaves_components_unchanged() {
    for (i, (chains, mos)) in [((2, 2), (3, 2)), ((4, 2), (4, 3))].into_iter().enumerate() {
        let d = dimer_for(60 + i as u64, chains, mos);
        let p = prepare(&d, false);
        let (t, _) = compute_sapt(&p.bundle, &p.ra, &p.rb, &p.ea, &p.eb, false).unwrap();
        let (s, _) = compute_sapt(&p.bundle.swapped(), &p.rb, &p.ra, &p.eb, &p.ea, false).unwrap();
        for (a, b) in [
            (t.elst, s.elst),
            (t.exch, s.exch),
            (t.ind_u, s.ind_u),
            (t.exch_ind_u, s.exch_ind_u),
            (t.disp, s.disp),
            (t.exch_disp, s.exch_disp),
        ] {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(t.ind_u <= 0.0 && t.disp <= 0.0);
        assert!(t.exch > 0.0);
    }
}

#[test]
fn uncoupled_hf_dispersion_matches_orbital_energy_formula() {
    for seed in 0..4u64 {
        let b = dimer_for(80 + seed, (4, 2), (5, 4));
        let (ra, rb) = rhf(&b);
        let ea = solve_erpa(&build_uncoupled(&ra, &b.h_a, &b.eri_a).unwrap(), 1e-5).unwrap();
        let eb = solve_erpa(&build_uncoupled(&rb, &b.h_b, &b.eri_b).unwrap(), 1e-5).unwrap();
        let ops = InterMonomerOperators::new(&b, &ra, &rb).unwrap();
        let (e_disp, _) = dispersion(&ea, &eb, &ops).unwrap();
        let oracle = sapt0_dispersion(&b, &ra, &rb);
        assert!((e_disp - oracle).abs() < 1e-9, "{e_disp} vs {oracle}");
    }
}

#[test]
fn casci_sum_over_states_matches_product_space_perturbation_theory() {
    for (seed, chains, mos) in [(90u64, (2, 2), (3, 3)), (91, (4, 2), (4, 3))] {
        let b = dimer_for(seed, chains, mos);
        let (ca, cb) = (casci(&b, Monomer::A), casci(&b, Monomer::B));
        let ops = InterMonomerOperators::new(&b, &ca.ground_rdms, &cb.ground_rdms).unwrap();
        let ga = ca.transition_gammas(&b.active_a, b.n_orb_a).unwrap();
        let gb = cb.transition_gammas(&b.active_b, b.n_orb_b).unwrap();
        let (ind, disp) = sos_second_order(
            (&ga, &ca.excitation_energies()),
            (&gb, &cb.excitation_energies()),
            &ops.omega_b_on_a,
            &ops.omega_a_on_b,
            &b.v_inter,
        )
        .unwrap();
        let (ind_o, disp_o) = rspt2(&b, &ca, &cb);
        assert!((ind - ind_o).abs() < 1e-10, "{ind} vs {ind_o}");
        assert!((disp - disp_o).abs() < 1e-10, "{disp} vs {disp_o}");
    }
}

#[test]
fn decoupled_dimer_has_no_interaction() {
    let mut b = dimer_for(5, (2, 2), (3, 3));
    b.s_ab.fill(0.0);
    b.v_inter.fill(0.0);
    b.u_b_on_a.fill(0.0);
    b.u_a_on_b.fill(0.0);
    b.u_a_cross.fill(0.0);
    b.u_b_cross.fill(0.0);
    b.eri_abab.fill(0.0);
    b.eri_abbb.fill(0.0);
    b.eri_abaa.fill(0.0);
    b.v_nuc_ab = 0.0;
    let p = prepare(&b, false);
    let (t, diag) = compute_sapt(&p.bundle, &p.ra, &p.rb, &p.ea, &p.eb, true).unwrap();
    for x in [t.elst, t.exch, t.ind_u, t.exch_ind_u, t.disp, t.exch_disp, t.total()] {
        assert_eq!(x, 0.0);
    }
    assert_eq!(diag.p_bar, 0.0);
    let report = assemble_report(t, diag, serde_json::json!({}));
    assert_eq!(report.total.kcal_mol, 0.0);
}

#[test]
fn point_charge_electrostatics() {
    // one orbital per monomer, two electrons each, point-like densities at distance r
    let r = 3.0;
    let mut b = IntegralBundle::from_monomers(
        (ndarray::array![[-1.0]], Array4::from_elem((1, 1, 1, 1), 0.7), 2, 0.0),
        (ndarray::array![[-0.9]], Array4::from_elem((1, 1, 1, 1), 0.6), 2, 0.0),
    );
    let (za, zb) = (2.0, 2.0);
    b.v_inter[[0, 0, 0, 0]] = 1.0 / r;
    b.u_b_on_a[[0, 0]] = -zb / r;
    b.u_a_on_b[[0, 0]] = -za / r;
    b.v_nuc_ab = za * zb / r;
    let g = ndarray::array![[2.0]];
    let classical = (za - 2.0) * (zb - 2.0) / r;
    assert!((electrostatics(&g, &g, &b) - classical).abs() < 1e-14);
    let g1 = ndarray::array![[1.0]];
    // net charges +1 and +1
    assert!((electrostatics(&g1, &g1, &b) - 1.0 / r).abs() < 1e-14);
}

#[test]
fn report_total_and_units() {
    let t = SaptTerms { elst: -0.01, exch: 0.012, ind_u: -0.003, exch_ind_u: 0.002, disp: -0.001, exch_disp: 0.0002 };
    let diag = Diagnostics::default();
    let r = assemble_report(t, diag, serde_json::json!({"seed": 1}));
    assert_eq!(r.total.hartree, t.elst + t.exch + t.ind_u + t.exch_ind_u + t.disp + t.exch_disp);
    assert_eq!(r.exch.kcal_mol, 0.012 * 627.509474);
    let js = serde_json::to_value(&r).unwrap();
    for key in ["elst", "exch", "ind_u", "exch_ind_u", "disp", "exch_disp", "total", "units", "diagnostics", "provenance"] {
        assert!(js.get(key).is_some(), "{key}");
    }
    let back: SaptReport = serde_json::from_value(js).unwrap();
    assert_eq!(back, r);
}

#[test]
fn gamma_b_zero_gives_zero_exchange() {
    let d = dimer_for(3, (2, 2), (2, 2));
    let ca = casci(&d, Monomer::A);
    let empty = SpinSummedRDMs { gamma: Array2::zeros((2, 2)), big_gamma: Array4::zeros((2, 2, 2, 2)) };
    let mut b = d.clone();
    b.n_elec_b = 0;
    let ops = InterMonomerOperators::new(&b, &ca.ground_rdms, &empty).unwrap();
    assert_eq!(exchange_s2(&ops), 0.0);
}
