mod common;

use common::bare_e_op;
use ndarray::{Array2, Array4};
use proptest::prelude::*;
use sapt_vqe::bundle::{
    assemble_full_rdms, checksum_bytes, fold_core, read_bundle, to_natural_orbitals, write_bundle, ActiveSpaceSpec, IntegralBundle,
    Monomer,
};
use sapt_vqe::casci::solve_casci;
use sapt_vqe::error::Error;
use sapt_vqe::rdm::SpinSummedRDMs;
use sapt_vqe::sapt::electrostatics;
use sapt_vqe::synthetic::{h2_minimal, random_folded, synthetic_dimer, SyntheticSpec};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn apply_h(m: usize, e0: f64, h: &Array2<f64>, eri: &Array4<f64>, psi: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = psi.iter().map(|x| e0 * x).collect();
    let add = |out: &mut Vec<f64>, a: f64, v: &[f64]| out.iter_mut().zip(v).for_each(|(o, x)| *o += a * x);
    for p in 0..m {
        for q in 0..m {
            let eq = bare_e_op(m, p, q, psi);
            add(&mut out, h[[p, q]], &eq);
            for r in 0..m {
                for s in 0..m {
                    let v = 0.5 * eri[[r, s, p, q]];
                    add(&mut out, v, &bare_e_op(m, r, s, &eq));
                    if s == p {
                        add(&mut out, -v, &bare_e_op(m, r, q, psi));
                    }
                }
            }
        }
    }
    out
}

/// Lowest eigenpair of `H` over determinants with `core` doubly occupied and `virt` empty.
fn projected_fci(m: usize, n_elec: usize, core: &[usize], virt: &[usize], e0: f64, h: &Array2<f64>, eri: &Array4<f64>) -> (f64, Vec<f64>) {
    let basis: Vec<usize> = (0..1usize << (2 * m))
        .filter(|&i| {
            let (a, b) = (i & ((1 << m) - 1), i >> m);
            a.count_ones() as usize == n_elec / 2
                && b.count_ones() as usize == n_elec / 2
                && core.iter().all(|&c| a & (1 << c) != 0 && b & (1 << c) != 0)
                && virt.iter().all(|&v| a & (1 << v) == 0 && b & (1 << v) == 0)
        })
        .collect();
    let n = basis.len();
    let unit = |i: usize| {
        let mut v = vec![0.0; 1 << (2 * m)];
        v[basis[i]] = 1.0;
        v
    };
    let mut mat = nalgebra::DMatrix::zeros(n, n);
    for j in 0..n {
        let hv = apply_h(m, e0, h, eri, &unit(j));
        for i in 0..n {
            mat[(i, j)] = hv[basis[i]];
        }
    }
    let eig = nalgebra::SymmetricEigen::new(mat);
    let k = (0..n).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
    let mut psi = vec![0.0; 1 << (2 * m)];
    for i in 0..n {
        psi[basis[i]] = eig.eigenvectors[(i, k)];
    }
    (eig.eigenvalues[k], psi)
}

fn bare_rdms(m: usize, psi: &[f64]) -> SpinSummedRDMs {
    let e: Vec<Vec<Vec<f64>>> = (0..m).map(|p| (0..m).map(|q| bare_e_op(m, p, q, psi)).collect()).collect();
    let gamma = Array2::from_shape_fn((m, m), |(p, q)| dot(psi, &e[p][q]));
    let big = Array4::from_shape_fn((m, m, m, m), |(p, q, r, s)| {
        let v = dot(&bare_e_op(m, q, p, psi), &e[r][s]);
        if q == r {
            v - gamma[[p, s]]
        } else {
            v
        }
    });
    SpinSummedRDMs { gamma, big_gamma: big }
}

fn cored_bundle(seed: u64) -> IntegralBundle {
    let f = random_folded(5, seed);
    let mut b = IntegralBundle::from_monomers((f.h_tilde, f.eri_act, 4, f.e_core), h2_minimal());
    b.active_a = ActiveSpaceSpec::contiguous(1, 3, 5, 2);
    b.validate().unwrap();
    b
}

fn max_abs<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    common::max_diff(a, b)
}

#[test]
fn core_folding_matches_projected_full_space_ci() {
    for seed in [1, 2, 3] {
        let b = cored_bundle(seed);
        let (e_ref, psi) = projected_fci(5, 4, &[0], &[4], b.e_nuc_a, &b.h_a, &b.eri_a);
        let cas = solve_casci(&fold_core(&b, Monomer::A), 2, None).unwrap();
        assert!((cas.ground_energy() - e_ref).abs() < 1e-10, "seed {seed}");

        let full = assemble_full_rdms(&cas.ground_rdms, &b.active_a, 5).unwrap();
        let want = bare_rdms(5, &psi);
        assert!(max_abs(&full.gamma, &want.gamma) < 1e-10);
        assert!(max_abs(&full.big_gamma, &want.big_gamma) < 1e-10);
        assert!((full.energy(b.e_nuc_a, &b.h_a, &b.eri_a) - e_ref).abs() < 1e-10);
    }
}

#[test]
fn hf_energy_closed_form_and_determinant_rdms() {
    let b = cored_bundle(4);
    let (h, eri) = (&b.h_a, &b.eri_a);
    let mut e = b.e_nuc_a;
    for i in 0..2 {
        e += 2.0 * h[[i, i]];
        for j in 0..2 {
            e += 2.0 * eri[[i, i, j, j]] - eri[[i, j, j, i]];
        }
    }
    assert!((b.hf_energy(Monomer::A) - e).abs() < 1e-12);
    let det = SpinSummedRDMs::determinant(&[2.0, 2.0, 0.0, 0.0, 0.0]);
    assert!((det.energy(b.e_nuc_a, h, eri) - e).abs() < 1e-12);
    let (e_ref, _) = projected_fci(5, 4, &[0, 1], &[2, 3, 4], b.e_nuc_a, h, eri);
    assert!((e_ref - e).abs() < 1e-12);
}

#[test]
fn assemble_rejects_wrong_trace() {
    let b = cored_bundle(5);
    let bad = SpinSummedRDMs::determinant(&[2.0, 2.0, 0.0]);
    assert!(matches!(assemble_full_rdms(&bad, &b.active_a, 5), Err(Error::TraceMismatch { .. })));
}

#[test]
fn natural_orbital_rotation_preserves_observables() {
    let d = synthetic_dimer(&SyntheticSpec::chains(2, 1.5, 2, 1.4, 2.5).jittered(0.2, 7).with_mos(4, 3)).unwrap();
    let b = d.bundle;
    let fa = fold_core(&b, Monomer::A);
    let fb = fold_core(&b, Monomer::B);
    let ra = solve_casci(&fa, 2, None).unwrap().ground_rdms;
    let rb = solve_casci(&fb, 2, None).unwrap().ground_rdms;
    let e_a = ra.energy(b.e_nuc_a, &b.h_a, &b.eri_a);
    let elst = electrostatics(&ra.gamma, &rb.gamma, &b);

    let (ra2, b2, occ, c) = to_natural_orbitals(&ra, &b, Monomer::A).unwrap();
    b2.validate().unwrap();
    let ortho = c.t().dot(&c) - Array2::<f64>::eye(4);
    assert!(ortho.iter().all(|x| x.abs() < 1e-12));
    assert!(occ.windows(2).all(|w| w[0] >= w[1]));
    assert!((occ.iter().sum::<f64>() - 2.0).abs() < 1e-10);
    assert!((ra2.energy(b2.e_nuc_a, &b2.h_a, &b2.eri_a) - e_a).abs() < 1e-10);
    assert!((electrostatics(&ra2.gamma, &rb.gamma, &b2) - elst).abs() < 1e-10);

    let back = b2.rotate(Monomer::A, &c.t().to_owned());
    assert!(max_abs(&back.eri_abaa, &b.eri_abaa) < 1e-12);
    assert!(max_abs(&back.v_inter, &b.v_inter) < 1e-12);
    assert!(max_abs(&back.s_ab, &b.s_ab) < 1e-12);
}

#[test]
fn swapped_bundle_is_valid_and_symmetric_in_electrostatics() {
    let d = synthetic_dimer(&SyntheticSpec::chains(4, 1.5, 2, 1.4, 2.5).jittered(0.2, 3).with_mos(4, 3)).unwrap();
    let b = d.bundle;
    let s = b.swapped();
    s.validate().unwrap();
    let ga = SpinSummedRDMs::determinant(&[2.0, 1.5, 0.5, 0.0]).gamma;
    let gb = SpinSummedRDMs::determinant(&[1.8, 0.2, 0.0]).gamma;
    assert!((electrostatics(&ga, &gb, &b) - electrostatics(&gb, &ga, &s)).abs() < 1e-12);
}

#[test]
fn file_round_trip_and_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("b.bin");
    let b = cored_bundle(9);
    write_bundle(&b, &p).unwrap();
    assert_eq!(read_bundle(&p).unwrap(), b);
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(checksum_bytes(&bytes), checksum_bytes(&b.to_bytes()));
    assert_eq!(checksum_bytes(&bytes).len(), 64);
    let e = read_bundle(dir.path().join("none.bin")).unwrap_err();
    assert_eq!(e.exit_code(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bytes_round_trip_for_generated_dimers(seed in 0u64..10_000, big_a in any::<bool>(), n_core in 0usize..2) {
        let n_a = if big_a { 4 } else { 2 };
        let mut b = synthetic_dimer(&SyntheticSpec::chains(n_a, 1.5, 2, 1.4, 2.7).jittered(0.2, seed).with_mos(n_a, 3)).unwrap().bundle;
        let n_core = n_core.min(n_a / 2);
        b.active_a = ActiveSpaceSpec::contiguous(n_core, n_a - n_core, n_a, n_a - 2 * n_core);
        let bytes = b.to_bytes();
        let back = IntegralBundle::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &b);
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn truncated_or_corrupted_bytes_never_panic(cut in 0usize..4000, pos in 0usize..4000, byte in any::<u8>()) {
        let bytes = cored_bundle(1).to_bytes();
        if cut < bytes.len() {
            prop_assert!(IntegralBundle::from_bytes(&bytes[..cut]).is_err());
        }
        let mut bad = bytes.clone();
        let i = pos % bad.len();
        bad[i] = byte;
        if let Err(e) = IntegralBundle::from_bytes(&bad) {
            prop_assert_eq!(e.exit_code(), 2);
        }
    }
}
