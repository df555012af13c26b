use sapt_vqe::synthetic::{synthetic_dimer, SyntheticSpec};
use sapt_vqe_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn dimer_bytes() -> Vec<u8> {
    synthetic_dimer(&SyntheticSpec::chains(2, 1.5, 2, 1.4, 3.0).jittered(0.1, 4).with_mos(3, 3)).unwrap().bundle.to_bytes()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sapt_last_error()) }.to_str().unwrap().to_owned()
}

fn load(bytes: &[u8]) -> *mut SaptBundle {
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { sapt_bundle_from_bytes(bytes.as_ptr(), bytes.len(), &mut b) }, SaptStatus::Ok);
    assert!(!b.is_null());
    b
}

#[test]
fn run_through_handles_matches_the_rust_api() {
    let bytes = dimer_bytes();
    let b = load(&bytes);
    let mut dims = SaptBundleDims::default();
    assert_eq!(unsafe { sapt_bundle_dims(b, &mut dims) }, SaptStatus::Ok);
    assert_eq!((dims.n_orb_a, dims.n_orb_b, dims.n_elec_a, dims.n_elec_b), (3, 3, 2, 2));

    let cfg = CString::new(r#"{"monomer_method_A": "casci", "monomer_method_B": "hf"}"#).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { sapt_run(b, cfg.as_ptr(), &mut r) }, SaptStatus::Ok, "{}", last_error());

    let json = unsafe { sapt_report_json(r) };
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { sapt_string_free(json) };
    let js: serde_json::Value = serde_json::from_str(&text).unwrap();

    let mut sum = 0.0;
    for (term, key) in [
        (SaptTerm::Elst, "elst"),
        (SaptTerm::Exch, "exch"),
        (SaptTerm::IndU, "ind_u"),
        (SaptTerm::ExchIndU, "exch_ind_u"),
        (SaptTerm::Disp, "disp"),
        (SaptTerm::ExchDisp, "exch_disp"),
    ] {
        let mut e = f64::NAN;
        assert_eq!(unsafe { sapt_report_energy(r, term, &mut e) }, SaptStatus::Ok);
        assert_eq!(e, js[key]["hartree"].as_f64().unwrap());
        sum += e;
    }
    let mut total = 0.0;
    unsafe { sapt_report_energy(r, SaptTerm::Total, &mut total) };
    assert!((total - sum).abs() < 1e-14);

    let bundle = sapt_vqe::bundle::IntegralBundle::from_bytes(&bytes).unwrap();
    let direct = sapt_vqe::pipeline::RunConfig::from_json(cfg.to_str().unwrap()).unwrap();
    let want = sapt_vqe::pipeline::run_bundle(&bundle, &direct, &sapt_vqe::bundle::checksum_bytes(&bytes)).unwrap();
    assert_eq!(want.total.hartree, total);
    assert_eq!(js["provenance"]["bundle_checksum"], want.provenance["bundle_checksum"]);

    unsafe {
        sapt_report_free(r);
        sapt_bundle_free(b);
    }
}

#[test]
fn error_codes_and_messages() {
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { sapt_bundle_from_bytes(b"junk".as_ptr(), 4, &mut b) }, SaptStatus::Validation);
    assert!(b.is_null());
    assert!(!last_error().is_empty());

    let missing = CString::new("/nonexistent/dimer.bin").unwrap();
    assert_eq!(unsafe { sapt_bundle_read(missing.as_ptr(), &mut b) }, SaptStatus::Io);
    assert_eq!(unsafe { sapt_bundle_read(ptr::null(), &mut b) }, SaptStatus::NullPointer);
    assert_eq!(unsafe { sapt_bundle_read(missing.as_ptr(), ptr::null_mut()) }, SaptStatus::NullPointer);
    assert!(last_error().contains("out"));

    let bad = [0x66u8, 0xff, 0];
    assert_eq!(unsafe { sapt_bundle_read(bad.as_ptr().cast(), &mut b) }, SaptStatus::InvalidUtf8);

    let h = load(&dimer_bytes());
    let mut r = ptr::null_mut();
    let cfg = CString::new(r#"{"ortho_threshold": 0.0}"#).unwrap();
    assert_eq!(unsafe { sapt_run(h, cfg.as_ptr(), &mut r) }, SaptStatus::Validation);
    let cfg = CString::new(r#"{"bogus": 1}"#).unwrap();
    assert_eq!(unsafe { sapt_run(h, cfg.as_ptr(), &mut r) }, SaptStatus::Validation);
    assert!(r.is_null());
    assert_eq!(unsafe { sapt_run(ptr::null(), ptr::null(), &mut r) }, SaptStatus::NullPointer);
    assert!(unsafe { sapt_report_json(ptr::null()) }.is_null());
    let mut e = 0.0;
    assert_eq!(unsafe { sapt_report_energy(ptr::null(), SaptTerm::Total, &mut e) }, SaptStatus::NullPointer);

    unsafe {
        sapt_bundle_free(h);
        sapt_bundle_free(ptr::null_mut());
        sapt_report_free(ptr::null_mut());
        sapt_string_free(ptr::null_mut());
    }
}

#[test]
fn file_handle_and_resources() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.bin");
    std::fs::write(&p, dimer_bytes()).unwrap();
    let c = CString::new(p.to_str().unwrap()).unwrap();
    let mut b = ptr::null_mut();
    assert_eq!(unsafe { sapt_bundle_read(c.as_ptr(), &mut b) }, SaptStatus::Ok);
    unsafe { sapt_bundle_free(b) };

    let mut rc = SaptResources::default();
    assert_eq!(unsafe { sapt_resource_count(6, 3, &mut rc) }, SaptStatus::Ok);
    assert_eq!((rc.n_qubits, rc.n_params), (12, 105));
    assert_eq!(unsafe { sapt_resource_count(0, 3, &mut rc) }, SaptStatus::Validation);

    let v = unsafe { CStr::from_ptr(sapt_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/sapt_vqe.h")).unwrap();
    for sym in [
        "sapt_bundle_read",
        "sapt_bundle_from_bytes",
        "sapt_bundle_dims",
        "sapt_bundle_free",
        "sapt_run",
        "sapt_report_energy",
        "sapt_report_json",
        "sapt_report_free",
        "sapt_string_free",
        "sapt_resource_count",
        "sapt_last_error",
        "sapt_version",
        "typedef struct SaptBundle SaptBundle",
        "typedef struct SaptReport SaptReport",
        "SAPT_STATUS_NUMERICAL = 3",
    ] {
        assert!(h.contains(sym), "missing {sym}");
    }
}
