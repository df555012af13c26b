//! Integral bundle: MO-basis integrals of a dimer in a dimer-centred basis,
//! its on-disk format, core folding, full-space RDM assembly and natural orbitals.
//!
//! File layout: 8-byte magic `SAPTBNDL`, little-endian `u64` header length,
//! JSON header, then little-endian `f64` tensor payloads in header order, each
//! starting on a 64-byte boundary of the file.

use crate::error::{Error, Result};
use crate::linalg::{contract, sym_eig};
use crate::rdm::{mean_field_tpdm, SpinSummedRDMs};
use ndarray::{Array2, Array4, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const FORMAT_VERSION: &str = "sapt-bundle/1";
const MAGIC: &[u8; 8] = b"SAPTBNDL";
const ALIGN: usize = 64;
const SYM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monomer {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSpaceSpec {
    pub core: Vec<usize>,
    pub active: Vec<usize>,
    #[serde(rename = "virtual")]
    pub virtual_: Vec<usize>,
    pub n_act_elec: usize,
}

impl ActiveSpaceSpec {
    /// Everything active.
    pub fn full(n_orb: usize, n_elec: usize) -> ActiveSpaceSpec {
        ActiveSpaceSpec { core: vec![], active: (0..n_orb).collect(), virtual_: vec![], n_act_elec: n_elec }
    }

    /// Contiguous core, active and virtual ranges.
    pub fn contiguous(n_core: usize, n_active: usize, n_orb: usize, n_act_elec: usize) -> ActiveSpaceSpec {
        ActiveSpaceSpec {
            core: (0..n_core).collect(),
            active: (n_core..n_core + n_active).collect(),
            virtual_: (n_core + n_active..n_orb).collect(),
            n_act_elec,
        }
    }

    pub fn validate(&self, n_orb: usize, n_elec: usize, field: &str) -> Result<()> {
        let fail = |reason: String| Err(Error::FormatError { field: field.to_string(), reason });
        let mut seen = vec![false; n_orb];
        for &i in self.core.iter().chain(&self.active).chain(&self.virtual_) {
            if i >= n_orb {
                return fail(format!("orbital index {i} out of range"));
            }
            if seen[i] {
                return fail(format!("orbital index {i} listed twice"));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return fail("core/active/virtual lists do not cover every orbital".into());
        }
        if self.n_act_elec % 2 != 0 {
            return fail("odd number of active electrons".into());
        }
        if self.n_act_elec > 2 * self.active.len() {
            return fail("more active electrons than active spin orbitals".into());
        }
        if 2 * self.core.len() + self.n_act_elec != n_elec {
            return fail(format!("2*core + active electrons != {n_elec}"));
        }
        Ok(())
    }
}

/// Integrals over orthonormal monomer MOs. Cross-monomer quantities use
/// lower-case first indices for A orbitals and upper-case for B orbitals.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralBundle {
    pub n_orb_a: usize,
    pub n_orb_b: usize,
    pub n_elec_a: usize,
    pub n_elec_b: usize,
    pub e_nuc_a: f64,
    pub e_nuc_b: f64,
    pub v_nuc_ab: f64,
    pub h_a: Array2<f64>,
    pub h_b: Array2<f64>,
    pub eri_a: Array4<f64>,
    pub eri_b: Array4<f64>,
    /// `<a|P>`
    pub s_ab: Array2<f64>,
    /// `(ab|PQ)`
    pub v_inter: Array4<f64>,
    /// `<a|v_B|b>`
    pub u_b_on_a: Array2<f64>,
    /// `<P|v_A|Q>`
    pub u_a_on_b: Array2<f64>,
    /// `<a|v_A|P>`
    pub u_a_cross: Array2<f64>,
    /// `<a|v_B|P>`
    pub u_b_cross: Array2<f64>,
    /// `(aP|bQ)`
    pub eri_abab: Array4<f64>,
    /// `(aP|QR)`
    pub eri_abbb: Array4<f64>,
    /// `(aP|bc)`
    pub eri_abaa: Array4<f64>,
    pub active_a: ActiveSpaceSpec,
    pub active_b: ActiveSpaceSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldedActiveHamiltonian {
    pub h_tilde: Array2<f64>,
    pub eri_act: Array4<f64>,
    pub e_core: f64,
}

impl FoldedActiveHamiltonian {
    pub fn n_act(&self) -> usize {
        self.h_tilde.nrows()
    }
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    #[serde(rename = "n_orb_A")]
    n_orb_a: usize,
    #[serde(rename = "n_orb_B")]
    n_orb_b: usize,
    #[serde(rename = "n_elec_A")]
    n_elec_a: usize,
    #[serde(rename = "n_elec_B")]
    n_elec_b: usize,
    #[serde(rename = "e_nuc_A")]
    e_nuc_a: f64,
    #[serde(rename = "e_nuc_B")]
    e_nuc_b: f64,
    #[serde(rename = "v_nuc_AB")]
    v_nuc_ab: f64,
    #[serde(rename = "active_A")]
    active_a: ActiveSpaceSpec,
    #[serde(rename = "active_B")]
    active_b: ActiveSpaceSpec,
    tensors: Vec<TensorEntry>,
}

const TENSOR_NAMES: [&str; 15] = [
    "h_A", "h_B", "eri_A", "eri_B", "S_AB", "v_inter", "u_B_on_A", "u_A_on_B", "u_A_cross", "u_B_cross",
    "eri_ABAB", "eri_ABBB", "eri_ABAA", "", "",
];

fn names() -> impl Iterator<Item = &'static str> {
    TENSOR_NAMES.iter().copied().filter(|s| !s.is_empty())
}

fn align(x: usize) -> usize {
    x.div_ceil(ALIGN) * ALIGN
}

fn fmt_err(field: &str, reason: impl Into<String>) -> Error {
    Error::FormatError { field: field.to_string(), reason: reason.into() }
}

impl IntegralBundle {
    fn tensor(&self, name: &str) -> ArrayD<f64> {
        match name {
            "h_A" => self.h_a.clone().into_dyn(),
            "h_B" => self.h_b.clone().into_dyn(),
            "eri_A" => self.eri_a.clone().into_dyn(),
            "eri_B" => self.eri_b.clone().into_dyn(),
            "S_AB" => self.s_ab.clone().into_dyn(),
            "v_inter" => self.v_inter.clone().into_dyn(),
            "u_B_on_A" => self.u_b_on_a.clone().into_dyn(),
            "u_A_on_B" => self.u_a_on_b.clone().into_dyn(),
            "u_A_cross" => self.u_a_cross.clone().into_dyn(),
            "u_B_cross" => self.u_b_cross.clone().into_dyn(),
            "eri_ABAB" => self.eri_abab.clone().into_dyn(),
            "eri_ABBB" => self.eri_abbb.clone().into_dyn(),
            "eri_ABAA" => self.eri_abaa.clone().into_dyn(),
            _ => unreachable!("unknown tensor {name}"),
        }
    }

    fn expected_shape(&self, name: &str) -> Vec<usize> {
        let (a, b) = (self.n_orb_a, self.n_orb_b);
        match name {
            "h_A" | "u_B_on_A" => vec![a, a],
            "h_B" | "u_A_on_B" => vec![b, b],
            "eri_A" => vec![a, a, a, a],
            "eri_B" => vec![b, b, b, b],
            "S_AB" | "u_A_cross" | "u_B_cross" => vec![a, b],
            "v_inter" => vec![a, a, b, b],
            "eri_ABAB" => vec![a, b, a, b],
            "eri_ABBB" => vec![a, b, b, b],
            "eri_ABAA" => vec![a, b, a, a],
            _ => unreachable!(),
        }
    }

    /// Zero-coupling dimer skeleton with the given monomer Hamiltonians.
    pub fn from_monomers(
        (h_a, eri_a, n_elec_a, e_nuc_a): (Array2<f64>, Array4<f64>, usize, f64),
        (h_b, eri_b, n_elec_b, e_nuc_b): (Array2<f64>, Array4<f64>, usize, f64),
    ) -> IntegralBundle {
        let (a, b) = (h_a.nrows(), h_b.nrows());
        IntegralBundle {
            n_orb_a: a,
            n_orb_b: b,
            n_elec_a,
            n_elec_b,
            e_nuc_a,
            e_nuc_b,
            v_nuc_ab: 0.0,
            h_a,
            h_b,
            eri_a,
            eri_b,
            s_ab: Array2::zeros((a, b)),
            v_inter: Array4::zeros((a, a, b, b)),
            u_b_on_a: Array2::zeros((a, a)),
            u_a_on_b: Array2::zeros((b, b)),
            u_a_cross: Array2::zeros((a, b)),
            u_b_cross: Array2::zeros((a, b)),
            eri_abab: Array4::zeros((a, b, a, b)),
            eri_abbb: Array4::zeros((a, b, b, b)),
            eri_abaa: Array4::zeros((a, b, a, a)),
            active_a: ActiveSpaceSpec::full(a, n_elec_a),
            active_b: ActiveSpaceSpec::full(b, n_elec_b),
        }
    }

    pub fn n_orb(&self, m: Monomer) -> usize {
        match m {
            Monomer::A => self.n_orb_a,
            Monomer::B => self.n_orb_b,
        }
    }

    pub fn n_elec(&self, m: Monomer) -> usize {
        match m {
            Monomer::A => self.n_elec_a,
            Monomer::B => self.n_elec_b,
        }
    }

    pub fn e_nuc(&self, m: Monomer) -> f64 {
        match m {
            Monomer::A => self.e_nuc_a,
            Monomer::B => self.e_nuc_b,
        }
    }

    pub fn h(&self, m: Monomer) -> &Array2<f64> {
        match m {
            Monomer::A => &self.h_a,
            Monomer::B => &self.h_b,
        }
    }

    pub fn eri(&self, m: Monomer) -> &Array4<f64> {
        match m {
            Monomer::A => &self.eri_a,
            Monomer::B => &self.eri_b,
        }
    }

    pub fn active(&self, m: Monomer) -> &ActiveSpaceSpec {
        match m {
            Monomer::A => &self.active_a,
            Monomer::B => &self.active_b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for name in names() {
            let t = self.tensor(name);
            if t.shape() != self.expected_shape(name).as_slice() {
                return Err(fmt_err(name, format!("shape {:?}, expected {:?}", t.shape(), self.expected_shape(name))));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(fmt_err(name, "non-finite entry"));
            }
        }
        for (n, name) in [(self.n_elec_a, "n_elec_A"), (self.n_elec_b, "n_elec_B")] {
            if n % 2 != 0 {
                return Err(fmt_err(name, "odd electron count (closed-shell singlets only)"));
            }
        }
        for (name, m) in [("h_A", &self.h_a), ("h_B", &self.h_b), ("u_B_on_A", &self.u_b_on_a), ("u_A_on_B", &self.u_a_on_b)] {
            let d = crate::linalg::max_asymmetry(m);
            if d > SYM_TOL {
                return Err(Error::SymmetryViolation { tensor: name.into(), max_dev: d });
            }
        }
        for (name, t) in [("eri_A", &self.eri_a), ("eri_B", &self.eri_b)] {
            let d = eri_symmetry_error(t);
            if d > SYM_TOL {
                return Err(Error::SymmetryViolation { tensor: name.into(), max_dev: d });
            }
        }
        let perms: [(&str, &Array4<f64>, &[[usize; 4]]); 4] = [
            ("v_inter", &self.v_inter, &[[1, 0, 2, 3], [0, 1, 3, 2]]),
            ("eri_ABAB", &self.eri_abab, &[[2, 3, 0, 1]]),
            ("eri_ABBB", &self.eri_abbb, &[[0, 1, 3, 2]]),
            ("eri_ABAA", &self.eri_abaa, &[[0, 1, 3, 2]]),
        ];
        for (name, t, ps) in perms {
            for p in ps {
                let d = perm_error(t, *p);
                if d > SYM_TOL {
                    return Err(Error::SymmetryViolation { tensor: name.into(), max_dev: d });
                }
            }
        }
        self.active_a.validate(self.n_orb_a, self.n_elec_a, "active_A")?;
        self.active_b.validate(self.n_orb_b, self.n_elec_b, "active_B")?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut entries = Vec::new();
        let mut offset = 0usize;
        for name in names() {
            let shape = self.expected_shape(name);
            let len: usize = shape.iter().product::<usize>() * 8;
            entries.push(TensorEntry { name: name.to_string(), shape, offset });
            offset = align(offset + len);
        }
        let header = Header {
            format: FORMAT_VERSION.to_string(),
            n_orb_a: self.n_orb_a,
            n_orb_b: self.n_orb_b,
            n_elec_a: self.n_elec_a,
            n_elec_b: self.n_elec_b,
            e_nuc_a: self.e_nuc_a,
            e_nuc_b: self.e_nuc_b,
            v_nuc_ab: self.v_nuc_ab,
            active_a: self.active_a.clone(),
            active_b: self.active_b.clone(),
            tensors: entries,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let data_start = align(16 + json.len());
        let mut out = Vec::with_capacity(data_start + offset);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (name, e) in names().zip(&header.tensors) {
            out.resize(data_start + e.offset, 0);
            let t = self.tensor(name);
            for x in t.as_standard_layout().iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out.resize(data_start + offset, 0);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<IntegralBundle> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(fmt_err("magic", "not a sapt bundle"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        if hlen > (bytes.len() - 16) as u64 {
            return Err(fmt_err("header", "truncated"));
        }
        let hlen = hlen as usize;
        let header: Header =
            serde_json::from_slice(&bytes[16..16 + hlen]).map_err(|e| fmt_err("header", e.to_string()))?;
        if header.format != FORMAT_VERSION {
            return Err(fmt_err("format", format!("unsupported version `{}`", header.format)));
        }
        let data_start = align(16 + hlen);
        let payload = payload_len(header.n_orb_a, header.n_orb_b);
        if payload.is_none_or(|n| n > bytes.len().saturating_sub(data_start)) {
            return Err(fmt_err("header", "orbital counts exceed the payload size"));
        }
        let mut b = IntegralBundle::from_monomers(
            (Array2::zeros((header.n_orb_a, header.n_orb_a)), Array4::zeros((header.n_orb_a, header.n_orb_a, header.n_orb_a, header.n_orb_a)), header.n_elec_a, header.e_nuc_a),
            (Array2::zeros((header.n_orb_b, header.n_orb_b)), Array4::zeros((header.n_orb_b, header.n_orb_b, header.n_orb_b, header.n_orb_b)), header.n_elec_b, header.e_nuc_b),
        );
        b.v_nuc_ab = header.v_nuc_ab;
        b.active_a = header.active_a;
        b.active_b = header.active_b;
        let mut found = Vec::new();
        for e in &header.tensors {
            if !names().any(|n| n == e.name) {
                return Err(fmt_err(&e.name, "unknown tensor"));
            }
            if found.contains(&e.name) {
                return Err(fmt_err(&e.name, "duplicate tensor"));
            }
            let expected = b.expected_shape(&e.name);
            if e.shape != expected {
                return Err(fmt_err(&e.name, format!("shape {:?}, expected {:?}", e.shape, expected)));
            }
            if e.offset % ALIGN != 0 {
                return Err(fmt_err(&e.name, "payload not 64-byte aligned"));
            }
            let n: usize = e.shape.iter().product();
            let start = data_start + e.offset;
            let end = start + 8 * n;
            if end > bytes.len() {
                return Err(fmt_err(&e.name, "payload truncated"));
            }
            let data: Vec<f64> =
                bytes[start..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let t = ArrayD::from_shape_vec(IxDyn(&e.shape), data).unwrap();
            b.set_tensor(&e.name, t);
            found.push(e.name.clone());
        }
        if let Some(missing) = names().find(|n| !found.iter().any(|f| f == n)) {
            return Err(fmt_err(missing, "missing tensor"));
        }
        b.validate()?;
        Ok(b)
    }

    fn set_tensor(&mut self, name: &str, t: ArrayD<f64>) {
        let two = |t: ArrayD<f64>| t.into_dimensionality::<ndarray::Ix2>().unwrap();
        let four = |t: ArrayD<f64>| t.into_dimensionality::<ndarray::Ix4>().unwrap();
        match name {
            "h_A" => self.h_a = two(t),
            "h_B" => self.h_b = two(t),
            "eri_A" => self.eri_a = four(t),
            "eri_B" => self.eri_b = four(t),
            "S_AB" => self.s_ab = two(t),
            "v_inter" => self.v_inter = four(t),
            "u_B_on_A" => self.u_b_on_a = two(t),
            "u_A_on_B" => self.u_a_on_b = two(t),
            "u_A_cross" => self.u_a_cross = two(t),
            "u_B_cross" => self.u_b_cross = two(t),
            "eri_ABAB" => self.eri_abab = four(t),
            "eri_ABBB" => self.eri_abbb = four(t),
            "eri_ABAA" => self.eri_abaa = four(t),
            _ => unreachable!(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Monomer roles exchanged, every cross tensor permuted accordingly.
    pub fn swapped(&self) -> IntegralBundle {
        let p4 = |t: &Array4<f64>, ax: [usize; 4]| t.view().permuted_axes(ax).as_standard_layout().into_owned();
        IntegralBundle {
            n_orb_a: self.n_orb_b,
            n_orb_b: self.n_orb_a,
            n_elec_a: self.n_elec_b,
            n_elec_b: self.n_elec_a,
            e_nuc_a: self.e_nuc_b,
            e_nuc_b: self.e_nuc_a,
            v_nuc_ab: self.v_nuc_ab,
            h_a: self.h_b.clone(),
            h_b: self.h_a.clone(),
            eri_a: self.eri_b.clone(),
            eri_b: self.eri_a.clone(),
            s_ab: self.s_ab.t().to_owned(),
            v_inter: p4(&self.v_inter, [2, 3, 0, 1]),
            u_b_on_a: self.u_a_on_b.clone(),
            u_a_on_b: self.u_b_on_a.clone(),
            u_a_cross: self.u_b_cross.t().to_owned(),
            u_b_cross: self.u_a_cross.t().to_owned(),
            eri_abab: p4(&self.eri_abab, [1, 0, 3, 2]),
            eri_abbb: p4(&self.eri_abaa, [1, 0, 2, 3]),
            eri_abaa: p4(&self.eri_abbb, [1, 0, 2, 3]),
            active_a: self.active_b.clone(),
            active_b: self.active_a.clone(),
        }
    }

    /// New orbitals of monomer `m` are the columns of `c` (expressed in the old ones).
    pub fn rotate(&self, m: Monomer, c: &Array2<f64>) -> IntegralBundle {
        let mut b = self.clone();
        match m {
            Monomer::A => {
                b.h_a = rot2(&self.h_a, c, c);
                b.u_b_on_a = rot2(&self.u_b_on_a, c, c);
                b.eri_a = transform4(&self.eri_a, [Some(c), Some(c), Some(c), Some(c)]);
                b.s_ab = c.t().dot(&self.s_ab);
                b.u_a_cross = c.t().dot(&self.u_a_cross);
                b.u_b_cross = c.t().dot(&self.u_b_cross);
                b.v_inter = transform4(&self.v_inter, [Some(c), Some(c), None, None]);
                b.eri_abab = transform4(&self.eri_abab, [Some(c), None, Some(c), None]);
                b.eri_abbb = transform4(&self.eri_abbb, [Some(c), None, None, None]);
                b.eri_abaa = transform4(&self.eri_abaa, [Some(c), None, Some(c), Some(c)]);
            }
            Monomer::B => {
                b.h_b = rot2(&self.h_b, c, c);
                b.u_a_on_b = rot2(&self.u_a_on_b, c, c);
                b.eri_b = transform4(&self.eri_b, [Some(c), Some(c), Some(c), Some(c)]);
                b.s_ab = self.s_ab.dot(c);
                b.u_a_cross = self.u_a_cross.dot(c);
                b.u_b_cross = self.u_b_cross.dot(c);
                b.v_inter = transform4(&self.v_inter, [None, None, Some(c), Some(c)]);
                b.eri_abab = transform4(&self.eri_abab, [None, Some(c), None, Some(c)]);
                b.eri_abbb = transform4(&self.eri_abbb, [None, Some(c), Some(c), Some(c)]);
                b.eri_abaa = transform4(&self.eri_abaa, [None, Some(c), None, None]);
            }
        }
        b
    }

    /// Closed-shell determinant energy with core plus the lowest active orbitals occupied.
    pub fn hf_energy(&self, m: Monomer) -> f64 {
        let spec = self.active(m);
        let occ: Vec<usize> = spec.core.iter().chain(spec.active.iter().take(spec.n_act_elec / 2)).copied().collect();
        let (h, eri) = (self.h(m), self.eri(m));
        let mut e = self.e_nuc(m);
        for &i in &occ {
            e += 2.0 * h[[i, i]];
            for &j in &occ {
                e += 2.0 * eri[[i, i, j, j]] - eri[[i, j, j, i]];
            }
        }
        e
    }
}

/// Bytes of tensor data implied by the orbital counts, `None` on overflow.
fn payload_len(na: usize, nb: usize) -> Option<usize> {
    let sq = |n: usize| n.checked_mul(n);
    let (a2, b2, ab) = (sq(na)?, sq(nb)?, na.checked_mul(nb)?);
    let terms = [a2, b2, sq(a2)?, sq(b2)?, ab, a2.checked_mul(b2)?, a2, b2, ab, ab, sq(ab)?, ab.checked_mul(b2)?, ab.checked_mul(a2)?];
    terms.iter().try_fold(0usize, |acc, &t| acc.checked_add(t.checked_mul(8)?))
}

pub fn checksum_bytes(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<IntegralBundle> {
    let bytes = std::fs::read(path)?;
    IntegralBundle::from_bytes(&bytes)
}

pub fn write_bundle(bundle: &IntegralBundle, path: impl AsRef<Path>) -> Result<()> {
    bundle.write(path)
}

pub fn eri_symmetry_error(t: &Array4<f64>) -> f64 {
    let mut d = 0.0_f64;
    for p in [[1, 0, 2, 3], [0, 1, 3, 2], [2, 3, 0, 1]] {
        d = d.max(perm_error(t, p));
    }
    d
}

fn perm_error(t: &Array4<f64>, p: [usize; 4]) -> f64 {
    if t.shape()[p[0]] != t.shape()[0] || t.shape()[p[1]] != t.shape()[1] {
        return f64::INFINITY;
    }
    let tp = t.view().permuted_axes(p);
    t.iter().zip(tp.iter()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
}

fn rot2(m: &Array2<f64>, l: &Array2<f64>, r: &Array2<f64>) -> Array2<f64> {
    l.t().dot(m).dot(r)
}

/// Applies `new[.., i, ..] = sum_p c[p, i] old[.., p, ..]` on each axis with a matrix.
pub fn transform4(t: &Array4<f64>, cs: [Option<&Array2<f64>>; 4]) -> Array4<f64> {
    let mut cur = t.clone().into_dyn();
    let letters = ['p', 'q', 'r', 's'];
    for (ax, c) in cs.iter().enumerate() {
        if let Some(c) = c {
            let mut out: Vec<char> = letters.to_vec();
            out[ax] = 'x';
            let spec = format!(
                "pqrs,{}x->{}",
                letters[ax],
                out.iter().collect::<String>()
            );
            cur = contract(&spec, &[&cur, &(*c).clone().into_dyn()]).unwrap();
        }
    }
    cur.into_dimensionality().unwrap()
}

pub fn rotate_rdms(r: &SpinSummedRDMs, c: &Array2<f64>) -> SpinSummedRDMs {
    SpinSummedRDMs { gamma: rot2(&r.gamma, c, c), big_gamma: transform4(&r.big_gamma, [Some(c), Some(c), Some(c), Some(c)]) }
}

pub fn fold_core(bundle: &IntegralBundle, m: Monomer) -> FoldedActiveHamiltonian {
    let spec = bundle.active(m);
    let (h, eri) = (bundle.h(m), bundle.eri(m));
    let act = &spec.active;
    let na = act.len();
    let mut h_tilde = Array2::zeros((na, na));
    for (t, &pt) in act.iter().enumerate() {
        for (u, &pu) in act.iter().enumerate() {
            let mut v = h[[pt, pu]];
            for &i in &spec.core {
                v += 2.0 * eri[[pt, pu, i, i]] - eri[[pt, i, i, pu]];
            }
            h_tilde[[t, u]] = v;
        }
    }
    let eri_act = Array4::from_shape_fn((na, na, na, na), |(p, q, r, s)| eri[[act[p], act[q], act[r], act[s]]]);
    let mut e_core = bundle.e_nuc(m);
    for &i in &spec.core {
        e_core += 2.0 * h[[i, i]];
        for &j in &spec.core {
            e_core += 2.0 * eri[[i, i, j, j]] - eri[[i, j, j, i]];
        }
    }
    FoldedActiveHamiltonian { h_tilde, eri_act, e_core }
}

/// Embeds active-space RDMs in the full orbital space; every block other than
/// the all-active one uses the mean-field composition.
pub fn assemble_full_rdms(act: &SpinSummedRDMs, spec: &ActiveSpaceSpec, n_orb: usize) -> Result<SpinSummedRDMs> {
    let tr = act.trace();
    if (tr - spec.n_act_elec as f64).abs() > 1e-8 {
        return Err(Error::TraceMismatch { expected: spec.n_act_elec as f64, got: tr });
    }
    let mut gamma = Array2::zeros((n_orb, n_orb));
    for &i in &spec.core {
        gamma[[i, i]] = 2.0;
    }
    for (t, &pt) in spec.active.iter().enumerate() {
        for (u, &pu) in spec.active.iter().enumerate() {
            gamma[[pt, pu]] = act.gamma[[t, u]];
        }
    }
    let mut big = mean_field_tpdm(&gamma);
    let a = &spec.active;
    for p in 0..a.len() {
        for q in 0..a.len() {
            for r in 0..a.len() {
                for s in 0..a.len() {
                    big[[a[p], a[q], a[r], a[s]]] = act.big_gamma[[p, q, r, s]];
                }
            }
        }
    }
    Ok(SpinSummedRDMs { gamma, big_gamma: big })
}

/// Occupations (descending) and orbital coefficients of the natural orbitals.
///
/// Orbitals with no off-diagonal coupling are only permuted.
pub fn natural_orbitals(gamma: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = gamma.nrows();
    let d = crate::linalg::max_asymmetry(gamma);
    if d > 1e-8 {
        return Err(Error::NonSymmetric(d));
    }
    // connected blocks of the coupling graph
    let mut label = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = blocks.len();
        let mut members = vec![start];
        label[start] = id;
        let mut k = 0;
        while k < members.len() {
            let i = members[k];
            for j in 0..n {
                if label[j] == usize::MAX && gamma[[i, j]].abs() > 1e-14 {
                    label[j] = id;
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        blocks.push(members);
    }
    let mut cols: Vec<(f64, usize, Vec<f64>)> = Vec::new();
    for b in &blocks {
        let sub = Array2::from_shape_fn((b.len(), b.len()), |(i, j)| gamma[[b[i], b[j]]]);
        let e = sym_eig(&sub)?;
        for k in (0..b.len()).rev() {
            let mut v = vec![0.0; n];
            for (i, &bi) in b.iter().enumerate() {
                v[bi] = e.eigenvectors[[i, k]];
            }
            // deterministic phase: largest component positive
            let (imax, _) = v.iter().enumerate().fold((0, 0.0_f64), |(bi, bv), (i, x)| if x.abs() > bv + 1e-12 { (i, x.abs()) } else { (bi, bv) });
            if v[imax] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let first = b[0];
            cols.push((e.eigenvalues[k], first, v));
        }
    }
    // stable ordering: by occupation descending, ties by position
    let mut order: Vec<usize> = (0..cols.len()).collect();
    let lead: Vec<usize> = cols.iter().map(|c| c.2.iter().position(|x| x.abs() > 1e-12).unwrap_or(c.1)).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (cols[i].0, cols[j].0);
        if (a - b).abs() > 1e-12 {
            b.total_cmp(&a)
        } else {
            lead[i].cmp(&lead[j])
        }
    });
    let mut occ = Vec::with_capacity(n);
    let mut c = Array2::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        let o = cols[i].0;
        if !(-1e-8..=2.0 + 1e-8).contains(&o) {
            return Err(Error::OccupancyOutOfRange(o));
        }
        occ.push(o);
        for r in 0..n {
            c[[r, k]] = cols[i].2[r];
        }
    }
    Ok((occ, c))
}

/// Rotates the RDMs and every tensor of monomer `m` into its natural-orbital basis.
pub fn to_natural_orbitals(
    rdms: &SpinSummedRDMs,
    bundle: &IntegralBundle,
    m: Monomer,
) -> Result<(SpinSummedRDMs, IntegralBundle, Vec<f64>, Array2<f64>)> {
    let (occ, c) = natural_orbitals(&rdms.gamma)?;
    let mut r = rotate_rdms(rdms, &c);
    // exact diagonal for downstream consumers
    for i in 0..occ.len() {
        for j in 0..occ.len() {
            r.gamma[[i, j]] = if i == j { occ[i] } else { 0.0 };
        }
    }
    Ok((r, bundle.rotate(m, &c), occ, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> IntegralBundle {
        let mut b = IntegralBundle::from_monomers(
            (array![[-1.0]], Array4::from_elem((1, 1, 1, 1), 0.6), 2, 0.5),
            (array![[-0.8]], Array4::from_elem((1, 1, 1, 1), 0.5), 2, 0.3),
        );
        b.s_ab[[0, 0]] = 0.1;
        b.v_inter[[0, 0, 0, 0]] = 0.25;
        b
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let b = tiny();
        let bytes = b.to_bytes();
        let back = IntegralBundle::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_asymmetric_eri() {
        let mut b = IntegralBundle::from_monomers(
            (Array2::zeros((2, 2)), Array4::zeros((2, 2, 2, 2)), 2, 0.0),
            (Array2::zeros((1, 1)), Array4::zeros((1, 1, 1, 1)), 2, 0.0),
        );
        b.eri_a[[0, 1, 0, 0]] = 0.1;
        let err = IntegralBundle::from_bytes(&b.to_bytes()).unwrap_err();
        assert!(matches!(err, Error::SymmetryViolation { ref tensor, .. } if tensor == "eri_A"));
    }

    #[test]
    fn rejects_bad_magic_and_odd_electrons() {
        assert!(matches!(IntegralBundle::from_bytes(b"nonsense-bytes-here"), Err(Error::FormatError { .. })));
        let mut b = tiny();
        b.n_elec_a = 1;
        assert!(matches!(b.validate(), Err(Error::FormatError { .. })));
    }

    #[test]
    fn empty_core_fold() {
        let b = tiny();
        let f = fold_core(&b, Monomer::A);
        assert_eq!(f.h_tilde, b.h_a);
        assert_eq!(f.e_core, b.e_nuc_a);
    }

    #[test]
    fn zero_eri_core_fold() {
        let mut b = IntegralBundle::from_monomers(
            (array![[-2.0, 0.1], [0.1, -0.5]], Array4::zeros((2, 2, 2, 2)), 2, 0.7),
            (array![[-1.0]], Array4::zeros((1, 1, 1, 1)), 2, 0.0),
        );
        b.active_a = ActiveSpaceSpec { core: vec![0], active: vec![1], virtual_: vec![], n_act_elec: 0 };
        let f = fold_core(&b, Monomer::A);
        assert_eq!(f.h_tilde, array![[-0.5]]);
        assert!((f.e_core - (2.0 * -2.0 + 0.7)).abs() < 1e-15);
    }

    #[test]
    fn rank_one_natural_orbitals() {
        let (occ, c) = natural_orbitals(&array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!((occ[0] - 2.0).abs() < 1e-12 && occ[1].abs() < 1e-12);
        assert!((c[[0, 0]].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn diagonal_gamma_gives_permutation() {
        let (occ, c) = natural_orbitals(&Array2::from_diag(&ndarray::arr1(&[0.1, 1.9, 2.0, 0.0]))).unwrap();
        assert_eq!(occ, vec![2.0, 1.9, 0.1, 0.0]);
        for row in c.rows() {
            assert_eq!(row.iter().filter(|x| **x != 0.0).count(), 1);
        }
        assert_eq!(c[[2, 0]], 1.0);
    }

    #[test]
    fn swap_twice_is_identity() {
        let b = tiny();
        assert_eq!(b.swapped().swapped(), b);
    }
}
