//! Bundle to report: fold, solve monomers, natural orbitals, ERPA, SAPT.

use crate::bundle::{assemble_full_rdms, checksum_bytes, fold_core, to_natural_orbitals, IntegralBundle, Monomer};
use crate::casci::solve_casci;
use crate::erpa::{build_problem, solve_erpa, ErpaMode, ErpaSolution, DEFAULT_ORTHO_THRESHOLD};
use crate::error::{Error, Result};
use crate::rdm::SpinSummedRDMs;
use crate::sapt::{
    assemble_report, compute_sapt, MonomerSummary, ReferenceComparison, SaptReport, SaptTerms, VqeStep, HARTREE_TO_KCAL,
};
use crate::vqe::{optimize, VqeConfig};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonomerMethod {
    Hf,
    Vqe,
    Casci,
}

impl MonomerMethod {
    pub fn name(self) -> &'static str {
        match self {
            MonomerMethod::Hf => "hf",
            MonomerMethod::Vqe => "vqe",
            MonomerMethod::Casci => "casci",
        }
    }
}

impl std::str::FromStr for MonomerMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<MonomerMethod> {
        match s {
            "hf" => Ok(MonomerMethod::Hf),
            "vqe" => Ok(MonomerMethod::Vqe),
            "casci" => Ok(MonomerMethod::Casci),
            _ => Err(Error::Config(format!("unknown monomer method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub bundle_path: PathBuf,
    #[serde(rename = "monomer_method_A")]
    pub monomer_method_a: MonomerMethod,
    #[serde(rename = "monomer_method_B")]
    pub monomer_method_b: MonomerMethod,
    pub k_schedule: Vec<usize>,
    pub seed: u64,
    pub erpa_mode: ErpaMode,
    pub ortho_threshold: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub output_path: Option<PathBuf>,
    pub emit_dense_validation: bool,
    /// Also run CAS-CI on every VQE monomer and report the error table.
    pub casci_reference: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            bundle_path: PathBuf::new(),
            monomer_method_a: MonomerMethod::Casci,
            monomer_method_b: MonomerMethod::Casci,
            k_schedule: vec![1],
            seed: 0,
            erpa_mode: ErpaMode::Coupled,
            ortho_threshold: DEFAULT_ORTHO_THRESHOLD,
            grad_tol: 1e-6,
            max_iter: 1500,
            output_path: None,
            emit_dense_validation: false,
            casci_reference: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ortho_threshold > 0.0) || !(self.grad_tol > 0.0) {
            return Err(Error::Config("ortho_threshold and grad_tol must be positive".into()));
        }
        let uses_vqe = [self.monomer_method_a, self.monomer_method_b].contains(&MonomerMethod::Vqe);
        if uses_vqe && (self.k_schedule.is_empty() || self.k_schedule.contains(&0)) {
            return Err(Error::Config("k_schedule must be a non-empty list of positive depths".into()));
        }
        Ok(())
    }

    fn vqe_config(&self) -> VqeConfig {
        VqeConfig { grad_tol: self.grad_tol, max_iter: self.max_iter, ..VqeConfig::default() }
    }
}

/// Ground state of one monomer in the full orbital space.
#[derive(Debug, Clone)]
pub struct MonomerState {
    pub rdms: SpinSummedRDMs,
    pub energy: f64,
    pub vqe_trajectory: Vec<VqeStep>,
}

pub fn solve_monomer(bundle: &IntegralBundle, m: Monomer, method: MonomerMethod, config: &RunConfig) -> Result<MonomerState> {
    let spec = bundle.active(m);
    let n = bundle.n_orb(m);
    match method {
        MonomerMethod::Hf => {
            let mut occ = vec![0.0; n];
            for &i in spec.core.iter().chain(spec.active.iter().take(spec.n_act_elec / 2)) {
                occ[i] = 2.0;
            }
            Ok(MonomerState { rdms: SpinSummedRDMs::determinant(&occ), energy: bundle.hf_energy(m), vqe_trajectory: vec![] })
        }
        MonomerMethod::Casci => {
            let f = fold_core(bundle, m);
            let c = solve_casci(&f, spec.n_act_elec, Some(1))?;
            let rdms = assemble_full_rdms(&c.ground_rdms, spec, n)?;
            Ok(MonomerState { rdms, energy: c.ground_energy(), vqe_trajectory: vec![] })
        }
        MonomerMethod::Vqe => {
            let f = fold_core(bundle, m);
            let runs = optimize(&f, spec.n_act_elec, &config.k_schedule, config.seed, &config.vqe_config())?;
            let last = runs.last().expect("non-empty schedule");
            let trajectory = runs
                .iter()
                .map(|r| VqeStep { k: r.k, energy: r.energy, grad_norm: r.grad_norm, n_iterations: r.n_iterations, converged: r.converged })
                .collect();
            let rdms = assemble_full_rdms(&last.rdms, spec, n)?;
            Ok(MonomerState { rdms, energy: last.energy, vqe_trajectory: trajectory })
        }
    }
}

struct Prepared {
    bundle: IntegralBundle,
    rdms: [SpinSummedRDMs; 2],
    erpa: [ErpaSolution; 2],
    occupations: [Vec<f64>; 2],
}

fn prepare(bundle: &IntegralBundle, a: &SpinSummedRDMs, b: &SpinSummedRDMs, config: &RunConfig, timings: &mut BTreeMap<String, f64>) -> Result<Prepared> {
    let t = Instant::now();
    let (ra, b1, occ_a, _) = to_natural_orbitals(a, bundle, Monomer::A).map_err(|e| e.at("natural orbitals A"))?;
    let (rb, b2, occ_b, _) = to_natural_orbitals(b, &b1, Monomer::B).map_err(|e| e.at("natural orbitals B"))?;
    *timings.entry("natural_orbitals".into()).or_default() += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let solve = |r: &SpinSummedRDMs, m: Monomer, stage: &'static str| -> Result<ErpaSolution> {
        let p = build_problem(r, b2.h(m), b2.eri(m), config.erpa_mode).map_err(|e| e.at(stage))?;
        solve_erpa(&p, config.ortho_threshold).map_err(|e| e.at(stage))
    };
    let ea = solve(&ra, Monomer::A, "erpa A")?;
    let eb = solve(&rb, Monomer::B, "erpa B")?;
    *timings.entry("erpa".into()).or_default() += t.elapsed().as_secs_f64();
    Ok(Prepared { bundle: b2, rdms: [ra, rb], erpa: [ea, eb], occupations: [occ_a, occ_b] })
}

fn sapt_for(p: &Prepared, dense: bool, timings: &mut BTreeMap<String, f64>) -> Result<(SaptTerms, crate::sapt::Diagnostics)> {
    let t = Instant::now();
    let out = compute_sapt(&p.bundle, &p.rdms[0], &p.rdms[1], &p.erpa[0], &p.erpa[1], dense).map_err(|e| e.at("sapt"))?;
    *timings.entry("sapt".into()).or_default() += t.elapsed().as_secs_f64();
    Ok(out)
}

/// Full pipeline on an in-memory bundle. `checksum` goes into the provenance block.
pub fn run_bundle(bundle: &IntegralBundle, config: &RunConfig, checksum: &str) -> Result<SaptReport> {
    config.validate()?;
    bundle.validate().map_err(|e| e.at("bundle"))?;
    let mut timings = BTreeMap::new();

    let mut states = Vec::new();
    for (m, method, stage) in [(Monomer::A, config.monomer_method_a, "monomer A"), (Monomer::B, config.monomer_method_b, "monomer B")] {
        let t = Instant::now();
        states.push(solve_monomer(bundle, m, method, config).map_err(|e| e.at(stage))?);
        timings.insert(format!("{}_{}", stage.replace(' ', "_"), method.name()), t.elapsed().as_secs_f64());
    }
    let prepared = prepare(bundle, &states[0].rdms, &states[1].rdms, config, &mut timings)?;
    let (terms, mut diagnostics) = sapt_for(&prepared, config.emit_dense_validation, &mut timings)?;

    let methods = [config.monomer_method_a, config.monomer_method_b];
    diagnostics.monomers = ["A", "B"]
        .iter()
        .zip(&states)
        .zip(methods.iter().zip(&prepared.occupations))
        .map(|((label, s), (method, occ))| MonomerSummary {
            label: label.to_string(),
            method: method.name().into(),
            energy: s.energy,
            natural_occupations: occ.clone(),
            vqe_trajectory: s.vqe_trajectory.clone(),
        })
        .collect();

    if config.casci_reference && methods.contains(&MonomerMethod::Vqe) {
        let t = Instant::now();
        let mut refs = Vec::new();
        for (m, stage) in [(Monomer::A, "reference A"), (Monomer::B, "reference B")] {
            refs.push(solve_monomer(bundle, m, MonomerMethod::Casci, config).map_err(|e| e.at(stage))?);
        }
        timings.insert("reference_casci".into(), t.elapsed().as_secs_f64());
        let rp = prepare(bundle, &refs[0].rdms, &refs[1].rdms, config, &mut timings)?;
        let (rt, _) = sapt_for(&rp, false, &mut timings)?;
        let term_errors: BTreeMap<String, f64> = terms
            .named()
            .iter()
            .zip(rt.named())
            .map(|((k, a), (_, b))| (k.to_string(), (a - b) * HARTREE_TO_KCAL))
            .collect();
        let monomer_energy_errors: Vec<f64> = states.iter().zip(&refs).map(|(s, r)| (s.energy - r.energy) * HARTREE_TO_KCAL).collect();
        let interaction_error = term_errors["total"];
        let worst = monomer_energy_errors.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        diagnostics.reference = Some(ReferenceComparison {
            reference_total: rt.total() * HARTREE_TO_KCAL,
            term_errors,
            interaction_error,
            monomer_energy_errors,
            ratio: if worst > 0.0 { interaction_error.abs() / worst } else { 0.0 },
        });
    }
    diagnostics.timings = timings;

    let provenance = serde_json::json!({
        "bundle_checksum": checksum,
        "config": config,
        "seed": config.seed,
        "software": format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
    });
    Ok(assemble_report(terms, diagnostics, provenance))
}

/// Reads the bundle, runs, and writes the report to `output_path` if set.
pub fn run(config: &RunConfig) -> Result<SaptReport> {
    config.validate()?;
    let bytes = std::fs::read(&config.bundle_path).map_err(|e| Error::from(e).at("read bundle"))?;
    let bundle = IntegralBundle::from_bytes(&bytes).map_err(|e| e.at("read bundle"))?;
    let report = run_bundle(&bundle, config, &checksum_bytes(&bytes))?;
    if let Some(path) = &config.output_path {
        std::fs::write(path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::from(e).at("write report"))?;
    }
    Ok(report)
}

/// Per-term differences `a - b` in kcal/mol.
pub fn compare(a: &SaptReport, b: &SaptReport) -> Vec<(&'static str, f64)> {
    let pairs = [
        ("elst", a.elst, b.elst),
        ("exch", a.exch, b.exch),
        ("ind_u", a.ind_u, b.ind_u),
        ("exch_ind_u", a.exch_ind_u, b.exch_ind_u),
        ("disp", a.disp, b.disp),
        ("exch_disp", a.exch_disp, b.exch_disp),
        ("total", a.total, b.total),
    ];
    pairs.iter().map(|(k, x, y)| (*k, x.kcal_mol - y.kcal_mol)).collect()
}
