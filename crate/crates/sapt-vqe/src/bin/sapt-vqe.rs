use clap::{Args, Parser, Subcommand};
use sapt_vqe::bundle::{checksum_bytes, eri_symmetry_error, IntegralBundle, Monomer};
use sapt_vqe::erpa::ErpaMode;
use sapt_vqe::pipeline::{compare, run, MonomerMethod, RunConfig};
use sapt_vqe::sapt::SaptReport;
use sapt_vqe::statevector::resource_count;
use sapt_vqe::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sapt-vqe", version, about = "SAPT interaction energies from VQE or CAS-CI monomers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write a JSON report.
    Run(RunArgs),
    /// Per-term differences between two reports, in kcal/mol.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Exit 0 only if every |delta| is below this (kcal/mol).
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
    },
    /// Print dimensions, active spaces and checks of a bundle.
    InspectBundle { path: PathBuf },
    /// Qubit, parameter, gate and depth counts of the k-muCJ circuit.
    Resources {
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON RunConfig; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bundle_path: Option<PathBuf>,
    #[arg(long = "monomer-method-a")]
    monomer_method_a: Option<MonomerMethod>,
    #[arg(long = "monomer-method-b")]
    monomer_method_b: Option<MonomerMethod>,
    #[arg(long, value_delimiter = ',')]
    k_schedule: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    erpa_mode: Option<ErpaMode>,
    #[arg(long)]
    ortho_threshold: Option<f64>,
    #[arg(long)]
    grad_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    output_path: Option<PathBuf>,
    #[arg(long)]
    emit_dense_validation: bool,
    #[arg(long)]
    casci_reference: bool,
}

fn parse_mode(s: &str) -> std::result::Result<ErpaMode, String> {
    match s {
        "coupled" => Ok(ErpaMode::Coupled),
        "uncoupled" => Ok(ErpaMode::Uncoupled),
        _ => Err(format!("unknown ERPA mode `{s}`")),
    }
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_json(&std::fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.bundle_path {
            c.bundle_path = v;
        }
        if let Some(v) = self.monomer_method_a {
            c.monomer_method_a = v;
        }
        if let Some(v) = self.monomer_method_b {
            c.monomer_method_b = v;
        }
        if let Some(v) = self.k_schedule {
            c.k_schedule = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.erpa_mode {
            c.erpa_mode = v;
        }
        if let Some(v) = self.ortho_threshold {
            c.ortho_threshold = v;
        }
        if let Some(v) = self.grad_tol {
            c.grad_tol = v;
        }
        if let Some(v) = self.max_iter {
            c.max_iter = v;
        }
        if let Some(v) = self.output_path {
            c.output_path = Some(v);
        }
        c.emit_dense_validation |= self.emit_dense_validation;
        c.casci_reference |= self.casci_reference;
        if c.bundle_path.as_os_str().is_empty() {
            return Err(Error::Config("no bundle_path given".into()));
        }
        Ok(c)
    }
}

fn print_report(r: &SaptReport) {
    println!("{:<12} {:>16} {:>12}", "term", "hartree", "kcal/mol");
    for (k, e) in [
        ("elst", r.elst),
        ("exch", r.exch),
        ("ind_u", r.ind_u),
        ("exch_ind_u", r.exch_ind_u),
        ("disp", r.disp),
        ("exch_disp", r.exch_disp),
        ("total", r.total),
    ] {
        println!("{:<12} {:>16.10} {:>12.4}", k, e.hartree, e.kcal_mol);
    }
    if let Some(rc) = &r.diagnostics.reference {
        println!("interaction error vs CAS-CI: {:.4} kcal/mol (ratio to monomer error {:.3e})", rc.interaction_error, rc.ratio);
    }
}

fn read_report(p: &PathBuf) -> Result<SaptReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?)
}

fn inspect(path: &PathBuf) -> Result<()> {
    let bytes = std::fs::read(path)?;
    let b = IntegralBundle::from_bytes(&bytes)?;
    println!("checksum    {}", checksum_bytes(&bytes));
    for (label, m) in [("A", Monomer::A), ("B", Monomer::B)] {
        let a = b.active(m);
        println!(
            "monomer {label}: {} orbitals, {} electrons, core {}, active {} ({}e), virtual {}, E_nuc {:.10}, E_HF {:.10}, eri symmetry {:.1e}",
            b.n_orb(m),
            b.n_elec(m),
            a.core.len(),
            a.active.len(),
            a.n_act_elec,
            a.virtual_.len(),
            b.e_nuc(m),
            b.hf_energy(m),
            eri_symmetry_error(b.eri(m)),
        );
    }
    let smax = b.s_ab.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    println!("V_nuc(AB)   {:.10}", b.v_nuc_ab);
    println!("max |S_AB|  {smax:.6}");
    b.validate()?;
    println!("validation  ok");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result: Result<ExitCode> = match cli.command {
        Command::Run(args) => args.into_config().and_then(|c| run(&c)).map(|r| {
            print_report(&r);
            ExitCode::SUCCESS
        }),
        Command::Compare { a, b, tol } => (|| {
            let (ra, rb) = (read_report(&a)?, read_report(&b)?);
            let mut ok = true;
            println!("{:<12} {:>12}", "term", "delta");
            for (k, dlt) in compare(&ra, &rb) {
                println!("{k:<12} {dlt:>12.6}");
                ok &= dlt.abs() < tol;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        })(),
        Command::InspectBundle { path } => inspect(&path).map(|_| ExitCode::SUCCESS),
        Command::Resources { m, k_max } => {
            println!("{:>3} {:>7} {:>7} {:>9} {:>6}", "k", "qubits", "params", "2q gates", "depth");
            for k in 1..=k_max {
                let r = resource_count(m, k);
                println!("{k:>3} {:>7} {:>7} {:>9} {:>6}", r.n_qubits, r.n_params, r.n_two_qubit_gates, r.depth);
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
