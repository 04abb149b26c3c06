//! `hbvm` — tableau inspection, spectral verification and integration runs
//! for HBVM(k,s) methods, emitting deterministic CSV reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hbvm_core::blended::{gamma_opt, rho_star_at_optimal, BlendedConfig, LinearAnalysis};
use hbvm_core::eig::eigenvalues;
use hbvm_core::integrator::{self, HamiltonianSystem, Reference};
use hbvm_core::partition::{condition_number, select_fundamental, StagePartition};
use hbvm_core::tableau::{verify_isospectral, x_matrix, HbvmTableau};

#[derive(Parser)]
#[command(
    name = "hbvm",
    version,
    about = "Energy-preserving HBVM(k,s) integrators: reports and runs",
    after_help = "Exit codes: 0 success/pass, 1 verification failure, 2 usage error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the Butcher tableau (nodes, weights, coefficient matrix) of HBVM(k,s).
    Tableau {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that the nonzero spectrum of A equals the Gauss spectrum.
    Isospectral {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        /// Zero-classification threshold relative to the 2-norm of A.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal blending parameters and amplification factors per degree.
    GammaTable {
        #[arg(long = "s-max", default_value_t = 10)]
        s_max: usize,
        /// Also print the degenerate s = 1 row.
        #[arg(long)]
        include_s1: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Condition number of the reduced matrix C(k,s) as k grows.
    Cond {
        #[arg(long)]
        s: usize,
        #[arg(long = "k-max", default_value_t = 100)]
        k_max: usize,
        #[arg(long, value_enum, default_value_t = Selection::RuleOfThumb)]
        selection: Selection,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Amplification factor of the blended iteration along the imaginary axis.
    Amplification {
        #[arg(long)]
        s: usize,
        /// Stage count of the underlying method (defaults to s).
        #[arg(long)]
        k: Option<usize>,
        /// Blending parameter (defaults to the optimal one).
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fixed-step integration of a built-in problem.
    Integrate {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Observed convergence order against a step-halving ladder.
    Order {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        /// Coarsest step size of the ladder.
        #[arg(long, default_value_t = 0.4)]
        h: f64,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long = "t-end", default_value_t = 2.0)]
        t_end: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step energy record of an integration run.
    Energy {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Selection {
    /// Symmetric nearest-to-equidistributed-targets choice (even k - s only).
    RuleOfThumb,
    /// First s abscissae; conditioning degrades as k grows.
    FirstS,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Tableau { k, s, out } => {
            let tab = HbvmTableau::gauss(k, s).map_err(|e| e.to_string())?;
            let mut csv = format!("# hbvm tableau k={k} s={s}\nkind,i,j,value\n");
            for (i, &t) in tab.nodes().iter().enumerate() {
                csv.push_str(&format!("node,{},,{}\n", i + 1, sig16(t)));
            }
            for (i, &w) in tab.weights().iter().enumerate() {
                csv.push_str(&format!("weight,{},,{}\n", i + 1, sig16(w)));
            }
            for i in 0..k {
                for j in 0..k {
                    csv.push_str(&format!("a,{},{},{}\n", i + 1, j + 1, sig16(tab.a()[(i, j)])));
                }
            }
            emit(&csv, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Isospectral { k, s, tol, out } => {
            let report = verify_isospectral(k, s, tol).map_err(|e| e.to_string())?;
            let pass = report.is_pass(1e-9);
            let mut csv = format!("# hbvm isospectral k={k} s={s} tol={tol:e}\nquantity,value\n");
            csv.push_str(&format!("zero_count,{}\n", report.zero_count));
            csv.push_str(&format!("expected_zero_count,{}\n", k - s));
            csv.push_str(&format!(
                "max_pairing_error,{}\n",
                sig16(report.max_pairing_error)
            ));
            csv.push_str(&format!("result,{}\n", if pass { "pass" } else { "fail" }));
            emit(&csv, out.as_deref())?;
            Ok(if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::GammaTable {
            s_max,
            include_s1,
            out,
        } => {
            if !(1..=10).contains(&s_max) {
                return Err(format!("--s-max must be in 1..=10, got {s_max}"));
            }
            let mut csv = format!("# hbvm gamma-table s_max={s_max}\ns,gamma,rho_star\n");
            let from = if include_s1 { 1 } else { 2 };
            for s in from..=s_max {
                let spectrum = eigenvalues(&x_matrix(s)).map_err(|e| e.to_string())?;
                let gamma = gamma_opt(&spectrum).map_err(|e| e.to_string())?;
                let rho = rho_star_at_optimal(&spectrum).map_err(|e| e.to_string())?;
                csv.push_str(&format!("{s},{gamma:.4},{rho:.4}\n"));
            }
            emit(&csv, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Cond {
            s,
            k_max,
            selection,
            out,
        } => {
            if s < 1 || k_max < s {
                return Err(format!("need 1 <= s <= k_max, got s={s}, k_max={k_max}"));
            }
            let label = match selection {
                Selection::RuleOfThumb => "rule-of-thumb",
                Selection::FirstS => "first-s",
            };
            let mut csv = format!("# hbvm cond s={s} k_max={k_max} selection={label}\nk,cond\n");
            let mut k = s;
            while k <= k_max {
                let tab = HbvmTableau::gauss(k, s).map_err(|e| e.to_string())?;
                let fund = match selection {
                    Selection::RuleOfThumb => {
                        select_fundamental(tab.nodes(), s).map_err(|e| e.to_string())?
                    }
                    Selection::FirstS => (0..s).collect(),
                };
                let part = StagePartition::build(&tab, &fund).map_err(|e| e.to_string())?;
                csv.push_str(&format!("{k},{}\n", sig16(condition_number(part.c()))));
                k += match selection {
                    Selection::RuleOfThumb => 2,
                    Selection::FirstS => 1,
                };
            }
            emit(&csv, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Amplification {
            s,
            k,
            gamma,
            grid,
            out,
        } => {
            let k = k.unwrap_or(s);
            let tab = HbvmTableau::gauss(k, s).map_err(|e| e.to_string())?;
            let part = StagePartition::from_tableau(&tab).map_err(|e| e.to_string())?;
            let analysis =
                LinearAnalysis::compute(part.c(), gamma, grid).map_err(|e| e.to_string())?;
            let mut csv = format!(
                "# hbvm amplification s={s} k={k} gamma={} grid={grid}\n# rho_star={}\ny,rho\n",
                sig16(analysis.gamma),
                sig16(analysis.rho_star)
            );
            for &(y, rho) in &analysis.q_grid {
                csv.push_str(&format!("{},{}\n", sig16(y), sig16(rho)));
            }
            emit(&csv, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Integrate {
            problem,
            k,
            s,
            h,
            steps,
            gamma,
            out,
        } => {
            let system = HamiltonianSystem::by_name(&problem).map_err(|e| e.to_string())?;
            let run = run_integration(&system, k, s, h, steps, gamma)?;
            let dim = system.dim();
            let mut csv = format!("# hbvm integrate problem={problem} k={k} s={s} h={h} steps={steps}\n");
            csv.push('t');
            for i in 1..=dim {
                csv.push_str(&format!(",y{i}"));
            }
            csv.push_str(",energy\n");
            for (i, state) in run.states.iter().enumerate() {
                csv.push_str(&sig16(run.times[i]));
                for v in state.iter() {
                    csv.push(',');
                    csv.push_str(&sig16(*v));
                }
                csv.push_str(&format!(",{}\n", sig16(run.energy[i])));
            }
            emit(&csv, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Order {
            problem,
            k,
            s,
            h,
            levels,
            t_end,
            out,
        } => {
            let system = HamiltonianSystem::by_name(&problem).map_err(|e| e.to_string())?;
            let mut cfg = solver_config(s, None)?;
            cfg.rtol = 1e-14;
            cfg.atol = 1e-16;
            let h_levels: Vec<f64> = (0..levels).map(|i| h / 2f64.powi(i as i32)).collect();
            let slope = integrator::observed_order(
                &system,
                &Reference::SelfRefined { factor: 64 },
                k,
                s,
                t_end,
                &h_levels,
                &cfg,
            )
            .map_err(|e| e.to_string())?;
            let mut csv = format!(
                "# hbvm order problem={problem} k={k} s={s} h={h} levels={levels} t_end={t_end}\n"
            );
            csv.push_str("h,error\n");
            for &h_level in &h_levels {
                let n = (t_end / h_level).round().max(1.0);
                let t_actual = n * h_level;
                let run = integrator::integrate(
                    &system,
                    &integrator::initial_state(&system),
                    t_actual,
                    h_level,
                    k,
                    s,
                    &cfg,
                )
                .map_err(|e| e.to_string())?;
                let fine = integrator::integrate(
                    &system,
                    &integrator::initial_state(&system),
                    t_actual,
                    h_level / 64.0,
                    k,
                    s,
                    &cfg,
                )
                .map_err(|e| e.to_string())?;
                let error =
                    (run.states.last().unwrap() - fine.states.last().unwrap()).norm();
                csv.push_str(&format!("{},{}\n", sig16(h_level), sig16(error)));
            }
            csv.push_str(&format!("# slope={}\n", sig16(slope)));
            emit(&csv, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Energy {
            problem,
            k,
            s,
            h,
            steps,
            out,
        } => {
            let system = HamiltonianSystem::by_name(&problem).map_err(|e| e.to_string())?;
            let run = run_integration(&system, k, s, h, steps, None)?;
            let h0 = run.energy[0];
            let scale = if h0.abs() > 0.0 { h0.abs() } else { 1.0 };
            let mut csv =
                format!("# hbvm energy problem={problem} k={k} s={s} h={h} steps={steps}\n");
            csv.push_str("step,t,energy,rel_drift\n");
            for i in 0..run.states.len() {
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    i,
                    sig16(run.times[i]),
                    sig16(run.energy[i]),
                    sig16((run.energy[i] - h0).abs() / scale)
                ));
            }
            emit(&csv, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_integration(
    system: &HamiltonianSystem,
    k: usize,
    s: usize,
    h: f64,
    steps: usize,
    gamma: Option<f64>,
) -> Result<hbvm_core::IntegrationResult, String> {
    if h <= 0.0 {
        return Err(format!("step size must be positive, got {h}"));
    }
    let cfg = solver_config(s, gamma)?;
    let y0 = integrator::initial_state(system);
    let run = integrator::integrate(system, &y0, h * steps as f64, h, k, s, &cfg)
        .map_err(|e| e.to_string())?;
    if let Some(failure) = run.failures.first() {
        return Err(format!(
            "step {} (t = {}) failed: {}",
            failure.step, failure.time, failure.message
        ));
    }
    Ok(run)
}

fn solver_config(s: usize, gamma: Option<f64>) -> Result<BlendedConfig, String> {
    let mut cfg = BlendedConfig::optimal_for_degree(s).map_err(|e| e.to_string())?;
    if let Some(gamma) = gamma {
        if gamma <= 0.0 {
            return Err(format!("gamma must be positive, got {gamma}"));
        }
        cfg.gamma = gamma;
    }
    cfg.rtol = 1e-13;
    cfg.atol = 1e-15;
    Ok(cfg)
}

/// 16 significant digits, scientific notation.
fn sig16(v: f64) -> String {
    format!("{v:.15e}")
}

/// Write the report to `out` (atomically, via a sibling temp file) or to
/// stdout.
fn emit(content: &str, out: Option<&Path>) -> Result<(), String> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, content).map_err(|e| format!("writing {}: {e}", tmp.display()))?;
            std::fs::rename(&tmp, path)
                .map_err(|e| format!("renaming into {}: {e}", path.display()))
        }
    }
}
