mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use nikishin::asymptotics::{
    run_kappa, run_markov_convergence, run_ratio_asymptotics, system_for_ladder, zero_structure_report, ExperimentReport,
};
use nikishin::hermite_pade::solve_hp;
use nikishin::measures::NikishinSystem;
use nikishin::riemann::{build_surface_map, bvp_residual_with, SurfaceSpec};
use nikishin::zeros::form_zeros;
use nikishin::{Error, Result};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "hp", version, about = "Multi-level Hermite-Padé approximation for Nikishin systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Multi-index such as `3,2,1`; a single value is repeated.
    #[arg(long, global = true)]
    index: Option<String>,
    /// Level `j` of the form whose zeros are wanted.
    #[arg(long, global = true)]
    level: Option<usize>,
    /// Sheet `l` carrying the pole of the conformal map.
    #[arg(long = "pole-sheet", global = true)]
    pole_sheet: Option<usize>,
    /// Output JSON path; CSV and plot script are written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for ladder runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Low precision preview: 64 bits without escalation.
    #[arg(long, global = true)]
    sketch: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Moment table of every nested measure.
    Moments,
    /// Hermite-Padé polynomials for one index.
    Solve,
    /// Zeros of the level form `A_{n,j}`.
    Zeros,
    /// Conformal map of the genus-zero surface.
    Surface,
    /// Markov-type convergence along a ladder.
    Converge,
    /// Ratio asymptotics against the conformal map.
    Ratio,
    /// Norming-constant ratios and form moduli.
    Kappa,
    /// Zero counts, interlacing and sign changes along a ladder.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Moments => "moments",
            Command::Solve => "solve",
            Command::Zeros => "zeros",
            Command::Surface => "surface",
            Command::Converge => "converge",
            Command::Ratio => "ratio",
            Command::Kappa => "kappa",
            Command::Report => "report",
        }
    }
}

#[derive(Serialize)]
struct Header {
    command: &'static str,
    version: &'static str,
    config_sha256: String,
    precision_trace: Vec<u32>,
    sketch: bool,
}

#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    header: Header,
    result: &'a T,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = RunConfig::from_json(&text)?;
    if let Some(s) = &cli.index {
        let v: std::result::Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
        cfg.index = Some(v.map_err(|_| Error::InvalidIndex(format!("cannot parse '{s}'")))?);
    }
    if cli.level.is_some() {
        cfg.level = cli.level;
    }
    if cli.pole_sheet.is_some() {
        cfg.pole_sheet = cli.pole_sheet;
    }
    if let Some(out) = &cli.out {
        cfg.outputs.json = Some(out.display().to_string());
        cfg.outputs.csv = Some(out.with_extension("csv").display().to_string());
        cfg.outputs.plot = Some(out.with_extension("gp").display().to_string());
    }
    if cli.sketch {
        cfg.precision_bits = 64;
        cfg.max_escalations = Some(0);
    }
    Ok(cfg)
}

fn config_hash(cfg: &RunConfig) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

struct Run<'a> {
    cfg: &'a RunConfig,
    command: Command,
    sketch: bool,
    hash: String,
}

impl Run<'_> {
    fn emit<T: Serialize>(&self, result: &T, trace: Vec<u32>) -> Result<()> {
        let out = Output {
            header: Header {
                command: self.command.name(),
                version: env!("CARGO_PKG_VERSION"),
                config_sha256: self.hash.clone(),
                precision_trace: trace,
                sketch: self.sketch,
            },
            result,
        };
        let text = serde_json::to_string_pretty(&out)? + "\n";
        match &self.cfg.outputs.json {
            Some(p) => write_file(p, text.as_bytes()),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn emit_report(&self, rep: &ExperimentReport) -> Result<()> {
        if let Some(p) = &self.cfg.outputs.csv {
            let mut buf = Vec::new();
            rep.write_csv(&mut buf)?;
            write_file(p, &buf)?;
        }
        if let Some(p) = &self.cfg.outputs.plot {
            write_file(p, rep.plot_script().as_bytes())?;
        }
        self.emit(rep, vec![rep.precision_bits])
    }
}

fn write_file(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn build_system(cfg: &RunConfig, degree: usize) -> Result<Arc<NikishinSystem>> {
    let gen = cfg.generator()?;
    let policy = cfg.policy()?.with_env_override()?;
    let mut sys = NikishinSystem::build(&gen, cfg.degree_budget.unwrap_or(0).max(degree), &policy)?;
    if let Some(eps) = cfg.eps_dist {
        sys = sys.with_eps_dist(eps);
    }
    Ok(Arc::new(sys))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let gen = cfg.generator()?;
    let policy = cfg.policy()?.with_env_override()?;
    let run = Run {
        cfg: &cfg,
        command: cli.command,
        sketch: cli.sketch,
        hash: config_hash(&cfg)?,
    };
    // hypotheses are checked before any expensive work
    match cli.command {
        Command::Surface | Command::Ratio | Command::Kappa => {
            gen.require_disjoint_bounded()?;
            cfg.pole_sheet()?;
        }
        Command::Converge | Command::Report => {
            gen.require_bounded()?;
        }
        Command::Zeros => {
            cfg.level()?;
        }
        _ => {}
    }
    match cli.command {
        Command::Moments => {
            let degree = match (&cfg.index, cfg.degree_budget) {
                (_, Some(d)) => d,
                (Some(_), None) => cfg.multi_index()?.required_degree(),
                (None, None) => 16,
            };
            let sys = build_system(&cfg, degree)?;
            #[derive(Serialize)]
            struct Moments<'a> {
                quadrature: &'a nikishin::measures::QuadratureReport,
                table: &'a nikishin::measures::MomentTable,
            }
            run.emit(
                &Moments {
                    quadrature: sys.report(),
                    table: sys.table(),
                },
                vec![sys.bits],
            )
        }
        Command::Solve => {
            let n = cfg.multi_index()?;
            let sys = build_system(&cfg, n.required_degree())?;
            let sol = solve_hp(&sys, &n, &policy)?;
            run.emit(&sol, sol.precision_trace.clone())
        }
        Command::Zeros => {
            let n = cfg.multi_index()?;
            let j = cfg.level()?;
            let sys = build_system(&cfg, n.required_degree())?;
            let sol = solve_hp(&sys, &n, &policy)?;
            let q = form_zeros(&sol, j)?;
            run.emit(&q.roots, sol.precision_trace.clone())
        }
        Command::Surface => {
            let spec = SurfaceSpec::from_generator(&gen, cfg.pole_sheet()?)?;
            let map = build_surface_map(&spec, &policy)?;
            let bvp = bvp_residual_with(&map, cfg.samples.unwrap_or(50))?;
            #[derive(Serialize)]
            struct Surface<'a> {
                map: &'a nikishin::riemann::SurfaceMap,
                bvp_residual: &'a nikishin::riemann::BvpReport,
            }
            run.emit(
                &Surface {
                    map: &map,
                    bvp_residual: &bvp,
                },
                vec![map.precision_bits],
            )
        }
        Command::Converge | Command::Ratio | Command::Kappa | Command::Report => {
            let ladder = cfg.ladder()?;
            let probes = cfg.probes(&gen);
            let sys = system_for_ladder(&gen, &ladder, &policy)?;
            let sys = match cfg.eps_dist {
                Some(eps) => Arc::new(Arc::try_unwrap(sys).map_err(|_| Error::Argument("shared system".into()))?.with_eps_dist(eps)),
                None => sys,
            };
            let rep = match cli.command {
                Command::Converge => run_markov_convergence(&sys, &ladder, &probes, &policy)?,
                Command::Ratio => run_ratio_asymptotics(&sys, &ladder, cfg.pole_sheet()?, &probes, &policy)?,
                Command::Kappa => run_kappa(&sys, &ladder, cfg.pole_sheet()?, &probes, &policy)?,
                _ => zero_structure_report(&sys, &ladder, &policy)?,
            };
            run.emit_report(&rep)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.jobs {
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Error::Argument(format!("cannot start {j} workers: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hp {}: {e}", cli.command.name());
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
