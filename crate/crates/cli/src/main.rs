mod init;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ctriv_core::harness::{
    emit_results, read_table_csv, run_monte_carlo, Benchmark, BenchmarkSpec, McConfig,
    McResultTable, OutputFormat, Pipeline,
};
use ctriv_core::lti::SubsystemOrder;
use ctriv_core::riv::{riv_solve, EstimatorOptions, SampledDataset};
use ctriv_core::structured::{modal_init, project, ModalMap, ModalProjection, ProjectOptions};
use ctriv_core::{AdditiveModel, DiscreteController, Error, ErrorKind, Result, RivResult};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

#[derive(Parser)]
#[command(
    name = "ctriv",
    version,
    about = "Continuous-time RIV identification of additive MIMO models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one benchmark record and write it as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the controller JSON of a closed-loop benchmark.
        #[arg(long)]
        controller_out: Option<PathBuf>,
    },
    /// Estimate an additive model from a CSV record.
    Identify {
        #[arg(long)]
        data: PathBuf,
        /// JSON list of subsystem orders, e.g. `[{"n":2,"m":0}]`.
        #[arg(long)]
        orders: PathBuf,
        #[arg(long = "loop", value_enum, default_value_t = LoopArg::Open)]
        loop_mode: LoopArg,
        #[arg(long)]
        controller: Option<PathBuf>,
        /// Starting model JSON; overrides the built-in initializer.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project an `identify` result onto a structured parametrization.
    Project {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long, value_enum, default_value_t = MapArg::Modal)]
        map: MapArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo sweep and write the MSE table.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for the log-log SVG plot.
        #[arg(long)]
        plots: Option<PathBuf>,
    },
    /// Render an MSE table as a log-log SVG.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LoopArg {
    Open,
    Closed,
}

#[derive(Clone, Copy, ValueEnum)]
enum MapArg {
    Modal,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    #[serde(default)]
    benchmark: BenchmarkSpec,
    n: usize,
}

fn default_pipelines() -> Vec<Pipeline> {
    vec![Pipeline::Unstructured, Pipeline::Structured]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MonteCarloConfig {
    #[serde(default)]
    benchmark: BenchmarkSpec,
    #[serde(default = "default_mc")]
    mc: McConfig,
    #[serde(default = "default_pipelines")]
    pipelines: Vec<Pipeline>,
}

fn default_mc() -> McConfig {
    McConfig::desk(0)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn simulate(config: &Path, seed: u64, out: &Path, controller_out: Option<&Path>) -> Result<()> {
    let cfg: SimulateConfig = read_json(config)?;
    let bench = Benchmark::new(cfg.benchmark)?;
    if let Some(p) = controller_out {
        let ctrl = bench.controller.as_ref().ok_or_else(|| {
            Error::InvalidArgument("open-loop benchmark has no controller".into())
        })?;
        std::fs::write(p, ctrl.to_json()?)?;
    }
    let real = bench.simulate(cfg.n, &mut ChaCha8Rng::seed_from_u64(seed))?;
    real.dataset.write_csv(File::create(out)?)?;
    eprintln!(
        "wrote {} samples, noise scale {:.4e}",
        cfg.n, real.noise_scale
    );
    Ok(())
}

fn identify(
    data: &Path,
    orders: &Path,
    loop_mode: LoopArg,
    controller: Option<&Path>,
    init_path: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let ds = SampledDataset::read_csv(BufReader::new(File::open(data)?))?;
    let orders: Vec<SubsystemOrder> = read_json(orders)?;
    let model0 = match init_path {
        Some(p) => {
            let m = AdditiveModel::from_json(&read_text(p)?)?;
            if m.structure().orders != orders {
                return Err(Error::InvalidArgument(
                    "initial model does not match the orders".into(),
                ));
            }
            m
        }
        None => init::initial_model(&orders, &ds)?,
    };
    let opts = match (loop_mode, controller) {
        (LoopArg::Open, None) => EstimatorOptions::default(),
        (LoopArg::Open, Some(_)) => {
            return Err(Error::InvalidArgument(
                "--controller only applies with --loop closed".into(),
            ))
        }
        (LoopArg::Closed, Some(p)) => {
            EstimatorOptions::closed(DiscreteController::from_json(&read_text(p)?)?)
        }
        (LoopArg::Closed, None) => return Err(Error::MissingController),
    };
    // The closed-loop instrument needs a start the controller stabilizes; the
    // least-squares start rarely is, so it is refined in open mode first.
    let model0 = if init_path.is_none() && matches!(loop_mode, LoopArg::Closed) {
        riv_solve(&model0, &ds, &EstimatorOptions::default())?.model
    } else {
        model0
    };
    let res = riv_solve(&model0, &ds, &opts)?;
    std::fs::write(out, res.to_json()?)?;
    eprintln!("{} iterations, converged {}", res.iterations, res.converged);
    Ok(())
}

fn project_estimate(estimate: &Path, map: MapArg, out: &Path) -> Result<()> {
    let res = RivResult::from_json(&read_text(estimate)?)?;
    let (n_y, n_u) = (res.model.n_y(), res.model.n_u());
    let doc = match map {
        MapArg::Modal => {
            let rho0 = modal_init(&res.model)?;
            let modal = ModalMap::new(n_y, n_u, res.model.k());
            let pr = project(
                &res.model.flatten(),
                &res.acov,
                &modal,
                &rho0.to_vector(),
                &ProjectOptions::default(),
            )?;
            if pr.singular_jacobian {
                return Err(Error::SingularJacobian);
            }
            ModalProjection::new(&pr, n_y, n_u)?.to_json()?
        }
    };
    std::fs::write(out, doc)?;
    Ok(())
}

fn montecarlo(config: &Path, out: &Path, plots: Option<&Path>) -> Result<()> {
    let cfg: MonteCarloConfig = read_json(config)?;
    let bench = Benchmark::new(cfg.benchmark)?;
    let mut table = McResultTable::default();
    for p in &cfg.pipelines {
        table.merge(run_monte_carlo(&bench, &cfg.mc, *p)?);
    }
    emit_results(&table, OutputFormat::Csv, out)?;
    if let Some(dir) = plots {
        std::fs::create_dir_all(dir)?;
        emit_results(&table, OutputFormat::SvgLineplot, &dir.join("mse.svg"))?;
    }
    for s in &table.stats {
        eprintln!(
            "{} N={}: {} runs, {} failed, {} not converged",
            s.method, s.n, s.runs, s.failed, s.not_converged
        );
    }
    Ok(())
}

fn plot(input: &Path, out: &Path) -> Result<()> {
    let table = read_table_csv(BufReader::new(File::open(input)?))?;
    emit_results(&table, OutputFormat::SvgLineplot, out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            out,
            controller_out,
        } => simulate(&config, seed, &out, controller_out.as_deref()),
        Command::Identify {
            data,
            orders,
            loop_mode,
            controller,
            init,
            out,
        } => identify(
            &data,
            &orders,
            loop_mode,
            controller.as_deref(),
            init.as_deref(),
            &out,
        ),
        Command::Project { estimate, map, out } => project_estimate(&estimate, map, &out),
        Command::Montecarlo { config, out, plots } => montecarlo(&config, &out, plots.as_deref()),
        Command::Plot { input, out } => plot(&input, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            match e.kind() {
                ErrorKind::Numeric => ExitCode::from(3),
                ErrorKind::Validation | ErrorKind::Io => ExitCode::from(2),
            }
        }
    }
}
