use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::ScenarioConfig;
use super::sensor::generate_synthetic_dataset;
use crate::error::{Error, Result};
use crate::inverse::{self, DatasetBinding, EstimationProblem, ExperimentDataset, DEFAULT_PDF_SIGMA};
use crate::material::{parse_parameters, Parameter};
use crate::oed::{self, PriorBox};
use crate::sensitivity::solve_sensitivities;
use crate::solver::{sample_at, solve_forward, uniform_output_times, Scaling};

const EXIT_DOMAIN: i32 = 1;
const EXIT_NUMERICAL: i32 = 2;
const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "moisture-oed", version, about = "Optimal experiment design for moisture transport coefficients")]
struct Cli {
    /// Scenario file (TOML). Omitted sections use the facility defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for synthetic noise; overrides `sensor.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for design and prior sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward solve of one design; writes the field and optionally a sensor trace.
    Simulate {
        #[arg(long)]
        design: String,
        /// Sensor position, m.
        #[arg(long)]
        sensor_x: Option<f64>,
    },
    /// Sensitivity fields of one design.
    Sensitivity {
        #[arg(long)]
        design: String,
        #[arg(long, default_value = "d0,d1,a")]
        params: String,
    },
    /// Ranks designs and sensor positions by the D-criterion.
    Oed(OedArgs),
    /// Repeats the design search over quasi-random samples of a prior box.
    Sweep {
        #[command(flatten)]
        search: OedArgs,
        #[arg(long, default_value_t = 16)]
        samples: usize,
        /// Relative half-width of the prior box around the configured coefficients.
        #[arg(long, default_value_t = 0.1)]
        spread: f64,
    },
    /// Synthetic sensor record.
    Synth {
        #[arg(long)]
        design: String,
        #[arg(long)]
        sensor_x: Option<f64>,
        /// Output file name inside the output directory.
        #[arg(long)]
        output: Option<String>,
    },
    /// Estimates coefficients from one or more datasets.
    Estimate {
        /// `path[=params]`, e.g. `s2.csv=d0`; without `=params` the dataset informs all.
        #[arg(long = "data", required = true)]
        data: Vec<String>,
    },
    /// Linearized parameter distribution at a sensor.
    Pdf {
        #[arg(long)]
        design: String,
        #[arg(long)]
        sensor_x: Option<f64>,
        #[arg(long, default_value = "d0")]
        param: String,
        /// Measurement standard deviation, relative humidity.
        #[arg(long, default_value_t = DEFAULT_PDF_SIGMA)]
        sigma: f64,
        /// Evaluation time, h; defaults to the time of maximal sensitivity.
        #[arg(long)]
        time_h: Option<f64>,
    },
}

#[derive(Debug, Args)]
struct OedArgs {
    #[arg(long, default_value = "d0")]
    params: String,
    /// Design filter: ids or `single`, `multi`, `all`, `inline`.
    #[arg(long)]
    designs: Option<String>,
}

struct Context {
    cfg: ScenarioConfig,
    out_dir: PathBuf,
}

impl Context {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(BufWriter::new(File::create(self.out_dir.join(name))?))
    }

    fn sensor_x(&self, x: Option<f64>) -> f64 {
        x.unwrap_or(self.cfg.sensor.x)
    }
}

/// Parses `argv` (including the program name), runs the subcommand and returns the
/// process exit code: 0 success, 1 invalid input, 2 solver or optimizer failure,
/// 64 usage error.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let cfg = match &cli.config {
        None => ScenarioConfig::default(),
        Some(path) if !path.exists() => {
            eprintln!("error: config file {} not found\n\nUsage: moisture-oed --config <FILE> <COMMAND>", path.display());
            return EXIT_USAGE;
        }
        Some(path) => match ScenarioConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_DOMAIN;
            }
        },
    };
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let mut ctx = Context { cfg, out_dir };
    if let Some(seed) = cli.seed {
        ctx.cfg.sensor.seed = seed;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DOMAIN;
        }
    };
    match pool.install(|| dispatch(&ctx, &cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical_failure() {
                EXIT_NUMERICAL
            } else {
                EXIT_DOMAIN
            }
        }
    }
}

fn dispatch(ctx: &Context, command: &Command) -> Result<()> {
    match command {
        Command::Simulate { design, sensor_x } => simulate(ctx, design, *sensor_x),
        Command::Sensitivity { design, params } => sensitivity(ctx, design, params),
        Command::Oed(args) => oed_command(ctx, args),
        Command::Sweep { search, samples, spread } => sweep(ctx, search, *samples, *spread),
        Command::Synth { design, sensor_x, output } => synth(ctx, design, *sensor_x, output.as_deref()),
        Command::Estimate { data } => estimate(ctx, data),
        Command::Pdf { design, sensor_x, param, sigma, time_h } => pdf(ctx, design, *sensor_x, param, *sigma, *time_h),
    }
}

fn simulate(ctx: &Context, design_id: &str, sensor_x: Option<f64>) -> Result<()> {
    let model = ctx.cfg.material_model()?;
    let design = ctx.cfg.find_design(design_id)?;
    let grid = ctx.cfg.grid()?;
    let times = uniform_output_times(design.total_duration(), ctx.cfg.numerics.n_times);
    let solution = solve_forward(&model, &design, &grid, &ctx.cfg.tolerances(), &times)?;
    solution.write_csv(ctx.create(&format!("field_{}.csv", design.id))?)?;
    writeln!(ctx.create(&format!("field_{}.json", design.id))?, "{}", solution.metadata_json()?)?;
    println!(
        "design {}: {} output times, {} accepted / {} rejected steps, max RH {:.4}",
        design.id,
        times.len(),
        solution.accepted_step_count,
        solution.rejected_step_count,
        solution.max_relative_humidity()
    );
    if let Some(x) = sensor_x {
        let values = sample_at(&solution, x, &times)?;
        let mut w = ctx.create(&format!("sensor_{}.csv", design.id))?;
        writeln!(w, "t_s,pv_pa,rh")?;
        for (t, v) in times.iter().zip(&values) {
            writeln!(w, "{t},{v},{}", v / solution.scaling.p_ref)?;
        }
    }
    Ok(())
}

fn sensitivity(ctx: &Context, design_id: &str, params: &str) -> Result<()> {
    let model = ctx.cfg.material_model()?;
    let design = ctx.cfg.find_design(design_id)?;
    let params = parse_parameters(params)?;
    let times = uniform_output_times(design.total_duration(), ctx.cfg.numerics.n_times);
    let (_, fields) = solve_sensitivities(
        &model,
        &design,
        &ctx.cfg.grid()?,
        &params,
        &ctx.cfg.tolerances(),
        &times,
        ctx.cfg.numerics.sigma_u,
    )?;
    for f in &fields {
        f.write_csv(ctx.create(&format!("theta_{}_{}.csv", design.id, f.parameter))?)?;
        println!("design {}: max |theta_{}| = {:.4}", design.id, f.parameter, f.max_abs());
    }
    Ok(())
}

fn oed_command(ctx: &Context, args: &OedArgs) -> Result<()> {
    let model = ctx.cfg.material_model()?;
    let designs = ctx.cfg.designs(args.designs.as_deref())?;
    let params = parse_parameters(&args.params)?;
    let scores = oed::search_optimal_plan(&model, &designs, &params, &ctx.cfg.search_options()?)?;
    oed::write_ranking_csv(&scores, ctx.create("oed_ranking.csv")?)?;
    oed::write_curves_csv(&scores, ctx.create("oed_curves.csv")?)?;
    for (rank, s) in scores.iter().enumerate() {
        println!("{:>2}. {:<4} psi = {:.4e}  X = {:.4} m", rank + 1, s.best.plan.design_id, s.best.psi, s.best.x_opt());
    }
    Ok(())
}

fn sweep(ctx: &Context, args: &OedArgs, samples: usize, spread: f64) -> Result<()> {
    if !(0.0..1.0).contains(&spread) {
        return Err(Error::domain("spread must lie in [0, 1)"));
    }
    let model = ctx.cfg.material_model()?;
    let designs = ctx.cfg.designs(args.designs.as_deref())?;
    let params = parse_parameters(&args.params)?;
    let prior = PriorBox::relative(&model.transport, spread);
    let report = oed::prior_sweep(&model, &prior, samples, &designs, &params, &ctx.cfg.search_options()?)?;
    report.write_csv(ctx.create("sweep.csv")?)?;
    writeln!(ctx.create("sweep_summary.json")?, "{}", serde_json::to_string_pretty(&report)?)?;
    for (id, count) in &report.winner_counts {
        println!("{id}: {count}/{samples}");
    }
    Ok(())
}

fn synth(ctx: &Context, design_id: &str, sensor_x: Option<f64>, output: Option<&str>) -> Result<()> {
    let model = ctx.cfg.material_model()?;
    let design = ctx.cfg.find_design(design_id)?;
    let x = ctx.sensor_x(sensor_x);
    let ds = generate_synthetic_dataset(&model, &design, &ctx.cfg.grid()?, &ctx.cfg.tolerances(), x, &ctx.cfg.sensor.model())?;
    let name = output.map(str::to_string).unwrap_or_else(|| format!("dataset_{}.csv", design.id));
    ds.write_csv(ctx.create(&name)?)?;
    println!("wrote {} samples to {}", ds.times.len(), ctx.out_dir.join(name).display());
    Ok(())
}

fn estimate(ctx: &Context, data: &[String]) -> Result<()> {
    let model = ctx.cfg.material_model()?;
    let mut bindings = Vec::new();
    for spec in data {
        let (path, informs) = match spec.split_once('=') {
            Some((p, params)) => (p, parse_parameters(params)?),
            None => (spec.as_str(), Parameter::ALL.to_vec()),
        };
        let file = File::open(Path::new(path)).map_err(|e| Error::domain(format!("cannot open dataset {path}: {e}")))?;
        let dataset = ExperimentDataset::read_csv(BufReader::new(file))?;
        let design = ctx.cfg.find_design(&dataset.design_id)?;
        bindings.push(DatasetBinding { dataset, design, informs });
    }
    let mut problem = EstimationProblem::new(model, bindings);
    problem.grid = ctx.cfg.grid()?;
    problem.tolerances = ctx.cfg.tolerances();
    let report = inverse::estimate(&problem)?;
    writeln!(ctx.create("estimate_report.json")?, "{}", serde_json::to_string_pretty(&report)?)?;
    let mut w = ctx.create("residuals.csv")?;
    writeln!(w, "dataset,design_id,t_s,residual")?;
    for (k, (b, r)) in problem.datasets.iter().zip(&report.residuals).enumerate() {
        for (t, v) in b.dataset.times.iter().zip(r) {
            writeln!(w, "{k},{},{t},{v}", b.dataset.design_id)?;
        }
    }
    let e = &report.estimate;
    println!(
        "d0 = {:.4e}  d1 = {:.4e}  a = {:.4e}  cost {:.3e} -> {:.3e}  ({} forward solves, {})",
        e.d0, e.d1, e.a, report.cost_initial, report.cost_final, report.forward_solve_count, report.termination
    );
    Ok(())
}

fn pdf(ctx: &Context, design_id: &str, sensor_x: Option<f64>, param: &str, sigma: f64, time_h: Option<f64>) -> Result<()> {
    let model = ctx.cfg.material_model()?;
    let design = ctx.cfg.find_design(design_id)?;
    let grid = ctx.cfg.grid()?;
    let parameter: Parameter = param.parse()?;
    let x = ctx.sensor_x(sensor_x);
    let times = uniform_output_times(design.total_duration(), ctx.cfg.numerics.n_times);
    // unit sigma gives the raw derivative ∂u*/∂p*
    let (_, fields) = solve_sensitivities(&model, &design, &grid, &[parameter], &ctx.cfg.tolerances(), &times, 1.0)?;
    let series = fields[0].series_at(x)?;
    let scaling = Scaling::new(&model, grid.length)?;
    let scale = scaling.parameter_scale(parameter);
    let sigma_u = sigma * model.saturation_pressure()? / scaling.p_ref;

    let mut w = ctx.create(&format!("pdf_sd_{}_{}.csv", design.id, parameter))?;
    writeln!(w, "t_s,theta,sd")?;
    for (t, s) in times.iter().zip(&series) {
        let sd = inverse::parameter_sd(sigma_u, *s).map(|v| v * scale).unwrap_or(f64::INFINITY);
        writeln!(w, "{t},{},{sd}", s / sigma_u)?;
    }

    let k = match time_h {
        Some(h) => {
            let t = h * 3600.0;
            if !(0.0..=design.total_duration()).contains(&t) {
                return Err(Error::domain(format!("time {h} h outside the experiment")));
            }
            times.partition_point(|&s| s < t).min(times.len() - 1)
        }
        None => (0..series.len()).fold(0, |b, k| if series[k].abs() > series[b].abs() { k } else { b }),
    };
    let p_nominal = model.transport.get(parameter);
    let sd = inverse::parameter_sd(sigma_u, series[k])? * scale;
    let queries: Vec<f64> = (0..=200).map(|i| p_nominal + sd * (-4.0 + 8.0 * i as f64 / 200.0)).collect();
    let curve = inverse::parameter_pdf_curve(sigma_u, series[k] / scale, p_nominal, &queries)?;
    let mut w = ctx.create(&format!("pdf_{}_{}.csv", design.id, parameter))?;
    writeln!(w, "p,pdf,cdf")?;
    for (p, d, c) in curve {
        writeln!(w, "{p},{d},{c}")?;
    }
    println!(
        "{parameter} at x = {x} m, t = {:.2} h: mean {:.4e}, sd {:.4e} ({:.2}%)",
        times[k] / 3600.0,
        p_nominal,
        sd,
        100.0 * sd / p_nominal.abs()
    );
    Ok(())
}
