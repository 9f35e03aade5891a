use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use quadrant_extinction::characteristics::{make_path, sample_path};
use quadrant_extinction::grid::{solve_grid, ClosurePolicy, SolveMethod, SolveOptions};
use quadrant_extinction::harness::{compare, run_experiment, ExperimentSpec};
use quadrant_extinction::io::{fmt_g12, read_field_csv};
use quadrant_extinction::montecarlo::{self, McConfig};
use quadrant_extinction::{greens, ModelParams, State};

/// Extinction probabilities of a two-type population walk on the quadrant.
#[derive(Parser)]
#[command(name = "qext", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Model {
    /// Birth rate (must exceed d)
    #[arg(long, default_value_t = 3.0)]
    r: f64,
    /// Death rate
    #[arg(long, default_value_t = 2.0)]
    d: f64,
}

impl Model {
    fn params(&self) -> anyhow::Result<ModelParams> {
        Ok(ModelParams::new(self.r, self.d)?)
    }
}

#[derive(Args)]
struct Output {
    /// Directory for the CSV output; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn writer(&self, file: &str) -> anyhow::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(file);
                let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                Box::new(BufWriter::new(f))
            }
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve the truncated recurrence on {1..N}^2 and print i,j,p
    Grid {
        #[command(flatten)]
        model: Model,
        #[arg(short = 'N', long = "n", default_value_t = 50)]
        n: usize,
        /// sweep, banded or value-iteration
        #[arg(long, default_value = "sweep")]
        method: SolveMethod,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        /// asymptotic, lower, upper
        #[arg(long, default_value = "asymptotic")]
        closure: String,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo estimate at one start (or a lattice with --lattice)
    Mc {
        #[command(flatten)]
        model: Model,
        #[arg(long, default_value_t = 1)]
        i: u32,
        #[arg(long, default_value_t = 1)]
        j: u32,
        /// Number of paths
        #[arg(short = 'M', long = "M", default_value_t = montecarlo::DEFAULT_PATHS)]
        paths: u64,
        /// Horizon in steps
        #[arg(short = 'T', long = "T", default_value_t = montecarlo::DEFAULT_HORIZON)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Estimate every cell of {1..n}^2 instead of (i, j)
        #[arg(long)]
        lattice: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Generating function by quadrature and by series on a lattice of points
    Greens {
        #[command(flatten)]
        model: Model,
        /// Grid size supplying p_{i,1} and the series
        #[arg(short = 'N', long = "n", default_value_t = 50)]
        n: usize,
        /// Coordinates used for both x and y
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5")]
        points: Vec<f64>,
        #[arg(long, default_value_t = 1e-8)]
        quad_tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Sample the characteristic curve through (x0, y0) on [0, s0]
    Characteristics {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        x0: f64,
        #[arg(long)]
        y0: f64,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Compare two i,j,value CSV files on {1..n}^2
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Value column of the first file
        #[arg(long, default_value = "p")]
        a_column: String,
        /// Value column of the second file
        #[arg(long, default_value = "p")]
        b_column: String,
        /// Side of the compared sub-lattice; whole common lattice if omitted
        #[arg(long)]
        lattice: Option<usize>,
        /// Also write per-cell errors
        #[arg(long)]
        cells: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Run an experiment from a preset and/or a key = value config file
    Experiment {
        /// r3 or r2002
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Further overrides as key=value
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_closure(s: &str) -> anyhow::Result<ClosurePolicy> {
    Ok(match s {
        "asymptotic" => ClosurePolicy::Asymptotic,
        "lower" => ClosurePolicy::LowerBound,
        "upper" => ClosurePolicy::UpperBound,
        other => match other.parse::<f64>() {
            Ok(c) => ClosurePolicy::Constant(c),
            Err(_) => bail!("unknown closure '{other}'"),
        },
    })
}

fn load_spec(
    preset: Option<&str>,
    config: Option<&Path>,
    overrides: &[(String, String)],
) -> anyhow::Result<ExperimentSpec> {
    let mut text = String::new();
    if let Some(p) = preset {
        text.push_str(&format!("preset = {p}\n"));
    }
    if let Some(path) = config {
        let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if preset.is_some() && body.lines().any(|l| l.trim_start().starts_with("preset")) {
            bail!("preset given both on the command line and in {}", path.display());
        }
        text.push_str(&body);
    }
    let mut spec = ExperimentSpec::parse(&text)?;
    for (k, v) in overrides {
        spec.set(k, v)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Grid { model, n, method, tol, closure, output } => {
            let options = SolveOptions {
                method,
                tol,
                closure: parse_closure(&closure)?,
                ..SolveOptions::default()
            };
            let sol = solve_grid(&model.params()?, n, &options)?;
            eprintln!(
                "solved N = {n} with {} in {} iterations, residual {:e}",
                sol.method, sol.iterations, sol.residual
            );
            let mut w = output.writer("grid.csv")?;
            sol.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Mc { model, i, j, paths, horizon, seed, lattice, output } => {
            let params = model.params()?;
            let rows = match lattice {
                Some(n) => montecarlo::estimate_lattice(&params, n, paths, horizon, seed)?,
                None => {
                    let config = McConfig::new(paths, horizon, seed, State::new(i, j))?;
                    vec![montecarlo::estimate(&params, &config)?]
                }
            };
            let mut w = output.writer("mc.csv")?;
            montecarlo::write_csv(&mut w, &rows)?;
            w.flush()?;
        }
        Command::Greens { model, n, points, quad_tol, output } => {
            let sol = solve_grid(&model.params()?, n, &SolveOptions::default())?;
            let mut rows = Vec::new();
            for &x in &points {
                for &y in &points {
                    rows.push(greens::compare_at(&sol, x, y, quad_tol)?);
                }
            }
            let mut w = output.writer("greens.csv")?;
            greens::write_csv(&mut w, &rows)?;
            w.flush()?;
        }
        Command::Characteristics { model, x0, y0, samples, output } => {
            let path = make_path(&model.params()?, x0, y0)?;
            let mut w = output.writer("characteristics.csv")?;
            writeln!(w, "s,x,y,IF")?;
            for p in sample_path(&path, samples)? {
                writeln!(
                    w,
                    "{},{},{},{}",
                    fmt_g12(p.s),
                    fmt_g12(p.x),
                    fmt_g12(p.y),
                    fmt_g12(p.integrating_factor)
                )?;
            }
            w.flush()?;
        }
        Command::Compare { a, b, a_column, b_column, lattice, cells, output } => {
            let fa = read_field_csv(&a, &a_column)?;
            let fb = read_field_csv(&b, &b_column)?;
            let n = lattice.unwrap_or(fa.n().min(fb.n()));
            let report = compare(&fa, &fb, n)?;
            let mut w = output.writer("comparison.csv")?;
            report.write_summary_csv(&mut w)?;
            w.flush()?;
            if cells {
                let mut w = output.writer("comparison_cells.csv")?;
                report.write_cells_csv(&mut w)?;
                w.flush()?;
            }
        }
        Command::Experiment { preset, config, r, d, seed, overrides, out } => {
            let mut pairs = Vec::new();
            for o in &overrides {
                let (k, v) = o.split_once('=').with_context(|| format!("override '{o}' is not key=value"))?;
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
            for (k, v) in [("r", r.map(|x| x.to_string())), ("d", d.map(|x| x.to_string())), ("seed", seed.map(|x| x.to_string()))] {
                if let Some(v) = v {
                    pairs.push((k.to_string(), v));
                }
            }
            let spec = load_spec(preset.as_deref(), config.as_deref(), &pairs)?;
            let outcome = run_experiment(&spec, &out)?;
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if let Some(fit) = outcome.fit_reference {
                eprintln!(
                    "log rqe vs N (reference N = {}): slope {:.4}, R^2 {:.4}",
                    spec.reference_n, fit.slope, fit.r_squared
                );
            }
            if let Some(c) = &outcome.comparison {
                eprintln!("mc vs grid mean absolute error {:.3e}", c.absolute.mean);
            }
        }
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run(Cli::parse())
}
