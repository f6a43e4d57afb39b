//! `loracap`: coverage curves, Monte Carlo checks and cell simulations.

mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use lora_capacity::airtime::pure_aloha_throughput;
use lora_capacity::analytic::{coverage_probability, TypicalNode};
use lora_capacity::montecarlo::estimate_coverage;
use lora_capacity::scenario::{ConfigError, RawScenario};
use lora_capacity::simulator::{multichannel_projection, sweep, SimError, SweepResult};
use lora_capacity::{CollisionModel, Scenario};

use output::{fmt_num, RunManifest, Table};

const CONFIG_DIR_ENV: &str = "LORACAP_CONFIG_DIR";

#[derive(Parser)]
#[command(name = "loracap", version, about = "LoRaWAN single-gateway capacity models")]
struct Cli {
    /// Scenario file; each command has a default in the config directory.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Overrides `simulation.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides `simulation.replications`.
    #[arg(long, global = true)]
    replications: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic H1, Q1, C1 and per-ring capture over a distance grid.
    Coverage {
        /// `start:stop:step` in metres, or a comma-separated list.
        #[arg(long, default_value = "10:3000:10")]
        distances: String,
        /// Mean node counts; one CSV per entry.
        #[arg(long, value_delimiter = ',')]
        nodes: Option<Vec<f64>>,
        /// Adds Monte Carlo C1 and standard-error columns.
        #[arg(long)]
        validate: bool,
        /// Monte Carlo trials per point (default from the scenario).
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Pure-ALOHA cell simulation swept over offered load.
    Simulate {
        #[arg(long, value_enum, ignore_case = true)]
        case: Case,
        /// Collision model (default from the scenario).
        #[arg(long)]
        model: Option<CollisionModel>,
        /// Offered loads in erlang (default from the scenario).
        #[arg(long, value_delimiter = ',')]
        loads: Option<Vec<f64>>,
        /// Run IIC on the single-SF case anyway.
        #[arg(long)]
        force: bool,
    },
    /// Analytic against Monte Carlo coverage on a distance by node-count grid.
    Mc {
        #[arg(long, value_delimiter = ',', default_value = "300,900,1500,2100,2700")]
        distances: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "250,500,2500")]
        nodes: Vec<f64>,
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Regenerates the data behind a figure from the shipped scenarios.
    Reproduce {
        #[arg(value_enum, ignore_case = true)]
        figure: Figure,
    },
    /// Loads and validates a scenario, printing its configuration digest.
    ValidateConfig,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Case {
    N1,
    N2,
}

impl Case {
    fn file(self) -> &'static str {
        match self {
            Case::N1 => "n1.toml",
            Case::N2 => "n2.toml",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Case::N1 => "n1",
            Case::N2 => "n2",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig2,
    Fig3,
    Fig4,
}

/// Failure that maps to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(SimError::Config(_) | SimError::Airtime(_)) = cause.downcast_ref::<SimError>() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn config_dir() -> PathBuf {
    let dir = std::env::var_os(CONFIG_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs"));
    dir.canonicalize().unwrap_or(dir)
}

/// A scenario after command-line overrides, with its canonical text.
struct Loaded {
    path: PathBuf,
    raw: RawScenario,
    scenario: Scenario,
}

impl Loaded {
    fn manifest(&self, command: &str, output: &Path) -> RunManifest {
        RunManifest::new(
            command,
            &self.path,
            output,
            self.raw.simulation.seed,
            &self.raw.to_canonical_toml(),
        )
    }
}

struct Globals {
    scenario: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
    replications: Option<usize>,
}

impl Globals {
    fn load(&self, default_file: &str, model: Option<CollisionModel>) -> Result<Loaded> {
        let path = self
            .scenario
            .clone()
            .unwrap_or_else(|| config_dir().join(default_file));
        self.load_path(path, model)
    }

    fn load_path(&self, path: PathBuf, model: Option<CollisionModel>) -> Result<Loaded> {
        let mut raw = RawScenario::load(&path)?;
        if let Some(seed) = self.seed {
            raw.simulation.seed = seed;
        }
        if let Some(r) = self.replications {
            raw.simulation.replications = r;
        }
        if let Some(m) = model {
            raw.simulation.collision_model = m;
        }
        let scenario = Scenario::from_raw(&raw)?;
        Ok(Loaded { path, raw, scenario })
    }

    fn out_dir(&self, sub: Option<&str>) -> Result<PathBuf> {
        let dir = match sub {
            Some(s) => self.out.join(s),
            None => self.out.clone(),
        };
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    let g = Globals {
        scenario: cli.scenario,
        seed: cli.seed,
        out: cli.out,
        replications: cli.replications,
    };
    match cli.command {
        Command::Coverage {
            distances,
            nodes,
            validate,
            trials,
        } => {
            let loaded = g.load("coverage.toml", None)?;
            let grid = parse_grid(&distances)?;
            let nodes = nodes.unwrap_or_else(|| vec![loaded.scenario.topology.total_mean_nodes()]);
            let trials = validate.then(|| trials.unwrap_or(loaded.scenario.montecarlo.trials));
            let dir = g.out_dir(None)?;
            for &n in &nodes {
                let table = coverage_table(&loaded.scenario, n, &grid, trials)?;
                let path = dir.join(format!("coverage_n{}.csv", fmt_num(n)));
                write_with_manifest(&table, &path, &loaded, "coverage")?;
                println!("wrote {} ({} rows)", path.display(), table.len());
            }
            Ok(())
        }
        Command::Simulate {
            case,
            model,
            loads,
            force,
        } => {
            let loaded = g.load(case.file(), model)?;
            let model = loaded.scenario.simulation.collision_model;
            if case == Case::N1 && model == CollisionModel::Iic && !force {
                return Err(UsageError(
                    "IIC is identical to IC when every device uses one SF; pass --force to run it anyway".into(),
                )
                .into());
            }
            let loads = loads.unwrap_or_else(|| loaded.scenario.traffic.offered_loads.clone());
            let result = sweep(&loaded.scenario, &loads)?;
            let table = simulate_table(&result);
            let path = g
                .out_dir(None)?
                .join(format!("simulate_{}_{}.csv", case.label(), model.label().to_lowercase()));
            write_with_manifest(&table, &path, &loaded, "simulate")?;
            let best = result.max_throughput();
            println!(
                "wrote {}; max S = {} E at G = {} (PDR {})",
                path.display(),
                fmt_num(best.throughput.mean),
                fmt_num(best.offered),
                fmt_num(best.pdr.mean)
            );
            Ok(())
        }
        Command::Mc {
            distances,
            nodes,
            trials,
        } => {
            let loaded = g.load("coverage.toml", None)?;
            let trials = trials.unwrap_or(loaded.scenario.montecarlo.trials);
            let (table, agree, total) = mc_table(&loaded.scenario, &distances, &nodes, trials)?;
            let path = g.out_dir(None)?.join("mc.csv");
            write_with_manifest(&table, &path, &loaded, "mc")?;
            println!("wrote {}; {agree}/{total} points within 3 standard errors", path.display());
            Ok(())
        }
        Command::Reproduce { figure } => reproduce(&g, figure),
        Command::ValidateConfig => {
            let loaded = g.load("coverage.toml", None)?;
            println!(
                "{}: ok, sha256 {}",
                loaded.path.display(),
                output::digest(&loaded.raw.to_canonical_toml())
            );
            Ok(())
        }
    }
}

fn write_with_manifest(table: &Table, path: &Path, loaded: &Loaded, command: &str) -> Result<()> {
    table.write_csv(path)?;
    loaded.manifest(command, path).write_beside(path)?;
    Ok(())
}

/// `start:stop:step` (inclusive, by integer step count) or `a,b,c`.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || UsageError(format!("invalid distance grid '{spec}'"));
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [start, stop, step] = parts[..] else {
            return Err(bad().into());
        };
        if !(step > 0.0) || stop < start {
            return Err(bad().into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| start + k as f64 * step).collect()
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?
    };
    if grid.is_empty() || grid.iter().any(|d| !(*d > 0.0)) {
        return Err(UsageError(format!("distances must be positive: '{spec}'")).into());
    }
    Ok(grid)
}

fn with_nodes(scenario: &Scenario, mean_nodes: f64) -> Scenario {
    let mut s = scenario.clone();
    s.topology = s.topology.with_mean_nodes(mean_nodes);
    s
}

fn coverage_table(scenario: &Scenario, mean_nodes: f64, grid: &[f64], mc_trials: Option<u64>) -> Result<Table> {
    let s = with_nodes(scenario, mean_nodes);
    let rings = s.topology.num_rings();
    let mut header: Vec<String> = ["distance_m", "sf", "h1", "q1", "c1"].map(String::from).to_vec();
    header.extend((1..=rings).map(|j| format!("p_sir_ring{j}")));
    if mc_trials.is_some() {
        header.extend(["c1_mc", "c1_mc_se"].map(String::from));
    }
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(k, &d)| -> Result<Vec<String>> {
            let node = TypicalNode::in_ring(d, &s.topology)?;
            let c = coverage_probability(&node, &s)?;
            let mut row = vec![fmt_num(d), node.sf.value().to_string(), fmt_num(c.h1), fmt_num(c.q1), fmt_num(c.c1)];
            row.extend(c.per_ring.iter().map(|&p| fmt_num(p)));
            if let Some(trials) = mc_trials {
                let est = estimate_coverage(&node, &s, trials, s.simulation.seed.wrapping_add(k as u64))?;
                row.push(fmt_num(est.c1.mean));
                row.push(fmt_num(est.c1.standard_error));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(header);
    for r in rows {
        table.push(r);
    }
    Ok(table)
}

fn mc_table(scenario: &Scenario, distances: &[f64], nodes: &[f64], trials: u64) -> Result<(Table, usize, usize)> {
    let mut table = Table::new([
        "mean_nodes",
        "distance_m",
        "sf",
        "c1_analytic",
        "c1_mc",
        "c1_mc_se",
        "z",
        "h1_mc",
        "q1_mc",
    ]);
    let mut agree = 0;
    let mut seed = scenario.simulation.seed;
    for &n in nodes {
        let s = with_nodes(scenario, n);
        for &d in distances {
            let node = TypicalNode::in_ring(d, &s.topology)?;
            let analytic = coverage_probability(&node, &s)?.c1;
            let est = estimate_coverage(&node, &s, trials, seed)?;
            seed = seed.wrapping_add(1);
            let z = est.c1.z_score(analytic);
            if z.abs() <= 3.0 {
                agree += 1;
            }
            table.push(vec![
                fmt_num(n),
                fmt_num(d),
                node.sf.value().to_string(),
                fmt_num(analytic),
                fmt_num(est.c1.mean),
                fmt_num(est.c1.standard_error),
                fmt_num(z),
                fmt_num(est.h1.mean),
                fmt_num(est.q1.mean),
            ]);
        }
    }
    let total = nodes.len() * distances.len();
    Ok((table, agree, total))
}

fn simulate_table(result: &SweepResult) -> Table {
    let mut table = Table::new([
        "offered_load",
        "transmitted_load",
        "throughput_mean",
        "throughput_ci95",
        "pdr_mean",
        "pdr_ci95",
        "airtime_throughput_mean",
        "tx_count",
        "rx_count",
        "aloha_theory",
    ]);
    for p in &result.points {
        table.push(vec![
            fmt_num(p.offered),
            fmt_num(p.transmitted_load.mean),
            fmt_num(p.throughput.mean),
            fmt_num(p.throughput.ci95),
            fmt_num(p.pdr.mean),
            fmt_num(p.pdr.ci95),
            fmt_num(p.airtime_throughput.mean),
            p.tx_count.to_string(),
            p.rx_count.to_string(),
            fmt_num(pure_aloha_throughput(p.offered)),
        ]);
    }
    table
}

const FIG2_NODES: [f64; 4] = [250.0, 500.0, 1000.0, 2500.0];
const PROJECTION_CHANNELS: usize = 5;

/// Curves shown in the throughput and delivery figures.
const CURVES: [(Case, CollisionModel); 5] = [
    (Case::N1, CollisionModel::Bp),
    (Case::N1, CollisionModel::Ic),
    (Case::N2, CollisionModel::Bp),
    (Case::N2, CollisionModel::Ic),
    (Case::N2, CollisionModel::Iic),
];

fn reproduce(g: &Globals, figure: Figure) -> Result<()> {
    if g.scenario.is_some() {
        return Err(UsageError("reproduce always uses the shipped scenarios; drop --scenario".into()).into());
    }
    match figure {
        Figure::Fig2 => {
            let dir = g.out_dir(Some("fig2"))?;
            let loaded = g.load("coverage.toml", None)?;
            let grid = parse_grid("10:3000:10")?;
            for n in FIG2_NODES {
                let table = coverage_table(&loaded.scenario, n, &grid, None)?;
                let path = dir.join(format!("coverage_n{}.csv", fmt_num(n)));
                write_with_manifest(&table, &path, &loaded, "reproduce fig2")?;
                table.write_dat(&path.with_extension("dat"))?;
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Figure::Fig3 | Figure::Fig4 => {
            let name = if matches!(figure, Figure::Fig3) { "fig3" } else { "fig4" };
            let dir = g.out_dir(Some(name))?;
            let mut sweeps = Vec::new();
            let mut last = None;
            for (case, model) in CURVES {
                let loaded = g.load(case.file(), Some(model))?;
                let loads = loaded.scenario.traffic.offered_loads.clone();
                sweeps.push(sweep(&loaded.scenario, &loads)?);
                last = Some(loaded);
            }
            let loads: Vec<f64> = sweeps[0].points.iter().map(|p| p.offered).collect();
            if sweeps.iter().any(|s| s.points.iter().map(|p| p.offered).ne(loads.iter().copied())) {
                return Err(UsageError("shipped scenarios disagree on the offered-load grid".into()).into());
            }
            let curve_names: Vec<String> = CURVES
                .iter()
                .map(|(c, m)| format!("{}_{}", c.label(), m.label().to_lowercase()))
                .collect();
            let mut header = vec!["offered_load".to_string()];
            let table = if matches!(figure, Figure::Fig3) {
                header.push("aloha_theory".into());
                header.extend(curve_names.iter().cloned());
                header.push(format!("n1_ic_x{PROJECTION_CHANNELS}"));
                let mut t = Table::new(header);
                for (k, &gl) in loads.iter().enumerate() {
                    let mut row = vec![fmt_num(gl), fmt_num(pure_aloha_throughput(gl))];
                    row.extend(sweeps.iter().map(|s| fmt_num(s.points[k].throughput.mean)));
                    let proj = multichannel_projection(&sweeps[1].points[k], PROJECTION_CHANNELS)?;
                    row.push(fmt_num(proj.throughput.mean));
                    t.push(row);
                }
                t
            } else {
                header.extend(curve_names.iter().cloned());
                let mut t = Table::new(header);
                for (k, &gl) in loads.iter().enumerate() {
                    let mut row = vec![fmt_num(gl)];
                    row.extend(sweeps.iter().map(|s| fmt_num(s.points[k].pdr.mean)));
                    t.push(row);
                }
                t
            };
            let path = dir.join(format!("{name}.csv"));
            let loaded = last.expect("at least one curve");
            write_with_manifest(&table, &path, &loaded, &format!("reproduce {name}"))?;
            table.write_dat(&path.with_extension("dat"))?;
            println!("wrote {}", dir.display());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("10:30:10").unwrap(), vec![10.0, 20.0, 30.0]);
        assert_eq!(parse_grid("10:3000:10").unwrap().len(), 300);
        assert_eq!(parse_grid("5, 7").unwrap(), vec![5.0, 7.0]);
        assert!(parse_grid("0:10:1").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("a,b").is_err());
    }
}
