use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use relaynet_core::nn::Mlp;

use crate::error::{HarnessError, Result};
use crate::experiments::{
    baseline_table, curve_table, episode_table, greedy_eval, run_baselines, run_curves, run_sweep_d0, run_sweep_users,
    sweep_table,
};
use crate::settings::{Scenario, Settings};
use crate::svg::LineChart;
use crate::table::Table;

#[derive(Debug, Parser)]
#[command(name = "relaynet", version, about = "DQN downlink power control with UAV relays")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Flat `key = value` settings file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Training episodes per run.
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    /// Sweep D0 every 100 m and K over 1..=8.
    #[arg(long, global = true)]
    pub full_grid: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train per seed; write training and greedy-testing curves and a checkpoint.
    Train,
    /// Greedy-evaluate a saved checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Average rate against the CEU threshold D0 and UAV altitude.
    SweepD0,
    /// Average rate against users per cell.
    SweepUsers,
    /// DQN against max-power, random, no-UAV and all-UAV variants.
    Baselines,
    /// Render columns of a CSV file as an SVG line chart.
    Plot {
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        /// Split rows into one series per value of this column.
        #[arg(long)]
        series_by: Option<String>,
        /// Defaults to the input path with an `.svg` extension.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Command {
    fn scenario(&self) -> Scenario {
        match self {
            Command::Train | Command::Plot { .. } => Scenario::TrainingCurve,
            Command::Eval { .. } => Scenario::TestingCurve,
            Command::SweepD0 => Scenario::SweepD0,
            Command::SweepUsers => Scenario::SweepUsers,
            Command::Baselines => Scenario::BaselineCompare,
        }
    }
}

impl CommonArgs {
    /// Config file (or defaults) with command-line overrides applied.
    pub fn settings(&self, scenario: Scenario) -> Result<Settings> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        s.experiment.scenario = scenario;
        if let Some(seed) = self.seed {
            s.experiment.seeds = vec![seed];
            s.network.seed = seed;
        }
        if let Some(out) = &self.out {
            s.experiment.out_dir = out.clone();
        }
        if let Some(e) = self.episodes {
            s.agent.episodes = e;
        }
        if self.full_grid {
            s.experiment.use_full_grid();
        }
        s.validate()?;
        Ok(s)
    }
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let path = self.dir.join(name);
        table.write_csv(&path)?;
        self.written.push(path);
        Ok(())
    }

    fn svg(&mut self, name: &str, chart: &LineChart) -> Result<()> {
        let path = self.dir.join(name);
        chart.write(&path)?;
        self.written.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

fn chart(
    table: &Table,
    title: &str,
    x: &str,
    ys: &[&str],
    series_by: Option<&str>,
    y_label: &str,
) -> Result<LineChart> {
    let mut c = LineChart::from_table(table, x, ys, series_by)?;
    c.title = title.to_string();
    c.y_label = y_label.to_string();
    Ok(c)
}

const RATE_LABEL: &str = "average rate (bps/Hz)";
const GROUP_RATES: [&str; 3] = ["rate_all", "rate_ccu", "rate_ceu"];

/// Runs one command and returns the files it wrote.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    if let Command::Plot {
        input,
        x,
        y,
        series_by,
        output,
    } = &cli.command
    {
        let table = Table::read_csv(input)?;
        let ys: Vec<&str> = y.iter().map(String::as_str).collect();
        let mut c = LineChart::from_table(&table, x, &ys, series_by.as_deref())?;
        c.title = input
            .file_stem()
            .map_or(String::new(), |s| s.to_string_lossy().into_owned());
        let path = output.clone().unwrap_or_else(|| input.with_extension("svg"));
        c.write(&path)?;
        return Ok(vec![path]);
    }

    let settings = cli.common.settings(cli.command.scenario())?;
    let mut out = Output::new(&settings.experiment.out_dir)?;
    match &cli.command {
        Command::Train => {
            for run in run_curves(&settings)? {
                let s = run.seed;
                let training = curve_table(&run.training.records);
                let episodes = episode_table(&run.training.records);
                let testing = curve_table(&run.testing);
                out.csv(&format!("training_seed{s}.csv"), &training)?;
                out.csv(&format!("training_seed{s}_episodes.csv"), &episodes)?;
                out.csv(&format!("testing_seed{s}.csv"), &testing)?;
                out.text(&format!("model_seed{s}.ckpt"), &run.model.to_checkpoint())?;
                let c = chart(
                    &episodes,
                    &format!("training, seed {s}"),
                    "episode",
                    &GROUP_RATES,
                    None,
                    RATE_LABEL,
                )?;
                out.svg(&format!("training_seed{s}.svg"), &c)?;
                let c = chart(
                    &testing,
                    &format!("testing, seed {s}"),
                    "global_step",
                    &GROUP_RATES,
                    None,
                    RATE_LABEL,
                )?;
                out.svg(&format!("testing_seed{s}.svg"), &c)?;
            }
        }
        Command::Eval { checkpoint } => {
            let text = std::fs::read_to_string(checkpoint).map_err(|e| HarnessError::io(checkpoint, e))?;
            let model = Mlp::from_checkpoint(&text)?;
            for &s in &settings.experiment.seeds {
                let testing = curve_table(&greedy_eval(&settings, &settings.network, &model, s)?);
                out.csv(&format!("testing_seed{s}.csv"), &testing)?;
                let c = chart(
                    &testing,
                    &format!("testing, seed {s}"),
                    "global_step",
                    &GROUP_RATES,
                    None,
                    RATE_LABEL,
                )?;
                out.svg(&format!("testing_seed{s}.svg"), &c)?;
            }
        }
        Command::SweepD0 => {
            let table = sweep_table(&run_sweep_d0(&settings)?);
            out.csv("sweep_d0.csv", &table)?;
            let c = chart(
                &table,
                "rate against D0",
                "d0_m",
                &["rate_all"],
                Some("altitude_m"),
                RATE_LABEL,
            )?;
            out.svg("sweep_d0.svg", &c)?;
        }
        Command::SweepUsers => {
            let table = sweep_table(&run_sweep_users(&settings)?);
            out.csv("sweep_users.csv", &table)?;
            let c = chart(
                &table,
                "rate against users per cell",
                "users_per_cell",
                &GROUP_RATES,
                None,
                RATE_LABEL,
            )?;
            out.svg("sweep_users.svg", &c)?;
        }
        Command::Baselines => {
            out.csv("baselines.csv", &baseline_table(&run_baselines(&settings)?))?;
        }
        Command::Plot { .. } => unreachable!(),
    }
    Ok(out.written)
}
