use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use qppm_core::config::load_config;
use qppm_core::error::{Error, Result, Stage};
use qppm_core::pipeline::{compute_effectiveness, compute_predictions, load_inputs, run_pipeline};
use qppm_core::report::{
    parse_unit_taus, render_grid_tsv, render_significance, render_table, slug, write_reports,
    Format,
};
use qppm_core::significance::significance_matrix;
use qppm_core::trec_io::MissingPolicy;
use qppm_core::{EvalConfig, TauVariant};

#[derive(Parser, Debug)]
#[command(name = "qppm", version, about = "Evaluate query performance predictors across queries and rankers")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides output.dir in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output formats, comma separated: csv, markdown, latex.
    #[arg(long, global = true, value_delimiter = ',')]
    format: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Significance level for the pairwise t-tests.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Kendall variant: a or b.
    #[arg(long, global = true)]
    tau: Option<String>,
    /// Missing-cell policy: strict or intersect.
    #[arg(long, global = true)]
    policy: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate all inputs without computing anything.
    Validate,
    /// Write the effectiveness matrix of every metric.
    Metrics,
    /// Write the prediction matrix of every predictor.
    Predict,
    /// Run the full evaluation and write the report.
    Evaluate,
    /// Re-run the significance tests from a per-unit tau dump.
    Significance {
        /// Dump written by `evaluate` (unit_taus.tsv).
        dump: PathBuf,
        /// Apply a Bonferroni correction.
        #[arg(long)]
        bonferroni: bool,
    },
}

impl Cli {
    fn formats(&self) -> Result<Option<Vec<Format>>> {
        if self.format.is_empty() {
            return Ok(None);
        }
        self.format.iter().map(|f| f.parse()).collect::<Result<_>>().map(Some)
    }

    fn load(&self) -> Result<EvalConfig> {
        let path = self
            .config
            .as_deref()
            .ok_or_else(|| Error::Config("--config <path> is required".into()).at(Stage::Config))?;
        let mut cfg = load_config(path).map_err(|e| e.at(Stage::Config))?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(t) = &self.tau {
            cfg.tau = t.parse::<TauVariant>().map_err(|e| e.at(Stage::Config))?;
        }
        if let Some(p) = &self.policy {
            cfg.policy = p.parse::<MissingPolicy>().map_err(|e| e.at(Stage::Config))?;
        }
        if let Some(f) = self.formats().map_err(|e| e.at(Stage::Config))? {
            cfg.output.formats = f;
        }
        cfg.validate().map_err(|e| e.at(Stage::Config))?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &EvalConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg.output_dir())
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(path)
}

fn run(cli: &Cli) -> Result<()> {
    let stdout = &mut std::io::stdout().lock();
    let print = |out: &mut dyn Write, s: &str| -> Result<()> {
        out.write_all(s.as_bytes()).map_err(|e| Error::io("writing to stdout", e))
    };
    match &cli.command {
        Command::Validate => {
            let cfg = cli.load()?;
            let inputs = load_inputs(&cfg)?;
            print(
                stdout,
                &format!(
                    "ok: {} queries x {} rankers, {} metrics, {} predictors ({} queries dropped)\n",
                    inputs.runs.num_queries(),
                    inputs.runs.num_rankers(),
                    cfg.metrics.len(),
                    cfg.predictors.len(),
                    inputs.runs.dropped_queries().len()
                ),
            )?;
        }
        Command::Metrics => {
            let cfg = cli.load()?;
            let inputs = load_inputs(&cfg)?;
            let dir = cli.out_dir(&cfg);
            for m in compute_effectiveness(&cfg, &inputs)? {
                let name = format!("effectiveness_{}.tsv", slug(&m.metric.to_string()));
                let path = write_file(&dir, &name, &render_grid_tsv(&m.grid)).map_err(|e| e.at(Stage::Render))?;
                print(stdout, &format!("{}\n", path.display()))?;
            }
        }
        Command::Predict => {
            let cfg = cli.load()?;
            let inputs = load_inputs(&cfg)?;
            let dir = cli.out_dir(&cfg);
            for p in compute_predictions(&cfg, &inputs)? {
                let name = format!("prediction_{}.tsv", slug(&p.label));
                let path = write_file(&dir, &name, &render_grid_tsv(&p.grid)).map_err(|e| e.at(Stage::Render))?;
                print(stdout, &format!("{}\n", path.display()))?;
            }
        }
        Command::Evaluate => {
            let cfg = cli.load()?;
            let bundle = run_pipeline(&cfg)?;
            let dir = cli.out_dir(&cfg);
            let written =
                write_reports(&bundle, &dir, &cfg.output.formats).map_err(|e| e.at(Stage::Render))?;
            info!("wrote {} files to {}", written.len(), dir.display());
            eprintln!("bundle digest {}", bundle.digest());
            let first = cfg.output.formats.first().copied().unwrap_or(Format::Csv);
            print(stdout, &render_table(&bundle, first))?;
        }
        Command::Significance { dump, bonferroni } => {
            let alpha = cli.alpha.unwrap_or(0.05);
            let file = File::open(dump)
                .map_err(|e| Error::io(format!("opening {}", dump.display()), e).at(Stage::Parse))?;
            let groups = parse_unit_taus(BufReader::new(file), &dump.display().to_string())
                .map_err(|e| e.at(Stage::Parse))?;
            let formats = cli.formats().map_err(|e| e.at(Stage::Config))?.unwrap_or(vec![Format::Csv]);
            for g in groups {
                let m = significance_matrix(&g.vectors, alpha, *bonferroni)
                    .map_err(|e| e.at(Stage::Significance))?;
                for &f in &formats {
                    let text = render_significance(&m, f);
                    match &cli.out {
                        Some(dir) => {
                            let name = format!("significance_{}_{}.{}", slug(&g.metric), slug(&g.setting), f.extension());
                            let path = write_file(dir, &name, &text).map_err(|e| e.at(Stage::Render))?;
                            print(stdout, &format!("{}\n", path.display()))?;
                        }
                        None => print(stdout, &format!("# {} {}\n{text}", g.metric, g.setting))?,
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QPPM_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qppm: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
