use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use clustopt::clustering::{ClusterModel, KSelection, DEFAULT_K_MAX, DEFAULT_K_MIN};
use clustopt::metrics::{self, Granularity, Missing};
use clustopt::pipeline::{self, ExperimentConfig, KChoice};
use clustopt::representation::{self, ModelRef, RepresentationMeta, TrajectoryRepresentation};
use clustopt::trajectory::{self, Trajectory};
use clustopt::viz::{self, PlotTable};
use clustopt::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "clustopt", version, about = "Cluster-based analysis of optimizer search trajectories")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment from a TOML or JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Problems processed in parallel.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Fit a cluster model on the merged solutions of trajectory files.
    Cluster {
        #[arg(long, num_args = 1.., required = true)]
        trajectories: Vec<PathBuf>,
        /// `auto` (elbow) or a fixed cluster count.
        #[arg(long, default_value = "auto")]
        k: String,
        #[arg(long, default_value_t = DEFAULT_K_MIN)]
        k_min: usize,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        k_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count cluster membership per iteration for each trajectory.
    Represent {
        #[arg(long, num_args = 1.., required = true)]
        trajectories: Vec<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stability of each algorithm on each problem across seeds.
    Stability {
        #[arg(long, num_args = 1.., required = true)]
        reps: Vec<PathBuf>,
        /// Average instances within each problem class.
        #[arg(long)]
        by_class: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pairwise algorithm similarity over shared problems and seeds.
    Similarity {
        #[arg(long, num_args = 1.., required = true)]
        reps: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = MissingArg::Fail)]
        missing: MissingArg,
        #[arg(long, value_enum, default_value_t = GranularityArg::Instance)]
        granularity: GranularityArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an SVG figure.
    Plot {
        #[command(subcommand)]
        kind: PlotKind,
    },
    /// Check an external trajectory CSV.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        /// Only validate; print a summary and write nothing.
        #[arg(long)]
        validate: bool,
        /// Write the trajectories back in canonical form.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PlotKind {
    /// Counts heatmap of one trajectory.
    Heatmap {
        /// Representation CSV.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        pick: Pick,
        #[arg(long)]
        out: PathBuf,
    },
    /// Similarity matrix in dendrogram order.
    Clustermap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Problems x algorithms stability table.
    Stability {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Selects one representation when a file holds several.
#[derive(Args)]
struct Pick {
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissingArg {
    Fail,
    Skip,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Instance,
    Class,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Usage => 1,
        ErrorKind::Data | ErrorKind::Io | ErrorKind::Numeric => 2,
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { config, out, jobs } => {
            let mut cfg = ExperimentConfig::from_path(&config)?.with_env_overrides()?;
            if out.is_some() {
                cfg.output_dir = out;
            }
            if jobs.is_some() {
                cfg.jobs = jobs;
            }
            if cfg.output_dir.is_none() {
                return Err(Error::usage("no output directory: pass --out or set output_dir"));
            }
            let result = pipeline::run_experiment(&cfg)?;
            let manifest = result.manifest.expect("output_dir set");
            eprintln!(
                "{} problems, {} files, content hash {}",
                manifest.problems.len(),
                manifest.files.len(),
                manifest.content_hash
            );
            Ok(())
        }
        Command::Cluster {
            trajectories,
            k,
            k_min,
            k_max,
            seed,
            out,
        } => {
            let all = read_all_trajectories(&trajectories)?;
            let merged = trajectory::merge(&all)?;
            let selection = match k.parse::<KChoice>()? {
                KChoice::Fixed(k) => KSelection::Fixed(k),
                KChoice::Auto => KSelection::Auto {
                    k_min,
                    k_max: k_max.min(merged.len()),
                },
            };
            let mut model = ClusterModel::fit(&merged.points, merged.dimension, selection, seed)?;
            model.problem = Some(merged.problem.clone());
            model.save(&out)?;
            eprintln!("{}: k = {}", merged.problem, model.num_clusters());
            Ok(())
        }
        Command::Represent {
            trajectories,
            model: model_path,
            out,
        } => {
            let model = ClusterModel::load(&model_path)?;
            let reps = read_all_trajectories(&trajectories)?
                .iter()
                .map(|t| representation::build_representation(t, &model))
                .collect::<Result<Vec<_>>>()?;
            let mut meta = RepresentationMeta::default();
            let model_ref = ModelRef {
                file: relative_to(&model_path, &out),
                fingerprint: model.fingerprint(),
            };
            for r in &reps {
                meta.models.insert(r.problem.clone(), model_ref.clone());
            }
            representation::write_representations(&reps, &out, &meta)
        }
        Command::Stability { reps, by_class, out } => {
            let table = metrics::stability_table(&read_all_representations(&reps)?)?;
            let table = if by_class { table.by_class() } else { table };
            viz::dump_plot_csv(&table, &out)
        }
        Command::Similarity {
            reps,
            missing,
            granularity,
            out,
        } => {
            let missing = match missing {
                MissingArg::Fail => Missing::Fail,
                MissingArg::Skip => Missing::Skip,
            };
            let granularity = match granularity {
                GranularityArg::Instance => Granularity::Instance,
                GranularityArg::Class => Granularity::Class,
            };
            let matrix = metrics::similarity_matrix(&read_all_representations(&reps)?, missing, granularity)?;
            viz::dump_plot_csv(&matrix, &out)
        }
        Command::Plot { kind } => plot(kind),
        Command::Ingest { input, validate, out } => {
            let ts = trajectory::read_trajectories(&input)?;
            if ts.is_empty() {
                return Err(Error::Structure {
                    path: input.display().to_string(),
                    message: "no trajectories".into(),
                });
            }
            for t in &ts {
                let (b, s, d) = t.shape();
                println!("{}\t{}\tseed {}\t{b} iterations x {s} solutions x {d} dims", t.problem, t.algorithm, t.seed);
            }
            match out {
                Some(out) if !validate => trajectory::write_trajectories(&ts, &out),
                Some(_) => Err(Error::usage("--validate and --out are mutually exclusive")),
                None => Ok(()),
            }
        }
    }
}

fn plot(kind: PlotKind) -> Result<()> {
    match kind {
        PlotKind::Heatmap {
            input,
            model,
            pick,
            out,
        } => {
            let model = ClusterModel::load(&model)?;
            let reps = representation::read_representations(&input)?;
            let chosen: Vec<&TrajectoryRepresentation> = reps
                .iter()
                .filter(|r| pick.algorithm.as_ref().is_none_or(|a| &r.algorithm == a))
                .filter(|r| pick.problem.as_ref().is_none_or(|p| &r.problem == p))
                .filter(|r| pick.seed.is_none_or(|s| r.seed == s))
                .collect();
            match chosen.as_slice() {
                [one] => viz::render_trajectory_heatmap(one, &model, &out),
                [] => Err(Error::usage("no representation matches --algorithm/--problem/--seed")),
                many => Err(Error::usage(format!(
                    "{} representations match; narrow with --algorithm/--problem/--seed",
                    many.len()
                ))),
            }
        }
        PlotKind::Clustermap { input, out } => {
            let matrix = PlotTable::read(&input)?.to_similarity_matrix()?;
            viz::render_similarity_clustermap(&matrix, &out)
        }
        PlotKind::Stability { input, out } => {
            let table = PlotTable::read(&input)?.to_stability_table();
            viz::render_stability_heatmap(&table, &out)
        }
    }
}

fn read_all_trajectories(paths: &[PathBuf]) -> Result<Vec<Trajectory>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(trajectory::read_trajectories(p)?);
    }
    Ok(all)
}

fn read_all_representations(paths: &[PathBuf]) -> Result<Vec<TrajectoryRepresentation>> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(representation::read_representations(p)?);
    }
    Ok(all)
}

/// `target` as written in a sidecar next to `from`: relative when both share
/// a directory, absolute otherwise.
fn relative_to(target: &Path, from: &Path) -> String {
    let same_dir = target.parent().map(Path::to_path_buf).unwrap_or_default()
        == from.parent().map(Path::to_path_buf).unwrap_or_default();
    match (same_dir, target.file_name()) {
        (true, Some(name)) => name.to_string_lossy().into_owned(),
        _ => std::fs::canonicalize(target)
            .unwrap_or_else(|_| target.to_path_buf())
            .display()
            .to_string(),
    }
}
