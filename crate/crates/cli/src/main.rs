use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use synthperson::ablation::{ablate, dataset_features, normalize_items, tab2_grid, AblationCell};
use synthperson::config::{resolve, ConfigRequest, SynthesisConfig};
use synthperson::dataset::{compute_stats, read_manifest, verify_dataset, DatasetStats};
use synthperson::eval::{evaluate, split_query_gallery, Distance, EvalResult};
use synthperson::human::TextureMode;
use synthperson::pipeline::{synthesize, with_threads};
use synthperson::Error;

#[derive(Parser)]
#[command(
    name = "synthperson",
    version,
    about = "Synthetic person re-identification datasets"
)]
struct Cli {
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, env = "SYNTHPERSON_THREADS")]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML config, or a header.json from an earlier run.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Base preset: paper_full, desk_full or smoke.
    #[arg(long)]
    preset: Option<String>,
    /// Corner preset to apply: indoor, night or black. Repeatable.
    #[arg(long = "corner")]
    corners: Vec<String>,
    /// Override a config value, e.g. `identities.count=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self, extra: &[String]) -> Result<SynthesisConfig, Error> {
        let mut overrides = self.overrides.clone();
        overrides.extend(extra.iter().cloned());
        resolve(&ConfigRequest {
            file: self.config.clone(),
            base: self.preset.clone(),
            corners: self.corners.clone(),
            overrides,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a dataset.
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory (overrides emission.out_dir).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print statistics of an emitted dataset.
    Stats {
        dataset: PathBuf,
        /// Print JSON instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Cross-camera retrieval on an emitted dataset.
    Eval {
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        query_cams: Vec<u32>,
        #[arg(long, value_delimiter = ',', required = true)]
        gallery_cams: Vec<u32>,
        #[arg(long, default_value = "l2")]
        distance: Distance,
        /// Skip per-camera feature standardization.
        #[arg(long)]
        no_normalize: bool,
        /// Directory for report.json and report.txt (default: DATASET/eval).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Synthesize and score a grid of knob settings.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// `tab2`, `acc-hard`, or a JSON file listing cells.
        #[arg(long, default_value = "tab2")]
        grid: String,
        /// Multiplier on the grid's identity counts.
        #[arg(long, default_value_t = 0.05)]
        id_scale: f64,
        #[arg(long, short, default_value = "ablation")]
        out: PathBuf,
        #[arg(long, default_value = "l2")]
        distance: Distance,
    },
    /// Print the configuration derived from corner presets.
    Preset {
        /// Corner presets: indoor, night, black.
        #[arg(required = true)]
        names: Vec<String>,
        #[arg(long, short)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "desk_full")]
        base: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write the TOML here instead of stdout.
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Validation(_) | Error::Parse { .. } => 2,
        Error::Io { .. } | Error::Image { .. } => 3,
        _ => 4,
    }
}

fn print_stats(stats: &DatasetStats) {
    println!(
        "identities {}  cameras {}  scenes {}  images {}",
        stats.identities, stats.cameras, stats.scenes, stats.images
    );
    let cams: Vec<String> = stats
        .per_camera
        .iter()
        .map(|(c, n)| format!("c{c}:{n}"))
        .collect();
    println!("per camera: {}", cams.join(" "));
    println!("max images per identity: {}", stats.max_per_identity());
}

fn write_eval(dir: &Path, r: &EvalResult) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })?;
    let json = dir.join("report.json");
    std::fs::write(
        &json,
        serde_json::to_string_pretty(r).expect("result serializes") + "\n",
    )
    .map_err(|e| Error::Io {
        path: json.clone(),
        source: e,
    })?;
    let txt = dir.join("report.txt");
    let table = format!(
        "{:>8} {:>8} {:>8} {:>8} {:>8}\n{:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8}\n",
        "rank-1",
        "rank-5",
        "rank-10",
        "mAP",
        "queries",
        r.rank(1),
        r.rank(5),
        r.rank(10),
        r.map,
        r.n_queries
    );
    std::fs::write(&txt, table).map_err(|e| Error::Io {
        path: txt.clone(),
        source: e,
    })
}

fn load_grid(spec: &str, id_scale: f64) -> Result<Vec<AblationCell>, Error> {
    match spec {
        "tab2" => Ok(tab2_grid(id_scale)),
        "acc-hard" => {
            let ids = ((800.0 * id_scale).round() as usize).max(5);
            let mut cells = Vec::new();
            for acc in [false, true] {
                for hard in [false, true] {
                    cells.push(AblationCell {
                        name: format!("acc{}_hard{}", acc as u8, hard as u8),
                        ids,
                        cameras: "6".into(),
                        texture_mode: TextureMode::Real,
                        accessories: acc,
                        hard_samples: hard,
                        scenes: None,
                    });
                }
            }
            Ok(cells)
        }
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.into(),
                source: e,
            })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("grid {path}: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let threads = cli.threads;
    match cli.command {
        Command::Synth { cfg, out } => {
            let extra: Vec<String> = out
                .iter()
                .map(|o| format!("emission.out_dir={:?}", o.to_string_lossy()))
                .collect();
            let config = cfg.resolve(&extra)?;
            let started = Instant::now();
            let (_, summary) = with_threads(threads, || synthesize(&config))??;
            println!("wrote {}", config.emission.out_dir);
            print_stats(&summary.stats);
            println!(
                "{} slots, {} frames scanned, {} candidates, {:.1}s",
                summary.slots,
                summary.frames_scanned,
                summary.candidates,
                started.elapsed().as_secs_f64()
            );
            if !summary.dropped_identities.is_empty() {
                println!(
                    "dropped identities without samples: {:?}",
                    summary.dropped_identities
                );
            }
        }
        Command::Stats { dataset, json } => {
            let manifest = read_manifest(&dataset)?;
            verify_dataset(&dataset, &manifest)?;
            let stats = compute_stats(&manifest)?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&stats).expect("stats serialize")
                );
            } else {
                print_stats(&stats);
            }
        }
        Command::Eval {
            dataset,
            query_cams,
            gallery_cams,
            distance,
            no_normalize,
            report,
        } => {
            if query_cams.iter().any(|c| gallery_cams.contains(c)) {
                log::warn!("query and gallery cameras overlap; same-camera matches are excluded, so many queries may lose all matches");
                eprintln!("warning: query and gallery cameras overlap; same-camera matches are excluded");
            }
            let manifest = read_manifest(&dataset)?;
            let mut items = with_threads(threads, || dataset_features(&dataset, &manifest))??;
            if !no_normalize {
                normalize_items(&mut items, None);
            }
            let (q, g) = split_query_gallery(&items, &query_cams, &gallery_cams);
            let r = evaluate(&q, &g, distance)?;
            println!(
                "rank-1 {:.4}  rank-5 {:.4}  rank-10 {:.4}  mAP {:.4}  ({} queries, {} without matches)",
                r.rank(1),
                r.rank(5),
                r.rank(10),
                r.map,
                r.n_queries,
                r.n_skipped
            );
            write_eval(&report.unwrap_or_else(|| dataset.join("eval")), &r)?;
        }
        Command::Ablate {
            cfg,
            grid,
            id_scale,
            out,
            distance,
        } => {
            let mut cfg = cfg;
            if cfg.preset.is_none() && cfg.config.is_none() {
                cfg.preset = Some("desk_full".into());
            }
            let base = cfg.resolve(&[])?;
            let cells = load_grid(&grid, id_scale)?;
            let report = with_threads(threads, || ablate(&base, &cells, &out, distance))??;
            print!("{}", report.table());
            println!("report written to {}", out.display());
        }
        Command::Preset {
            names,
            config,
            base,
            overrides,
            write,
        } => {
            let cfg = resolve(&ConfigRequest {
                base: config.is_none().then_some(base),
                file: config,
                corners: names,
                overrides,
            })?;
            let text = cfg.to_toml();
            match write {
                Some(p) => std::fs::write(&p, text).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
