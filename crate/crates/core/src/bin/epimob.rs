use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

use epimob::analytics::{compare_policies, cumulative_curve, severity_clusters};
use epimob::engine::{write_daily_csv, write_events_jsonl, EnsembleResult};
use epimob::service::{
    execute, serve, Dataset, DatasetSource, Service, ServiceOptions, SimulationConfig, SyntheticDatasetRequest,
    DEFAULT_CAPACITY,
};
use epimob::Error;

#[derive(Parser)]
#[command(
    name = "epimob",
    version,
    about = "Trajectory-driven epidemic simulation under mobility policies"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic city and write its dataset files.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one simulation config and write results.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dataset source JSON, as written by `synth`.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_CAPACITY)]
        capacity: u64,
    },
    /// Compare result files written by `run`.
    Compare {
        #[arg(required = true, num_args = 2..)]
        results: Vec<PathBuf>,
        #[arg(long, default_value = "comparison")]
        name: String,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_CAPACITY)]
        capacity: u64,
    },
}

fn read_json<T: DeserializeOwned>(path: &Path) -> epimob::Result<T> {
    let text = fs::read_to_string(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| Error::invalid(format!("{}:{}", path.display(), e.path()), e.into_inner().to_string()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> epimob::Result<()> {
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), value)?;
    Ok(())
}

fn synth(spec: &Path, out: &Path) -> epimob::Result<()> {
    let req: SyntheticDatasetRequest = read_json(spec)?;
    let ds = Dataset::build(DatasetSource::Synthetic(req))?;
    fs::create_dir_all(out)?;
    write_json(&out.join("dataset.json"), &ds.source)?;
    write_json(&out.join("summary.json"), &ds.summary())?;
    ds.trajectories
        .write_jsonl(BufWriter::new(File::create(out.join("trajectories.jsonl"))?))?;
    ds.home_work.write_csv(File::create(out.join("home_work.csv"))?)?;
    println!("{}", serde_json::to_string_pretty(&ds.summary())?);
    Ok(())
}

fn run(config: &Path, dataset: &Path, out: &Path, workers: Option<usize>, capacity: u64) -> epimob::Result<()> {
    let mut cfg: SimulationConfig = read_json(config)?;
    let ds = Dataset::build(read_json(dataset)?)?;
    if cfg.dataset_id.is_empty() {
        cfg.dataset_id = ds.id.clone();
    } else if cfg.dataset_id != ds.id {
        return Err(Error::invalid(
            "dataset_id",
            format!("config names {} but the dataset is {}", cfg.dataset_id, ds.id),
        ));
    }
    cfg.validate()?;
    let cost = cfg.cost(&ds);
    if cost > capacity {
        return Err(Error::Capacity {
            message: format!("users x days x runs = {cost} exceeds the budget of {capacity}"),
        });
    }
    let er = execute(&ds, &cfg, workers, &|| {})?;
    fs::create_dir_all(out)?;
    write_json(&out.join("result.json"), &er)?;
    write_events_jsonl(er.kept_runs(), BufWriter::new(File::create(out.join("events.jsonl"))?))?;
    write_daily_csv(&er.runs, BufWriter::new(File::create(out.join("daily.csv"))?))?;
    let name = if cfg.name.is_empty() { "run" } else { &cfg.name };
    let curve = cumulative_curve(&er, name, &cfg.policies)?;
    write_json(&out.join("curve.json"), &curve)?;
    write_json(&out.join("severity.json"), &severity_clusters(&er, er.meta.resolution)?)?;
    let last = curve.points.last().expect("at least one day");
    println!(
        "{}: {} runs, {} kept, final cumulative infections {:.1} [{:.1}, {:.1}]",
        name,
        er.runs.len(),
        er.kept.len(),
        last.mean,
        last.lo,
        last.hi
    );
    Ok(())
}

fn compare(paths: &[PathBuf], name: &str) -> epimob::Result<()> {
    let results = paths
        .iter()
        .map(|p| read_json::<EnsembleResult>(p))
        .collect::<epimob::Result<Vec<_>>>()?;
    let mut curves = Vec::new();
    for (p, er) in paths.iter().zip(&results) {
        let label = p.parent().and_then(|d| d.file_name()).unwrap_or(p.as_os_str());
        curves.push((cumulative_curve(er, &label.to_string_lossy(), &[])?, er));
    }
    let cmp = compare_policies(curves, name)?;
    println!("{}", serde_json::to_string_pretty(&cmp)?);
    Ok(())
}

fn serve_cmd(port: u16, data: &Path, workers: Option<usize>, capacity: u64) -> epimob::Result<()> {
    let mut opts = ServiceOptions {
        capacity,
        ..Default::default()
    };
    if let Some(w) = workers {
        opts.workers = w;
    }
    let service = Arc::new(Service::open(data, opts)?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
        eprintln!("listening on {}", listener.local_addr()?);
        serve(Arc::clone(&service), listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    service.shutdown();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.cmd {
        Cmd::Synth { spec, out } => synth(spec, out),
        Cmd::Run {
            config,
            out,
            dataset,
            workers,
            capacity,
        } => run(config, dataset, out, *workers, *capacity),
        Cmd::Compare { results, name } => compare(results, name),
        Cmd::Serve {
            port,
            data,
            workers,
            capacity,
        } => serve_cmd(*port, data, *workers, *capacity),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Capacity { .. } => 3,
                e if e.is_validation() => 2,
                Error::NotFound { .. } => 2,
                _ => 1,
            })
        }
    }
}
