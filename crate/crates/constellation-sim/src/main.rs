use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use constellation_sim::artifacts::{self, EVENTS_FILE};
use constellation_sim::config::ScenarioConfig;
use constellation_sim::engine;
use constellation_sim::error::Result;
use constellation_sim::learner::{self, TileGenConfig};
use constellation_sim::plot;

#[derive(Parser)]
#[command(
    name = "constellation-sim",
    about = "Deterministic constellation simulator with an onboard fine-tuning workload",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scenario file and echo the effective configuration.
    ValidateConfig { path: PathBuf },
    /// Execute a scenario and write events.jsonl, timeseries.csv and
    /// summary.json into the output directory.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the configured duration, in hours.
        #[arg(long)]
        duration_hours: Option<f64>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render static SVG plots from a run directory.
    Plot {
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute summary totals from events.jsonl and compare exactly.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
    /// Export one shard of synthetic tiles as flat binary arrays plus a
    /// JSON sidecar describing shape, dtype and seed.
    ExportTiles {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        shard: u64,
        #[arg(long, default_value_t = 256)]
        tile_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::ValidateConfig { path } => {
            let config = ScenarioConfig::from_path(&path)?;
            println!("{}", config.effective_json());
            Ok(())
        }
        Command::Run {
            scenario,
            duration_hours,
            seed,
            out,
        } => {
            let mut config = ScenarioConfig::from_path(&scenario)?;
            if let Some(hours) = duration_hours {
                config.duration_s = hours * 3600.0;
            }
            if let Some(seed) = seed {
                config.seed = seed;
            }
            config.validate()?;
            let result = engine::run(&config)?;
            let paths = artifacts::write_artifacts(&result, &out)?;
            let s = &result.summary;
            println!(
                "scenario {} seed {}: {} batches, {} exchanges completed ({} aborted), \
                 final mean loss {:.6} (untrained {:.6}), final mean IoU {:.4}",
                s.scenario_id,
                s.seed,
                s.totals.total_batches,
                s.totals.exchanges_completed,
                s.totals.exchanges_aborted,
                s.final_mean_loss,
                s.untrained_eval_loss,
                s.final_mean_iou
            );
            println!("events:     {}", paths.events_path.display());
            println!("timeseries: {}", paths.timeseries_path.display());
            println!("summary:    {}", paths.summary_path.display());
            Ok(())
        }
        Command::Plot { out } => {
            let events = artifacts::read_events(&out.join(EVENTS_FILE))?;
            let files = plot::render_plots(&events, &out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Verify { out } => {
            artifacts::verify_dir(&out)?;
            println!("ok: summary totals match events.jsonl");
            Ok(())
        }
        Command::ExportTiles {
            seed,
            count,
            shard,
            tile_size,
            out,
        } => {
            let config = TileGenConfig {
                tile_size,
                ..TileGenConfig::default()
            };
            config.validate()?;
            export_tiles(seed, count, shard, &config, &out)
        }
    }
}

/// Flat little-endian f64 arrays for bands and NDWI, u8 for masks, plus a
/// sidecar describing the layout.
fn export_tiles(
    seed: u64,
    count: usize,
    shard: u64,
    config: &TileGenConfig,
    out: &PathBuf,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let n = config.tile_size;
    let mut bands = Vec::with_capacity(count * 3 * n * n * 8);
    let mut ndwi = Vec::with_capacity(count * n * n * 8);
    let mut masks = Vec::with_capacity(count * n * n);
    let mut bboxes = Vec::with_capacity(count);
    for i in 0..count {
        let tile = learner::generate_tile(seed, shard, i as u64, config);
        for band in &tile.bands {
            for &v in band.as_slice() {
                bands.extend_from_slice(&v.to_le_bytes());
            }
        }
        for &v in tile.ndwi.as_slice() {
            ndwi.extend_from_slice(&v.to_le_bytes());
        }
        masks.extend_from_slice(tile.mask.as_slice());
        bboxes.push([
            tile.bbox.row_min,
            tile.bbox.col_min,
            tile.bbox.row_max,
            tile.bbox.col_max,
        ]);
    }
    std::fs::write(out.join("bands.bin"), &bands)?;
    std::fs::write(out.join("ndwi.bin"), &ndwi)?;
    std::fs::write(out.join("masks.bin"), &masks)?;
    let sidecar = serde_json::json!({
        "seed": seed,
        "shard": shard,
        "count": count,
        "tile_size": n,
        "bands": { "file": "bands.bin", "dtype": "f64-le", "shape": [count, 3, n, n] },
        "ndwi": { "file": "ndwi.bin", "dtype": "f64-le", "shape": [count, n, n] },
        "masks": { "file": "masks.bin", "dtype": "u8", "shape": [count, n, n] },
        "bboxes": bboxes,
    });
    std::fs::write(
        out.join("tiles.json"),
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
    )?;
    println!("wrote {count} tiles to {}", out.display());
    Ok(())
}
