//! `dtecm`: batch front end for twin construction, channel generation,
//! characterization and link evaluation.

mod output;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use dtecm_core::characterization::{characterize, characterize_realization, CharacterizationConfig};
use dtecm_core::foliage::{
    accuracy_sweep, build_twin, compute_fcr, foliage_loss, load_twin, save_twin, solve_pose, ErpParams, FoliageTwin,
    TwinBuildConfig,
};
use dtecm_core::io;
use dtecm_core::link::{drop_path_losses, summarize, LinkConfig};
use dtecm_core::model::{lookup, ChannelModel, ModelContext, DEFAULT_MODEL};
use dtecm_core::scene::{load_scene, validate_scene, Severity};
use dtecm_core::seed::derive_seed;
use dtecm_core::stochastic::{load_params, StateParamSet};
use dtecm_core::synthesis::{sample_cir, SynthesisConfig, DEFAULT_N_TAPS, DEFAULT_TAP_SPACING};
use dtecm_core::{Direction, Vec3};

use output::Staging;

#[derive(Parser, Debug)]
#[command(name = "dtecm", version, about = "Hybrid THz urban-macrocell channel model")]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// State parameter file, or a preset name (`campaign`, `validation`).
    #[arg(long, global = true, default_value = "campaign")]
    params: String,
    /// Channel model variant.
    #[arg(long, global = true, default_value = DEFAULT_MODEL)]
    model: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scene geometry checks.
    #[command(subcommand)]
    Scene(SceneCmd),
    /// Foliage twin construction and queries.
    #[command(subcommand)]
    Twin(TwinCmd),
    /// Channel realizations.
    #[command(subcommand)]
    Channel(ChannelCmd),
    /// Metrics from an MPC file.
    Characterize(CharacterizeArgs),
    /// Spectral efficiency and coverage sweep.
    Linkeval(LinkevalArgs),
    /// List the available channel models.
    Models,
}

#[derive(Subcommand, Debug)]
enum SceneCmd {
    Validate { scene: PathBuf },
}

#[derive(Subcommand, Debug)]
enum TwinCmd {
    Build(TwinBuildArgs),
    Fcr(TwinFcrArgs),
}

#[derive(Args, Debug)]
struct TwinBuildArgs {
    #[arg(long)]
    panorama: PathBuf,
    #[arg(long)]
    refs: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Projection parameters as JSON; defaults to a full-sphere mapping of
    /// the image size.
    #[arg(long)]
    erp: Option<PathBuf>,
    #[arg(long, default_value_t = 22)]
    neighbors: usize,
    /// Neighbour counts for the accuracy report, `min:max`.
    #[arg(long, default_value = "1:45")]
    sweep: String,
    #[arg(long, default_value_t = 0.6)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    resolution: f64,
    /// Base name of the twin files.
    #[arg(long, default_value = "twin")]
    name: String,
}

#[derive(Args, Debug)]
struct TwinFcrArgs {
    #[arg(long)]
    twin: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    az: f64,
    #[arg(long, allow_negative_numbers = true)]
    el: f64,
    /// Window radius; defaults to the twin's loss model window.
    #[arg(long)]
    phi_th: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum ChannelCmd {
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Foliage twin metadata; a foliage-free twin is used when absent.
    #[arg(long)]
    twin: Option<PathBuf>,
    /// Receiver `x,y,z`; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    rx: Vec<String>,
    /// CSV of receivers with `x,y,z` columns.
    #[arg(long)]
    rx_file: Option<PathBuf>,
    /// Receiver grid `xmin:xmax:dx,ymin:ymax:dy,z`.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// Realizations per receiver.
    #[arg(long, default_value_t = 1)]
    realizations: usize,
    #[arg(long)]
    no_stochastic: bool,
    #[arg(long)]
    no_chi: bool,
    /// Also write one CIR file per realization.
    #[arg(long)]
    cir: bool,
    #[arg(long)]
    no_threshold: bool,
}

#[derive(Args, Debug)]
struct CharacterizeArgs {
    /// MPC records, CSV or `.jsonl`.
    #[arg(long)]
    mpcs: PathBuf,
    #[arg(long)]
    no_threshold: bool,
}

#[derive(Args, Debug)]
struct LinkevalArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    twin: Option<PathBuf>,
    /// Total antenna gains, dB, comma separated.
    #[arg(long, default_value = "30,50,70", allow_hyphen_values = true)]
    gains: String,
    /// Cell radii, m, comma separated.
    #[arg(long, default_value = "50,100,200,400")]
    radii: String,
    #[arg(long, default_value_t = 10_000)]
    drops: usize,
    #[arg(long, default_value_t = 13.0)]
    pt: f64,
    #[arg(long, default_value_t = 10.0)]
    noise_figure: f64,
    #[arg(long, default_value_t = 300.0)]
    temperature: f64,
    #[arg(long, default_value_t = 2e9)]
    bandwidth: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    snr_threshold: f64,
    /// Sector `start,extent` in degrees.
    #[arg(long, default_value = "180,180", allow_hyphen_values = true)]
    sector: String,
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number `{v}` in `{s}`"))).collect()
}

fn parse_point(s: &str) -> Result<Vec3> {
    match parse_list(s)?.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => bail!("expected `x,y,z`, got `{s}`"),
    }
}

fn parse_range(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad grid range `{s}`")))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [lo, hi, step] if *step > 0.0 && hi >= lo => Ok((*lo, *hi, *step)),
        _ => bail!("expected `min:max:step` with positive step, got `{s}`"),
    }
}

fn parse_grid(s: &str) -> Result<Vec<Vec3>> {
    let parts: Vec<&str> = s.split(',').collect();
    let [xs, ys, z] = parts.as_slice() else {
        bail!("expected `xmin:xmax:dx,ymin:ymax:dy,z`, got `{s}`");
    };
    let (x0, x1, dx) = parse_range(xs)?;
    let (y0, y1, dy) = parse_range(ys)?;
    let z: f64 = z.trim().parse().with_context(|| format!("bad grid height in `{s}`"))?;
    let nx = ((x1 - x0) / dx + 1e-9).floor() as usize + 1;
    let ny = ((y1 - y0) / dy + 1e-9).floor() as usize + 1;
    Ok((0..ny).flat_map(|j| (0..nx).map(move |i| Vec3::new(x0 + i as f64 * dx, y0 + j as f64 * dy, z))).collect())
}

fn load_param_set(spec: &str) -> Result<StateParamSet> {
    let path = Path::new(spec);
    if path.exists() {
        return load_params(path).with_context(|| format!("loading parameters {}", path.display()));
    }
    Ok(StateParamSet::preset(spec)?)
}

fn load_twin_or_clear(path: Option<&Path>) -> Result<FoliageTwin> {
    match path {
        Some(p) => load_twin(p).with_context(|| format!("loading twin {}", p.display())),
        None => Ok(FoliageTwin::clear(dtecm_core::foliage::twin::DEFAULT_MASK_RESOLUTION_DEG)?),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn scene_validate(scene_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(scene_path).with_context(|| format!("reading {}", scene_path.display()))?;
    let scene = dtecm_core::scene::parse_scene(&text)?;
    let diags = validate_scene(&scene);
    for d in &diags {
        let who = d.building.map(|b| format!("building {b}")).unwrap_or_else(|| "scene".into());
        println!("{:?}: {who}: {}", d.severity, d.reason);
    }
    let errors = diags.iter().filter(|d| d.severity == Severity::Error).count();
    println!("{} buildings, {} warnings, {} errors", scene.buildings.len(), diags.len() - errors, errors);
    if errors > 0 {
        bail!("scene {} is invalid", scene_path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct PoseReport {
    pose: dtecm_core::foliage::PoseRotation,
    residual_rms_deg: f64,
    n_refs: usize,
}

#[derive(Serialize)]
struct AccuracyRow {
    n_neighbors: usize,
    accuracy: f64,
}

fn twin_build(cli: &Cli, args: &TwinBuildArgs) -> Result<()> {
    let image =
        image::open(&args.panorama).with_context(|| format!("reading panorama {}", args.panorama.display()))?.to_rgb8();
    let erp = match &args.erp {
        Some(p) => serde_json::from_str::<ErpParams>(&std::fs::read_to_string(p)?)
            .with_context(|| format!("parsing projection {}", p.display()))?,
        None => ErpParams::full_sphere(image.width(), image.height()),
    };
    let refs = io::read_refs(&args.refs)?;
    let pose = solve_pose(&io::pose_references(&refs, &erp)?)?;
    info!("pose {:?}, rms residual {:.4} deg", pose.pose, pose.residual_rms_deg);

    let labels = io::labeled_pixels(&image, &io::read_labels(&args.labels)?)?;
    if !labels.has_both_classes() {
        return Err(dtecm_core::Error::SingleClass.into());
    }
    let (train, test) = labels.split(args.train_fraction, derive_seed(cli.seed, 0));
    let (lo, hi) = match args.sweep.split_once(':') {
        Some((a, b)) => (a.parse::<usize>()?, b.parse::<usize>()?),
        None => bail!("expected `min:max` for --sweep"),
    };
    let counts: Vec<usize> = (lo.max(1)..=hi.min(train.len())).collect();
    let sweep = accuracy_sweep(&train, &test, counts)?;

    let cfg =
        TwinBuildConfig { n_neighbors: args.neighbors, resolution_deg: args.resolution, ..TwinBuildConfig::default() };
    let twin = build_twin(&image, &erp, pose.pose, &train, &cfg)?;

    let staging = Staging::new(&cli.out)?;
    save_twin(&twin, staging.path(&format!("{}.json", args.name)))?;
    write_json(
        &staging.path("pose.json"),
        &PoseReport { pose: pose.pose, residual_rms_deg: pose.residual_rms_deg, n_refs: refs.len() },
    )?;
    let rows: Vec<_> = sweep.iter().map(|&(n, a)| AccuracyRow { n_neighbors: n, accuracy: a }).collect();
    output::write_csv(&staging.path("knn_accuracy.csv"), &rows)?;
    staging.commit()?;
    if let Some(best) = sweep.iter().max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0))) {
        println!("best accuracy {:.4} at N={}", best.1, best.0);
    }
    println!("foliage cells: {}", twin.mask.count());
    Ok(())
}

fn twin_fcr(args: &TwinFcrArgs) -> Result<()> {
    let twin = load_twin(&args.twin)?;
    let phi = args.phi_th.unwrap_or(twin.loss_model.phi_th_deg);
    let fcr = compute_fcr(&twin, Direction::new(args.az, args.el), phi)?;
    let loss = foliage_loss(fcr, &twin.loss_model, None)?;
    println!("fcr,foliage_gain_db");
    println!("{fcr},{loss}");
    Ok(())
}

#[derive(Serialize)]
struct RunRealization {
    realization_id: usize,
    rx: Vec3,
    seed: u64,
    state: String,
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    command: &'a str,
    model: &'a str,
    master_seed: u64,
    seed_derivation: &'a str,
    params: &'a StateParamSet,
    synthesis: SynthesisConfig,
    realizations: Vec<RunRealization>,
}

const SEED_DERIVATION: &str = "realization seed = splitmix64(master + (realization_id + 1) * 0x9E3779B97F4A7C15)";

fn receivers(args: &GenerateArgs) -> Result<Vec<Vec3>> {
    let mut out: Vec<Vec3> = args.rx.iter().map(|s| parse_point(s)).collect::<Result<_>>()?;
    if let Some(p) = &args.rx_file {
        out.extend(io::read_rx_positions(p)?);
    }
    if let Some(g) = &args.grid {
        out.extend(parse_grid(g)?);
    }
    if out.is_empty() {
        bail!("no receivers: give --rx, --rx-file or --grid");
    }
    Ok(out)
}

fn channel_generate(cli: &Cli, model: &dyn ChannelModel, args: &GenerateArgs) -> Result<()> {
    let scene = load_scene(&args.scene)?;
    let twin = load_twin_or_clear(args.twin.as_deref())?;
    let params = load_param_set(&cli.params)?;
    let synthesis =
        SynthesisConfig { stochastic: !args.no_stochastic, foliage_chi: !args.no_chi, ..SynthesisConfig::default() };
    let ctx = ModelContext { scene: &scene, twin: &twin, params: &params, synthesis };
    let rx_list = receivers(args)?;
    let jobs: Vec<(usize, Vec3)> =
        rx_list.iter().flat_map(|&rx| std::iter::repeat_n(rx, args.realizations)).enumerate().collect();
    let realizations = jobs
        .par_iter()
        .map(|&(id, rx)| model.realize(&ctx, rx, derive_seed(cli.seed, id as u64)))
        .collect::<dtecm_core::Result<Vec<_>>>()?;
    let char_cfg = CharacterizationConfig { threshold: !args.no_threshold, ..CharacterizationConfig::default() };
    let metrics = realizations
        .iter()
        .enumerate()
        .map(|(id, r)| characterize_realization(id, r, &char_cfg))
        .collect::<dtecm_core::Result<Vec<_>>>()?;

    let staging = Staging::new(&cli.out)?;
    let records = io::mpc_records(&realizations);
    io::write_mpc_csv(staging.path("mpcs.csv"), &records)?;
    io::write_mpc_jsonl(staging.path("mpcs.jsonl"), &records)?;
    io::write_metrics_csv(staging.path("metrics.csv"), &metrics)?;
    if args.cir {
        for (id, r) in realizations.iter().enumerate().filter(|(_, r)| !r.mpcs.is_empty()) {
            let cir = sample_cir(r, DEFAULT_TAP_SPACING, DEFAULT_N_TAPS)?;
            io::write_cir_csv(staging.path(&format!("cir_{id}.csv")), &cir)?;
        }
    }
    let meta = RunMetadata {
        command: "channel generate",
        model: model.name(),
        master_seed: cli.seed,
        seed_derivation: SEED_DERIVATION,
        params: &params,
        synthesis,
        realizations: realizations
            .iter()
            .enumerate()
            .map(|(id, r)| RunRealization { realization_id: id, rx: r.rx, seed: r.seed, state: r.state.to_string() })
            .collect(),
    };
    write_json(&staging.path("run.json"), &meta)?;
    staging.commit()?;
    let outage = realizations.iter().filter(|r| r.mpcs.is_empty()).count();
    println!("{} realizations ({} outage), {} MPCs", realizations.len(), outage, records.len());
    Ok(())
}

fn characterize_cmd(cli: &Cli, args: &CharacterizeArgs) -> Result<()> {
    let records = io::read_mpc_records(&args.mpcs)?;
    let cfg = CharacterizationConfig { threshold: !args.no_threshold, ..CharacterizationConfig::default() };
    let metrics = io::group_records(&records)
        .into_iter()
        .map(|(id, (state, mpcs))| characterize(id, state, &mpcs, &cfg))
        .collect::<dtecm_core::Result<Vec<_>>>()?;
    let staging = Staging::new(&cli.out)?;
    io::write_metrics_csv(staging.path("metrics.csv"), &metrics)?;
    staging.commit()?;
    println!("{} realizations characterized", metrics.len());
    Ok(())
}

fn linkeval(cli: &Cli, model: &dyn ChannelModel, args: &LinkevalArgs) -> Result<()> {
    let scene = load_scene(&args.scene)?;
    let twin = load_twin_or_clear(args.twin.as_deref())?;
    let params = load_param_set(&cli.params)?;
    let ctx = ModelContext { scene: &scene, twin: &twin, params: &params, synthesis: SynthesisConfig::default() };
    let gains = parse_list(&args.gains)?;
    let radii = parse_list(&args.radii)?;
    let sector = match parse_list(&args.sector)?.as_slice() {
        [s, e] => (*s, *e),
        _ => bail!("expected `start,extent` for --sector"),
    };
    let base = LinkConfig {
        pt_dbm: args.pt,
        noise_figure_db: args.noise_figure,
        temperature_k: args.temperature,
        bandwidth_hz: args.bandwidth,
        snr_threshold_db: args.snr_threshold,
        sector,
        n_drops: args.drops,
        ..LinkConfig::default()
    };
    let mut rows = Vec::with_capacity(gains.len() * radii.len());
    for &radius in &radii {
        // the drop set depends on the radius only, so gains share it
        let cfg = LinkConfig { cell_radius_m: radius, ..base };
        let losses = drop_path_losses(model, &ctx, &cfg, cli.seed)?;
        for &gain in &gains {
            let summary = summarize(&losses, &LinkConfig { total_gain_db: gain, ..cfg })?;
            rows.push(io::LinkEvalRecord {
                total_gain_db: gain,
                cell_radius_m: radius,
                mean_se_bps_hz: summary.mean_se_bps_hz,
                coverage_ratio: summary.coverage_ratio,
                n_drops: summary.n_drops,
                seed: cli.seed,
            });
            info!("gain {gain} dB, radius {radius} m: {summary:?}");
        }
    }
    let staging = Staging::new(&cli.out)?;
    io::write_linkeval_csv(staging.path("linkeval.csv"), &rows)?;
    staging.commit()?;
    println!("{} sweep points", rows.len());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let model = lookup(&cli.model)?;
    match &cli.command {
        Command::Scene(SceneCmd::Validate { scene }) => scene_validate(scene),
        Command::Twin(TwinCmd::Build(args)) => twin_build(cli, args),
        Command::Twin(TwinCmd::Fcr(args)) => twin_fcr(args),
        Command::Channel(ChannelCmd::Generate(args)) => channel_generate(cli, model.as_ref(), args),
        Command::Characterize(args) => characterize_cmd(cli, args),
        Command::Linkeval(args) => linkeval(cli, model.as_ref(), args),
        Command::Models => {
            for m in dtecm_core::model::registry() {
                println!("{:<12} {}", m.name(), m.description());
            }
            Ok(())
        }
    }
}

fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_points() {
        assert_eq!(parse_point("1,-2,3.5").unwrap(), Vec3::new(1.0, -2.0, 3.5));
        assert!(parse_point("1,2").is_err());
        let g = parse_grid("0:10:5,-5:5:10,1.6").unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[5], Vec3::new(10.0, 5.0, 1.6));
        assert!(parse_grid("0:10:0,0:1:1,1").is_err());
    }
}
