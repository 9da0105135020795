use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use nbv_core::dataset::{brute_force_nbv, label_report, load_dataset, read_id_list, write_selection_csv};
use nbv_core::experiment::{run_batch, run_simulation_experiment, ExperimentConfig};
use nbv_core::fitness::{write_trace, FitnessContext, FitnessParams, Heuristic};
use nbv_core::forest::{generate_scene, place_manikins, write_manikins_csv};
use nbv_core::mesh::io::{read_obj, write_obj, write_tags};
use nbv_core::visibility::{coverage_export, write_counts_csv, SurfaceModel};
use nbv_core::{camera, experiment, NbvError};

/// Overrides the output directory of every subcommand.
const OUTPUT_ENV: &str = "NBV_OUTPUT_DIR";
const DEFAULT_OUTPUT: &str = "nbv_out";

#[derive(Parser)]
#[command(name = "nbv", version, about = "Next-best-view planning for search under forest canopy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One simulated search: forest, initial grid, planned views, detection.
    Simulate(ExperimentArgs),
    /// Independent simulations with derived seeds plus aggregate curves.
    Batch {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Greedy selection over a posed image dataset.
    DatasetNbv(DatasetArgs),
    /// Per-vertex camera counts for a mesh and a set of poses.
    Coverage(CoverageArgs),
    /// Writes a procedural forest and its manikins.
    GenScene(GenSceneArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML or JSON experiment config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = OUTPUT_ENV)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    heuristic: Option<Heuristic>,
    #[arg(long)]
    n_nbv: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    manikins: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    crossover_rate: Option<f64>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    #[arg(long)]
    tournament_size: Option<usize>,
    #[arg(long)]
    sigma_fraction: Option<f64>,
    /// Number of evaluated vertices; 0 evaluates every vertex.
    #[arg(long)]
    vertex_cap: Option<usize>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.heuristic {
            cfg.heuristic = v;
        }
        if let Some(v) = self.n_nbv {
            cfg.n_nbv = v;
        }
        if let Some(v) = self.density {
            cfg.scene.density = v;
        }
        if let Some(v) = self.manikins {
            cfg.manikins.count = v;
        }
        let evo = &mut cfg.evolution;
        if let Some(v) = self.population {
            evo.population = v;
        }
        if let Some(v) = self.generations {
            evo.generations = v;
        }
        if let Some(v) = self.crossover_rate {
            evo.crossover_rate = v;
        }
        if let Some(v) = self.mutation_rate {
            evo.mutation_rate = v;
        }
        if let Some(v) = self.tournament_size {
            evo.tournament_size = v;
        }
        if let Some(v) = self.sigma_fraction {
            evo.sigma_fraction = v;
        }
        if let Some(v) = self.vertex_cap {
            cfg.vertex_cap = (v > 0).then_some(v);
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = Some(dir.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct DatasetArgs {
    /// Surface model (OBJ).
    #[arg(long)]
    mesh: PathBuf,
    /// Dataset CSV: pose columns plus optional `sees_manikin_<j>` columns.
    #[arg(long)]
    dataset: PathBuf,
    /// Ids of the images the model was built from, one per line.
    #[arg(long)]
    initial: Option<PathBuf>,
    #[arg(long, default_value = "visibility")]
    heuristic: Heuristic,
    #[arg(long, default_value_t = 20)]
    n_views: usize,
    #[arg(long, default_value_t = 3.0)]
    mu: f64,
    #[arg(long, default_value_t = 1e-9)]
    lambda: f64,
    /// Number of evaluated vertices; every vertex when absent.
    #[arg(long)]
    vertex_cap: Option<usize>,
    #[arg(long, env = OUTPUT_ENV, default_value = DEFAULT_OUTPUT)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Pose CSV.
    #[arg(long)]
    cameras: PathBuf,
    #[arg(long, env = OUTPUT_ENV, default_value = DEFAULT_OUTPUT)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct GenSceneArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    manikins: Option<usize>,
    #[arg(long, env = OUTPUT_ENV, default_value = DEFAULT_OUTPUT)]
    output_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let kind = err.downcast_ref::<NbvError>().map_or("error", NbvError::kind);
            let chain: Vec<String> = err.chain().map(ToString::to_string).collect();
            eprintln!("{}", json!({ "error": { "kind": kind, "message": chain.join(": ") } }));
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<serde_json::Value> {
    match cmd {
        Command::Simulate(args) => simulate(&args),
        Command::Batch { exp, runs } => batch(&exp, runs),
        Command::DatasetNbv(args) => dataset_nbv(&args),
        Command::Coverage(args) => coverage(&args),
        Command::GenScene(args) => gen_scene(&args),
    }
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn simulate(args: &ExperimentArgs) -> Result<serde_json::Value> {
    let cfg = args.config()?;
    let dir = output_dir(&cfg);
    let report = run_simulation_experiment(&cfg, Some(&dir))?;
    Ok(json!({
        "output_dir": dir,
        "seed": report.seed,
        "heuristic": report.heuristic.to_string(),
        "cameras": report.cameras.len(),
        "manikins": report.detection.manikin_count(),
        "baseline_visible": report.baseline_visible(),
        "final_visible": report.final_visible(),
        "total_pixels": report.detection.total_pixels(),
    }))
}

fn batch(args: &ExperimentArgs, runs: Option<usize>) -> Result<serde_json::Value> {
    let cfg = args.config()?;
    let n = runs.unwrap_or(cfg.runs);
    let dir = output_dir(&cfg);
    let report = run_batch(&cfg, n, Some(&dir))?;
    let last = report.aggregate.last();
    Ok(json!({
        "output_dir": dir,
        "runs": report.runs.len(),
        "heuristic": cfg.heuristic.to_string(),
        "final_visible_mean": last.map(|r| r.visible_mean),
        "final_pixels_mean": last.map(|r| r.pixels_mean),
    }))
}

fn dataset_nbv(args: &DatasetArgs) -> Result<serde_json::Value> {
    let mesh = read_obj(&args.mesh, None)?;
    let dataset = load_dataset(&args.dataset)?;
    let initial_ids = match &args.initial {
        Some(p) => read_id_list(p)?,
        None => Vec::new(),
    };
    let (initial, candidates) = dataset.partition(&initial_ids)?;
    let initial_cams: Vec<_> = initial.iter().map(|r| r.camera).collect();
    let params = FitnessParams {
        mu: args.mu,
        lambda: args.lambda,
    };

    let model = SurfaceModel::with_vertex_cap(mesh.clone(), args.vertex_cap)?;
    let ctx = FitnessContext::with_views(&model, params, &initial_cams)?;
    let selection = brute_force_nbv(&ctx, &candidates, args.heuristic, args.n_views)?;

    let dir = &args.output_dir;
    create_dir(dir)?;
    write_selection_csv(&dir.join("selected.csv"), &selection.steps)?;
    write_trace(&dir.join("trace.csv"), &selection.trace)?;

    // coverage heatmaps are computed on every vertex, independent of the cap
    let full = SurfaceModel::new(mesh)?;
    let before = full.visibility_matrix(&initial_cams);
    let mut all_cams = initial_cams;
    for id in selection.ids() {
        all_cams.push(dataset.get(id).ok_or(NbvError::UnknownId(id))?.camera);
    }
    let after = full.visibility_matrix(&all_cams);
    coverage_export(full.mesh(), before.counts(), &dir.join("coverage_before.ply"))?;
    coverage_export(full.mesh(), after.counts(), &dir.join("coverage_after.ply"))?;

    let labels = label_report(&selection.ids(), &dataset)?;
    labels.write_csv(&dir.join("labels.csv"))?;
    let seen = labels.seen();
    Ok(json!({
        "output_dir": dir,
        "candidates": candidates.len(),
        "initial": initial.len(),
        "selected": selection.ids(),
        "manikins_seen": seen.map(|s| s.0),
        "manikins_labeled": seen.map(|s| s.1),
    }))
}

fn coverage(args: &CoverageArgs) -> Result<serde_json::Value> {
    let mesh = read_obj(&args.mesh, None)?;
    let cams: Vec<_> = camera::read_pose_csv(&args.cameras)?
        .into_iter()
        .map(|(_, c)| c)
        .collect();
    let model = SurfaceModel::new(mesh)?;
    let record = model.visibility_matrix(&cams);
    let dir = &args.output_dir;
    create_dir(dir)?;
    coverage_export(model.mesh(), record.counts(), &dir.join("coverage.ply"))?;
    let ids: Vec<u32> = (0..model.len() as u32).collect();
    write_counts_csv(&ids, record.counts(), &dir.join("counts.csv"))?;
    let seen = record.counts().iter().filter(|&&c| c > 0).count();
    Ok(json!({
        "output_dir": dir,
        "cameras": cams.len(),
        "vertices": model.len(),
        "vertices_seen": seen,
    }))
}

fn gen_scene(args: &GenSceneArgs) -> Result<serde_json::Value> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.density {
        cfg.scene.density = v;
    }
    if let Some(v) = args.manikins {
        cfg.manikins.count = v;
    }
    cfg.validate()?;
    let scene = generate_scene(&cfg.scene, experiment::scene_seed(cfg.seed))?;
    let manikins = place_manikins(&scene, &cfg.manikins, experiment::manikin_seed(cfg.seed))?;

    let dir = &args.output_dir;
    create_dir(dir)?;
    write_obj(&scene.mesh, &dir.join("scene.obj"))?;
    write_tags(&scene.mesh, &dir.join("scene_tags.csv"))?;
    write_manikins_csv(&dir.join("manikins.csv"), &manikins)?;
    let mut full = scene.mesh.clone();
    for m in &manikins {
        full.append(&m.mesh);
    }
    write_obj(&full, &dir.join("scene_with_manikins.obj"))?;
    write_tags(&full, &dir.join("scene_with_manikins_tags.csv"))?;
    Ok(json!({
        "output_dir": dir,
        "trees": scene.trees.len(),
        "manikins": manikins.len(),
        "vertices": scene.mesh.vertex_count(),
        "faces": scene.mesh.face_count(),
    }))
}
