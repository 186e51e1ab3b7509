//! Stage orchestration over an artifact directory.
//!
//! Every stage reads its inputs from the output directory and writes its own
//! files there, so running the stages one by one gives the same artifacts as a
//! full run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coarse::{em_region_inference, CoarseConfig};
use crate::env::{build_rp_grid, Environment};
use crate::error::{Error, Result};
use crate::fine::{alternate_location_inference, FineConfig};
use crate::geometry::Point;
use crate::io;
use crate::metrics::{
    clustering_metrics, localization_report, rss_error_metrics, topo_acc, ClusteringMetrics,
};
use crate::propagation::PropagationModel;
use crate::radiomap::{build_radio_map, knn_localize, MapSample};
use crate::rng::{seeded, substream};
use crate::sim::world::{sample_propagation, CorridorLayout, PropagationPrior};
use crate::sim::{
    generate_rss, sample_queries, segments_from_labels, simulate_trajectory, validate_trajectory,
    MobilityConfig, RssSequence,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub simulation: u64,
    pub coarse: u64,
    pub fine: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            simulation: 1,
            coarse: 2,
            fine: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub users: usize,
    /// Mean residence (slots) for regions missing from the mobility config.
    pub default_residence: f64,
    /// Held-out measurements used for localization and map evaluation.
    pub queries: usize,
    pub propagation: PropagationPrior,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            users: 4,
            default_residence: 2000.0 / 9.0,
            queries: 200,
            propagation: PropagationPrior::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub environment: PathBuf,
    pub output: PathBuf,
    pub seeds: Seeds,
    pub simulation: SimulationConfig,
    pub mobility: MobilityConfig,
    pub coarse: CoarseConfig,
    pub fine: FineConfig,
    pub knn_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            environment: PathBuf::from("environment.json"),
            output: PathBuf::from("out"),
            seeds: Seeds::default(),
            simulation: SimulationConfig::default(),
            mobility: MobilityConfig::default(),
            coarse: CoarseConfig::default(),
            fine: FineConfig::default(),
            knn_k: 5,
        }
    }
}

impl PipelineConfig {
    /// Loads a config; a relative environment path is taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if config.environment.is_relative() {
            if let Some(dir) = path.parent() {
                config.environment = dir.join(&config.environment);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.mobility.validate()?;
        self.coarse.validate()?;
        self.fine.validate()?;
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be >= 1".into()));
        }
        if self.simulation.users == 0 {
            return Err(Error::Config("simulation needs at least one user".into()));
        }
        if !(self.simulation.default_residence >= 1.0) {
            return Err(Error::Config("default_residence must be >= 1".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the serialized config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Writes a default environment and config into `dir`, returning the config path.
pub fn init_config(dir: &Path, layout_seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let env = CorridorLayout::default().build(&mut seeded(layout_seed))?;
    std::fs::write(dir.join("environment.json"), env.to_json())?;
    let path = dir.join("config.json");
    io::write_json(&path, &PipelineConfig::default())?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Simulate,
    InferRegions,
    InferLocations,
    BuildMap,
    Localize,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Simulate,
        Stage::InferRegions,
        Stage::InferLocations,
        Stage::BuildMap,
        Stage::Localize,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::InferRegions => "infer-regions",
            Stage::InferLocations => "infer-locations",
            Stage::BuildMap => "build-map",
            Stage::Localize => "localize",
            Stage::Evaluate => "evaluate",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

pub const SEQUENCES_DIR: &str = "sequences";
pub const TRUTH_DIR: &str = "truth";
pub const QUERIES: &str = "queries.csv";
pub const REGION_LABELS: &str = "region_labels.csv";
pub const COARSE_MODEL: &str = "coarse_model.json";
pub const EM_TRACE: &str = "em_trace.csv";
pub const REGION_REPORT: &str = "region_report.json";
pub const TRAJECTORIES: &str = "trajectories.csv";
pub const PROPAGATION: &str = "propagation.json";
pub const FINE_TRACE: &str = "fine_trace.csv";
pub const RADIO_MAP: &str = "radiomap.csv";
pub const ESTIMATES: &str = "estimates.csv";
pub const REPORT: &str = "report.json";
pub const CDF: &str = "cdf.csv";
pub const MANIFEST: &str = "manifest.json";

fn user_file(dir: &Path, sub: &str, user: usize) -> PathBuf {
    dir.join(sub).join(format!("user_{user}.csv"))
}

/// Fails with a pointer to the producing stage when `path` does not exist.
fn require(path: PathBuf, stage: Stage) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact {
            path,
            stage: stage.name(),
        })
    }
}

fn read_sequences(out: &Path) -> Result<Vec<RssSequence>> {
    require(user_file(out, SEQUENCES_DIR, 1), Stage::Simulate)?;
    let mut seqs = Vec::new();
    for user in 1.. {
        let path = user_file(out, SEQUENCES_DIR, user);
        if !path.exists() {
            break;
        }
        seqs.push(io::read_sequence(&path, user)?);
    }
    Ok(seqs)
}

/// Ground-truth trajectories if the simulator left them, else `None`.
fn read_truth(out: &Path, users: usize) -> Result<Option<Vec<(Vec<Point>, Vec<usize>)>>> {
    let paths: Vec<PathBuf> = (1..=users).map(|m| user_file(out, TRUTH_DIR, m)).collect();
    if !paths.iter().all(|p| p.exists()) {
        return Ok(None);
    }
    paths.iter().map(|p| io::read_truth(p)).collect::<Result<_>>().map(Some)
}

fn read_propagation(path: &Path) -> Result<PropagationModel> {
    PropagationModel::from_json_str(&std::fs::read_to_string(path)?)
}

fn check_lengths<A, B>(what: &str, a: &[Vec<A>], b: &[Vec<B>]) -> Result<()> {
    let same = a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.len() == y.len());
    if same {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} do not line up with the sequences")))
    }
}

fn simulate(config: &PipelineConfig, env: &Environment) -> Result<()> {
    let out = &config.output;
    let mut mobility = config.mobility.clone();
    for k in 1..=env.num_regions() {
        mobility
            .mean_residence
            .entry(k)
            .or_insert(config.simulation.default_residence);
    }
    let seed = config.seeds.simulation;
    let params = sample_propagation(env, &config.simulation.propagation, &mut substream(seed, 0));
    let mut rng = substream(seed, 1);
    for user in 1..=config.simulation.users {
        let traj = simulate_trajectory(user, env, &mobility, &mut rng)?;
        validate_trajectory(&traj, env, &mobility)?;
        let seq = generate_rss(&traj, env, &params, &mut rng)?;
        io::write_sequence(&user_file(out, SEQUENCES_DIR, user), &seq)?;
        io::write_truth(&user_file(out, TRUTH_DIR, user), &traj.points, &traj.labels)?;
    }
    std::fs::write(out.join(TRUTH_DIR).join(PROPAGATION), params.to_json()?)?;
    let queries = sample_queries(env, &params, config.simulation.queries, &mut substream(seed, 2))?;
    io::write_queries(&out.join(QUERIES), &queries)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionReport {
    #[serde(flatten)]
    pub clustering: ClusteringMetrics,
    pub topo_acc: f64,
}

fn region_report(labels: &[Vec<usize>], truth: &[(Vec<Point>, Vec<usize>)]) -> Result<RegionReport> {
    let pred: Vec<usize> = labels.iter().flatten().copied().collect();
    let gold: Vec<usize> = truth.iter().flat_map(|(_, l)| l.iter().copied()).collect();
    let orders = |ls: &mut dyn Iterator<Item = &Vec<usize>>| -> Vec<Vec<usize>> {
        ls.map(|l| segments_from_labels(l).0).collect()
    };
    Ok(RegionReport {
        clustering: clustering_metrics(&pred, &gold)?,
        topo_acc: topo_acc(
            &orders(&mut labels.iter()),
            &orders(&mut truth.iter().map(|(_, l)| l)),
        )?,
    })
}

fn infer_regions(config: &PipelineConfig, env: &Environment) -> Result<()> {
    let out = &config.output;
    let seqs = read_sequences(out)?;
    let result = em_region_inference(&seqs, env, &config.coarse, config.seeds.coarse)?;
    if !result.converged {
        warn!("region inference stopped at the iteration cap");
    }
    io::write_region_labels(&out.join(REGION_LABELS), &result.labels)?;
    io::write_json(&out.join(COARSE_MODEL), &result.model)?;
    io::write_em_trace(&out.join(EM_TRACE), &result.trace)?;
    if let Some(truth) = read_truth(out, seqs.len())? {
        let report = region_report(&result.labels, &truth)?;
        info!(
            "region accuracy {:.4}, topology accuracy {:.1}%",
            report.clustering.acc, report.topo_acc
        );
        io::write_json(&out.join(REGION_REPORT), &report)?;
    }
    Ok(())
}

fn infer_locations(config: &PipelineConfig, env: &Environment) -> Result<()> {
    let out = &config.output;
    let seqs = read_sequences(out)?;
    let labels = io::read_region_labels(&require(out.join(REGION_LABELS), Stage::InferRegions)?)?;
    let obs: Vec<Vec<Vec<f64>>> = seqs.iter().map(|s| s.observations.clone()).collect();
    check_lengths("region labels", &labels, &obs)?;
    let result = alternate_location_inference(
        &seqs,
        &labels,
        env,
        &config.mobility,
        &config.fine,
        config.seeds.fine,
    )?;
    if result.diverged {
        warn!("location inference diverged; the best earlier state was kept");
    }
    io::write_trajectories(&out.join(TRAJECTORIES), &result.trajectories)?;
    std::fs::write(out.join(PROPAGATION), result.params.to_json()?)?;
    io::write_fine_trace(&out.join(FINE_TRACE), &result.trace)
}

fn build_map(config: &PipelineConfig, env: &Environment) -> Result<()> {
    let out = &config.output;
    let seqs = read_sequences(out)?;
    let labels = io::read_region_labels(&require(out.join(REGION_LABELS), Stage::InferRegions)?)?;
    let trajs = io::read_trajectories(&require(out.join(TRAJECTORIES), Stage::InferLocations)?)?;
    let params = read_propagation(&require(out.join(PROPAGATION), Stage::InferLocations)?)?;
    let obs: Vec<Vec<Vec<f64>>> = seqs.iter().map(|s| s.observations.clone()).collect();
    check_lengths("region labels", &labels, &obs)?;
    check_lengths("trajectories", &trajs, &obs)?;
    let samples: Vec<MapSample> = trajs
        .iter()
        .zip(&labels)
        .zip(&seqs)
        .flat_map(|((x, l), s)| {
            x.iter().zip(l).zip(&s.observations).map(|((&pos, &region), rss)| MapSample {
                pos,
                region,
                rss,
            })
        })
        .collect();
    let map = build_radio_map(&build_rp_grid(env), &samples, &params, env);
    io::write_radio_map(&out.join(RADIO_MAP), &map)
}

fn localize(config: &PipelineConfig) -> Result<()> {
    let out = &config.output;
    let map = io::read_radio_map(&require(out.join(RADIO_MAP), Stage::BuildMap)?)?;
    let queries = io::read_queries(&require(out.join(QUERIES), Stage::Simulate)?)?;
    let estimates: Vec<Option<Point>> = queries
        .iter()
        .enumerate()
        .map(|(i, q)| match knn_localize(&q.rss, &map, config.knn_k) {
            Ok(p) => Some(p),
            Err(e) => {
                warn!("query {i}: {e}");
                None
            }
        })
        .collect();
    io::write_estimates(&out.join(ESTIMATES), &estimates)
}

/// Every evaluation quantity; fields without the needed inputs stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    pub f1: Option<f64>,
    pub ari: Option<f64>,
    pub precision: Option<f64>,
    /// percent
    pub e_cla: Option<f64>,
    /// percent
    pub topo_acc: Option<f64>,
    /// dB
    pub e_rmse: Option<f64>,
    /// dB
    pub e_mae: Option<f64>,
    /// percent
    pub e_nrmse: Option<f64>,
    /// meters
    pub e_loc: Option<f64>,
    /// Mean distance between inferred and true trajectory points (m).
    pub trajectory_error: Option<f64>,
    pub queries: usize,
    pub failed_queries: usize,
    pub cdf: Vec<(f64, f64)>,
}

/// Map values at the reference point nearest each query, paired with the query's
/// measurements.
pub fn map_holdout_pairs(map: &crate::radiomap::RadioMap, queries: &[crate::sim::Query]) -> Vec<(f64, f64)> {
    queries
        .iter()
        .filter_map(|q| map.nearest_point(q.pos, Some(q.region)).map(|i| (i, q)))
        .flat_map(|(i, q)| map.fingerprints[i].iter().copied().zip(q.rss.iter().copied()))
        .collect()
}

fn evaluate(config: &PipelineConfig) -> Result<EvalReport> {
    let out = &config.output;
    let map = io::read_radio_map(&require(out.join(RADIO_MAP), Stage::BuildMap)?)?;
    let queries = io::read_queries(&require(out.join(QUERIES), Stage::Simulate)?)?;
    let estimates = io::read_estimates(&require(out.join(ESTIMATES), Stage::Localize)?)?;
    if estimates.len() != queries.len() {
        return Err(Error::InvalidArgument(format!(
            "{} estimates for {} queries",
            estimates.len(),
            queries.len()
        )));
    }
    let mut report = EvalReport {
        queries: queries.len(),
        ..EvalReport::default()
    };

    let rss = rss_error_metrics(&map_holdout_pairs(&map, &queries))?;
    report.e_rmse = Some(rss.rmse);
    report.e_mae = Some(rss.mae);
    report.e_nrmse = Some(rss.nrmse);

    let (est, truth): (Vec<Point>, Vec<Point>) = estimates
        .iter()
        .zip(&queries)
        .filter_map(|(e, q)| e.map(|p| (p, q.pos)))
        .unzip();
    report.failed_queries = queries.len() - est.len();
    if !est.is_empty() {
        let loc = localization_report(&est, &truth)?;
        report.e_loc = Some(loc.e_loc);
        report.cdf = loc.cdf;
    }

    let labels_path = out.join(REGION_LABELS);
    let users = (1..).take_while(|&m| user_file(out, SEQUENCES_DIR, m).exists()).count();
    if let (true, Some(gold)) = (labels_path.exists(), read_truth(out, users)?) {
        let labels = io::read_region_labels(&labels_path)?;
        let gold_labels: Vec<Vec<usize>> = gold.iter().map(|(_, l)| l.clone()).collect();
        check_lengths("region labels", &labels, &gold_labels)?;
        let rr = region_report(&labels, &gold)?;
        report.acc = Some(rr.clustering.acc);
        report.nmi = Some(rr.clustering.nmi);
        report.f1 = Some(rr.clustering.f1);
        report.ari = Some(rr.clustering.ari);
        report.precision = Some(rr.clustering.precision);
        report.e_cla = Some(rr.clustering.e_cla);
        report.topo_acc = Some(rr.topo_acc);
        let traj_path = out.join(TRAJECTORIES);
        if traj_path.exists() {
            let trajs = io::read_trajectories(&traj_path)?;
            let gold_pts: Vec<Vec<Point>> = gold.into_iter().map(|(p, _)| p).collect();
            check_lengths("trajectories", &trajs, &gold_pts)?;
            let d: Vec<f64> = trajs
                .iter()
                .flatten()
                .zip(gold_pts.iter().flatten())
                .map(|(a, b)| a.dist(*b))
                .collect();
            if !d.is_empty() {
                report.trajectory_error = Some(d.iter().sum::<f64>() / d.len() as f64);
            }
        }
    }
    io::write_json(&out.join(REPORT), &report)?;
    io::write_cdf(&out.join(CDF), &report.cdf)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub seeds: Seeds,
    /// Wall time of the latest run of each stage, in seconds.
    pub stage_seconds: BTreeMap<String, f64>,
}

fn update_manifest(config: &PipelineConfig, stage: Stage, seconds: f64) -> Result<()> {
    let path = config.output.join(MANIFEST);
    let hash = config.hash();
    let mut manifest = match io::read_json::<Manifest>(&path) {
        Ok(m) if m.config_hash == hash => m,
        _ => Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hash,
            seeds: config.seeds,
            stage_seconds: BTreeMap::new(),
        },
    };
    manifest.stage_seconds.insert(stage.name().to_string(), seconds);
    io::write_json(&path, &manifest)
}

/// Runs one stage against the artifact directory and records it in the manifest.
pub fn run_stage(config: &PipelineConfig, stage: Stage) -> Result<()> {
    config.validate()?;
    let env = Environment::load(&config.environment)?;
    run_loaded(config, &env, stage)
}

fn run_loaded(config: &PipelineConfig, env: &Environment, stage: Stage) -> Result<()> {
    std::fs::create_dir_all(&config.output)?;
    let start = Instant::now();
    info!("stage {stage}");
    let result = match stage {
        Stage::Simulate => simulate(config, env),
        Stage::InferRegions => infer_regions(config, env),
        Stage::InferLocations => infer_locations(config, env),
        Stage::BuildMap => build_map(config, env),
        Stage::Localize => localize(config),
        Stage::Evaluate => evaluate(config).map(|_| ()),
    };
    result.map_err(|e| Error::Stage {
        stage: stage.name(),
        source: Box::new(e),
    })?;
    let seconds = start.elapsed().as_secs_f64();
    info!("stage {stage} finished in {seconds:.2} s");
    update_manifest(config, stage, seconds)
}

/// Runs every stage in order. The environment is loaded before any work starts.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvalReport> {
    config.validate()?;
    let env = Environment::load(&config.environment)?;
    for stage in Stage::ALL {
        run_loaded(config, &env, stage)?;
    }
    io::read_json(&config.output.join(REPORT))
}
