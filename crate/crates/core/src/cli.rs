//! Command-line front end. Every command writes the resolved [`RunConfig`]
//! next to its outputs so a run can be repeated exactly.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::attribution::{
    shapley_mc_all, summary_csv, summary_series, Trained, DEFAULT_PERMUTATIONS,
};
use crate::data::{parse_physionet, write_physionet, Cohort, Domain, EpisodeTensor, ScalingStats};
use crate::error::{Error, Result};
use crate::eval::{auc_vs_hours, default_grid, CurveTable};
use crate::experiment::{run_experiment, ExperimentConfig};
use crate::model::{Checkpoint, CheckpointMeta, ModelConfig};
use crate::optim::{check_model, Coverage, TrainConfig};
use crate::riskspace::{
    collect_raw, collect_representations, dynamics, trajectories_csv, tsne2d, TsneConfig,
};
use crate::synth::{generate_cohort, SynthCohortSpec};
use crate::transfer::{parse_strategies, Strategy};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(
    name = "icu-adapt",
    version,
    about = "CNN-LSTM mortality prediction with transfer across ICU domains"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a PhysioNet-layout directory into a cohort file.
    Ingest(IngestArgs),
    /// Generate a synthetic multi-domain cohort in PhysioNet layout.
    Synth(SynthArgs),
    /// Cross-validated strategy sweep with target-only and pooled controls.
    Experiment(ExperimentArgs),
    /// Train one strategy on one fold and save the checkpoint.
    Adapt(AdaptArgs),
    /// AUC against hours observed for a trained checkpoint.
    Curves(CurvesArgs),
    /// t-SNE risk space and trajectory dynamics.
    Project(ProjectArgs),
    /// Per-hour Shapley attributions.
    Attribute(AttributeArgs),
    /// Finite-difference check of the network gradient.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub filters: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub dense: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON cohort spec; the four reference domains when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// A domain name or `all`.
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated strategies or `all`.
    #[arg(long)]
    pub strategies: Option<String>,
    /// Number of folds to run (the first k of five) or a comma list of fold ids.
    #[arg(long)]
    pub folds: Option<String>,
    /// Comma-separated evaluation horizons in hours.
    #[arg(long)]
    pub horizons: Option<String>,
    #[arg(long)]
    pub no_controls: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Comma-separated hours; default 5,10,...,45,48.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Embed model-input feature vectors instead of LSTM states.
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub max_points: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    /// Comma-separated patient ids; by default the first test patients.
    #[arg(long)]
    pub patients: Option<String>,
    #[arg(long)]
    pub n_patients: Option<usize>,
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 3)]
    pub features: usize,
    #[arg(long, default_value_t = 8)]
    pub hours: usize,
    /// Probe every k-th coordinate.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Use the full-width reference network instead of a narrow one.
    #[arg(long)]
    pub full_width: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Settings of one run. Keys absent from a config file take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub code_version: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cohort: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub target: String,
    pub strategies: String,
    pub folds: String,
    pub fold: usize,
    pub horizons: Vec<usize>,
    pub grid: Vec<usize>,
    pub controls: bool,
    pub raw: bool,
    pub patients: Vec<String>,
    pub n_patients: usize,
    pub permutations: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub tsne: TsneConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            code_version: CODE_VERSION.to_string(),
            seed: 0,
            data: None,
            spec: None,
            cohort: None,
            checkpoint: None,
            target: "all".into(),
            strategies: "all".into(),
            folds: "5".into(),
            fold: 1,
            horizons: vec![48],
            grid: default_grid(),
            controls: true,
            raw: false,
            patients: Vec::new(),
            n_patients: 5,
            permutations: DEFAULT_PERMUTATIONS,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            tsne: TsneConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, command: &str) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str::<RunConfig>(&text)
                    .map_err(|e| Error::config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        cfg.command = command.to_string();
        cfg.code_version = CODE_VERSION.to_string();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self)
            .map_err(|e| Error::config(format!("cannot serialize run config: {e}")))
    }

    fn apply_common(&mut self, c: &Common) {
        if let Some(s) = c.seed {
            self.seed = s;
        }
    }

    fn apply_model(&mut self, m: &ModelArgs) {
        if let Some(v) = m.filters {
            self.model.conv_filters = v;
        }
        if let Some(v) = m.hidden {
            self.model.lstm_hidden = v;
        }
        if let Some(v) = m.dense {
            self.model.dense_hidden = v;
        }
        if let Some(v) = m.lr {
            self.model.lr = v;
        }
        if let Some(v) = m.epochs {
            self.train.max_epochs = v;
        }
        if let Some(v) = m.patience {
            self.train.patience = v;
        }
        if let Some(v) = m.batch_size {
            self.train.batch_size = v;
        }
    }

    fn cohort_path(&self) -> Result<&Path> {
        self.cohort
            .as_deref()
            .ok_or_else(|| Error::usage("--cohort is required"))
    }

    fn targets(&self, cohort: &Cohort) -> Result<Vec<Domain>> {
        if self.target.eq_ignore_ascii_case("all") {
            return Ok(cohort.domains());
        }
        self.target
            .split(',')
            .map(|s| s.parse::<Domain>())
            .collect::<Result<Vec<_>>>()
    }

    fn fold_ids(&self) -> Result<Vec<usize>> {
        let bad = || Error::usage(format!("invalid --folds {:?}", self.folds));
        if self.folds.contains(',') {
            self.folds
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| bad()))
                .collect()
        } else {
            let k: usize = self.folds.trim().parse().map_err(|_| bad())?;
            if k == 0 || k > crate::data::N_FOLDS {
                return Err(bad());
            }
            Ok((1..=k).collect())
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| Error::usage(format!("not a number: {p:?}")))
        })
        .collect()
}

fn prepare_out(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(&dir.join("config.toml"), &cfg.to_toml()?)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses arguments and runs the selected command.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(Error::usage(e.to_string())),
    };
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Adapt(a) => cmd_adapt(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Project(a) => cmd_project(a),
        Command::Attribute(a) => cmd_attribute(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    }
}

fn cmd_ingest(a: IngestArgs) -> Result<()> {
    let mut cfg = RunConfig::load(None, "ingest")?;
    cfg.data = Some(a.data.clone());
    let parsed = parse_physionet(&a.data)?;
    for s in &parsed.skipped {
        log::warn!("skipped {}: {}", s.file.display(), s.reason);
    }
    let cohort = Cohort::from_records(&parsed.records);
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    cohort.write(&a.out)?;
    let mut cfg_path = a.out.clone().into_os_string();
    cfg_path.push(".config.toml");
    write(Path::new(&cfg_path), &cfg.to_toml()?)?;
    println!("domain,n,deaths,mortality_rate");
    for s in cohort.summary() {
        println!("{},{},{},{:.3}", s.domain, s.n, s.deaths, s.mortality_rate);
    }
    println!(
        "total,{},{},",
        cohort.len(),
        cohort.entries.iter().filter(|e| e.outcome).count()
    );
    if !parsed.skipped.is_empty() {
        eprintln!("{} record(s) skipped", parsed.skipped.len());
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref(), "synth")?;
    cfg.apply_common(&a.common);
    if let Some(s) = &a.spec {
        cfg.spec = Some(s.clone());
    }
    let spec = match &cfg.spec {
        Some(p) => {
            SynthCohortSpec::from_json(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?
        }
        None => SynthCohortSpec::reference(),
    };
    let cohort = generate_cohort(&spec, cfg.seed)?;
    prepare_out(&a.out, &cfg)?;
    write_physionet(&a.out, &cohort.records)?;
    write(
        &a.out.join("spec.json"),
        &serde_json::to_string_pretty(&spec)?,
    )?;
    let mut truth = String::new();
    for t in &cohort.truth {
        truth.push_str(&serde_json::to_string(t)?);
        truth.push('\n');
    }
    write(&a.out.join("truth.jsonl"), &truth)?;
    println!(
        "wrote {} records to {}",
        cohort.records.len(),
        a.out.display()
    );
    Ok(())
}

fn experiment_config(cfg: &RunConfig) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        model: cfg.model.clone(),
        train: cfg.train.clone(),
        strategies: parse_strategies(&cfg.strategies)?,
        horizons: cfg.horizons.clone(),
        controls: cfg.controls,
        seed: cfg.seed,
    })
}

fn load_cohort(path: &Path) -> Result<Cohort> {
    let c = Cohort::read(path)?;
    if c.is_empty() {
        return Err(Error::data(format!("{} holds no patients", path.display())));
    }
    Ok(c)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref(), "experiment")?;
    cfg.apply_common(&a.common);
    cfg.apply_model(&a.model);
    if let Some(c) = a.cohort {
        cfg.cohort = Some(c);
    }
    if let Some(t) = a.target {
        cfg.target = t;
    }
    if let Some(s) = a.strategies {
        cfg.strategies = s;
    }
    if let Some(f) = a.folds {
        cfg.folds = f;
    }
    if let Some(h) = a.horizons {
        cfg.horizons = parse_list(&h)?;
    }
    if a.no_controls {
        cfg.controls = false;
    }
    parse_strategies(&cfg.strategies)?;
    let cohort = load_cohort(cfg.cohort_path()?)?;
    cfg.model.n_features = cohort.entries[0].grid.n_channels;
    let targets = cfg.targets(&cohort)?;
    let folds = cfg.fold_ids()?;
    let exp = experiment_config(&cfg)?;
    prepare_out(&a.out, &cfg)?;
    let out = run_experiment(&cohort, &targets, Some(&folds), &exp)?;
    for w in &out.warnings {
        log::warn!("{w}");
    }
    write(&a.out.join("report.csv"), &out.report.to_csv())?;
    let mut table = String::new();
    for &y in &cfg.horizons {
        let reference = exp.controls.then_some(crate::experiment::TT);
        table.push_str(&format!("AUC at {y} h\n"));
        table.push_str(&out.report.render_table(y, reference)?);
        table.push('\n');
    }
    write(&a.out.join("table.txt"), &table)?;
    let mut traces = String::from("target,model,fold,epoch,train_loss,val_loss\n");
    for m in &out.models {
        for e in &m.trace.epochs {
            traces.push_str(&format!(
                "{},{},{},{},{:.6},{:.6}\n",
                m.target, m.name, m.fold, e.epoch, e.train_loss, e.val_loss
            ));
        }
    }
    write(&a.out.join("traces.csv"), &traces)?;
    print!("{table}");
    Ok(())
}

fn cmd_adapt(a: AdaptArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref(), "adapt")?;
    cfg.apply_common(&a.common);
    cfg.apply_model(&a.model);
    if let Some(c) = a.cohort {
        cfg.cohort = Some(c);
    }
    if let Some(t) = a.target {
        cfg.target = t;
    }
    if let Some(s) = a.strategy {
        cfg.strategies = s;
    }
    if let Some(f) = a.fold {
        cfg.fold = f;
    }
    cfg.controls = false;
    let strategy: Strategy = cfg.strategies.parse()?;
    let target: Domain = cfg.target.parse()?;
    let cohort = load_cohort(cfg.cohort_path()?)?;
    cfg.model.n_features = cohort.entries[0].grid.n_channels;
    let mut exp = experiment_config(&RunConfig {
        strategies: strategy.to_string(),
        ..cfg.clone()
    })?;
    exp.controls = false;
    prepare_out(&a.out, &cfg)?;
    let out = run_experiment(&cohort, &[target], Some(&[cfg.fold]), &exp)?;
    let m = out
        .models
        .into_iter()
        .next()
        .ok_or_else(|| Error::Internal("no model trained".into()))?;
    let ck = Checkpoint::new(
        cfg.model.clone(),
        m.params,
        Some(m.scaling),
        CheckpointMeta {
            target: Some(target),
            strategy: Some(strategy.to_string()),
            fold: Some(cfg.fold),
            seed: cfg.seed,
            test_ids: m.test_ids,
        },
    );
    ck.save(&a.out.join("checkpoint.json"))?;
    let mut rows = String::new();
    for r in &out.report.rows {
        let row = serde_json::json!({
            "target": r.domain, "strategy": r.model, "fold": r.fold, "y": r.y, "auc": r.auc,
        });
        rows.push_str(&row.to_string());
        rows.push('\n');
    }
    write(&a.out.join("result.jsonl"), &rows)?;
    print!("{rows}");
    Ok(())
}

/// Episodes the checkpoint should be evaluated on: its fold's held-out target
/// patients when recorded, otherwise every patient. Scaling comes from the
/// checkpoint, or from all patients when absent.
fn checkpoint_episodes(ck: &Checkpoint, cohort: &Cohort) -> Result<Vec<EpisodeTensor>> {
    let scaling = match &ck.scaling {
        Some(s) => s.clone(),
        None => ScalingStats::from_grids(cohort.entries.iter().map(|e| &e.grid))?,
    };
    let ids: HashSet<&str> = ck.meta.test_ids.iter().map(String::as_str).collect();
    let entries = cohort
        .entries
        .iter()
        .filter(|e| ids.is_empty() || ids.contains(e.patient_id.as_str()));
    let episodes: Vec<EpisodeTensor> = entries
        .map(|e| e.episode(&scaling))
        .collect::<Result<_>>()?;
    if episodes.is_empty() {
        return Err(Error::data(
            "none of the checkpoint's test patients are in the cohort",
        ));
    }
    Ok(episodes)
}

fn load_checkpoint(cfg: &RunConfig) -> Result<Checkpoint> {
    let path = cfg
        .checkpoint
        .as_deref()
        .ok_or_else(|| Error::usage("--checkpoint is required"))?;
    Checkpoint::load(path)
}

fn cmd_curves(a: CurvesArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref(), "curves")?;
    cfg.apply_common(&a.common);
    cfg.checkpoint = Some(a.checkpoint);
    if let Some(c) = a.cohort {
        cfg.cohort = Some(c);
    }
    if let Some(g) = a.grid {
        cfg.grid = parse_list(&g)?;
    }
    let ck = load_checkpoint(&cfg)?;
    let cohort = load_cohort(cfg.cohort_path()?)?;
    let net = ck.network()?;
    let episodes = checkpoint_episodes(&ck, &cohort)?;
    prepare_out(&a.out, &cfg)?;
    let mut table = CurveTable::new(cfg.grid.clone());
    let domains: Vec<Domain> = Domain::ALL
        .into_iter()
        .filter(|d| episodes.iter().any(|e| e.domain == *d))
        .collect();
    for d in domains {
        let subset: Vec<EpisodeTensor> =
            episodes.iter().filter(|e| e.domain == d).cloned().collect();
        match auc_vs_hours(&net, &ck.params, &subset, &cfg.grid) {
            Ok(curve) => table.insert(d, &curve)?,
            Err(Error::UndefinedAuc(msg)) => log::warn!("{d}: {msg}"),
            Err(e) => return Err(e),
        }
    }
    let model = ck.meta.strategy.clone().unwrap_or_else(|| "model".into());
    let csv = table.to_csv(&model);
    write(&a.out.join("curves.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_project(a: ProjectArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref(), "project")?;
    cfg.apply_common(&a.common);
    cfg.checkpoint = Some(a.checkpoint);
    if let Some(c) = a.cohort {
        cfg.cohort = Some(c);
    }
    if a.raw {
        cfg.raw = true;
    }
    if let Some(p) = a.perplexity {
        cfg.tsne.perplexity = p;
    }
    if let Some(i) = a.iterations {
        cfg.tsne.iterations = i;
    }
    if let Some(m) = a.max_points {
        cfg.tsne.max_points = m;
    }
    let ck = load_checkpoint(&cfg)?;
    let cohort = load_cohort(cfg.cohort_path()?)?;
    let net = ck.network()?;
    let episodes = checkpoint_episodes(&ck, &cohort)?;
    prepare_out(&a.out, &cfg)?;
    let reps = if cfg.raw {
        collect_raw(&net, &ck.params, &episodes)?
    } else {
        collect_representations(&net, &ck.params, &episodes)?
    };
    let mut traj = String::new();
    let mut kl = String::from("domain,iteration,kl\n");
    for d in Domain::ALL {
        let sub = reps.domain(d);
        if sub.is_empty() {
            continue;
        }
        let sub = sub.subsample(
            cfg.tsne.max_points,
            crate::rng::derive_str(cfg.seed, d.as_str()),
        );
        let res = tsne2d(&sub.coords, &cfg.tsne, cfg.seed)?;
        let csv = trajectories_csv(&sub.meta, &res.embedding);
        if traj.is_empty() {
            traj.push_str(&csv);
        } else {
            traj.extend(csv.split_inclusive('\n').skip(1));
        }
        for (i, k) in &res.kl_trace {
            kl.push_str(&format!("{d},{i},{k:.6}\n"));
        }
        match dynamics(&sub.meta, &res.embedding) {
            Ok(dy) => write(
                &a.out
                    .join(format!("dynamics_{}.csv", d.as_str().to_lowercase())),
                &dy.to_csv(),
            )?,
            Err(Error::Data(msg)) => log::warn!("{d}: {msg}"),
            Err(e) => return Err(e),
        }
    }
    write(&a.out.join("trajectories.csv"), &traj)?;
    write(&a.out.join("kl_trace.csv"), &kl)?;
    println!(
        "projected {} points",
        traj.lines().count().saturating_sub(1)
    );
    Ok(())
}

fn cmd_attribute(a: AttributeArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref(), "attribute")?;
    cfg.apply_common(&a.common);
    cfg.checkpoint = Some(a.checkpoint);
    if let Some(c) = a.cohort {
        cfg.cohort = Some(c);
    }
    if let Some(p) = a.patients {
        cfg.patients = p
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
    }
    if let Some(n) = a.n_patients {
        cfg.n_patients = n;
    }
    if let Some(m) = a.permutations {
        cfg.permutations = m;
    }
    let ck = load_checkpoint(&cfg)?;
    let cohort = load_cohort(cfg.cohort_path()?)?;
    let net = ck.network()?;
    let episodes = checkpoint_episodes(&ck, &cohort)?;
    let selected: Vec<&EpisodeTensor> = if cfg.patients.is_empty() {
        episodes.iter().take(cfg.n_patients).collect()
    } else {
        cfg.patients
            .iter()
            .map(|id| {
                episodes
                    .iter()
                    .find(|e| &e.patient_id == id)
                    .ok_or_else(|| {
                        Error::usage(format!("patient {id} not among the evaluated patients"))
                    })
            })
            .collect::<Result<_>>()?
    };
    prepare_out(&a.out, &cfg)?;
    let model = Trained {
        net: &net,
        params: &ck.params,
    };
    let mut csv = String::new();
    for (i, e) in selected.iter().enumerate() {
        let attr = shapley_mc_all(
            &model,
            &e.patient_id,
            &e.values,
            cfg.permutations,
            crate::rng::derive(cfg.seed, i as u64),
        )?;
        let rows = summary_csv(&summary_series(&attr, e)?);
        if csv.is_empty() {
            csv.push_str(&rows);
        } else {
            csv.extend(rows.split_inclusive('\n').skip(1));
        }
    }
    write(&a.out.join("attributions.csv"), &csv)?;
    println!("attributed {} patient(s)", selected.len());
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<()> {
    let mut config = ModelConfig::with_features(a.features);
    if !a.full_width {
        config.conv_filters = 4;
        config.lstm_hidden = 3;
        config.dense_hidden = 3;
    }
    let coverage = if a.stride <= 1 {
        Coverage::All
    } else {
        Coverage::Stride(a.stride)
    };
    let report = check_model(&config, a.hours, a.seed, coverage)?;
    println!(
        "checked {} coordinates: max relative error {:.3e} (worst {}[{}]), max absolute error {:.3e}",
        report.n_checked, report.max_rel_error, report.worst_entry, report.worst_index, report.max_abs_error
    );
    if !report.passed() {
        return Err(Error::Internal(format!(
            "gradient check failed: {:.3e} >= {:.0e}",
            report.max_rel_error, report.tolerance
        )));
    }
    println!("gradient check passed");
    Ok(())
}
