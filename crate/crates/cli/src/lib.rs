//! Command implementations behind the `natid` binary.
//!
//! Each `cmd_*` function takes a resolved [`RunConfig`], writes its files
//! under `config.out` and returns the human-readable summary for stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use natid_core::classify::{self, ClassifierKind, CvReport, Hyperparams};
use natid_core::features::{self, BehavioralConfig, FeatureFamily, TextResources};
use natid_core::graph::{self, GraphFormat, HomophilyReport, LabeledGraph};
use natid_core::ingest::{self, Manifest, MANIFEST_FILE};
use natid_core::labeler::{self, RuleSet};
use natid_core::model::{Dataset, Territory, TerritoryId};
use natid_core::stats::Direction;
use natid_core::synth::{self, SynthConfig};
use natid_core::textfeat::{self, EmbeddingTable, LanguageProfile, SentimentLexicon, SkipGramConfig};
use natid_core::{Error, Result};

/// Process exit status for an error: 2 for bad input, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_input_error() {
        2
    } else {
        1
    }
}

pub const HOMOPHILY_HEADER: [&str; 3] = ["territory", "network", "interactions"];
pub const HOMOPHILY_DETAIL_HEADER: [&str; 10] = [
    "territory",
    "graph",
    "assortativity",
    "p_value",
    "mww_statistic",
    "mww_p_value",
    "n_nodes",
    "n_edges",
    "permutations",
    "method",
];
pub const COMPARISON_HEADER: [&str; 8] = [
    "feature_id",
    "feature",
    "direction",
    "statistic",
    "df",
    "p_value",
    "stars",
    "coverage",
];
pub const LABEL_HEADER: [&str; 3] = ["territory", "group", "users"];
pub const FOLDS_HEADER: [&str; 6] = ["territory", "family", "classifier", "fold", "correct", "total"];

/// Everything a command may need. Loaded from a JSON file; command-line
/// flags override individual fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub territory: Option<String>,
    /// Dataset manifest, or a directory holding `manifest.json`.
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub rules: Option<PathBuf>,
    pub profiles: Vec<PathBuf>,
    pub lexicons: Vec<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub families: Vec<FeatureFamily>,
    pub classifiers: Vec<ClassifierKind>,
    pub k: usize,
    pub seed: u64,
    pub percentile: f64,
    pub permutations: usize,
    /// Rebuild interaction and network vocabularies inside each fold.
    pub per_fold_vocabulary: bool,
    pub embedding: SkipGramConfig,
    pub hyperparams: Hyperparams,
    pub behavioral: BehavioralConfig,
    pub synth: SynthConfig,
    pub graph_format: String,
    /// `follow`, `interactions` or `both`.
    pub graph: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            territory: None,
            manifest: None,
            out: PathBuf::from("out"),
            rules: None,
            profiles: Vec::new(),
            lexicons: Vec::new(),
            embeddings: None,
            families: FeatureFamily::CLASSIFIER_FAMILIES.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            k: 10,
            seed: 0,
            percentile: features::DEFAULT_PERCENTILE,
            permutations: 1000,
            per_fold_vocabulary: false,
            embedding: SkipGramConfig::default(),
            hyperparams: Hyperparams::default(),
            behavioral: BehavioralConfig::default(),
            synth: SynthConfig::default(),
            graph_format: "dot".into(),
            graph: "both".into(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::Io {
                path: path.to_path_buf(),
                source: e,
            },
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// Checks that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        let files = self
            .rules
            .iter()
            .chain(&self.profiles)
            .chain(&self.lexicons)
            .chain(&self.embeddings);
        for f in files {
            if !f.is_file() {
                return Err(Error::MissingFile(f.clone()));
            }
        }
        if let Some(m) = &self.manifest {
            if !m.exists() {
                return Err(Error::MissingFile(m.clone()));
            }
        }
        if !(0.0..=1.0).contains(&self.percentile) {
            return Err(Error::InvalidInput(format!("percentile {} outside [0, 1]", self.percentile)));
        }
        Ok(())
    }

    fn manifest_path(&self) -> Result<PathBuf> {
        let m = self
            .manifest
            .clone()
            .ok_or_else(|| Error::InvalidInput("no dataset given; pass --manifest".into()))?;
        Ok(if m.is_dir() { m.join(MANIFEST_FILE) } else { m })
    }

    /// The dataset directory, where bundled text resources are looked up.
    fn dataset_dir(&self) -> Option<PathBuf> {
        let m = self.manifest_path().ok()?;
        m.parent().map(Path::to_path_buf)
    }

    fn territory_override(&self) -> Result<Option<Territory>> {
        let Some(name) = &self.territory else {
            return Ok(None);
        };
        let Ok(id) = name.parse::<TerritoryId>();
        Territory::builtin(&id)
            .map(Some)
            .ok_or_else(|| Error::InvalidInput(format!("unknown territory '{name}'")))
    }

    fn load_dataset(&self) -> Result<Dataset> {
        let manifest = Manifest::load(&self.manifest_path()?)?;
        let loaded = ingest::load_dataset(&manifest)?;
        if loaded.warnings.total() > 0 {
            warn!("dataset loaded with warnings: {:?}", loaded.warnings);
        }
        let mut dataset = loaded.dataset;
        if let Some(t) = self.territory_override()? {
            dataset.territory = t;
        }
        Ok(dataset)
    }

    fn ensure_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|e| Error::Io {
            path: self.out.clone(),
            source: e,
        })
    }

    /// Explicit resource files, else `profiles.tsv` / `lexicon.tsv` beside
    /// the dataset when present.
    fn text_resources(&self) -> Result<TextResources> {
        let dir = self.dataset_dir();
        let beside = |name: &str| dir.as_ref().map(|d| d.join(name)).filter(|p| p.is_file());
        let profile_paths: Vec<PathBuf> = if self.profiles.is_empty() {
            beside(synth::PROFILES_FILE).into_iter().collect()
        } else {
            self.profiles.clone()
        };
        let lexicon_paths: Vec<PathBuf> = if self.lexicons.is_empty() {
            beside(synth::LEXICON_FILE).into_iter().collect()
        } else {
            self.lexicons.clone()
        };
        let mut profiles: Vec<LanguageProfile> = Vec::new();
        for p in &profile_paths {
            profiles.extend(textfeat::load_profiles(p)?);
        }
        let lexicons = lexicon_paths
            .iter()
            .map(|p| {
                let lang = p.file_stem().and_then(|s| s.to_str()).unwrap_or("any");
                SentimentLexicon::load(lang, p)
            })
            .collect::<Result<Vec<_>>>()?;
        if profiles.is_empty() {
            warn!("no language profiles; feature #28 will be 0");
        }
        if lexicons.is_empty() {
            warn!("no sentiment lexicon; features #29 and #30 will be 0");
        }
        Ok(TextResources { profiles, lexicons })
    }

    /// Loads `embeddings` or trains a table on all timeline and favourite
    /// tweets and saves it to `out/embeddings.txt`.
    fn embeddings(&self, dataset: &Dataset) -> Result<EmbeddingTable> {
        if let Some(p) = &self.embeddings {
            return textfeat::load_embeddings(p);
        }
        let corpus: Vec<Vec<String>> = dataset
            .users
            .values()
            .flat_map(|u| u.timeline.iter().chain(&u.favourites))
            .map(|t| textfeat::tokenize(&t.text))
            .filter(|t| !t.is_empty())
            .collect();
        let cfg = SkipGramConfig {
            seed: self.seed,
            ..self.embedding.clone()
        };
        info!("training {}-d embeddings on {} tweets", cfg.dimension, corpus.len());
        let table = textfeat::train_skipgram(&corpus, &cfg)?;
        textfeat::save_embeddings(&table, &self.out.join("embeddings.txt"))?;
        Ok(table)
    }
}

#[derive(Debug, Parser)]
#[command(name = "natid", version, about = "National-identity stance analysis of social media users")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label users from their self-reported location and hashtags.
    Label(CommonArgs),
    /// Assortativity of the follow and interaction graphs with p-values.
    Homophily(CommonArgs),
    /// Welch tests of the 30 behavioural features, PI against AI.
    Compare(CommonArgs),
    /// Build and save feature matrices.
    Featurize(CommonArgs),
    /// Cross-validate every feature family with every classifier.
    Classify(CommonArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Write the follow and/or interaction graph for external plotting.
    ExportGraph(CommonArgs),
}

#[derive(Debug, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub territory: Option<String>,
    /// Dataset manifest or the directory containing it.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Feature family; repeat for several.
    #[arg(long)]
    pub family: Vec<String>,
    /// Classifier (NB, SV, RF, ME); repeat for several.
    #[arg(long)]
    pub classifier: Vec<String>,
    #[arg(long)]
    pub percentile: Option<f64>,
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Labelling rule file.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Language-profile file; repeat for several.
    #[arg(long)]
    pub profiles: Vec<PathBuf>,
    /// Sentiment-lexicon file; repeat for several.
    #[arg(long)]
    pub lexicon: Vec<PathBuf>,
    /// Pre-trained embeddings instead of training them.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Graph output format: dot, graphml or csv.
    #[arg(long)]
    pub format: Option<String>,
    /// Graph to export: follow, interactions or both.
    #[arg(long)]
    pub graph: Option<String>,
    /// Rebuild vocabularies per cross-validation fold.
    #[arg(long)]
    pub per_fold_vocabulary: bool,
}

#[derive(Debug, Default, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_users: Option<usize>,
    #[arg(long)]
    pub pi_fraction: Option<f64>,
    #[arg(long)]
    pub homophily: Option<f64>,
    #[arg(long)]
    pub mean_degree: Option<f64>,
    #[arg(long)]
    pub tweets_per_user: Option<usize>,
}

impl CommonArgs {
    /// Config file (or defaults) with these flags applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(t) = &self.territory {
            cfg.territory = Some(t.clone());
        }
        if let Some(m) = &self.manifest {
            cfg.manifest = Some(m.clone());
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if !self.family.is_empty() {
            cfg.families = self.family.iter().map(|f| f.parse()).collect::<Result<_>>()?;
        }
        if !self.classifier.is_empty() {
            cfg.classifiers = self.classifier.iter().map(|c| c.parse()).collect::<Result<_>>()?;
        }
        if let Some(q) = self.percentile {
            cfg.percentile = q;
        }
        if let Some(n) = self.permutations {
            cfg.permutations = n;
        }
        if let Some(r) = &self.rules {
            cfg.rules = Some(r.clone());
        }
        if !self.profiles.is_empty() {
            cfg.profiles = self.profiles.clone();
        }
        if !self.lexicon.is_empty() {
            cfg.lexicons = self.lexicon.clone();
        }
        if let Some(e) = &self.embeddings {
            cfg.embeddings = Some(e.clone());
        }
        if let Some(f) = &self.format {
            cfg.graph_format = f.clone();
        }
        if let Some(g) = &self.graph {
            cfg.graph = g.clone();
        }
        cfg.per_fold_vocabulary |= self.per_fold_vocabulary;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SynthArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = self.common.resolve()?;
        let s = &mut cfg.synth;
        if let Some(n) = self.n_users {
            s.n_users = n;
        }
        if let Some(p) = self.pi_fraction {
            s.pi_fraction = p;
        }
        if let Some(h) = self.homophily {
            s.homophily = h;
        }
        if let Some(d) = self.mean_degree {
            s.mean_degree = d;
        }
        if let Some(t) = self.tweets_per_user {
            s.tweets_per_user = t;
        }
        if let Some(t) = &self.common.territory {
            let Ok(id) = t.parse::<TerritoryId>();
            s.territory = Territory::builtin(&id)
                .ok_or_else(|| Error::InvalidInput(format!("unknown territory '{t}'")))?;
        }
        if self.common.seed.is_some() {
            s.seed = cfg.seed;
        }
        Ok(cfg)
    }
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Label(a) => cmd_label(&a.resolve()?),
        Command::Homophily(a) => cmd_homophily(&a.resolve()?),
        Command::Compare(a) => cmd_compare(&a.resolve()?),
        Command::Featurize(a) => cmd_featurize(&a.resolve()?),
        Command::Classify(a) => cmd_classify(&a.resolve()?),
        Command::Synth(a) => cmd_synth(&a.resolve()?),
        Command::ExportGraph(a) => cmd_export_graph(&a.resolve()?),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::InvalidInput(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Left-aligned text table for stdout.
fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    for row in rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

/// Labels every unlabelled user and writes the labelled dataset to
/// `out/dataset`, the per-group counts to `out/label_counts.csv` and a
/// review sheet to `out/review.csv`.
pub fn cmd_label(cfg: &RunConfig) -> Result<String> {
    let dataset = cfg.load_dataset()?;
    let rules = match &cfg.rules {
        Some(p) => RuleSet::from_file(p, Some(dataset.territory.clone()))?,
        None => labeler::builtin_rules(&dataset.territory)?,
    };
    let (labeled, report) = labeler::label_dataset(&dataset, &rules);
    cfg.ensure_out()?;
    ingest::save_dataset(&labeled, &cfg.out.join("dataset"))?;
    let territory = report.territory.clone();
    let rows: Vec<Vec<String>> = report
        .rows()
        .iter()
        .map(|(name, n)| vec![territory.clone(), name.to_string(), n.to_string()])
        .collect();
    write_rows(&cfg.out.join("label_counts.csv"), &LABEL_HEADER, &rows)?;
    labeler::export_for_review(&labeled, &cfg.out.join("review.csv"))?;
    if !report.conflicts.is_empty() {
        let path = cfg.out.join("conflicts.txt");
        fs::write(&path, report.conflicts.join("\n") + "\n").map_err(|e| Error::Io { path, source: e })?;
    }
    let mut out = text_table(&LABEL_HEADER, &rows);
    let _ = writeln!(out, "unlabeled: {}  conflicts: {}", report.unlabeled, report.conflicts.len());
    Ok(out)
}

fn format_cell(report: &Option<HomophilyReport>) -> String {
    match report {
        Some(r) => format!("{:.3} ({:.1e})", r.assortativity_r, r.p_value),
        None => "NA".into(),
    }
}

fn significance(graph: &Result<LabeledGraph>, cfg: &RunConfig, name: &str) -> Result<Option<HomophilyReport>> {
    let g = match graph {
        Ok(g) => g,
        Err(e) => return Err(Error::InvalidInput(format!("{name} graph: {e}"))),
    };
    match graph::homophily_significance(g, cfg.permutations, cfg.seed) {
        Ok(r) => Ok(Some(r)),
        Err(e @ (Error::DegenerateGraph(_) | Error::UndefinedAssortativity)) => {
            warn!("{name} graph: {e}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Assortativity of both graphs. `out/homophily.csv` holds one row per
/// territory with "r (p)" cells; `out/homophily_detail.csv` holds every
/// statistic. Graphs are also exported when `graph_format` is set.
pub fn cmd_homophily(cfg: &RunConfig) -> Result<String> {
    let dataset = cfg.load_dataset()?;
    let follow = graph::build_follow_graph(&dataset);
    let interaction = graph::build_interaction_graph(&dataset);
    let f = significance(&follow, cfg, "follow")?;
    let i = significance(&interaction, cfg, "interaction")?;
    if f.is_none() && i.is_none() {
        return Err(Error::DegenerateGraph("neither graph supports an assortativity estimate".into()));
    }
    cfg.ensure_out()?;
    let territory = dataset.territory.id.name().to_string();
    let row = vec![territory.clone(), format_cell(&f), format_cell(&i)];
    write_rows(&cfg.out.join("homophily.csv"), &HOMOPHILY_HEADER, [&row])?;
    let detail: Vec<Vec<String>> = [("follow", &f), ("interactions", &i)]
        .into_iter()
        .filter_map(|(name, r)| {
            r.as_ref().map(|r| {
                vec![
                    territory.clone(),
                    name.to_string(),
                    r.assortativity_r.to_string(),
                    format!("{:e}", r.p_value),
                    r.mww_statistic.to_string(),
                    format!("{:e}", r.mww_p_value),
                    r.n_nodes.to_string(),
                    r.n_edges.to_string(),
                    r.n_permutations.to_string(),
                    r.method.clone(),
                ]
            })
        })
        .collect();
    write_rows(&cfg.out.join("homophily_detail.csv"), &HOMOPHILY_DETAIL_HEADER, &detail)?;
    if !cfg.graph_format.is_empty() {
        export_graphs(cfg, follow.ok(), interaction.ok())?;
    }
    Ok(text_table(&HOMOPHILY_HEADER, &[row]))
}

fn export_graphs(cfg: &RunConfig, follow: Option<LabeledGraph>, interaction: Option<LabeledGraph>) -> Result<Vec<PathBuf>> {
    let format: GraphFormat = cfg.graph_format.parse()?;
    let wanted = match cfg.graph.to_ascii_lowercase().as_str() {
        "both" => (true, true),
        "follow" | "network" => (true, false),
        "interactions" | "interaction" => (false, true),
        other => return Err(Error::InvalidInput(format!("unknown graph '{other}'"))),
    };
    let mut written = Vec::new();
    for (want, g, name) in [(wanted.0, follow, "follow"), (wanted.1, interaction, "interactions")] {
        if let (true, Some(g)) = (want, g) {
            let path = cfg.out.join(format!("{name}.{}", format.extension()));
            graph::export_graph(&g, format, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Writes the selected graphs in `graph_format`.
pub fn cmd_export_graph(cfg: &RunConfig) -> Result<String> {
    let dataset = cfg.load_dataset()?;
    cfg.ensure_out()?;
    let follow = graph::build_follow_graph(&dataset)?;
    let interaction = graph::build_interaction_graph(&dataset)?;
    let written = export_graphs(cfg, Some(follow), Some(interaction))?;
    Ok(written.iter().map(|p| format!("wrote {}\n", p.display())).collect())
}

/// Welch comparison of the 30 behavioural features, written to
/// `out/comparison.csv`; direction is the group with the larger mean.
pub fn cmd_compare(cfg: &RunConfig) -> Result<String> {
    let dataset = cfg.load_dataset()?;
    let resources = cfg.text_resources()?;
    let (matrix, coverage) =
        features::behavioral_features(&dataset, &dataset.territory, &resources, &cfg.behavioral)?;
    let report = features::group_comparison_report(&matrix)?;
    cfg.ensure_out()?;
    let rows: Vec<Vec<String>> = report
        .iter()
        .map(|c| {
            vec![
                c.feature_id.to_string(),
                c.name.clone(),
                c.direction_label().to_string(),
                format!("{:.4}", c.result.statistic),
                c.result.df.map_or(String::new(), |d| format!("{d:.2}")),
                format!("{:.3e}", c.result.p_value),
                c.result.stars().to_string(),
                format!("{:.3}", coverage.fraction(c.feature_id - 1)),
            ]
        })
        .collect();
    write_rows(&cfg.out.join("comparison.csv"), &COMPARISON_HEADER, &rows)?;
    let shown: Vec<Vec<String>> = report
        .iter()
        .map(|c| {
            vec![
                format!("#{}", c.feature_id),
                c.name.clone(),
                match c.result.direction {
                    Direction::None => "-".into(),
                    _ => c.direction_label().into(),
                },
                c.result.stars().into(),
            ]
        })
        .collect();
    Ok(text_table(&["#", "feature", "more", "sig"], &shown))
}

fn build_family(cfg: &RunConfig, dataset: &Dataset, family: FeatureFamily, table: Option<&EmbeddingTable>) -> Result<features::FeatureMatrix> {
    match family {
        FeatureFamily::Behavioral => {
            let resources = cfg.text_resources()?;
            Ok(features::behavioral_features(dataset, &dataset.territory, &resources, &cfg.behavioral)?.0)
        }
        _ => features::family_features(dataset, family, table, cfg.percentile),
    }
}

fn needs_embeddings(families: &[FeatureFamily]) -> bool {
    families
        .iter()
        .any(|f| matches!(f, FeatureFamily::Timeline | FeatureFamily::Favourites))
}

/// Saves each selected family to `out/features_<family>.csv` with its JSON
/// descriptor.
pub fn cmd_featurize(cfg: &RunConfig) -> Result<String> {
    let dataset = cfg.load_dataset()?;
    cfg.ensure_out()?;
    let table = if needs_embeddings(&cfg.families) {
        Some(cfg.embeddings(&dataset)?)
    } else {
        None
    };
    let mut out = String::new();
    for &family in &cfg.families {
        let m = build_family(cfg, &dataset, family, table.as_ref())?;
        let path = cfg.out.join(format!("features_{}.csv", family.as_str().to_ascii_lowercase()));
        features::save_matrix(&m, &path)?;
        let _ = writeln!(out, "{family}: {} rows x {} columns -> {}", m.n_rows(), m.n_cols(), path.display());
    }
    Ok(out)
}

/// Cross-validates every family with every classifier. `out/results.csv`
/// has one row per family and one column per classifier;
/// `out/cv_folds.csv` has the per-fold counts.
pub fn cmd_classify(cfg: &RunConfig) -> Result<String> {
    let dataset = cfg.load_dataset()?;
    cfg.ensure_out()?;
    let families: Vec<FeatureFamily> = cfg
        .families
        .iter()
        .copied()
        .filter(|f| *f != FeatureFamily::Behavioral)
        .collect();
    let table = if needs_embeddings(&families) {
        Some(cfg.embeddings(&dataset)?)
    } else {
        None
    };
    let territory = dataset.territory.id.name().to_string();
    let mut reports: Vec<CvReport> = Vec::new();
    for &family in &families {
        let matrix = if cfg.per_fold_vocabulary {
            None
        } else {
            Some(build_family(cfg, &dataset, family, table.as_ref())?)
        };
        for &kind in &cfg.classifiers {
            let report = match &matrix {
                Some(m) => classify::cross_validate(m, kind, cfg.k, cfg.seed, &cfg.hyperparams)?,
                None => classify::cross_validate_per_fold(
                    &dataset,
                    family,
                    table.as_ref(),
                    cfg.percentile,
                    kind,
                    cfg.k,
                    cfg.seed,
                    &cfg.hyperparams,
                )?,
            };
            info!("{territory} {family} {kind}: {:.3}", report.micro_accuracy);
            reports.push(report.with_territory(territory.clone()));
        }
    }
    classify::write_results_csv(&reports, &cfg.out.join("results.csv"))?;
    let folds = reports.iter().flat_map(|r| {
        r.folds.iter().enumerate().map(move |(i, (c, t))| {
            vec![
                r.territory.clone(),
                r.family.to_string(),
                r.kind.code().to_string(),
                i.to_string(),
                c.to_string(),
                t.to_string(),
            ]
        })
    });
    write_rows(&cfg.out.join("cv_folds.csv"), &FOLDS_HEADER, folds)?;
    let rows: Vec<Vec<String>> = classify::results_table(&reports).into_iter().map(|r| r.to_vec()).collect();
    Ok(text_table(&classify::RESULTS_HEADER, &rows))
}

/// Writes a synthetic dataset, its text resources and the config to `out`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<String> {
    cfg.ensure_out()?;
    synth::write_synthetic(&cfg.synth, &cfg.out)?;
    let s = &cfg.synth;
    Ok(format!(
        "{} users ({} PI, {} AI), homophily {}, seed {} -> {}\n",
        s.n_users,
        s.n_pi(),
        s.n_users - s.n_pi(),
        s.homophily,
        s.seed,
        cfg.out.display()
    ))
}
