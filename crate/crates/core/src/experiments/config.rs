//! Experiment configuration: TOML (or JSON) merged over per-experiment
//! defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{TvSolver, ALPHA_GRID};
use crate::coarsening::{build_hierarchy, geometric_sizes, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::generators::{sample_graph, sample_sbm, GraphFamily, SbmModel};
use crate::graph::{bandlimited_signal, graph_filter, Graph, GraphSignal, NormalizedAdjacency};
use crate::io::{load_edge_list, load_signals};
use crate::linalg::Spectrum;
use crate::models::{gcg, gdec, two_layer, FitConfig, GeneratorModel, InitMode, ModelKind};
use crate::signals::{diffused_white_signal, piecewise_constant, random_lowpass_coeffs, white_signal, NoiseSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FitCurves,
    Eigsim,
    CompareBl,
    CompareDw,
    JacobianCheck,
    BoundCurve,
    DenoiseFile,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::FitCurves,
        ExperimentKind::Eigsim,
        ExperimentKind::CompareBl,
        ExperimentKind::CompareDw,
        ExperimentKind::JacobianCheck,
        ExperimentKind::BoundCurve,
        ExperimentKind::DenoiseFile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FitCurves => "fit-curves",
            ExperimentKind::Eigsim => "eigsim",
            ExperimentKind::CompareBl => "compare-bl",
            ExperimentKind::CompareDw => "compare-dw",
            ExperimentKind::JacobianCheck => "jacobian-check",
            ExperimentKind::BoundCurve => "bound-curve",
            ExperimentKind::DenoiseFile => "denoise-file",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Built-in default configuration.
    pub fn defaults(self) -> &'static str {
        match self {
            ExperimentKind::FitCurves => include_str!("../../configs/fit-curves.toml"),
            ExperimentKind::Eigsim => include_str!("../../configs/eigsim.toml"),
            ExperimentKind::CompareBl => include_str!("../../configs/compare-bl.toml"),
            ExperimentKind::CompareDw => include_str!("../../configs/compare-dw.toml"),
            ExperimentKind::JacobianCheck => include_str!("../../configs/jacobian-check.toml"),
            ExperimentKind::BoundCurve => include_str!("../../configs/bound-curve.toml"),
            ExperimentKind::DenoiseFile => include_str!("../../configs/denoise-file.toml"),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Graph with a node count, used where the size is swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphModel {
    /// Balanced SBM.
    Sbm { communities: usize, p_in: f64, p_out: f64 },
    Family { family: GraphFamily },
}

impl GraphModel {
    /// Draws a connected graph, with planted labels for the SBM.
    pub fn draw(&self, n_nodes: usize, seed: u64) -> Result<(Graph, Option<Vec<usize>>)> {
        match *self {
            GraphModel::Sbm { communities, p_in, p_out } => {
                let model = SbmModel::balanced(n_nodes, communities, p_in, p_out)?;
                Ok((sample_sbm(&model, seed)?, Some(model.assignment().to_vec())))
            }
            GraphModel::Family { family } => Ok((sample_graph(family, n_nodes, seed)?, None)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    EdgeList { edge_list: PathBuf },
    Random {
        n_nodes: usize,
        #[serde(flatten)]
        model: GraphModel,
    },
}

impl GraphSpec {
    pub fn draw(&self, seed: u64) -> Result<(Graph, Option<Vec<usize>>)> {
        match self {
            GraphSpec::EdgeList { edge_list } => Ok((load_edge_list(edge_list, None)?, None)),
            GraphSpec::Random { n_nodes, model } => model.draw(*n_nodes, seed),
        }
    }

    /// Planted community count, when the spec has one.
    pub fn communities(&self) -> Option<usize> {
        match self {
            GraphSpec::Random {
                model: GraphModel::Sbm { communities, .. },
                ..
            } => Some(*communities),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    /// Community labels `0, 1, …` of the planted partition.
    PiecewiseConstant,
    /// Leading `k` eigenvectors of `Ã` with standard-normal coefficients.
    Bandlimited { k: usize },
    /// Graph median of a random low-pass filter applied to white noise.
    DiffusedWhite {
        #[serde(default = "default_taps")]
        taps: usize,
    },
    Random,
    /// Column `column` of a signal CSV.
    File {
        path: PathBuf,
        #[serde(default)]
        column: usize,
    },
}

fn default_taps() -> usize {
    3
}

/// Everything a signal generator may need about one graph draw.
pub struct GraphContext<'a> {
    pub graph: &'a Graph,
    pub assignment: Option<&'a [usize]>,
    pub spectrum: &'a Spectrum,
}

impl SignalSpec {
    pub fn generate(&self, ctx: &GraphContext<'_>, seed: u64) -> Result<GraphSignal> {
        let n = ctx.graph.n_nodes();
        match self {
            SignalSpec::PiecewiseConstant => ctx
                .assignment
                .map(piecewise_constant)
                .ok_or_else(|| Error::Config("piecewise-constant signals need an SBM graph".into())),
            SignalSpec::Bandlimited { k } => {
                let coeffs = white_signal(*k, seed);
                bandlimited_signal(ctx.spectrum, *k, coeffs.as_slice().expect("contiguous"))
            }
            SignalSpec::DiffusedWhite { taps } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let coeffs = random_lowpass_coeffs(&mut rng, *taps);
                diffused_white_signal(ctx.graph, &coeffs, super::split_seed(seed, 0))
            }
            SignalSpec::Random => Ok(white_signal(n, seed)),
            SignalSpec::File { path, column } => {
                let s = load_signals(path)?;
                if s.nrows() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "{} has {} nodes, graph has {n}",
                        path.display(),
                        s.nrows()
                    )));
                }
                if *column >= s.ncols() {
                    return Err(Error::Config(format!(
                        "{} has {} signal columns, asked for column {column}",
                        path.display(),
                        s.ncols()
                    )));
                }
                Ok(s.column(*column).to_owned())
            }
        }
    }
}

/// Architecture of one network denoiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    /// Taps of `H = Σ h_m Ã^m` for GCG kinds.
    #[serde(default = "default_filter")]
    pub filter: Vec<f64>,
    /// Number of `H` applications for deep GCG.
    #[serde(default = "default_layers")]
    pub layers: usize,
    /// Hidden width (`F` for two-layer kinds).
    pub width: usize,
    /// Input feature count of deep kinds; the hidden width by default.
    #[serde(default)]
    pub input_width: Option<usize>,
    /// Layer sizes `N^(0) < … < N` for GDec kinds.
    #[serde(default)]
    pub sizes: Vec<usize>,
    /// Without explicit sizes, GDec kinds interpolate geometrically from
    /// this coarsest size to the graph size.
    #[serde(default)]
    pub coarse_size: Option<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Standard normal for two-layer kinds and He scaling for deep kinds
    /// unless set.
    #[serde(default)]
    pub init: Option<InitMode>,
    /// Overrides the experiment's fit settings for this model.
    #[serde(default)]
    pub fit: Option<FitConfig>,
}

fn default_filter() -> Vec<f64> {
    vec![0.0, 0.0, 1.0]
}

fn default_layers() -> usize {
    4
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl ModelSpec {
    pub fn init_mode(&self) -> InitMode {
        self.init.unwrap_or(if self.kind.is_simplified() {
            InitMode::StandardNormal
        } else {
            InitMode::HeScaled
        })
    }

    /// GDec layer sizes for a graph with `n` nodes.
    pub fn gdec_sizes(&self, n: usize) -> Result<Vec<usize>> {
        if !self.sizes.is_empty() {
            return Ok(self.sizes.clone());
        }
        let n0 = self.coarse_size.ok_or_else(|| {
            Error::Config(format!("model {}: GDec needs sizes or coarse_size", self.name))
        })?;
        let layers = if self.kind.is_simplified() { 1 } else { self.layers };
        geometric_sizes(n0, n, layers)
    }

    /// The fixed operator of a two-layer kind: `H` or the single upsampler.
    pub fn two_layer_operator(&self, g: &Graph, adj: &NormalizedAdjacency) -> Result<ndarray::Array2<f64>> {
        match self.kind {
            ModelKind::Gcg2 | ModelKind::Gcg => graph_filter(adj, &self.filter),
            ModelKind::Gdec2 | ModelKind::Gdec => {
                let sizes = self.gdec_sizes(g.n_nodes())?;
                if sizes.len() != 2 {
                    return Err(Error::Config(format!(
                        "model {}: two-layer GDec needs sizes [N0, N], got {sizes:?}",
                        self.name
                    )));
                }
                Ok(build_hierarchy(g, &sizes, self.gamma)?.upsamplers.swap_remove(0))
            }
        }
    }

    pub fn build(&self, g: &Graph, adj: &NormalizedAdjacency, seed: u64) -> Result<GeneratorModel> {
        let init = self.init_mode();
        let input_width = self.input_width.unwrap_or(self.width);
        match self.kind {
            ModelKind::Gcg2 | ModelKind::Gdec2 => {
                two_layer(self.kind, &self.two_layer_operator(g, adj)?, self.width, init, seed)
            }
            ModelKind::Gcg => gcg(&graph_filter(adj, &self.filter)?, self.layers, input_width, self.width, init, seed),
            ModelKind::Gdec => {
                let h = build_hierarchy(g, &self.gdec_sizes(g.n_nodes())?, self.gamma)?;
                gdec(&h.upsamplers, input_width, self.width, init, seed)
            }
        }
    }
}

/// Classical baselines run by the comparison experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    /// Bandwidth of BL; the planted community count by default.
    #[serde(default)]
    pub bl_k: Option<usize>,
    /// Regularization weights tried for LR and TV.
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<f64>,
    /// LR with the normalized Laplacian instead of the combinatorial one.
    #[serde(default)]
    pub lr_normalized: bool,
    #[serde(default = "default_tv_iters")]
    pub tv_iters: usize,
    #[serde(default = "default_tv_step")]
    pub tv_step: f64,
}

fn default_alpha_grid() -> Vec<f64> {
    ALPHA_GRID.to_vec()
}

fn default_tv_iters() -> usize {
    TvSolver::default().iters
}

fn default_tv_step() -> f64 {
    TvSolver::default().step
}

impl Default for BaselineSpec {
    fn default() -> Self {
        BaselineSpec {
            bl_k: None,
            alpha_grid: default_alpha_grid(),
            lr_normalized: false,
            tv_iters: default_tv_iters(),
            tv_step: default_tv_step(),
        }
    }
}

impl BaselineSpec {
    pub fn tv_solver(&self) -> TvSolver {
        TvSolver {
            iters: self.tv_iters,
            step: self.tv_step,
        }
    }
}

/// One row family of the eigenvector-similarity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigsimFamily {
    pub name: String,
    /// Number of leading eigenvectors compared.
    pub k: usize,
    #[serde(flatten)]
    pub model: GraphModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigsimSpec {
    pub sizes: Vec<usize>,
    /// `gcg2` (filter `H`) or `gdec2` (sizes `[K, N]`).
    pub architecture: ModelKind,
    #[serde(default = "default_filter")]
    pub filter: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub families: Vec<EigsimFamily>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobianSpec {
    /// Two-layer kinds to check.
    pub kinds: Vec<ModelKind>,
    /// Monte-Carlo realization counts.
    pub samples: Vec<usize>,
    /// Hidden units per realization (even).
    #[serde(default = "default_mc_width")]
    pub width: usize,
    #[serde(default = "default_filter")]
    pub filter: Vec<f64>,
    /// Coarse size `N^(0)` of the GDec upsampler.
    pub coarse_size: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_mc_width() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    /// The two-layer network whose Jacobian defines the bound.
    pub model: ModelSpec,
    /// Step size as a fraction of `1/σ_1²`.
    pub eta_scale: f64,
    pub k: usize,
    pub xi: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenoiseSpec {
    pub graph: PathBuf,
    pub signal: PathBuf,
    /// Clean reference signals with the same layout as `signal`.
    #[serde(default)]
    pub reference: Option<PathBuf>,
    /// Methods by name: `bl`, `lr`, `tv`, `med` or a model name.
    pub methods: Vec<String>,
    #[serde(default)]
    pub bl_k: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_med_passes")]
    pub med_passes: usize,
    /// Write the fitted network weights next to the estimates.
    #[serde(default)]
    pub checkpoints: bool,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_med_passes() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub trials: usize,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub graph: Option<GraphSpec>,
    #[serde(default)]
    pub signal: Option<SignalSpec>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub baselines: BaselineSpec,
    #[serde(default)]
    pub eigsim: Option<EigsimSpec>,
    #[serde(default)]
    pub jacobian: Option<JacobianSpec>,
    #[serde(default)]
    pub bound: Option<BoundSpec>,
    #[serde(default)]
    pub denoise: Option<DenoiseSpec>,
}

fn missing(section: &str, kind: ExperimentKind) -> Error {
    Error::Config(format!("{kind} needs a [{section}] section"))
}

impl ExperimentConfig {
    /// Defaults of `kind` with no overrides.
    pub fn defaults(kind: ExperimentKind) -> Result<Self> {
        Self::from_value(kind, toml::Table::new())
    }

    /// Reads a TOML or `.json` file and merges it over the defaults of
    /// `kind`. Relative paths inside are resolved against the file's
    /// directory.
    pub fn load(kind: ExperimentKind, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let table: toml::Table = if path.extension().is_some_and(|e| e == "json") {
            let json: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            toml::Table::try_from(json).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            text.parse()
                .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))?
        };
        let mut cfg = Self::from_value(kind, table)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn from_toml_str(kind: ExperimentKind, text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_value(kind, table)
    }

    fn from_value(kind: ExperimentKind, user: toml::Table) -> Result<Self> {
        if let Some(v) = user.get("experiment") {
            if v.as_str() != Some(kind.name()) {
                return Err(Error::Config(format!(
                    "config is for experiment {v}, not {kind}"
                )));
            }
        }
        let mut merged: toml::Table = kind.defaults().parse().expect("built-in defaults parse");
        merge(&mut merged, user);
        let cfg: ExperimentConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(GraphSpec::EdgeList { edge_list }) = &mut self.graph {
            fix(edge_list);
        }
        if let Some(SignalSpec::File { path, .. }) = &mut self.signal {
            fix(path);
        }
        if let Some(d) = &mut self.denoise {
            fix(&mut d.graph);
            fix(&mut d.signal);
            if let Some(r) = &mut d.reference {
                fix(r);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(noise) = &self.noise {
            noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(fit) = &self.fit {
            fit.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut names = std::collections::HashSet::new();
        for m in &self.models {
            if !names.insert(m.name.as_str()) {
                return Err(Error::Config(format!("duplicate model name {}", m.name)));
            }
            if m.width == 0 {
                return Err(Error::Config(format!("model {}: width must be positive", m.name)));
            }
            if let Some(fit) = &m.fit {
                fit.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<&GraphSpec> {
        self.graph.as_ref().ok_or_else(|| missing("graph", self.experiment))
    }

    pub fn signal(&self) -> Result<&SignalSpec> {
        self.signal.as_ref().ok_or_else(|| missing("signal", self.experiment))
    }

    pub fn noise(&self) -> Result<&NoiseSpec> {
        self.noise.as_ref().ok_or_else(|| missing("noise", self.experiment))
    }

    /// Fit settings of `model`, falling back to the experiment's.
    pub fn fit_for(&self, model: &ModelSpec) -> Result<FitConfig> {
        model
            .fit
            .clone()
            .or_else(|| self.fit.clone())
            .ok_or_else(|| missing("fit", self.experiment))
    }

    pub fn eigsim(&self) -> Result<&EigsimSpec> {
        self.eigsim.as_ref().ok_or_else(|| missing("eigsim", self.experiment))
    }

    pub fn jacobian(&self) -> Result<&JacobianSpec> {
        self.jacobian.as_ref().ok_or_else(|| missing("jacobian", self.experiment))
    }

    pub fn bound(&self) -> Result<&BoundSpec> {
        self.bound.as_ref().ok_or_else(|| missing("bound", self.experiment))
    }

    pub fn denoise(&self) -> Result<&DenoiseSpec> {
        self.denoise.as_ref().ok_or_else(|| missing("denoise", self.experiment))
    }
}

/// Tables merge key by key; any other value in `over` replaces the base.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
