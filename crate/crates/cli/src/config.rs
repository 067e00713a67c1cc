//! Experiment configuration: a single JSON file, with every CLI flag
//! mirroring a config key (flags win).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use colcomplete_core::datagen::NoiseMode;
use colcomplete_core::polybasis::default_grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    SweepD,
    SweepNoise,
    SweepMinD,
    TheoryReport,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::SweepD => "sweep-d",
            Mode::SweepNoise => "sweep-noise",
            Mode::SweepMinD => "sweep-min-d",
            Mode::TheoryReport => "theory-report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Qpma,
    Cur1,
    Cur2,
    Cur3,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Qpma => "qpma",
            Method::Cur1 => "cur1",
            Method::Cur2 => "cur2",
            Method::Cur3 => "cur3",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSpec {
    #[default]
    Default,
    File {
        path: PathBuf,
    },
    Values {
        values: Vec<f64>,
    },
}

impl GridSpec {
    /// Resolve to `m` concrete grid points.
    pub fn resolve(&self, m: usize) -> anyhow::Result<Vec<f64>> {
        match self {
            GridSpec::Default => Ok(default_grid(m)),
            GridSpec::Values { values } => {
                if values.len() != m {
                    bail!("grid has {} values but m = {m}", values.len());
                }
                Ok(values.clone())
            }
            GridSpec::File { path } => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading grid file {}", path.display()))?;
                let mut grid = Vec::new();
                for (lineno, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let v: f64 = line
                        .parse()
                        .with_context(|| format!("grid file line {}: '{line}'", lineno + 1))?;
                    grid.push(v);
                }
                if grid.len() != m {
                    bail!("grid file holds {} points but m = {m}", grid.len());
                }
                Ok(grid)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSpec {
    Synthetic {
        n: usize,
        m: usize,
        sigma: f64,
        #[serde(default)]
        noise: Option<NoiseMode>,
        #[serde(default)]
        grid: Option<GridSpec>,
    },
    File {
        path: PathBuf,
        /// Observed column indices (0-based unless `one_based` is set).
        columns: Vec<usize>,
        #[serde(default)]
        grid: Option<GridSpec>,
    },
}

/// Per-stage solver parameters; the per-trial seed is supplied by the
/// runner, everything else comes from here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub target_rank: usize,
    pub degree: usize,
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub grad_tol: Option<f64>,
    #[serde(default)]
    pub normalize_basis: bool,
}

fn default_max_iters() -> usize {
    5000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub data: DataSpec,
    pub solver: SolverParams,
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    /// Sampled-column count for solve / sweep-noise on synthetic data.
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub d_values: Option<Vec<usize>>,
    #[serde(default)]
    pub sigma_values: Option<Vec<f64>>,
    #[serde(default)]
    pub r_values: Option<Vec<usize>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub force: bool,
    #[serde(default)]
    pub save_models: bool,
    /// Record per-trial wall-clock in results.csv. Off by default so
    /// identical configs reproduce results.csv bit-for-bit.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub one_based: bool,
    /// For file data: estimate the baseline row factor from the fitted
    /// polynomial model instead of sampling true rows.
    #[serde(default)]
    pub hybrid_rows: bool,
}

fn default_trials() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        Self::load_with_base(path, false)
    }

    /// Load with the CLI `--one-based` flag applied before index
    /// conversion.
    pub fn load_with_base(path: impl AsRef<Path>, force_one_based: bool) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.one_based |= force_one_based;
        cfg.apply_index_base()?;
        Ok(cfg)
    }

    /// Convert 1-based column indices from the config to the internal
    /// 0-based convention.
    fn apply_index_base(&mut self) -> anyhow::Result<()> {
        if !self.one_based {
            return Ok(());
        }
        if let DataSpec::File { columns, .. } = &mut self.data {
            for c in columns.iter_mut() {
                if *c == 0 {
                    bail!("column index 0 is invalid with one_based = true");
                }
                *c -= 1;
            }
        }
        self.one_based = false;
        Ok(())
    }

    pub fn methods(&self) -> Vec<Method> {
        self.methods.clone().unwrap_or_else(|| vec![Method::Qpma])
    }

    pub fn dims(&self) -> anyhow::Result<(usize, usize)> {
        match &self.data {
            DataSpec::Synthetic { n, m, .. } => Ok((*n, *m)),
            DataSpec::File { path, .. } => {
                let mtx = colcomplete_core::io::load_csv(path)?;
                Ok((mtx.rows(), mtx.cols()))
            }
        }
    }

    /// Static diagnostics: every violated constraint, without running.
    pub fn validate(&self) -> Vec<String> {
        let mut diags = Vec::new();
        let r = self.solver.target_rank;
        let l = self.solver.degree;

        if self.trials == 0 {
            diags.push("trial count must be at least 1".to_string());
        }
        if r == 0 {
            diags.push("target rank must be at least 1".to_string());
        }
        if self.solver.max_iters == 0 {
            diags.push("max_iters must be at least 1".to_string());
        }

        let dims = match &self.data {
            DataSpec::Synthetic { n, m, sigma, .. } => {
                if *sigma < 0.0 {
                    diags.push(format!("noise sigma must be non-negative, got {sigma}"));
                }
                Some((*n, *m))
            }
            DataSpec::File { path, columns, .. } => {
                if !path.exists() {
                    diags.push(format!("input matrix {} does not exist", path.display()));
                }
                if columns.is_empty() {
                    diags.push("file data needs at least one observed column".to_string());
                }
                None
            }
        };

        if let Some((n, m)) = dims {
            if l + 1 > m {
                diags.push(format!(
                    "basis has more rows (degree+1 = {}) than grid points (m = {m})",
                    l + 1
                ));
            }
            if r > n.min(m) {
                diags.push(format!("target rank {r} exceeds matrix dimensions {n}x{m}"));
            }
            let mut check_d = |d: usize| {
                if d > m {
                    diags.push(format!("d = {d} exceeds the {m} available columns"));
                }
                if r > d {
                    diags.push(format!(
                        "target rank {r} exceeds sampled columns d = {d} (regime r ≤ d ≤ k)"
                    ));
                }
                for method in self.methods() {
                    let col_budget = match method {
                        Method::Qpma | Method::Cur1 => d,
                        Method::Cur2 | Method::Cur3 => d / 2,
                    };
                    if col_budget < r {
                        diags.push(format!(
                            "{} at d = {d} samples {col_budget} columns, below target rank {r}",
                            method.as_str()
                        ));
                    }
                }
            };
            match self.mode {
                Mode::SweepD => match &self.d_values {
                    Some(ds) if !ds.is_empty() => ds.iter().for_each(|&d| check_d(d)),
                    _ => diags.push("sweep-d requires non-empty d_values".to_string()),
                },
                Mode::SweepNoise => {
                    match self.d {
                        Some(d) => check_d(d),
                        None => diags.push("sweep-noise requires d".to_string()),
                    }
                    match &self.sigma_values {
                        Some(s) if !s.is_empty() => {
                            if s.iter().any(|&x| x < 0.0) {
                                diags.push("sigma_values must be non-negative".to_string());
                            }
                        }
                        _ => diags.push("sweep-noise requires non-empty sigma_values".to_string()),
                    }
                }
                Mode::SweepMinD => match &self.r_values {
                    Some(rs) if !rs.is_empty() => {
                        for &rv in rs {
                            if rv == 0 || rv > n.min(m) {
                                diags.push(format!("r value {rv} outside 1..={}", n.min(m)));
                            }
                        }
                    }
                    _ => diags.push("sweep-min-d requires non-empty r_values".to_string()),
                },
                Mode::Solve | Mode::TheoryReport => match self.d {
                    Some(d) => check_d(d),
                    None => diags.push(format!(
                        "{} on synthetic data requires d",
                        self.mode.as_str()
                    )),
                },
            }
        }
        diags
    }
}
