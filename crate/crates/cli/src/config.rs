use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fplap_core::{critical_exponents, ProblemParams, QuadratureConfig};
use serde::{Deserialize, Serialize};

pub const MAX_GRID_COUNT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub scale: Scale,
}

impl GridSpec {
    /// Parses `min:max:count` with an optional `:log` or `:linear` suffix.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            bail!("grid `{text}` is not of the form min:max:count[:log|:linear]");
        }
        let scale = match parts.get(3).copied() {
            None | Some("linear") => Scale::Linear,
            Some("log") => Scale::Log,
            Some(other) => bail!("unknown grid scale `{other}`"),
        };
        Ok(GridSpec {
            min: parts[0].parse().with_context(|| format!("grid min in `{text}`"))?,
            max: parts[1].parse().with_context(|| format!("grid max in `{text}`"))?,
            count: parts[2].parse().with_context(|| format!("grid count in `{text}`"))?,
            scale,
        })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let u = i as f64 / last;
                match self.scale {
                    Scale::Linear => self.min + u * (self.max - self.min),
                    Scale::Log => (self.min.ln() + u * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }

    fn validate(&self, field: &str) -> Result<()> {
        if !(1..=MAX_GRID_COUNT).contains(&self.count) {
            bail!("{field}.count: must lie in [1, {MAX_GRID_COUNT}], got {}", self.count);
        }
        if !(self.min.is_finite() && self.max.is_finite()) {
            bail!("{field}: bounds must be finite");
        }
        if self.count > 1 && !(self.min < self.max) {
            bail!("{field}: need min < max, got {} and {}", self.min, self.max);
        }
        if self.scale == Scale::Log && !(self.min > 0.0) {
            bail!("{field}.min: a log grid needs a positive minimum");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    /// Exponents for the sign scan; defaults to 40 points across the
    /// admissible range.
    #[serde(default)]
    pub theta: Option<GridSpec>,
    /// Starting radii for barrier checks; defaults to `[1, 1e4]`, 4 per decade.
    #[serde(default)]
    pub r: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    pub samples: u64,
    pub grid_nodes: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            samples: 200_000,
            grid_nodes: 512,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    /// Consecutive schedule pairs checked as barriers in a report.
    pub max_barrier_steps: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings { max_barrier_steps: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ProblemParams,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub oracle: OracleSettings,
    #[serde(default)]
    pub pipeline: PipelineSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<u32>,
    pub s: Option<f64>,
    pub p: Option<f64>,
    pub t: Option<f64>,
    pub m: Option<f64>,
    pub rel_tol: Option<f64>,
    pub delta_diag: Option<f64>,
    pub lambda_tail: Option<f64>,
    pub max_panels: Option<usize>,
    pub angular_nodes: Option<usize>,
    pub theta_grid: Option<GridSpec>,
    pub r_grid: Option<GridSpec>,
    pub oracle_samples: Option<u64>,
    pub grid_nodes: Option<usize>,
    pub max_barrier_steps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let base = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                Some(Self::from_json(&text).with_context(|| format!("parsing config {}", path.display()))?)
            }
            None => None,
        };
        let config = Self::merge(base, overrides)?;
        config.validate()?;
        Ok(config)
    }

    fn merge(base: Option<RunConfig>, o: &Overrides) -> Result<Self> {
        let params = match &base {
            Some(cfg) => {
                let pp = cfg.params;
                ProblemParams::new(
                    o.n.unwrap_or(pp.n()),
                    o.s.unwrap_or(pp.s()),
                    o.p.unwrap_or(pp.p()),
                    o.t.unwrap_or(pp.t()),
                    o.m.unwrap_or(pp.m()),
                )?
            }
            None => {
                let need = |name: &str| anyhow::anyhow!("params.{name}: missing (give --{name} or --config)");
                ProblemParams::new(
                    o.n.ok_or_else(|| need("n"))?,
                    o.s.ok_or_else(|| need("s"))?,
                    o.p.ok_or_else(|| need("p"))?,
                    o.t.ok_or_else(|| need("t"))?,
                    o.m.ok_or_else(|| need("m"))?,
                )?
            }
        };
        let mut cfg = base.unwrap_or(RunConfig {
            params,
            quadrature: QuadratureConfig::default(),
            grids: Grids::default(),
            oracle: OracleSettings::default(),
            pipeline: PipelineSettings::default(),
            seed: 0,
            output_dir: None,
        });
        cfg.params = params;
        let q = &mut cfg.quadrature;
        q.rel_tol = o.rel_tol.unwrap_or(q.rel_tol);
        q.delta_diag = o.delta_diag.unwrap_or(q.delta_diag);
        q.lambda_tail = o.lambda_tail.unwrap_or(q.lambda_tail);
        q.max_panels = o.max_panels.unwrap_or(q.max_panels);
        q.angular_nodes = o.angular_nodes.unwrap_or(q.angular_nodes);
        cfg.grids.theta = o.theta_grid.or(cfg.grids.theta);
        cfg.grids.r = o.r_grid.or(cfg.grids.r);
        cfg.oracle.samples = o.oracle_samples.unwrap_or(cfg.oracle.samples);
        cfg.oracle.grid_nodes = o.grid_nodes.unwrap_or(cfg.oracle.grid_nodes);
        cfg.pipeline.max_barrier_steps = o.max_barrier_steps.unwrap_or(cfg.pipeline.max_barrier_steps);
        cfg.seed = o.seed.unwrap_or(cfg.seed);
        if o.out.is_some() {
            cfg.output_dir = o.out.clone();
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate().context("quadrature")?;
        if let Some(g) = &self.grids.theta {
            g.validate("grids.theta")?;
        }
        if let Some(g) = &self.grids.r {
            g.validate("grids.r")?;
            if !(g.min > 0.0) {
                bail!("grids.r.min: radii must be positive");
            }
        }
        if self.oracle.samples == 0 {
            bail!("oracle.samples: must be positive");
        }
        Ok(())
    }

    pub fn theta_points(&self) -> Vec<f64> {
        match &self.grids.theta {
            Some(g) => g.points(),
            None => {
                let pm1 = self.params.p() - 1.0;
                let ex = critical_exponents(&self.params);
                GridSpec {
                    min: -0.9 * self.params.sp() / pm1,
                    max: 0.95 * ex.theta_max,
                    count: 40,
                    scale: Scale::Linear,
                }
                .points()
            }
        }
    }

    pub fn radius_grid(&self) -> fplap_core::barriers::RadiusGrid {
        match &self.grids.r {
            Some(g) => fplap_core::barriers::RadiusGrid {
                radii: g.points(),
                extend: true,
            },
            None => fplap_core::barriers::RadiusGrid::standard(),
        }
    }
}
