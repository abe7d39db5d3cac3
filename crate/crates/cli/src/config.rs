use heis_core::decompose::Strategy;
use heis_core::engulfing::EngulfSamples;
use heis_core::hnsections::HnSamples;
use heis_core::quasimetric::DEFAULT_REL_TOL;
use heis_core::threehop::SearchBudget;
use heis_core::validate::{ChainConfig, GridSpec};
use heis_core::{Builtin, HConvexFn, HPoint, HeisError};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl Default for FunctionConfig {
    fn default() -> Self {
        FunctionConfig { builtin: Some("sqnorm".into()), a: None, expr: None, n: None }
    }
}

impl FunctionConfig {
    pub fn build(&self) -> Result<HConvexFn, HeisError> {
        let bad = |m: &str| Err(HeisError::InvalidParameter(m.into()));
        match (&self.builtin, &self.expr) {
            (Some(_), Some(_)) => bad("function: give either \"builtin\" or \"expr\", not both"),
            (None, None) => bad("function: missing \"builtin\" or \"expr\""),
            (None, Some(text)) => {
                if self.a.is_some() {
                    return bad("function: \"A\" only applies to the quad builtin");
                }
                HConvexFn::from_expr(text, self.n.unwrap_or(1))
            }
            (Some(name), None) => {
                if self.a.is_some() && name != "quad" {
                    return bad("function: \"A\" only applies to the quad builtin");
                }
                let b = match name.as_str() {
                    "sqnorm" => Builtin::Sqnorm,
                    "sqnorm_t" => Builtin::SqnormT,
                    "wang" => Builtin::Wang,
                    "quad" => match &self.a {
                        Some(a) => Builtin::Quad { a: a.clone() },
                        None => return bad("function: quad needs a matrix \"A\""),
                    },
                    other => return Err(HeisError::InvalidParameter(format!("unknown builtin `{other}`"))),
                };
                let n = match (&b, self.n) {
                    (_, Some(n)) => n,
                    (Builtin::Quad { a }, None) => (a.len() / 2).max(1),
                    _ => 1,
                };
                HConvexFn::builtin(b, n)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TolConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
}

/// Sample counts; unset fields fall back to each command's defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub function: FunctionConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_dirs: Option<usize>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    pub samples: SampleConfig,
    pub grid: GridSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budgets: Option<SearchBudget>,
    pub tol: TolConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainConfig>,
    pub seed: u64,
}

/// Config parse failure with the 1-based position reported by the parser.
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError { message: e.to_string(), line: e.line(), column: e.column() })
    }

    pub fn rel_tol(&self) -> f64 {
        self.tol.rel_tol.unwrap_or(DEFAULT_REL_TOL)
    }

    pub fn point(&self, f: &HConvexFn, coords: Option<&Vec<f64>>, what: &str) -> Result<HPoint, HeisError> {
        match coords {
            None => Ok(HPoint::identity(f.n)),
            Some(c) => {
                let p = HPoint::from_flat(c)
                    .map_err(|e| HeisError::InvalidParameter(format!("{what}: {e}")))?;
                if p.dim() != f.n {
                    return Err(HeisError::DimensionMismatch { expected: f.n, got: p.dim() });
                }
                Ok(p)
            }
        }
    }

    pub fn center(&self, f: &HConvexFn) -> Result<HPoint, HeisError> {
        self.point(f, self.center.as_ref(), "center")
    }

    pub fn height(&self) -> Result<f64, HeisError> {
        match self.height {
            Some(s) if s > 0.0 && s.is_finite() => Ok(s),
            Some(s) => Err(HeisError::InvalidParameter(format!("height must be positive, got {s}"))),
            None => Ok(1.0),
        }
    }

    /// The configured points, or `target` alone.
    pub fn targets(&self, f: &HConvexFn) -> Result<Vec<HPoint>, HeisError> {
        let mut out = Vec::new();
        if let Some(t) = &self.target {
            out.push(self.point(f, Some(t), "target")?);
        }
        for c in self.points.iter().flatten() {
            out.push(self.point(f, Some(c), "points")?);
        }
        Ok(out)
    }

    pub fn engulf_samples(&self, seed: u64) -> EngulfSamples {
        let d = EngulfSamples::default();
        let s = &self.samples;
        EngulfSamples {
            pairs: s.pairs.unwrap_or(d.pairs),
            probes: s.probes.unwrap_or(d.probes),
            seed,
            radius: s.radius.unwrap_or(d.radius),
            s_min: s.s_min.unwrap_or(d.s_min),
            s_max: s.s_max.unwrap_or(d.s_max),
        }
    }

    pub fn hn_samples(&self, seed: u64, budget: &SearchBudget) -> HnSamples {
        let d = HnSamples::default();
        let s = &self.samples;
        HnSamples {
            pairs: s.pairs.unwrap_or(d.pairs),
            probes: s.probes.unwrap_or(d.probes),
            seed,
            radius: s.radius.unwrap_or(d.radius),
            s_min: s.s_min.unwrap_or(d.s_min),
            s_max: s.s_max.unwrap_or(d.s_max),
            budget: budget.clone(),
        }
    }
}
