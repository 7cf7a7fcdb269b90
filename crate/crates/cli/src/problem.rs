use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use lyapcert::expr::{parse, Expr};
use lyapcert::gozlan::{GozlanSettings, A_DEFAULT};
use lyapcert::jump::{BirthDeathChain, JumpFunction, Rate};
use lyapcert::GridSpec;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Diffusion,
    Unbounded,
    Jump,
    Gozlan,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Diffusion => "diffusion",
            Kind::Unbounded => "unbounded",
            Kind::Jump => "jump",
            Kind::Gozlan => "gozlan",
        };
        f.write_str(s)
    }
}

/// Rate given as a formula in `i`, a table, or a formula with fixed head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSpec {
    Formula(String),
    Table(Vec<f64>),
    Headed { formula: String, head: Vec<f64> },
}

/// Deltas as a single number or a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Deltas {
    One(f64),
    Many(Vec<f64>),
}

impl Deltas {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Deltas::One(d) => vec![*d],
            Deltas::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GozlanSpec {
    pub eps: Option<f64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub eps3: Option<f64>,
    pub a: Option<f64>,
    pub shells: Option<Vec<f64>>,
    pub directions: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: Kind,
    #[serde(default = "one")]
    pub m: usize,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    pub v: Option<String>,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<String>,
    #[serde(rename = "lnW", default, skip_serializing_if = "Option::is_none")]
    pub ln_w: Option<String>,
    #[serde(rename = "U", default, skip_serializing_if = "Option::is_none")]
    pub u: Option<String>,
    /// Upper triangle or full matrix of expressions.
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub birth: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub death: Option<RateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Deltas>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gozlan: Option<GozlanSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_range: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_steps: Option<usize>,
}

pub const KINDS: [&str; 4] = ["diffusion", "unbounded", "jump", "gozlan"];

fn one() -> usize {
    1
}

pub const DEFAULT_N_MAX: usize = 64;
pub const DEFAULT_I_MAX: usize = 100_000;

/// A problem whose expressions have been parsed and checked.
pub enum Parsed {
    Diffusion {
        v: Expr,
        w: Option<Expr>,
        u: Option<Expr>,
        x0: Vec<f64>,
        grid: GridSpec,
    },
    Unbounded {
        a: Vec<Vec<Expr>>,
        v: Expr,
        w: Expr,
        x0: Vec<f64>,
        grid: GridSpec,
    },
    Jump {
        chain: BirthDeathChain,
        w: Option<JumpFunction>,
        i_max: usize,
        range: (usize, usize),
    },
    Gozlan {
        v: Expr,
        settings: GozlanSettings,
        x0: Vec<f64>,
    },
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::MalformedJson(format!("{}: {e}", path.display())))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, CliError> {
        match value.get("kind") {
            None => return Err(CliError::Schema("missing field `kind`".into())),
            Some(serde_json::Value::String(k)) if !KINDS.contains(&k.as_str()) => {
                return Err(CliError::UnknownKind(k.clone()))
            }
            _ => {}
        }
        serde_json::from_value(value).map_err(|e| CliError::Schema(e.to_string()))
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.delta.as_ref().map(Deltas::to_vec).unwrap_or_default()
    }

    pub fn n_max(&self) -> usize {
        self.n_max.unwrap_or(DEFAULT_N_MAX)
    }

    fn need<'a, T>(&self, field: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        field.as_ref().ok_or_else(|| CliError::MissingField {
            kind: self.kind,
            field: name.to_string(),
        })
    }

    fn expr(&self, text: &str, field: &str) -> Result<Expr, CliError> {
        parse(text, self.m).map_err(|e| CliError::BadExpression {
            field: field.to_string(),
            message: e.to_string(),
        })
    }

    fn x0(&self) -> Result<Vec<f64>, CliError> {
        let x0 = self.x0.clone().unwrap_or_else(|| vec![0.0; self.m]);
        if x0.len() != self.m {
            return Err(CliError::Invalid(format!("x0 has {} entries, m = {}", x0.len(), self.m)));
        }
        Ok(x0)
    }

    fn grid(&self) -> Result<GridSpec, CliError> {
        let g = self.need(&self.grid, "grid")?.clone();
        if !(g.lo < g.hi) || g.n < 2 {
            return Err(CliError::Invalid(format!("grid needs lo < hi and n ≥ 2, got {g:?}")));
        }
        Ok(g)
    }

    /// Validates every kind-specific field and parses all expressions.
    pub fn parse(&self) -> Result<Parsed, CliError> {
        if self.m == 0 {
            return Err(CliError::Invalid("m must be at least 1".into()));
        }
        for d in self.deltas() {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(CliError::Invalid(format!("delta {d} must be finite and nonnegative")));
            }
        }
        match self.kind {
            Kind::Diffusion => {
                let v = self.expr(self.need(&self.v, "V")?, "V")?;
                let w = self.w.as_deref().map(|t| self.expr(t, "W")).transpose()?;
                let u = self.u.as_deref().map(|t| self.expr(t, "U")).transpose()?;
                if w.is_none() && u.is_none() {
                    return Err(CliError::MissingField {
                        kind: self.kind,
                        field: "W or U".into(),
                    });
                }
                Ok(Parsed::Diffusion {
                    v,
                    w,
                    u,
                    x0: self.x0()?,
                    grid: self.grid()?,
                })
            }
            Kind::Unbounded => {
                let rows = self.need(&self.a, "A")?;
                let a = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        r.iter()
                            .enumerate()
                            .map(|(j, t)| self.expr(t, &format!("A[{i}][{j}]")))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Parsed::Unbounded {
                    a,
                    v: self.expr(self.need(&self.v, "V")?, "V")?,
                    w: self.expr(self.need(&self.w, "W")?, "W")?,
                    x0: self.x0()?,
                    grid: self.grid()?,
                })
            }
            Kind::Jump => {
                let birth = rate(self.need(&self.birth, "birth")?, "birth")?;
                let death = rate(self.need(&self.death, "death")?, "death")?;
                let w = match (&self.w, &self.ln_w) {
                    (Some(_), Some(_)) => return Err(CliError::Invalid("give W or lnW, not both".into())),
                    (Some(t), None) => Some(jump_fn(JumpFunction::value(t), "W")?),
                    (None, Some(t)) => Some(jump_fn(JumpFunction::log(t), "lnW")?),
                    (None, None) => None,
                };
                let i_max = self.i_max.unwrap_or(DEFAULT_I_MAX);
                if i_max < 10 {
                    return Err(CliError::Invalid(format!("i_max = {i_max} is too small (need ≥ 10)")));
                }
                let range = self.i_range.unwrap_or((10.min(i_max / 10).max(1), i_max));
                if range.0 < 1 || range.0 >= range.1 || range.1 > i_max {
                    return Err(CliError::Invalid(format!("i_range {range:?} must satisfy 1 ≤ lo < hi ≤ i_max")));
                }
                if w.is_none() && (self.c.is_none() || self.b.is_none()) {
                    return Err(CliError::MissingField {
                        kind: self.kind,
                        field: "W (or both c and b)".into(),
                    });
                }
                Ok(Parsed::Jump {
                    chain: BirthDeathChain::new(birth, death),
                    w,
                    i_max,
                    range,
                })
            }
            Kind::Gozlan => {
                let v = self.expr(self.need(&self.v, "V")?, "V")?;
                let g = self.gozlan.clone().unwrap_or_default();
                let mut settings = GozlanSettings {
                    n_max: self.n_max(),
                    ..GozlanSettings::default()
                };
                settings.eps = g.eps.unwrap_or(settings.eps);
                settings.eps2 = g.eps2.unwrap_or(settings.eps2);
                settings.a = g.a.unwrap_or(A_DEFAULT);
                settings.eps1 = g.eps1;
                if let Some(s) = g.shells {
                    settings.shells = s;
                }
                if let Some(d) = g.directions {
                    settings.directions = d;
                }
                if let (Some(e1), Some(e3)) = (g.eps1, g.eps3) {
                    let sum = e1 + 3.0 * settings.eps2 + e3;
                    if (sum - (1.0 - settings.a)).abs() > 1e-12 {
                        return Err(CliError::Infeasible(format!(
                            "ε₁ + 3ε₂ + ε₃ = {sum} must equal 1 − a = {}",
                            1.0 - settings.a
                        )));
                    }
                }
                let x0 = self.x0()?;
                if x0.iter().any(|v| *v != 0.0) {
                    return Err(CliError::Invalid("gozlan problems are centred at the origin".into()));
                }
                Ok(Parsed::Gozlan { v, settings, x0 })
            }
        }
    }
}

fn rate(spec: &RateSpec, field: &str) -> Result<Rate, CliError> {
    let bad = |e: lyapcert::jump::JumpError| CliError::BadExpression {
        field: field.to_string(),
        message: e.to_string(),
    };
    Ok(match spec {
        RateSpec::Formula(t) => Rate::formula(t).map_err(bad)?,
        RateSpec::Table(v) => Rate::Table(v.clone()),
        RateSpec::Headed { formula, head } => Rate::formula(formula).map_err(bad)?.with_head(head.clone()),
    })
}

fn jump_fn(r: Result<JumpFunction, lyapcert::jump::JumpError>, field: &str) -> Result<JumpFunction, CliError> {
    r.map_err(|e| CliError::BadExpression {
        field: field.to_string(),
        message: e.to_string(),
    })
}
