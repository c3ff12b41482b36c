use std::fmt;

use anyhow::{bail, Context, Result};
use csembed::concse::LossConfig;
use serde::Serialize;

/// One grid: the cross product of its value lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub name: String,
    pub variants: Vec<String>,
    pub taus: Vec<f64>,
    /// `None` disables the triplet term.
    pub lambdas: Vec<Option<f64>>,
    pub alphas: Vec<f64>,
}

pub const VARIANTS: [&str; 6] = ["v1", "v2", "v3", "v4", "v5", "v6"];
pub const TAUS: [f64; 5] = [0.001, 0.01, 0.05, 0.1, 1.0];
pub const LAMBDAS: [Option<f64>; 6] = [None, Some(1.0), Some(1.2), Some(1.4), Some(1.5), Some(2.0)];
pub const ALPHAS: [f64; 6] = [0.5, 1.0, 1.2, 1.4, 1.5, 2.0];

impl Grid {
    fn single(name: &str, base: &LossConfig) -> Self {
        Self {
            name: name.to_string(),
            variants: vec!["v6".into()],
            taus: vec![base.tau],
            lambdas: vec![Some(base.lambda)],
            alphas: vec![base.alpha],
        }
    }

    /// Four one-dimensional sweeps: loss variants, τ, λ (with the triplet
    /// term disabled as one row) and α, others held at the base values.
    pub fn tables(base: &LossConfig) -> Vec<Grid> {
        vec![
            Grid {
                variants: VARIANTS.iter().map(|s| s.to_string()).collect(),
                ..Self::single("variants", base)
            },
            Grid {
                taus: TAUS.to_vec(),
                ..Self::single("tau", base)
            },
            Grid {
                lambdas: LAMBDAS.to_vec(),
                ..Self::single("lambda", base)
            },
            Grid {
                alphas: ALPHAS.to_vec(),
                ..Self::single("alpha", base)
            },
        ]
    }

    /// Parses `variant=v1,v6;tau=0.05,0.1;lambda=na,1.2;alpha=1`. Omitted
    /// keys take the base values.
    pub fn parse(name: &str, text: &str, base: &LossConfig) -> Result<Self> {
        let mut grid = Self::single(name, base);
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, values) = part
                .split_once('=')
                .with_context(|| format!("grid entry '{part}' is not key=values"))?;
            let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
            if values.is_empty() {
                bail!("grid key '{key}' has no values");
            }
            let reals = |vs: &[&str]| -> Result<Vec<f64>> {
                vs.iter()
                    .map(|v| v.parse::<f64>().with_context(|| format!("bad number '{v}' for {key}")))
                    .collect()
            };
            match key.trim() {
                "variant" | "variants" => {
                    for v in &values {
                        LossConfig::variant(v).with_context(|| format!("unknown variant '{v}'"))?;
                    }
                    grid.variants = values.iter().map(|v| v.to_ascii_lowercase()).collect();
                }
                "tau" => grid.taus = reals(&values)?,
                "alpha" => grid.alphas = reals(&values)?,
                "lambda" => {
                    grid.lambdas = values
                        .iter()
                        .map(|v| match v.to_ascii_lowercase().as_str() {
                            "na" | "n/a" | "none" | "off" => Ok(None),
                            _ => v.parse().map(Some).with_context(|| format!("bad number '{v}' for lambda")),
                        })
                        .collect::<Result<_>>()?
                }
                other => bail!("unknown grid key '{other}'"),
            }
        }
        Ok(grid)
    }

    pub fn cells(&self, base: &LossConfig) -> Result<Vec<Cell>> {
        let mut out = Vec::new();
        for v in &self.variants {
            for &tau in &self.taus {
                for &lambda in &self.lambdas {
                    for &alpha in &self.alphas {
                        let mut loss = LossConfig {
                            tau,
                            alpha,
                            lambda: lambda.unwrap_or(base.lambda),
                            ..LossConfig::variant(v)?
                        };
                        loss.combinations = base.combinations.clone();
                        loss.neg_mode = base.neg_mode;
                        if lambda.is_none() {
                            loss.enable_tri = false;
                        }
                        let cell = Cell {
                            grid: self.name.clone(),
                            variant: v.clone(),
                            tau,
                            lambda,
                            alpha,
                            loss,
                        };
                        cell.loss
                            .validate()
                            .with_context(|| format!("grid '{}' cell {cell}", self.name))?;
                        out.push(cell);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub grid: String,
    pub variant: String,
    pub tau: f64,
    pub lambda: Option<f64>,
    pub alpha: f64,
    pub loss: LossConfig,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lambda = self.lambda.map_or("N/A".to_string(), |l| l.to_string());
        write!(f, "{} tau={} lambda={} alpha={}", self.variant, self.tau, lambda, self.alpha)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub grid: String,
    pub variant: String,
    pub tau: f64,
    pub lambda: Option<f64>,
    pub alpha: f64,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_preset_shape() {
        let base = LossConfig::default();
        let sizes: Vec<usize> = Grid::tables(&base).iter().map(|g| g.cells(&base).unwrap().len()).collect();
        assert_eq!(sizes, [6, 5, 6, 6]);
    }

    #[test]
    fn parse_grid() {
        let base = LossConfig::default();
        let g = Grid::parse("g", "variant=v1,v6; lambda=na,1.4", &base).unwrap();
        let cells = g.cells(&base).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(!cells[0].loss.enable_tri);
        assert_eq!(cells[3].loss.lambda, 1.4);
        assert!(Grid::parse("g", "beta=1", &base).is_err());
        assert!(Grid::parse("g", "tau=x", &base).is_err());
        // Triplet-only variant with the triplet disabled leaves nothing to train.
        assert!(Grid::parse("g", "variant=v2;lambda=na", &base).unwrap().cells(&base).is_err());
    }
}
