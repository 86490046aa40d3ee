//! Metric selection and run settings from flags and TOML config files.
//!
//! ```toml
//! [metric]
//! name = "tilted"
//! dim = 3
//! form = "F"                 # or "F_squared"
//! expression = "sqrt(norm2(y)) + dot(b, y)"
//! domain = { kind = "everywhere" }   # or { kind = "ball", radius = 1.0 }
//! sample_radius = 0.8
//!
//! [metric.params]
//! b = [0.2, 0.0, 0.0]
//!
//! [run]
//! samples = 12
//! seed = 7
//! ```
//!
//! `catalog = "funk"` in place of `expression` selects a built-in metric
//! whose parameters `[metric.params]` overrides. Flags win over `[run]`.

use std::path::{Path, PathBuf};

use finsler_core::classifier::DEFAULT_TOL;
use finsler_core::jets::JetSpec;
use finsler_core::metric_lang::{DeclaredForm, ParamValue, Params};
use finsler_core::metric_library::{catalog_get, CatalogError, ChartDomain, MetricDef};
use serde::{Deserialize, Serialize};

use crate::args::{Format, MetricArgs, RunArgs};
use crate::error::{excerpt, CliError};

pub const DEFAULT_DIM: usize = 3;
pub const DEFAULT_SAMPLES: usize = 10;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub metric: Option<MetricTable>,
    #[serde(default)]
    pub run: RunTable,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricTable {
    pub name: Option<String>,
    pub catalog: Option<String>,
    pub dim: Option<usize>,
    pub expression: Option<String>,
    pub form: Option<DeclaredForm>,
    #[serde(default)]
    pub params: Params,
    pub domain: Option<ChartDomain>,
    pub sample_radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunTable {
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub orders: Option<[usize; 2]>,
    pub format: Option<Format>,
    pub tensors: Option<Vec<String>>,
    pub pairs: Option<Vec<String>>,
    pub h0: Option<f64>,
    pub levels: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Echo of the metric a report was computed for.
#[derive(Debug, Clone, Serialize)]
pub struct MetricEcho {
    pub name: String,
    /// `catalog` or the config path.
    pub origin: String,
    pub dim: usize,
    pub form: DeclaredForm,
    pub expression: String,
    pub params: Params,
    pub domain: ChartDomain,
    pub sample_radius: f64,
}

impl MetricEcho {
    pub fn of(def: &MetricDef, origin: &str) -> Self {
        Self {
            name: def.name.clone(),
            origin: origin.to_string(),
            dim: def.dim,
            form: def.expr.form,
            expression: def.text.clone(),
            params: def.expr.params.clone(),
            domain: def.domain,
            sample_radius: def.sample_radius,
        }
    }
}

/// A metric plus the `[run]` table of its config file, if any.
pub struct Selection {
    pub def: MetricDef,
    pub echo: MetricEcho,
    pub run: RunTable,
}

pub fn parse_param(spec: &str) -> Result<(String, ParamValue), CliError> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--param `{spec}`: expected NAME=VALUE")))?;
    let values: Vec<f64> = value
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("--param `{spec}`: {e}")))?;
    let value = match values.as_slice() {
        [v] => ParamValue::Scalar(*v),
        _ => ParamValue::Vector(values),
    };
    Ok((name.trim().to_string(), value))
}

pub fn parse_orders(text: &str, dim: usize) -> Result<JetSpec, CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    let [kx, ky] = parts.as_slice() else {
        return Err(CliError::Usage(format!("--orders `{text}`: expected KX,KY")));
    };
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|e| CliError::Usage(format!("--orders `{text}`: {e}")))
    };
    orders_spec(dim, parse(kx)?, parse(ky)?)
}

pub fn orders_spec(dim: usize, kx: usize, ky: usize) -> Result<JetSpec, CliError> {
    JetSpec::new(dim, kx, ky).map_err(|e| CliError::Usage(format!("orders ({kx},{ky}): {e}")))
}

/// Resolves `--metric`/`--config` with parameter overrides.
pub fn select_metric(args: &MetricArgs) -> Result<Selection, CliError> {
    let mut overrides = Params::new();
    for p in &args.params {
        let (k, v) = parse_param(p)?;
        overrides.insert(k, v);
    }
    match (&args.metric, &args.config) {
        (Some(name), None) => {
            let def = catalog_get(name, args.dim.unwrap_or(DEFAULT_DIM), &overrides)?;
            Ok(Selection {
                echo: MetricEcho::of(&def, "catalog"),
                def,
                run: RunTable::default(),
            })
        }
        (None, Some(path)) => {
            let file = ConfigFile::load(path)?;
            let table = file.metric.ok_or_else(|| CliError::Config {
                path: path.clone(),
                message: "missing [metric] table".into(),
            })?;
            let def = from_table(table, path, args.dim, overrides)?;
            Ok(Selection {
                echo: MetricEcho::of(&def, &path.display().to_string()),
                def,
                run: file.run,
            })
        }
        _ => Err(CliError::Usage("exactly one of --metric or --config is required".into())),
    }
}

fn from_table(t: MetricTable, path: &Path, dim: Option<usize>, overrides: Params) -> Result<MetricDef, CliError> {
    let config_err = |message: String| CliError::Config {
        path: path.to_path_buf(),
        message,
    };
    let dim = dim.or(t.dim).unwrap_or(DEFAULT_DIM);
    let mut params = t.params;
    params.extend(overrides);
    match (t.catalog, t.expression) {
        (Some(name), None) => {
            if t.form.is_some() || t.domain.is_some() || t.sample_radius.is_some() {
                return Err(config_err("catalog metrics take only `params` and `dim`".into()));
            }
            let mut def = catalog_get(&name, dim, &params)?;
            if let Some(n) = t.name {
                def.name = n;
            }
            Ok(def)
        }
        (None, Some(text)) => MetricDef::from_text(
            t.name.as_deref().unwrap_or("custom"),
            dim,
            &text,
            t.form.unwrap_or(DeclaredForm::F),
            params,
            t.domain.unwrap_or(ChartDomain::Everywhere),
            t.sample_radius.unwrap_or(1.0),
        )
        .map_err(|e| match e {
            CatalogError::Parse(err) => CliError::Parse {
                origin: format!("{} [metric.expression]", path.display()),
                excerpt: excerpt(&text, err.line, err.col),
                err,
            },
            other => other.into(),
        }),
        _ => Err(config_err("[metric] needs exactly one of `catalog` or `expression`".into())),
    }
}

/// Sampling and output settings after flags and `[run]` are merged.
pub struct RunSettings {
    pub samples: usize,
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

impl RunSettings {
    pub fn merge(args: &RunArgs, table: &RunTable) -> Result<Self, CliError> {
        let samples = args.samples.or(table.samples).unwrap_or(DEFAULT_SAMPLES);
        if samples == 0 {
            return Err(CliError::Usage("--samples must be positive".into()));
        }
        Ok(Self {
            samples,
            seed: args.seed.or(table.seed).unwrap_or(DEFAULT_SEED),
            format: args.format.or(table.format).unwrap_or_default(),
            out: args.out.clone(),
        })
    }
}

pub fn merge_tol(flag: Option<f64>, table: &RunTable) -> Result<f64, CliError> {
    let tol = flag.or(table.tol).unwrap_or(DEFAULT_TOL);
    if tol > 0.0 && tol.is_finite() {
        Ok(tol)
    } else {
        Err(CliError::Usage(format!("--tol must be positive, got {tol}")))
    }
}

pub fn merge_orders(flag: Option<&str>, table: &RunTable, dim: usize) -> Result<JetSpec, CliError> {
    match (flag, table.orders) {
        (Some(text), _) => parse_orders(text, dim),
        (None, Some([kx, ky])) => orders_spec(dim, kx, ky),
        (None, None) => Ok(JetSpec::full(dim)),
    }
}

pub fn merge_list(flag: &[String], table: &Option<Vec<String>>) -> Vec<String> {
    if !flag.is_empty() {
        flag.to_vec()
    } else {
        table.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_parse_as_scalars_or_vectors() {
        assert_eq!(parse_param("eps=0.5").unwrap(), ("eps".into(), ParamValue::Scalar(0.5)));
        assert_eq!(
            parse_param("a=0.1,0,0").unwrap(),
            ("a".into(), ParamValue::Vector(vec![0.1, 0.0, 0.0]))
        );
        assert!(parse_param("a").is_err());
        assert!(parse_param("a=1,x").is_err());
    }

    #[test]
    fn orders_need_two_fields() {
        assert_eq!(parse_orders("2,5", 3).unwrap(), JetSpec::new(3, 2, 5).unwrap());
        assert!(parse_orders("2", 3).is_err());
        assert!(parse_orders("2,5,1", 3).is_err());
    }

    #[test]
    fn config_tables_deserialize() {
        let file: ConfigFile = toml::from_str(
            r#"
            [metric]
            name = "tilted"
            expression = "sqrt(norm2(y)) + dot(b, y)"
            domain = { kind = "ball", radius = 2 }
            [metric.params]
            b = [0.2, 0, 0]
            s = 1
            [run]
            samples = 4
            orders = [1, 3]
            "#,
        )
        .unwrap();
        let m = file.metric.unwrap();
        assert_eq!(m.domain, Some(ChartDomain::Ball { radius: 2.0 }));
        assert_eq!(m.params["b"], ParamValue::Vector(vec![0.2, 0.0, 0.0]));
        assert_eq!(m.params["s"], ParamValue::Scalar(1.0));
        assert_eq!(file.run.orders, Some([1, 3]));
        assert!(toml::from_str::<ConfigFile>("[metric]\nbogus = 1").is_err());
    }
}
