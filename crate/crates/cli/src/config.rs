//! Run configuration file (TOML) and flag overrides.
//!
//! ```toml
//! seed = 7                 # optional; overrides the synth seed and model seeds
//! train_days = 60
//! eval_start = 60          # default: train_days
//! eval_end = 366           # default: number of days in the data
//! refit_every = 7
//! out = "out"
//! holidays = ["2016-12-25"]
//!
//! [data]
//! kind = "synth"           # or "csv" with `path = "load.csv"`
//! [data.synth]
//! n_days = 366
//!
//! [[models]]
//! id = "par"
//! n_lags = 4
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use dayahead::evaluation::{CvConfig, DataSource};
use dayahead::models::{unknown_model, ModelSpec, MODEL_IDS};
use dayahead::synth::SynthConfig;
use dayahead::Error;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_train_days")]
    pub train_days: usize,
    #[serde(default)]
    pub eval_start: Option<usize>,
    #[serde(default)]
    pub eval_end: Option<usize>,
    #[serde(default = "default_refit_every")]
    pub refit_every: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub holidays: BTreeSet<NaiveDate>,
    #[serde(default = "default_data")]
    pub data: DataSource,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
}

fn default_train_days() -> usize {
    60
}

fn default_refit_every() -> usize {
    7
}

fn default_data() -> DataSource {
    DataSource::Synth {
        synth: SynthConfig::default(),
        building: None,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            train_days: default_train_days(),
            eval_start: None,
            eval_end: None,
            refit_every: default_refit_every(),
            out: None,
            holidays: BTreeSet::new(),
            data: default_data(),
            models: Vec::new(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub train_days: Option<usize>,
    pub models: Option<Vec<String>>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Parses the file, reporting schema violations with their key path.
    /// Relative CSV paths are resolved against the file's directory.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, Error> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            path: String::new(),
            message: e.message().to_string(),
        })?;
        let models = match table.remove("models") {
            None => Vec::new(),
            Some(toml::Value::Array(items)) => items,
            Some(_) => {
                return Err(Error::Config {
                    path: "models".into(),
                    message: "expected an array of model tables".into(),
                })
            }
        };
        let mut cfg: RunConfig = typed(toml::Value::Table(table), "")?;
        cfg.models = models
            .into_iter()
            .enumerate()
            .map(|(i, m)| model_spec(m, &format!("models[{i}]")))
            .collect::<Result<_, _>>()?;
        if let DataSource::Csv { path, .. } = &mut cfg.data {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), Error> {
        if let Some(days) = o.train_days {
            self.train_days = days;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(ids) = &o.models {
            self.models = ids
                .iter()
                .map(|id| match self.models.iter().find(|m| m.id() == id) {
                    Some(m) => Ok(m.clone()),
                    None => ModelSpec::default_for(id),
                })
                .collect::<Result<_, _>>()?;
        }
        if let Some(seed) = o.seed {
            self.seed = Some(seed);
        }
        if let Some(seed) = self.seed {
            if let DataSource::Synth { synth, .. } = &mut self.data {
                synth.seed = seed;
            }
            for m in &mut self.models {
                match m {
                    ModelSpec::Spnn(c) => c.mlp.seed = seed,
                    ModelSpec::Lstm(c) => c.seed = seed,
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn require_models(&self) -> Result<(), Error> {
        if self.models.is_empty() {
            return Err(Error::Config {
                path: "models".into(),
                message: "no models selected; add [[models]] blocks or pass --models".into(),
            });
        }
        Ok(())
    }

    pub fn cv(&self, n_days: usize) -> CvConfig {
        CvConfig {
            train_days: self.train_days,
            eval_start: self.eval_start.unwrap_or(self.train_days),
            eval_end: self.eval_end.unwrap_or(n_days),
            refit_every: self.refit_every,
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn typed<T: DeserializeOwned>(value: toml::Value, prefix: &str) -> Result<T, Error> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner.as_str()) {
            (_, ".") => prefix.to_string(),
            (true, _) => inner,
            (false, _) => format!("{prefix}.{inner}"),
        };
        Error::Config {
            path,
            message: e.into_inner().message().trim().to_string(),
        }
    })
}

/// Builds one model from its table, so that schema errors carry the full
/// key path (`models[2].n_lags`) and unregistered ids are named.
fn model_spec(value: toml::Value, prefix: &str) -> Result<ModelSpec, Error> {
    let toml::Value::Table(mut t) = value else {
        return Err(Error::Config {
            path: prefix.to_string(),
            message: "expected a table".into(),
        });
    };
    let id = match t.remove("id") {
        Some(toml::Value::String(id)) => id,
        _ => {
            return Err(Error::Config {
                path: format!("{prefix}.id"),
                message: "missing model id".into(),
            })
        }
    };
    if !MODEL_IDS.contains(&id.as_str()) {
        return Err(unknown_model(&id));
    }
    let v = toml::Value::Table(t);
    Ok(match id.as_str() {
        "oracle" => {
            if v.as_table().is_some_and(|t| !t.is_empty()) {
                return Err(Error::Config {
                    path: prefix.to_string(),
                    message: "the oracle takes no parameters".into(),
                });
            }
            ModelSpec::Oracle
        }
        "n_same_days" => ModelSpec::NSameDays(typed(v, prefix)?),
        "n_days" => ModelSpec::NDays(typed(v, prefix)?),
        "hw" => ModelSpec::Hw(typed(v, prefix)?),
        "sarima" => ModelSpec::Sarima(typed(v, prefix)?),
        "par" => ModelSpec::Par(typed(v, prefix)?),
        "par_w" => ModelSpec::ParW(typed(v, prefix)?),
        "spr" => ModelSpec::Spr(typed(v, prefix)?),
        "spnn" => ModelSpec::Spnn(typed(v, prefix)?),
        "lstm" => ModelSpec::Lstm(typed(v, prefix)?),
        "gam_fourier" => ModelSpec::GamFourier(typed(v, prefix)?),
        _ => return Err(unknown_model(&id)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, Error> {
        RunConfig::from_toml(text, Path::new("/base"))
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn schema_violation_names_key_path() {
        let e = parse("[[models]]\nid = \"par\"\nn_lags = \"four\"").unwrap_err();
        match e {
            Error::Config { path, .. } => assert_eq!(path, "models[0].n_lags"),
            other => panic!("{other}"),
        }
        let e = parse("[[models]]\nid = \"hw\"\nperiod = -1").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "models[0].period"), "{e}");
        let e = parse("train_days = \"x\"").unwrap_err();
        assert!(matches!(e, Error::Config { ref path, .. } if path == "train_days"), "{e}");
        let e = parse("train_dayz = 3").unwrap_err();
        assert!(e.to_string().contains("train_dayz"), "{e}");
    }

    #[test]
    fn unknown_model_is_reported_by_id() {
        let e = parse("[[models]]\nid = \"prophetx\"").unwrap_err();
        assert!(matches!(e, Error::UnknownModel { ref id, .. } if id == "prophetx"));
    }

    #[test]
    fn flags_win() {
        let mut c = parse("seed = 1\ntrain_days = 30\n[[models]]\nid = \"n_days\"\nn = 2").unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            train_days: Some(45),
            models: Some(vec!["n_days".into(), "spnn".into()]),
            out: None,
        })
        .unwrap();
        assert_eq!(c.train_days, 45);
        assert_eq!(c.models[0].id(), "n_days");
        assert!(matches!(c.models[0], ModelSpec::NDays(ref p) if p.n == 2));
        assert!(matches!(c.models[1], ModelSpec::Spnn(ref s) if s.mlp.seed == 9));
        assert!(matches!(c.data, DataSource::Synth { ref synth, .. } if synth.seed == 9));
    }

    #[test]
    fn relative_csv_path_is_resolved() {
        let c = parse("[data]\nkind = \"csv\"\npath = \"load.csv\"").unwrap();
        assert!(matches!(c.data, DataSource::Csv { ref path, .. } if path == Path::new("/base/load.csv")));
    }
}
