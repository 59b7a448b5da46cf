use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use stellar_fda::{Error, Result};

/// Values from the optional TOML config file. Keys use the long flag names with
/// underscores; relative paths are resolved against the config file's directory.
#[derive(Debug, Default)]
pub struct Config {
    table: toml::Table,
    path: PathBuf,
    base: PathBuf,
}

/// Keys accepted by every subcommand. `windows` lists `[lower, upper]` pairs and is
/// ignored where the windows come from a saved model.
const GLOBAL_KEYS: &[&str] = &["threads", "windows"];

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map(|s| text[..s.start].matches('\n').count() + 1).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        Ok(Config {
            table,
            path: path.to_path_buf(),
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    /// Rejects keys that the subcommand does not use.
    pub fn check_keys(&self, command: &str, allowed: &[&str]) -> Result<()> {
        for key in self.table.keys() {
            if !allowed.contains(&key.as_str()) && !GLOBAL_KEYS.contains(&key.as_str()) {
                return Err(self.error(format!("key {key:?} does not apply to `{command}`")));
            }
        }
        Ok(())
    }

    fn error(&self, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: 0,
            message,
        }
    }

    pub fn value<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e: toml::de::Error| self.error(format!("{key}: {}", e.message()))),
        }
    }

    pub fn parsed<T: FromStr<Err = Error>>(&self, key: &str) -> Result<Option<T>> {
        match self.value::<String>(key)? {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|e| self.error(format!("{key}: {e}"))),
        }
    }

    /// A single string or an array of strings.
    pub fn parsed_list<T: FromStr<Err = Error>>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let items: Vec<String> = match self.table.get(key) {
            None => return Ok(None),
            Some(toml::Value::String(s)) => vec![s.clone()],
            Some(_) => self.value(key)?.unwrap_or_default(),
        };
        items
            .iter()
            .map(|s| s.parse().map_err(|e| self.error(format!("{key}: {e}"))))
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    pub fn path(&self, key: &str) -> Result<Option<PathBuf>> {
        Ok(self
            .value::<PathBuf>(key)?
            .map(|p| if p.is_absolute() { p } else { self.base.join(p) }))
    }
}

/// Flag, then config value, then nothing.
pub fn pick<T>(flag: Option<T>, config: Option<T>) -> Option<T> {
    flag.or(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "seed = 7\nmethod = [\"lm\", \"ridge\"]\nmanifest = \"grid/manifest.csv\"\n",
        )
        .unwrap();
        let cfg = Config::load(Some(&path)).unwrap();
        assert_eq!(pick(Some(3), cfg.value::<u64>("seed").unwrap()), Some(3));
        assert_eq!(pick(None, cfg.value::<u64>("seed").unwrap()), Some(7));
        let methods: Vec<stellar_fda::regress::Method> = cfg.parsed_list("method").unwrap().unwrap();
        assert_eq!(methods.len(), 2);
        assert_eq!(
            cfg.path("manifest").unwrap().unwrap(),
            dir.path().join("grid/manifest.csv")
        );
        assert!(cfg.check_keys("evaluate", &["seed", "method", "manifest"]).is_ok());
        assert!(cfg.check_keys("predict", &["model"]).is_err());
    }
}
