use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::ServiceError;

/// Runtime settings. Loaded from a TOML file, then overridden by
/// `MOUSESAL_*` environment variables.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub asset_dir: PathBuf,
    pub data_dir: PathBuf,
    /// Defaults to `<asset_dir>/catalog.json`.
    pub catalog: Option<PathBuf>,
    pub secret: String,
    pub admin_token: Option<String>,
    pub playlist_size: usize,
    pub min_screen_width: u32,
    pub min_fps: f64,
    pub webhook_url: Option<String>,
    /// Seeds playlist tie-breaking; random when unset.
    pub seed: Option<u64>,
    pub fsync: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            asset_dir: PathBuf::from("assets"),
            data_dir: PathBuf::from("data"),
            catalog: None,
            secret: String::new(),
            admin_token: None,
            playlist_size: 10,
            min_screen_width: 1024,
            min_fps: 20.0,
            webhook_url: None,
            seed: None,
            fsync: false,
        }
    }
}

const ENV_PREFIX: &str = "MOUSESAL_";

impl ServiceConfig {
    /// File (if any) plus process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ServiceError::Config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", p.display())))?
            }
            None => ServiceConfig::default(),
        };
        config.apply_env(std::env::vars())?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ServiceError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ServiceError> {
            value.parse().map_err(|_| ServiceError::Config(format!("{key}: cannot parse `{value}`")))
        }
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else { continue };
            match name {
                "LISTEN" => self.listen = value,
                "ASSET_DIR" => self.asset_dir = value.into(),
                "DATA_DIR" => self.data_dir = value.into(),
                "CATALOG" => self.catalog = Some(value.into()),
                "SECRET" => self.secret = value,
                "ADMIN_TOKEN" => self.admin_token = Some(value),
                "PLAYLIST_SIZE" => self.playlist_size = parse(&key, &value)?,
                "MIN_SCREEN_WIDTH" => self.min_screen_width = parse(&key, &value)?,
                "MIN_FPS" => self.min_fps = parse(&key, &value)?,
                "WEBHOOK_URL" => self.webhook_url = Some(value),
                "SEED" => self.seed = Some(parse(&key, &value)?),
                "FSYNC" => self.fsync = parse(&key, &value)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.secret.is_empty() {
            return Err(ServiceError::Config("a non-empty secret is required for completion codes".into()));
        }
        if self.playlist_size == 0 {
            return Err(ServiceError::Config("playlist_size must be at least 1".into()));
        }
        if !(self.min_fps >= 0.0) {
            return Err(ServiceError::Config("min_fps must be non-negative".into()));
        }
        Ok(())
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.catalog.clone().unwrap_or_else(|| self.asset_dir.join("catalog.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn environment_wins_over_file() {
        let mut c: ServiceConfig = toml::from_str("secret = \"s\"\nplaylist_size = 4\nlisten = \"0.0.0.0:1\"").unwrap();
        assert_eq!(c.min_screen_width, 1024);
        c.apply_env([
            ("MOUSESAL_PLAYLIST_SIZE".to_string(), "7".to_string()),
            ("MOUSESAL_MIN_FPS".to_string(), "25".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ])
        .unwrap();
        assert_eq!(c.playlist_size, 7);
        assert_eq!(c.min_fps, 25.0);
        assert_eq!(c.listen, "0.0.0.0:1");
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = ServiceConfig::default();
        assert!(c.validate().is_err());
        assert!(c.apply_env([("MOUSESAL_PLAYLIST_SIZE".to_string(), "ten".to_string())]).is_err());
        assert!(toml::from_str::<ServiceConfig>("bogus = 1").is_err());
    }
}
