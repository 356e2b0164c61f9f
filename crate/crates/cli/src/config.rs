use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::{CoreKind, PackKind};

pub const OUT_DIR_VAR: &str = "SQHARD_OUT_DIR";

/// Explicit paths are used as given; defaults land in `$SQHARD_OUT_DIR`
/// (or the working directory).
pub fn output_path(explicit: Option<&Path>, default_name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(OUT_DIR_VAR) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(default_name),
            _ => PathBuf::from(default_name),
        },
    }
}

/// Parses TOML or JSON, chosen by extension (JSON first, then TOML, when the
/// extension is neither).
pub fn load<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "json" => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())),
        "toml" => toml::from_str(&text).with_context(|| format!("parsing {}", path.display())),
        _ => serde_json::from_str(&text).or_else(|je| {
            toml::from_str(&text)
                .map_err(|te| anyhow!("{} is neither JSON ({je}) nor TOML ({te})", path.display()))
        }),
    }
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub mode: Option<String>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub d: Option<usize>,
    pub c_delta: Option<f64>,
    pub seed: Option<u64>,
    pub core: Option<CoreKind>,
    pub lp_alpha: Option<f64>,
    pub lp_n: Option<usize>,
    pub pack_size: Option<usize>,
    pub pack_method: Option<PackKind>,
    pub pack_c: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_agree() {
        let dir = tempfile::tempdir().unwrap();
        let t = dir.path().join("g.toml");
        let j = dir.path().join("g.json");
        std::fs::write(&t, "mode = \"sqrt-k\"\nk = 8\nd = 64\ncore = \"explicit\"\n").unwrap();
        std::fs::write(&j, r#"{"mode":"sqrt-k","k":8,"d":64,"core":"explicit"}"#).unwrap();
        let a: GenerateConfig = load(&t).unwrap();
        let b: GenerateConfig = load(&j).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        std::fs::write(&t, "bogus = 1\n").unwrap();
        assert!(load::<GenerateConfig>(&t).is_err());
    }

    #[test]
    fn explicit_output_wins() {
        let p = output_path(Some(Path::new("x/y.json")), "instance.json");
        assert_eq!(p, PathBuf::from("x/y.json"));
    }
}
