//! Pipeline configuration: a TOML file with one section per module.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use polispace_core::calibrate::{default_manifest, DimensionSpec, DEFAULT_ALPHA};
use polispace_core::media::DEFAULT_MIN_USERS;
use polispace_core::CaConfig;
use serde::{Deserialize, Serialize};

use crate::artifacts::sha256_hex;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// `follower_id,elite_id`
    pub edges: Option<PathBuf>,
    /// `id,name,party`
    pub elites: Option<PathBuf>,
    /// `party,dimension,wave,score,native_scale_max`
    pub survey: Option<PathBuf>,
    /// `id,total_posts,created_at,collected_at,followers,followees`
    pub activity: Option<PathBuf>,
    /// `pseudo_id,domain,tweet_count`
    pub shares: Option<PathBuf>,
    /// `domain,media_category`
    pub categories: Option<PathBuf>,
    pub labels_human: Option<PathBuf>,
    pub labels_llm: Option<PathBuf>,
    /// `dimension,wave,annotator,label_a,label_b`; the built-in plan otherwise.
    pub plan: Option<PathBuf>,
    /// Position tables to validate instead of the ones in the output directory.
    pub followers_positions: Option<PathBuf>,
    pub mps_positions: Option<PathBuf>,
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.edges,
            &mut self.elites,
            &mut self.survey,
            &mut self.activity,
            &mut self.shares,
            &mut self.categories,
            &mut self.labels_human,
            &mut self.labels_llm,
            &mut self.plan,
            &mut self.followers_positions,
            &mut self.mps_positions,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub min_elites_followed: u32,
    pub min_account_followers: Option<u64>,
    /// Replace follower ids with random pseudo ids.
    pub pseudonymize: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            min_elites_followed: 3,
            min_account_followers: None,
            pseudonymize: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    pub alpha: f64,
    /// Column names such as `lrgen_19`; the sixteen published dimensions
    /// when absent.
    pub dimensions: Option<Vec<String>>,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            dimensions: None,
        }
    }
}

impl CalibrateSection {
    pub fn manifest(&self) -> Result<Vec<DimensionSpec>> {
        match &self.dimensions {
            None => Ok(default_manifest()),
            Some(cols) if cols.is_empty() => bail!("calibrate.dimensions is empty"),
            Some(cols) => cols
                .iter()
                .map(|c| DimensionSpec::from_column(c).map_err(Into::into))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediaSection {
    pub min_users: usize,
    pub n_boot: usize,
}

impl Default for MediaSection {
    fn default() -> Self {
        Self {
            min_users: DEFAULT_MIN_USERS,
            n_boot: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    /// Two-sided level of the per-bin confidence intervals.
    pub ci_alpha: f64,
    /// Older and newer survey wave for the cross-wave comparison; skipped
    /// when absent or when the positions lack either wave.
    pub cross_waves: Option<(String, String)>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            ci_alpha: 0.05,
            cross_waves: Some(("2019".into(), "2023".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    /// `hexagon` (d = 2, six parties) or `line` (d = 1, three parties).
    pub fixture: String,
    pub gamma: Option<f64>,
    pub n_followers: Option<usize>,
    pub n_elites: Option<usize>,
    /// Extra in-memory recovery runs on seeds `seed + 1 ..`.
    pub extra_seeds: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            fixture: "hexagon".into(),
            gamma: None,
            n_followers: None,
            n_elites: None,
            extra_seeds: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub paths: Paths,
    pub model: ModelSection,
    pub ca: CaConfig,
    pub calibrate: CalibrateSection,
    pub media: MediaSection,
    pub validate: ValidateSection,
    pub synth: SynthSection,
}

impl Config {
    /// Parses a config file; relative paths are taken from its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Config =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.paths.resolve(base);
        Ok(cfg)
    }

    /// Digest of every setting except file locations, which the manifest
    /// tracks through input digests instead.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        sha256_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }

    /// Digest of the settings that shape the embedding.
    pub fn ca_digest(&self) -> [u8; 32] {
        let json = serde_json::to_vec(&(&self.ca, &self.model)).expect("config serializes");
        let mut out = [0u8; 32];
        hex::decode_to_slice(sha256_hex(&json), &mut out).expect("hex digest");
        out
    }
}

pub fn require<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a PathBuf> {
    match path {
        Some(p) if p.exists() => Ok(p),
        Some(p) => bail!("paths.{key} = {} does not exist", p.display()),
        None => bail!("paths.{key} is not set"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            r#"
seed = 5
[paths]
edges = "data/edges.csv"
elites = "/abs/elites.csv"
[model]
min_elites_followed = 4
[ca]
k_dims = 6
[calibrate]
alpha = 0.5
dimensions = ["lrgen_19", "galtan_23"]
"#,
        )
        .unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.paths.edges.unwrap(), dir.path().join("data/edges.csv"));
        assert_eq!(cfg.paths.elites.unwrap(), PathBuf::from("/abs/elites.csv"));
        assert_eq!(cfg.model.min_elites_followed, 4);
        assert!(cfg.model.pseudonymize);
        assert_eq!(cfg.ca.k_dims, 6);
        assert_eq!(cfg.ca.solver_tolerance, 1e-10);
        let m = cfg.calibrate.manifest().unwrap();
        assert_eq!(m[1], DimensionSpec::new("galtan", "2023"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Config>("[model]\nmin_mps = 3\n").is_err());
    }

    #[test]
    fn digest_ignores_paths() {
        let mut a = Config::default();
        let b = a.clone();
        a.paths.edges = Some("x.csv".into());
        assert_eq!(a.digest(), b.digest());
        a.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
