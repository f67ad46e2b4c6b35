//! Run configuration file.
//!
//! Relative paths inside the file resolve against the file's directory.

use std::path::{Path, PathBuf};

use platefit::compare::{Probe, Transform, DEFAULT_NORMALIZE_EPS};
use platefit::fe::{LoadDirection, SurfaceOffset};
use platefit::model::NodeSetConfig;
use platefit::optimize::OptimizeOptions;
use platefit::strain::{Branch, FieldMode};
use platefit::synthetic::{LoadSpec, TargetRecipe};
use platefit::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Model description (geometry, materials, laminates, sets, supports).
    pub model: PathBuf,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Seeds coordinate-descent restarts and target noise.
    #[serde(default)]
    pub seed: Option<u64>,
    /// 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    /// Replaces the model's candidate node sets.
    #[serde(default)]
    pub node_sets: Option<NodeSetConfig>,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub generate: Option<TargetRecipe>,
    #[serde(default)]
    pub optimize: OptimizeOptions,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub compare: CompareSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub loads: Vec<LoadSpec>,
    pub surface: Surface,
}

/// Through-thickness position for strain recovery.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Surface {
    #[default]
    Top,
    Bottom,
    Mid,
}

impl Surface {
    pub fn offset(self) -> SurfaceOffset {
        match self {
            Surface::Top => SurfaceOffset::Top,
            Surface::Bottom => SurfaceOffset::Bottom,
            Surface::Mid => SurfaceOffset::Mid,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub unit: f64,
    pub direction: LoadDirection,
    /// Reuse columns of an existing matrix at the output path.
    pub resume: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            unit: 1.0,
            direction: LoadDirection::NegZ,
            resume: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    /// Defaults to the output of `generate-target`.
    pub path: Option<PathBuf>,
    pub transform: Transform,
    /// Drop mesh nodes outside the target instead of failing.
    pub allow_outside: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub x: f64,
    pub y: f64,
    #[serde(default = "branch_a")]
    pub branch: Branch,
    #[serde(default)]
    pub reverse: bool,
}

fn branch_a() -> Branch {
    Branch::A
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeSection {
    pub mode: FieldMode,
    pub surface: Surface,
    /// Grows every masked region by this much [mm]; one element by default.
    pub mask_margin: Option<f64>,
    /// Explicit loads; otherwise the optimizer result is used.
    pub loads: Option<Vec<LoadSpec>>,
    /// Defaults to the output of `optimize`.
    pub result: Option<PathBuf>,
    pub seeds: Vec<SeedSpec>,
    /// CSV with columns `x,y[,branch[,reverse]]`.
    pub seeds_file: Option<PathBuf>,
    pub step: Option<f64>,
    pub max_steps: Option<usize>,
    /// Normalization point; the peak of the target when absent.
    pub p0: Option<[f64; 2]>,
    pub probes: Vec<Probe>,
    /// Smallest measurable strain.
    pub min_strain: f64,
    pub normalize_eps: f64,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            mode: FieldMode::ZeroStrainWithMinorFallback,
            surface: Surface::Top,
            mask_margin: None,
            loads: None,
            result: None,
            seeds: Vec::new(),
            seeds_file: None,
            step: None,
            max_steps: None,
            p0: None,
            probes: Vec::new(),
            min_strain: 20e-6,
            normalize_eps: DEFAULT_NORMALIZE_EPS,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareSection {
    /// Reference field; defaults to the target.
    pub a: Option<PathBuf>,
    /// Field under test; defaults to the deflection written by `analyze`.
    pub b: Option<PathBuf>,
    pub p0: Option<[f64; 2]>,
    pub probes: Vec<Probe>,
    pub normalize_eps: f64,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            a: None,
            b: None,
            p0: None,
            probes: Vec::new(),
            normalize_eps: DEFAULT_NORMALIZE_EPS,
        }
    }
}

/// Parsed configuration with its raw bytes and location.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub text: String,
    pub dir: PathBuf,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, text, dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }
}

/// Reads seeds from CSV. Blank lines, `#` comments and a header starting with `x` are skipped.
pub fn parse_seeds(text: &str, path: &Path) -> Result<Vec<SeedSpec>> {
    let bad = |line: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        reason: format!("line {line}: {reason}"),
    };
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('x') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(2..=4).contains(&cols.len()) {
            return Err(bad(i + 1, format!("expected 2 to 4 columns, found {}", cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(i + 1, format!("`{s}`: {e}")));
        let branch = match cols.get(2).copied().unwrap_or("A") {
            "A" | "a" | "" => Branch::A,
            "B" | "b" => Branch::B,
            other => return Err(bad(i + 1, format!("branch must be A or B, got `{other}`"))),
        };
        let reverse = match cols.get(3).copied().unwrap_or("false") {
            "true" | "1" => true,
            "false" | "0" | "" => false,
            other => return Err(bad(i + 1, format!("reverse must be true or false, got `{other}`"))),
        };
        out.push(SeedSpec {
            x: num(cols[0])?,
            y: num(cols[1])?,
            branch,
            reverse,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c: RunConfig = toml::from_str("model = \"m.toml\"").unwrap();
        assert_eq!(c.out, PathBuf::from("out"));
        assert!(c.sweep.resume);
        assert_eq!(c.optimize.strategy, "exhaustive");
        assert_eq!(c.analyze.min_strain, 20e-6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("model = \"m.toml\"\nbogus = 1").is_err());
        assert!(toml::from_str::<RunConfig>("model = \"m.toml\"\n[sweep]\nunits = 2").is_err());
    }

    #[test]
    fn seeds_csv() {
        let s = parse_seeds("x,y,branch\n# c\n1, 2\n3,4,B,true\n", Path::new("s.csv")).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[1].branch, s[1].reverse), (Branch::B, true));
        assert!(parse_seeds("1,2,C\n", Path::new("s.csv")).is_err());
        assert!(parse_seeds("1\n", Path::new("s.csv")).is_err());
    }
}
