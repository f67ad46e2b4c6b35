use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::boundary::{BoundaryConditions, Dof, SymmetryEdge};
use super::laminate::{laminate_stiffness, Layer, LaminateSpec, ShellStiffness};
use super::material::MaterialSpec;
use super::mesh::{Mesh, Rect};
use super::sets::{define_node_sets, NodeSets};
use crate::error::{Error, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_element_size")]
    pub element_size: f64,
    #[serde(default)]
    pub half_model: bool,
}

fn default_element_size() -> f64 {
    20.0
}

fn yes() -> bool {
    true
}

/// Patch of elements carrying a non-default laminate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub name: String,
    pub laminate: String,
    pub rect: Rect,
    /// Left out of strain-direction analysis (with a margin).
    #[serde(default = "yes")]
    pub masked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSetConfig {
    pub j: Rect,
    pub k: Rect,
    pub l: Rect,
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema_version: u32,
    pub default_laminate: String,
    pub geometry: GeometryConfig,
    pub materials: BTreeMap<String, MaterialSpec>,
    pub laminates: BTreeMap<String, LaminateSpec>,
    #[serde(default)]
    pub regions: Vec<RegionConfig>,
    pub node_sets: NodeSetConfig,
    #[serde(default)]
    pub boundary: BoundaryConditions,
}

fn sandwich(skin: &str, core: &str) -> LaminateSpec {
    let layer = |m: &str| Layer {
        material: m.into(),
        thickness: 1.0,
        angle: 0.0,
    };
    LaminateSpec::new(vec![layer(skin), layer(core), layer(skin)])
}

impl ModelConfig {
    /// Half model of the 1000 x 480 mm aluminium-skinned sandwich demonstrator.
    ///
    /// x = 0 is the symmetry line, y = 0 the hinge line. The centre hinge
    /// bracket occupies the lower-left corner, the small hinge bracket the
    /// lower-right corner; both carry a steel core.
    pub fn demonstrator() -> Self {
        let core = MaterialSpec {
            e1: 1.0,
            e2: 1.0,
            e3: 630.0,
            nu12: 0.0,
            nu13: 0.0,
            nu23: 0.0,
            g12: 1.0,
            g13: 280.0,
            g23: 140.0,
            allowable_stress: None,
        };
        let materials = BTreeMap::from([
            ("aluminium".to_string(), MaterialSpec::isotropic(70_000.0, 0.33).with_allowable(130.0)),
            ("honeycomb".to_string(), core),
            ("steel".to_string(), MaterialSpec::isotropic(210_000.0, 0.3)),
        ]);
        let laminates = BTreeMap::from([
            ("sandwich".to_string(), sandwich("aluminium", "honeycomb")),
            ("stiffened".to_string(), sandwich("aluminium", "steel")),
        ]);
        let chb = Rect::new(0.0, 60.0, 0.0, 100.0);
        let hinge = Rect::new(460.0, 500.0, 0.0, 40.0);
        let all = Dof::ALL;
        let boundary = BoundaryConditions::default()
            .fix("chb", chb, &all)
            .fix("hinge-back-edge", Rect::new(460.0, 500.0, 0.0, 0.0), &[Dof::V, Dof::W, Dof::Ry])
            .with_symmetry(SymmetryEdge::XMin);
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            default_laminate: "sandwich".into(),
            geometry: GeometryConfig {
                width: 500.0,
                height: 480.0,
                element_size: 20.0,
                half_model: true,
            },
            materials,
            laminates,
            regions: vec![
                RegionConfig {
                    name: "chb".into(),
                    laminate: "stiffened".into(),
                    rect: chb,
                    masked: true,
                },
                RegionConfig {
                    name: "hinge-bracket".into(),
                    laminate: "stiffened".into(),
                    rect: hinge,
                    masked: true,
                },
            ],
            node_sets: NodeSetConfig {
                j: Rect::new(400.0, 500.0, 60.0, 200.0),
                k: Rect::new(360.0, 500.0, 280.0, 480.0),
                l: Rect::new(0.0, 40.0, 120.0, 300.0),
            },
            boundary,
        }
    }

    /// Same planform with GFRP [0,45,-45,0] skins around an aramid honeycomb core.
    pub fn demonstrator_gfrp(core_thickness: f64) -> Self {
        let mut cfg = Self::demonstrator();
        let gfrp = MaterialSpec {
            e1: 22_550.0,
            e2: 20_900.0,
            e3: 1.0,
            nu12: 0.15,
            nu13: 0.0,
            nu23: 0.0,
            g12: 4500.0,
            g13: 3500.0,
            g23: 3500.0,
            allowable_stress: Some(100.0),
        };
        let aramid = MaterialSpec {
            e1: 1.0,
            e2: 1.0,
            e3: 500.0,
            nu12: 0.0,
            nu13: 0.0,
            nu23: 0.0,
            g12: 1.0,
            g13: 66.0,
            g23: 34.0,
            allowable_stress: None,
        };
        cfg.materials.insert("gfrp".into(), gfrp);
        cfg.materials.insert("aramid".into(), aramid);
        let ply = |m: &str, angle: f64, t: f64| Layer {
            material: m.into(),
            thickness: t,
            angle,
        };
        let skin = [0.0, 45.0, -45.0, 0.0];
        let stack = |core: &str| {
            let mut layers: Vec<Layer> = skin.iter().map(|&a| ply("gfrp", a, 0.125)).collect();
            layers.push(ply(core, 0.0, core_thickness));
            layers.extend(skin.iter().rev().map(|&a| ply("gfrp", a, 0.125)));
            LaminateSpec::new(layers)
        };
        cfg.laminates.insert("sandwich".into(), stack("aramid"));
        cfg.laminates.insert("stiffened".into(), stack("steel"));
        cfg.materials.remove("aluminium");
        cfg.materials.remove("honeycomb");
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_schema()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(reason) => Error::Config(format!("{}: {reason}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("model config is always serialisable")
    }

    fn check_schema(&self) -> Result<()> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {MODEL_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("model config is always serialisable");
        hex::encode(Sha256::digest(&json))
    }
}

/// Validated, ready-to-assemble model.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub mesh: Mesh,
    /// Indexed like [`Mesh::laminate_names`].
    pub stiffness: Vec<ShellStiffness>,
    pub laminates: Vec<LaminateSpec>,
    pub node_sets: NodeSets,
    pub boundary: BoundaryConditions,
    fingerprint: String,
}

impl Model {
    pub fn from_config(config: ModelConfig) -> Result<Self> {
        config.check_schema()?;
        for (id, m) in &config.materials {
            m.validate(id)?;
        }
        for (id, lam) in &config.laminates {
            lam.validate(id, &config.materials)?;
        }
        let g = &config.geometry;
        let mut mesh = Mesh::build_grid(g.width, g.height, g.element_size, g.half_model)?;
        let lookup = |name: &str| {
            config.laminates.get(name).ok_or_else(|| Error::Unknown {
                kind: "laminate",
                id: name.to_string(),
            })
        };
        lookup(&config.default_laminate)?;
        mesh.set_default_laminate(&config.default_laminate);
        for region in &config.regions {
            lookup(&region.laminate)?;
            if mesh.assign_laminate(&region.rect, &region.laminate) == 0 {
                return Err(Error::Config(format!(
                    "region `{}` does not contain any element centroid",
                    region.name
                )));
            }
        }
        let mut stiffness = Vec::new();
        let mut laminates = Vec::new();
        for name in mesh.laminate_names() {
            let spec = lookup(name)?;
            stiffness.push(laminate_stiffness(spec, &config.materials)?);
            laminates.push(spec.clone());
        }
        let ns = &config.node_sets;
        let node_sets = define_node_sets(&mesh, [ns.j, ns.k, ns.l])?;
        let boundary = config.boundary.clone();
        let fingerprint = config.fingerprint();
        Ok(Self {
            config,
            mesh,
            stiffness,
            laminates,
            node_sets,
            boundary,
            fingerprint,
        })
    }

    pub fn demonstrator() -> Self {
        Self::from_config(ModelConfig::demonstrator()).expect("built-in model is valid")
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn element_stiffness(&self, element: usize) -> &ShellStiffness {
        &self.stiffness[self.mesh.element_laminate_id(element)]
    }

    pub fn element_laminate(&self, element: usize) -> &LaminateSpec {
        &self.laminates[self.mesh.element_laminate_id(element)]
    }

    pub fn material(&self, id: &str) -> &MaterialSpec {
        &self.config.materials[id]
    }

    /// Footprints excluded from direction analysis, grown by `margin` mm.
    pub fn masked_regions(&self, margin: f64) -> Vec<Rect> {
        self.config
            .regions
            .iter()
            .filter(|r| r.masked)
            .map(|r| r.rect.expanded(margin))
            .collect()
    }

    pub fn region(&self, name: &str) -> Option<&RegionConfig> {
        self.config.regions.iter().find(|r| r.name == name)
    }
}
