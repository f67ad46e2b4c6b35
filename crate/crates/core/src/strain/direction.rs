use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::{canonical_deg, principal, zero_strain, StrainTensor2D};
use crate::error::{Error, Result};
use crate::fe::StrainField;
use crate::model::Rect;

/// Which direction an entry (or a trajectory vertex) follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DirectionMode {
    #[serde(rename = "principal-major")]
    PrincipalMajor,
    #[serde(rename = "principal-minor")]
    PrincipalMinor,
    #[serde(rename = "zero-A")]
    ZeroA,
    #[serde(rename = "zero-B")]
    ZeroB,
    #[serde(rename = "none")]
    None,
}

impl DirectionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectionMode::PrincipalMajor => "principal-major",
            DirectionMode::PrincipalMinor => "principal-minor",
            DirectionMode::ZeroA => "zero-A",
            DirectionMode::ZeroB => "zero-B",
            DirectionMode::None => "none",
        }
    }

    pub fn is_zero_strain(self) -> bool {
        matches!(self, DirectionMode::ZeroA | DirectionMode::ZeroB)
    }
}

impl fmt::Display for DirectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a direction field shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldMode {
    /// Zero-strain directions; minor principal directions where none exist.
    ZeroStrainWithMinorFallback,
    /// Zero-strain directions only; `none` where they do not exist.
    ZeroStrain,
    PrincipalMajor,
    PrincipalMinor,
}

impl FieldMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zero-strain-with-minor-fallback" => Ok(Self::ZeroStrainWithMinorFallback),
            "zero-strain" => Ok(Self::ZeroStrain),
            "principal-major" => Ok(Self::PrincipalMajor),
            "principal-minor" => Ok(Self::PrincipalMinor),
            _ => Err(Error::Unknown {
                kind: "direction mode",
                id: s.into(),
            }),
        }
    }

    pub fn follows_zero_strain(self) -> bool {
        matches!(self, Self::ZeroStrainWithMinorFallback | Self::ZeroStrain)
    }
}

/// Zero-strain branch. At a point, A is the smaller canonical angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    A,
    B,
}

impl Branch {
    pub fn mode(self) -> DirectionMode {
        match self {
            Branch::A => DirectionMode::ZeroA,
            Branch::B => DirectionMode::ZeroB,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub mode: DirectionMode,
    /// Degrees in [0, 180); 0 for `none`.
    pub angle: f64,
}

impl Direction {
    const NONE: Self = Self {
        mode: DirectionMode::None,
        angle: 0.0,
    };
}

/// Per-node entry. Principal and fallback entries carry the same direction
/// on both branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionEntry {
    pub a: Direction,
    pub b: Direction,
    pub masked: bool,
}

impl DirectionEntry {
    pub fn branch(&self, branch: Branch) -> Direction {
        match branch {
            Branch::A => self.a,
            Branch::B => self.b,
        }
    }

    /// Zero-strain directions were requested but do not exist here.
    pub fn is_fallback(&self) -> bool {
        !self.masked && !self.a.mode.is_zero_strain()
    }
}

/// Angular resolution of stored angles: 2^-20 degrees. Rounding to this grid
/// absorbs the last-bit noise of scaled tensors, so fields of `c * ε` and `ε`
/// compare equal bit for bit.
pub const ANGLE_QUANTUM: f64 = 1.0 / (1u64 << 20) as f64;

pub fn quantize_deg(angle: f64) -> f64 {
    canonical_deg((angle / ANGLE_QUANTUM).round() * ANGLE_QUANTUM)
}

/// Directions for one tensor at full precision.
pub fn directions_at(t: &StrainTensor2D, mode: FieldMode) -> [Direction; 2] {
    let minor = || {
        let p = principal(t);
        let d = Direction {
            mode: DirectionMode::PrincipalMinor,
            angle: p.alpha2,
        };
        [d, d]
    };
    match mode {
        FieldMode::PrincipalMajor => {
            let d = Direction {
                mode: DirectionMode::PrincipalMajor,
                angle: principal(t).alpha1,
            };
            [d, d]
        }
        FieldMode::PrincipalMinor => minor(),
        FieldMode::ZeroStrain | FieldMode::ZeroStrainWithMinorFallback => match zero_strain(t) {
            Some(z) => [
                Direction {
                    mode: DirectionMode::ZeroA,
                    angle: z.beta_a,
                },
                Direction {
                    mode: DirectionMode::ZeroB,
                    angle: z.beta_b,
                },
            ],
            None if mode == FieldMode::ZeroStrainWithMinorFallback => minor(),
            None => [Direction::NONE; 2],
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionField {
    pub mode: FieldMode,
    pub strains: StrainField,
    pub entries: Vec<DirectionEntry>,
    /// Excluded rectangles; tracing stops on entering one.
    pub mask: Vec<Rect>,
}

/// Contiguous group of fallback nodes (4-neighbour connectivity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Island {
    pub nodes: Vec<usize>,
    /// Bounding box of the node positions.
    pub bounds: Rect,
}

impl Island {
    /// Some node lies within `distance` of `rect`.
    pub fn touches(&self, field: &DirectionField, rect: &Rect, distance: f64) -> bool {
        let grown = rect.expanded(distance);
        self.nodes.iter().any(|&n| {
            let (x, y) = field.strains.grid.xy(n);
            grown.contains(x, y)
        })
    }
}

pub fn direction_field(strains: &StrainField, mode: FieldMode, mask: &[Rect]) -> Result<DirectionField> {
    let grid = strains.grid;
    if grid.is_empty() || strains.tensors.is_empty() {
        return Err(Error::Precondition("strain field is empty".into()));
    }
    grid.validate().map_err(Error::Precondition)?;
    if strains.tensors.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "strain field has {} tensors for a {}x{} grid",
            strains.tensors.len(),
            grid.nx,
            grid.ny
        )));
    }
    if let Some(i) = strains.tensors.iter().position(|t| !t.is_finite()) {
        return Err(Error::Numerical(format!("non-finite strain tensor at node {i}")));
    }
    let entries = strains
        .tensors
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let (x, y) = grid.xy(i);
            let masked = mask.iter().any(|r| r.contains(x, y));
            let [mut a, mut b] = directions_at(t, mode).map(|d| Direction {
                mode: d.mode,
                angle: quantize_deg(d.angle),
            });
            // A root just below 180 rounds to 0; keep A <= B after rounding.
            if a.angle > b.angle {
                std::mem::swap(&mut a.angle, &mut b.angle);
            }
            DirectionEntry { a, b, masked }
        })
        .collect();
    Ok(DirectionField {
        mode,
        strains: strains.clone(),
        entries,
        mask: mask.to_vec(),
    })
}

impl DirectionField {
    pub fn is_masked(&self, x: f64, y: f64) -> bool {
        self.mask.iter().any(|r| r.contains(x, y))
    }

    /// Regions without zero-strain directions, largest first. Empty for
    /// principal fields.
    pub fn fallback_islands(&self) -> Vec<Island> {
        let grid = self.strains.grid;
        let mut seen = vec![false; self.entries.len()];
        let mut islands = Vec::new();
        if !self.mode.follows_zero_strain() {
            return islands;
        }
        for start in 0..self.entries.len() {
            if seen[start] || !self.entries[start].is_fallback() {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut nodes = Vec::new();
            while let Some(n) = stack.pop() {
                nodes.push(n);
                let (i, j) = (n % grid.nx, n / grid.nx);
                let mut neighbours = Vec::with_capacity(4);
                if i > 0 {
                    neighbours.push(n - 1);
                }
                if i + 1 < grid.nx {
                    neighbours.push(n + 1);
                }
                if j > 0 {
                    neighbours.push(n - grid.nx);
                }
                if j + 1 < grid.ny {
                    neighbours.push(n + grid.nx);
                }
                for m in neighbours {
                    if !seen[m] && self.entries[m].is_fallback() {
                        seen[m] = true;
                        stack.push(m);
                    }
                }
            }
            nodes.sort_unstable();
            let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for &n in &nodes {
                let (x, y) = grid.xy(n);
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
            islands.push(Island {
                nodes,
                bounds: Rect::new(x0, x1, y0, y1),
            });
        }
        islands.sort_by(|a, b| b.nodes.len().cmp(&a.nodes.len()).then(a.nodes[0].cmp(&b.nodes[0])));
        islands
    }

    /// One row per node: position, both branch directions and the mask flag.
    /// The first line records the grid.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        let g = self.strains.grid;
        writeln!(out, "# grid origin={},{} spacing={},{} dims={},{}", g.origin_x, g.origin_y, g.dx, g.dy, g.nx, g.ny)?;
        writeln!(out, "x,y,mode_a,angle_a,mode_b,angle_b,masked")?;
        for (i, e) in self.entries.iter().enumerate() {
            let (x, y) = g.xy(i);
            writeln!(
                out,
                "{x},{y},{},{},{},{},{}",
                e.a.mode,
                e.a.angle,
                e.b.mode,
                e.b.angle,
                u8::from(e.masked)
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}
