use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::Mesh;

pub const FIELD_TAG: &str = "#plate-field";
pub const FIELD_VERSION: u32 = 1;
/// Masked-cell marker in field files.
pub const MASKED: &str = "NA";

/// Scalar samples on a regular grid; `None` marks a masked cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<Option<f64>>,
}

/// Maps mesh coordinates into field coordinates: `p_field = scale * p_mesh + translate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Transform {
    pub translate: [f64; 2],
    pub scale: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Self {
            translate: [0.0, 0.0],
            scale: 1.0,
        }
    }
}

impl Transform {
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.scale * x + self.translate[0], self.scale * y + self.translate[1])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) || !self.translate.iter().all(|t| t.is_finite()) {
            return Err(Error::Precondition(format!("invalid transform {self:?}")));
        }
        Ok(())
    }
}

/// Target values on the mesh nodes that fall on unmasked field cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resampled {
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
    /// Requested nodes dropped because they map to masked cells or outside the field.
    pub excluded: Vec<usize>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<Option<f64>>) -> Result<Self> {
        grid.validate().map_err(Error::Precondition)?;
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        if let Some(i) = values.iter().position(|v| v.is_some_and(|v| !v.is_finite())) {
            return Err(Error::Numerical(format!("non-finite value at sample {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| {
                let (x, y) = grid.xy(i);
                Some(f(x, y))
            })
            .collect();
        Self::new(grid, values)
    }

    /// One value per mesh node, on the mesh's own grid.
    pub fn from_mesh_values(mesh: &Mesh, values: &[f64]) -> Result<Self> {
        Self::new(GridSpec::of_mesh(mesh), values.iter().map(|&v| Some(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v.map(|v| c * v)).collect(),
        }
    }

    /// Bilinear interpolation; `None` outside the grid or when a corner
    /// with non-zero weight is masked.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let cell = self.grid.locate(x, y)?;
        let mut acc = 0.0;
        for ((i, j), w) in cell.corners() {
            if w == 0.0 {
                continue;
            }
            acc += w * self.values[self.grid.index(i, j)]?;
        }
        Some(acc)
    }

    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = String::new();
        writeln!(s, "{FIELD_TAG},v{FIELD_VERSION}").unwrap();
        writeln!(s, "origin,{:?},{:?}", g.origin_x, g.origin_y).unwrap();
        writeln!(s, "spacing,{:?},{:?}", g.dx, g.dy).unwrap();
        writeln!(s, "dims,{},{}", g.nx, g.ny).unwrap();
        for row in self.values.chunks(g.nx) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Some(v) => format!("{v:?}"),
                    None => MASKED.to_string(),
                })
                .collect();
            writeln!(s, "{}", cells.join(",")).unwrap();
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::format(path, reason);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let tag = lines.next().ok_or_else(|| bad("empty file".into()))?;
        let version = tag
            .trim()
            .strip_prefix(FIELD_TAG)
            .and_then(|r| r.strip_prefix(",v"))
            .ok_or_else(|| bad(format!("expected `{FIELD_TAG},v{FIELD_VERSION}` header, found `{tag}`")))?;
        if version != FIELD_VERSION.to_string() {
            return Err(Error::Schema {
                path: path.into(),
                reason: format!("field format version {version}, expected {FIELD_VERSION}"),
            });
        }
        let mut header = |key: &str| -> Result<[String; 2]> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 || parts[0] != key {
                return Err(bad(format!("expected `{key},<a>,<b>`, found `{line}`")));
            }
            Ok([parts[1].to_string(), parts[2].to_string()])
        };
        let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| bad(format!("invalid number `{s}`"))) };
        let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| bad(format!("invalid count `{s}`"))) };
        let origin = header("origin")?;
        let spacing = header("spacing")?;
        let dims = header("dims")?;
        let grid = GridSpec {
            origin_x: num(&origin[0])?,
            origin_y: num(&origin[1])?,
            dx: num(&spacing[0])?,
            dy: num(&spacing[1])?,
            nx: int(&dims[0])?,
            ny: int(&dims[1])?,
        };
        grid.validate().map_err(bad)?;
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            for cell in line.split(',').map(str::trim) {
                values.push(if cell == MASKED { None } else { Some(num(cell)?) });
            }
        }
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{}: header declares {}x{} = {} values, body has {}",
                path.display(),
                grid.nx,
                grid.ny,
                grid.len(),
                values.len()
            )));
        }
        Self::new(grid, values)
    }
}

/// Interpolates `field` at the (transformed) positions of `nodes`.
///
/// Nodes on masked cells are always excluded. Nodes outside the field are
/// excluded when `allow_outside` is set and rejected otherwise.
pub fn resample_to_mesh(
    field: &ScalarField,
    mesh: &Mesh,
    nodes: &[usize],
    transform: &Transform,
    allow_outside: bool,
) -> Result<Resampled> {
    transform.validate()?;
    let mut out = Resampled {
        nodes: Vec::with_capacity(nodes.len()),
        values: Vec::with_capacity(nodes.len()),
        excluded: Vec::new(),
    };
    for &n in nodes {
        if n >= mesh.node_count() {
            return Err(Error::UnknownNode(n));
        }
        let (x, y) = mesh.node_xy(n);
        let (fx, fy) = transform.apply(x, y);
        if !field.grid.contains(fx, fy) && !allow_outside {
            return Err(Error::Precondition(format!(
                "node {n} at ({x}, {y}) maps to ({fx}, {fy}), outside the target field"
            )));
        }
        match field.sample(fx, fy) {
            Some(v) => {
                out.nodes.push(n);
                out.values.push(v);
            }
            None => out.excluded.push(n),
        }
    }
    if out.nodes.is_empty() {
        return Err(Error::Precondition("the target field does not overlap any requested node".into()));
    }
    Ok(out)
}

/// Divides by the interpolated value at `p0`. The result is exactly 1 at `p0`
/// when `p0` is a grid sample, and within round-off elsewhere.
pub fn normalize_at(field: &ScalarField, p0: [f64; 2], eps: f64) -> Result<ScalarField> {
    let w0 = field
        .sample(p0[0], p0[1])
        .ok_or_else(|| Error::Precondition(format!("normalization point {p0:?} is outside the field or masked")))?;
    if w0.abs() <= eps {
        return Err(Error::Precondition(format!(
            "value {w0} at normalization point {p0:?} is within {eps} of zero"
        )));
    }
    Ok(ScalarField {
        grid: field.grid,
        values: field.values.iter().map(|v| v.map(|v| v / w0)).collect(),
    })
}

pub const DEFAULT_NORMALIZE_EPS: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize) -> GridSpec {
        GridSpec {
            origin_x: -5.0,
            origin_y: 2.0,
            dx: 2.5,
            dy: 4.0,
            nx,
            ny,
        }
    }

    #[test]
    fn text_round_trip_with_mask() {
        let mut f = ScalarField::from_fn(grid(4, 3), |x, y| 0.1 * x - y / 3.0).unwrap();
        f.values[5] = None;
        let back = ScalarField::parse(&f.to_text(), Path::new("f.csv")).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.masked_count(), 1);
    }

    #[test]
    fn value_count_must_match_header() {
        let f = ScalarField::from_fn(grid(10, 10), |x, _| x).unwrap();
        let text = f.to_text();
        let cut = text.trim_end().rsplit_once(',').unwrap().0.to_string();
        assert!(matches!(ScalarField::parse(&cut, Path::new("f.csv")), Err(Error::Dimension(_))));
    }

    #[test]
    fn malformed_header_and_values() {
        let p = Path::new("f.csv");
        assert!(matches!(ScalarField::parse("#plate-field,v1\norigin,0\n", p), Err(Error::Format { .. })));
        assert!(matches!(ScalarField::parse("#plate-field,v9\n", p), Err(Error::Schema { .. })));
        let nan = "#plate-field,v1\norigin,0,0\nspacing,1,1\ndims,2,1\n1.0,NaN\n";
        assert!(ScalarField::parse(nan, p).is_err());
    }

    #[test]
    fn bilinear_reproduces_affine_fields() {
        let f = ScalarField::from_fn(grid(6, 5), |x, y| x + 2.0 * y).unwrap();
        for (x, y) in [(-4.3, 2.1), (0.0, 9.7), (7.4, 17.9)] {
            assert!((f.sample(x, y).unwrap() - (x + 2.0 * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_corner_hides_cell() {
        let mut f = ScalarField::from_fn(grid(3, 3), |_, _| 1.0).unwrap();
        f.values[4] = None;
        let (x, y) = f.grid.xy(4);
        assert_eq!(f.sample(x, y), None);
        assert_eq!(f.sample(x - 1.0, y - 1.0), None);
        let (x0, y0) = f.grid.xy(0);
        assert_eq!(f.sample(x0, y0), Some(1.0));
    }

    #[test]
    fn normalization() {
        let f = ScalarField::from_fn(grid(4, 4), |x, y| 3.0 + x * y).unwrap();
        let (x, y) = f.grid.xy(6);
        let n = normalize_at(&f, [x, y], DEFAULT_NORMALIZE_EPS).unwrap();
        assert_eq!(n.sample(x, y), Some(1.0));
        let c = ScalarField::from_fn(grid(3, 3), |_, _| -22.93).unwrap();
        let ones = normalize_at(&c, [-2.5, 6.0], DEFAULT_NORMALIZE_EPS).unwrap();
        assert!(ones.values.iter().all(|v| *v == Some(1.0)));
        let z = ScalarField::from_fn(grid(3, 3), |_, _| 0.0).unwrap();
        assert!(normalize_at(&z, [-5.0, 2.0], DEFAULT_NORMALIZE_EPS).is_err());
    }
}
