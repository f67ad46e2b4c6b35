use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::direction::{directions_at, Branch, Direction, DirectionField, DirectionMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceParams {
    /// Step length [mm].
    pub step: f64,
    pub max_steps: usize,
    /// Start against the default heading.
    pub reverse: bool,
    /// Preferred initial heading. Without one, the start direction is the
    /// requested branch pointing into `y >= 0`.
    pub heading: Option<[f64; 2]>,
}

impl TraceParams {
    /// Quarter-element steps, at most 100 000 of them.
    pub fn for_field(field: &DirectionField) -> Self {
        let g = field.strains.grid;
        Self {
            step: 0.25 * g.dx.min(g.dy),
            max_steps: 100_000,
            reverse: false,
            heading: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Boundary,
    MaxSteps,
    ExcludedRegion,
    ModeIsland,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Boundary => "boundary",
            Termination::MaxSteps => "max-steps",
            Termination::ExcludedRegion => "excluded-region",
            Termination::ModeIsland => "mode-island",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub mode: DirectionMode,
    /// Direction at this vertex [deg, 0..180).
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: [f64; 2],
    pub branch: Branch,
    pub vertices: Vec<Vertex>,
    pub termination: Termination,
}

impl Trajectory {
    /// Direction of the last segment, if there is one.
    pub fn end_heading(&self) -> Option<[f64; 2]> {
        let n = self.vertices.len();
        if n < 2 {
            return None;
        }
        let (a, b) = (self.vertices[n - 2], self.vertices[n - 1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len = dx.hypot(dy);
        Some([dx / len, dy / len])
    }

    /// Arc length of the polyline [mm].
    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y)).sum()
    }

    /// Number of places where the followed mode changes.
    pub fn mode_changes(&self) -> usize {
        self.vertices.windows(2).filter(|w| w[0].mode != w[1].mode).count()
    }

    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "# seed={},{} branch={:?} termination={}",
            self.seed[0],
            self.seed[1],
            self.branch,
            self.termination.as_str()
        )?;
        writeln!(out, "x,y,mode,angle")?;
        for v in &self.vertices {
            writeln!(out, "{},{},{},{}", v.x, v.y, v.mode, v.angle)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

fn unit(angle_deg: f64) -> [f64; 2] {
    let (s, c) = angle_deg.to_radians().sin_cos();
    [c, s]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Direction to follow at `(x, y)`; `None` where the field mode has none.
///
/// With a previous heading the zero-strain root closest to it (as a line) is
/// kept, which tracks the branch through places where the canonical A/B
/// order swaps, and the sign is chosen to continue forward.
fn local(field: &DirectionField, x: f64, y: f64, branch: Branch, prev: Option<[f64; 2]>) -> Option<(Direction, [f64; 2])> {
    let t = field.strains.interpolate(x, y)?;
    let dirs = directions_at(&t, field.mode);
    if dirs[0].mode == DirectionMode::None {
        return None;
    }
    let own = match branch {
        Branch::A => 0,
        Branch::B => 1,
    };
    let pick = match prev {
        Some(h) => {
            let d0 = dot(unit(dirs[0].angle), h).abs();
            let d1 = dot(unit(dirs[1].angle), h).abs();
            if d0 > d1 {
                0
            } else if d1 > d0 {
                1
            } else {
                own
            }
        }
        None => own,
    };
    let mut d = dirs[pick];
    if d.mode.is_zero_strain() {
        d.mode = branch.mode();
    }
    let mut u = unit(d.angle);
    if prev.is_some_and(|h| dot(u, h) < 0.0) {
        u = [-u[0], -u[1]];
    }
    Some((d, u))
}

fn blocked(field: &DirectionField, x: f64, y: f64) -> Option<Termination> {
    if !field.strains.grid.contains(x, y) {
        Some(Termination::Boundary)
    } else if field.is_masked(x, y) {
        Some(Termination::ExcludedRegion)
    } else {
        None
    }
}

/// Follows `branch` from `seed` with explicit midpoint steps, re-evaluating
/// the direction from the interpolated tensor at every stage.
pub fn trace(field: &DirectionField, seed: [f64; 2], branch: Branch, params: &TraceParams) -> Result<Trajectory> {
    let [x0, y0] = seed;
    match blocked(field, x0, y0) {
        Some(Termination::Boundary) => {
            return Err(Error::Precondition(format!("seed ({x0}, {y0}) lies outside the field domain")))
        }
        Some(_) => return Err(Error::Precondition(format!("seed ({x0}, {y0}) lies in an excluded region"))),
        None => {}
    }
    if !(params.step.is_finite() && params.step > 0.0) {
        return Err(Error::Precondition(format!("step must be positive, got {}", params.step)));
    }
    let h = params.step;
    let mut out = Trajectory {
        seed,
        branch,
        vertices: Vec::new(),
        termination: Termination::ModeIsland,
    };
    let Some((d, mut dir)) = local(field, x0, y0, branch, params.heading) else {
        out.vertices.push(Vertex {
            x: x0,
            y: y0,
            mode: DirectionMode::None,
            angle: 0.0,
        });
        return Ok(out);
    };
    if params.reverse {
        dir = [-dir[0], -dir[1]];
    }
    out.vertices.push(Vertex {
        x: x0,
        y: y0,
        mode: d.mode,
        angle: d.angle,
    });
    let (mut x, mut y) = (x0, y0);
    let mut steps = 0;
    out.termination = loop {
        if steps >= params.max_steps {
            break Termination::MaxSteps;
        }
        let (xm, ym) = (x + 0.5 * h * dir[0], y + 0.5 * h * dir[1]);
        if let Some(t) = blocked(field, xm, ym) {
            break t;
        }
        let Some((_, mid)) = local(field, xm, ym, branch, Some(dir)) else {
            break Termination::ModeIsland;
        };
        let (xn, yn) = (x + h * mid[0], y + h * mid[1]);
        if let Some(t) = blocked(field, xn, yn) {
            break t;
        }
        let Some((d, next)) = local(field, xn, yn, branch, Some(mid)) else {
            break Termination::ModeIsland;
        };
        out.vertices.push(Vertex {
            x: xn,
            y: yn,
            mode: d.mode,
            angle: d.angle,
        });
        (x, y, dir) = (xn, yn, next);
        steps += 1;
    };
    Ok(out)
}

/// Traces every seed independently; failures are reported per seed.
pub fn trace_many(field: &DirectionField, seeds: &[([f64; 2], Branch)], params: &TraceParams) -> Vec<Result<Trajectory>> {
    seeds.par_iter().map(|&(seed, branch)| trace(field, seed, branch, params)).collect()
}
