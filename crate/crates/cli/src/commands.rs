//! One function per subcommand. Stages exchange data only through files
//! under the output directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use platefit::compare::{compare, min_strain_audit, resample_to_mesh, ScalarField};
use platefit::compliance::{default_eval_nodes, sweep_resume, ComplianceMatrix, SweepOptions};
use platefit::fe::{surface_strain, DisplacementField, LoadCase};
use platefit::model::{Model, ModelConfig};
use platefit::optimize::{outer_search, scale_to_allowable, OptimizationResult};
use platefit::strain::{direction_field, trace, DirectionField, TraceParams, Trajectory};
use platefit::synthetic::{generate, load_case, TargetSource};
use platefit::{Error, Result};
use serde::Serialize;

use crate::config::{parse_seeds, Loaded, SeedSpec};
use crate::manifest::{digest_file, sha256_hex, FileDigest, Manifest, Stage};

pub const SWEEP_FILE: &str = "sweep/compliance.txt";
pub const TARGET_FILE: &str = "target/target.csv";
pub const RESULT_FILE: &str = "optimize/result.json";
pub const DEFLECTION_FILE: &str = "analyze/deflection.csv";

pub struct Context {
    pub loaded: Loaded,
    pub out: PathBuf,
    pub overrides: BTreeMap<String, String>,
}

impl Context {
    fn cfg(&self) -> &crate::config::RunConfig {
        &self.loaded.config
    }

    /// Stable name for a file: relative to the output or configuration directory.
    fn label(&self, p: &Path) -> String {
        if let Ok(rel) = p.strip_prefix(&self.out) {
            return format!("$out/{}", rel.display());
        }
        if !self.loaded.dir.as_os_str().is_empty() {
            if let Ok(rel) = p.strip_prefix(&self.loaded.dir) {
                return rel.display().to_string();
            }
        }
        p.display().to_string()
    }

    fn input(&self, p: &Path) -> Result<FileDigest> {
        digest_file(p, self.label(p))
    }

    fn require(&self, p: &Path, what: &str, hint: &str) -> Result<()> {
        if p.is_file() {
            Ok(())
        } else {
            Err(Error::Config(format!("{what} {} does not exist{hint}", p.display())))
        }
    }

    fn model(&self) -> Result<(Model, FileDigest)> {
        let path = self.loaded.resolve(&self.cfg().model);
        let mut config = ModelConfig::load(&path)?;
        if let Some(sets) = &self.cfg().node_sets {
            config.node_sets = sets.clone();
        }
        let digest = self.input(&path)?;
        Ok((Model::from_config(config)?, digest))
    }

    fn target_path(&self) -> PathBuf {
        match &self.cfg().target.path {
            Some(p) => self.loaded.resolve(p),
            None => self.out.join(TARGET_FILE),
        }
    }

    /// Empties `out/<name>` and starts its manifest.
    fn stage(&self, name: &str, fingerprint: &str, inputs: Vec<FileDigest>) -> Result<Stage> {
        let dir = self.out.join(name);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Stage {
            dir,
            manifest: Manifest {
                tool: "platefit".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: name.into(),
                config_hash: sha256_hex(self.loaded.text.as_bytes()),
                overrides: self.overrides.clone(),
                model_fingerprint: fingerprint.into(),
                inputs,
                outputs: Vec::new(),
                notes: BTreeMap::new(),
            },
        })
    }
}

fn displacement_csv(model: &Model, disp: &DisplacementField) -> String {
    let mut s = String::from("node,x,y,u,v,w,rx,ry\n");
    for (n, d) in disp.values.iter().enumerate() {
        let (x, y) = model.mesh.node_xy(n);
        writeln!(s, "{n},{x:?},{y:?},{:?},{:?},{:?},{:?},{:?}", d[0], d[1], d[2], d[3], d[4]).unwrap();
    }
    s
}

fn deflection(model: &Model, disp: &DisplacementField) -> Result<ScalarField> {
    let w: Vec<f64> = (0..model.mesh.node_count()).map(|n| disp.w(n)).collect();
    ScalarField::from_mesh_values(&model.mesh, &w)
}

fn strain_csv(strains: &platefit::fe::StrainField) -> String {
    let mut s = String::from("x,y,exx,eyy,exy\n");
    for (i, t) in strains.tensors.iter().enumerate() {
        let (x, y) = strains.grid.xy(i);
        writeln!(s, "{x:?},{y:?},{:?},{:?},{:?}", t.exx, t.eyy, t.exy).unwrap();
    }
    s
}

#[derive(Serialize)]
struct LoadRow {
    node: usize,
    x: f64,
    y: f64,
    force: f64,
    direction: platefit::fe::LoadDirection,
}

fn load_rows(model: &Model, lc: &LoadCase) -> Vec<LoadRow> {
    lc.loads
        .iter()
        .map(|l| {
            let (x, y) = model.mesh.node_xy(l.node);
            LoadRow {
                node: l.node,
                x,
                y,
                force: l.force,
                direction: l.direction,
            }
        })
        .collect()
}

pub fn solve(ctx: &Context) -> Result<()> {
    let (model, model_digest) = ctx.model()?;
    let cfg = &ctx.cfg().solve;
    if cfg.loads.is_empty() {
        return Err(Error::Config("[solve] needs at least one entry in `loads`".into()));
    }
    let lc = load_case(&model, &cfg.loads)?;
    let disp = model.assemble()?.solve(&lc)?;
    let strains = surface_strain(&disp, &model, cfg.surface.offset())?;
    let w = deflection(&model, &disp)?;

    let mut stage = ctx.stage("solve", model.fingerprint(), vec![model_digest])?;
    stage.write("displacement.csv", displacement_csv(&model, &disp).as_bytes())?;
    stage.write("deflection.csv", w.to_text().as_bytes())?;
    stage.write("strain.csv", strain_csv(&strains).as_bytes())?;
    stage.write_json("loads.json", &load_rows(&model, &lc))?;
    let (peak_node, peak) = (0..model.mesh.node_count())
        .map(|n| (n, disp.w(n)))
        .fold((0, 0.0_f64), |m, c| if c.1.abs() > m.1.abs() { c } else { m });
    stage.note("peak_w_node", peak_node);
    stage.note("peak_w", peak);
    stage.finish()?;
    log::info!("solve: peak |w| = {:.6} mm at node {peak_node}", peak.abs());
    Ok(())
}

pub fn sweep(ctx: &Context) -> Result<()> {
    let (model, model_digest) = ctx.model()?;
    let cfg = &ctx.cfg().sweep;
    let sys = model.assemble()?;
    let eval = default_eval_nodes(&sys);
    let path = ctx.out.join(SWEEP_FILE);
    let previous = if cfg.resume && path.is_file() {
        match ComplianceMatrix::load(&path) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("ignoring previous matrix: {e}");
                None
            }
        }
    } else {
        None
    };
    let opts = SweepOptions {
        unit: cfg.unit,
        direction: cfg.direction,
        workers: ctx.cfg().workers,
        fingerprint: model.fingerprint().into(),
    };
    let outcome = sweep_resume(&sys, &model.node_sets, &eval, &opts, previous.as_ref())?;
    let m = &outcome.matrix;

    let mut stage = ctx.stage("sweep", model.fingerprint(), vec![model_digest])?;
    stage.write("compliance.txt", m.to_text().as_bytes())?;
    stage.note("candidates", m.cols());
    stage.note("eval_rows", m.rows());
    stage.note("solved", outcome.solved);
    stage.note("reused", outcome.reused);
    stage.note("degenerate_columns", &m.degenerate);
    stage.finish()?;
    log::info!(
        "sweep: {} columns x {} rows ({} solved, {} reused)",
        m.cols(),
        m.rows(),
        outcome.solved,
        outcome.reused
    );
    Ok(())
}

pub fn generate_target(ctx: &Context) -> Result<()> {
    let (model, model_digest) = ctx.model()?;
    let mut recipe = ctx
        .cfg()
        .generate
        .clone()
        .ok_or_else(|| Error::Config("generate-target needs a [generate] section".into()))?;
    if let Some(seed) = ctx.cfg().seed {
        recipe.noise.seed = seed;
    }
    let mut inputs = vec![model_digest];
    if let TargetSource::File { path } = &mut recipe.source {
        *path = ctx.loaded.resolve(path);
        ctx.require(path, "target source", "")?;
        inputs.push(ctx.input(path)?);
    }
    let target = generate(&recipe, &model)?;

    let mut stage = ctx.stage("target", model.fingerprint(), inputs)?;
    stage.write("target.csv", target.field.to_text().as_bytes())?;
    if let Some(truth) = &target.truth {
        stage.write_json("truth.json", &load_rows(&model, truth))?;
    }
    stage.note("noise_sigma", recipe.noise.sigma);
    stage.note("noise_seed", recipe.noise.seed);
    stage.note("masked_samples", target.field.masked_count());
    stage.finish()?;
    Ok(())
}

/// Fixed-width table with one row per load.
pub fn result_table(r: &OptimizationResult) -> String {
    let mut s = String::new();
    writeln!(s, "{:<6}{:>8}{:>12}{:>12}{:>16}", "load", "node", "x [mm]", "y [mm]", "F [N]").unwrap();
    for l in &r.loads {
        let coord = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v}"));
        writeln!(
            s,
            "{:<6}{:>8}{:>12}{:>12}{:>16.6}{}",
            l.set.as_str(),
            l.node,
            coord(l.x),
            coord(l.y),
            l.force,
            if l.zero { "  (zero)" } else { "" }
        )
        .unwrap();
    }
    writeln!(s, "sse        {:.12e} mm^2", r.sse).unwrap();
    writeln!(s, "objective  {:.12e} N mm^2", r.objective).unwrap();
    writeln!(s, "strategy   {} / {}", r.strategy, r.solver).unwrap();
    writeln!(s, "triples    {} ({} inner solves)", r.triples, r.evaluated).unwrap();
    if let Some(g) = &r.gap {
        writeln!(s, "gap        {:.6e} against exhaustive {:?}", g.relative_gap, g.exhaustive_nodes).unwrap();
    }
    if r.non_unique {
        writeln!(s, "warning    optimum is not unique").unwrap();
    }
    if r.degenerate {
        writeln!(s, "warning    degenerate target").unwrap();
    }
    s
}

pub fn optimize(ctx: &Context) -> Result<()> {
    let (model, model_digest) = ctx.model()?;
    let zeta_path = ctx.out.join(SWEEP_FILE);
    ctx.require(&zeta_path, "compliance matrix", "; run `platefit sweep` first")?;
    let target_path = ctx.target_path();
    ctx.require(&target_path, "target field", "; run `platefit generate-target` or set [target] path")?;
    let inputs = vec![model_digest, ctx.input(&zeta_path)?, ctx.input(&target_path)?];

    let zeta = ComplianceMatrix::load_for(&zeta_path, model.fingerprint())?;
    let field = ScalarField::load(&target_path)?;
    let t = &ctx.cfg().target;
    let rs = resample_to_mesh(&field, &model.mesh, &zeta.eval_nodes, &t.transform, t.allow_outside)?;
    let excluded: BTreeSet<usize> = rs.excluded.iter().copied().collect();
    let zeta = if excluded.is_empty() {
        zeta
    } else {
        zeta.restrict_rows(|n| !excluded.contains(&n))
    };
    if zeta.eval_nodes != rs.nodes {
        return Err(Error::Dimension("resampled target does not line up with the compliance rows".into()));
    }

    let mut opts = ctx.cfg().optimize.clone();
    if let Some(seed) = ctx.cfg().seed {
        opts.seed = seed;
    }
    if ctx.cfg().workers != 0 {
        opts.workers = ctx.cfg().workers;
    }
    let mut result = outer_search(&zeta, &rs.values, &opts)?;
    result.locate(&model.mesh);
    if let Some(g) = &result.gap {
        log::info!(
            "optimize: optimality gap {:.6e} against exhaustive triple {:?}",
            g.relative_gap,
            g.exhaustive_nodes
        );
    }

    let mut stage = ctx.stage("optimize", model.fingerprint(), inputs)?;
    stage.write_json("result.json", &result)?;
    stage.write("table.txt", result_table(&result).as_bytes())?;
    let lc = result.load_case(zeta.direction);
    let disp = model.assemble()?.solve(&lc)?;
    match scale_to_allowable(&model, &disp, &lc) {
        Ok(scaled) => {
            stage.write_json("scaled.json", &scaled)?;
            stage.note("allowable_lambda", scaled.lambda);
        }
        Err(Error::Precondition(reason)) => stage.note("allowable_scaling", format!("skipped: {reason}")),
        Err(e) => return Err(e),
    }
    stage.note("excluded_nodes", rs.excluded.len());
    stage.note("fit_rows", zeta.rows());
    stage.finish()?;
    log::info!("optimize: nodes {:?}, forces {:?}", result.nodes(), result.forces());
    Ok(())
}

#[derive(Serialize)]
struct IslandRow {
    nodes: usize,
    bounds: platefit::model::Rect,
    /// Masked regions within two elements of the island.
    touches: Vec<String>,
}

#[derive(Serialize)]
struct SeedRow {
    index: usize,
    seed: [f64; 2],
    branch: platefit::strain::Branch,
    reverse: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    termination: Option<platefit::strain::Termination>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vertices: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Position of the largest `|value|`, first in storage order on ties.
fn peak_of(field: &ScalarField) -> Result<[f64; 2]> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in field.values.iter().enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|b| v.abs() > b.1) {
                best = Some((i, v.abs()));
            }
        }
    }
    let (i, _) = best.ok_or_else(|| Error::Precondition("reference field is fully masked".into()))?;
    let (x, y) = field.grid.xy(i);
    Ok([x, y])
}

fn islands(model: &Model, field: &DirectionField) -> Vec<IslandRow> {
    let reach = 2.0 * model.mesh.element_size;
    field
        .fallback_islands()
        .into_iter()
        .map(|isl| IslandRow {
            nodes: isl.nodes.len(),
            bounds: isl.bounds,
            touches: model
                .config
                .regions
                .iter()
                .filter(|r| r.masked && isl.touches(field, &r.rect, reach))
                .map(|r| r.name.clone())
                .collect(),
        })
        .collect()
}

pub fn analyze(ctx: &Context) -> Result<()> {
    let (model, model_digest) = ctx.model()?;
    let cfg = &ctx.cfg().analyze;
    let mut inputs = vec![model_digest];

    let lc = match &cfg.loads {
        Some(loads) => load_case(&model, loads)?,
        None => {
            let path = match &cfg.result {
                Some(p) => ctx.loaded.resolve(p),
                None => ctx.out.join(RESULT_FILE),
            };
            ctx.require(&path, "optimization result", "; run `platefit optimize` or set [analyze] loads")?;
            inputs.push(ctx.input(&path)?);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let r: OptimizationResult = serde_json::from_str(&text).map_err(|e| Error::Format {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            r.load_case(ctx.cfg().sweep.direction)
        }
    };

    let mut seeds: Vec<SeedSpec> = cfg.seeds.clone();
    if let Some(p) = &cfg.seeds_file {
        let path = ctx.loaded.resolve(p);
        ctx.require(&path, "seeds file", "")?;
        inputs.push(ctx.input(&path)?);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        seeds.extend(parse_seeds(&text, &path)?);
    }

    let disp = model.assemble()?.solve(&lc)?;
    let strains = surface_strain(&disp, &model, cfg.surface.offset())?;
    let margin = cfg.mask_margin.unwrap_or(model.mesh.element_size);
    let field = direction_field(&strains, cfg.mode, &model.masked_regions(margin))?;
    let w = deflection(&model, &disp)?;

    let mut params = TraceParams::for_field(&field);
    if let Some(step) = cfg.step {
        params.step = step;
    }
    if let Some(n) = cfg.max_steps {
        params.max_steps = n;
    }

    let target_path = ctx.target_path();
    let target = if target_path.is_file() {
        inputs.push(ctx.input(&target_path)?);
        Some(ScalarField::load(&target_path)?)
    } else {
        log::info!("analyze: no target at {}; skipping the comparison report", target_path.display());
        None
    };

    let mut stage = ctx.stage("analyze", model.fingerprint(), inputs)?;
    stage.write_json("loads.json", &load_rows(&model, &lc))?;
    stage.write("deflection.csv", w.to_text().as_bytes())?;
    let mut buf = Vec::new();
    field.write_csv(&mut buf).map_err(|e| Error::io(&stage.dir, e))?;
    stage.write("directions.csv", &buf)?;
    let isl = islands(&model, &field);
    stage.note("fallback_islands", isl.len());
    stage.write_json("islands.json", &isl)?;

    let mut rows = Vec::with_capacity(seeds.len());
    for (index, s) in seeds.iter().enumerate() {
        let p = TraceParams {
            reverse: s.reverse,
            ..params
        };
        let mut row = SeedRow {
            index,
            seed: [s.x, s.y],
            branch: s.branch,
            reverse: s.reverse,
            file: None,
            termination: None,
            vertices: None,
            length: None,
            error: None,
        };
        match trace(&field, [s.x, s.y], s.branch, &p) {
            Ok(t) => {
                let rel = format!("trajectories/seed_{index:03}.csv");
                stage.write(&rel, &trajectory_bytes(&t)?)?;
                row.file = Some(rel);
                row.termination = Some(t.termination);
                row.vertices = Some(t.vertices.len());
                row.length = Some(t.length());
            }
            Err(e) => {
                log::warn!("analyze: seed {index} ({}, {}): {e}", s.x, s.y);
                row.error = Some(e.to_string());
            }
        }
        rows.push(row);
    }
    stage.write_json("seeds.json", &rows)?;
    stage.note("seeds_failed", rows.iter().filter(|r| r.error.is_some()).count());

    let below = min_strain_audit(&strains, cfg.min_strain);
    stage.note("min_strain", cfg.min_strain);
    stage.note("area_below_min_strain", below);

    if let Some(a) = target {
        let p0 = match cfg.p0 {
            Some(p) => p,
            None => peak_of(&a)?,
        };
        let report = compare(&a, &w, p0, &cfg.probes, cfg.normalize_eps)?;
        stage.write_json("report.json", &report)?;
        stage.write("report.txt", report.to_text().as_bytes())?;
    }
    stage.finish()?;
    Ok(())
}

fn trajectory_bytes(t: &Trajectory) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(buf)
}

pub fn compare_fields(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg().compare;
    let a_path = match &cfg.a {
        Some(p) => ctx.loaded.resolve(p),
        None => ctx.target_path(),
    };
    let b_path = match &cfg.b {
        Some(p) => ctx.loaded.resolve(p),
        None => ctx.out.join(DEFLECTION_FILE),
    };
    ctx.require(&a_path, "reference field", "; set [compare] a or [target] path")?;
    ctx.require(&b_path, "compared field", "; set [compare] b or run `platefit analyze`")?;
    let inputs = vec![ctx.input(&a_path)?, ctx.input(&b_path)?];
    let a = ScalarField::load(&a_path)?;
    let b = ScalarField::load(&b_path)?;
    let p0 = match cfg.p0 {
        Some(p) => p,
        None => peak_of(&a)?,
    };
    let report = compare(&a, &b, p0, &cfg.probes, cfg.normalize_eps)?;
    let mut stage = ctx.stage("compare", "", inputs)?;
    stage.write_json("report.json", &report)?;
    stage.write("report.txt", report.to_text().as_bytes())?;
    stage.finish()?;
    Ok(())
}
