use nalgebra::{Matrix2, SymmetricEigen};
use platefit::fe::{surface_strain, LoadCase, StrainField, SurfaceOffset};
use platefit::grid::GridSpec;
use platefit::model::{Model, Rect};
use platefit::strain::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng) -> StrainTensor2D {
    let scale = 10f64.powf(rng.random_range(-6.0..-2.0));
    StrainTensor2D::new(
        scale * rng.random_range(-1.0..1.0),
        scale * rng.random_range(-1.0..1.0),
        scale * rng.random_range(-1.0..1.0),
    )
}

fn ang_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

#[test]
fn principal_matches_eigendecomposition() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    while checked < 2000 {
        let t = random_tensor(&mut rng);
        let eig = SymmetricEigen::new(Matrix2::new(t.exx, t.exy, t.exy, t.eyy));
        let (hi, lo) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
        let scale = eig.eigenvalues.abs().max();
        // Eigenvectors are only well conditioned with a clear gap.
        if eig.eigenvalues[hi] - eig.eigenvalues[lo] < 1e-2 * scale {
            continue;
        }
        let p = principal(&t);
        assert!(p.e1 >= p.e2);
        assert!((p.e1 - eig.eigenvalues[hi]).abs() <= 1e-12 * scale);
        assert!((p.e2 - eig.eigenvalues[lo]).abs() <= 1e-12 * scale);
        let v = eig.eigenvectors.column(hi);
        let oracle = v[1].atan2(v[0]).to_degrees();
        assert!(ang_diff(p.alpha1, oracle).to_radians() <= 1e-12, "{t:?}: {} vs {oracle}", p.alpha1);
        assert!((ang_diff(p.alpha1, p.alpha2) - 90.0).abs() <= 1e-12);
        assert!(t.shear_strain(p.alpha1).abs() <= 1e-12 * scale);
        checked += 1;
    }
}

/// Brackets of sign changes of the normal strain on a 0.001 degree grid.
fn scan_roots(t: &StrainTensor2D) -> Vec<(f64, f64)> {
    let n = 180_000;
    let step = 180.0 / n as f64;
    let mut out = Vec::new();
    let mut prev = t.normal_strain(0.0);
    for i in 1..=n {
        let cur = t.normal_strain(i as f64 * step);
        if (prev < 0.0) != (cur < 0.0) {
            out.push(((i - 1) as f64 * step, i as f64 * step));
        }
        prev = cur;
    }
    out
}

#[test]
fn zero_strain_matches_angle_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 1000 {
        let t = random_tensor(&mut rng);
        let p = principal(&t);
        // Keep the two roots more than a scan step apart.
        if p.e1 * p.e2 >= 0.0 || p.e1.min(-p.e2) < 1e-3 * t.radius() {
            continue;
        }
        let z = zero_strain(&t).expect("opposite principal signs");
        assert!(z.beta_a <= z.beta_b);
        let brackets = scan_roots(&t);
        assert_eq!(brackets.len(), 2, "{t:?}");
        for beta in [z.beta_a, z.beta_b] {
            assert!(t.normal_strain(beta).abs() <= 1e-12 * t.radius().max(t.mean().abs()));
            let hit = brackets
                .iter()
                .any(|&(lo, hi)| ang_diff(beta, 0.5 * (lo + hi)) <= 0.5 * (hi - lo) + 1e-9);
            assert!(hit, "{t:?}: {beta} not in {brackets:?}");
        }
        checked += 1;
    }
}

#[test]
fn zero_strain_absent_for_same_sign_principals() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 2000 {
        let t = random_tensor(&mut rng);
        let p = principal(&t);
        if p.e1 * p.e2 <= 0.0 {
            continue;
        }
        assert!(zero_strain(&t).is_none(), "{t:?}");
        if checked < 50 {
            assert!(scan_roots(&t).is_empty());
        }
        checked += 1;
    }
}

#[test]
fn angles_follow_frame_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let t = random_tensor(&mut rng);
        let phi = rng.random_range(-360.0..360.0);
        let r = t.rotated(phi);
        let (p, q) = (principal(&t), principal(&r));
        if t.radius() > 1e-6 * t.mean().abs() {
            assert!(ang_diff(p.alpha1 + phi, q.alpha1) <= 1e-10);
        }
        if let (Some(a), Some(b)) = (zero_strain(&t), zero_strain(&r)) {
            let mut got = [b.beta_a, b.beta_b];
            let mut want = [canonical_deg(a.beta_a + phi), canonical_deg(a.beta_b + phi)];
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            let direct = ang_diff(got[0], want[0]).max(ang_diff(got[1], want[1]));
            let crossed = ang_diff(got[0], want[1]).max(ang_diff(got[1], want[0]));
            assert!(direct.min(crossed) <= 1e-10, "{t:?} {phi}");
        }
    }
}

#[test]
fn rigid_rotation_leaves_directions_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let g: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1e-3..1e-3));
        let omega = rng.random_range(-0.1..0.1);
        let t = StrainTensor2D::from_displacement_gradient(g[0], g[1], g[2], g[3]);
        let r = StrainTensor2D::from_displacement_gradient(g[0], g[1] - omega, g[2] + omega, g[3]);
        assert!((t.exy - r.exy).abs() <= 1e-16);
        assert!(ang_diff(principal(&t).alpha1, principal(&r).alpha1) <= 1e-10);
        assert_eq!(zero_strain(&t).is_some(), zero_strain(&r).is_some());
    }
}

fn demonstrator_strains() -> (Model, StrainField) {
    let model = Model::demonstrator();
    let sys = model.assemble().unwrap();
    let node = |x, y| model.mesh.node_at(x, y).unwrap();
    let loads = LoadCase::downward(&[(node(480.0, 120.0), 1885.0), (node(440.0, 360.0), 2705.0)]);
    let disp = sys.solve(&loads).unwrap();
    let strains = surface_strain(&disp, &model, SurfaceOffset::Top).unwrap();
    (model, strains)
}

fn same_bits_entry(x: &DirectionEntry, y: &DirectionEntry) -> bool {
    x.masked == y.masked
        && x.a.mode == y.a.mode
        && x.b.mode == y.b.mode
        && x.a.angle.to_bits() == y.a.angle.to_bits()
        && x.b.angle.to_bits() == y.b.angle.to_bits()
}

fn same_bits(a: &DirectionField, b: &DirectionField) -> bool {
    a.entries.len() == b.entries.len() && a.entries.iter().zip(&b.entries).all(|(x, y)| same_bits_entry(x, y))
}

#[test]
fn scaled_demonstrator_field_is_bit_identical() {
    let (model, strains) = demonstrator_strains();
    let mask = model.masked_regions(model.mesh.element_size);
    for mode in [FieldMode::ZeroStrainWithMinorFallback, FieldMode::PrincipalMajor, FieldMode::PrincipalMinor] {
        let base = direction_field(&strains, mode, &mask).unwrap();
        for c in [1e-6, 0.37, 2.0, 3.0, 7.1, 1e4, 123_456.7] {
            let scaled = direction_field(&strains.scaled(c), mode, &mask).unwrap();
            for (i, (x, y)) in base.entries.iter().zip(&scaled.entries).enumerate() {
                if !same_bits_entry(x, y) {
                    eprintln!("{i} {:?} {x:?} {y:?}", strains.tensors[i]);
                }
            }
            assert!(same_bits(&base, &scaled), "{mode:?} c = {c}");
        }
    }
}

#[test]
fn demonstrator_has_fallback_island_next_to_chb() {
    let (model, strains) = demonstrator_strains();
    let h = model.mesh.element_size;
    let field = direction_field(&strains, FieldMode::ZeroStrainWithMinorFallback, &model.masked_regions(h)).unwrap();
    let islands = field.fallback_islands();
    let chb = model.region("chb").unwrap().rect;
    let near: Vec<&Island> = islands.iter().filter(|i| i.touches(&field, &chb, 2.0 * h)).collect();
    assert!(!near.is_empty(), "islands: {:?}", islands.iter().map(|i| i.bounds).collect::<Vec<_>>());
    assert!(near[0].nodes.len() >= 2);
}

fn uniform_field(t: StrainTensor2D, mode: FieldMode) -> DirectionField {
    let grid = GridSpec {
        origin_x: 0.0,
        origin_y: 0.0,
        dx: 20.0,
        dy: 20.0,
        nx: 26,
        ny: 25,
    };
    let s = StrainField {
        grid,
        offset: SurfaceOffset::Top,
        tensors: vec![t; grid.len()],
    };
    direction_field(&s, mode, &[]).unwrap()
}

fn max_line_deviation(traj: &Trajectory, angle: f64) -> f64 {
    let (s, c) = angle.to_radians().sin_cos();
    let [x0, y0] = traj.seed;
    traj.vertices
        .iter()
        .skip(1)
        .map(|v| {
            let (dx, dy) = (v.x - x0, v.y - y0);
            (dx * s - dy * c).abs() / dx.hypot(dy)
        })
        .fold(0.0, f64::max)
}

#[test]
fn uniform_fields_trace_straight_lines() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let t = random_tensor(&mut rng);
        for mode in [FieldMode::ZeroStrain, FieldMode::PrincipalMajor, FieldMode::PrincipalMinor] {
            let field = uniform_field(t, mode);
            for branch in [Branch::A, Branch::B] {
                let want = directions_at(&t, mode)[if branch == Branch::A { 0 } else { 1 }];
                if want.mode == DirectionMode::None {
                    continue;
                }
                let traj = trace(&field, [250.0, 240.0], branch, &TraceParams::for_field(&field)).unwrap();
                assert_eq!(traj.termination, Termination::Boundary);
                assert!(traj.vertices.len() > 10);
                assert!(max_line_deviation(&traj, want.angle) <= 1e-9, "{t:?} {mode:?}");
            }
        }
    }
}

#[test]
fn cylindrical_bending_trajectories() {
    let nu = 0.3_f64;
    let e = 1e-3;
    let field = uniform_field(StrainTensor2D::new(-e, nu * e, 0.0), FieldMode::ZeroStrain);
    let beta = (1.0 / nu).sqrt().atan().to_degrees();
    for (branch, want) in [(Branch::A, beta), (Branch::B, 180.0 - beta)] {
        let traj = trace(&field, [250.0, 100.0], branch, &TraceParams::for_field(&field)).unwrap();
        let (a, b) = (traj.vertices[0], *traj.vertices.last().unwrap());
        let got = (b.y - a.y).atan2(b.x - a.x).to_degrees();
        assert!(ang_diff(got, want) <= 0.1, "{got} vs {want}");
    }
}

fn smooth_field() -> DirectionField {
    let grid = GridSpec {
        origin_x: 0.0,
        origin_y: 0.0,
        dx: 20.0,
        dy: 20.0,
        nx: 26,
        ny: 25,
    };
    let tensors = (0..grid.len())
        .map(|i| {
            let (x, y) = grid.xy(i);
            StrainTensor2D::new(1e-3 * (1.0 + x / 200.0), -8e-4 - 1e-6 * y, 3e-4 * (x / 100.0).sin() + 1e-4 * (y / 80.0).cos())
        })
        .collect();
    let s = StrainField {
        grid,
        offset: SurfaceOffset::Top,
        tensors,
    };
    direction_field(&s, FieldMode::ZeroStrainWithMinorFallback, &[]).unwrap()
}

#[test]
fn zero_strain_residual_vanishes_along_traces() {
    let field = smooth_field();
    let mut vertices = 0;
    for seed in [[100.0, 100.0], [250.0, 240.0], [400.0, 60.0], [30.0, 400.0]] {
        for branch in [Branch::A, Branch::B] {
            for reverse in [false, true] {
                let params = TraceParams {
                    reverse,
                    ..TraceParams::for_field(&field)
                };
                let traj = trace(&field, seed, branch, &params).unwrap();
                assert_eq!(traj.termination, Termination::Boundary);
                for v in &traj.vertices {
                    assert!(v.mode.is_zero_strain());
                    let t = field.strains.interpolate(v.x, v.y).unwrap();
                    assert!(t.normal_strain(v.angle).abs() <= 1e-12);
                    vertices += 1;
                }
            }
        }
    }
    assert!(vertices > 500, "{vertices}");
}

fn distance_to_polyline(traj: &Trajectory, x: f64, y: f64) -> f64 {
    traj.vertices
        .windows(2)
        .map(|w| {
            let (ax, ay, bx, by) = (w[0].x, w[0].y, w[1].x, w[1].y);
            let (dx, dy) = (bx - ax, by - ay);
            let s = (((x - ax) * dx + (y - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            (x - ax - s * dx).hypot(y - ay - s * dy)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn traces_are_reversible() {
    let field = smooth_field();
    let params = TraceParams::for_field(&field);
    for seed in [[100.0, 100.0], [250.0, 240.0], [400.0, 60.0]] {
        for branch in [Branch::A, Branch::B] {
            let fwd = trace(&field, seed, branch, &params).unwrap();
            let end = fwd.vertices.last().unwrap();
            let h = fwd.end_heading().unwrap();
            let back = trace(
                &field,
                [end.x, end.y],
                branch,
                &TraceParams {
                    heading: Some([-h[0], -h[1]]),
                    max_steps: fwd.vertices.len() - 1,
                    ..params
                },
            )
            .unwrap();
            assert!(back.vertices.len() >= fwd.vertices.len() - 1);
            for v in &back.vertices {
                assert!(distance_to_polyline(&fwd, v.x, v.y) <= params.step, "{v:?}");
            }
        }
    }
}

#[test]
fn trajectory_switches_into_fallback_and_back() {
    // Biaxial tension band across the middle of a shear field.
    let grid = GridSpec {
        origin_x: 0.0,
        origin_y: 0.0,
        dx: 10.0,
        dy: 10.0,
        nx: 41,
        ny: 41,
    };
    let tensors = (0..grid.len())
        .map(|i| {
            let (_, y) = grid.xy(i);
            let band = (-((y - 200.0) / 40.0).powi(2)).exp();
            StrainTensor2D::new(1e-3, -5e-4 + 1.5e-3 * band, 2e-4)
        })
        .collect();
    let s = StrainField {
        grid,
        offset: SurfaceOffset::Top,
        tensors,
    };
    let field = direction_field(&s, FieldMode::ZeroStrainWithMinorFallback, &[]).unwrap();
    assert_eq!(field.fallback_islands().len(), 1);
    let traj = trace(&field, [200.0, 10.0], Branch::A, &TraceParams::for_field(&field)).unwrap();
    let modes: Vec<DirectionMode> = traj.vertices.iter().map(|v| v.mode).collect();
    let first_minor = modes.iter().position(|&m| m == DirectionMode::PrincipalMinor).expect("enters the island");
    assert!(modes[first_minor..].contains(&DirectionMode::ZeroA), "leaves the island");
    assert!(traj.mode_changes() >= 2);

    let strict = direction_field(&s, FieldMode::ZeroStrain, &[]).unwrap();
    let t = trace(&strict, [200.0, 10.0], Branch::A, &TraceParams::for_field(&strict)).unwrap();
    assert_eq!(t.termination, Termination::ModeIsland);
}

#[test]
fn many_seeds_report_individual_failures() {
    let field = uniform_field(StrainTensor2D::new(1e-3, -1e-3, 0.0), FieldMode::ZeroStrain);
    let out = trace_many(
        &field,
        &[([10.0, 10.0], Branch::A), ([-5.0, 0.0], Branch::A), ([100.0, 100.0], Branch::B)],
        &TraceParams::for_field(&field),
    );
    assert!(out[0].is_ok() && out[1].is_err() && out[2].is_ok());
}

#[test]
fn masked_regions_grow_by_margin() {
    let model = Model::demonstrator();
    let m = model.masked_regions(20.0);
    assert!(m.contains(&Rect::new(-20.0, 80.0, -20.0, 120.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scaling_leaves_random_fields_bit_identical(seed in 0u64..1_000_000, log_c in -6.0f64..6.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec { origin_x: 0.0, origin_y: 0.0, dx: 5.0, dy: 5.0, nx: 12, ny: 9 };
        let s = StrainField {
            grid,
            offset: SurfaceOffset::Top,
            tensors: (0..grid.len()).map(|_| random_tensor(&mut rng)).collect(),
        };
        let c = 10f64.powf(log_c);
        for mode in [FieldMode::ZeroStrainWithMinorFallback, FieldMode::ZeroStrain, FieldMode::PrincipalMajor] {
            let a = direction_field(&s, mode, &[]).unwrap();
            let b = direction_field(&s.scaled(c), mode, &[]).unwrap();
            prop_assert!(same_bits(&a, &b));
        }
    }

    #[test]
    fn trajectory_vertices_stay_in_domain(x in 0.0f64..500.0, y in 0.0f64..480.0, reverse: bool) {
        let field = smooth_field();
        let params = TraceParams { reverse, ..TraceParams::for_field(&field) };
        let t = trace(&field, [x, y], Branch::A, &params).unwrap();
        for w in t.vertices.windows(2) {
            prop_assert!((w[1].x - w[0].x).hypot(w[1].y - w[0].y) < 2.0 * params.step);
        }
        for v in &t.vertices {
            prop_assert!(field.strains.grid.contains(v.x, v.y));
        }
    }
}
