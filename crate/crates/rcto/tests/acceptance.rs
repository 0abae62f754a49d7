//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! status 1 if any criterion fails.

#[allow(dead_code)]
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rcto::config::ConfigDoc;
use rcto_core::domain::{GroundStructure, MemberDef};
use rcto_core::fea::{self, Q4};
use rcto_core::optimizer::{
    non_discreteness, vts_thickness_penalty, vts_thickness_penalty_derivative, IterationRecord,
    Optimizer, RunResult,
};
use rcto_core::truss::{self, TrussLayout};
use rcto_core::{gradcheck, BoundaryConditions, Mesh, Mode, Problem, RunConfig};

use support::oc;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> (ConfigDoc, Problem) {
    let doc = ConfigDoc::load(&configs().join(name)).unwrap();
    let p = doc.build().unwrap();
    (doc, p)
}

fn run_to_end(opt: &mut Optimizer) -> bool {
    let max = opt.problem().config.max_outer_iters;
    for _ in 0..max {
        if opt.outer_step().unwrap().1 {
            return true;
        }
    }
    false
}

fn three_point(nx: usize, ny: usize, h: f64) -> (Mesh, BoundaryConditions) {
    let mesh = Mesh::new(nx, ny, h).unwrap();
    let bl = mesh.node_index(0, 0);
    let br = mesh.node_index(nx, 0);
    let top = mesh.node_index(nx / 2, ny);
    let bcs = BoundaryConditions::new(
        &mesh,
        vec![2 * bl, 2 * bl + 1, 2 * br + 1],
        vec![(2 * top + 1, -1.0)],
    )
    .unwrap();
    (mesh, bcs)
}

fn no_steel() -> GroundStructure {
    GroundStructure {
        nodes: Vec::new(),
        members: Vec::new(),
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let (_, p) = load("tiny.cfg");
    let mut opt = Optimizer::new(p).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for stage in ["initial", "after 5 iterations"] {
        if stage != "initial" {
            for _ in 0..5 {
                opt.outer_step().unwrap();
            }
        }
        let r = gradcheck::check_gradients(&mut opt, &gradcheck::default_steps()).unwrap();
        pass &= r.families.len() == 3;
        for f in &r.families {
            pass &= f.max_rel_error < 1e-4 && f.v_shaped;
            lines.push(format!(
                "{} {} {:.1e}",
                stage,
                f.family.name(),
                f.max_rel_error
            ));
        }
    }
    let t = start.elapsed();
    pass &= t < Duration::from_secs(30);
    outcome(pass, format!("{}; {:.2?}", lines.join(", "), t))
}

fn ssm() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mesh = Mesh::new(12, 6, 0.5).unwrap();
    let mut pou = 0.0f64;
    for _ in 0..2000 {
        let p = [
            rng.gen_range(0.0..mesh.width()),
            rng.gen_range(0.0..mesh.height()),
        ];
        let r = rng.gen_range(0.4..1.5);
        let map = truss::spread_weights(0, p, &mesh, r).unwrap();
        let sum: f64 = map.entries.iter().map(|e| e.weight).sum();
        pou = pou.max((sum - 1.0).abs());
    }

    // Coincident nodes with a radius below one edge.
    let (a, b) = (mesh.node_index(2, 1), mesh.node_index(7, 4));
    let (pa, pb) = (mesh.node_coords(a), mesh.node_coords(b));
    let ke = truss::global_stiffness(5800.0, 1.3, pa, pb).unwrap();
    let ma = truss::spread_weights(0, pa, &mesh, 0.4).unwrap();
    let mb = truss::spread_weights(1, pb, &mesh, 0.4).unwrap();
    let spread = truss::couple_to_continuum(&ke, &ma, &mb);
    let dofs = [2 * a, 2 * a + 1, 2 * b, 2 * b + 1];
    let mut coincident = 0.0f64;
    let scale = ke.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for (i, &di) in dofs.iter().enumerate() {
        for (j, &dj) in dofs.iter().enumerate() {
            let r = spread.dofs.iter().position(|&d| d == di).unwrap();
            let c = spread.dofs.iter().position(|&d| d == dj).unwrap();
            coincident = coincident.max((spread.matrix[r][c] - ke[i][j]).abs() / scale);
        }
    }
    let layout = TrussLayout::new(
        &mesh,
        vec![pa, pb],
        vec![MemberDef {
            nodes: [0, 1],
            area: 1.3,
        }],
        0.4,
        1e-3,
    )
    .unwrap();
    let c = layout.coupling(0, 5800.0, 1.0);
    for &(di, vi) in &c.vector {
        for &(dj, vj) in &c.vector {
            let i = dofs.iter().position(|&d| d == di).unwrap();
            let j = dofs.iter().position(|&d| d == dj).unwrap();
            coincident = coincident.max((c.stiffness * vi * vj - ke[i][j]).abs() / scale);
        }
    }

    // Energy identity for random placements and displacements.
    let mut energy = 0.0f64;
    let mut energy_plain = 0.0f64;
    for _ in 0..500 {
        let p1: [f64; 2] = [rng.gen_range(0.5..5.5), rng.gen_range(0.5..2.5)];
        let p2 = [rng.gen_range(0.5..5.5), rng.gen_range(0.5..2.5)];
        if (p1[0] - p2[0]).hypot(p1[1] - p2[1]) < 0.2 {
            continue;
        }
        let r = rng.gen_range(0.4..1.5);
        let ke = truss::global_stiffness(rng.gen_range(1.0..6000.0), 1.0, p1, p2).unwrap();
        let (m1, m2) = (
            truss::spread_weights(0, p1, &mesh, r).unwrap(),
            truss::spread_weights(1, p2, &mesh, r).unwrap(),
        );
        let s = truss::couple_to_continuum(&ke, &m1, &m2);
        let d: Vec<f64> = (0..mesh.dof_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let mut lhs = 0.0;
        for (i, &di) in s.dofs.iter().enumerate() {
            for (j, &dj) in s.dofs.iter().enumerate() {
                lhs += d[di] * s.matrix[i][j] * d[dj];
            }
        }
        let (u1, u2) = (m1.interpolate(&d), m2.interpolate(&d));
        let u = [u1[0], u1[1], u2[0], u2[1]];
        let mut rhs = 0.0;
        let mut size = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                rhs += u[i] * ke[i][j] * u[j];
                size += (u[i] * ke[i][j] * u[j]).abs();
            }
        }
        // Relative to the summed term magnitudes: near-zero elongation makes
        // the energy itself a cancellation.
        energy = energy.max((lhs - rhs).abs() / size);
        energy_plain = energy_plain.max((lhs - rhs).abs() / rhs.abs());
    }
    outcome(
        pou <= 1e-12 && coincident <= 1e-15 && energy <= 1e-10,
        format!("partition of unity {pou:.1e}, coincident {coincident:.1e}, energy {energy:.1e} (against the energy itself {energy_plain:.1e})"),
    )
}

fn bimodulus() -> Outcome {
    let (mesh, bcs) = three_point(40, 10, 1.0);
    let mut cfg = RunConfig::with_defaults(Mode::Binary, 1.0);
    cfg.concrete_volume_max = 0.5 * 400.0;
    cfg.steel_volume_max = 1.0;
    let p = Problem::new(mesh.clone(), bcs.clone(), no_steel(), cfg).unwrap();

    let mut opt = Optimizer::new(p.clone()).unwrap();
    opt.set_ratio(0.025);
    let design = opt.design().clone();
    let ev = opt.evaluate(&design, None).unwrap();
    let rep = ev.inner.as_ref().unwrap();
    let q4 = Q4::new(1.0);
    let mut wrong = 0;
    let mut labelled = 0;
    for e in 0..mesh.element_count() {
        let s = q4.stresses(
            &ev.assignment.element_d(e),
            &ev.system.element_displacements(&mesh, e),
        );
        for g in 0..4 {
            let ps = fea::principal_stresses(s[g]);
            let t = ev.assignment.gauss[e][g].tension;
            labelled += t[0] as usize + t[1] as usize;
            wrong += (t[0] && ps.sigma1 < 0.0) as usize + (t[1] && ps.sigma2 < 0.0) as usize;
        }
    }
    let fixed_point = rep.converged
        && rep.iterations <= 50
        && rep.continuation_steps == 0
        && rep.ratio == 0.025
        && rep.labels_consistent
        && wrong == 0
        && labelled > 0;

    let mut opt = Optimizer::new(p).unwrap();
    opt.set_ratio(1.0);
    let ev1 = opt.evaluate(&design, None).unwrap();
    let rep1 = ev1.inner.as_ref().unwrap();
    let d = fea::isotropic(180.0, 0.3).d;
    let kes: Vec<_> = ev1
        .rho
        .iter()
        .map(|&r| q4.stiffness(&[d; 4], 1.0 * opt.penalization().concrete(r).0))
        .collect();
    let plain = fea::assemble_and_solve(&mesh, &kes, &[], &bcs).unwrap();
    let identical = rep1.iterations == 1
        && plain.compliance.to_bits() == ev1.compliance.to_bits()
        && plain
            .d
            .iter()
            .zip(&ev1.system.d)
            .all(|(a, b)| a.to_bits() == b.to_bits());
    outcome(
        fixed_point && identical,
        format!(
            "ratio 0.025: {} solves, converged {}, {} tension labels, {} with negative stress; ratio 1: {} solve, bitwise equal {}",
            rep.iterations, rep.converged, labelled, wrong, rep1.iterations, identical
        ),
    )
}

fn volumes_ok(log: &[IterationRecord], vc: f64, vs: f64) -> bool {
    log.iter()
        .all(|r| r.concrete_volume <= vc * (1.0 + 1e-6) && r.steel_volume <= vs * (1.0 + 1e-6))
}

struct Mbb {
    result: RunResult,
    vc: f64,
}

fn mbb() -> (Outcome, Option<Mbb>) {
    let (nx, ny) = (60, 20);
    let mesh = Mesh::new(nx, ny, 1.0).unwrap();
    let mut fixed: Vec<usize> = (0..=ny).map(|j| 2 * mesh.node_index(0, j)).collect();
    fixed.push(2 * mesh.node_index(nx, 0) + 1);
    let bcs = BoundaryConditions::new(&mesh, fixed, vec![(2 * mesh.node_index(0, ny) + 1, -1.0)])
        .unwrap();
    let mut cfg = RunConfig::with_defaults(Mode::Binary, 1.0);
    cfg.concrete_volume_max = 0.5 * (nx * ny) as f64;
    cfg.steel_volume_max = 1.0;
    cfg.heaviside.enabled = false;
    cfg.material.bimodulus = false;
    let radius = cfg.filter_radius;
    let vc = cfg.concrete_volume_max;
    let p = Problem::new(mesh, bcs, no_steel(), cfg).unwrap();

    let t = Instant::now();
    let result = Optimizer::new(p).unwrap().run().unwrap();
    let t_mma = t.elapsed();
    let t = Instant::now();
    let oracle = oc::mbb(nx, ny, 0.5, 3.0, radius, 180.0, 0.3);
    let t_oc = t.elapsed();

    let c = result.log.last().unwrap().compliance;
    let rel = (c - oracle.compliance) / oracle.compliance;
    let pass =
        rel.abs() <= 0.02 && t_mma < Duration::from_secs(60) && t_oc < Duration::from_secs(60);
    (
        outcome(
            pass,
            format!(
                "MMA {c:.4} ({} it, {t_mma:.2?}), OC {:.4} ({} it, {t_oc:.2?}), difference {:+.2}%",
                result.log.len(),
                oracle.compliance,
                oracle.iterations,
                100.0 * rel
            ),
        ),
        Some(Mbb { result, vc }),
    )
}

fn sigmoid() -> Outcome {
    let mut midpoint = true;
    let mut monotone = true;
    let mut saturated = true;
    let ms: Vec<f64> = (1..100).map(|k| k as f64 / 100.0).collect();
    let cs: Vec<f64> = (-20..=30).map(|k| 10f64.powf(k as f64 / 10.0)).collect();
    for &m in &ms {
        for &c in &cs {
            midpoint &= vts_thickness_penalty(m, m, c) == m / 2.0;
            let mut prev = vts_thickness_penalty(0.0, m, c);
            for k in 1..=2000 {
                let x = k as f64 / 2000.0;
                let y = vts_thickness_penalty(x, m, c);
                monotone &= y >= prev && vts_thickness_penalty_derivative(x, m, c) >= 0.0;
                prev = y;
            }
            if c >= 20.0 && m <= 0.5 {
                saturated &= vts_thickness_penalty(1.0, m, c) >= 0.999;
            }
        }
    }
    outcome(
        midpoint && monotone && saturated,
        format!(
            "y(m) = m/2 {midpoint}, monotone {monotone}, y(1) >= 0.999 {saturated} over {} (m, c) pairs",
            ms.len() * cs.len()
        ),
    )
}

struct Beam {
    result: RunResult,
    problem: Problem,
    outcome: Outcome,
    elapsed: Duration,
}

fn centroid(s: [[f64; 3]; 4]) -> [f64; 3] {
    let mut a = [0.0; 3];
    for g in s {
        for k in 0..3 {
            a[k] += 0.25 * g[k];
        }
    }
    a
}

fn beam() -> Beam {
    let start = Instant::now();
    let (_, problem) = load("beam.cfg");
    let mesh = problem.mesh.clone();
    let mut opt = Optimizer::new(problem.clone()).unwrap();
    let converged = run_to_end(&mut opt);
    let design = opt.design().clone();
    let ev = opt.evaluate(&design, None).unwrap();
    let result = opt.finish(converged);
    let elapsed = start.elapsed();

    let q4 = Q4::new(mesh.element_size());
    let mat = problem.config.material;
    let solid = fea::isotropic(mat.e_comp, mat.nu_comp).d;
    let kes: Vec<_> = (0..mesh.element_count())
        .map(|_| q4.stiffness(&[solid; 4], problem.config.thickness))
        .collect();
    let plain = fea::assemble_and_solve(&mesh, &kes, &[], &problem.bcs).unwrap();
    let plain_s: Vec<[f64; 3]> = (0..mesh.element_count())
        .map(|e| centroid(q4.stresses(&[solid; 4], &plain.element_displacements(&mesh, e))))
        .collect();

    let mut active = 0;
    let mut members_outside = 0;
    for (m, mem) in result.ground.members.iter().enumerate() {
        if result.design.x_t[m] <= 0.5 {
            continue;
        }
        active += 1;
        let [a, b] = mem.nodes;
        let (pa, pb) = (result.design.positions[a], result.design.positions[b]);
        let outside = (1..10).any(|k| {
            let t = k as f64 / 10.0;
            let e = mesh.element_at([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
            plain_s[e][0] <= 0.0
        });
        members_outside += outside as usize;
    }

    let mut dense = 0;
    let mut tension_final = 0;
    let mut tension_plain = 0;
    for e in 0..mesh.element_count() {
        if ev.rho[e] <= 0.5 {
            continue;
        }
        dense += 1;
        let s = centroid(q4.stresses(
            &ev.assignment.element_d(e),
            &ev.system.element_displacements(&mesh, e),
        ));
        let f = fea::principal_stresses(s);
        tension_final += (f.sigma1 + f.sigma2 > 0.0) as usize;
        let p = fea::principal_stresses(plain_s[e]);
        tension_plain += (p.sigma1 + p.sigma2 > 0.0) as usize;
    }
    let pass = converged
        && active > 0
        && members_outside == 0
        && tension_final == 0
        && elapsed < Duration::from_secs(15 * 60);
    let detail = format!(
        "{}x{} beam, {} iterations, converged {converged}, {elapsed:.1?}; active members {active}, outside the tensile bottom-fiber mask {members_outside}; dense elements {dense}, tension-dominated in the final field {tension_final}, in the plain-FEA field {tension_plain}",
        mesh.nx(),
        mesh.ny(),
        result.log.len()
    );
    Beam {
        result,
        problem,
        outcome: outcome(pass, detail),
        elapsed,
    }
}

fn feasibility(beam: Option<&Beam>, mbb: Option<&Mbb>) -> Outcome {
    let (Some(beam), Some(mbb)) = (beam, mbb) else {
        return outcome(false, String::from("prerequisite run failed"));
    };
    let cfg = &beam.problem.config;
    let beam_ok = volumes_ok(
        &beam.result.log,
        cfg.concrete_volume_max,
        cfg.steel_volume_max,
    );
    let mbb_ok = volumes_ok(&mbb.result.log, mbb.vc, 1.0);
    let nd = non_discreteness(&beam.result.densities);
    let worst = beam
        .result
        .log
        .iter()
        .map(|r| {
            (r.concrete_volume / cfg.concrete_volume_max).max(r.steel_volume / cfg.steel_volume_max)
        })
        .fold(0.0, f64::max);
    outcome(
        beam_ok && mbb_ok && nd <= 0.05,
        format!(
            "{} + {} iterates within budget: {}; largest beam volume ratio {worst:.9}; final non-discreteness {nd:.4}",
            beam.result.log.len(),
            mbb.result.log.len(),
            beam_ok && mbb_ok
        ),
    )
}

fn rcto(args: &[&std::ffi::OsStr]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rcto"))
        .args(args)
        .output()
        .unwrap()
}

fn aci() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (file, target) in [("prismatic_2p25in.sec", 13.5), ("prismatic_3in.sec", 19.2)] {
        let path = configs().join(file);
        let out = rcto(&["aci".as_ref(), path.as_os_str()]);
        let text = String::from_utf8_lossy(&out.stdout);
        let load = text.lines().find_map(|l| {
            l.strip_prefix("P = ")?
                .strip_suffix(" kN")?
                .parse::<f64>()
                .ok()
        });
        match load {
            Some(p) if out.status.success() => {
                let rel = (p - target) / target;
                pass &= rel.abs() <= 0.05;
                parts.push(format!("{p:.2} kN against {target} ({:+.1}%)", 100.0 * rel));
            }
            _ => {
                pass = false;
                parts.push(format!("{file}: no load reported"));
            }
        }
    }
    let t = start.elapsed();
    pass &= t < Duration::from_secs(5);
    outcome(pass, format!("{}; {t:.2?}", parts.join(", ")))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let tiny = std::fs::read_to_string(configs().join("tiny.cfg")).unwrap();
    let vts = tiny.replace("mode = \"binary\"", "mode = \"vts\"\nmax_outer_iters = 60")
        + "\n[run.split]\ninterval = 20\n";
    let cases = [("binary.cfg", tiny), ("vts.cfg", vts)];
    let mut pass = true;
    let mut files = 0;
    for (name, text) in cases {
        let cfg = dir.path().join(name);
        std::fs::write(&cfg, text).unwrap();
        let mut bundles = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("{name}.{k}"));
            let o = rcto(&[
                "optimize".as_ref(),
                cfg.as_os_str(),
                "--out".as_ref(),
                out.as_os_str(),
            ]);
            pass &= o.status.success();
            let mut entries: Vec<_> = std::fs::read_dir(&out)
                .map(|d| d.map(|e| e.unwrap().path()).collect())
                .unwrap_or_default();
            entries.sort();
            bundles.push(
                entries
                    .iter()
                    .map(|p| (p.file_name().unwrap().to_owned(), std::fs::read(p).unwrap()))
                    .collect::<Vec<_>>(),
            );
        }
        pass &= !bundles[0].is_empty() && bundles[0] == bundles[1];
        files += bundles[0].len();
    }
    outcome(
        pass,
        format!("binary and vts runs, {files} files compared byte for byte"),
    )
}

fn guarded<T>(f: impl FnOnce() -> T) -> Result<T, String> {
    catch_unwind(AssertUnwindSafe(f)).map_err(|e| {
        e.downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| String::from("panicked"))
    })
}

fn settle(r: Result<Outcome, String>) -> Outcome {
    r.unwrap_or_else(|msg| outcome(false, format!("panicked: {msg}")))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "gradient correctness", settle(guarded(gradients))));
    results.push((2, "SSM exactness", settle(guarded(ssm))));
    results.push((3, "bimodulus fixed point", settle(guarded(bimodulus))));
    let (o4, mbb_run) = match guarded(mbb) {
        Ok((o, r)) => (o, r),
        Err(msg) => (outcome(false, format!("panicked: {msg}")), None),
    };
    results.push((4, "MMA against OC", o4));
    results.push((5, "thickness sigmoid", settle(guarded(sigmoid))));
    let beam_run = guarded(beam);
    results.push((
        6,
        "volume feasibility",
        settle(guarded(|| {
            feasibility(beam_run.as_ref().ok(), mbb_run.as_ref())
        })),
    ));
    results.push((7, "ACI baselines", settle(guarded(aci))));
    let o8 = match beam_run {
        Ok(b) => {
            let _ = b.elapsed;
            b.outcome
        }
        Err(msg) => outcome(false, format!("panicked: {msg}")),
    };
    results.push((8, "beam sign masks", o8));
    results.push((9, "determinism", settle(guarded(determinism))));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, name, o) in &results {
        println!(
            "criterion {n} {name}: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += !o.pass as usize;
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", results.len());
}
