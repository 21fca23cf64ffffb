//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines always appear in the test output.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use moment_extend::exactla::{
    determinant, kernel_basis, psd_check, rank, rat, ratio, schur_delta, schur_delta_with, solve_columns, Mat, Rat,
    SymMat,
};
use moment_extend::extend::{build_b, extend_step, run_chain, ExtensionOutcome, Verdict};
use moment_extend::fixtures::{
    catalan_family, catalan_rank8_corner, extra_relation_example, grid_matrix, second_stage_family, SecondStageParams,
};
use moment_extend::measure::{extract_measure, moment_residuals, DEFAULT_TOL};
use moment_extend::moment::{build_moment_matrix, moments_from_atoms};
use moment_extend::relations::{detect_rd, kernel_relations};
use moment_extend::{Classification, MomentMatrix, RationalAtomicMeasure};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn chain_verdict(m: &MomentMatrix) -> Verdict {
    run_chain(m).expect("preconditions hold").verdict
}

fn criterion_1() -> Check {
    let v = chain_verdict(&catalan_family(rat(1429), None));
    ensure(v == Verdict::MeasureExists { flat_degree: 4 }, || format!("c=1429: {v:?}"))?;

    let v = chain_verdict(&catalan_family(rat(1428), None));
    ensure(
        matches!(v, Verdict::NoMeasure { failed_degree: 4, reason: ExtensionOutcome::NotPsd { .. } }),
        || format!("c=1428: {}", v.name()),
    )?;

    let report = run_chain(&catalan_family(rat(1430), None)).expect("preconditions hold");
    ensure(report.verdict == Verdict::MeasureExists { flat_degree: 5 }, || {
        format!("c=1430: {:?}", report.verdict.name())
    })?;
    match &report.steps[0].outcome {
        ExtensionOutcome::Extended { matrix, flat: false, rank: 9 } => {
            ensure(psd_check(matrix.mat()).psd, || "c=1430: M_4 not PSD".into())?
        }
        other => return Err(format!("c=1430 M_4: {}", other.name())),
    }
    ensure(
        matches!(report.steps[1].outcome, ExtensionOutcome::Extended { flat: true, rank: 9, .. }),
        || "c=1430: M_5 not flat".into(),
    )?;
    Ok("c=1429 flat M_4; c=1428 no_measure{4} NotPsd; c=1430 M_4 PSD rank 9, M_5 flat".into())
}

fn criterion_2() -> Check {
    let mut notes = Vec::new();
    for c in [1429, 1430, 1500] {
        let c = rat(c);
        let corner = catalan_rank8_corner(&c);
        let m = catalan_family(c.clone(), Some(corner.clone()));
        ensure(m.rank() == 8, || format!("c={c}: rank {}", m.rank()))?;
        let off = catalan_family(c.clone(), Some(&corner + rat(1)));
        ensure(off.rank() == 9, || format!("c={c}, d+1: rank {}", off.rank()))?;
        notes.push(format!("c={c} d={corner}"));
    }
    ensure(catalan_rank8_corner(&rat(1430)) == rat(4861), || "corner at 1430".into())?;
    Ok(format!("rank 8 at {}; rank 9 with d+1", notes.join(", ")))
}

/// The nine atoms `(x, x^3)` from `M_5` at `c = 1430`.
fn catalan_measure() -> (Vec<(f64, f64)>, Vec<f64>, f64) {
    let m3 = catalan_family(rat(1430), None);
    let report = run_chain(&m3).expect("preconditions hold");
    let flat = report.flat_matrix.expect("flat");
    let mu = extract_measure(&flat, DEFAULT_TOL).expect("extraction");
    let scale = moment_extend::exactla::to_f64(&m3.moments().max_abs());
    let worst = moment_residuals(&mu.atoms, &mu.weights, m3.moments())
        .iter()
        .fold(0.0f64, |a, (_, r)| a.max(r.abs()));
    (mu.atoms, mu.weights, worst / scale)
}

/// Matches `expected` (x, density) pairs against the atoms.
fn match_atoms(atoms: &[(f64, f64)], weights: &[f64], expected: &[(f64, f64)]) -> Result<(), String> {
    ensure(atoms.len() == expected.len(), || format!("{} atoms", atoms.len()))?;
    for &(x, rho) in expected {
        let k = atoms
            .iter()
            .position(|a| (a.0 - x).abs() < 1e-6)
            .ok_or_else(|| format!("no atom with x = {x:.6}"))?;
        ensure((atoms[k].1 - x.powi(3)).abs() < 1e-6, || format!("atom at x = {x:.6} is not on y = x^3"))?;
        ensure((weights[k] - rho).abs() < 1e-4, || {
            format!("density at x = {x:.6} is {:.6}, expected {rho}", weights[k])
        })?;
    }
    Ok(())
}

/// Returns (literal check, corrected check).
fn criterion_3() -> (Check, Check) {
    let (atoms, weights, rel_residual) = catalan_measure();
    let s5 = 5f64.sqrt();
    let alpha = 0.5 * (5.0 - 2.0 * s5).sqrt();
    let gamma = s5 * alpha;
    let phi = 0.5 * (1.0 + s5);
    let common = [
        (0.0, 0.2),
        (-phi, 0.069),
        (phi, 0.069),
        (1.0 - phi, 0.181),
        (phi - 1.0, 0.181),
        (-alpha - gamma, 0.131),
        (alpha + gamma, 0.131),
    ];
    let residual_ok = rel_residual <= 1e-8;
    let with_pair = |x: f64| {
        let mut v = common.to_vec();
        v.extend([(-x, 0.019), (x, 0.019)]);
        v
    };
    let literal = match_atoms(&atoms, &weights, &with_pair(gamma - alpha))
        .and_then(|_| ensure(residual_ok, || format!("relative residual {rel_residual:e}")))
        .map(|_| "atoms and densities as listed".to_string());
    let outer = ((5.0 + s5) / 2.0).sqrt();
    let corrected = match_atoms(&atoms, &weights, &with_pair(outer))
        .and_then(|_| ensure(residual_ok, || format!("relative residual {rel_residual:e}")))
        .map(|_| {
            format!(
                "9 atoms on y = x^3 with x = 0, ±1.618034, ±0.618034, ±1.175571, ±{outer:.6}; densities within 1e-4; \
                 residual/max|beta| = {rel_residual:.1e}"
            )
        });
    let literal = literal.map_err(|e| {
        format!(
            "{e}: the listed pair ±{:.6} cannot be atoms (second moment would not be 1); see corrected line",
            gamma - alpha
        )
    });
    (literal, corrected)
}

fn criterion_4() -> Check {
    let r = rat(300);
    let m3 = extra_relation_example(r.clone());
    let prof = detect_rd(&m3).ok_or("r=300 not RD")?;
    let rels = kernel_relations(&m3);
    let inc = match build_b(&m3, &prof, &rels) {
        Err(inc) => inc,
        Ok(_) => return Err("r=300: B consistent".into()),
    };
    let expected = (rat(-49462) + rat(169) * &r) / rat(13);
    ensure(inc.discrepancy() == expected && expected == ratio(1238, 13), || {
        format!("discrepancy {}", inc.discrepancy())
    })?;

    let r0 = ratio(49462, 169);
    let m0 = extra_relation_example(r0.clone());
    let prof0 = detect_rd(&m0).ok_or("r=49462/169 not RD")?;
    let rels0 = kernel_relations(&m0);
    ensure(build_b(&m0, &prof0, &rels0).is_ok(), || "r=49462/169: B inconsistent".into())?;
    let follow = match extend_step(&m0) {
        Ok(ExtensionOutcome::Extended { flat, rank, .. }) => format!("extended (rank {rank}, flat {flat})"),
        Ok(o) => o.name().to_string(),
        Err(e) => format!("not applicable ({e})"),
    };
    let verdict = run_chain(&m0).map_or_else(|e| format!("not applicable ({e})"), |r| r.verdict.name().to_string());
    Ok(format!(
        "r=300 build_B fails at ({}, {}) with discrepancy {}; r=49462/169 B consistent, step: {follow}, chain: {verdict}",
        inc.row.to_string().to_uppercase(),
        inc.col.to_string().to_uppercase(),
        inc.discrepancy()
    ))
}

fn criterion_5() -> Check {
    let q = |a: Rat| SecondStageParams::quarter(a);
    let params = q(rat(60));
    let m4 = second_stage_family(&params);
    ensure(psd_check(m4.mat()).psd && m4.rank() == 13, || format!("M_4 rank {}", m4.rank()))?;
    ensure(params.bg_test() == ratio(49951, 65536), || format!("bgtest {}", params.bg_test()))?;
    let report = run_chain(&m4).map_err(|e| e.to_string())?;
    ensure(report.steps[0].rank == Some(15) && report.steps[0].outcome.is_extended(), || {
        "M_5 not PSD rank 15".into()
    })?;
    ensure(
        matches!(report.verdict, Verdict::NoMeasure { failed_degree: 6, reason: ExtensionOutcome::NotPsd { .. } }),
        || format!("a=60: {}", report.verdict.name()),
    )?;

    let report = run_chain(&second_stage_family(&q(rat(50)))).map_err(|e| e.to_string())?;
    ensure(report.verdict == Verdict::MeasureExists { flat_degree: 7 }, || {
        format!("a=50: {}", report.verdict.name())
    })?;
    ensure(report.steps[1].rank == Some(16), || "a=50: M_6 rank".into())?;

    let report = run_chain(&second_stage_family(&q(ratio(836, 15)))).map_err(|e| e.to_string())?;
    ensure(report.verdict == Verdict::MeasureExists { flat_degree: 6 }, || {
        format!("eta=0: {}", report.verdict.name())
    })?;
    Ok("a=60: M_4 rank 13, M_5 rank 15 (bgtest 49951/65536), no_measure{6} NotPsd; a=50: flat M_7; a=836/15: flat M_6".into())
}

fn criterion_6() -> Check {
    let mut notes = Vec::new();
    for d in [2u32, 3, 4] {
        let t = Instant::now();
        let m = grid_matrix(d);
        let report = run_chain(&m).map_err(|e| e.to_string())?;
        ensure(report.verdict == Verdict::MeasureExists { flat_degree: 2 * d - 1 }, || {
            format!("d={d}: {:?}", report.verdict.name())
        })?;
        ensure(report.steps.len() == (d - 1) as usize, || format!("d={d}: {} steps", report.steps.len()))?;
        ensure(report.profile.classification == Classification::RdExtHypothesis, || {
            format!("d={d}: M_{d} is {}", report.profile.classification)
        })?;
        let mut prev = report.rank;
        for (k, step) in (1u32..).zip(&report.steps) {
            let ExtensionOutcome::Extended { rank, flat, .. } = &step.outcome else {
                return Err(format!("d={d}: step {} {}", step.degree, step.outcome.name()));
            };
            ensure(*flat == (k == d - 1), || format!("d={d}: flat at M_{}", step.degree))?;
            ensure(step.source_classification == Classification::RdExtHypothesis, || {
                format!("d={d}: M_{} classified {}", step.degree - 1, step.source_classification)
            })?;
            ensure(*rank as i64 - prev as i64 == (d - k - 1) as i64, || {
                format!("d={d}: rank M_{} - rank M_{} = {}", step.degree, step.degree - 1, *rank as i64 - prev as i64)
            })?;
            prev = *rank;
        }
        notes.push(format!("d={d} flat M_{} ({:.2}s)", 2 * d - 1, t.elapsed().as_secs_f64()));
    }
    Ok(notes.join(", "))
}

fn small_rational(rng: &mut ChaCha8Rng, bound: i64) -> Rat {
    let den = rng.gen_range(1..=4i64);
    ratio(rng.gen_range(-bound * den..=bound * den), den)
}

fn positive_weight(rng: &mut ChaCha8Rng) -> Rat {
    ratio(rng.gen_range(1..=12), rng.gen_range(1..=6))
}

/// Random measure: general position or a subset of a random product grid.
fn random_measure(rng: &mut ChaCha8Rng, gridded: bool) -> RationalAtomicMeasure {
    let count = if gridded { rng.gen_range(5..=8usize) } else { rng.gen_range(1..=8usize) };
    let mut atoms: Vec<(Rat, Rat)> = Vec::new();
    if gridded {
        let nodes = |rng: &mut ChaCha8Rng| {
            let mut v: Vec<Rat> = Vec::new();
            while v.len() < 3 {
                let r = small_rational(rng, 3);
                if !v.contains(&r) {
                    v.push(r);
                }
            }
            v
        };
        let (xs, ys) = (nodes(rng), nodes(rng));
        let mut all: Vec<(Rat, Rat)> = xs.iter().flat_map(|x| ys.iter().map(move |y| (x.clone(), y.clone()))).collect();
        all.shuffle(rng);
        atoms = all.into_iter().take(count).collect();
    } else {
        while atoms.len() < count {
            let p = (small_rational(rng, 3), small_rational(rng, 3));
            if !atoms.contains(&p) {
                atoms.push(p);
            }
        }
    }
    let weights = atoms.iter().map(|_| positive_weight(rng)).collect();
    RationalAtomicMeasure::new(atoms, weights).expect("distinct atoms")
}

fn criterion_7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let (mut rd, mut flat, mut steps_checked) = (0, 0, 0);
    for case in 0..50 {
        let mu = random_measure(&mut rng, case % 2 == 1);
        let d = 3;
        let beta = moments_from_atoms(&mu, 2 * d).expect("moments");
        let m = build_moment_matrix(&beta, d).expect("matrix");
        let psd = psd_check(m.mat());
        ensure(psd.psd && m.rank() <= mu.len(), || {
            format!("case {case}: psd {} rank {} atoms {}", psd.psd, m.rank(), mu.len())
        })?;
        if detect_rd(&m).is_none() {
            continue;
        }
        rd += 1;
        let report = run_chain(&m).map_err(|e| format!("case {case}: {e}"))?;
        for step in &report.steps {
            if let ExtensionOutcome::Extended { matrix, .. } = &step.outcome {
                let oracle = moments_from_atoms(&mu, 2 * step.degree).expect("moments");
                let oracle = build_moment_matrix(&oracle, step.degree).expect("matrix");
                ensure(matrix == &oracle, || format!("case {case}: M_{} differs from the oracle", step.degree))?;
                steps_checked += 1;
            }
        }
        match &report.verdict {
            Verdict::MeasureExists { .. } => {}
            v => return Err(format!("case {case}: atomic input gave {}", v.name())),
        }
        flat += 1;
        let fm = report.flat_matrix.as_ref().expect("flat");
        let ext = extract_measure(fm, DEFAULT_TOL).map_err(|e| format!("case {case}: {e}"))?;
        let scale = moment_extend::exactla::to_f64(&beta.max_abs());
        let worst = moment_residuals(&ext.atoms, &ext.weights, &beta)
            .iter()
            .fold(0.0f64, |a, (_, r)| a.max(r.abs()));
        ensure(worst <= 1e-8 * scale, || format!("case {case}: residual {worst:e}"))?;
        ensure(ext.atoms.len() == fm.rank(), || {
            format!("case {case}: {} atoms, flat rank {}", ext.atoms.len(), fm.rank())
        })?;
    }
    Ok(format!(
        "50 measures PSD with rank <= atoms; {rd} RD, {flat} reached flat and reproduced all moments; {steps_checked} extension steps equal the oracle"
    ))
}

fn random_symmetric(rng: &mut ChaCha8Rng) -> SymMat {
    let n = rng.gen_range(1..=6usize);
    let k = rng.gen_range(0..=n);
    let a = Mat::from_fn(k, n, |_, _| rat(rng.gen_range(-3..=3)));
    let mut g = a.transpose().mul(&a);
    match rng.gen_range(0..3) {
        0 => {}
        1 => {
            let i = rng.gen_range(0..n);
            g[(i, i)] = &g[(i, i)] - ratio(1, rng.gen_range(1..=8));
        }
        _ => {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let e = ratio(rng.gen_range(-2..=2), rng.gen_range(1..=5));
            g[(i, j)] = &g[(i, j)] + &e;
            if i != j {
                g[(j, i)] = &g[(j, i)] + &e;
            }
        }
    }
    SymMat::new(g).expect("symmetric")
}

fn all_minors_nonnegative(a: &SymMat) -> bool {
    let n = a.dim();
    (1u32..1 << n).all(|mask| {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        determinant(a.principal(&idx).as_mat()) >= rat(0)
    })
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut psd_count = 0;
    for case in 0..200 {
        let a = random_symmetric(&mut rng);
        let rep = psd_check(&a);
        let brute = all_minors_nonnegative(&a);
        ensure(rep.psd == brute, || format!("case {case}: psd_check {} vs minors {brute}", rep.psd))?;
        if rep.psd {
            psd_count += 1;
            ensure(rep.rank == rank(a.as_mat()), || format!("case {case}: rank"))?;
        } else {
            let cert = rep.certificate.as_ref().ok_or("missing certificate")?;
            let det = determinant(a.principal(cert.minor()).as_mat());
            ensure(det < rat(0), || format!("case {case}: certificate minor has determinant {det}"))?;
        }
    }
    for case in 0..50 {
        let n = rng.gen_range(3..=6usize);
        let k = rng.gen_range(1..n);
        let a = Mat::from_fn(k, n, |_, _| rat(rng.gen_range(-3..=3)));
        let m = SymMat::new(a.transpose().mul(&a)).expect("symmetric");
        let cols = rng.gen_range(1..=3usize);
        let v = Mat::from_fn(n, cols, |_, _| small_rational(&mut rng, 2));
        let b = m.as_mat().mul(&v);
        let c = SymMat::new(Mat::from_fn(cols, cols, |_, _| rat(0))).expect("symmetric");
        let delta = schur_delta(&m, &b, &c).map_err(|e| e.to_string())?;

        let w = solve_columns(m.as_mat(), &b).map_err(|e| e.to_string())?;
        let mut w2 = w.clone();
        for kv in kernel_basis(m.as_mat()) {
            let coef: Vec<Rat> = (0..cols).map(|_| small_rational(&mut rng, 2)).collect();
            for i in 0..n {
                for (j, cj) in coef.iter().enumerate() {
                    w2[(i, j)] = &w2[(i, j)] + &kv[i] * cj;
                }
            }
        }
        let delta2 = schur_delta_with(&b, &c, &w2).map_err(|e| e.to_string())?;
        ensure(delta == delta2, || format!("case {case}: Δ depends on the kernel component of W"))?;

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let all: Vec<usize> = (0..cols).collect();
        let delta3 = schur_delta(&m.permuted(&perm), &b.select(&perm, &all), &c).map_err(|e| e.to_string())?;
        ensure(delta == delta3, || format!("case {case}: Δ depends on the pivot order"))?;
    }
    Ok(format!("psd_check agrees with all principal minors on 200 matrices ({psd_count} PSD); Δ invariant on 50 instances"))
}

fn criterion_9() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let q = |a: Rat| second_stage_family(&SecondStageParams::quarter(a));
    let fixtures: Vec<(String, MomentMatrix)> = vec![
        ("catalan-1428".into(), catalan_family(rat(1428), None)),
        ("catalan-1429".into(), catalan_family(rat(1429), None)),
        ("catalan-1430".into(), catalan_family(rat(1430), None)),
        ("catalan-1500-offcorner".into(), catalan_family(rat(1500), Some(catalan_rank8_corner(&rat(1500)) + rat(1)))),
        ("extra-300".into(), extra_relation_example(rat(300))),
        ("extra-49462-169".into(), extra_relation_example(ratio(49462, 169))),
        ("second-60".into(), q(rat(60))),
        ("second-50".into(), q(rat(50))),
        ("second-eta0".into(), q(ratio(836, 15))),
        ("grid-2".into(), grid_matrix(2)),
        ("grid-3".into(), grid_matrix(3)),
        ("grid-4".into(), grid_matrix(4)),
    ];
    let paths: Vec<(String, PathBuf)> = fixtures
        .iter()
        .map(|(name, m)| (name.clone(), common::write_matrix(dir.path(), name, m)))
        .collect();
    let mut runs = 0;
    for (name, path) in &paths {
        for cmd in ["analyze", "chain", "solve"] {
            for format in ["json", "text"] {
                let go = || common::run(&["--deterministic", "--format", format, cmd, path.to_str().unwrap()]);
                let (a, b) = (go(), go());
                ensure(a.status.code() == b.status.code() && a.stdout == b.stdout, || {
                    format!("{name} {cmd} {format}: outputs differ")
                })?;
                ensure(!a.stdout.is_empty(), || format!("{name} {cmd}: empty report"))?;
                runs += 1;
            }
        }
    }
    Ok(format!("{} fixtures x {} command/format pairs: identical bytes", paths.len(), runs / paths.len()))
}

fn guarded(f: impl FnOnce() -> Check) -> Check {
    let t = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = t.elapsed().as_secs_f64();
    res.map(|s| format!("{s} [{secs:.1}s]")).map_err(|s| format!("{s} [{secs:.1}s]"))
}

fn main() {
    let mut failures = 0;
    let mut report = |id: &str, title: &str, res: &Check, counts: bool| {
        let (status, detail) = match res {
            Ok(s) => ("PASS", s),
            Err(s) => ("FAIL", s),
        };
        println!("criterion {id} [{title}]: {status}: {detail}");
        if counts && res.is_err() {
            failures += 1;
        }
    };
    let t = Instant::now();
    report("1", "Catalan trichotomy", &guarded(criterion_1), true);
    report("2", "Catalan rank condition", &guarded(criterion_2), true);
    let (literal, corrected) = catch_unwind(criterion_3).unwrap_or_else(|_| {
        let e = Err("panicked".to_string());
        (e.clone(), e)
    });
    // The listed ±0.449 pair is not a support point of this measure; the
    // line reports the failure without failing the target.
    report("3", "Catalan measure, listed support", &literal, false);
    report("3", "Catalan measure, corrected support", &corrected, true);
    report("4", "inconsistency certificate", &guarded(criterion_4), true);
    report("5", "second-stage failure", &guarded(criterion_5), true);
    report("6", "grid maximal chain", &guarded(criterion_6), true);
    report("7", "oracle equivalence", &guarded(criterion_7), true);
    report("8", "exact linear algebra", &guarded(criterion_8), true);
    report("9", "determinism", &guarded(criterion_9), true);
    println!("acceptance: {failures} failing criteria ({:.1}s)", t.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
