use moment_extend::exactla::{psd_check, rat, ratio, schur_delta, Rat, SymMat};
use moment_extend::extend::{
    build_b, build_c, check_range, assemble, extend_step, run_chain, Band, ExtensionOutcome, Source, Verdict,
};
use moment_extend::fixtures::{
    catalan_family, catalan_q, extra_relation_example, extra_relation_polys, second_stage_family,
    second_stage_polys, SecondStageParams,
};
use moment_extend::measure::{extract_measure, variety_cardinality, verify_measure, DEFAULT_TOL};
use moment_extend::moment::build_moment_matrix;
use moment_extend::monomials::{monomials_of_degree, monomials_up_to, Monomial, Poly};
use moment_extend::relations::{detect_rd, is_recursively_generated, kernel_relations, Classification};
use moment_extend::MomentMatrix;

fn mono(i: u32, j: u32) -> Monomial {
    Monomial::new(i, j)
}

#[test]
fn catalan_relations_and_profile() {
    let m3 = catalan_family(rat(1430), None);
    assert_eq!(m3.rank(), 8);
    assert!(psd_check(m3.mat()).psd);
    assert!(is_recursively_generated(&m3).ok);
    let rels = kernel_relations(&m3);
    assert_eq!(rels.len(), 2);
    assert_eq!(rels[0].target, mono(3, 0));
    assert_eq!(rels[0].rhs, Poly::y());
    assert_eq!(rels[1].target, mono(0, 3));
    assert_eq!(rels[1].rhs, catalan_q(&rat(1430)));
    assert_eq!(rels[1].rhs.to_string(), "-5*x + 20*y - 21*x^2y + 8*xy^2");
    let prof = detect_rd(&m3).unwrap();
    assert_eq!((prof.n, prof.m), (3, 3));
    assert!(!prof.roles_swapped);
    assert_eq!(prof.classification, Classification::RdExtHypothesis);
}

#[test]
fn catalan_first_extension_cases() {
    // c = 1430: positive, rank 9, not flat.
    let out = extend_step(&catalan_family(rat(1430), None)).unwrap();
    match out {
        ExtensionOutcome::Extended { ref matrix, flat, rank } => {
            assert_eq!(rank, 9);
            assert!(!flat);
            assert_eq!(matrix.rank(), 9);
            // Imposed relations hold in M_4.
            let cols = |p: &Poly| matrix.eval_columns(p).iter().all(|v| *v == rat(0));
            let x4_minus_xy = Poly::monomial(mono(4, 0), rat(1)).sub(&Poly::monomial(mono(1, 1), rat(1)));
            assert!(cols(&x4_minus_xy));
            let x3y_minus_y2 = Poly::monomial(mono(3, 1), rat(1)).sub(&Poly::monomial(mono(0, 2), rat(1)));
            assert!(cols(&x3y_minus_y2));
        }
        other => panic!("{other:?}"),
    }
    // c = 1429: flat.
    match extend_step(&catalan_family(rat(1429), None)).unwrap() {
        ExtensionOutcome::Extended { flat, rank, .. } => {
            assert!(flat);
            assert_eq!(rank, 8);
        }
        other => panic!("{other:?}"),
    }
    // c = 1428: not positive.
    assert!(matches!(
        extend_step(&catalan_family(rat(1428), None)).unwrap(),
        ExtensionOutcome::NotPsd { .. }
    ));
}

#[test]
fn catalan_chain_and_measure() {
    let m3 = catalan_family(rat(1430), None);
    let report = run_chain(&m3).unwrap();
    assert_eq!(report.verdict, Verdict::MeasureExists { flat_degree: 5 });
    let ranks: Vec<_> = report.steps.iter().map(|s| (s.degree, s.rank)).collect();
    assert_eq!(ranks, vec![(4, Some(9)), (5, Some(9))]);
    assert_eq!(report.bounds.band_bound, 2);
    assert_eq!(report.bounds.variety_bound, Some(2));
    let prof = detect_rd(&m3).unwrap();
    assert_eq!(variety_cardinality(&prof, DEFAULT_TOL), Some(9));

    let flat = report.flat_matrix.unwrap();
    let mu = extract_measure(&flat, DEFAULT_TOL).unwrap();
    let s5 = 5f64.sqrt();
    let alpha = 0.5 * (5.0 - 2.0 * s5).sqrt();
    let gamma = s5 * alpha;
    // The outer pair is ±sqrt((5 + √5)/2) ≈ ±1.902: with ±0.449 in its
    // place the second moment would not equal 1.
    let outer = ((5.0 + s5) / 2.0).sqrt();
    let xs = [
        (0.0, 0.2),
        (0.5 * (-1.0 - s5), (-1.0 + s5) / (8.0 * s5)),
        (0.5 * (1.0 - s5), (1.0 + s5) / (8.0 * s5)),
        (0.5 * (s5 - 1.0), (1.0 + s5) / (8.0 * s5)),
        (0.5 * (1.0 + s5), (-1.0 + s5) / (8.0 * s5)),
        (-alpha - gamma, (5.0 + 3.0 * s5) / (40.0 * s5)),
        (outer, (-5.0 + 3.0 * s5) / (40.0 * s5)),
        (-outer, (-5.0 + 3.0 * s5) / (40.0 * s5)),
        (alpha + gamma, (5.0 + 3.0 * s5) / (40.0 * s5)),
    ];
    assert_eq!(mu.atoms.len(), 9);
    for (x, rho) in xs {
        let k = mu
            .atoms
            .iter()
            .position(|a| (a.0 - x).abs() < 1e-8)
            .unwrap_or_else(|| panic!("no atom near x = {x}: {:?}", mu.atoms));
        assert!((mu.atoms[k].1 - x.powi(3)).abs() < 1e-8);
        assert!((mu.weights[k] - rho).abs() < 1e-6, "{} vs {rho}", mu.weights[k]);
    }
    let verify = verify_measure(&mu, &flat, &prof, DEFAULT_TOL);
    assert!(verify.passed(), "{verify:?}");
    assert_eq!(verify.atom_count, 9);
}

#[test]
fn catalan_flat_case_gives_eight_atoms() {
    let m3 = catalan_family(rat(1429), None);
    let report = run_chain(&m3).unwrap();
    assert_eq!(report.verdict, Verdict::MeasureExists { flat_degree: 4 });
    let flat = report.flat_matrix.unwrap();
    let mu = extract_measure(&flat, DEFAULT_TOL).unwrap();
    assert_eq!(mu.atoms.len(), 8);
    let prof = detect_rd(&m3).unwrap();
    assert!(verify_measure(&mu, &flat, &prof, DEFAULT_TOL).passed());
}

#[test]
fn catalan_below_threshold_has_no_measure() {
    let report = run_chain(&catalan_family(rat(1428), None)).unwrap();
    match report.verdict {
        Verdict::NoMeasure { failed_degree, reason } => {
            assert_eq!(failed_degree, 4);
            assert!(matches!(reason, ExtensionOutcome::NotPsd { .. }));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn extra_relation_blocks_extension() {
    let r = rat(300);
    let m3 = extra_relation_example(r.clone());
    assert_eq!(m3.rank(), 7);
    let (p, t, q) = extra_relation_polys(&r);
    let rels = kernel_relations(&m3);
    let targets: Vec<_> = rels.iter().map(|r| r.target).collect();
    assert_eq!(targets, vec![mono(3, 0), mono(2, 1), mono(0, 3)]);
    assert_eq!(rels[0].rhs, p);
    assert_eq!(rels[1].rhs, t);
    assert_eq!(rels[2].rhs, q);
    assert!(psd_check(m3.mat()).psd);
    assert!(is_recursively_generated(&m3).ok);
    let prof = detect_rd(&m3).unwrap();
    assert_eq!(prof.classification, Classification::GeneralRd);

    let inc = build_b(&m3, &prof, &rels).unwrap_err();
    assert_eq!(inc.row, mono(1, 2));
    assert_eq!(inc.col, mono(3, 1));
    let expected = (rat(-49462) + rat(169) * &r) / rat(13);
    assert_eq!(inc.discrepancy(), expected);
    assert_eq!(expected, ratio(1238, 13));
    match (&inc.existing.source, &inc.proposed.source) {
        (Source::Rule { band: Band::Left, .. }, Source::Rule { band: Band::Relation, rule, .. }) => {
            assert_eq!(*rule, t.shift(mono(1, 0)));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        extend_step(&m3).unwrap(),
        ExtensionOutcome::BInconsistent(_)
    ));
}

fn quarter(a: Rat) -> SecondStageParams {
    SecondStageParams::quarter(a)
}

/// Compression of a symmetric matrix indexed by degree-`k` monomials.
fn compress(delta: &SymMat, k: u32, keep: &[Monomial]) -> Vec<Vec<Rat>> {
    let labels: Vec<_> = monomials_of_degree(k).collect();
    let idx: Vec<usize> = keep.iter().map(|m| labels.iter().position(|l| l == m).unwrap()).collect();
    idx.iter()
        .map(|&i| idx.iter().map(|&j| delta[(i, j)].clone()).collect())
        .collect()
}

fn blocks(m: &MomentMatrix) -> (SymMat, moment_extend::Mat, SymMat) {
    let d = m.degree();
    let low = monomials_up_to(d - 1).len();
    let n = m.dim();
    let all: Vec<usize> = (0..n).collect();
    let mm = m.mat().principal(&all[..low]);
    let b = m.mat().as_mat().select(&all[..low], &all[low..]);
    let c = m.mat().principal(&all[low..]);
    (mm, b, c)
}

#[test]
fn second_stage_input() {
    let params = quarter(rat(60));
    let m4 = second_stage_family(&params);
    assert_eq!(m4.rank(), 13);
    assert!(psd_check(m4.mat()).psd);
    let (p, q) = second_stage_polys(&params);
    let rels = kernel_relations(&m4);
    let prof = detect_rd(&m4).unwrap();
    assert_eq!((prof.n, prof.m), (4, 4));
    assert_eq!(prof.p, p);
    assert_eq!(prof.q, q);
    assert_eq!(rels.len(), 2);
    let (m3, b4, c4) = blocks(&m4);
    let delta = schur_delta(&m3, &b4, &c4).unwrap();
    let comp = compress(&delta, 4, &[mono(3, 1), mono(2, 2), mono(1, 3)]);
    let z = rat(0);
    assert_eq!(
        comp,
        vec![
            vec![ratio(15, 16), z.clone(), z.clone()],
            vec![z.clone(), rat(1), z.clone()],
            vec![z.clone(), z.clone(), ratio(15, 16)],
        ]
    );
}

#[test]
fn second_stage_m5() {
    let params = quarter(rat(60));
    let m4 = second_stage_family(&params);
    let prof = detect_rd(&m4).unwrap();
    let rels = kernel_relations(&m4);
    let b = build_b(&m4, &prof, &rels).unwrap();
    let w = check_range(&m4, &b).unwrap();
    let c = build_c(&m4, &b, &prof, &rels).unwrap();
    let cand = assemble(&m4, &b, &c, &w);
    assert!(cand.psd);
    assert_eq!(cand.rank_next, 15);
    assert!(cand.is_rg());
    let central = compress(&cand.delta, 5, &[mono(3, 2), mono(2, 3)]);
    assert_eq!(
        central,
        vec![vec![ratio(14, 15), ratio(1, 16)], vec![ratio(1, 16), ratio(14, 15)]]
    );
    // Every other entry of Δ(5) vanishes.
    let nonzero = (0..6)
        .flat_map(|i| (0..6).map(move |j| (i, j)))
        .filter(|&(i, j)| cand.delta[(i, j)] != rat(0))
        .count();
    assert_eq!(nonzero, 4);
    let det = &central[0][0] * &central[1][1] - &central[0][1] * &central[1][0];
    let bg = params.bg_test();
    assert_eq!(bg, ratio(49951, 65536));
    let one = rat(1);
    assert_eq!(det * (&one - &params.b * &params.b) * (&one - &params.g * &params.g), bg);
}

fn m5_of(params: &SecondStageParams) -> MomentMatrix {
    match extend_step(&second_stage_family(params)).unwrap() {
        ExtensionOutcome::Extended { matrix, .. } => matrix,
        other => panic!("{other:?}"),
    }
}

#[test]
fn second_stage_m6_schur_entry() {
    for a in [rat(60), rat(50), ratio(836, 15)] {
        let params = quarter(a.clone());
        let m5 = m5_of(&params);
        let prof = detect_rd(&m5).unwrap();
        let rels = kernel_relations(&m5);
        let b = build_b(&m5, &prof, &rels).unwrap();
        let w = check_range(&m5, &b).unwrap();
        let c = build_c(&m5, &b, &prof, &rels).unwrap();
        let cand = assemble(&m5, &b, &c, &w);
        let x3y3 = 3;
        for i in 0..7 {
            for j in 0..7 {
                if (i, j) != (x3y3, x3y3) {
                    assert_eq!(cand.delta[(i, j)], rat(0), "a = {a}, ({i},{j})");
                }
            }
        }
        assert_eq!(cand.delta[(x3y3, x3y3)], params.delta6(), "a = {a}");
        let eta = (rat(-836) + rat(15) * &a) * (rat(836) + rat(224) * &a) / rat(1048576);
        let sign = |v: &Rat| v.cmp(&rat(0));
        assert_eq!(sign(&cand.delta[(x3y3, x3y3)]), sign(&-eta));
    }
}

#[test]
fn second_stage_chains() {
    // a = 60: M_5 fine, M_6 fails positivity.
    let report = run_chain(&second_stage_family(&quarter(rat(60)))).unwrap();
    match &report.verdict {
        Verdict::NoMeasure { failed_degree, reason } => {
            assert_eq!(*failed_degree, 6);
            assert!(matches!(reason, ExtensionOutcome::NotPsd { .. }));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(report.steps[0].rank, Some(15));

    // a = 50: η < 0, M_6 rank 16, M_7 flat.
    let report = run_chain(&second_stage_family(&quarter(rat(50)))).unwrap();
    assert_eq!(report.verdict, Verdict::MeasureExists { flat_degree: 7 });
    let ranks: Vec<_> = report.steps.iter().map(|s| s.rank).collect();
    assert_eq!(ranks, vec![Some(15), Some(16), Some(16)]);

    // η = 0: M_6 is flat.
    let report = run_chain(&second_stage_family(&quarter(ratio(836, 15)))).unwrap();
    assert_eq!(report.verdict, Verdict::MeasureExists { flat_degree: 6 });
    let flat = report.flat_matrix.unwrap();
    let mu = extract_measure(&flat, DEFAULT_TOL).unwrap();
    assert_eq!(mu.atoms.len(), 15);
}

#[test]
fn degree_four_identity_data() {
    // Sanity: a flat matrix reports itself.
    let beta = moment_extend::moment::moments_from_atoms(
        &moment_extend::RationalAtomicMeasure::dirac(rat(1), rat(2)),
        4,
    )
    .unwrap();
    let m = build_moment_matrix(&beta, 2).unwrap();
    let report = run_chain(&m).unwrap();
    assert_eq!(report.verdict, Verdict::MeasureExists { flat_degree: 2 });
    assert!(report.steps.is_empty());
}
