//! Named moment data used by tests, benchmarks and the command line tool.

use num_traits::{One, Zero};

use crate::exactla::{rat, ratio, Rat};
use crate::moment::{build_moment_matrix, moments_from_atoms, MomentMatrix, MomentSequence, RationalAtomicMeasure};
use crate::monomials::{Monomial, Poly};

/// The rank-8 value of `β_06` for a given `β_15 = c` in [`catalan_family`].
pub fn catalan_rank8_corner(c: &Rat) -> Rat {
    rat(2026881) - rat(2844) * c + c * c
}

/// `M_3` with `β_ij = m_{i+3j}`, where odd `m_k` vanish and the even ones
/// are `1, 1, 2, 5, 14, 42, 132, 429, c, d`. Passing `None` for `d` uses
/// [`catalan_rank8_corner`].
pub fn catalan_family(c: Rat, d: Option<Rat>) -> MomentMatrix {
    let d = d.unwrap_or_else(|| catalan_rank8_corner(&c));
    let mut even: Vec<Rat> = [1, 1, 2, 5, 14, 42, 132, 429].iter().map(|&v| rat(v)).collect();
    even.push(c);
    even.push(d);
    let beta = MomentSequence::from_fn(6, |i, j| {
        let k = (i + 3 * j) as usize;
        if k % 2 == 1 {
            Rat::zero()
        } else {
            even[k / 2].clone()
        }
    })
    .expect("even degree");
    build_moment_matrix(&beta, 3).expect("degree 3")
}

/// `q` with `Y^3 = q(X, Y)` in [`catalan_family`] at rank 8.
pub fn catalan_q(c: &Rat) -> Poly {
    Poly::from_terms([
        (Monomial::new(1, 0), rat(5715) - rat(4) * c),
        (Monomial::new(0, 1), rat(10) * (c - rat(1428))),
        (Monomial::new(2, 1), rat(-3) * (rat(2) * c - rat(2853))),
        (Monomial::new(1, 2), c - rat(1422)),
    ])
}

/// `β_06` of [`extra_relation_example`] as a function of `β_15 = r`: the
/// value making `Y^3` dependent, `⟨q(X, Y), Y^3⟩`.
pub fn extra_relation_corner(r: &Rat) -> Rat {
    (rat(443272376768) - rat(2742712830) * r + rat(4826809) * r * r) / rat(41327767)
}

/// A positive, recursively generated `M_3` of rank 7 with the pure
/// relations `X^3 = p`, `Y^3 = q` and the extra relation `X^2Y = t`.
pub fn extra_relation_example(r: Rat) -> MomentMatrix {
    let gamma = extra_relation_corner(&r);
    let t = |v: i64| rat(v);
    let thirteenth = |v: i64| ratio(v, 13);
    let triples = vec![
        (0, 0, t(1)),
        (2, 0, t(1)),
        (0, 2, t(1)),
        (1, 0, t(0)),
        (0, 1, t(0)),
        (1, 1, t(0)),
        (3, 0, t(0)),
        (2, 1, t(0)),
        (0, 3, t(0)),
        (1, 2, t(2)),
        (4, 0, t(2)),
        (3, 1, t(0)),
        (1, 3, t(0)),
        (2, 2, t(5)),
        (0, 4, t(22)),
        (5, 0, t(-1)),
        (4, 1, t(-2)),
        (3, 2, t(13)),
        (2, 3, t(3)),
        (1, 4, thirteenth(894)),
        (0, 5, thirteenth(336)),
        (6, 0, t(178)),
        (5, 1, t(139)),
        (4, 2, t(159)),
        (3, 3, thirteenth(1657)),
        (2, 4, thirteenth(4298)),
        (1, 5, r),
        (0, 6, gamma),
    ];
    let beta = MomentSequence::from_triples(6, triples).expect("complete data");
    build_moment_matrix(&beta, 3).expect("degree 3")
}

/// The three relations of [`extra_relation_example`]:
/// `(p, t, q)` with `X^3 = p`, `X^2Y = t`, `Y^3 = q`.
pub fn extra_relation_polys(r: &Rat) -> (Poly, Poly, Poly) {
    let m = Monomial::new;
    let p = Poly::from_terms([
        (m(0, 0), rat(40)),
        (m(1, 0), rat(-24)),
        (m(0, 1), rat(4)),
        (m(2, 0), rat(-53)),
        (m(1, 1), rat(-2)),
        (m(0, 2), rat(13)),
    ]);
    let t = Poly::from_terms([
        (m(0, 0), rat(35)),
        (m(1, 0), rat(-22)),
        (m(0, 1), rat(-1)),
        (m(2, 0), rat(-46)),
        (m(1, 1), rat(3)),
        (m(0, 2), rat(11)),
    ]);
    let q = Poly::from_terms([
        (m(0, 0), rat(3) * (rat(487658) - rat(1651) * r) / rat(1447)),
        (m(1, 0), rat(3) * (rat(-342075) + rat(1157) * r) / rat(1447)),
        (m(0, 1), rat(2) * (rat(-2131598) + rat(6591) * r) / rat(18811)),
        (m(2, 0), (rat(-2000094) + rat(6773) * r) / rat(1447)),
        (m(1, 1), (rat(2338519) - rat(6591) * r) / rat(18811)),
        (m(0, 2), rat(2) * (rat(316575) - rat(1079) * r) / rat(1447)),
        (m(1, 2), (rat(-48015) + rat(169) * r) / rat(1447)),
    ]);
    (p, t, q)
}

/// Parameters of [`second_stage_family`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecondStageParams {
    pub a: Rat,
    pub b: Rat,
    pub g: Rat,
    pub h: Rat,
}

impl SecondStageParams {
    pub fn new(a: Rat, b: Rat, g: Rat, h: Rat) -> Self {
        SecondStageParams { a, b, g, h }
    }

    /// `b = g = 1/4`, `h = 0`.
    pub fn quarter(a: Rat) -> Self {
        SecondStageParams::new(a, ratio(1, 4), ratio(1, 4), Rat::zero())
    }

    /// Positivity test for `M_5`.
    pub fn bg_test(&self) -> Rat {
        let (b2, g2) = (&self.b * &self.b, &self.g * &self.g);
        let (b4, g4) = (&b2 * &b2, &g2 * &g2);
        Rat::one() - rat(2) * &b2 - rat(2) * &g2 + rat(3) * &b2 * &g2 + &b4 * &g2 + &b2 * &g4 - &b4 * &g4
    }

    /// The single possibly nonzero entry of the `M_6` Schur complement,
    /// at row and column `X^3Y^3`.
    pub fn delta6(&self) -> Rat {
        let SecondStageParams { a, b, g, h } = self;
        let (b2, g2) = (b * b, g * g);
        let (b3, g3) = (&b2 * b, &g2 * g);
        let (b4, g4) = (&b2 * &b2, &g2 * &g2);
        let left = Rat::one() - rat(3) * &b2 + &b4 - a * &b2 * g + a * &b4 * g + b * h - rat(2) * &b3 * h;
        let right = -Rat::one() - a * g + rat(3) * &g2 + rat(2) * a * &g3 - &g4 + b * &g2 * h - b * &g4 * h;
        left * right / -self.bg_test()
    }
}

/// The family `M_4(a, b, g, h)` whose unique recursively generated
/// extensions can fail positivity only at the second step.
pub fn second_stage_family(params: &SecondStageParams) -> MomentMatrix {
    let SecondStageParams { a, b, g, h } = params;
    let beta = MomentSequence::from_fn(8, |i, j| {
        let v = match (i, j) {
            (0, 0) | (2, 0) | (0, 2) | (2, 2) => rat(1),
            (4, 0) | (0, 4) | (4, 2) | (2, 4) => rat(2),
            (6, 0) | (0, 6) => rat(5),
            (7, 0) => a.clone(),
            (6, 1) => b.clone(),
            (1, 6) => g.clone(),
            (0, 7) => h.clone(),
            (8, 0) => rat(13) + a * a + b * b,
            (7, 1) => a * b,
            (6, 2) | (2, 6) => rat(5),
            (4, 4) => rat(4),
            (1, 7) => g * h,
            (0, 8) => rat(13) + g * g + h * h,
            _ => Rat::zero(),
        };
        v
    })
    .expect("even degree");
    build_moment_matrix(&beta, 4).expect("degree 4")
}

/// `(p, q)` with `X^4 = p`, `Y^4 = q` in [`second_stage_family`].
pub fn second_stage_polys(params: &SecondStageParams) -> (Poly, Poly) {
    let SecondStageParams { a, b, g, h } = params;
    let m = Monomial::new;
    let p = Poly::from_terms([
        (m(3, 0), a.clone()),
        (m(2, 1), b.clone()),
        (m(2, 0), rat(3)),
        (m(0, 1), -b.clone()),
        (m(1, 0), rat(-2) * a),
        (m(0, 0), rat(-1)),
    ]);
    let q = Poly::from_terms([
        (m(1, 2), g.clone()),
        (m(0, 3), h.clone()),
        (m(0, 2), rat(3)),
        (m(0, 1), rat(-2) * h),
        (m(1, 0), -g.clone()),
        (m(0, 0), rat(-1)),
    ]);
    (p, q)
}

/// Uniform measure on the grid `{0, …, k-1}²`.
pub fn grid_measure(k: u32) -> RationalAtomicMeasure {
    let nodes: Vec<Rat> = (0..k as i64).map(rat).collect();
    RationalAtomicMeasure::uniform_grid(&nodes, &nodes, ratio(1, (k * k) as i64)).expect("distinct nodes")
}

/// `M_d` of [`grid_measure`]`(d)`.
pub fn grid_matrix(d: u32) -> MomentMatrix {
    let beta = moments_from_atoms(&grid_measure(d), 2 * d).expect("atoms");
    build_moment_matrix(&beta, d).expect("degree d")
}
