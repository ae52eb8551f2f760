//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use subalg::algebra::{
    add_y, additive_inverse, additive_zero, duality_y, duality_z, identity_superfunction, merge_phases_y,
    multiply_superfunctions, reference_transform, substitute_into_y, substitute_into_z,
};
use subalg::atoms::z2_collection;
use subalg::hexmap::{hex_coords, pole_trajectory, Grid};
use subalg::numcore::{inverse, rank};
use subalg::random::{self, generic_split, orthogonal_z_collection, rng, superfunction, y_collection, z_collection};
use subalg::ratfunc::{
    build_1var, coefficient_count, extract_pq, nonuniqueness_collection, nonuniqueness_demo, pencil_determinant,
    random_rational, realize_scalar_seeded, recover_1var, square_identity_product,
};
use subalg::reduction::{continued_fraction, normalize_y, prune_z, recursion_z, reduce_z, w_from_differences, CollectionDims};
use subalg::solvers::{annulus_point, eval_f, eval_y, eval_z, solve_y, solve_z};
use subalg::{c64, re, CFStop, ComplexMatrix, Method, MultiPoly, OneVarParams, Parity, PortMaps, ScalingVector, Subspace, Tolerance, ZCollection, C64};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn tol() -> Tolerance {
    Tolerance::default()
}

/// `max |a − b| / (1 + max |b|)`.
fn rel(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.max_abs_diff(b) / (1.0 + b.max_abs())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(what: &str, value: f64, bound: f64) -> Result<(), String> {
    ensure(value < bound, || format!("{what} = {value:.3e} exceeds {bound:.0e}"))
}

fn in_time(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))
}

fn err<E: std::fmt::Display>(ctx: &str) -> impl Fn(E) -> String + '_ {
    move |e| format!("{ctx}: {e}")
}

fn random_dims<R: Rng>(g: &mut R, n_max: usize, d_max: usize) -> Vec<usize> {
    let n = g.random_range(1..=n_max);
    (0..n).map(|_| g.random_range(1..=d_max)).collect()
}

/// Random valid Z collection with `1 ≤ m < h` and `m + q1 ≤ h`.
fn random_z<R: Rng>(g: &mut R) -> ZCollection {
    loop {
        let dims = random_dims(g, 4, 3);
        let h: usize = dims.iter().sum();
        if h < 2 {
            continue;
        }
        let m = g.random_range(1..h.min(4));
        let e = g.random_range(0..=h - m);
        return z_collection(g, m, e, &dims);
    }
}

fn normalization_identity() -> Outcome {
    let start = Instant::now();
    let mut g = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let c = random_z(&mut g);
        let ones = vec![re(1.0); c.n()];
        let v = solve_z(&c, &ones, Method::Direct).map_err(err("solve_z"))?.value;
        let d = (&v - &ComplexMatrix::identity(c.m())).frobenius_norm();
        worst = worst.max(d);
    }
    within("max ‖Z(1) − I‖", worst, 1e-9)?;
    in_time(start, Duration::from_secs(5))?;
    Ok(format!("200 collections, max ‖Z(1) − I‖ = {worst:.2e}, {:.2?}", start.elapsed()))
}

fn golden_scalars() -> Outcome {
    let t = tol();
    let mut g = rng(102);
    let square = z2_collection([re(-1.0), re(1.0), re(1.0)], [re(1.0); 3], &t).map_err(err("square"))?;
    let c = c64(0.35, -0.2);
    let avg = z2_collection([re(1.0) - c, re(0.0), c], [re(1.0); 3], &t).map_err(err("average"))?;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let z = annulus_point(&mut g, 2);
        let a = eval_z(&square, &z).map_err(err("square"))?[(0, 0)];
        worst = worst.max((a - z[0] * z[0] / z[1]).norm());
        let b = eval_z(&avg, &z).map_err(err("average"))?[(0, 0)];
        worst = worst.max((b - (c * z[0] + (re(1.0) - c) * z[1])).norm());
    }
    within("residual", worst, 1e-9)?;
    Ok(format!("z1²/z2 and c·z1 + (1−c)·z2 at 20 points each, max residual {worst:.2e}"))
}

fn formula_agreement() -> Outcome {
    let mut g = rng(103);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = random_z(&mut g);
        let z = annulus_point(&mut g, c.n());
        let d = solve_z(&c, &z, Method::Direct).map_err(err("direct Z"))?.value;
        let s = solve_z(&c, &z, Method::Shifted(re(1.0))).map_err(err("shifted Z"))?.value;
        worst = worst.max(rel(&d, &s));
    }
    let mut count = 0;
    while count < 100 {
        let dims = random_dims(&mut g, 4, 3);
        let m = g.random_range(1..=3);
        let k = m + dims.iter().sum::<usize>();
        if k < 2 * m {
            continue;
        }
        let e = g.random_range(m..=k - m);
        let c = y_collection(&mut g, m, e, &dims);
        let z = annulus_point(&mut g, dims.len());
        let d = solve_y(&c, &z, Method::Direct).map_err(err("direct Y"))?.value;
        let s = solve_y(&c, &z, Method::Shifted(re(1.0))).map_err(err("shifted Y"))?.value;
        worst = worst.max(rel(&d, &s));
        count += 1;
    }
    within("direct vs shifted", worst, 1e-8)?;
    Ok(format!("100 Z and 100 Y collections, max difference {worst:.2e}"))
}

fn realization_compiler() -> Outcome {
    let start = Instant::now();
    let mut g = rng(104);
    let mut worst = 0.0f64;
    for k in 0..50 {
        let n = g.random_range(1..=3);
        let degree = g.random_range(1..=4);
        let r = random_rational(&mut g, n, degree, 0.6);
        let cert = realize_scalar_seeded(&r, k).map_err(|e| format!("{}: {e}", r.render()))?;
        worst = worst.max(cert.max_residual());
    }
    within("certificate residual", worst, 1e-7)?;
    let product = square_identity_product(&tol()).map_err(err("product"))?;
    let mut exact = 0.0f64;
    for a in -3..=3 {
        for b in -3..=3 {
            let z = [re(a as f64), re(b as f64), re(1.0)];
            let v = eval_z(&product, &z).map_err(err("product"))?[(0, 0)];
            exact = exact.max((v - re((a * b) as f64)).norm());
        }
    }
    within("z1·z2 composition", exact, 1e-9)?;
    in_time(start, Duration::from_secs(60))?;
    Ok(format!(
        "50 certificates, max residual {worst:.2e}; z1·z2 at 49 integer points, max error {exact:.2e}; {:.2?}",
        start.elapsed()
    ))
}

fn algebra_laws() -> Outcome {
    let t = tol();
    let mut g = rng(105);
    let mut worst = [0.0f64; 5];
    for _ in 0..20 {
        let s1 = superfunction(&mut g, 1, 2, &[2]);
        let s2 = superfunction(&mut g, 1, 3, &[1, 2]);
        let ports = PortMaps::new(random::matrix(&mut g, 1, 1), random::matrix(&mut g, 1, 1), &t).map_err(err("ports"))?;
        let p = multiply_superfunctions(&s1, &s2, &ports).map_err(err("product"))?;
        let mm = ComplexMatrix::block_diag(&[&ports.m_e, &ports.m_j]);

        let y1 = y_collection(&mut g, 2, 3, &[2, 2]);
        let y2 = y_collection(&mut g, 2, 2, &[1, 3]);
        let id = ComplexMatrix::identity(2);
        let sum = add_y(&y1, &y2, &id, &id).map_err(err("sum"))?;

        let plug = z_collection(&mut g, 1, 2, &[2, 2]);
        let host = z_collection(&mut g, 2, 2, &[2, 3]);
        let sub = substitute_into_z(&host, &plug, 0).map_err(err("substitution"))?;
        let yhost = y_collection(&mut g, 2, 3, &[2, 2]);
        let ysub = substitute_into_y(&yhost, &plug, 1).map_err(err("substitution"))?;

        let dual = duality_z(&host).map_err(err("duality"))?;
        let ydual = duality_y(&y1).map_err(err("duality"))?;

        let d: Vec<C64> = (0..2).map(|_| c64(g.random_range(0.5..2.0), g.random_range(-0.5..0.5))).collect();
        let scaled = reference_transform(&y1, &ScalingVector::ratios(&d).map_err(err("scaling"))?).map_err(err("scaling"))?;

        for _ in 0..20 {
            let z = annulus_point(&mut g, 3);
            let f = eval_f(&p, &z).map_err(err("product"))?;
            let expect = &eval_f(&s1, &z[..1]).map_err(err("product"))? * &(&mm * &eval_f(&s2, &z[1..]).map_err(err("product"))?);
            worst[0] = worst[0].max(rel(&f, &expect));

            let z4 = annulus_point(&mut g, 4);
            let expect = &eval_y(&y1, &z4[..2]).map_err(err("sum"))? + &eval_y(&y2, &z4[2..]).map_err(err("sum"))?;
            worst[1] = worst[1].max(rel(&eval_y(&sum, &z4).map_err(err("sum"))?, &expect));

            let w = eval_z(&plug, &z[..2]).map_err(err("substitution"))?[(0, 0)];
            let expect = eval_z(&host, &[w, z[2]]).map_err(err("substitution"))?;
            worst[2] = worst[2].max(rel(&eval_z(&sub, &z).map_err(err("substitution"))?, &expect));
            let expect = eval_y(&yhost, &[z[2], w]).map_err(err("substitution"))?;
            worst[2] = worst[2].max(rel(&eval_y(&ysub, &z).map_err(err("substitution"))?, &expect));

            let z2 = &z[..2];
            let zi: Vec<C64> = z2.iter().map(|x| x.inv()).collect();
            let expect = inverse(&eval_z(&host, &zi).map_err(err("duality"))?, &t).map_err(err("duality"))?;
            worst[3] = worst[3].max(rel(&eval_z(&dual, z2).map_err(err("duality"))?, &expect));
            let expect = inverse(&eval_y(&y1, &zi).map_err(err("duality"))?, &t).map_err(err("duality"))?;
            worst[3] = worst[3].max(rel(&eval_y(&ydual, z2).map_err(err("duality"))?, &expect));

            let dz: Vec<C64> = z2.iter().zip(&d).map(|(a, b)| a * b).collect();
            let expect = eval_y(&y1, &dz).map_err(err("scaling"))?;
            worst[4] = worst[4].max(rel(&eval_y(&scaled, z2).map_err(err("scaling"))?, &expect));
        }
    }
    for (name, w) in ["product", "sum", "substitution", "duality", "reference scaling"].iter().zip(worst) {
        within(name, w, 1e-8)?;
    }
    Ok(format!(
        "20 operand sets × 20 points: product {:.1e}, sum {:.1e}, substitution {:.1e}, duality {:.1e}, scaling {:.1e}",
        worst[0], worst[1], worst[2], worst[3], worst[4]
    ))
}

fn identity_elements() -> Outcome {
    let t = tol();
    let mut g = rng(106);
    let (mut one, mut zero, mut inv) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let s = superfunction(&mut g, 2, 4, &[3, 3]);
        let ports = PortMaps::natural(2);
        let id = identity_superfunction(&ports, &t).map_err(err("identity"))?;
        let p = multiply_superfunctions(&s, &id, &ports).map_err(err("identity"))?;

        let y = y_collection(&mut g, 2, 3, &[2, 2]);
        let ident = ComplexMatrix::identity(2);
        let with_zero = add_y(&y, &additive_zero(2, 1, &t), &ident, &ident).map_err(err("zero"))?;
        let neg = additive_inverse(&y).map_err(err("inverse"))?;
        let diff = add_y(&y, &neg, &ident, &ident).map_err(err("inverse"))?;
        let diff = merge_phases_y(&merge_phases_y(&diff, 1, 3).map_err(err("merge"))?, 0, 2).map_err(err("merge"))?;

        for _ in 0..10 {
            let z = annulus_point(&mut g, 3);
            let f = eval_f(&s, &z[..2]).map_err(err("identity"))?;
            one = one.max(rel(&eval_f(&p, &z[..2]).map_err(err("identity"))?, &f));
            let v = eval_y(&y, &z[..2]).map_err(err("zero"))?;
            zero = zero.max(rel(&eval_y(&with_zero, &z).map_err(err("zero"))?, &v));
            inv = inv.max(eval_y(&diff, &z[..2]).map_err(err("inverse"))?.max_abs());
        }
    }
    within("identity product", one, 1e-9)?;
    within("zero sum", zero, 1e-9)?;
    within("Y + (−Y)", inv, 1e-8)?;
    Ok(format!("identity {one:.1e}, zero {zero:.1e}, max |Y + (−Y)| {inv:.1e}"))
}

/// Adds a block `D` with `D = E_D ⊕ J_D = P_1,D ⊕ …` that no operator couples to `U`.
fn pad<R: Rng>(g: &mut R, c: &ZCollection, e_pad: usize, phase_pad: &[usize]) -> ZCollection {
    let t = tol();
    let h = c.h();
    let d: usize = phase_pad.iter().sum();
    let total = h + d;
    let lift = |x: &ComplexMatrix, off: usize| {
        let mut out = ComplexMatrix::zeros(total, x.cols());
        out.set_block(off, 0, x);
        out
    };
    let ej = generic_split(g, d, &[e_pad, d - e_pad], &t);
    let ps = generic_split(g, d, phase_pad, &t);
    let join = |a: &Subspace, b: &ComplexMatrix| Subspace::span(&ComplexMatrix::hstack(total, &[&lift(a.ortho(), 0), &lift(b, h)]), &t);
    ZCollection::new(
        lift(c.u_frame(), 0),
        join(c.e(), &ej[0]),
        join(c.j(), &ej[1]),
        c.phases().iter().zip(&ps).map(|(p, q)| join(p, q)).collect(),
        &t,
    )
    .expect("padded collection")
}

fn pruning() -> Outcome {
    let t = tol();
    let mut g = rng(107);
    let mut worst = 0.0f64;
    let mut removed = 0;
    for _ in 0..100 {
        let c = random_z(&mut g);
        let phase_pad: Vec<usize> = (0..c.n()).map(|_| g.random_range(1..=2)).collect();
        let d: usize = phase_pad.iter().sum();
        let e_pad = g.random_range(0..=d);
        let padded = pad(&mut g, &c, e_pad, &phase_pad);
        let (p, report) = prune_z(&padded, &t).map_err(err("prune"))?;
        let v = report.after.z_violations();
        ensure(v.is_empty(), || format!("violations after pruning: {v:?}"))?;
        let again = CollectionDims::of_z(&p);
        ensure(again == report.after, || "report does not match the pruned collection".into())?;
        removed += report.before.ambient - report.after.ambient;
        for _ in 0..5 {
            let z = annulus_point(&mut g, c.n());
            let a = eval_z(&p, &z).map_err(err("pruned"))?;
            let b = eval_z(&padded, &z).map_err(err("padded"))?;
            worst = worst.max(rel(&a, &b));
        }
    }
    within("function change", worst, 1e-8)?;
    Ok(format!("100 padded collections, {removed} dimensions removed, max change {worst:.2e}"))
}

fn extraction() -> Outcome {
    let t = tol();
    let mut g = rng(108);
    let mut sums = 0.0f64;
    let mut values = 0.0f64;
    for k in 0..10 {
        let dims = [[2, 2, 2], [1, 2, 2], [2, 3, 2]][k % 3];
        let c = z_collection(&mut g, 1, 2 + k % 2, &dims);
        let c = prune_z(&c, &t).map_err(err("prune"))?.0;
        let r = extract_pq(&c).map_err(err("extract"))?;
        let q1 = c.e().dim() as u32;
        ensure(r.p().degree() == Some(1 + q1) && r.q().degree() == Some(q1), || {
            format!("degrees {:?}/{:?} for q1 = {q1}", r.p().degree(), r.q().degree())
        })?;
        sums = sums.max((r.p().coefficient_sum() - re(1.0)).norm()).max((r.q().coefficient_sum() - re(1.0)).norm());
        for _ in 0..10 {
            let z = annulus_point(&mut g, 3);
            let want = eval_z(&c, &z).map_err(err("solve"))?[(0, 0)];
            values = values.max((r.eval(&z).map_err(err("eval"))? - want).norm() / (1.0 + want.norm()));
        }
    }
    within("coefficient sums", sums, 1e-9)?;
    within("p/q against the solver", values, 1e-7)?;

    let m1 = ComplexMatrix::from_real_rows(&[&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], &[0.0, 1.0, 1.0]]);
    let m2 = &ComplexMatrix::identity(3) - &m1;
    let det = pencil_determinant(&[m1.clone(), m2]);
    let want = MultiPoly::from_terms(2, [(vec![1, 2], re(2.0)), (vec![0, 3], re(-1.0))]);
    let caveat = det.sub(&want).max_abs_coefficient();
    within("det − z2²(2z1 − z2)", caveat, 1e-12)?;
    ensure(det.degree_in(0) == 1, || format!("max z1 power {}", det.degree_in(0)))?;
    let r = rank(&m1, &t);
    ensure(r == 2, || format!("rank M1 = {r}"))?;
    Ok(format!(
        "10 collections, degrees (1+q1, q1), sums within {sums:.1e}; det = z2²(2z1 − z2) within {caveat:.0e}, z1 power 1, rank M1 = 2"
    ))
}

fn one_variable_recovery() -> Outcome {
    let t = tol();
    let mut g = rng(109);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for parity in [Parity::Even, Parity::Odd] {
        for d in 1..=5usize {
            if parity == Parity::Odd && d == 1 {
                continue;
            }
            let gammas = (1..d).map(|_| random::complex(&mut g)).collect();
            let nd = if parity == Parity::Even { d } else { d - 1 };
            let deltas = (0..nd).map(|_| random::complex(&mut g)).collect();
            let params = OneVarParams::new(parity, gammas, deltas).map_err(err("params"))?;
            let c = build_1var(&params, &t).map_err(err("build"))?;
            let r = extract_pq(&c).map_err(err("extract"))?;
            let back = recover_1var(&r, params.h()).map_err(err("recover"))?;
            worst = worst.max(back.max_difference(&params));
            cases += 1;
        }
    }
    within("parameter difference", worst, 1e-8)?;
    Ok(format!("{cases} cases (d ≤ 5, both parities), max parameter difference {worst:.2e}"))
}

/// Number of `(a1, a2, a3)` with `Σ a = total`, `0 ≤ a_i ≤ p_i`, by direct enumeration.
fn lattice_points(p: [usize; 3], total: usize) -> i64 {
    let mut count = 0;
    for a1 in 0..=p[0] {
        for a2 in 0..=p[1] {
            for a3 in 0..=p[2] {
                if a1 + a2 + a3 == total {
                    count += 1;
                }
            }
        }
    }
    count
}

fn counting() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for h in 1..=8usize {
        for q1 in 0..h {
            let q2 = h - 1 - q1;
            for p1 in 0..=h {
                for p2 in 0..=h - p1 {
                    let p = [p1, p2, h - p1 - p2];
                    if p.iter().any(|&x| x > 1 + q1.min(q2)) {
                        ensure(coefficient_count(p, q1, q2).is_err(), || format!("{p:?} {q1} {q2} accepted"))?;
                        continue;
                    }
                    let (k1, k2) = coefficient_count(p, q1, q2).map_err(err("count"))?;
                    let (b1, b2) = (lattice_points(p, 1 + q1) - 1, lattice_points(p, 1 + q2) - 1);
                    ensure((k1, k2) == (b1, b2), || format!("{p:?} q = ({q1}, {q2}): ({k1}, {k2}) vs ({b1}, {b2})"))?;
                    checked += 1;
                }
            }
        }
    }
    let (k1, k2) = coefficient_count([1, 1, 3], 2, 2).map_err(err("count"))?;
    ensure(k1 + k2 == 6, || format!("k1 + k2 = {} for h = 5", k1 + k2))?;
    in_time(start, Duration::from_secs(5))?;
    Ok(format!("{checked} admissible cases with h ≤ 8 match enumeration; (5,2,2,1,1,3) gives k1 + k2 = 6"))
}

fn non_uniqueness() -> Outcome {
    let t = tol();
    let (g2, g3, d1, d2) = (c64(0.7, 0.1), c64(-0.4, 0.3), c64(1.2, -0.5), c64(0.6, 0.9));
    let demo = nonuniqueness_demo(g2, g3, d1, d2).map_err(err("demo"))?;
    let gap = (demo.gamma2[0] - demo.gamma2[1]).norm();
    ensure(gap > 1e-3, || format!("roots coincide ({gap:.1e})"))?;
    let c: Vec<ZCollection> = (0..2)
        .map(|k| nonuniqueness_collection([re(0.0), demo.gamma2[k], demo.gamma3[k], re(0.0)], [d1, d2], &t))
        .collect::<Result<_, _>>()
        .map_err(err("collection"))?;
    let mut g = rng(111);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let z = annulus_point(&mut g, 3);
        let a = eval_z(&c[0], &z).map_err(err("solve"))?;
        let b = eval_z(&c[1], &z).map_err(err("solve"))?;
        worst = worst.max(rel(&a, &b));
        let target = demo.z.eval(&z).map_err(err("target"))?;
        worst = worst.max((a[(0, 0)] - target).norm() / (1.0 + target.norm()));
    }
    within("difference", worst, 1e-8)?;
    Ok(format!("γ2 roots {:.3} and {:.3} give the same Z at 20 points within {worst:.1e}", demo.gamma2[0], demo.gamma2[1]))
}

fn normalization_reduction() -> Outcome {
    let mut g = rng(112);
    let mut norm = 0.0f64;
    for (m, e, dims) in [(1, 2, vec![2, 1]), (2, 3, vec![2, 2]), (1, 2, vec![1, 1, 1]), (2, 4, vec![3, 2])] {
        let c = y_collection(&mut g, m, e, &dims);
        let (_, mm, kk) = normalize_y(&c).map_err(err("normalize"))?;
        let ones = vec![re(1.0); dims.len()];
        norm = norm.max(eval_y(&c, &ones).map_err(err("solve"))?.max_abs_diff(&(&mm * &kk)));
    }
    within("Y(1) − MK", norm, 1e-9)?;

    let (mut recursion, mut fd) = (0.0f64, 0.0f64);
    for (m, e, dims) in [(1, 2, vec![3, 2]), (2, 2, vec![4, 3]), (1, 2, vec![2, 2, 2]), (2, 4, vec![4, 3, 3])] {
        let n = dims.len();
        let c = z_collection(&mut g, m, e, &dims);
        let (y, w) = reduce_z(&c).map_err(err("reduce"))?;
        for _ in 0..20 {
            let z = annulus_point(&mut g, n);
            let r = recursion_z(&w, &eval_y(&y, &z).map_err(err("solve"))?, &z).map_err(err("recursion"))?;
            recursion = recursion.max(rel(&r, &eval_z(&c, &z).map_err(err("solve"))?));
        }
        let est = w_from_differences(|z| eval_z(&c, z), n, 1e-5).map_err(err("differences"))?;
        for (a, b) in est.iter().zip(&w.w) {
            fd = fd.max(a.max_abs_diff(b));
        }
    }
    within("recursion vs solver", recursion, 1e-8)?;
    within("finite-difference w", fd, 1e-6)?;

    let mut cf = 0.0f64;
    let mut instances = 0;
    for (m, e, dims) in [(1, 2, vec![3, 2]), (1, 3, vec![4, 3]), (2, 2, vec![3, 3]), (2, 4, vec![5, 5]), (1, 2, vec![2, 2, 2])] {
        let c = z_collection(&mut g, m, e, &dims);
        let expansion = continued_fraction(&c, 10);
        if matches!(expansion.stop, CFStop::AssumptionViolated { .. }) {
            continue;
        }
        instances += 1;
        for _ in 0..20 {
            let z = annulus_point(&mut g, dims.len());
            cf = cf.max(rel(&expansion.evaluate(&z).map_err(err("expansion"))?, &eval_z(&c, &z).map_err(err("solve"))?));
        }
    }
    ensure(instances >= 3, || format!("only {instances} expansions satisfied every level assumption"))?;
    within("continued fraction", cf, 1e-7)?;
    Ok(format!(
        "Y(1) = MK within {norm:.1e}; recursion {recursion:.1e}; w by differences {fd:.1e}; {instances} expansions within {cf:.1e}"
    ))
}

fn hexmap() -> Outcome {
    let centre = hex_coords([-2.0, 2.0, 2.0]).map_err(err("symmetric ray"))?;
    ensure(centre.x.abs() < 1e-12 && centre.y.abs() < 1e-12, || format!("symmetric ray maps to ({}, {})", centre.x, centre.y))?;
    let p = hex_coords([-1.0, 2.0, 1.0]).map_err(err("worked point"))?;
    let (x, y) = (-0.5, -1.0 / (2.0 * 3f64.sqrt()));
    ensure((p.x - x).abs() < 1e-12 && (p.y - y).abs() < 1e-12, || format!("(−1, 2, 1) maps to ({}, {})", p.x, p.y))?;

    let grid = Grid { points: 15, ..Grid::default() };
    let mut g = rng(113);
    let corpus = [(2, [1, 2, 2]), (3, [2, 2, 3]), (5, [3, 6, 3]), (2, [2, 1, 1]), (2, [3, 2, 1]), (3, [3, 2, 2])];
    for (e, dims) in corpus {
        let c = orthogonal_z_collection(&mut g, 1, e, &dims);
        let t = pole_trajectory(&c, &grid).map_err(err("trajectory"))?;
        ensure((0..3).all(|i| t.counts[i] <= dims[i]), || format!("pole counts {:?} exceed {dims:?}", t.counts))?;
    }
    Ok(format!("centre and (−1, 2, 1) exact; pole counts within phase dimensions on {} collections", corpus.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 13] = [
        ("normalization identity", normalization_identity),
        ("golden scalar functions", golden_scalars),
        ("formula cross-agreement", formula_agreement),
        ("realization compiler", realization_compiler),
        ("algebra laws", algebra_laws),
        ("identity elements", identity_elements),
        ("pruning", pruning),
        ("extraction", extraction),
        ("one-variable recovery", one_variable_recovery),
        ("counting", counting),
        ("non-uniqueness", non_uniqueness),
        ("normalization and reduction", normalization_reduction),
        ("hexmap", hexmap),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
