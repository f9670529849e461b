//! Acceptance criteria, one line of output per criterion. Runs without the
//! libtest harness so the lines are always printed.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use viabilitykit::builtins;
use viabilitykit::commands::{self, run_check, run_cones, run_corpus, ConeSet, Overrides};
use viabilitykit::{Report, Scenario};
use viabilitykit_core::cones::{
    analytic_agreement, cone_analytic, cone_intersection_lemma_test, cone_membership_numeric,
    default_grid, direction_grid, ConeKind,
};
use viabilitykit_core::dynamics::check_one_sided_lipschitz;
use viabilitykit_core::geometry::sample_boundary;
use viabilitykit_core::simulate::integrate;
use viabilitykit_core::verify::{pair_min_c, Check};
use viabilitykit_core::{rng, BoxRegion, PolytopeMap, Selection};

type Outcome = Result<String, String>;

fn scenario(name: &str) -> Scenario {
    builtins::load(name).unwrap().unwrap()
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn near_origin(x: &[f64], tol: f64) -> bool {
    x.iter().map(|v| v * v).sum::<f64>().sqrt() <= tol
}

/// Largest `|dist_K(t) - expected(t)|` along the trajectory from the origin.
fn dist_k_error(s: &Scenario, expected: impl Fn(f64) -> f64) -> f64 {
    let c = s.compile().unwrap();
    let sys = &c.system;
    let traj = integrate(
        &sys.f,
        &sys.c,
        &sys.k,
        &[0.0, 0.0],
        &Selection::Vertex(0),
        1e-3,
        c.cfg.horizon,
        &c.cfg.sim(),
    )
    .unwrap();
    traj.times
        .iter()
        .zip(&traj.monitors)
        .map(|(t, m)| (m.dist_k.unwrap_or(f64::INFINITY) - expected(*t)).abs())
        .fold(0.0, f64::max)
}

fn common_start(rep: &Report, elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(
        elapsed < limit,
        format!("runtime {:?} exceeds {:?}", elapsed, limit),
    )?;
    let n = rep.nagumo.as_ref().unwrap();
    ensure(
        n.check.holds(),
        format!("(a) tangency condition: {:?}", n.check),
    )?;
    let pts = &rep.critical_set.as_ref().unwrap().points;
    ensure(
        pts.len() == 1 && near_origin(&pts[0], 1e-3),
        format!("(b) critical set {:?}", pts),
    )
}

fn criterion1() -> Outcome {
    let s = scenario("example1");
    let t = Instant::now();
    let rep = run_check(&s, None).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    common_start(&rep, elapsed, Duration::from_secs(60))?;
    let a = &rep.assumptions;
    match a.a1.as_ref().unwrap() {
        Check::Fails { x, v: Some(v), .. } => ensure(
            near_origin(x, 1e-3) && (v[0] - 1.0).abs() < 1e-9 && v[1].abs() < 1e-9,
            format!("(c) witness x = {:?}, v = {:?}", x, v),
        )?,
        other => return Err(format!("(c) Assumption 1: {:?}", other)),
    }
    ensure(
        a.a2.as_ref().unwrap().holds(),
        "(d) Assumption 2 does not hold",
    )?;
    let a3 = a.a3.as_ref().unwrap();
    ensure(
        a3.check.holds(),
        format!("(d) Assumption 3: {:?}", a3.check),
    )?;
    ensure(
        a3.dagger.iter().any(|d| d.bounded),
        "(d) no bounded minimal-c table",
    )?;
    let deriv = a3
        .derivability_k
        .iter()
        .chain(&a3.derivability_c)
        .fold(1.0, |m: f64, v| m.min(*v));
    ensure(
        deriv >= 0.99,
        format!("(d) derivability agreement {}", deriv),
    )?;
    ensure(
        rep.verdict.exit_code == 1,
        format!("exit code {}", rep.verdict.exit_code),
    )?;
    let err = dist_k_error(&s, |t| t);
    ensure(err <= 1e-6, format!("(e) |dist_K(t) - t| up to {:e}", err))?;
    let table = &a3.dagger[0];
    Ok(format!(
        "A1 fails at 0 with v = (1, 0); A3 alpha = {}, max c {:.4}..{:.4}; dist_K error {:.1e}; {:.1?}",
        table.alpha,
        table.rows.first().and_then(|r| r.max_c).unwrap_or(f64::NAN),
        table.rows.last().and_then(|r| r.max_c).unwrap_or(f64::NAN),
        err,
        elapsed
    ))
}

fn criterion2() -> Outcome {
    let s = scenario("example2");
    let t = Instant::now();
    let rep = run_check(&s, None).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    common_start(&rep, elapsed, Duration::from_secs(120))?;
    let a = &rep.assumptions;
    ensure(
        a.a1.as_ref().unwrap().holds(),
        format!("(c) Assumption 1: {:?}", a.a1),
    )?;
    ensure(
        a.a2.as_ref().unwrap().holds(),
        format!("(c) Assumption 2: {:?}", a.a2),
    )?;
    ensure(
        a.a3.as_ref().unwrap().check.fails(),
        "(d) transversality not flagged",
    )?;

    // The pair family y = (s, -s^2/2) on ∂C, z = (s, 0) on ∂K.
    let c = s.compile().unwrap();
    let mut notes = Vec::new();
    for (y1, floor) in [(0.1, 10.0), (0.05, 10.0), (0.01, 100.0), (0.005, 100.0)] {
        let z = [y1, 0.0];
        let y = [y1, -y1 * y1 / 2.0];
        let cmin = pair_min_c(&c.system, &z, &y, 0.0, &c.cfg)
            .map_err(|e| format!("(d) pair at {}: {}", y1, e))?
            .ok_or_else(|| format!("(d) pair at {} infeasible", y1))?;
        let bound = (1.0 + 1.0 / (y1 * y1)).sqrt();
        ensure(
            cmin > floor,
            format!("(d) c({}) = {} not above {}", y1, cmin, floor),
        )?;
        ensure(
            cmin / bound <= 2.0 && bound / cmin <= 2.0,
            format!("(d) c({}) = {} vs bound {}", y1, cmin, bound),
        )?;
        notes.push(format!("c({}) = {:.1}", y1, cmin));
    }
    ensure(
        rep.verdict.exit_code == 1,
        format!("exit code {}", rep.verdict.exit_code),
    )?;
    let err = dist_k_error(&s, |t| t * t / 2.0);
    ensure(
        err <= 1e-6,
        format!("(e) |dist_K(t) - t^2/2| up to {:e}", err),
    )?;
    Ok(format!(
        "{}; dist_K error {:.1e}; {:.1?}",
        notes.join(", "),
        err,
        elapsed
    ))
}

fn criterion3() -> Outcome {
    type Closed = fn(&[f64]) -> bool;
    let cases: [(&str, ConeSet, [f64; 2], &str, Closed); 6] = [
        ("example1", ConeSet::K, [0.0, 0.0], "T_K(0)", |v| {
            v[0] <= 1e-9 && v[1] >= -1e-9
        }),
        ("example1", ConeSet::DK, [0.0, 0.5], "T_dK(z)", |v| {
            v[0].abs() <= 1e-9
        }),
        ("example1", ConeSet::C, [0.5, 0.25], "T_C(y)", |v| {
            v[1] <= 2.0 * 0.5 * v[0] + 1e-9
        }),
        (
            "example1",
            ConeSet::DKDC,
            [0.0, 0.0],
            "T_dK∩dC(0)",
            |_| false,
        ),
        ("example2", ConeSet::DK, [0.3, 0.0], "T_dK(z)", |v| {
            v[1].abs() <= 1e-9
        }),
        ("example2", ConeSet::C, [0.3, -0.045], "T_C(y)", |v| {
            v[1] <= -0.3 * v[0] + 1e-9
        }),
    ];
    let mut parts = Vec::new();
    for (name, set, x, label, closed) in cases {
        let table = run_cones(&scenario(name), set, &x, Some(360)).map_err(|e| e.to_string())?;
        let m = table.members(ConeKind::Contingent);
        let agree = table
            .directions
            .iter()
            .zip(&m)
            .filter(|(v, yes)| closed(v) == **yes)
            .count() as f64
            / m.len() as f64;
        ensure(
            agree >= 0.99,
            format!("{} {}: agreement {:.4}", name, label, agree),
        )?;
        parts.push(format!("{} {} {:.3}", name, label, agree));
    }
    Ok(parts.join("; "))
}

fn criterion4() -> Outcome {
    let grid = direction_grid(2, 72, 0);
    let (mut nest_bad, mut nest_total) = (0usize, 0usize);
    let (mut homog_bad, mut homog_total) = (0usize, 0usize);
    let (mut agree_sum, mut agree_n, mut agree_min) = (0.0, 0usize, 1.0f64);
    for name in builtins::names() {
        let s = scenario(name);
        let c = s.compile().unwrap();
        let sys = &c.system;
        let cc = c.cfg.cone();
        for set in [&sys.k, &sys.c] {
            let mut pts = sample_boundary(set, &sys.bx, 4, cc.tol, 11);
            pts.push(vec![0.0, 0.0]);
            for x in pts.iter().filter(|x| set.contains(x)) {
                for v in &grid {
                    let yes = |k: ConeKind, v: &[f64]| {
                        cone_membership_numeric(set, x, v, k, &cc).is_yes()
                    };
                    let (ct, ad, cl) = (
                        yes(ConeKind::Contingent, v),
                        yes(ConeKind::Adjacent, v),
                        yes(ConeKind::Clarke, v),
                    );
                    nest_total += 1;
                    if (cl && !ad) || (ad && !ct) {
                        nest_bad += 1;
                    }
                    for lambda in [0.25, 4.0] {
                        let w: Vec<f64> = v.iter().map(|c| c * lambda).collect();
                        homog_total += 1;
                        if yes(ConeKind::Contingent, &w) != ct {
                            homog_bad += 1;
                        }
                    }
                }
                if let Some(cone) = cone_analytic(set, x, cc.tol) {
                    let a = analytic_agreement(set, x, &cone, &default_grid(2, 0), &cc);
                    agree_sum += a;
                    agree_n += 1;
                    agree_min = agree_min.min(a);
                }
            }
        }
    }
    let nest = 1.0 - nest_bad as f64 / nest_total as f64;
    let homog = 1.0 - homog_bad as f64 / homog_total as f64;
    let agree = agree_sum / agree_n.max(1) as f64;
    ensure(nest >= 0.99, format!("nesting agreement {:.4}", nest))?;
    ensure(homog >= 0.99, format!("homogeneity agreement {:.4}", homog))?;
    ensure(
        agree >= 0.99,
        format!(
            "analytic/numeric agreement {:.4} (min {:.4})",
            agree, agree_min
        ),
    )?;

    let ex1 = scenario("example1").compile().unwrap();
    let cc = ex1.cfg.cone();
    let grid = default_grid(2, 0);
    let same = cone_intersection_lemma_test(&ex1.system.k, &ex1.system.k, &[0.0, 0.0], &grid, &cc);
    ensure(
        same.agreement_contingent == 1.0 && same.agreement_adjacent == 1.0,
        format!(
            "lemma K1 = K2: {} / {}",
            same.agreement_contingent, same.agreement_adjacent
        ),
    )?;
    let kc = cone_intersection_lemma_test(&ex1.system.k, &ex1.system.c, &[0.0, 0.0], &grid, &cc);
    ensure(
        kc.agreement_contingent >= 0.99,
        format!("lemma K, C at the origin: {}", kc.agreement_contingent),
    )?;
    Ok(format!(
        "nesting {:.4} ({} checks), homogeneity {:.4}, analytic {:.4} over {} points (min {:.4}), lemma 1.0 / {:.4}",
        nest, nest_total, homog, agree, agree_n, agree_min, kc.agreement_contingent
    ))
}

fn criterion5() -> Outcome {
    let mut r = rng::stream(2024, 5);
    let bx = BoxRegion::cube(2, 1.0);
    let mut parts = Vec::new();
    let mut done = 0;
    while done < 3 {
        let a = rng::uniform_in_box(&mut r, &[-2.0; 4], &[2.0; 4]);
        let b = rng::uniform_in_box(&mut r, &[-1.0; 2], &[1.0; 2]);
        // Largest eigenvalue of the symmetric part, in closed form.
        let (p, q, s) = (a[0], (a[1] + a[2]) / 2.0, a[3]);
        let lmax = (p + s) / 2.0 + (((p - s) / 2.0).powi(2) + q * q).sqrt();
        if lmax.abs() < 0.1 {
            // A relative tolerance is meaningless this close to zero.
            continue;
        }
        let rows = [
            format!("{} * x1 + {} * x2 + {}", a[0], a[1], b[0]),
            format!("{} * x1 + {} * x2 + {}", a[2], a[3], b[1]),
        ];
        let f = PolytopeMap::single(2, &[&[rows[0].as_str(), rows[1].as_str()]]).unwrap();
        let est =
            check_one_sided_lipschitz(&f, &bx, 100_000, done as u64).map_err(|e| e.to_string())?;
        let rel = (est.k_hat - lmax).abs() / lmax.abs();
        ensure(
            rel <= 0.1,
            format!(
                "k_hat {} vs eigenvalue {} (rel {:.3})",
                est.k_hat, lmax, rel
            ),
        )?;
        parts.push(format!("{:.4} vs {:.4}", est.k_hat, lmax));
        done += 1;
    }
    Ok(parts.join(", "))
}

fn criterion6(corpus: &[commands::CorpusEntry]) -> Outcome {
    let mut parts = Vec::new();
    for name in ["disk_rotation", "inward_ball"] {
        let rep = &corpus.iter().find(|e| e.name == name).unwrap().report;
        let h = rep.provenance.tolerances.h;
        ensure(
            rep.verdict.exit_code == 0,
            format!(
                "{}: exit code {} ({})",
                name, rep.verdict.exit_code, rep.verdict.summary
            ),
        )?;
        let emp = rep.empirical.as_ref().unwrap();
        let worst = emp.runs.iter().map(|r| r.max_dist_kc).fold(0.0, f64::max);
        ensure(
            worst <= 5.0 * h,
            format!("{}: max dist_KC {} above 5h", name, worst),
        )?;
        let a = rep
            .analytic
            .first()
            .ok_or(format!("{}: no analytic comparison", name))?;
        let ratio = a.ratio.unwrap_or(0.0);
        ensure(
            ratio >= 8.0,
            format!("{}: halving h reduced the deviation {:.2}x", name, ratio),
        )?;
        parts.push(format!(
            "{} exit 0, max dist_KC {:.1e}, order ratio {:.1}",
            name, worst, ratio
        ));
    }
    Ok(parts.join("; "))
}

fn criterion7(first: &[commands::CorpusEntry]) -> Outcome {
    let second = run_corpus(&Overrides::default()).map_err(|e| e.to_string())?;
    ensure(first.len() == second.len(), "corpus size changed")?;
    for (a, b) in first.iter().zip(&second) {
        let (ja, jb) = (
            a.report.without_timestamp().to_json(),
            b.report.without_timestamp().to_json(),
        );
        ensure(ja == jb, format!("{}: reports differ", a.name))?;
    }
    Ok(format!("{} reports byte-identical", first.len()))
}

fn criterion8(corpus: &[commands::CorpusEntry]) -> Outcome {
    let mut checked = 0;
    for e in corpus {
        let rep = &e.report;
        if !rep.nagumo.as_ref().unwrap().check.holds() {
            continue;
        }
        let emp = rep.empirical.as_ref().unwrap();
        for r in &emp.runs {
            checked += 1;
            ensure(
                !(r.star_ok_throughout && r.max_dist_k > emp.violation_tol),
                format!(
                    "{}: star property throughout from {:?} yet dist_K = {}",
                    e.name, r.x0, r.max_dist_k
                ),
            )?;
        }
    }
    Ok(format!("{} trajectories consistent", checked))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: u32, title: &str, out: Outcome| match out {
        Ok(msg) => println!("criterion {} ({}): PASS: {}", n, title, msg),
        Err(msg) => {
            failed += 1;
            println!("criterion {} ({}): FAIL: {}", n, title, msg)
        }
    };
    report(1, "first example", criterion1());
    report(2, "second example", criterion2());
    report(3, "closed-form cones", criterion3());
    report(4, "cone estimator properties", criterion4());
    report(5, "one-sided Lipschitz oracle", criterion5());
    match run_corpus(&Overrides::default()) {
        Ok(corpus) => {
            report(6, "positive controls", criterion6(&corpus));
            report(7, "determinism", criterion7(&corpus));
            report(8, "star property consistency", criterion8(&corpus));
        }
        Err(e) => {
            for (n, t) in [
                (6, "positive controls"),
                (7, "determinism"),
                (8, "star property consistency"),
            ] {
                report(n, t, Err(format!("corpus failed: {}", e)));
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
