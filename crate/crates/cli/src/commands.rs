//! The subcommands, as library functions returning data and exit codes.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;
use viabilitykit_core::cones::{
    cone_membership_numeric, default_grid, direction_grid, snap, ConeKind,
};
use viabilitykit_core::simulate::{integrate, summarize, RunSummary, SimError};
use viabilitykit_core::verify::{
    check_assumption1, check_assumption2, check_assumption3, check_pr_heuristic, check_standing,
    empirical_section, estimate_critical_set, nagumo_check, selections, simulation_starts,
    star_consistency, theorem_verdict, Check, FinalVerdict, VerdictKind,
};
use viabilitykit_core::{ConeVerdict, Selection, SetExpr, System, VerifyConfig};

use crate::builtins;
use crate::output;
use crate::report::{now, AnalyticComparison, Assumptions, Provenance, Report, TOOL_VERSION};
use crate::scenario::{CheckName, Compiled, Scenario, ScenarioError};

pub const EXIT_INPUT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Input(String),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

/// Command-line replacements for scenario values.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub eps_cone: Option<f64>,
    pub margin: Option<f64>,
    pub h: Option<f64>,
    pub horizon: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, s: &mut Scenario) {
        let t = &mut s.tolerances;
        if let Some(v) = self.seed {
            s.seed = v;
        }
        for (dst, src) in [
            (&mut t.tol, self.tol),
            (&mut t.eps_cone, self.eps_cone),
            (&mut t.margin, self.margin),
            (&mut t.h, self.h),
            (&mut t.horizon, self.horizon),
        ] {
            if let Some(v) = src {
                *dst = v;
            }
        }
    }
}

fn box_note(s: &Scenario) -> String {
    format!(
        "standing assumptions, the tangency condition and the critical set are sampled only inside the box lo = {:?}, hi = {:?}; nothing outside it is examined",
        s.bx.lo, s.bx.hi
    )
}

fn analytic_comparisons(s: &Scenario, compiled: &Compiled) -> Vec<AnalyticComparison> {
    let sys = &compiled.system;
    let cfg = &compiled.cfg;
    let sim = cfg.sim();
    let deviation = |x0: &[f64], sel: &Selection, phi: &[viabilitykit_core::Expr], h: f64| {
        integrate(&sys.f, &sys.c, &sys.k, x0, sel, h, cfg.horizon, &sim)
            .ok()
            .and_then(|traj| traj.max_deviation(phi).ok())
            .unwrap_or(f64::NAN)
    };
    compiled
        .analytic
        .iter()
        .zip(&s.analytic_solutions)
        .map(|((x0, sel, phi), spec)| {
            let d1 = deviation(x0, sel, phi, cfg.h);
            let d2 = deviation(x0, sel, phi, cfg.h / 2.0);
            AnalyticComparison {
                x0: x0.clone(),
                selection: sel.describe(),
                phi: spec.phi.clone(),
                h: cfg.h,
                deviation_h: d1,
                deviation_half_h: d2,
                ratio: (d2 > 1e-13 && d1.is_finite()).then(|| d1 / d2),
            }
        })
        .collect()
}

/// Runs the requested checks (all when `only` is `None` and the scenario
/// lists them all) and assembles the report.
pub fn run_check(s: &Scenario, only: Option<CheckName>) -> Result<Report, CliError> {
    let compiled = s.compile()?;
    let sys = &compiled.system;
    let cfg = &compiled.cfg;
    let checks: Vec<CheckName> = match only {
        Some(c) => vec![c],
        None => s.checks.clone(),
    };
    let has = |c: CheckName| checks.contains(&c);
    let mut rep = Report {
        scenario: s.name.clone(),
        timestamp: now(),
        provenance: Provenance {
            tool_version: TOOL_VERSION.to_string(),
            seed: s.seed,
            tolerances: s.tolerances.clone(),
            bx: s.bx.clone(),
            checks: checks.clone(),
            notes: vec![
                box_note(s),
                "checks are numerical evidence, not proofs".to_string(),
            ],
        },
        standing: None,
        nagumo: None,
        critical_set: None,
        assumptions: Assumptions::default(),
        empirical: None,
        star_consistency: None,
        fphi: Vec::new(),
        analytic: Vec::new(),
        verdict: FinalVerdict {
            kind: VerdictKind::Inconclusive,
            summary: String::new(),
            empirical_violation: false,
            exit_code: 2,
        },
    };

    if CheckName::ALL.iter().all(|c| has(*c)) {
        let v = theorem_verdict(sys, cfg);
        rep.standing = Some(v.standing);
        rep.nagumo = Some(v.nagumo);
        rep.critical_set = Some(v.critical_set);
        rep.assumptions = Assumptions {
            a1: Some(v.assumptions.a1),
            a2: Some(v.assumptions.a2),
            a3: Some(v.assumptions.a3),
            pr_heuristic: Some(v.assumptions.pr_heuristic),
        };
        rep.empirical = Some(v.empirical);
        rep.star_consistency = Some(v.star_consistency);
        rep.fphi = v.fphi;
        rep.verdict = v.verdict;
    } else {
        run_partial(sys, cfg, &checks, &mut rep);
    }
    if has(CheckName::Empirical) {
        rep.analytic = analytic_comparisons(s, &compiled);
    }
    Ok(rep)
}

fn run_partial(sys: &System, cfg: &VerifyConfig, checks: &[CheckName], rep: &mut Report) {
    let has = |c: CheckName| checks.contains(&c);
    if has(CheckName::Standing) {
        rep.standing = Some(check_standing(sys, cfg));
    }
    if has(CheckName::Nagumo) {
        rep.nagumo = Some(nagumo_check(sys, cfg.nagumo_samples, cfg));
    }
    let needs_critical = [
        CheckName::CriticalSet,
        CheckName::Assumption1,
        CheckName::Assumption2,
        CheckName::Assumption3,
        CheckName::Pr,
        CheckName::Empirical,
    ]
    .iter()
    .any(|c| has(*c));
    if needs_critical {
        let crit = estimate_critical_set(
            sys,
            cfg.critical_candidates,
            &cfg.critical_radii,
            cfg.critical_budget,
            cfg,
        );
        let pts = &crit.points;
        if has(CheckName::Assumption1) {
            rep.assumptions.a1 = Some(check_assumption1(sys, pts, cfg));
        }
        if has(CheckName::Assumption2) {
            rep.assumptions.a2 = Some(check_assumption2(sys, pts, cfg));
        }
        if has(CheckName::Assumption3) {
            rep.assumptions.a3 = Some(check_assumption3(sys, pts, cfg));
        }
        if has(CheckName::Pr) {
            rep.assumptions.pr_heuristic = Some(check_pr_heuristic(sys, pts, cfg));
        }
        if has(CheckName::Empirical) {
            let (emp, fphi) = empirical_section(sys, pts, cfg);
            if let Some(n) = &rep.nagumo {
                rep.star_consistency = Some(star_consistency(n, &emp, cfg));
            }
            rep.empirical = Some(emp);
            rep.fphi = fphi;
        }
        rep.critical_set = Some(crit);
    }

    let violation = rep.empirical.as_ref().is_some_and(|e| !e.no_violation());
    let nagumo_fails = rep.nagumo.as_ref().is_some_and(|n| n.check.fails());
    let mut parts = vec![format!(
        "partial run ({})",
        checks
            .iter()
            .map(|c| check_label(*c))
            .collect::<Vec<_>>()
            .join(", ")
    )];
    if nagumo_fails {
        parts.push("tangency condition fails".into());
    }
    let failing: Vec<&str> = [
        ("Assumption 1", rep.assumptions.a1.as_ref()),
        ("Assumption 2", rep.assumptions.a2.as_ref()),
        (
            "Assumption 3",
            rep.assumptions.a3.as_ref().map(|a| &a.check),
        ),
    ]
    .into_iter()
    .filter(|(_, c)| c.is_some_and(Check::fails))
    .map(|(n, _)| n)
    .collect();
    if !failing.is_empty() {
        parts.push(format!("{} fails", failing.join(", ")));
    }
    if let Some(e) = &rep.empirical {
        parts.push(match e.violations.first() {
            Some(v) => format!("empirical: violation from {:?}", v.x0),
            None => "empirical: no violation".into(),
        });
    }
    rep.verdict = FinalVerdict {
        kind: if nagumo_fails {
            VerdictKind::NotInvariant
        } else {
            VerdictKind::Inconclusive
        },
        summary: parts.join("; "),
        empirical_violation: violation,
        exit_code: if violation || nagumo_fails { 1 } else { 2 },
    };
}

fn check_label(c: CheckName) -> &'static str {
    match c {
        CheckName::Standing => "standing",
        CheckName::Nagumo => "nagumo",
        CheckName::CriticalSet => "critical_set",
        CheckName::Assumption1 => "assumption1",
        CheckName::Assumption2 => "assumption2",
        CheckName::Assumption3 => "assumption3",
        CheckName::Pr => "pr",
        CheckName::Empirical => "empirical",
    }
}

/// Writes `report_<name>.json` and, on request, one CSV per simulated run
/// plus a gnuplot script over all of them.
pub fn write_check_outputs(
    s: &Scenario,
    rep: &Report,
    out: &Path,
    emit_csv: bool,
    emit_gnuplot: bool,
) -> Result<Vec<PathBuf>, CliError> {
    let mut written = vec![output::write(
        out,
        &format!("report_{}.json", s.name),
        &rep.to_json(),
    )?];
    if !(emit_csv || emit_gnuplot) {
        return Ok(written);
    }
    let compiled = s.compile()?;
    let sys = &compiled.system;
    let cfg = &compiled.cfg;
    let pts = rep
        .critical_set
        .as_ref()
        .map(|c| c.points.clone())
        .unwrap_or_default();
    let sim = cfg.sim();
    let mut files = Vec::new();
    for x0 in simulation_starts(sys, &pts, cfg) {
        for sel in selections(sys, cfg) {
            let Ok(traj) = integrate(&sys.f, &sys.c, &sys.k, &x0, &sel, cfg.h, cfg.horizon, &sim)
            else {
                continue;
            };
            let name = output::trajectory_file_name(&s.name, files.len());
            if emit_csv {
                written.push(output::write(out, &name, &output::trajectory_csv(&traj))?);
            }
            files.push(name);
        }
    }
    if emit_gnuplot {
        let script = output::gnuplot_script(&s.name, &files, s.dim);
        written.push(output::write(
            out,
            &format!("phase_{}.gp", s.name),
            &script,
        )?);
    }
    Ok(written)
}

pub struct SimulateOutput {
    pub summary: RunSummary,
    pub csv_path: PathBuf,
    pub gnuplot_path: Option<PathBuf>,
}

/// Integrates one selection from `x0` and writes `traj_<name>_0.csv`.
pub fn run_simulate(
    s: &Scenario,
    x0: &[f64],
    sel: &Selection,
    out: &Path,
    emit_gnuplot: bool,
) -> Result<SimulateOutput, CliError> {
    let compiled = s.compile()?;
    let sys = &compiled.system;
    let cfg = &compiled.cfg;
    if x0.len() != s.dim {
        return Err(CliError::Input(format!(
            "x0 must have {} coordinates",
            s.dim
        )));
    }
    let traj = integrate(
        &sys.f,
        &sys.c,
        &sys.k,
        x0,
        sel,
        cfg.h,
        cfg.horizon,
        &cfg.sim(),
    )
    .map_err(|e| match e {
        SimError::StartOutsideC(_) => CliError::Input(format!("x0 = {:?} is not in C", x0)),
        other => CliError::Input(other.to_string()),
    })?;
    let name = output::trajectory_file_name(&s.name, 0);
    let csv_path = output::write(out, &name, &output::trajectory_csv(&traj))?;
    let gnuplot_path = if emit_gnuplot {
        let script = output::gnuplot_script(&s.name, &[name], s.dim);
        Some(output::write(
            out,
            &format!("phase_{}.gp", s.name),
            &script,
        )?)
    } else {
        None
    };
    Ok(SimulateOutput {
        summary: summarize(x0, sel, &traj, cfg.violation_tol),
        csv_path,
        gnuplot_path,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ConeSet {
    #[value(name = "K")]
    K,
    #[value(name = "C")]
    C,
    #[value(name = "KC")]
    KC,
    #[value(name = "dK")]
    DK,
    #[value(name = "dKdC")]
    DKDC,
}

impl ConeSet {
    pub fn name(self) -> &'static str {
        match self {
            ConeSet::K => "K",
            ConeSet::C => "C",
            ConeSet::KC => "KC",
            ConeSet::DK => "dK",
            ConeSet::DKDC => "dKdC",
        }
    }

    pub fn build(self, sys: &System) -> SetExpr {
        match self {
            ConeSet::K => sys.k.clone(),
            ConeSet::C => sys.c.clone(),
            ConeSet::KC => sys.k.and(&sys.c),
            ConeSet::DK => sys.k.boundary(),
            ConeSet::DKDC => sys.k.boundary().and(&sys.c.boundary()),
        }
    }
}

pub struct ConeTable {
    pub directions: Vec<Vec<f64>>,
    /// Per direction, one verdict per entry of `ConeKind::ALL`.
    pub rows: Vec<Vec<ConeVerdict>>,
}

impl ConeTable {
    pub fn members(&self, kind: ConeKind) -> Vec<bool> {
        let i = ConeKind::ALL.iter().position(|k| *k == kind).unwrap();
        self.rows.iter().map(|r| r[i].is_yes()).collect()
    }

    pub fn csv(&self) -> String {
        output::cone_table_csv(&self.directions, &self.rows)
    }
}

/// Membership of every grid direction in the four cones of `set` at `x`.
pub fn run_cones(
    s: &Scenario,
    set: ConeSet,
    x: &[f64],
    grid: Option<usize>,
) -> Result<ConeTable, CliError> {
    let compiled = s.compile()?;
    let cfg = &compiled.cfg;
    if x.len() != s.dim {
        return Err(CliError::Input(format!(
            "x must have {} coordinates",
            s.dim
        )));
    }
    let target = set.build(&compiled.system);
    let mut cc = cfg.cone();
    if set == ConeSet::DKDC {
        cc.levels = cfg.meet_levels;
    }
    if snap(&target, x, &cc).is_none() {
        return Err(CliError::Input(format!(
            "x = {:?} is not on the set {}",
            x,
            set.name()
        )));
    }
    let directions = match grid {
        Some(n) => direction_grid(s.dim, n, cfg.seed),
        None => default_grid(s.dim, cfg.seed),
    };
    let rows = directions
        .par_iter()
        .map(|v| {
            ConeKind::ALL
                .iter()
                .map(|k| cone_membership_numeric(&target, x, v, *k, &cc))
                .collect()
        })
        .collect();
    Ok(ConeTable { directions, rows })
}

pub struct CorpusEntry {
    pub name: String,
    pub report: Report,
    pub expected_exit: Option<i32>,
}

/// Checks every built-in scenario, in parallel, in list order.
pub fn run_corpus(overrides: &Overrides) -> Result<Vec<CorpusEntry>, CliError> {
    let scenarios: Vec<Scenario> = builtins::BUILTINS
        .iter()
        .map(|(_, text, _)| {
            let mut s = Scenario::from_json(text)?;
            overrides.apply(&mut s);
            Ok(s)
        })
        .collect::<Result<_, ScenarioError>>()?;
    scenarios
        .par_iter()
        .map(|s| {
            Ok(CorpusEntry {
                name: s.name.clone(),
                report: run_check(s, None)?,
                expected_exit: builtins::expected_exit(&s.name),
            })
        })
        .collect()
}

/// Problems across the corpus: unexpected exit codes and runs that kept
/// the star property while leaving `K` although the tangency condition
/// holds.
pub fn corpus_problems(entries: &[CorpusEntry]) -> Vec<String> {
    let mut out = Vec::new();
    for e in entries {
        if let Some(x) = e.expected_exit {
            if x != e.report.verdict.exit_code {
                out.push(format!(
                    "{}: exit code {} (expected {})",
                    e.name, e.report.verdict.exit_code, x
                ));
            }
        }
        if let Some(sc) = &e.report.star_consistency {
            for r in &sc.inconsistent {
                out.push(format!(
                    "{}: star property held from {:?} ({}) yet dist_K reached {}",
                    e.name, r.x0, r.selection, r.max_dist_k
                ));
            }
        }
    }
    out
}

/// Caps rayon at `VIABILITYKIT_THREADS` when set.
pub fn init_threads() {
    if let Some(n) = std::env::var("VIABILITYKIT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

pub fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("bad coordinate '{}' in '{}'", p.trim(), s)))
        })
        .collect()
}
