//! CSV and gnuplot emission. Data only; nothing is rendered here.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use viabilitykit_core::cones::ConeKind;
use viabilitykit_core::{ConeVerdict, Member, Trajectory};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trajectory_file_name(scenario: &str, index: usize) -> String {
    format!("traj_{}_{}.csv", scenario, index)
}

/// Header `t, x1..xn, dist_K, dist_KC, star_ok`, one row per grid time.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.states.first().map_or(0, |x| x.len());
    let mut out = String::from("t");
    for i in 1..=n {
        write!(out, ",x{}", i).unwrap();
    }
    out.push_str(",dist_K,dist_KC,star_ok\n");
    for ((t, x), m) in traj.times.iter().zip(&traj.states).zip(&traj.monitors) {
        write!(out, "{}", t).unwrap();
        for v in x {
            write!(out, ",{}", v).unwrap();
        }
        writeln!(out, ",{},{},{}", opt(m.dist_k), opt(m.dist_kc), m.star_ok).unwrap();
    }
    out
}

/// Phase portrait (x1 against x2) in 2-D, components against time otherwise.
pub fn gnuplot_script(scenario: &str, csv_files: &[String], dim: usize) -> String {
    let mut out = String::new();
    writeln!(out, "set datafile separator ','").unwrap();
    writeln!(out, "set key autotitle columnhead").unwrap();
    writeln!(out, "set title '{}'", scenario).unwrap();
    let using = if dim == 2 {
        writeln!(out, "set xlabel 'x1'\nset ylabel 'x2'\nset size ratio -1").unwrap();
        "2:3"
    } else {
        writeln!(out, "set xlabel 't'\nset ylabel 'x1'").unwrap();
        "1:2"
    };
    let plots: Vec<String> = csv_files
        .iter()
        .map(|f| {
            format!(
                "'{}' using {} with lines title '{}'",
                f,
                using,
                f.trim_end_matches(".csv")
            )
        })
        .collect();
    if !plots.is_empty() {
        writeln!(out, "plot {}", plots.join(", \\\n     ")).unwrap();
    }
    out
}

pub fn member_str(m: Member) -> &'static str {
    match m {
        Member::Yes => "yes",
        Member::No => "no",
        Member::Marginal => "marginal",
    }
}

/// One row per direction: angle (2-D only), coordinates, then member flag
/// and residual for each cone kind.
pub fn cone_table_csv(dirs: &[Vec<f64>], rows: &[Vec<ConeVerdict>]) -> String {
    let n = dirs.first().map_or(0, |d| d.len());
    let mut out = String::from("angle_deg");
    for i in 1..=n {
        write!(out, ",v{}", i).unwrap();
    }
    for k in ConeKind::ALL {
        write!(out, ",{0},{0}_residual", k.name()).unwrap();
    }
    out.push('\n');
    for (d, row) in dirs.iter().zip(rows) {
        if n == 2 {
            let mut a = d[1].atan2(d[0]).to_degrees();
            if a < 0.0 {
                a += 360.0;
            }
            write!(out, "{}", (a * 1e6).round() / 1e6).unwrap();
        }
        for v in d {
            write!(out, ",{}", v).unwrap();
        }
        for verdict in row {
            write!(out, ",{},{}", member_str(verdict.member), verdict.residual).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}
