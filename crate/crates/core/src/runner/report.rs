use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::sweep::{SweepReport, SweepRow};
use crate::error::{Error, Result};
use crate::fem::FieldView;

pub const CSV_HEADER: &str =
    "scheme,depth,alpha,average,status,failed_step,max_volume_gap,derivative_evaluations,iterations";

fn csv_line(r: &SweepRow) -> String {
    let counts: Vec<String> = r
        .iteration_counts()
        .iter()
        .map(ToString::to_string)
        .collect();
    let (gap, derivs) = r.simulation.as_ref().map_or((0.0, 0), |s| {
        (s.max_volume_gap, s.derivative_evaluations().total())
    });
    format!(
        "{},{},{},{:.4},{},{},{:e},{},{}",
        r.scheme,
        r.depth,
        r.alpha,
        r.average_iterations(),
        r.status.as_str(),
        r.status
            .failed_step()
            .map(|n| n.to_string())
            .unwrap_or_default(),
        gap,
        derivs,
        counts.join(";")
    )
}

pub fn report_csv(report: &SweepReport) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in &report.rows {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    out
}

/// Rows per scheme and depth, one column per Biot coefficient.
pub fn report_table(report: &SweepReport) -> String {
    let alphas = &report.config.alphas;
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in &report.rows {
        let k = (r.scheme.clone(), r.depth);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut cells: Vec<Vec<String>> = vec![std::iter::once("scheme".to_string())
        .chain(std::iter::once("AA(m)".to_string()))
        .chain(alphas.iter().map(|a| format!("alpha={a}")))
        .collect()];
    for (scheme, depth) in &keys {
        let mut line = vec![scheme.clone(), format!("AA({depth})")];
        for &a in alphas {
            line.push(
                report
                    .row(scheme, *depth, a)
                    .map_or_else(|| "-".into(), SweepRow::cell_text),
            );
        }
        cells.push(line);
    }
    let ncol = cells[0].len();
    let widths: Vec<usize> = (0..ncol)
        .map(|c| cells.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (k, line) in cells.iter().enumerate() {
        let parts: Vec<String> = line
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (s, w))| {
                if c < 2 {
                    format!("{s:<w$}")
                } else {
                    format!("{s:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        if k == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (ncol - 1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    out
}

fn write(path: PathBuf, body: &str) -> Result<PathBuf> {
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `report.csv` and `report.txt` into `dir`, plus the final fields of
/// each completed combination when the config asks for them.
pub fn emit_report(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        write(dir.join("report.csv"), &report_csv(report))?,
        write(dir.join("report.txt"), &report_table(report))?,
    ];
    if report.config.export_fields {
        let mesh = report.config.grid.mesh()?;
        for r in &report.rows {
            let Some(sim) = &r.simulation else { continue };
            let vg = report.config.base.params.vg;
            let st = &sim.final_state;
            let s: Vec<f64> =
                st.p.iter()
                    .map(|&p| vg.saturation(p))
                    .collect::<Result<_>>()?;
            let view = FieldView {
                mesh: &mesh,
                p: &st.p,
                q: &st.q,
                u: &st.u,
                s: &s,
            };
            let stem = format!(
                "{}_aa{}_alpha{}",
                r.scheme.replace(['/', '(', ')', '='], "_"),
                r.depth,
                r.alpha
            );
            let fields = dir.join("fields");
            view.write_all(&fields, &stem)?;
            files.push(fields.join(format!("{stem}.vtk")));
        }
    }
    Ok(files)
}
