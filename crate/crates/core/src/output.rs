//! CSV and SVG emission. Numbers are written with the shortest
//! round-trip representation, so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::certificate::Certificate;
use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::quantizer::LevelTable;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// Column names of the trajectory CSV.
pub fn trajectory_header(error_dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=error_dim).map(|i| format!("e{i}")));
    h.extend(["norm_inf", "norm_2", "in_cts", "alpha3", "alpha4"].map(String::from));
    h
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trajectory_header(traj.error_dim))?;
    let mut row = Vec::with_capacity(traj.error_dim + 6);
    for k in 0..traj.len() {
        row.clear();
        row.push(traj.times[k].to_string());
        row.extend(traj.error(k).iter().map(f64::to_string));
        row.push(traj.norm_inf[k].to_string());
        row.push(traj.norm_2[k].to_string());
        row.push(u8::from(traj.in_cts[k]).to_string());
        match traj.gains[k] {
            Some((a3, a4)) => {
                row.push(a3.to_string());
                row.push(a4.to_string());
            }
            None => {
                row.push(String::new());
                row.push(String::new());
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))?;
    Ok(())
}

pub fn write_trajectory_file(traj: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory(traj, create(path)?)
}

/// Level table as `j,pi_j,gamma_j,lower,upper`, largest level first.
pub fn write_levels<W: Write>(table: &LevelTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "pi_j", "gamma_j", "lower", "upper"])?;
    for r in table.rows() {
        w.write_record([
            r.j.to_string(),
            r.level.to_string(),
            r.gamma.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))?;
    Ok(())
}

/// Certificate as `condition,satisfied,slack`.
pub fn write_certificate<W: Write>(cert: &Certificate, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["condition", "satisfied", "slack"])?;
    for c in &cert.conditions {
        w.write_record([c.name.to_string(), c.satisfied.to_string(), c.slack.to_string()])?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))?;
    Ok(())
}

pub fn write_certificate_file(cert: &Certificate, path: &Path) -> Result<()> {
    write_certificate(cert, create(path)?)
}

/// Values of a named trajectory column: `norm_inf`, `norm_2`, `alpha3`,
/// `alpha4` or `e1`..`en`.
pub fn column(traj: &Trajectory, name: &str) -> Result<Vec<f64>> {
    let gains = |pick: fn((f64, f64)) -> f64| -> Result<Vec<f64>> {
        if !traj.has_gains() {
            return Err(Error::Output(format!("trajectory has no {name} column")));
        }
        Ok(traj.gains.iter().map(|g| g.map_or(f64::NAN, pick)).collect())
    };
    match name {
        "norm_inf" => Ok(traj.norm_inf.clone()),
        "norm_2" => Ok(traj.norm_2.clone()),
        "alpha3" => gains(|g| g.0),
        "alpha4" => gains(|g| g.1),
        _ => {
            let i = name
                .strip_prefix('e')
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|&i| i >= 1 && i <= traj.error_dim)
                .ok_or_else(|| Error::Output(format!("unknown column {name:?}")))?;
            Ok((0..traj.len()).map(|k| traj.error(k)[i - 1]).collect())
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 450.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
/// Upper bound on drawn points per series; longer series are decimated.
const MAX_POINTS: usize = 2000;

/// Renders the given columns against time as an SVG line plot.
pub fn render_plot(traj: &Trajectory, columns: &[&str]) -> Result<String> {
    if traj.is_empty() {
        return Err(Error::Output("cannot plot an empty trajectory".into()));
    }
    if columns.is_empty() {
        return Err(Error::Output("no columns to plot".into()));
    }
    let series = columns.iter().map(|c| column(traj, c)).collect::<Result<Vec<_>>>()?;
    let t0 = traj.times[0];
    let t1 = traj.times[traj.len() - 1].max(t0 + f64::EPSILON);
    let finite = series.iter().flatten().copied().filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        hi = lo + 1.0;
    }
    let x = |t: f64| MARGIN + (t - t0) / (t1 - t0) * (WIDTH - 2.0 * MARGIN);
    let y = |v: f64| HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);
    let stride = traj.len().div_ceil(MAX_POINTS).max(1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black" stroke-width="1"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for (label, vx, vy, anchor) in [
        (format!("{t0:.3}"), MARGIN, HEIGHT - MARGIN + 18.0, "start"),
        (format!("{t1:.3}"), WIDTH - MARGIN, HEIGHT - MARGIN + 18.0, "end"),
        (format!("{lo:.4e}"), MARGIN - 4.0, HEIGHT - MARGIN, "end"),
        (format!("{hi:.4e}"), MARGIN - 4.0, MARGIN + 4.0, "end"),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{vx}" y="{vy}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{label}</text>"#
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">t</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    for (n, (name, values)) in columns.iter().zip(&series).enumerate() {
        let color = COLORS[n % COLORS.len()];
        let mut d = String::new();
        let mut pen_down = false;
        let mut k = 0;
        while k < traj.len() {
            let v = values[k];
            if v.is_finite() {
                let _ = write!(
                    d,
                    "{}{:.2} {:.2} ",
                    if pen_down { "L" } else { "M" },
                    x(traj.times[k]),
                    y(v)
                );
                pen_down = true;
            } else {
                pen_down = false;
            }
            k = if k + 1 < traj.len() && k + stride >= traj.len() {
                traj.len() - 1
            } else {
                k + stride
            };
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            d.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{name}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 16.0 * n as f64
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(traj: &Trajectory, columns: &[&str], path: &Path) -> Result<()> {
    let svg = render_plot(traj, columns)?;
    let mut f = create(path)?;
    f.write_all(svg.as_bytes()).map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let times: Vec<f64> = (0..5).map(|k| k as f64 * 0.5).collect();
        Trajectory {
            error_dim: 2,
            errors: vec![1.0, -2.0, 0.5, -1.0, 0.25, -0.5, 0.0, 0.0, 0.0, 0.0],
            controls: vec![0.0; 10],
            norm_inf: vec![2.0, 1.0, 0.5, 0.0, 0.0],
            norm_2: vec![5f64.sqrt(), 1.25f64.sqrt(), 0.3125f64.sqrt(), 0.0, 0.0],
            in_cts: vec![true, true, false, true, true],
            gains: vec![Some((0.0, 0.1)); 5],
            times,
            final_state: vec![],
            steps: 4,
            delay_bound: 0.5,
        }
    }

    #[test]
    fn trajectory_csv_layout() {
        let mut buf = Vec::new();
        write_trajectory(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,e1,e2,norm_inf,norm_2,in_cts,alpha3,alpha4");
        assert_eq!(lines.next().unwrap(), format!("0,1,-2,2,{},1,0,0.1", 5f64.sqrt()));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn missing_gains_leave_empty_cells() {
        let mut t = sample();
        t.gains = vec![None; 5];
        let mut buf = Vec::new();
        write_trajectory(&t, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .ends_with(",1,,"));
        assert!(column(&t, "alpha3").is_err());
    }

    #[test]
    fn plot_is_deterministic_and_checks_input() {
        let a = render_plot(&sample(), &["norm_2", "e1"]).unwrap();
        let b = render_plot(&sample(), &["norm_2", "e1"]).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert_eq!(a.matches("<path").count(), 3);
        assert!(render_plot(&Trajectory::default(), &["norm_2"]).is_err());
        assert!(render_plot(&sample(), &["e3"]).is_err());
        assert!(render_plot(&sample(), &[]).is_err());
    }

    #[test]
    fn files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/run.svg");
        emit_plot(&sample(), &["norm_inf"], &p).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().contains("norm_inf"));
        write_trajectory_file(&sample(), &dir.path().join("run.csv")).unwrap();
    }
}
