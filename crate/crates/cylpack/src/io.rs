//! On-disk formats: column files, result tables, run manifests, reference
//! curves, and the rolled-out SVG diagram.
//!
//! Column files are plain CSV with three `#` header lines; angles and
//! heights are written with 17 significant digits so read-back is
//! bit-exact. Result tables use shortest-round-trip float formatting.

use crate::analysis::{boundary_curve, phyllotactic_points, HelicalPeriod};
use crate::deposition::Column;
use crate::density::SweepRecord;
use crate::error::{Error, Result};
use crate::geometry::{DiameterRatio, SurfaceSite, BULK_BOUND};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Serializes a column to the text format.
pub fn column_to_string(col: &Column) -> String {
    let mut out = String::new();
    writeln!(out, "# d={:.16e}", col.ratio.get()).unwrap();
    writeln!(out, "# direction={}", col.direction).unwrap();
    writeln!(out, "# template_len={}", col.template_len).unwrap();
    writeln!(out, "index,phi_unwrapped,z").unwrap();
    for s in &col.sites {
        writeln!(out, "{},{:.16e},{:.16e}", s.index, s.phi, s.z).unwrap();
    }
    out
}

/// Writes a column file (see [`column_to_string`]).
pub fn write_column(col: &Column, path: &Path) -> Result<()> {
    fs::write(path, column_to_string(col))?;
    Ok(())
}

/// Reads a column file, strictly: the three header lines must appear in
/// order (older files without `template_len` are rejected), indices must be
/// consecutive from zero, and the ratio must be in range.
pub fn read_column(path: &Path) -> Result<Column> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let mut header_value = |key: &str| -> Result<(usize, String)> {
        let (no, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, 0, format!("missing header line '# {}=...'", key)))?;
        let prefix = format!("# {}=", key);
        match line.strip_prefix(&prefix) {
            Some(v) => Ok((no + 1, v.trim().to_string())),
            None => Err(parse_err(
                path,
                no + 1,
                format!("expected header '# {}=...', found '{}'", key, line),
            )),
        }
    };

    let (dl, dv) = header_value("d")?;
    let d: f64 = dv
        .parse()
        .map_err(|_| parse_err(path, dl, format!("bad diameter ratio '{}'", dv)))?;
    let ratio =
        DiameterRatio::new(d).map_err(|e| parse_err(path, dl, format!("{}", e)))?;

    let (dirl, dirv) = header_value("direction")?;
    let direction: i8 = dirv
        .parse()
        .map_err(|_| parse_err(path, dirl, format!("bad direction '{}'", dirv)))?;
    if direction != 1 && direction != -1 {
        return Err(parse_err(path, dirl, "direction must be +1 or -1"));
    }

    let (tl, tv) = header_value("template_len")?;
    let template_len: usize = tv
        .parse()
        .map_err(|_| parse_err(path, tl, format!("bad template_len '{}'", tv)))?;

    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, tl, "missing column header row"))?;
    if header.trim() != "index,phi_unwrapped,z" {
        return Err(parse_err(
            path,
            hl + 1,
            format!("expected 'index,phi_unwrapped,z', found '{}'", header),
        ));
    }

    let mut sites = Vec::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(path, no + 1, "expected 3 fields"));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(path, no + 1, "bad site index"))?;
        if index != sites.len() {
            return Err(parse_err(
                path,
                no + 1,
                format!("site index {} out of order (expected {})", index, sites.len()),
            ));
        }
        let phi: f64 = fields[1]
            .parse()
            .map_err(|_| parse_err(path, no + 1, "bad angle"))?;
        let z: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(path, no + 1, "bad height"))?;
        if !phi.is_finite() || !z.is_finite() {
            return Err(parse_err(path, no + 1, "non-finite coordinate"));
        }
        sites.push(SurfaceSite::new(index, phi, z));
    }
    if sites.is_empty() {
        return Err(parse_err(path, 0, "column file has no sites"));
    }
    if template_len > sites.len() {
        return Err(parse_err(
            path,
            tl,
            format!(
                "template_len {} exceeds the {} sites present",
                template_len,
                sites.len()
            ),
        ));
    }
    Ok(Column {
        ratio,
        sites,
        template_len,
        direction,
    })
}

/// Header of the sweep result table.
pub const RESULTS_HEADER: &str = "d,vf_max,dphi21,dz21,direction,label,l,m,n,transient_len";

/// One row of a result table, as parsed back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRecord {
    pub d: f64,
    pub vf_max: f64,
    pub dphi21: f64,
    pub dz21: Option<f64>,
    pub direction: i8,
    pub label: String,
    pub lmn: Option<(u32, u32, u32)>,
    pub transient_len: Option<usize>,
}

fn record_row(rec: &SweepRecord) -> String {
    let dz = rec
        .params
        .dz21
        .map(|v| v.to_string())
        .unwrap_or_default();
    let (l, m, n) = match rec.label.lmn() {
        Some(t) => (t.l.to_string(), t.m.to_string(), t.n.to_string()),
        None => (String::new(), String::new(), String::new()),
    };
    let transient = rec
        .transient_len
        .map(|v| v.to_string())
        .unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        rec.ratio.get(),
        rec.vf_max,
        rec.params.dphi21,
        dz,
        rec.params.direction,
        rec.label.token(),
        l,
        m,
        n,
        transient
    )
}

/// Appends records to a result table, writing the header first when the
/// file does not exist yet (or is empty).
pub fn append_records(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let need_header = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    let mut buf = String::new();
    if need_header {
        buf.push_str(RESULTS_HEADER);
        buf.push('\n');
    }
    for rec in records {
        buf.push_str(&record_row(rec));
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())?;
    Ok(())
}

/// Reads a result table back.
pub fn read_records(path: &Path) -> Result<Vec<CsvRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if no == 0 {
            if line.trim() != RESULTS_HEADER {
                return Err(parse_err(
                    path,
                    1,
                    format!("expected header '{}'", RESULTS_HEADER),
                ));
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(parse_err(path, no + 1, "expected 10 fields"));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| parse_err(path, no + 1, format!("bad {} '{}'", what, s)))
        };
        let opt_num = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s, what).map(Some)
            }
        };
        let lmn = match (f[6].is_empty(), f[7].is_empty(), f[8].is_empty()) {
            (true, true, true) => None,
            (false, false, false) => {
                let p = |s: &str| -> Result<u32> {
                    s.parse()
                        .map_err(|_| parse_err(path, no + 1, format!("bad lattice index '{}'", s)))
                };
                Some((p(f[6])?, p(f[7])?, p(f[8])?))
            }
            _ => return Err(parse_err(path, no + 1, "partial l,m,n triple")),
        };
        out.push(CsvRecord {
            d: num(f[0], "diameter")?,
            vf_max: num(f[1], "volume fraction")?,
            dphi21: num(f[2], "dphi21")?,
            dz21: opt_num(f[3], "dz21")?,
            direction: f[4]
                .parse()
                .map_err(|_| parse_err(path, no + 1, "bad direction"))?,
            label: f[5].to_string(),
            lmn,
            transient_len: if f[9].is_empty() {
                None
            } else {
                Some(
                    f[9].parse()
                        .map_err(|_| parse_err(path, no + 1, "bad transient length"))?,
                )
            },
        });
    }
    Ok(out)
}

/// Sidecar describing a (possibly resumable) diameter sweep run: everything
/// needed to reproduce the table it sits next to.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub d_lo: f64,
    pub d_hi: f64,
    pub step: f64,
    pub dphi_steps: usize,
    pub dz_steps: usize,
    pub refine_rounds: usize,
    pub target_length: f64,
    pub scan_grid: usize,
    pub contact_tol: f64,
    pub degeneracy_tol: f64,
    pub group_size: usize,
    /// Ordering rule applied to degenerate optima, recorded for
    /// reproducibility audits.
    pub tie_break: String,
    pub created_unix: u64,
}

impl RunManifest {
    /// Path of the manifest sitting next to a checkpoint table.
    pub fn sidecar_path(checkpoint: &Path) -> std::path::PathBuf {
        let mut os = checkpoint.as_os_str().to_os_string();
        os.push(".manifest.json");
        std::path::PathBuf::from(os)
    }
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::InvalidParameter(format!("manifest serialization: {}", e)))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, 0, format!("bad manifest: {}", e)))
}

/// A published density curve to compare against: `(d, vf)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCurve {
    pub points: Vec<(f64, f64)>,
}

/// Reads a two-column `d,vf` file (optional header line), validating that
/// ratios increase strictly and volume fractions are physical.
pub fn read_reference(path: &Path) -> Result<ReferenceCurve> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if no == 0 && t.parse::<f64>().is_err() && t.split(',').next().unwrap_or("").parse::<f64>().is_err() {
            continue; // header line
        }
        let f: Vec<&str> = t.split(',').collect();
        if f.len() < 2 {
            return Err(parse_err(path, no + 1, "expected 'd,vf'"));
        }
        let d: f64 = f[0]
            .parse()
            .map_err(|_| parse_err(path, no + 1, format!("bad diameter '{}'", f[0])))?;
        let vf: f64 = f[1]
            .parse()
            .map_err(|_| parse_err(path, no + 1, format!("bad volume fraction '{}'", f[1])))?;
        if !d.is_finite() || !vf.is_finite() || vf <= 0.0 || vf >= BULK_BOUND {
            return Err(parse_err(
                path,
                no + 1,
                format!("unphysical sample ({}, {})", d, vf),
            ));
        }
        if let Some(&(prev, _)) = points.last() {
            if d <= prev {
                return Err(parse_err(
                    path,
                    no + 1,
                    format!("diameters must increase strictly ({} after {})", d, prev),
                ));
            }
        }
        points.push((d, vf));
    }
    if points.is_empty() {
        return Err(parse_err(path, 0, "reference curve has no samples"));
    }
    Ok(ReferenceCurve { points })
}

/// One joined sample of a curve comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub d: f64,
    pub ours: f64,
    pub reference: f64,
    pub delta: f64,
}

/// Result of comparing two density curves on their common diameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub max_delta: f64,
    pub mean_delta: f64,
    pub tolerance: f64,
    /// Diameters where the deviation exceeds the tolerance — typically
    /// narrow neighborhoods of structural transitions.
    pub flagged: Vec<f64>,
}

/// Joins two curves on equal diameters (within `1e-9`) and reports the
/// deviations. Errors when the curves share no samples.
pub fn compare_curves(
    ours: &[(f64, f64)],
    reference: &[(f64, f64)],
    tolerance: f64,
) -> Result<CompareReport> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "comparison tolerance {} must be positive",
            tolerance
        )));
    }
    let mut rows = Vec::new();
    for &(d, vf) in ours {
        if let Some(&(_, rvf)) = reference.iter().find(|&&(rd, _)| (rd - d).abs() < 1e-9) {
            rows.push(CompareRow {
                d,
                ours: vf,
                reference: rvf,
                delta: vf - rvf,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::DisjointCurves);
    }
    let max_delta = rows.iter().map(|r| r.delta.abs()).fold(0.0f64, f64::max);
    let mean_delta = rows.iter().map(|r| r.delta.abs()).sum::<f64>() / rows.len() as f64;
    let flagged = rows
        .iter()
        .filter(|r| r.delta.abs() > tolerance)
        .map(|r| r.d)
        .collect();
    Ok(CompareReport {
        rows,
        max_delta,
        mean_delta,
        tolerance,
        flagged,
    })
}

/// Writes phyllotactic points as `s,z` CSV.
pub fn points_to_csv(col: &Column) -> String {
    let mut out = String::from("s,z\n");
    for p in phyllotactic_points(col) {
        writeln!(out, "{:.16e},{:.16e}", p.s, p.z).unwrap();
    }
    out
}

/// Renders the rolled-out diagram as a standalone SVG string.
///
/// Every site maps to a point in one `s`-period; around each point the
/// contact exclusion outline is drawn (three copies, shifted by one period
/// either way, so wrap-around tangencies are visible). A horizontal arrow
/// marks the wrap-around length `|V| = (D-1) pi`. Without a detected period
/// — or at `D = 1`, where the plane degenerates to a line — the outlines
/// and arrow are omitted and a warning is embedded instead. Output is a
/// pure function of the inputs, so repeated renders are byte-identical.
pub fn render_diagram(col: &Column, period: Option<&HelicalPeriod>) -> String {
    let span = col.ratio.span();
    let s_period = span * std::f64::consts::PI;
    let degraded = period.is_none() || s_period < 1e-9;
    let pts = phyllotactic_points(col);

    let (z_lo, z_hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
        (a.0.min(p.z), a.1.max(p.z))
    });
    let (z_lo, z_hi) = if z_lo.is_finite() {
        (z_lo - 0.75, z_hi + 0.75)
    } else {
        (0.0, 1.0)
    };

    let margin = 46.0;
    let plot_w = 640.0;
    let sx = if s_period > 1e-9 {
        plot_w / s_period
    } else {
        1.0
    };
    let plot_h = ((z_hi - z_lo) * sx).max(120.0);
    let width = plot_w + 2.0 * margin;
    let height = plot_h + 2.0 * margin + 28.0;
    let x = |s: f64| margin + s * sx;
    let y = |z: f64| margin + (z_hi - z) * sx;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {:.0} {:.0}" font-family="sans-serif" font-size="13">"#,
        width, height
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r##"<text x="{:.1}" y="24" fill="#222">rolled-out packing, D = {:.4}</text>"##,
        margin,
        col.ratio.get()
    )
    .unwrap();
    writeln!(
        svg,
        r#"<defs><clipPath id="plot"><rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}"/></clipPath></defs>"#,
        margin, margin, plot_w, plot_h
    )
    .unwrap();

    if degraded {
        writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" fill="#a33">no helical period detected; plotting bare sites</text>"##,
            margin,
            height - 10.0
        )
        .unwrap();
    } else {
        // Period arrow under the plot.
        let ya = height - 16.0;
        writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#a33" stroke-width="1.5"/>"##,
            x(0.0),
            ya,
            x(s_period),
            ya
        )
        .unwrap();
        for (tip, dir) in [(x(0.0), 1.0), (x(s_period), -1.0)] {
            writeln!(
                svg,
                r##"<path d="M {:.1} {:.1} l {:.1} -4 l 0 8 z" fill="#a33"/>"##,
                tip,
                ya,
                6.0 * dir
            )
            .unwrap();
        }
        writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" fill="#a33">|V| = {:.4}</text>"##,
            x(0.0) + 8.0,
            ya - 6.0,
            s_period
        )
        .unwrap();
    }

    writeln!(svg, r#"<g clip-path="url(#plot)">"#).unwrap();
    if !degraded {
        let outline = boundary_curve(col.ratio, 72);
        for p in &pts {
            for shift in [-s_period, 0.0, s_period] {
                let mut path = String::new();
                for (k, &(ds, dz)) in outline.iter().enumerate() {
                    let cmd = if k == 0 { 'M' } else { 'L' };
                    write!(
                        path,
                        "{} {:.4} {:.4} ",
                        cmd,
                        x(p.s + shift + ds),
                        y(p.z + dz)
                    )
                    .unwrap();
                }
                writeln!(
                    svg,
                    r##"<path d="{}Z" fill="#e9eef6" stroke="#8899aa" stroke-width="0.6"/>"##,
                    path
                )
                .unwrap();
            }
        }
    }
    for p in &pts {
        writeln!(
            svg,
            r##"<circle cx="{:.4}" cy="{:.4}" r="3" fill="#1f6feb"/>"##,
            x(p.s),
            y(p.z)
        )
        .unwrap();
    }
    writeln!(svg, "</g>").unwrap();
    writeln!(
        svg,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        margin, margin, plot_w, plot_h
    )
    .unwrap();
    writeln!(
        svg,
        r##"<text x="{:.1}" y="{:.1}" fill="#222">s mod |V|</text>"##,
        margin + plot_w / 2.0 - 30.0,
        margin + plot_h + 18.0
    )
    .unwrap();
    writeln!(
        svg,
        r##"<text x="8" y="{:.1}" fill="#222">z</text>"##,
        margin + plot_h / 2.0
    )
    .unwrap();
    writeln!(svg, "</svg>").unwrap();
    svg
}

/// Writes arbitrary text to a file.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deposition::{run_deposition, DepositionConfig, TemplateParams};
    use std::f64::consts::PI;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "cylpack-io-test-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn sample_column() -> Column {
        let p = TemplateParams::new(PI, None, 1).unwrap();
        let cfg = DepositionConfig {
            target_length: 11.0,
            scan_grid: 256,
            ..DepositionConfig::default()
        };
        run_deposition(DiameterRatio::new(1.6).unwrap(), &p, &cfg).unwrap()
    }

    #[test]
    fn column_round_trip_is_bit_exact() {
        let dir = tmpdir();
        let col = sample_column();
        let path = dir.join("col.csv");
        write_column(&col, &path).unwrap();
        let back = read_column(&path).unwrap();
        assert_eq!(back.ratio.get(), col.ratio.get());
        assert_eq!(back.template_len, col.template_len);
        assert_eq!(back.direction, col.direction);
        assert_eq!(back.sites.len(), col.sites.len());
        for (a, b) in col.sites.iter().zip(back.sites.iter()) {
            assert_eq!(a.phi.to_bits(), b.phi.to_bits());
            assert_eq!(a.z.to_bits(), b.z.to_bits());
        }
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn column_reader_rejects_missing_template_len() {
        let dir = tmpdir();
        let path = dir.join("legacy.csv");
        fs::write(
            &path,
            "# d=1.5\n# direction=1\nindex,phi_unwrapped,z\n0,0.0,0.0\n",
        )
        .unwrap();
        let err = read_column(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("template_len"));
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn column_reader_rejects_shuffled_indices() {
        let dir = tmpdir();
        let path = dir.join("bad.csv");
        fs::write(
            &path,
            "# d=1.5\n# direction=1\n# template_len=1\nindex,phi_unwrapped,z\n1,0.0,0.0\n",
        )
        .unwrap();
        assert!(matches!(
            read_column(&path),
            Err(Error::Parse { .. })
        ));
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn reference_curve_validation() {
        let dir = tmpdir();
        let good = dir.join("ref.csv");
        fs::write(&good, "d,vf\n1.0,0.6\n1.1,0.5\n").unwrap();
        assert_eq!(read_reference(&good).unwrap().points.len(), 2);

        let bad = dir.join("bad.csv");
        fs::write(&bad, "1.2,0.5\n1.1,0.5\n").unwrap();
        assert!(read_reference(&bad).is_err()); // non-increasing

        let unphysical = dir.join("unphysical.csv");
        fs::write(&unphysical, "1.2,0.9\n").unwrap();
        assert!(read_reference(&unphysical).is_err());
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn compare_curves_basics() {
        let ours = [(1.0, 0.60), (1.1, 0.50), (1.2, 0.40)];
        let reference = [(1.1, 0.52), (1.2, 0.40)];
        let rep = compare_curves(&ours, &reference, 1e-3).unwrap();
        assert_eq!(rep.rows.len(), 2);
        assert!((rep.max_delta - 0.02).abs() < 1e-12);
        assert_eq!(rep.flagged, vec![1.1]);

        let disjoint = [(5.0, 0.1)];
        assert!(matches!(
            compare_curves(&ours, &disjoint, 1e-3),
            Err(Error::DisjointCurves)
        ));
    }

    #[test]
    fn diagram_renders_deterministically() {
        let col = sample_column();
        let report = crate::analysis::analyze_column(&col);
        let a = render_diagram(&col, report.period.as_ref());
        let b = render_diagram(&col, report.period.as_ref());
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.contains("|V|"));

        // Degraded mode: no period -> warning, no outlines.
        let c = render_diagram(&col, None);
        assert!(c.contains("no helical period"));
    }
}
