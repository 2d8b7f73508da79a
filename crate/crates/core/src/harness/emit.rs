use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::montecarlo::{McResultTable, McRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    SvgLineplot,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

/// Header `method,N,param,mse`, one line per row.
pub fn write_table_csv<W: Write>(table: &McResultTable, w: W) -> Result<()> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["method", "N", "param", "mse"])
        .map_err(csv_err)?;
    for r in &table.rows {
        wr.write_record([
            r.method.clone(),
            r.n.to_string(),
            r.param.clone(),
            format!("{:e}", r.mse),
        ])
        .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_table_csv<R: Read>(r: R) -> Result<McResultTable> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["method", "N", "param", "mse"] {
        return Err(Error::InvalidArgument(
            "expected header method,N,param,mse".into(),
        ));
    }
    let rows = rd
        .deserialize::<McRow>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(csv_err)?;
    Ok(McResultTable {
        rows,
        stats: Vec::new(),
    })
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];
const DASHES: [&str; 4] = ["", "6,4", "2,3", "8,3,2,3"];

/// Log-log MSE against N, one polyline per `(method, param)` series.
pub fn render_svg(table: &McResultTable) -> Result<String> {
    let pts: Vec<&McRow> = table
        .rows
        .iter()
        .filter(|r| r.mse > 0.0 && r.n > 0)
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptyTable);
    }
    let lx = |n: usize| (n as f64).log10();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for r in &pts {
        x0 = x0.min(lx(r.n));
        x1 = x1.max(lx(r.n));
        y0 = y0.min(r.mse.log10());
        y1 = y1.max(r.mse.log10());
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));

    let (w, h, ml, mr, mt, mb) = (900.0, 560.0, 80.0, 220.0, 30.0, 60.0);
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| mt + (y1 - y) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for d in x0 as i32..=x1 as i32 {
        let x = px(d as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##,
            py(y1),
            py(y0)
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"#,
            py(y0) + 18.0
        );
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(d as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##,
            px(x0),
            px(x1)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#,
            px(x0) - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">N</text>"#,
        (ml + w - mr) / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.1}" transform="rotate(-90 20 {:.1})" text-anchor="middle">MSE</text>"#,
        h / 2.0,
        h / 2.0
    );

    let mut methods: Vec<&str> = Vec::new();
    for r in &pts {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let params = table.params();
    let mut legend_y = mt + 10.0;
    for (mi, m) in methods.iter().enumerate() {
        for (pi, p) in params.iter().enumerate() {
            let mut series: Vec<&&McRow> = pts
                .iter()
                .filter(|r| r.method == *m && &r.param == p)
                .collect();
            if series.is_empty() {
                continue;
            }
            series.sort_by_key(|r| r.n);
            let coords: Vec<String> = series
                .iter()
                .map(|r| format!("{:.1},{:.1}", px(lx(r.n)), py(r.mse.log10())))
                .collect();
            let color = PALETTE[pi % PALETTE.len()];
            let dash = DASHES[mi % DASHES.len()];
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}" points="{}"><title>{m} {p}</title></polyline>"#,
                coords.join(" ")
            );
            let lx0 = w - mr + 15.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx0}" y1="{legend_y}" x2="{:.1}" y2="{legend_y}" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}"/>"#,
                lx0 + 30.0
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}">{m} {p}</text>"#,
                lx0 + 36.0,
                legend_y + 4.0
            );
            legend_y += 16.0;
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes the table to `path` in the chosen format.
pub fn emit_results(table: &McResultTable, format: OutputFormat, path: &Path) -> Result<()> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    match format {
        OutputFormat::Csv => write_table_csv(table, std::fs::File::create(path)?),
        OutputFormat::SvgLineplot => Ok(std::fs::write(path, render_svg(table)?)?),
    }
}
