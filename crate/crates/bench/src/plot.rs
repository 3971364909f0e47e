//! Shape-plot export. Every model is discretized onto the dataset's bins
//! and centered on its training rows, so overlaid series share one x grid.
//! Each feature gets a CSV (bin, position, value per series, training
//! density) and an SVG: bars for categorical and two-valued features, a
//! step line otherwise.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gamlab::data::FeatureBins;
use gamlab::{AdditiveModel, BinnedDataset, ShapeFunction};

use crate::error::Result;
use crate::manifest::write_atomic;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 96.0;
const TOP: f64 = 32.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Write `<feature>.csv` and `<feature>.svg` for every feature of `model`.
pub fn export_shapes(model: &AdditiveModel, data: &BinnedDataset, out_dir: &Path) -> Result<Vec<PathBuf>> {
    export_overlay(&[(model.algorithm.as_str(), model)], data, out_dir)
}

/// One CSV and one SVG per feature with a series per labeled model.
pub fn export_overlay(models: &[(&str, &AdditiveModel)], data: &BinnedDataset, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let prepared = models
        .iter()
        .map(|(label, m)| Ok((label.to_string(), prepare(m, data)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut written = Vec::new();
    for j in 0..data.n_features() {
        let fb = data.feature(j);
        let series: Vec<(String, Vec<f64>)> = prepared
            .iter()
            .map(|(label, m)| {
                let idx = m.feature_index(&fb.name).expect("discretized on the same spec");
                let ShapeFunction::Binned { values, .. } = &m.features[idx].shape else {
                    unreachable!("discretize yields binned shapes")
                };
                (label.clone(), values.clone())
            })
            .collect();
        let density = train_density(data, j);
        let stem = file_stem(&fb.name);
        let csv_path = out_dir.join(format!("{stem}.csv"));
        write_atomic(&csv_path, shape_csv(data, j, &series, &density)?.as_bytes())?;
        let svg_path = out_dir.join(format!("{stem}.svg"));
        write_atomic(&svg_path, shape_svg(data, j, &series).as_bytes())?;
        written.push(csv_path);
        written.push(svg_path);
    }
    Ok(written)
}

/// Discretize onto `data`'s bins and center on its training rows.
pub fn prepare(model: &AdditiveModel, data: &BinnedDataset) -> Result<AdditiveModel> {
    Ok(model.discretize(&data.spec)?.center(&data.raw, &data.split.train)?)
}

fn train_density(data: &BinnedDataset, j: usize) -> Vec<f64> {
    let mut counts = vec![0usize; data.feature(j).n_bins()];
    for &r in &data.split.train {
        counts[data.bins[j][r] as usize] += 1;
    }
    let n = data.split.train.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Bins shown: every value bin, plus the reserved bin when training rows
/// were missing.
fn shown_bins(data: &BinnedDataset, j: usize) -> Vec<usize> {
    let fb = data.feature(j);
    let mut bins: Vec<usize> = (0..fb.value_bins()).collect();
    if fb.missing_in_train {
        bins.push(fb.reserved_bin());
    }
    bins
}

fn shape_csv(data: &BinnedDataset, j: usize, series: &[(String, Vec<f64>)], density: &[f64]) -> Result<String> {
    let fb = data.feature(j);
    let mut w = csv::Writer::from_writer(Vec::new());
    let value_cols: Vec<String> = if series.len() == 1 {
        vec!["value".to_string()]
    } else {
        series.iter().map(|(l, _)| l.clone()).collect()
    };
    let lead: &[&str] = match fb.bins {
        FeatureBins::Numeric { .. } => &["bin", "lower", "upper", "x"],
        FeatureBins::Categorical { .. } => &["bin", "category"],
    };
    let header: Vec<&str> = lead
        .iter()
        .copied()
        .chain(value_cols.iter().map(String::as_str))
        .chain(["density"])
        .collect();
    w.write_record(&header).map_err(gamlab::Error::from)?;
    for b in shown_bins(data, j) {
        let mut rec: Vec<String> = vec![b.to_string()];
        let reserved = b == fb.reserved_bin();
        match &fb.bins {
            FeatureBins::Numeric { edges, representatives } => {
                if reserved {
                    rec.extend([String::new(), String::new(), "missing".into()]);
                } else {
                    let lower = b.checked_sub(1).map(|i| edges[i].to_string()).unwrap_or_default();
                    let upper = edges.get(b).map(f64::to_string).unwrap_or_default();
                    rec.extend([lower, upper, representatives[b].to_string()]);
                }
            }
            FeatureBins::Categorical { categories, .. } => {
                rec.push(if reserved {
                    "missing".into()
                } else {
                    categories[b].clone()
                });
            }
        }
        rec.extend(series.iter().map(|(_, v)| v[b].to_string()));
        rec.push(density[b].to_string());
        w.write_record(&rec).map_err(gamlab::Error::from)?;
    }
    let bytes = w.into_inner().expect("in-memory writer");
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn file_stem(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() || s.chars().all(|c| c == '.') {
        format!("feature_{s}")
    } else {
        s
    }
}

struct Frame {
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn new(series: &[(String, Vec<f64>)], bins: &[usize]) -> Self {
        let vals = series.iter().flat_map(|(_, v)| bins.iter().map(move |&b| v[b]));
        let (lo, hi) = vals.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
        Frame {
            y_lo: lo - pad,
            y_hi: hi + pad,
        }
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (self.y_hi - v) / (self.y_hi - self.y_lo) * (HEIGHT - TOP - BOTTOM)
    }
}

fn shape_svg(data: &BinnedDataset, j: usize, series: &[(String, Vec<f64>)]) -> String {
    let fb = data.feature(j);
    let bins = shown_bins(data, j);
    let frame = Frame::new(series, &bins);
    let plot_w = WIDTH - LEFT - RIGHT;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text class="title" x="{:.2}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&fb.name)
    );

    // y axis, ticks and the zero line
    let (top, bottom) = (TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{top}" x2="{LEFT}" y2="{bottom}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{bottom}" x2="{:.2}" y2="{bottom}" stroke="black"/>"#,
        LEFT + plot_w
    );
    for k in 0..=4 {
        let v = frame.y_lo + (frame.y_hi - frame.y_lo) * k as f64 / 4.0;
        let y = frame.y(v);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let y0 = frame.y(0.0);
    let _ = writeln!(
        s,
        r##"<line class="zero" x1="{LEFT}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        LEFT + plot_w
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" transform="rotate(-90 14 {:.2})" text-anchor="middle">log-odds</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0
    );

    let bars = fb.is_categorical() || fb.value_bins() <= 2;
    if bars {
        let slot = plot_w / bins.len() as f64;
        let bar_w = 0.8 * slot / series.len() as f64;
        for (i, &b) in bins.iter().enumerate() {
            let label = match &fb.bins {
                _ if b == fb.reserved_bin() => "missing".to_string(),
                FeatureBins::Categorical { categories, .. } => categories[b].clone(),
                FeatureBins::Numeric { representatives, .. } => representatives[b].to_string(),
            };
            let x0 = LEFT + i as f64 * slot;
            for (k, (_, v)) in series.iter().enumerate() {
                let (ya, yb) = (frame.y(v[b]), y0);
                let _ = writeln!(
                    s,
                    r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{bar_w:.2}" height="{:.2}" fill="{}"/>"#,
                    x0 + 0.1 * slot + k as f64 * bar_w,
                    ya.min(yb),
                    (ya - yb).abs(),
                    PALETTE[k % PALETTE.len()]
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                x0 + slot / 2.0,
                bottom + 16.0,
                escape(&label)
            );
        }
    } else {
        let FeatureBins::Numeric { edges, representatives } = &fb.bins else {
            unreachable!("categorical features use bars")
        };
        let lo = representatives[0];
        let hi = *representatives.last().expect("at least one bin");
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let x = |v: f64| LEFT + (v.clamp(lo, hi) - lo) / (hi - lo) * plot_w;
        for k in 0..=4 {
            let v = lo + (hi - lo) * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                x(v),
                bottom + 16.0,
                tick_label(v)
            );
        }
        let n = fb.value_bins();
        for (k, (_, v)) in series.iter().enumerate() {
            let mut d = String::new();
            for b in 0..n {
                let start = if b == 0 { lo } else { edges[b - 1] };
                let end = if b + 1 == n { hi } else { edges[b] };
                let y = frame.y(v[b]);
                if b == 0 {
                    let _ = write!(d, "M{:.2},{y:.2}", x(start));
                } else {
                    let _ = write!(d, " V{y:.2}");
                }
                let _ = write!(d, " H{:.2}", x(end));
            }
            let _ = writeln!(
                s,
                r#"<path class="series" d="{d}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                PALETTE[k % PALETTE.len()]
            );
            if fb.missing_in_train {
                let _ = writeln!(
                    s,
                    r#"<circle class="missing" cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                    LEFT + plot_w + 12.0,
                    frame.y(v[fb.reserved_bin()]),
                    PALETTE[k % PALETTE.len()]
                );
            }
        }
        if fb.missing_in_train {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">missing</text>"#,
                LEFT + plot_w + 12.0,
                bottom + 16.0
            );
        }
    }

    for (k, (label, _)) in series.iter().enumerate() {
        let y = TOP + 14.0 * k as f64;
        let lx = WIDTH - RIGHT + 28.0;
        let _ = writeln!(
            s,
            r#"<rect class="swatch" x="{lx:.2}" y="{:.2}" width="10" height="10" fill="{}"/>"#,
            y - 9.0,
            PALETTE[k % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            r#"<text class="legend" x="{:.2}" y="{y:.2}">{}</text>"#,
            lx + 14.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}
