//! SVG heatmaps and clustermaps, plus plot-ready CSV tables.
//!
//! Output is byte-deterministic for fixed inputs: no timestamps, no random
//! ids, fixed number formatting.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::clustering::ClusterModel;
use crate::error::{Error, Result};
use crate::metrics::{SimilarityMatrix, StabilityTable};
use crate::representation::TrajectoryRepresentation;
use crate::trajectory::Trajectory;

pub const WHITE: Rgb = Rgb(255, 255, 255);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }

    fn luminance(self) -> f64 {
        (0.299 * f64::from(self.0) + 0.587 * f64::from(self.1) + 0.114 * f64::from(self.2)) / 255.0
    }
}

/// Linear ramp from `low` at `min` to `high` at `max`. With `zero_is_white`,
/// a value of exactly zero renders white, which is not on the ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorRamp {
    pub low: Rgb,
    pub high: Rgb,
    pub min: f64,
    pub max: f64,
    pub zero_is_white: bool,
}

impl ColorRamp {
    /// Counts on `[1, max]`, zero white.
    pub fn counts(max: u32) -> Self {
        ColorRamp {
            low: Rgb(222, 235, 247),
            high: Rgb(8, 48, 107),
            min: 1.0,
            max: f64::from(max.max(1)),
            zero_is_white: true,
        }
    }

    /// Similarity scores on `[0, 1]`.
    pub fn unit() -> Self {
        ColorRamp {
            low: Rgb(255, 245, 235),
            high: Rgb(127, 39, 4),
            min: 0.0,
            max: 1.0,
            zero_is_white: false,
        }
    }

    pub fn color(&self, value: f64) -> Rgb {
        if self.zero_is_white && value == 0.0 {
            return WHITE;
        }
        let t = if self.max > self.min {
            ((value - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let mix = |a: u8, b: u8| (f64::from(a) + t * (f64::from(b) - f64::from(a))).round() as u8;
        Rgb(
            mix(self.low.0, self.high.0),
            mix(self.low.1, self.high.1),
            mix(self.low.2, self.high.2),
        )
    }
}

/// Everything needed to draw one trajectory heatmap.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSpec {
    /// `b x c` counts; rows are iterations.
    pub counts: Vec<Vec<u32>>,
    /// Centroid of each cluster in original coordinates, 2 decimals.
    pub centroid_labels: Vec<String>,
    pub title: String,
    pub ramp: ColorRamp,
}

impl HeatmapSpec {
    pub fn new(rep: &TrajectoryRepresentation, model: &ClusterModel) -> Result<Self> {
        if rep.clusters() != model.num_clusters() {
            return Err(Error::usage(format!(
                "representation has {} clusters, model has {}",
                rep.clusters(),
                model.num_clusters()
            )));
        }
        Ok(HeatmapSpec {
            counts: rep.matrix(),
            centroid_labels: model.raw_centroids().iter().map(|c| centroid_label(c)).collect(),
            title: format!("{} on {} (seed {})", rep.algorithm, rep.problem, rep.seed),
            ramp: ColorRamp::counts(rep.population() as u32),
        })
    }
}

/// `(x0,x1,...)` with two decimals.
pub fn centroid_label(coords: &[f64]) -> String {
    let parts: Vec<String> = coords.iter().map(|v| fmt2(*v)).collect();
    format!("({})", parts.join(","))
}

/// Two decimals without a negative zero.
fn fmt2(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const FONT: &str = "font-family=\"Helvetica, Arial, sans-serif\"";

pub fn heatmap_svg(spec: &HeatmapSpec) -> String {
    let rows = spec.counts.len();
    let cols = spec.counts.first().map_or(0, Vec::len);
    let (cell_w, cell_h) = (46.0, 16.0);
    let (left, top) = (70.0, 40.0);
    let label_space = 12.0 + 5.5 * spec.centroid_labels.iter().map(|l| l.len()).max().unwrap_or(0) as f64;
    let width = left + cell_w * cols as f64 + 20.0;
    let height = top + cell_h * rows as f64 + 20.0 + label_space;

    let mut svg = svg_open(width, height);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" {FONT} font-size="13" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" {FONT} font-size="11" text-anchor="middle" transform="rotate(-90 14 {:.1})">iteration</text>"#,
        top + cell_h * rows as f64 / 2.0,
        top + cell_h * rows as f64 / 2.0
    );
    for (i, row) in spec.counts.iter().enumerate() {
        let y = top + cell_h * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" {FONT} font-size="9" text-anchor="end">{i}</text>"#,
            left - 6.0,
            y + cell_h * 0.7
        );
        for (j, &count) in row.iter().enumerate() {
            let x = left + cell_w * j as f64;
            let fill = spec.ramp.color(f64::from(count));
            let _ = writeln!(
                svg,
                r##"<rect class="cell" x="{x:.1}" y="{y:.1}" width="{cell_w:.1}" height="{cell_h:.1}" fill="{}" stroke="#dddddd" stroke-width="0.5" data-count="{count}"/>"##,
                fill.hex()
            );
            let ink = if fill.luminance() < 0.5 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                svg,
                r#"<text class="count" x="{:.1}" y="{:.1}" {FONT} font-size="9" text-anchor="middle" fill="{ink}">{count}</text>"#,
                x + cell_w / 2.0,
                y + cell_h * 0.7
            );
        }
    }
    let base = top + cell_h * rows as f64 + 10.0;
    for (j, label) in spec.centroid_labels.iter().enumerate() {
        let x = left + cell_w * (j as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text class="centroid" x="{x:.1}" y="{base:.1}" {FONT} font-size="9" text-anchor="end" transform="rotate(-60 {x:.1} {base:.1})">{j} {}</text>"#,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn svg_open(width: f64, height: f64) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
    )
}

pub fn render_trajectory_heatmap(rep: &TrajectoryRepresentation, model: &ClusterModel, path: &Path) -> Result<()> {
    let spec = HeatmapSpec::new(rep, model)?;
    crate::io::write_file(path, heatmap_svg(&spec).as_bytes())
}

/// Annotated matrix with optional top dendrogram; `None` cells are blank.
fn matrix_svg(
    title: &str,
    row_labels: &[String],
    col_labels: &[String],
    values: &[Vec<Option<f64>>],
    dendrogram: Option<(&[usize], &[crate::metrics::Merge])>,
) -> String {
    let ramp = ColorRamp::unit();
    let (cell_w, cell_h) = (56.0, 24.0);
    let left = 16.0 + 6.5 * row_labels.iter().map(|l| l.len()).max().unwrap_or(0) as f64;
    let dendro_h = if dendrogram.is_some() { 70.0 } else { 0.0 };
    let top = 40.0 + dendro_h;
    let label_space = 16.0 + 5.5 * col_labels.iter().map(|l| l.len()).max().unwrap_or(0) as f64;
    let width = left + cell_w * col_labels.len() as f64 + 20.0;
    let height = top + cell_h * row_labels.len() as f64 + label_space;

    let mut svg = svg_open(width, height);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" {FONT} font-size="13" text-anchor="middle">{}</text>"#,
        width / 2.0,
        escape(title)
    );

    if let Some((order, merges)) = dendrogram {
        let n = order.len();
        let max_h = merges.iter().map(|m| m.distance).fold(0.0, f64::max).max(1e-12);
        let mut x = vec![0.0; n + merges.len()];
        let mut h = vec![0.0; n + merges.len()];
        for (pos, &leaf) in order.iter().enumerate() {
            x[leaf] = left + cell_w * (pos as f64 + 0.5);
        }
        let y_of = |d: f64| 36.0 + dendro_h * (1.0 - d / max_h);
        for (i, m) in merges.iter().enumerate() {
            let node = n + i;
            x[node] = (x[m.left] + x[m.right]) / 2.0;
            h[node] = m.distance;
            let y = y_of(m.distance);
            let _ = writeln!(
                svg,
                r##"<path class="dendrogram" d="M{:.1} {:.1} V{y:.1} H{:.1} V{:.1}" fill="none" stroke="#444444" stroke-width="1"/>"##,
                x[m.left],
                y_of(h[m.left]),
                x[m.right],
                y_of(h[m.right])
            );
        }
    }

    for (i, row) in values.iter().enumerate() {
        let y = top + cell_h * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" {FONT} font-size="10" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell_h * 0.65,
            escape(&row_labels[i])
        );
        for (j, v) in row.iter().enumerate() {
            let x = left + cell_w * j as f64;
            let (fill, text) = match v {
                Some(v) => (ramp.color(*v), fmt2(*v)),
                None => (WHITE, String::new()),
            };
            let _ = writeln!(
                svg,
                r##"<rect class="cell" x="{x:.1}" y="{y:.1}" width="{cell_w:.1}" height="{cell_h:.1}" fill="{}" stroke="#dddddd" stroke-width="0.5"/>"##,
                fill.hex()
            );
            let ink = if fill.luminance() < 0.5 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                svg,
                r#"<text class="value" x="{:.1}" y="{:.1}" {FONT} font-size="10" text-anchor="middle" fill="{ink}">{text}</text>"#,
                x + cell_w / 2.0,
                y + cell_h * 0.65
            );
        }
    }
    let base = top + cell_h * row_labels.len() as f64 + 10.0;
    for (j, label) in col_labels.iter().enumerate() {
        let x = left + cell_w * (j as f64 + 0.5);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{base:.1}" {FONT} font-size="10" text-anchor="end" transform="rotate(-45 {x:.1} {base:.1})">{}</text>"#,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Clustermap: rows and columns in dendrogram leaf order.
pub fn clustermap_svg(matrix: &SimilarityMatrix, title: &str) -> String {
    let (labels, values) = matrix.reordered();
    let values: Vec<Vec<Option<f64>>> = values.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
    matrix_svg(title, &labels, &labels, &values, Some((&matrix.leaf_order, &matrix.merges)))
}

pub fn render_similarity_clustermap(matrix: &SimilarityMatrix, path: &Path) -> Result<()> {
    crate::io::write_file(path, clustermap_svg(matrix, "Algorithm similarity").as_bytes())
}

/// Problems down, algorithms across.
pub fn stability_svg(table: &StabilityTable, title: &str) -> String {
    matrix_svg(title, &table.problems, &table.algorithms, &table.scores, None)
}

pub fn render_stability_heatmap(table: &StabilityTable, path: &Path) -> Result<()> {
    crate::io::write_file(path, stability_svg(table, "Algorithm stability per problem").as_bytes())
}

/// A labelled numeric table: first column holds row labels, the rest are
/// numbers (empty cells are missing values).
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub label_column: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

pub trait ToPlotTable {
    fn to_plot_table(&self) -> PlotTable;
}

impl PlotTable {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.label_column.clone()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(|e| Error::usage(e.to_string()))?;
        for (label, values) in &self.rows {
            let mut row = vec![label.clone()];
            row.extend(values.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&row).map_err(|e| Error::usage(e.to_string()))?;
        }
        w.into_inner().map_err(|e| Error::usage(e.to_string()))
    }

    pub fn from_csv<R: Read>(input: R, name: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
        let mut records = reader.records();
        let parse_err = |line: u64, message: String| Error::Parse {
            path: name.to_string(),
            line,
            message,
        };
        let header = match records.next() {
            Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
            None => return Err(parse_err(1, "missing header".into())),
        };
        if header.is_empty() {
            return Err(parse_err(1, "missing header".into()));
        }
        let mut table = PlotTable {
            label_column: header[0].to_string(),
            columns: header.iter().skip(1).map(str::to_string).collect(),
            rows: Vec::new(),
        };
        for record in records {
            let record = record.map_err(|e| parse_err(0, e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            if record.len() != header.len() {
                return Err(parse_err(line, format!("expected {} fields, found {}", header.len(), record.len())));
            }
            let values = record
                .iter()
                .skip(1)
                .map(|s| {
                    let s = s.trim();
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        s.parse::<f64>()
                            .map(Some)
                            .map_err(|_| parse_err(line, format!("`{s}` is not a number")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            table.rows.push((record[0].to_string(), values));
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(file, &path.display().to_string())
    }

    /// Interpret as a square similarity matrix.
    pub fn to_similarity_matrix(&self) -> Result<SimilarityMatrix> {
        let labels: Vec<String> = self.rows.iter().map(|r| r.0.clone()).collect();
        if labels != self.columns {
            return Err(Error::usage("similarity CSV must have matching row and column labels"));
        }
        let values = self
            .rows
            .iter()
            .map(|(_, r)| r.iter().map(|v| v.ok_or_else(|| Error::usage("similarity CSV has an empty cell"))).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        SimilarityMatrix::from_values(labels, values)
    }

    pub fn to_stability_table(&self) -> StabilityTable {
        StabilityTable {
            problems: self.rows.iter().map(|r| r.0.clone()).collect(),
            algorithms: self.columns.clone(),
            scores: self.rows.iter().map(|r| r.1.clone()).collect(),
        }
    }

    /// Interpret as heatmap counts (iterations down, clusters across).
    pub fn to_counts(&self) -> Result<Vec<Vec<u32>>> {
        self.rows
            .iter()
            .map(|(_, r)| {
                r.iter()
                    .map(|v| match v {
                        Some(x) if *x >= 0.0 && x.fract() == 0.0 && *x <= f64::from(u32::MAX) => Ok(*x as u32),
                        _ => Err(Error::usage("count cells must be non-negative integers")),
                    })
                    .collect()
            })
            .collect()
    }
}

/// Write any plottable result as CSV.
pub fn dump_plot_csv<T: ToPlotTable + ?Sized>(value: &T, path: &Path) -> Result<()> {
    crate::io::write_file(path, &value.to_plot_table().to_csv()?)
}

impl ToPlotTable for TrajectoryRepresentation {
    fn to_plot_table(&self) -> PlotTable {
        PlotTable {
            label_column: "iteration".into(),
            columns: (0..self.clusters()).map(|j| format!("cluster_{j}")).collect(),
            rows: (0..self.iterations())
                .map(|i| (i.to_string(), self.row(i).iter().map(|&v| Some(f64::from(v))).collect()))
                .collect(),
        }
    }
}

impl ToPlotTable for SimilarityMatrix {
    fn to_plot_table(&self) -> PlotTable {
        PlotTable {
            label_column: "algorithm".into(),
            columns: self.algorithms.clone(),
            rows: self
                .algorithms
                .iter()
                .zip(&self.values)
                .map(|(a, r)| (a.clone(), r.iter().copied().map(Some).collect()))
                .collect(),
        }
    }
}

impl ToPlotTable for StabilityTable {
    fn to_plot_table(&self) -> PlotTable {
        PlotTable {
            label_column: "problem".into(),
            columns: self.algorithms.clone(),
            rows: self.problems.iter().cloned().zip(self.scores.iter().cloned()).collect(),
        }
    }
}

/// The last iteration of a set of trajectories, one row per solution,
/// labelled `algorithm/seed/slot`, for scatter plots over the landscape.
pub struct FinalPopulations<'a>(pub &'a [Trajectory]);

impl ToPlotTable for FinalPopulations<'_> {
    fn to_plot_table(&self) -> PlotTable {
        let d = self.0.first().map_or(0, Trajectory::dimension);
        let mut columns = vec!["fitness".to_string()];
        columns.extend((0..d).map(|j| format!("x{j}")));
        let mut rows = Vec::new();
        for t in self.0 {
            let last = t.iterations() - 1;
            for s in 0..t.population() {
                let mut values = vec![Some(t.iteration_fitness(last)[s])];
                values.extend(t.solution(last, s).iter().map(|&v| Some(v)));
                rows.push((format!("{}/{}/{s}", t.algorithm, t.seed), values));
            }
        }
        PlotTable {
            label_column: "run".into(),
            columns,
            rows,
        }
    }
}
