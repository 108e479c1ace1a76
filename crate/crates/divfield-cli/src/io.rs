//! CSV tables, PGM rasters and SVG figures.

use std::fmt::Write as _;
use std::path::Path;

use divfield::domain::GridDomain;
use divfield::grid::Point;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, GrayImage, ImageEncoder, Luma};

use crate::error::{CliError, CliResult};

/// Header plus string rows, written through the csv crate.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(|s| s.to_string()).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(|s| s.to_string()).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Shortest round-trip text of a float; `nan` and `inf` spelled out.
pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), num)
}

/// `ix,iy,x,y,value` over the true cells whose value is finite.
pub fn field_table(dom: &GridDomain, cells: impl Iterator<Item = (usize, f64)>) -> Table {
    let mut t = Table::new(&["ix", "iy", "x", "y", "value"]);
    for (c, v) in cells {
        if !dom.mask[c] || !v.is_finite() {
            continue;
        }
        let (i, j) = dom.grid.coords(c);
        let p = dom.grid.center(c);
        t.push(vec![i.to_string(), j.to_string(), num(p[0]), num(p[1]), num(v)]);
    }
    t
}

/// `ix,iy,x,y,u1,u2` over the true cells.
pub fn vector_table(dom: &GridDomain, u: &[[f64; 2]]) -> Table {
    let mut t = Table::new(&["ix", "iy", "x", "y", "u1", "u2"]);
    for c in dom.true_cells() {
        let (i, j) = dom.grid.coords(c);
        let p = dom.grid.center(c);
        t.push(vec![i.to_string(), j.to_string(), num(p[0]), num(p[1]), num(u[c][0]), num(u[c][1])]);
    }
    t
}

/// Image rows run top to bottom, so grid row `j` lands on image row `ny-1-j`.
fn to_image(dom: &GridDomain, pixel: impl Fn(usize) -> u8) -> GrayImage {
    let g = dom.grid;
    GrayImage::from_fn(g.nx as u32, g.ny as u32, |x, y| Luma([pixel(g.index(x as usize, g.ny - 1 - y as usize))]))
}

fn save_pgm(path: &Path, img: &GrayImage) -> CliResult<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    PnmEncoder::new(file).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary)).write_image(
        img.as_raw(),
        img.width(),
        img.height(),
        ExtendedColorType::L8,
    )?;
    Ok(())
}

/// Binary PGM (P5): 255 on true cells, 0 elsewhere.
pub fn write_mask_pgm(path: &Path, dom: &GridDomain) -> CliResult<()> {
    save_pgm(path, &to_image(dom, |c| if dom.mask[c] { 255 } else { 0 }))?;
    Ok(())
}

/// Reads a PGM mask back in grid order (row 0 at the bottom).
pub fn read_mask_pgm(path: &Path) -> CliResult<(usize, usize, Vec<bool>)> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut mask = vec![false; w * h];
    for j in 0..h {
        for i in 0..w {
            mask[j * w + i] = img.get_pixel(i as u32, (h - 1 - j) as u32)[0] >= 128;
        }
    }
    Ok((w, h, mask))
}

/// Log-scaled heat map of positive values; exterior and missing cells are 0.
pub fn write_log_heat_pgm(path: &Path, dom: &GridDomain, values: &[f64]) -> CliResult<()> {
    let logs: Vec<f64> = dom.true_cells().map(|c| values[c]).filter(|v| *v > 0.0 && v.is_finite()).map(f64::ln).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = to_image(dom, |c| {
        let v = values[c];
        if !dom.mask[c] || !(v > 0.0) || !v.is_finite() {
            0
        } else {
            (1.0 + 254.0 * (v.ln() - lo) / span).round().clamp(1.0, 255.0) as u8
        }
    });
    save_pgm(path, &img)
}

/// SVG 1.1 document in domain coordinates (y up).
pub struct Svg {
    body: String,
    min: Point,
    max: Point,
    scale: f64,
}

impl Svg {
    /// Canvas over `[min, max]`, `width` pixels wide.
    pub fn new(min: Point, max: Point, width: f64) -> Self {
        let scale = width / (max[0] - min[0]).max(f64::MIN_POSITIVE);
        Self { body: String::new(), min, max, scale }
    }

    pub fn for_domain(dom: &GridDomain, width: f64) -> Self {
        let b = dom.grid.bbox();
        Self::new(b.min, b.max, width)
    }

    fn px(&self, p: Point) -> (f64, f64) {
        ((p[0] - self.min[0]) * self.scale, (self.max[1] - p[1]) * self.scale)
    }

    /// True cells as row runs.
    pub fn mask(&mut self, dom: &GridDomain, fill: &str) {
        let g = dom.grid;
        for j in 0..g.ny {
            let mut i = 0;
            while i < g.nx {
                if !dom.mask[g.index(i, j)] {
                    i += 1;
                    continue;
                }
                let start = i;
                while i < g.nx && dom.mask[g.index(i, j)] {
                    i += 1;
                }
                let lo = [g.origin[0] + start as f64 * g.h, g.origin[1] + (j + 1) as f64 * g.h];
                self.rect(lo, (i - start) as f64 * g.h, g.h, fill, "none");
            }
        }
    }

    /// Axis-aligned rectangle with top-left corner `top_left` in domain units.
    pub fn rect(&mut self, top_left: Point, w: f64, h: f64, fill: &str, stroke: &str) {
        let (x, y) = self.px(top_left);
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{fill}" stroke="{stroke}" stroke-width="0.5"/>"#,
            w * self.scale,
            h * self.scale
        );
    }

    pub fn polyline(&mut self, pts: &[Point], stroke: &str, width: f64) {
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            coords.join(" ")
        );
    }

    pub fn circle(&mut self, c: Point, r_px: f64, fill: &str) {
        let (x, y) = self.px(c);
        let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{r_px}" fill="{fill}"/>"#);
    }

    /// Text anchored at pixel coordinates.
    pub fn label(&mut self, x: f64, y: f64, text: &str) {
        let _ = writeln!(self.body, r#"<text x="{x:.1}" y="{y:.1}" font-size="12" font-family="sans-serif">{text}</text>"#);
    }

    pub fn finish(self) -> String {
        let w = (self.max[0] - self.min[0]) * self.scale;
        let h = (self.max[1] - self.min[1]) * self.scale;
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.3} {h:.3}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }

    pub fn save(self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.finish())?;
        Ok(())
    }
}

/// Parses a float cell, accepting `n/a` as `None`.
pub fn parse_cell(table: &Table, file: &str, row: usize, col: &str) -> CliResult<Option<f64>> {
    let k = table
        .column(col)
        .ok_or_else(|| CliError::Artifact { file: file.into(), reason: format!("missing column {col}") })?;
    let s = table.rows[row]
        .get(k)
        .ok_or_else(|| CliError::Artifact { file: file.into(), reason: format!("short row {row}") })?;
    if s == "n/a" {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| CliError::Artifact { file: file.into(), reason: format!("bad number {s:?} in column {col}") })
}
