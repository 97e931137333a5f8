//! Deterministic top-down 2D rendering.
//!
//! Layout: a gutter around the board holds the role label (top), row labels
//! (left) and column labels (bottom). Geometry uses only IEEE add/multiply on
//! fixed constants so identical inputs give identical bytes everywhere.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::font::{glyph, text_width, GLYPH_H};
use super::{Modality, ObservationRole};
use crate::puzzle::{Color, Configuration, Palette, Shape};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("no glyph defined for shape `{0}`")]
    MissingGlyph(Shape),
    #[error("no RGB value defined for color `{0}`")]
    MissingColor(Color),
    #[error("cell_pixels must be at least 16, got {0}")]
    CellTooSmall(u32),
    #[error("modality {0} cannot be rendered as a 2D image")]
    UnsupportedModality(Modality),
    #[error("png encoding failed: {0}")]
    Encode(String),
}

/// 2D stand-in for each 3D shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Glyph {
    Square,
    Triangle,
    Circle,
    CappedCircle,
    NarrowTriangle,
    Pentagon,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlyphTable(pub BTreeMap<Shape, Glyph>);

impl Default for GlyphTable {
    fn default() -> Self {
        GlyphTable(
            [
                (Shape::Cube, Glyph::Square),
                (Shape::Pyramid, Glyph::Triangle),
                (Shape::Sphere, Glyph::Circle),
                (Shape::Cylinder, Glyph::CappedCircle),
                (Shape::Cone, Glyph::NarrowTriangle),
                (Shape::Prism, Glyph::Pentagon),
            ]
            .into_iter()
            .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderOptions {
    pub modality: Modality,
    pub show_coordinate_labels: bool,
    pub cell_pixels: u32,
    pub gutter_pixels: u32,
    pub label_free_tiles: bool,
    pub palette: Palette,
    pub glyphs: GlyphTable,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            modality: Modality::Vision2d,
            show_coordinate_labels: true,
            cell_pixels: 64,
            gutter_pixels: 32,
            label_free_tiles: true,
            palette: Palette::default(),
            glyphs: GlyphTable::default(),
        }
    }
}

impl RenderOptions {
    pub fn text() -> Self {
        RenderOptions { modality: Modality::Text, ..Default::default() }
    }
}

const BOARD_BG: [u8; 3] = [245, 245, 245];
const GRID_LINE: [u8; 3] = [70, 70, 70];
const INK: [u8; 3] = [20, 20, 20];
const FREE_LABEL: [u8; 3] = [160, 160, 160];
const OUTLINE: [u8; 3] = [30, 30, 30];

/// Raw RGB8 pixels, row-major from the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Raster {
    fn new(width: u32, height: u32, fill: [u8; 3]) -> Self {
        let pixels = fill.iter().copied().cycle().take((width * height * 3) as usize).collect();
        Raster { width, height, pixels }
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = ((y as u32 * self.width + x as u32) * 3) as usize;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    fn fill_rect(&mut self, x0: i64, y0: i64, w: i64, h: i64, rgb: [u8; 3]) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                self.put(x, y, rgb);
            }
        }
    }

    /// Fills every pixel whose center satisfies `inside`, within a bounding box.
    fn fill_where(&mut self, bbox: (i64, i64, i64, i64), rgb: [u8; 3], inside: impl Fn(f64, f64) -> bool) {
        let (x0, y0, x1, y1) = bbox;
        for y in y0..=y1 {
            for x in x0..=x1 {
                if inside(x as f64 + 0.5, y as f64 + 0.5) {
                    self.put(x, y, rgb);
                }
            }
        }
    }

    fn text(&mut self, s: &str, x: i64, y: i64, scale: usize, rgb: [u8; 3]) {
        let mut cx = x;
        for ch in s.chars() {
            if let Some(rows) = glyph(ch) {
                for (r, bits) in rows.iter().enumerate() {
                    for c in 0..5 {
                        if bits & (1 << (4 - c)) != 0 {
                            self.fill_rect(cx + (c * scale) as i64, y + (r * scale) as i64, scale as i64, scale as i64, rgb);
                        }
                    }
                }
            }
            cx += (6 * scale) as i64;
        }
    }

    fn text_centered(&mut self, s: &str, cx: i64, cy: i64, scale: usize, rgb: [u8; 3]) {
        let w = text_width(s, scale) as i64;
        let h = (GLYPH_H * scale) as i64;
        self.text(s, cx - w / 2, cy - h / 2, scale, rgb);
    }
}

/// Regular pentagon vertices on the unit circle, apex up (y grows downward).
const PENTAGON: [(f64, f64); 5] = [
    (0.0, -1.0),
    (0.951_056_516_3, -0.309_016_994_4),
    (0.587_785_252_3, 0.809_016_994_4),
    (-0.587_785_252_3, 0.809_016_994_4),
    (-0.951_056_516_3, -0.309_016_994_4),
];

fn in_convex(poly: &[(f64, f64)], px: f64, py: f64) -> bool {
    // clockwise in screen space: all cross products non-negative
    let n = poly.len();
    (0..n).all(|i| {
        let (ax, ay) = poly[i];
        let (bx, by) = poly[(i + 1) % n];
        (bx - ax) * (py - ay) - (by - ay) * (px - ax) >= 0.0
    })
}

fn draw_glyph(img: &mut Raster, glyph: Glyph, cx: f64, cy: f64, r: f64, rgb: [u8; 3]) {
    let bbox = ((cx - r - 2.0) as i64, (cy - r - 2.0) as i64, (cx + r + 2.0) as i64, (cy + r + 2.0) as i64);
    match glyph {
        Glyph::Square => img.fill_where(bbox, rgb, |x, y| (x - cx).abs() <= r && (y - cy).abs() <= r),
        Glyph::Circle => img.fill_where(bbox, rgb, |x, y| (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r),
        Glyph::Triangle | Glyph::NarrowTriangle => {
            let half = if glyph == Glyph::Triangle { r } else { 0.5 * r };
            let poly = [(cx, cy - r), (cx + half, cy + r), (cx - half, cy + r)];
            img.fill_where(bbox, rgb, |x, y| in_convex(&poly, x, y));
        }
        Glyph::Pentagon => {
            let poly: Vec<(f64, f64)> = PENTAGON.iter().map(|&(dx, dy)| (cx + dx * r, cy + dy * r)).collect();
            img.fill_where(bbox, rgb, |x, y| in_convex(&poly, x, y));
        }
        Glyph::CappedCircle => {
            let rc = 0.75 * r;
            let bar = 0.35 * r;
            img.fill_where(bbox, rgb, |x, y| {
                let in_circle = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= rc * rc;
                let in_bar = (x - cx).abs() <= bar && (y - cy).abs() <= r;
                in_circle || in_bar
            });
        }
    }
}

/// Renders to raw pixels. See [`render_2d`] for the PNG form.
pub fn render_raster(cfg: &Configuration, role: ObservationRole, opts: &RenderOptions) -> Result<Raster, RenderError> {
    if opts.cell_pixels < 16 {
        return Err(RenderError::CellTooSmall(opts.cell_pixels));
    }
    let board = cfg.board();
    let cell = opts.cell_pixels as i64;
    let gutter = opts.gutter_pixels as i64;
    let width = 2 * gutter + board.cols as i64 * cell;
    let height = 2 * gutter + board.rows as i64 * cell;
    let mut img = Raster::new(width as u32, height as u32, role.tint());

    // role label, top-left gutter
    if gutter >= 10 {
        let scale = if gutter >= 24 { 2 } else { 1 };
        img.text(role.label(), gutter, (gutter - (GLYPH_H * scale) as i64) / 2, scale, INK);
    }

    // board background and grid
    img.fill_rect(gutter, gutter, board.cols as i64 * cell, board.rows as i64 * cell, BOARD_BG);
    for i in 0..=board.cols as i64 {
        img.fill_rect(gutter + i * cell - if i == board.cols as i64 { 1 } else { 0 }, gutter, 1, board.rows as i64 * cell, GRID_LINE);
    }
    for j in 0..=board.rows as i64 {
        img.fill_rect(gutter, gutter + j * cell - if j == board.rows as i64 { 1 } else { 0 }, board.cols as i64 * cell, 1, GRID_LINE);
    }

    // top-left pixel of a cell; rows are drawn bottom-up
    let origin = |col: u8, row: u8| -> (i64, i64) {
        (gutter + col as i64 * cell, gutter + (board.rows as i64 - 1 - row as i64) * cell)
    };

    if opts.show_coordinate_labels && gutter >= 10 {
        let scale = if gutter >= 24 { 2 } else { 1 };
        for col in 0..board.cols {
            let (x, _) = origin(col, 0);
            let label = ((b'a' + col) as char).to_string();
            img.text_centered(&label, x + cell / 2, height - gutter / 2, scale, INK);
        }
        for row in 0..board.rows {
            let (_, y) = origin(0, row);
            img.text_centered(&(row as u32 + 1).to_string(), gutter / 2, y + cell / 2, scale, INK);
        }
    }

    if opts.show_coordinate_labels && opts.label_free_tiles {
        let scale = if cell >= 48 { 2 } else { 1 };
        for c in cfg.free_cells() {
            let (x, y) = origin(c.col, c.row);
            img.text_centered(&c.label(), x + cell / 2, y + cell / 2, scale, FREE_LABEL);
        }
    }

    let radius = cell as f64 * 0.34;
    for &(geom, coord) in cfg.entries() {
        let glyph = *opts.glyphs.0.get(&geom.shape).ok_or(RenderError::MissingGlyph(geom.shape))?;
        let rgb = opts.palette.rgb(geom.color).ok_or(RenderError::MissingColor(geom.color))?;
        let (x, y) = origin(coord.col, coord.row);
        let (cx, cy) = (x as f64 + cell as f64 / 2.0, y as f64 + cell as f64 / 2.0);
        draw_glyph(&mut img, glyph, cx, cy, radius + 2.0, OUTLINE);
        draw_glyph(&mut img, glyph, cx, cy, radius, rgb);
    }
    Ok(img)
}

/// Renders a PNG. Output bytes are a pure function of the inputs.
pub fn render_2d(cfg: &Configuration, role: ObservationRole, opts: &RenderOptions) -> Result<Vec<u8>, RenderError> {
    if opts.modality != Modality::Vision2d {
        return Err(RenderError::UnsupportedModality(opts.modality));
    }
    let raster = render_raster(cfg, role, opts)?;
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, raster.width, raster.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| RenderError::Encode(e.to_string()))?;
        writer.write_image_data(&raster.pixels).map_err(|e| RenderError::Encode(e.to_string()))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::parse_text_state;
    use crate::puzzle::BoardSpec;

    fn ten_geoms() -> Configuration {
        parse_text_state(
            "a4 red cube, b4 green sphere, c4 blue pyramid, d4 yellow cylinder, \
             a3 green cube, c3 red sphere, b2 yellow pyramid, d2 blue cylinder, \
             a1 blue cube, c1 yellow sphere",
            BoardSpec::new(4, 4).unwrap(),
        )
        .unwrap()
    }

    fn cell_center(opts: &RenderOptions, board: BoardSpec, col: u8, row: u8) -> (u32, u32) {
        let cell = opts.cell_pixels;
        let g = opts.gutter_pixels;
        (g + col as u32 * cell + cell / 2, g + (board.rows as u32 - 1 - row as u32) * cell + cell / 2)
    }

    #[test]
    fn png_bytes_are_deterministic_and_decodable() {
        let cfg = ten_geoms();
        let opts = RenderOptions::default();
        let a = render_2d(&cfg, ObservationRole::Active, &opts).unwrap();
        let b = render_2d(&cfg, ObservationRole::Active, &opts).unwrap();
        assert_eq!(a, b);
        let decoder = png::Decoder::new(std::io::Cursor::new(&a));
        let reader = decoder.read_info().unwrap();
        let info = reader.info();
        assert_eq!((info.width, info.height), (4 * 64 + 64, 4 * 64 + 64));
    }

    #[test]
    fn roles_differ_only_outside_the_board() {
        let cfg = ten_geoms();
        let opts = RenderOptions::default();
        let active = render_raster(&cfg, ObservationRole::Active, &opts).unwrap();
        let goal = render_raster(&cfg, ObservationRole::Goal, &opts).unwrap();
        let g = opts.gutter_pixels;
        let board_px = 4 * opts.cell_pixels;
        let mut differing = 0;
        for y in 0..active.height {
            for x in 0..active.width {
                if active.get(x, y) != goal.get(x, y) {
                    differing += 1;
                    let inside = x >= g && x < g + board_px && y >= g && y < g + board_px;
                    assert!(!inside, "pixel ({x},{y}) differs inside the board");
                }
            }
        }
        assert!(differing > 0);
        assert_eq!(active.get(0, 0), ObservationRole::Active.tint());
        assert_eq!(goal.get(0, 0), ObservationRole::Goal.tint());
    }

    #[test]
    fn glyph_centers_carry_the_geom_color() {
        let cfg = ten_geoms();
        let opts = RenderOptions::default();
        let img = render_raster(&cfg, ObservationRole::Goal, &opts).unwrap();
        for &(geom, coord) in cfg.entries() {
            let (x, y) = cell_center(&opts, cfg.board(), coord.col, coord.row);
            assert_eq!(img.get(x, y), opts.palette.rgb(geom.color).unwrap(), "{geom} at {coord}");
        }
        for free in cfg.free_cells() {
            let (x, y) = cell_center(&opts, cfg.board(), free.col, free.row);
            // free cells show either board background or label ink near the center
            let px = img.get(x, y);
            assert!(px == BOARD_BG || px == FREE_LABEL, "{free}: {px:?}");
        }
    }

    #[test]
    fn free_tile_labels_toggle() {
        let cfg = ten_geoms();
        let on = render_raster(&cfg, ObservationRole::Active, &RenderOptions::default()).unwrap();
        let off = render_raster(
            &cfg,
            ObservationRole::Active,
            &RenderOptions { label_free_tiles: false, ..Default::default() },
        )
        .unwrap();
        assert_ne!(on, off);
        let count = |img: &Raster| img.pixels.chunks(3).filter(|p| *p == FREE_LABEL).count();
        assert!(count(&on) > 0);
        assert_eq!(count(&off), 0);
    }

    #[test]
    fn shapes_render_distinctly() {
        let board = BoardSpec::new(3, 2).unwrap();
        let opts = RenderOptions { label_free_tiles: false, show_coordinate_labels: false, ..Default::default() };
        let mut masks = Vec::new();
        for shape in Shape::ALL {
            let cfg = parse_text_state(&format!("a1 red {shape}"), board).unwrap();
            let img = render_raster(&cfg, ObservationRole::Active, &opts).unwrap();
            let mask: Vec<bool> = img.pixels.chunks(3).map(|p| p == [255, 0, 0]).collect();
            assert!(mask.iter().any(|&m| m), "{shape} drew nothing");
            masks.push(mask);
        }
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                assert_ne!(masks[i], masks[j], "{} and {} look identical", Shape::ALL[i], Shape::ALL[j]);
            }
        }
    }

    #[test]
    fn missing_glyph_and_small_cells_are_errors() {
        let cfg = ten_geoms();
        let mut opts = RenderOptions::default();
        opts.glyphs.0.remove(&Shape::Cylinder);
        assert_eq!(
            render_2d(&cfg, ObservationRole::Active, &opts),
            Err(RenderError::MissingGlyph(Shape::Cylinder))
        );
        let small = RenderOptions { cell_pixels: 8, ..Default::default() };
        assert_eq!(render_2d(&cfg, ObservationRole::Active, &small), Err(RenderError::CellTooSmall(8)));
        assert!(matches!(
            render_2d(&cfg, ObservationRole::Active, &RenderOptions::text()),
            Err(RenderError::UnsupportedModality(Modality::Text))
        ));
    }
}
