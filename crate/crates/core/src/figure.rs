//! Spectrogram figures: one log-magnitude panel per clip, stacked
//! vertically, sharing a single dB color scale.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frontend::{stft, FrontendConfig};

/// Dynamic range shown below the joint maximum.
pub const DYNAMIC_RANGE_DB: f64 = 80.0;
/// Magnitude floor before taking logarithms.
const MAG_FLOOR: f64 = 1e-10;

const GLYPH_W: usize = 3;
const GLYPH_H: usize = 5;
const FONT_SCALE: usize = 2;
const LEFT: usize = 56;
const RIGHT: usize = 64;
const TITLE: usize = 18;
const BOTTOM: usize = 26;
const GAP: usize = 8;
const COLORBAR_W: usize = 14;
const BACKGROUND: [u8; 3] = [255, 255, 255];
const INK: [u8; 3] = [0, 0, 0];

/// Pixel rectangle of one panel's image area.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PanelRect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

/// Rendered RGB figure.
#[derive(Debug, Clone)]
pub struct Figure {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
    pub panels: Vec<PanelRect>,
    pub labels: Vec<String>,
    pub db_min: f64,
    pub db_max: f64,
    pub max_freq_hz: f64,
}

impl Figure {
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    fn put(&mut self, x: usize, y: usize, c: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = 3 * (y * self.width + x);
            self.rgb[i..i + 3].copy_from_slice(&c);
        }
    }

    fn text(&mut self, x: usize, y: usize, s: &str) {
        for (n, ch) in s.chars().enumerate() {
            let rows = glyph(ch);
            let gx = x + n * (GLYPH_W + 1) * FONT_SCALE;
            for (r, bits) in rows.iter().enumerate() {
                for c in 0..GLYPH_W {
                    if bits & (1 << (GLYPH_W - 1 - c)) != 0 {
                        for dy in 0..FONT_SCALE {
                            for dx in 0..FONT_SCALE {
                                self.put(gx + c * FONT_SCALE + dx, y + r * FONT_SCALE + dy, INK);
                            }
                        }
                    }
                }
            }
        }
    }

    fn text_width(s: &str) -> usize {
        s.chars().count() * (GLYPH_W + 1) * FONT_SCALE
    }

    /// Writes an 8-bit RGB PNG. Labels, the dB scale and the axis range are
    /// stored as tEXt chunks.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.add_text_chunk("Title".into(), "Spectrograms".into())?;
        for (i, label) in self.labels.iter().enumerate() {
            enc.add_text_chunk(format!("panel{i}"), label.clone())?;
        }
        enc.add_text_chunk("db_max".into(), format!("{}", self.db_max))?;
        enc.add_text_chunk("db_min".into(), format!("{}", self.db_min))?;
        enc.add_text_chunk("freq_axis_hz".into(), format!("0-{}", self.max_freq_hz))?;
        let mut writer = enc.write_header()?;
        writer.write_image_data(&self.rgb)?;
        writer.finish()?;
        Ok(())
    }
}

/// Sequential dark-to-bright color map on `[0, 1]`.
pub fn colormap(v: f64) -> [u8; 3] {
    const STOPS: [[f64; 3]; 8] = [
        [0.0, 0.0, 4.0],
        [40.0, 11.0, 84.0],
        [101.0, 21.0, 110.0],
        [159.0, 42.0, 99.0],
        [212.0, 72.0, 66.0],
        [245.0, 125.0, 21.0],
        [250.0, 193.0, 39.0],
        [252.0, 255.0, 164.0],
    ];
    let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let pos = v * (STOPS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(STOPS.len() - 2);
    let frac = pos - i as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (STOPS[i][c] + frac * (STOPS[i + 1][c] - STOPS[i][c])).round() as u8;
    }
    out
}

/// Normalized color-scale position of a dB value.
pub fn scale_position(db: f64, db_min: f64, db_max: f64) -> f64 {
    ((db - db_min) / (db_max - db_min)).clamp(0.0, 1.0)
}

/// `[frame][bin]` magnitudes in dB.
fn spectrogram_db(samples: &[f32], frontend: &FrontendConfig) -> Result<Vec<Vec<f64>>> {
    let spec = stft(samples, frontend)?;
    Ok((0..spec.frames())
        .map(|t| {
            spec.frame(t)
                .iter()
                .map(|c| 20.0 * c.norm().max(MAG_FLOOR).log10())
                .collect()
        })
        .collect())
}

/// Renders labeled clips into one figure. All clips must share the
/// front-end's sample rate; the frequency axis spans `0..fs/2`.
pub fn render_spectrogram_figure(clips: &[(String, Vec<f32>, u32)], frontend: &FrontendConfig) -> Result<Figure> {
    if clips.is_empty() {
        return Err(Error::invalid("a figure needs at least one clip"));
    }
    for (label, samples, rate) in clips {
        if *rate != frontend.sample_rate_hz {
            return Err(Error::invalid(format!(
                "{label}: {rate} Hz, figures are drawn at {} Hz",
                frontend.sample_rate_hz
            )));
        }
        if samples.is_empty() {
            return Err(Error::invalid(format!("{label}: empty clip")));
        }
    }
    let specs: Vec<Vec<Vec<f64>>> = clips
        .iter()
        .map(|(_, s, _)| spectrogram_db(s, frontend))
        .collect::<Result<_>>()?;
    let db_max = specs
        .iter()
        .flatten()
        .flatten()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let db_min = db_max - DYNAMIC_RANGE_DB;

    let bins = frontend.num_bins();
    let frames = specs.iter().map(|s| s.len()).max().unwrap_or(1);
    let panel_h = bins;
    let width = LEFT + frames + RIGHT;
    let height = clips.len() * (TITLE + panel_h + GAP) + BOTTOM;
    let mut fig = Figure {
        width,
        height,
        rgb: BACKGROUND.repeat(width * height),
        panels: Vec::new(),
        labels: clips.iter().map(|(l, _, _)| l.clone()).collect(),
        db_min,
        db_max,
        max_freq_hz: frontend.sample_rate_hz as f64 / 2.0,
    };
    let nyquist_khz = fig.max_freq_hz / 1000.0;
    let tick_khz = if nyquist_khz > 12.0 { 4.0 } else { 2.0 };

    for (p, spec) in specs.iter().enumerate() {
        let rect = PanelRect {
            x: LEFT,
            y: p * (TITLE + panel_h + GAP) + TITLE,
            width: spec.len(),
            height: panel_h,
        };
        let label = fig.labels[p].clone();
        fig.text(LEFT, rect.y - TITLE + 4, &label.to_uppercase());
        for (t, frame) in spec.iter().enumerate() {
            for (f, &db) in frame.iter().enumerate() {
                let c = colormap(scale_position(db, db_min, db_max));
                fig.put(rect.x + t, rect.y + panel_h - 1 - f, c);
            }
        }
        // frequency ticks and labels
        let mut khz = 0.0;
        while khz <= nyquist_khz + 1e-9 {
            let f = khz * 1000.0 / frontend.bin_hz();
            let y = rect.y + panel_h - 1 - (f.round() as usize).min(panel_h - 1);
            for dx in 1..=5 {
                fig.put(LEFT - dx, y, INK);
            }
            let s = format!("{khz:.0}K");
            let tw = Figure::text_width(&s);
            let ty = y.saturating_sub(GLYPH_H * FONT_SCALE / 2).clamp(rect.y.saturating_sub(2), rect.y + panel_h - GLYPH_H * FONT_SCALE);
            fig.text(LEFT - 8 - tw, ty, &s);
            khz += tick_khz;
        }
        for y in rect.y..rect.y + panel_h {
            fig.put(LEFT - 1, y, INK);
        }
        fig.panels.push(rect);
    }

    // seconds along the bottom
    let last = *fig.panels.last().expect("at least one panel");
    let axis_y = last.y + last.height;
    let frames_per_sec = frontend.sample_rate_hz as f64 / frontend.hop_samples as f64;
    let mut sec = 0usize;
    while (sec as f64 * frames_per_sec) < frames as f64 {
        let x = LEFT + (sec as f64 * frames_per_sec).round() as usize;
        for dy in 0..4 {
            fig.put(x, axis_y + dy, INK);
        }
        fig.text(x, axis_y + 6, &format!("{sec}S"));
        sec += 1;
    }

    // shared color bar with its bounds
    let bar_x = LEFT + frames + 10;
    let bar_top = fig.panels[0].y;
    let bar_h = last.y + last.height - bar_top;
    for i in 0..bar_h {
        let v = 1.0 - i as f64 / (bar_h - 1).max(1) as f64;
        let c = colormap(v);
        for dx in 0..COLORBAR_W {
            fig.put(bar_x + dx, bar_top + i, c);
        }
    }
    fig.text(bar_x, bar_top.saturating_sub(TITLE - 4), &format!("{:.0}", db_max));
    fig.text(bar_x, bar_top + bar_h + 6, &format!("{:.0}DB", db_min));
    Ok(fig)
}

/// Renders labeled 48 kHz clips and writes the PNG to `out_path`.
pub fn emit_spectrogram_figure(
    clips: &[(String, Vec<f32>, u32)],
    frontend: &FrontendConfig,
    out_path: impl AsRef<Path>,
) -> Result<Figure> {
    let fig = render_spectrogram_figure(clips, frontend)?;
    fig.save_png(out_path)?;
    Ok(fig)
}

fn glyph(c: char) -> [u8; 5] {
    match c.to_ascii_uppercase() {
        '0' => [7, 5, 5, 5, 7],
        '1' => [2, 6, 2, 2, 7],
        '2' => [7, 1, 7, 4, 7],
        '3' => [7, 1, 7, 1, 7],
        '4' => [5, 5, 7, 1, 1],
        '5' => [7, 4, 7, 1, 7],
        '6' => [7, 4, 7, 5, 7],
        '7' => [7, 1, 1, 2, 2],
        '8' => [7, 5, 7, 5, 7],
        '9' => [7, 5, 7, 1, 7],
        'A' => [2, 5, 7, 5, 5],
        'B' => [6, 5, 6, 5, 6],
        'C' => [3, 4, 4, 4, 3],
        'D' => [6, 5, 5, 5, 6],
        'E' => [7, 4, 6, 4, 7],
        'F' => [7, 4, 6, 4, 4],
        'G' => [3, 4, 5, 5, 3],
        'H' => [5, 5, 7, 5, 5],
        'I' => [7, 2, 2, 2, 7],
        'J' => [1, 1, 1, 5, 2],
        'K' => [5, 5, 6, 5, 5],
        'L' => [4, 4, 4, 4, 7],
        'M' => [5, 7, 7, 5, 5],
        'N' => [6, 5, 5, 5, 5],
        'O' => [2, 5, 5, 5, 2],
        'P' => [6, 5, 6, 4, 4],
        'Q' => [2, 5, 5, 6, 3],
        'R' => [6, 5, 6, 5, 5],
        'S' => [3, 4, 2, 1, 6],
        'T' => [7, 2, 2, 2, 2],
        'U' => [5, 5, 5, 5, 7],
        'V' => [5, 5, 5, 5, 2],
        'W' => [5, 5, 7, 7, 5],
        'X' => [5, 5, 2, 5, 5],
        'Y' => [5, 5, 2, 2, 2],
        'Z' => [7, 1, 2, 4, 7],
        ' ' => [0, 0, 0, 0, 0],
        '-' => [0, 0, 7, 0, 0],
        '+' => [0, 2, 7, 2, 0],
        '.' => [0, 0, 0, 0, 2],
        ':' => [0, 2, 0, 2, 0],
        '(' => [1, 2, 2, 2, 1],
        ')' => [4, 2, 2, 2, 4],
        '/' => [1, 1, 2, 4, 4],
        '_' => [0, 0, 0, 0, 7],
        _ => [7, 1, 2, 0, 2],
    }
}
