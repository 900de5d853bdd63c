//! Screenshot rasterizer.
//!
//! Visible widgets are drawn in observation order as filled rectangles with a
//! 1-px black border; a highlighted widget additionally gets a 3-px red frame
//! just outside its bounds, clipped to the canvas. Output is ASCII PPM (`P3`),
//! one pixel per line.

use thiserror::Error;

use super::bundle::{Bounds, ComponentId, ComponentType, CANVAS_HEIGHT, CANVAS_WIDTH};
use super::sim::ScreenObservation;
use crate::par::Execution;

pub type Rgb = [u8; 3];

pub const BACKGROUND: Rgb = [245, 245, 245];
pub const BORDER: Rgb = [0, 0, 0];
pub const HIGHLIGHT: Rgb = [234, 67, 53];
pub const HIGHLIGHT_WIDTH: u32 = 3;

pub fn fill_color(ctype: ComponentType) -> Rgb {
    match ctype {
        ComponentType::Button => [66, 133, 244],
        ComponentType::Checkbox => [52, 168, 83],
        ComponentType::Spinner => [251, 188, 5],
        ComponentType::TextField => [255, 255, 255],
        ComponentType::ListItem => [230, 230, 230],
        ComponentType::MenuItem => [171, 71, 188],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("highlighted component `{0}` is not a visible widget")]
    HighlightNotVisible(ComponentId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpmImage {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB.
    pub pixels: Vec<Rgb>,
}

impl PpmImage {
    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        self.to_ppm_with(Execution::default())
    }

    pub fn to_ppm_with(&self, exec: Execution) -> Vec<u8> {
        let rows: Vec<&[Rgb]> = self.pixels.chunks(self.width as usize).collect();
        let encoded = exec.map(&rows, |row| {
            let mut s = Vec::with_capacity(row.len() * 12);
            for [r, g, b] in row.iter() {
                push_decimal(&mut s, *r);
                s.push(b' ');
                push_decimal(&mut s, *g);
                s.push(b' ');
                push_decimal(&mut s, *b);
                s.push(b'\n');
            }
            s
        });
        let mut out = format!("P3\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(encoded.iter().map(Vec::len).sum());
        for row in encoded {
            out.extend_from_slice(&row);
        }
        out
    }
}

fn push_decimal(out: &mut Vec<u8>, v: u8) {
    if v >= 100 {
        out.push(b'0' + v / 100);
    }
    if v >= 10 {
        out.push(b'0' + (v / 10) % 10);
    }
    out.push(b'0' + v % 10);
}

struct Rect {
    x0: i64,
    y0: i64,
    x1: i64, // exclusive
    y1: i64,
}

impl Rect {
    fn of(b: Bounds) -> Self {
        Rect {
            x0: i64::from(b.x),
            y0: i64::from(b.y),
            x1: i64::from(b.x) + i64::from(b.w),
            y1: i64::from(b.y) + i64::from(b.h),
        }
    }

    fn grow(&self, by: i64) -> Self {
        Rect {
            x0: self.x0 - by,
            y0: self.y0 - by,
            x1: self.x1 + by,
            y1: self.y1 + by,
        }
    }

    fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    fn on_edge(&self, x: i64, y: i64) -> bool {
        x == self.x0 || x == self.x1 - 1 || y == self.y0 || y == self.y1 - 1
    }
}

pub fn render_screenshot(
    observation: &ScreenObservation,
    highlight: Option<&str>,
) -> Result<PpmImage, RenderError> {
    render_screenshot_with(observation, highlight, Execution::default())
}

pub fn render_screenshot_with(
    observation: &ScreenObservation,
    highlight: Option<&str>,
    exec: Execution,
) -> Result<PpmImage, RenderError> {
    let frame = match highlight {
        Some(id) => {
            let w = observation
                .widget(id)
                .filter(|w| w.visible)
                .ok_or_else(|| RenderError::HighlightNotVisible(ComponentId::new(id)))?;
            let inner = Rect::of(w.bounds);
            Some((inner.grow(i64::from(HIGHLIGHT_WIDTH)), inner))
        }
        None => None,
    };
    let boxes: Vec<(Rect, Rgb)> = observation
        .widgets
        .iter()
        .filter(|w| w.visible)
        .map(|w| (Rect::of(w.bounds), fill_color(w.ctype)))
        .collect();

    let width = CANVAS_WIDTH as usize;
    let mut pixels = vec![BACKGROUND; width * CANVAS_HEIGHT as usize];
    exec.for_each_chunk_mut(&mut pixels, width, |y, row| {
        let y = y as i64;
        for (rect, color) in &boxes {
            if y < rect.y0 || y >= rect.y1 {
                continue;
            }
            for x in rect.x0.max(0)..rect.x1.min(width as i64) {
                row[x as usize] = if rect.on_edge(x, y) { BORDER } else { *color };
            }
        }
        if let Some((outer, inner)) = &frame {
            if y >= outer.y0 && y < outer.y1 {
                for x in outer.x0.max(0)..outer.x1.min(width as i64) {
                    if !inner.contains(x, y) {
                        row[x as usize] = HIGHLIGHT;
                    }
                }
            }
        }
    });

    Ok(PpmImage {
        width: CANVAS_WIDTH,
        height: CANVAS_HEIGHT,
        pixels,
    })
}
