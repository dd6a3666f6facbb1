//! Minimal PNG line and scatter plots.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::{Error, Result};

const W: u32 = 800;
const H: u32 = 500;
const MARGIN: f64 = 40.0;

pub struct Series<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub color: [u8; 3],
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(series: &[Series<'_>]) -> Frame {
        let mut f = Frame { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for s in series {
            for (&x, &y) in s.x.iter().zip(s.y) {
                if x.is_finite() && y.is_finite() {
                    f.x0 = f.x0.min(x);
                    f.x1 = f.x1.max(x);
                    f.y0 = f.y0.min(y);
                    f.y1 = f.y1.max(y);
                }
            }
        }
        if !(f.x1 > f.x0) {
            f.x1 = f.x0 + 1.0;
        }
        if !(f.y1 > f.y0) {
            f.y1 = f.y0 + 1.0;
        }
        f
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let u = MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W as f64 - 2.0 * MARGIN);
        let v = H as f64 - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H as f64 - 2.0 * MARGIN);
        (u, v)
    }
}

fn put(img: &mut RgbImage, x: f64, y: f64, c: [u8; 3]) {
    if x >= 0.0 && y >= 0.0 && (x as u32) < W && (y as u32) < H {
        img.put_pixel(x as u32, y as u32, Rgb(c));
    }
}

fn segment(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), c: [u8; 3]) {
    let n = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for i in 0..=n {
        let t = i as f64 / n as f64;
        put(img, a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1), c);
    }
}

fn canvas() -> RgbImage {
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let grey = [120, 120, 120];
    let (l, r, t, b) = (MARGIN, W as f64 - MARGIN, MARGIN, H as f64 - MARGIN);
    segment(&mut img, (l, b), (r, b), grey);
    segment(&mut img, (l, t), (l, b), grey);
    img
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn line_plot(path: &Path, series: &[Series<'_>]) -> Result<()> {
    let frame = Frame::fit(series);
    let mut img = canvas();
    for s in series {
        let pts: Vec<(f64, f64)> = s.x.iter().zip(s.y).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(&x, &y)| frame.px(x, y)).collect();
        for w in pts.windows(2) {
            segment(&mut img, w[0], w[1], s.color);
        }
    }
    save(&img, path)
}

pub fn scatter_plot(path: &Path, series: &[Series<'_>]) -> Result<()> {
    let frame = Frame::fit(series);
    let mut img = canvas();
    for s in series {
        for (&x, &y) in s.x.iter().zip(s.y) {
            let (u, v) = frame.px(x, y);
            for dx in -2..=2 {
                for dy in -2..=2 {
                    put(&mut img, u + dx as f64, v + dy as f64, s.color);
                }
            }
        }
    }
    save(&img, path)
}
