use crate::grid::RgbImage;

/// Channels: r, g, b (scaled to [0, 1]), column / width, row / height,
/// 3x3 mean and standard deviation of luma, |horizontal| and |vertical|
/// central-difference luma gradients. Borders use clamped neighbourhoods.
pub const PIXEL_FEATURE_DIM: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct PixelFeatureMap {
    rows: usize,
    cols: usize,
    dim: usize,
    data: Vec<f64>,
}

impl PixelFeatureMap {
    pub fn new(rows: usize, cols: usize, dim: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == rows * cols * dim).then_some(Self {
            rows,
            cols,
            dim,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    /// Features of pixel `i` in row-major order.
    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        self.pixel(row * self.cols + col)
    }
}

fn luma(px: [u8; 3]) -> f64 {
    (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64) / 255.0
}

pub fn pixel_features(image: &RgbImage) -> PixelFeatureMap {
    let (h, w) = image.shape();
    let lum: Vec<f64> = image.as_slice().iter().map(|&p| luma(p)).collect();
    let l = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        lum[r * w + c]
    };
    let mut data = Vec::with_capacity(h * w * PIXEL_FEATURE_DIM);
    for r in 0..h {
        for c in 0..w {
            let px = *image.get(r, c);
            let (ri, ci) = (r as isize, c as isize);
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let v = l(ri + dr, ci + dc);
                    sum += v;
                    sum2 += v * v;
                }
            }
            let mean = sum / 9.0;
            let var = (sum2 / 9.0 - mean * mean).max(0.0);
            data.extend_from_slice(&[
                px[0] as f64 / 255.0,
                px[1] as f64 / 255.0,
                px[2] as f64 / 255.0,
                c as f64 / w as f64,
                r as f64 / h as f64,
                mean,
                var.sqrt(),
                ((l(ri, ci + 1) - l(ri, ci - 1)) / 2.0).abs(),
                ((l(ri + 1, ci) - l(ri - 1, ci)) / 2.0).abs(),
            ]);
        }
    }
    PixelFeatureMap {
        rows: h,
        cols: w,
        dim: PIXEL_FEATURE_DIM,
        data,
    }
}
