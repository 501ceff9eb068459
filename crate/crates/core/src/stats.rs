//! Box-window local statistics via integral images.

use ndarray::{Array2, Zip};

/// Default window side for the information-theoretic features.
pub const DEFAULT_WINDOW: usize = 9;

/// Summed-area table with a leading row and column of zeros, so
/// `sum(h, w)` is the total of the source.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    table: Array2<f64>,
}

impl IntegralImage {
    pub fn new(x: &Array2<f64>) -> Self {
        let (h, w) = x.dim();
        let mut table = Array2::zeros((h + 1, w + 1));
        for i in 0..h {
            let mut run = 0.0;
            for j in 0..w {
                run += x[[i, j]];
                table[[i + 1, j + 1]] = table[[i, j + 1]] + run;
            }
        }
        IntegralImage { table }
    }

    /// Source dimensions.
    pub fn source_dim(&self) -> (usize, usize) {
        let (h, w) = self.table.dim();
        (h - 1, w - 1)
    }

    pub fn table(&self) -> &Array2<f64> {
        &self.table
    }

    /// Sum over rows `r0..r1` and columns `c0..c1`.
    pub fn rect_sum(&self, r0: usize, c0: usize, r1: usize, c1: usize) -> f64 {
        let t = &self.table;
        t[[r1, c1]] - t[[r0, c1]] - t[[r1, c0]] + t[[r0, c0]]
    }
}

/// Sums over every `k`×`k` window whose top-left corner lies on the stride
/// grid. Output is `((h-k)/stride + 1) × ((w-k)/stride + 1)`.
pub fn window_sum(ii: &IntegralImage, k: usize, stride: usize) -> Array2<f64> {
    let (h, w) = ii.source_dim();
    assert!(k >= 1 && k <= h.min(w), "window {k} does not fit a {h}x{w} image");
    assert!(stride >= 1, "stride must be positive");
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let t = &ii.table;
    Array2::from_shape_fn((oh, ow), |(i, j)| {
        let (r, c) = (i * stride, j * stride);
        t[[r + k, c + k]] - t[[r, c + k]] - t[[r + k, c]] + t[[r, c]]
    })
}

/// Local first and second moments of a pair of co-located planes.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStats {
    pub mu_x: Array2<f64>,
    pub mu_y: Array2<f64>,
    pub var_x: Array2<f64>,
    pub var_y: Array2<f64>,
    pub cov_xy: Array2<f64>,
    pub window: usize,
}

fn mean_of(x: &Array2<f64>) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.sum() / x.len() as f64
    }
}

/// Windowed means, variances (clamped at zero) and covariance.
///
/// Both planes are shifted by their global mean before accumulation, which
/// keeps the second-moment differences well conditioned on flat content.
///
/// Panics if the shapes differ or the window does not fit.
pub fn local_stats(x: &Array2<f64>, y: &Array2<f64>, k: usize, stride: usize) -> LocalStats {
    assert_eq!(x.dim(), y.dim(), "local_stats needs equal shapes");
    let (mx, my) = (mean_of(x), mean_of(y));
    let xc = x.mapv(|v| v - mx);
    let yc = y.mapv(|v| v - my);
    let norm = 1.0 / (k * k) as f64;

    let sum = |a: &Array2<f64>| window_sum(&IntegralImage::new(a), k, stride).mapv(|s| s * norm);
    let ex = sum(&xc);
    let ey = sum(&yc);
    let exx = sum(&(&xc * &xc));
    let eyy = sum(&(&yc * &yc));
    let exy = sum(&(&xc * &yc));

    let var_x = Zip::from(&exx).and(&ex).map_collect(|&s, &m| (s - m * m).max(0.0));
    let var_y = Zip::from(&eyy).and(&ey).map_collect(|&s, &m| (s - m * m).max(0.0));
    let cov_xy = Zip::from(&exy).and(&ex).and(&ey).map_collect(|&s, &a, &b| s - a * b);

    LocalStats {
        mu_x: ex.mapv(|m| m + mx),
        mu_y: ey.mapv(|m| m + my),
        var_x,
        var_y,
        cov_xy,
        window: k,
    }
}

/// Windowed variance of a single plane, clamped at zero.
pub fn local_variance(x: &Array2<f64>, k: usize, stride: usize) -> Array2<f64> {
    let m = mean_of(x);
    let xc = x.mapv(|v| v - m);
    let norm = 1.0 / (k * k) as f64;
    let ex = window_sum(&IntegralImage::new(&xc), k, stride);
    let exx = window_sum(&IntegralImage::new(&xc.mapv(|v| v * v)), k, stride);
    Zip::from(&exx)
        .and(&ex)
        .map_collect(|&s, &e| (s * norm - (e * norm) * (e * norm)).max(0.0))
}
