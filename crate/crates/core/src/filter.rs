//! Separable neighborhood filters over single-channel row-major grids.
//! Borders replicate the nearest edge sample.

/// Mean over the `(2r+1)^2` window around each sample.
pub fn box_mean(data: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    let n = (2 * radius + 1) as f64;
    let rows = separable_pass(data, width, height, radius, true, |acc: &mut f64, v| *acc += v, 0.0);
    let cols = separable_pass(&rows, width, height, radius, false, |acc: &mut f64, v| *acc += v, 0.0);
    cols.into_iter().map(|s| s / (n * n)).collect()
}

/// Minimum over the `(2r+1)^2` window around each sample.
pub fn min_filter(data: &[f64], width: usize, height: usize, radius: usize) -> Vec<f64> {
    let min = |acc: &mut f64, v: f64| {
        if v < *acc {
            *acc = v
        }
    };
    let rows = separable_pass(data, width, height, radius, true, min, f64::INFINITY);
    separable_pass(&rows, width, height, radius, false, min, f64::INFINITY)
}

fn separable_pass(
    data: &[f64],
    width: usize,
    height: usize,
    radius: usize,
    horizontal: bool,
    fold: impl Fn(&mut f64, f64),
    init: f64,
) -> Vec<f64> {
    let r = radius as isize;
    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = init;
            for k in -r..=r {
                let (sx, sy) = if horizontal {
                    ((x as isize + k).clamp(0, width as isize - 1) as usize, y)
                } else {
                    (x, (y as isize + k).clamp(0, height as isize - 1) as usize)
                };
                fold(&mut acc, data[sy * width + sx]);
            }
            out[y * width + x] = acc;
        }
    }
    out
}
