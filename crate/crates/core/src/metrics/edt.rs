//! Exact Euclidean distance transform (two-pass parabola lower envelope).

use crate::grid::Grid;

/// Sentinel for "no site"; large enough that no in-image squared distance
/// ever reaches it, small enough to stay exact in f64 arithmetic.
const FAR: f64 = 1e20;

/// Abscissa where parabolas rooted at `p` and `q` intersect.
fn intersect(f: &[f64], q: usize, p: usize) -> f64 {
    ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
}

/// 1D squared-distance transform of the sampled function `f`, writing into
/// `d`. `v` and `z` are scratch buffers of length `n` and `n + 1`.
fn transform_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        // All f values are finite (FAR at most), so the intersection is
        // finite and the pop loop can never drop below the -inf sentinel.
        let mut s = intersect(f, q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = intersect(f, q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let vk = v[k];
        let dq = q as f64 - vk as f64;
        d[q] = dq * dq + f[vk];
    }
}

/// Exact Euclidean distance (pixels) from every cell to the nearest `true`
/// cell of `sites`. Cells of an all-false grid map to `sqrt(FAR)`-scale
/// sentinels the caller is expected to truncate.
pub fn distance_transform(sites: &Grid<bool>) -> Grid<f64> {
    let (w, h) = (sites.width(), sites.height());
    let mut sq: Vec<f64> = sites
        .data()
        .iter()
        .map(|&s| if s { 0.0 } else { FAR })
        .collect();

    // Columns first, then rows, each via the 1D transform.
    let mut col_f = vec![0.0; h];
    let mut col_d = vec![0.0; h];
    let mut v = vec![0usize; w.max(h)];
    let mut z = vec![0.0; w.max(h) + 1];
    for x in 0..w {
        for y in 0..h {
            col_f[y] = sq[y * w + x];
        }
        transform_1d(&col_f, &mut col_d, &mut v, &mut z);
        for y in 0..h {
            sq[y * w + x] = col_d[y];
        }
    }
    let mut row_d = vec![0.0; w];
    for y in 0..h {
        let row_f: Vec<f64> = sq[y * w..(y + 1) * w].to_vec();
        transform_1d(&row_f, &mut row_d, &mut v, &mut z);
        sq[y * w..(y + 1) * w].copy_from_slice(&row_d);
    }

    Grid::from_vec(w, h, sq.into_iter().map(f64::sqrt).collect())
}
