//! Deterministic bounded maximization: a coarse grid scan followed by
//! golden-section refinement around the most promising grid cells.

/// Golden-section refinement runs around this many of the best local maxima
/// of the coarse scan.
const REFINED_PEAKS: usize = 4;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
}

struct Best {
    x: f64,
    value: f64,
}

impl Best {
    fn offer(&mut self, x: f64, value: f64) {
        if value > self.value || (value == self.value && x < self.x) {
            self.x = x;
            self.value = value;
        }
    }
}

fn golden(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64, best: &mut Best) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    best.offer(c, fc);
    best.offer(d, fd);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
            best.offer(c, fc);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
            best.offer(d, fd);
        }
    }
}

/// Maximizes `f` on `[lo, hi]`: scans a grid with spacing at most `step`,
/// then refines around the best local maxima to `tol`. Ties go to the
/// leftmost point; points where `f` is `-inf` or NaN count as infeasible.
pub fn scalar_maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64, tol: f64) -> Maximum {
    let f = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let cells = (((hi - lo) / step).ceil() as usize).max(1);
    let xs: Vec<f64> = (0..=cells).map(|i| lo + (hi - lo) * i as f64 / cells as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut best = Best { x: lo, value: f64::NEG_INFINITY };
    for (&x, &y) in xs.iter().zip(&ys) {
        best.offer(x, y);
    }
    let mut peaks: Vec<usize> = (0..=cells)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { ys[i - 1] };
            let right = if i == cells { f64::NEG_INFINITY } else { ys[i + 1] };
            ys[i] > f64::NEG_INFINITY && ys[i] >= left && ys[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| ys[b].total_cmp(&ys[a]).then(a.cmp(&b)));
    peaks.truncate(REFINED_PEAKS);
    for i in peaks {
        let a = xs[i.saturating_sub(1)];
        let b = xs[(i + 1).min(cells)];
        golden(&f, a, b, tol, &mut best);
    }
    Maximum { x: best.x, value: best.value }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum2 {
    pub x: [f64; 2],
    pub value: f64,
}

/// Two-dimensional analogue of [`scalar_maximize`] on a box: a `cells x
/// cells` grid scan, then repeated zooming around the best local maxima
/// until the cell width drops below `tol`.
pub fn maximize_2d(f: impl Fn([f64; 2]) -> f64, lo: [f64; 2], hi: [f64; 2], cells: usize, tol: f64) -> Maximum2 {
    let f = |x: [f64; 2]| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut best = Maximum2 { x: lo, value: f64::NEG_INFINITY };
    let offer = |best: &mut Maximum2, x: [f64; 2], v: f64| {
        if v > best.value {
            *best = Maximum2 { x, value: v };
        }
    };
    let grid = |lo: [f64; 2], hi: [f64; 2], n: usize| -> Vec<Vec<([f64; 2], f64)>> {
        (0..=n)
            .map(|i| {
                (0..=n)
                    .map(|j| {
                        let x = [
                            lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64,
                            lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64,
                        ];
                        (x, f(x))
                    })
                    .collect()
            })
            .collect()
    };
    let g = grid(lo, hi, cells);
    let mut peaks = Vec::new();
    for i in 0..=cells {
        for j in 0..=cells {
            let (x, v) = g[i][j];
            offer(&mut best, x, v);
            if v == f64::NEG_INFINITY {
                continue;
            }
            let mut is_peak = true;
            for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if ni < 0 || nj < 0 || ni > cells as i64 || nj > cells as i64 {
                    continue;
                }
                if g[ni as usize][nj as usize].1 > v {
                    is_peak = false;
                }
            }
            if is_peak {
                peaks.push((x, v));
            }
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    peaks.truncate(REFINED_PEAKS);
    let width0 = [(hi[0] - lo[0]) / cells as f64, (hi[1] - lo[1]) / cells as f64];
    for (mut centre, _) in peaks {
        let mut width = width0;
        while width[0].max(width[1]) > tol {
            let a = [(centre[0] - width[0]).max(lo[0]), (centre[1] - width[1]).max(lo[1])];
            let b = [(centre[0] + width[0]).min(hi[0]), (centre[1] + width[1]).min(hi[1])];
            let zoom = grid(a, b, 8);
            let mut local = Maximum2 { x: centre, value: f(centre) };
            for row in &zoom {
                for &(x, v) in row {
                    if v > local.value {
                        local = Maximum2 { x, value: v };
                    }
                }
            }
            offer(&mut best, local.x, local.value);
            centre = local.x;
            width = [width[0] / 4.0, width[1] / 4.0];
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn finds_interior_quadratic_peak() {
        let m = scalar_maximize(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-2, 1e-8);
        assert!((m.x - 0.3).abs() <= 1e-8, "{m:?}");
    }

    #[test]
    fn constant_function_returns_left_end() {
        let m = scalar_maximize(|_| 2.0, 0.0, 1.0, 1e-2, 1e-8);
        assert_eq!(m.x, 0.0);
        assert_eq!(m.value, 2.0);
    }

    #[test]
    fn infeasible_everywhere_reports_negative_infinity() {
        let m = scalar_maximize(|_| f64::NEG_INFINITY, 0.0, 1.0, 1e-2, 1e-8);
        assert_eq!(m.value, f64::NEG_INFINITY);
    }

    #[test]
    fn finds_the_edge_of_a_feasible_region() {
        let f = |x: f64| if x <= 0.4137 { x } else { f64::NEG_INFINITY };
        let m = scalar_maximize(f, 0.0, 1.0, 1e-2, 1e-10);
        assert!((m.x - 0.4137).abs() <= 1e-9, "{m:?}");
    }

    #[test]
    fn two_dimensional_peak() {
        let m = maximize_2d(|x| -(x[0] - 0.21).powi(2) - 2.0 * (x[1] - 0.77).powi(2), [0.0; 2], [1.0; 2], 50, 1e-9);
        assert!((m.x[0] - 0.21).abs() < 1e-7 && (m.x[1] - 0.77).abs() < 1e-7, "{m:?}");
    }

    proptest! {
        #[test]
        fn matches_dense_grid_on_bimodal_functions(a in 0.05f64..0.95, b in 0.05f64..0.95, h in 0.5f64..1.5) {
            let f = |x: f64| (-(x - a).powi(2) * 200.0).exp() + h * (-(x - b).powi(2) * 200.0).exp();
            let m = scalar_maximize(f, 0.0, 1.0, 1e-2, 1e-10);
            let dense = (0..=100_000).map(|i| f(i as f64 / 100_000.0)).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m.value >= dense - 1e-9);
        }
    }
}
