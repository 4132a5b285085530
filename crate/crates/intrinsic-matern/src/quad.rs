//! Adaptive Gauss–Kronrod integration and Wynn's epsilon acceleration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// 15-point Kronrod estimate and its difference from the embedded 7-point
/// Gauss rule.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Result of an adaptive integration: value, error estimate, and whether
/// the tolerance was met within the subdivision budget.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Integrates `f` over `[a, b]` starting from the given breakpoints, bisecting
/// the piece with the largest error until `error ≤ max(abs_tol, rel_tol·|I|)`.
pub fn integrate(
    f: &dyn Fn(f64) -> f64,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_pieces: usize,
) -> Integral {
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(f, w[0], w[1]);
            value += v;
            error += e;
            heap.push(Piece {
                a: w[0],
                b: w[1],
                value: v,
                err: e,
            });
        }
    }
    while error > abs_tol.max(rel_tol * value.abs()) {
        if heap.len() >= max_pieces {
            return Integral {
                value,
                error,
                converged: false,
            };
        }
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            // Interval exhausted at machine resolution; accept it.
            heap.push(Piece { err: 0.0, ..p });
            error = heap.iter().map(|q| q.err).sum();
            continue;
        }
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        value += v1 + v2 - p.value;
        error += e1 + e2 - p.err;
        heap.push(Piece {
            a: p.a,
            b: m,
            value: v1,
            err: e1,
        });
        heap.push(Piece {
            a: m,
            b: p.b,
            value: v2,
            err: e2,
        });
    }
    // Re-sum to shed accumulated cancellation from the running updates.
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.err).sum();
    Integral {
        value,
        error,
        converged: true,
    }
}

/// Wynn's epsilon table over a sequence of partial sums. `push` returns the
/// current best extrapolation and the change from the previous one.
#[derive(Default)]
pub struct Wynn {
    // Last row of the epsilon table, even columns hold estimates.
    row: Vec<f64>,
    last: Option<f64>,
}

impl Wynn {
    pub fn push(&mut self, s: f64) -> (f64, f64) {
        let mut prev_row = std::mem::take(&mut self.row);
        let mut new_row = vec![s];
        // ε_{k+1}^{(n)} = ε_{k−1}^{(n+1)} + 1/(ε_k^{(n+1)} − ε_k^{(n)}).
        let mut below = 0.0;
        for (k, &old) in prev_row.iter().enumerate() {
            let diff = new_row[k] - old;
            let next = if diff == 0.0 {
                f64::INFINITY
            } else {
                below + 1.0 / diff
            };
            below = old;
            if !next.is_finite() {
                break;
            }
            new_row.push(next);
        }
        prev_row.clear();
        // Best estimate: the highest even column.
        let top = (new_row.len() - 1) / 2 * 2;
        let est = new_row[top];
        self.row = new_row;
        let change = self.last.map_or(f64::INFINITY, |l| (est - l).abs());
        self.last = Some(est);
        (est, change)
    }
}
