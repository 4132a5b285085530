//! Best uniform rational approximation of `y^s` on `[0, 1]` and its partial
//! fraction form, plus the order-selection rule that couples the rational
//! orders to the mesh width.
//!
//! The fractional operator power is approximated on the spectrum of the
//! normalized inverse operator, `y = λ_min/λ ∈ (0, 1]`. A type-(m, m) minimax
//! approximant `r̂(y) ≈ y^s` is written in the operator variable `x = 1/y` as
//!
//! ```text
//! r(x) = k + Σ c_i / (x − p_i),   k, c_i > 0,  p_i < 0,
//! ```
//!
//! so that `x^{−s} ≈ r(x)` on `[1, ∞)` and every term becomes a shifted
//! operator inverse.
//!
//! The minimax approximant is computed by a rational Remez iteration in
//! barycentric form: the levelled-error equations reduce to a small
//! generalized eigenproblem for the error level, the reference is exchanged
//! by locating zeros of the error and the extrema between them, and higher
//! orders start from the converged reference of the previous two orders.

use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RationalError {
    #[error("exponent {0} must lie strictly between 0 and 1")]
    Exponent(f64),

    #[error("order {0} must be between 1 and {MAX_ORDER}")]
    Order(usize),

    #[error(
        "Remez iteration did not converge for order {order} (last error estimate {estimate:.3e})"
    )]
    NonConvergence { order: usize, estimate: f64 },
}

pub const MAX_ORDER: usize = 16;
const MAX_ITERATIONS: usize = 50;
/// Level spread at which the iteration stops.
const LEVEL_TOL: f64 = 1e-9;
/// Level spread below which a stalled iteration is still accepted.
const ACCEPT_TOL: f64 = 1e-2;

/// How the approximation was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Remez,
    /// The Remez iteration stalled above the acceptance tolerance; the best
    /// pole-free iterate is returned with its dense-grid error. When no
    /// pole-free iterate exists the best lower order is returned instead, so
    /// `order` may be smaller than requested.
    Fallback,
}

/// Type-(m, m) approximation of `y^s` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalApprox {
    pub frac: f64,
    pub order: usize,
    /// Constant term `k`.
    pub constant: f64,
    /// Residues `c_i` in the operator variable.
    pub residues: Vec<f64>,
    /// Poles `p_i` in the operator variable, strictly decreasing.
    pub poles: Vec<f64>,
    /// Maximum of `|y^s − r̂(y)|` on `[0, 1]`.
    pub sup_error: f64,
    pub method: Method,
    /// Final reference points.
    pub reference: Vec<f64>,
    bary: Barycentric,
}

#[derive(Debug, Clone, PartialEq)]
struct Barycentric {
    support: Vec<f64>,
    num: Vec<f64>,
    den: Vec<f64>,
}

/// Double-double arithmetic, used where the barycentric sums lose digits
/// next to tiny support points.
#[derive(Clone, Copy, Debug)]
struct Dd(f64, f64);

impl Dd {
    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.0, o.0);
        Dd::two_sum(s.0, s.1 + self.1 + o.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        Dd::two_sum(p, self.0.mul_add(o.0, -p) + self.0 * o.1 + self.1 * o.0)
    }

    fn recip(self) -> Dd {
        let x = Dd(1.0 / self.0, 0.0);
        let r = Dd(1.0, 0.0).add(self.mul(x).neg());
        x.add(x.mul(r))
    }

    fn div(self, o: Dd) -> Dd {
        self.mul(o.recip())
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Barycentric {
    fn eval(&self, y: f64) -> f64 {
        let mut n = Neumaier::default();
        let mut d = Neumaier::default();
        for ((&t, &a), &b) in self.support.iter().zip(&self.num).zip(&self.den) {
            if y == t {
                return a / b;
            }
            let w = 1.0 / (y - t);
            n.add(w * a);
            d.add(w * b);
        }
        n.value() / d.value()
    }

    fn den_eval(&self, y: f64) -> (f64, f64) {
        let mut d = Neumaier::default();
        let mut dd = Neumaier::default();
        for (&t, &b) in self.support.iter().zip(&self.den) {
            let w = 1.0 / (y - t);
            d.add(b * w);
            dd.add(-b * w * w);
        }
        (d.value(), dd.value())
    }

    /// `(r̂(y), N(y), D(y), D′(y))` in double-double, with `y = base + offset`.
    fn eval_dd(&self, base: f64, offset: f64) -> (f64, Dd, Dd, Dd) {
        let mut n = Dd(0.0, 0.0);
        let mut d = Dd(0.0, 0.0);
        let mut dd = Dd(0.0, 0.0);
        for ((&t, &a), &b) in self.support.iter().zip(&self.num).zip(&self.den) {
            let w = Dd::two_sum(base, -t).add(Dd(offset, 0.0)).recip();
            n = n.add(w.mul(Dd(a, 0.0)));
            d = d.add(w.mul(Dd(b, 0.0)));
            dd = dd.add(w.mul(w).mul(Dd(-b, 0.0)));
        }
        (n.div(d).0, n, d, dd)
    }
}

impl RationalApprox {
    /// `r̂(y) ≈ y^s` for `y ∈ [0, 1]`, from the partial fractions.
    pub fn evaluate(&self, y: f64) -> f64 {
        self.constant
            + self
                .residues
                .iter()
                .zip(&self.poles)
                .map(|(c, p)| c * y / (1.0 - p * y))
                .sum::<f64>()
    }

    /// `r(x) = k + Σ c_i/(x − p_i) ≈ x^{−s}` for `x ≥ 1`.
    pub fn evaluate_inverse(&self, x: f64) -> f64 {
        self.constant
            + self
                .residues
                .iter()
                .zip(&self.poles)
                .map(|(c, p)| c / (x - p))
                .sum::<f64>()
    }

    /// The approximant before partial-fraction conversion.
    pub fn evaluate_barycentric(&self, y: f64) -> f64 {
        self.bary.eval_dd(0.0, y).0
    }
}

/// Best type-(m, m) approximation of `y^frac` on `[0, 1]`. Results are cached
/// per exact `(frac, m)`.
pub fn best_rational(frac: f64, m: usize) -> Result<Arc<RationalApprox>, RationalError> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(RationalError::Exponent(frac));
    }
    if m == 0 || m > MAX_ORDER {
        return Err(RationalError::Order(m));
    }
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), Arc<RationalApprox>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (frac.to_bits(), m);
    if let Some(r) = cache.lock().expect("cache lock").get(&key) {
        return Ok(r.clone());
    }
    // Orders below m seed the reference; compute them first (cached too).
    let prev = if m > 1 {
        Some(best_rational(frac, m - 1)?)
    } else {
        None
    };
    let prev2 = if m > 2 {
        Some(best_rational(frac, m - 2)?)
    } else {
        None
    };
    let init = initial_reference(m, prev.as_deref(), prev2.as_deref());
    let approx = match remez(frac, m, init) {
        Ok(r) => Arc::new(r),
        // Very small exponents push the reference below what double precision
        // resolves; fall back to the best lower order.
        Err(_) if prev.is_some() => {
            let lower = prev.expect("checked");
            Arc::new(RationalApprox {
                method: Method::Fallback,
                ..(*lower).clone()
            })
        }
        Err(e) => return Err(e),
    };
    cache
        .lock()
        .expect("cache lock")
        .insert(key, approx.clone());
    Ok(approx)
}

fn initial_reference(
    m: usize,
    prev: Option<&RationalApprox>,
    prev2: Option<&RationalApprox>,
) -> Vec<f64> {
    let n = 2 * m + 2;
    let Some(prev) = prev else {
        // Chebyshev points in the graded variable u = sqrt(−ln y).
        let depth = 2.5 * (m as f64).sqrt();
        return graded_chebyshev(n, depth);
    };
    // The converged reference is close to linear in sqrt(−ln y); stretch the
    // previous profile to the new point count and extrapolate its depth.
    let u: Vec<f64> = prev.reference[1..]
        .iter()
        .map(|y| (-y.ln()).max(0.0).sqrt())
        .collect();
    let top = u[0];
    let depth = match prev2 {
        Some(p2) => {
            let u0 = (-p2.reference[1].ln()).sqrt();
            (2.0 * top * top - u0 * u0).max(1.05 * top * top).sqrt()
        }
        None => top * ((m as f64) / (m as f64 - 1.0)).sqrt(),
    };
    let shape: Vec<f64> = u.iter().map(|v| v / top).collect();
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    for j in 0..n - 1 {
        let pos = j as f64 / (n - 2) as f64 * (shape.len() - 1) as f64;
        let i = (pos.floor() as usize).min(shape.len() - 2);
        let f = pos - i as f64;
        let v = (shape[i] * (1.0 - f) + shape[i + 1] * f) * depth;
        out.push((-v * v).exp());
    }
    out[n - 1] = 1.0;
    out
}

fn graded_chebyshev(n: usize, depth: f64) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n)
        .map(|j| {
            let c = 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos());
            let u = depth * (1.0 - c);
            (-u * u).exp()
        })
        .collect();
    x[0] = 0.0;
    x[n - 1] = 1.0;
    x
}

struct Iterate {
    bary: Barycentric,
    reference: Vec<f64>,
    levels_max: f64,
    spread: f64,
}

fn remez(s: f64, m: usize, mut x: Vec<f64>) -> Result<RationalApprox, RationalError> {
    let f = |y: f64| y.powf(s);
    let mut best: Option<Iterate> = None;
    let mut last_estimate = f64::NAN;
    for _ in 0..MAX_ITERATIONS {
        let Some(bary) = levelled_solution(s, m, &x) else {
            break;
        };
        let err = |y: f64| f(y) - bary.eval(y);
        let Some(next) = exchange(&err, &x) else {
            break;
        };
        let levels: Vec<f64> = next.iter().map(|&y| err(y).abs()).collect();
        let hi = levels.iter().fold(0.0f64, |a, &b| a.max(b));
        let lo = levels.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let spread = hi / lo - 1.0;
        last_estimate = hi;
        let better = best.as_ref().is_none_or(|b| spread < b.spread);
        if better {
            best = Some(Iterate {
                bary,
                reference: next.clone(),
                levels_max: hi,
                spread,
            });
        }
        x = next;
        if spread < LEVEL_TOL {
            break;
        }
    }
    let Some(it) = best else {
        return Err(RationalError::NonConvergence {
            order: m,
            estimate: last_estimate,
        });
    };
    let method = if it.spread < ACCEPT_TOL {
        Method::Remez
    } else {
        Method::Fallback
    };
    let sup_error = match method {
        Method::Remez => it.levels_max,
        Method::Fallback => dense_sup_error(s, &it.bary),
    };
    let pf = partial_fractions(&it.bary, m).ok_or(RationalError::NonConvergence {
        order: m,
        estimate: sup_error,
    })?;
    Ok(RationalApprox {
        frac: s,
        order: m,
        constant: pf.0,
        residues: pf.1,
        poles: pf.2,
        sup_error,
        method,
        reference: it.reference,
        bary: it.bary,
    })
}

fn dense_sup_error(s: f64, r: &Barycentric) -> f64 {
    log_graded_grid(20_000)
        .into_iter()
        .map(|y| (y.powf(s) - r.eval(y)).abs())
        .fold(0.0, f64::max)
}

/// `{0} ∪` geometric points from 1e−20 to 1.
pub fn log_graded_grid(n: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    let lo = -20.0 * std::f64::consts::LN_10;
    g.extend((0..n - 1).map(|i| (lo * (1.0 - i as f64 / (n - 2) as f64)).exp()));
    g
}

/// Solves the levelled-error equations on the reference `x` and returns the
/// pole-free solution with the smallest level.
fn levelled_solution(s: f64, m: usize, x: &[f64]) -> Option<Barycentric> {
    let n = x.len();
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return None;
    }
    let support: Vec<f64> = (0..=m)
        .map(|k| {
            if x[2 * k] > 0.0 {
                (x[2 * k] * x[2 * k + 1]).sqrt()
            } else {
                0.5 * x[2 * k + 1]
            }
        })
        .collect();
    // The levelled equations C·α = (F − hS)·C·β are unchanged by a positive
    // row scaling of C, which keeps the Cauchy matrix well conditioned when
    // the reference spans many decades.
    let mut c = DMatrix::from_fn(n, m + 1, |i, k| 1.0 / (x[i] - support[k]));
    for i in 0..n {
        let scale = c.row(i).norm();
        c.row_mut(i).scale_mut(1.0 / scale);
    }
    let fv: Vec<f64> = x.iter().map(|y| y.powf(s)).collect();
    let sign = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let qr = c.clone().qr();
    let mut qt = DMatrix::<f64>::identity(n, n);
    qr.q_tr_mul(&mut qt);
    let qperp_t = qt.rows(m + 1, n - m - 1).into_owned();
    let fc = DMatrix::from_fn(n, m + 1, |i, k| fv[i] * c[(i, k)]);
    let sc = DMatrix::from_fn(n, m + 1, |i, k| sign(i) * c[(i, k)]);
    let a = &qperp_t * &fc;
    let b = &qperp_t * &sc;
    let (b_inv_a, scale) = balance(b.clone().lu().solve(&a)?);
    let eig = b_inv_a.complex_eigenvalues();
    let r = qr.r();
    let mut best: Option<(f64, Barycentric)> = None;
    for ev in eig.iter() {
        if !ev.re.is_finite() || ev.im.abs() > 1e-8 * ev.norm().max(1e-300) {
            continue;
        }
        let h = ev.re;
        let mut shifted = b_inv_a.clone();
        for i in 0..=m {
            shifted[(i, i)] -= h;
        }
        let svd = shifted.svd(false, true);
        let vt = svd.v_t?;
        let (imin, _) =
            svd.singular_values
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
                );
        let beta = DVector::from_fn(m + 1, |k, _| vt[(imin, k)] * scale[k]);
        // The denominator polynomial D(y)·Π(y − t_k) must keep one sign.
        let mut sg0 = 0.0;
        let mut pole_free = true;
        for i in 0..n {
            let d: f64 = (0..=m).map(|k| beta[k] * c[(i, k)]).sum();
            let mut sg = d.signum();
            for &t in &support {
                if x[i] < t {
                    sg = -sg;
                }
            }
            if i == 0 {
                sg0 = sg;
            } else if sg != sg0 {
                pole_free = false;
                break;
            }
        }
        if !pole_free {
            continue;
        }
        let rhs = DVector::from_fn(n, |i, _| {
            (fv[i] - sign(i) * h) * (0..=m).map(|k| c[(i, k)] * beta[k]).sum::<f64>()
        });
        let mut qtr = rhs.clone();
        qr.q_tr_mul(&mut qtr);
        let alpha = r.solve_upper_triangular(&qtr.rows(0, m + 1).into_owned())?;
        if best.as_ref().is_none_or(|(bh, _)| h.abs() < bh.abs()) {
            best = Some((
                h,
                Barycentric {
                    support: support.clone(),
                    num: alpha.iter().copied().collect(),
                    den: beta.iter().copied().collect(),
                },
            ));
        }
    }
    best.map(|(_, b)| b)
}

/// Diagonal similarity `D⁻¹AD` equalizing row and column norms, returned
/// with `D`. Eigenvectors of the balanced matrix map back through `D`.
fn balance(mut a: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = a.nrows();
    let mut d = vec![1.0; n];
    for _ in 0..100 {
        let mut done = true;
        for i in 0..n {
            let col: f64 = (0..n).filter(|&j| j != i).map(|j| a[(j, i)].abs()).sum();
            let row: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let f = (row / col).sqrt();
            if !(0.5..=2.0).contains(&f) {
                done = false;
                d[i] *= f;
                a.column_mut(i).scale_mut(f);
                a.row_mut(i).scale_mut(1.0 / f);
            }
        }
        if done {
            break;
        }
    }
    (a, d)
}

/// New reference: zeros of the error between consecutive reference points,
/// then the largest `|error|` in each zero-bracketed interval.
fn exchange(err: &dyn Fn(f64) -> f64, x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    let mut zeros = Vec::with_capacity(n + 1);
    zeros.push(0.0);
    for i in 0..n - 1 {
        let (mut a, mut b) = (x[i], x[i + 1]);
        let mut ea = err(a);
        if ea.signum() == err(b).signum() {
            return None;
        }
        for _ in 0..200 {
            let mid = if a > 0.0 && b / a > 4.0 {
                (a * b).sqrt()
            } else {
                0.5 * (a + b)
            };
            let em = err(mid);
            if em.signum() == ea.signum() {
                a = mid;
                ea = em;
            } else {
                b = mid;
            }
            if b - a <= 1e-15 * b {
                break;
            }
        }
        zeros.push(0.5 * (a + b));
    }
    zeros.push(1.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (zeros[i], zeros[i + 1]);
        let samples = 400;
        let grid: Vec<f64> = if a == 0.0 {
            let lo = (b * 1e-12).max(1e-300);
            std::iter::once(0.0)
                .chain(geomspace(lo, b, samples))
                .collect()
        } else if b / a > 4.0 {
            geomspace(a, b, samples).collect()
        } else {
            (0..samples)
                .map(|j| a + (b - a) * j as f64 / (samples - 1) as f64)
                .collect()
        };
        let vals: Vec<f64> = grid.iter().map(|&y| err(y).abs()).collect();
        let k = vals
            .iter()
            .enumerate()
            .fold(0, |bi, (i, &v)| if v > vals[bi] { i } else { bi });
        let (mut lo, mut hi) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let c1 = hi - g * (hi - lo);
            let c2 = lo + g * (hi - lo);
            if err(c1).abs() > err(c2).abs() {
                hi = c2;
            } else {
                lo = c1;
            }
        }
        let refined = 0.5 * (lo + hi);
        out.push(if err(refined).abs() > vals[k] {
            refined
        } else {
            grid[k]
        });
    }
    Some(out)
}

/// Bisection in the magnitude of `y` for a root bracketed by `a > b`, both negative.
fn bisect_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let mid = -((a * b).sqrt());
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == fa.signum() {
            a = mid;
        } else {
            b = mid;
        }
        if (a - b).abs() <= 4.0 * f64::EPSILON * b.abs() {
            break;
        }
    }
    -((a * b).sqrt())
}

fn geomspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(move |j| {
        if j == n - 1 {
            b
        } else {
            (la + (lb - la) * j as f64 / (n - 1) as f64).exp()
        }
    })
}

/// Converts the barycentric approximant to `(k, c, p)` in the operator
/// variable. The poles of a pole-free approximant of `y^s` are negative and
/// spread over many decades, so they are bracketed by sign changes of the
/// barycentric denominator on a log-graded negative axis and then bisected.
fn partial_fractions(r: &Barycentric, m: usize) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let tmin = r
        .support
        .iter()
        .copied()
        .filter(|&t| t > 0.0)
        .fold(1.0f64, f64::min);
    let lo = (tmin.log10() - 10.0).max(-300.0);
    let hi = 12.0;
    let mut poles_y = Vec::with_capacity(m);
    for per_decade in [50.0, 500.0] {
        poles_y.clear();
        let steps = ((hi - lo) * per_decade) as usize;
        let at = |j: usize| -(10f64).powf(lo + (hi - lo) * j as f64 / steps as f64);
        let mut prev = (at(0), r.den_eval(at(0)).0);
        for j in 1..=steps {
            let y = at(j);
            let d = r.den_eval(y).0;
            if d.signum() != prev.1.signum() {
                poles_y.push(bisect_root(|z| r.den_eval(z).0, prev.0, y));
            }
            prev = (y, d);
        }
        if poles_y.len() == m {
            break;
        }
    }
    if poles_y.len() != m {
        return None;
    }
    let k = r.eval_dd(0.0, 0.0).0;
    let mut terms: Vec<(f64, f64)> = poles_y
        .iter()
        .map(|&z0| {
            // Newton polish in double-double, then residue ρ = N/D′.
            let mut z = z0;
            for _ in 0..3 {
                let (_, _, d, dd) = r.eval_dd(z, 0.0);
                let step = d.div(dd).0;
                if !step.is_finite() || step.abs() >= 0.5 * z.abs() {
                    break;
                }
                z -= step;
            }
            let (_, n, _, dd) = r.eval_dd(z, 0.0);
            let zd = Dd(z, 0.0);
            let c = n.div(dd).div(zd.mul(zd)).neg();
            (zd.recip().0, c.0)
        })
        .collect();
    terms.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite poles"));
    if terms.windows(2).any(|w| !(w[0].0 > w[1].0)) || terms.iter().any(|t| !t.1.is_finite()) {
        return None;
    }
    Some((
        k,
        terms.iter().map(|t| t.1).collect(),
        terms.iter().map(|t| t.0).collect(),
    ))
}

/// Rational orders for given exponents and mesh width:
/// `g(η) = ⌈(r + d/2)² (ln δ)² / (4π² {η})⌉` with the mesh rate
/// `r = min{2α + 2β − d/2 − ε, 2}`, zero for integer `η`. This makes
/// `δ^{−d/2} e^{−2π√({η} g)} ≤ δ^r`. Returns `(m, m̃)` for `(α, β)`.
pub fn select_orders(alpha: f64, beta: f64, d: usize, width: f64, slack: f64) -> (usize, usize) {
    let half_d = d as f64 / 2.0;
    let rate = (2.0 * (alpha + beta) - half_d - slack).min(2.0);
    let g = |eta: f64| -> usize {
        let frac = eta - eta.floor();
        if frac < 1e-12 {
            return 0;
        }
        let v = (rate + half_d).powi(2) * width.ln().powi(2)
            / (4.0 * std::f64::consts::PI.powi(2) * frac);
        (v.ceil() as usize).clamp(1, MAX_ORDER)
    };
    (g(alpha), g(beta))
}
