//! Bounded derivative-free scalar minimization.

/// Golden-section fraction `(3 - √5) / 2`.
const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMinimum {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

/// Brent's minimizer on `[lo, hi]` started from an interior point `x0` whose
/// value `fx0` is already known.
///
/// Parabolic steps are only taken when the three retained points have
/// finite values; otherwise the step is golden section. Terminates when the
/// bracket shrinks below `2 (√ε |x| + tol/3)` or after `max_evaluations`
/// new evaluations. The returned point is never worse than `x0`.
pub fn brent_bounded<F>(
    mut f: F,
    lo: f64,
    hi: f64,
    x0: f64,
    fx0: f64,
    tol: f64,
    max_evaluations: usize,
) -> ScalarMinimum
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(lo <= x0 && x0 <= hi);
    let sqrt_eps = f64::EPSILON.sqrt();
    let (mut a, mut b) = (lo, hi);
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (fx0, fx0, fx0);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut evaluations = 0;

    loop {
        let xm = 0.5 * (a + b);
        let tol1 = sqrt_eps * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) || evaluations >= max_evaluations {
            break;
        }

        let mut golden = true;
        if e.abs() > tol1 && fx.is_finite() && fw.is_finite() && fv.is_finite() {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let u = u.clamp(lo, hi);
        let fu = f(u);
        evaluations += 1;

        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    ScalarMinimum { x, fx, evaluations }
}

/// `n` equally spaced points spanning `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + i as f64 * step })
        .collect()
}

/// Coarse scan over `nodes` followed by Brent refinement inside the cells
/// adjacent to the best node. Returns the better of the two.
pub fn scan_then_refine<F>(
    mut f: F,
    nodes: &[f64],
    tol: f64,
    max_evaluations: usize,
) -> ScalarMinimum
where
    F: FnMut(f64) -> f64,
{
    let values: Vec<f64> = nodes.iter().map(|&k| f(k)).collect();
    // First minimum wins ties, which keeps the scan order-deterministic.
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, v)| if *v < values[b] { i } else { b });
    let lo = nodes[best.saturating_sub(1)];
    let hi = nodes[(best + 1).min(nodes.len() - 1)];
    let refined = brent_bounded(&mut f, lo, hi, nodes[best], values[best], tol, max_evaluations);
    let evaluations = nodes.len() + refined.evaluations;
    if refined.fx <= values[best] {
        ScalarMinimum {
            evaluations,
            ..refined
        }
    } else {
        ScalarMinimum {
            x: nodes[best],
            fx: values[best],
            evaluations,
        }
    }
}
