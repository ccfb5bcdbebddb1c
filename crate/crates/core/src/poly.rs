//! Dense univariate polynomials in the monomial basis, coefficients stored in
//! ascending powers, plus real-root isolation on an interval.

/// `sum_i c[i] * t^i` by Horner's rule.
pub fn eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

pub fn derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, &a)| i as f64 * a).collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
        .collect()
}

/// Drops trailing exact zeros.
pub fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.last() == Some(&0.0) {
        c.pop();
    }
    c
}

/// Monomial coefficients of `t^j * (1 - t)^(k - j)`.
pub fn bernstein_term(j: usize, k: usize) -> Vec<f64> {
    let m = k - j;
    let mut out = vec![0.0; k + 1];
    let mut binom = 1.0;
    for i in 0..=m {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        out[j + i] = sign * binom;
        binom = binom * (m - i) as f64 / (i + 1) as f64;
    }
    out
}

/// `sum_j weights[j] * t^j * (1 - t)^(k - j)` in the monomial basis.
pub fn from_bernstein(weights: &[f64]) -> Vec<f64> {
    let k = weights.len() - 1;
    let mut out = vec![0.0; k + 1];
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, b) in out.iter_mut().zip(bernstein_term(j, k)) {
            *o += w * b;
        }
    }
    out
}

/// Number of uniform subintervals scanned for sign changes at the top level.
fn top_level_pieces(degree: usize) -> usize {
    (4 * degree).max(4)
}

/// All real roots of `c` in the open interval `(lo, hi)`, ascending.
///
/// Roots of the derivative (found recursively) split the interval into
/// pieces on which `c` is monotone, so every root sits in exactly one piece
/// and is bracketed by a sign change or hit exactly at a breakpoint. The
/// uniform subdivision adds breakpoints on top of those.
pub fn real_roots_in(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let c = trim(c.to_vec());
    if c.len() <= 1 || lo >= hi {
        return Vec::new();
    }
    let deg = c.len() - 1;
    let pieces = top_level_pieces(deg);
    let mut breaks: Vec<f64> = (0..=pieces)
        .map(|i| lo + (hi - lo) * i as f64 / pieces as f64)
        .collect();
    breaks.extend(monotone_breakpoints(&c, lo, hi));
    breaks.sort_by(f64::total_cmp);
    roots_between(&c, &breaks, lo, hi)
}

fn monotone_breakpoints(c: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    if c.len() <= 2 {
        return Vec::new();
    }
    let d = trim(derivative(c));
    let mut inner = monotone_breakpoints(&d, lo, hi);
    inner.insert(0, lo);
    inner.push(hi);
    inner.sort_by(f64::total_cmp);
    roots_between(&d, &inner, lo, hi)
}

fn roots_between(c: &[f64], breaks: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let d = derivative(c);
    let mut roots: Vec<f64> = Vec::new();
    let push = |r: f64, roots: &mut Vec<f64>| {
        if r > lo && r < hi && roots.last().is_none_or(|&last| r - last > 1e-13) {
            roots.push(r);
        }
    };
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let fa = eval(c, a);
        let fb = eval(c, b);
        if fa == 0.0 {
            push(a, &mut roots);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            push(safe_newton(c, &d, a, b, fa), &mut roots);
        }
    }
    if let Some(&last) = breaks.last() {
        if eval(c, last) == 0.0 {
            push(last, &mut roots);
        }
    }
    roots
}

/// Newton iteration safeguarded by bisection on a bracket with a sign change.
fn safe_newton(c: &[f64], d: &[f64], mut a: f64, mut b: f64, fa: f64) -> f64 {
    let neg_at_a = fa < 0.0;
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = eval(c, x);
        if fx == 0.0 {
            return x;
        }
        if (fx < 0.0) == neg_at_a {
            a = x;
        } else {
            b = x;
        }
        if b - a < 1e-12 {
            return 0.5 * (a + b);
        }
        let dx = eval(d, x);
        let step = fx / dx;
        let newton = x - step;
        if dx != 0.0 && newton > a && newton < b {
            x = newton;
            if step.abs() < 1e-15 * x.abs().max(1.0) {
                return x;
            }
        } else {
            x = 0.5 * (a + b);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        assert_eq!(eval(&[1.0, 2.0, 3.0], 2.0), 17.0);
        assert_eq!(derivative(&[1.0, 2.0, 3.0]), vec![2.0, 6.0]);
        assert_eq!(mul(&[1.0, 1.0], &[-1.0, 1.0]), vec![-1.0, 0.0, 1.0]);
        assert_eq!(sub(&[1.0], &[0.0, 2.0]), vec![1.0, -2.0]);
        assert_eq!(trim(vec![1.0, 0.0, 0.0]), vec![1.0]);
    }

    #[test]
    fn bernstein_expansion() {
        // t (1 - t)^2 = t - 2 t^2 + t^3
        assert_eq!(bernstein_term(1, 3), vec![0.0, 1.0, -2.0, 1.0]);
        let w = [0.3, 1.7, 0.2, 2.5];
        let c = from_bernstein(&w);
        for t in [0.1f64, 0.37, 0.9] {
            let direct: f64 = w
                .iter()
                .enumerate()
                .map(|(j, x)| x * t.powi(j as i32) * (1.0 - t).powi(3 - j as i32))
                .sum();
            assert!((eval(&c, t) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn finds_simple_roots() {
        // (t - 0.2)(t - 0.5)(t - 0.8)
        let c = mul(&mul(&[-0.2, 1.0], &[-0.5, 1.0]), &[-0.8, 1.0]);
        let r = real_roots_in(&c, 0.0, 1.0);
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([0.2, 0.5, 0.8]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(real_roots_in(&c, 0.3, 0.7).len(), 1);
    }

    #[test]
    fn finds_close_roots() {
        // two roots 1e-6 apart inside one uniform piece
        let c = mul(&[-0.4, 1.0], &[-0.400001, 1.0]);
        let r = real_roots_in(&c, 0.0, 1.0);
        assert_eq!(r.len(), 2, "{r:?}");
    }

    #[test]
    fn constant_has_no_roots() {
        assert!(real_roots_in(&[2.0], 0.0, 1.0).is_empty());
        assert!(real_roots_in(&[0.0, 0.0], 0.0, 1.0).is_empty());
    }
}
