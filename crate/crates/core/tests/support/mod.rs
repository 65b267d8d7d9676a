//! Reference computations that share no code path with the library.

#![allow(dead_code)]

use num_complex::Complex64 as C64;

pub const WAVELENGTH: f64 = 780e-9;

pub fn wavenumber() -> f64 {
    2.0 * std::f64::consts::PI / WAVELENGTH
}

/// Dense exchange matrix built entry by entry from the kernel definition.
pub fn exchange_dense(positions: &[[f64; 3]]) -> Vec<Vec<C64>> {
    let k = wavenumber();
    let n = positions.len();
    let mut g = vec![vec![C64::new(0.0, 0.0); n]; n];
    for j in 0..n {
        for l in 0..n {
            g[j][l] = if j == l {
                C64::new(1.0, 0.0)
            } else {
                let d: f64 = (0..3)
                    .map(|a| (positions[j][a] - positions[l][a]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let kr = k * d;
                // e^{ikr}/(ikr) = (sin kr − i cos kr)/kr
                C64::new(kr.sin() / kr, -kr.cos() / kr)
            };
        }
    }
    g
}

fn rhs(g: &[Vec<C64>], b: &[C64]) -> Vec<C64> {
    g.iter()
        .map(|row| -0.5 * row.iter().zip(b).map(|(x, y)| x * y).sum::<C64>())
        .collect()
}

fn axpy(b: &[C64], terms: &[(f64, &[C64])], h: f64) -> Vec<C64> {
    let mut out = b.to_vec();
    for (c, k) in terms {
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += h * c * v;
        }
    }
    out
}

/// Adaptive Runge–Kutta–Fehlberg 4(5) for `dβ/dt = −½ G β`, returning β at
/// each requested time.
pub fn rkf45(g: &[Vec<C64>], beta0: &[C64], times: &[f64], tol: f64) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut b = beta0.to_vec();
    let mut h: f64 = 1e-3;
    for &target in times {
        while target - t > 1e-15 {
            let step = h.min(target - t);
            let k1 = rhs(g, &b);
            let k2 = rhs(g, &axpy(&b, &[(0.25, &k1)], step));
            let k3 = rhs(g, &axpy(&b, &[(3.0 / 32.0, &k1), (9.0 / 32.0, &k2)], step));
            let k4 = rhs(
                g,
                &axpy(
                    &b,
                    &[
                        (1932.0 / 2197.0, &k1),
                        (-7200.0 / 2197.0, &k2),
                        (7296.0 / 2197.0, &k3),
                    ],
                    step,
                ),
            );
            let k5 = rhs(
                g,
                &axpy(
                    &b,
                    &[
                        (439.0 / 216.0, &k1),
                        (-8.0, &k2),
                        (3680.0 / 513.0, &k3),
                        (-845.0 / 4104.0, &k4),
                    ],
                    step,
                ),
            );
            let k6 = rhs(
                g,
                &axpy(
                    &b,
                    &[
                        (-8.0 / 27.0, &k1),
                        (2.0, &k2),
                        (-3544.0 / 2565.0, &k3),
                        (1859.0 / 4104.0, &k4),
                        (-11.0 / 40.0, &k5),
                    ],
                    step,
                ),
            );
            let fifth = axpy(
                &b,
                &[
                    (16.0 / 135.0, &k1),
                    (6656.0 / 12825.0, &k3),
                    (28561.0 / 56430.0, &k4),
                    (-9.0 / 50.0, &k5),
                    (2.0 / 55.0, &k6),
                ],
                step,
            );
            let fourth = axpy(
                &b,
                &[
                    (25.0 / 216.0, &k1),
                    (1408.0 / 2565.0, &k3),
                    (2197.0 / 4104.0, &k4),
                    (-0.2, &k5),
                ],
                step,
            );
            let scale = fifth.iter().map(|z| z.norm()).fold(1e-300, f64::max);
            let err = fifth
                .iter()
                .zip(&fourth)
                .map(|(a, c)| (a - c).norm())
                .fold(0.0, f64::max)
                / scale;
            if err <= tol {
                t += step;
                b = fifth;
            }
            let factor = if err > 0.0 {
                0.9 * (tol / err).powf(0.2)
            } else {
                4.0
            };
            h = step * factor.clamp(0.1, 4.0);
        }
        out.push(b.clone());
    }
    out
}

/// Roots of `λ³ + c2 λ² + c1 λ + c0` by Durand–Kerner iteration.
pub fn cubic_roots(c2: C64, c1: C64, c0: C64) -> [C64; 3] {
    let p = |z: C64| ((z + c2) * z + c1) * z + c0;
    let seed = C64::new(0.4, 0.9);
    let mut r = [seed, seed * seed, seed * seed * seed];
    for _ in 0..500 {
        let prev = r;
        for i in 0..3 {
            let mut den = C64::new(1.0, 0.0);
            for j in 0..3 {
                if j != i {
                    den *= r[i] - r[j];
                }
            }
            r[i] -= p(r[i]) / den;
        }
        if (0..3).all(|i| (r[i] - prev[i]).norm() < 1e-16) {
            break;
        }
    }
    r
}

/// Characteristic polynomial coefficients `(c2, c1, c0)` of a 3×3 matrix.
pub fn char_poly3(m: &[Vec<C64>]) -> (C64, C64, C64) {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    (-tr, minors, -det)
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `J₁(x) = (1/π) ∫₀^π cos(τ − x sin τ) dτ`.
pub fn bessel_j1(x: f64) -> f64 {
    simpson(|t| (t - x * t.sin()).cos(), 0.0, std::f64::consts::PI, 2000) / std::f64::consts::PI
}

pub fn jinc(v: f64) -> f64 {
    if v.abs() < 1e-9 {
        1.0
    } else {
        2.0 * bessel_j1(v) / v
    }
}

pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `Σ_p f(p) f(p + s)` on an `nx × nz` grid (first index fastest) for an
/// integer pixel shift `s` along the first axis.
pub fn autocorrelation_x(f: &[f64], nx: usize, nz: usize, s: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..nz {
        for i in 0..nx.saturating_sub(s) {
            acc += f[j * nx + i] * f[j * nx + i + s];
        }
    }
    acc
}

/// Least-squares fit of `ln y = a − t/τ`, minimized directly over τ by golden
/// section with the intercept profiled out.
pub fn log_linear_tau(t: &[f64], y: &[f64], lo: f64, hi: f64) -> f64 {
    let ln: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let cost = |tau: f64| {
        let a = ln.iter().zip(t).map(|(l, ti)| l + ti / tau).sum::<f64>() / t.len() as f64;
        ln.iter()
            .zip(t)
            .map(|(l, ti)| (l - a + ti / tau).powi(2))
            .sum::<f64>()
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}
