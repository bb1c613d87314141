//! Independent oracles shared by the integration suites.
#![allow(dead_code, clippy::excessive_precision)]

use statrs::function::gamma::ln_gamma;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive G7K15 quadrature on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let mut intervals = vec![(a, b, gk15(&f, a, b))];
    for _ in 0..10_000 {
        let total: f64 = intervals.iter().map(|iv| iv.2 .0).sum();
        let err: f64 = intervals.iter().map(|iv| iv.2 .1).sum();
        if err <= rel_tol * total.abs() {
            return total;
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        intervals.push((lo, mid, gk15(&f, lo, mid)));
        intervals.push((mid, hi, gk15(&f, mid, hi)));
    }
    panic!("quadrature did not converge on [{a}, {b}]");
}

/// `E e^{theta G}` for `G ~ Gamma(shape, rate)`, `theta < rate`, by quadrature
/// of the density.
pub fn gamma_mgf(shape: u64, rate: f64, theta: f64) -> f64 {
    assert!(theta < rate);
    if shape == 0 {
        return 1.0;
    }
    let k = shape as f64;
    let ln_norm = k * rate.ln() - ln_gamma(k);
    let decay = rate - theta;
    let density = move |x: f64| {
        if x <= 0.0 {
            return if shape == 1 { rate } else { 0.0 };
        }
        (ln_norm + (k - 1.0) * x.ln() - decay * x).exp()
    };
    // Beyond (k + 80) / decay the integrand is below e^-60 of its mass.
    let upper = (k + 80.0) / decay;
    integrate(density, 0.0, upper, 1e-12)
}

/// `E e^{s (T_2n - C n)}` with `T_2n` the end of cycle `n` started in the minus
/// regime: a Gamma(n+1, lambda_minus) time in minus convolved with a
/// Gamma(n, lambda_plus) time in plus. Negative `s` gives the deficit form.
pub fn cycle_mgf_oracle(s: f64, n: u64, centre: f64, lambda_plus: f64, lambda_minus: f64) -> f64 {
    (-s * centre * n as f64).exp() * gamma_mgf(n + 1, lambda_minus, s) * gamma_mgf(n, lambda_plus, s)
}

/// Brute-force minimiser of `f` on a uniform grid.
pub fn grid_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let steps = ((hi - lo) / step).round() as u64;
    let mut best = (lo, f(lo));
    for i in 1..=steps {
        let x = lo + i as f64 * step;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    best
}

/// Per-cycle log Chernoff objective for the lower tail of `T_2n/n - C`.
pub fn lower_tail_log_objective(lambda: f64, epsilon: f64, lambda_plus: f64, lambda_minus: f64) -> f64 {
    let centre = 1.0 / lambda_plus + 1.0 / lambda_minus;
    (lambda_plus / (lambda_plus + lambda)).ln() + (lambda_minus / (lambda_minus + lambda)).ln()
        + lambda * (centre - epsilon)
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
