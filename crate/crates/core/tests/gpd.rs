use proptest::prelude::*;
use urllc_core::gpd::{project, SUPPORT_MARGIN, XI_MAX, XI_MIN};
use urllc_core::{ExcessSample, GpdParams, GpdVector};

/// Independent single-sample NLL, written from the density directly.
fn nll_oracle(sigma: f64, xi: f64, q: f64) -> f64 {
    if xi.abs() < 1e-12 {
        sigma.ln() + q / sigma
    } else {
        sigma.ln() + (1.0 + 1.0 / xi) * (xi * q / sigma).ln_1p()
    }
}

/// Five-point central difference.
fn central_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (simpson(f, a, m), simpson(f, m, b));
        if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
            l + r + (l + r - whole) / 15.0
        } else {
            rec(f, a, m, l, 0.5 * tol, depth - 1) + rec(f, m, b, r, 0.5 * tol, depth - 1)
        }
    }
    rec(f, a, b, simpson(f, a, b), tol, depth)
}

fn s(q: f64) -> ExcessSample {
    ExcessSample::new(q).unwrap()
}

#[test]
fn gradient_matches_finite_differences_on_grid() {
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let sigma = 0.5 + 99.5 * i as f64 / 19.0;
        for j in 0..20 {
            let xi = -0.45 + 1.3 * j as f64 / 19.0;
            let p = GpdParams::new(sigma, xi).unwrap();
            for k in 0..10 {
                let u = 0.05 + 0.09 * k as f64;
                let q = p.quantile(u);
                let g = p.nll_grad(s(q)).unwrap();
                let hs = 1e-4 * sigma.max(1.0);
                let hx = 1e-4;
                let fd_s = central_diff(|v| nll_oracle(v, xi, q), sigma, hs);
                let fd_x = central_diff(|v| nll_oracle(sigma, v, q), xi, hx);
                for (a, b) in [(g.sigma, fd_s), (g.xi, fd_x)] {
                    let rel = (a - b).abs() / b.abs().max(1e-3);
                    worst = worst.max(rel);
                }
            }
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
}

#[test]
fn pdf_integrates_to_cdf() {
    for &(sigma, xi) in &[
        (1.0, 0.0),
        (2.0, 0.5),
        (50.0, 0.3),
        (10.0, -0.4),
        (3.0, -0.9),
    ] {
        let p = GpdParams::new(sigma, xi).unwrap();
        let end = p.support_end().min(p.quantile(0.999));
        let f = |m: f64| p.pdf(m).unwrap();
        let area = adaptive_simpson(&f, 0.0, end, 1e-12, 40);
        let cdf = if xi == 0.0 {
            1.0 - (-end / sigma).exp()
        } else {
            1.0 - (1.0 + xi * end / sigma).max(0.0).powf(-1.0 / xi)
        };
        assert!(
            (area - cdf).abs() < 1e-7,
            "({sigma}, {xi}): {area} vs {cdf}"
        );
    }
}

#[test]
fn nll_is_continuous_across_zero_shape() {
    for &q in &[0.0, 0.3, 1.0, 7.5] {
        let at = |xi: f64| GpdParams::new(2.0, xi).unwrap().nll_one(s(q)).unwrap();
        let mid = at(0.0);
        assert!((at(1e-8) - mid).abs() < 1e-6);
        assert!((at(-1e-8) - mid).abs() < 1e-6);
        let g = |xi: f64| GpdParams::new(2.0, xi).unwrap().nll_grad(s(q)).unwrap();
        assert!((g(1e-8).xi - g(0.0).xi).abs() < 1e-6);
        assert!((g(-1e-8).xi - g(0.0).xi).abs() < 1e-6);
    }
}

proptest! {
    #[test]
    fn pdf_is_nonnegative(sigma in 0.01f64..1e3, xi in -0.99f64..0.99, u in 0.0f64..0.999) {
        let p = GpdParams::new(sigma, xi).unwrap();
        let m = p.quantile(u);
        prop_assert!(p.pdf(m).unwrap() >= 0.0);
    }

    #[test]
    fn projection_is_feasible_and_idempotent(
        sigma in -10.0f64..200.0,
        xi in -3.0f64..3.0,
        qs in prop::collection::vec(0.0f64..500.0, 1..30),
    ) {
        let samples: Vec<_> = qs.iter().map(|&q| s(q)).collect();
        let once = project(GpdVector::new(sigma, xi), &samples);
        prop_assert!(once.sigma() > 0.0);
        prop_assert!(once.xi() >= XI_MIN - 1e-12 && once.xi() <= XI_MAX);
        prop_assert!(once.supports(&samples));
        let qmax = qs.iter().cloned().fold(0.0, f64::max);
        prop_assert!(1.0 + once.xi() * qmax / once.sigma() >= SUPPORT_MARGIN * (1.0 - 1e-9));
        let twice = project(once.into(), &samples);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn mean_excess_increases_with_shape(sigma in 0.1f64..100.0, a in -0.99f64..0.98, d in 1e-6f64..0.5) {
        let b = (a + d).min(0.99);
        prop_assume!(b > a);
        let lo = GpdParams::new(sigma, a).unwrap().mean_excess().unwrap();
        let hi = GpdParams::new(sigma, b).unwrap().mean_excess().unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn nll_matches_oracle(sigma in 0.1f64..100.0, xi in -0.9f64..0.9, u in 0.0f64..0.99) {
        prop_assume!(xi.abs() > 1e-6);
        let p = GpdParams::new(sigma, xi).unwrap();
        let q = p.quantile(u);
        let got = p.nll_one(s(q)).unwrap();
        let want = nll_oracle(sigma, xi, q);
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
    }
}
