use proptest::prelude::*;
use wavelab::profiles::{kappa, kappa_star, lorentz_soliton, ode_solution};
use wavelab::{ModelParams, ProfileParams, Sign};

fn m13() -> ModelParams {
    ModelParams::new(1, 3.0).unwrap()
}

fn second_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

fn first_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

#[test]
fn subconformal_gate() {
    assert!(ModelParams::new(3, 3.0).is_err());
    assert!(ModelParams::new(3, 2.0).is_ok());
    assert!(ModelParams::new(2, 5.0).is_err());
    assert!(ModelParams::new(1, 1.0).is_err());
    assert!(ModelParams::new(0, 2.0).is_err());
    assert!(ModelParams::new(1, 17.0).is_ok());
}

#[test]
fn constants_for_the_cubic_line() {
    let m = m13();
    assert_eq!(m.kappa0(), 2f64.sqrt());
    assert_eq!(m.alpha(), 1.0);
    let m3 = ModelParams::new(3, 2.0).unwrap();
    assert!((m3.kappa0() - 6.0).abs() < 1e-12);
    assert!((m3.alpha() - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn gate_matches_bound(n in 1usize..6, p in 1.01f64..8.0) {
        let ok = n == 1 || p < (n as f64 + 3.0) / (n as f64 - 1.0);
        prop_assert_eq!(ModelParams::new(n, p).is_ok(), ok);
    }

    #[test]
    fn ode_solution_solves_the_ode(p in 1.5f64..5.0, t in 0.0f64..0.8) {
        let m = ModelParams::new(1, p).unwrap();
        let u = |t: f64| ode_solution(&m, 1.0, t).unwrap();
        let lhs = second_difference(u, t, 1e-4);
        let rhs = u(t).powf(p);
        prop_assert!((lhs - rhs).abs() < 1e-5 * rhs, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn lorentz_soliton_solves_the_wave_equation(d in -0.9f64..0.9, x in -0.5f64..0.5, t in 0.0f64..0.3, p in 1.5f64..4.0) {
        let m = ModelParams::new(1, p).unwrap();
        let u = |x: f64, t: f64| lorentz_soliton(&m, Sign::Minus, &[d], &[0.0], 1.0 + d.abs(), &[x], t).unwrap();
        let h = 1e-4;
        let utt = second_difference(|s| u(x, s), t, h);
        let uxx = second_difference(|y| u(y, t), x, h);
        let v = u(x, t);
        let residual = utt - uxx - v.abs().powf(p - 1.0) * v;
        prop_assert!(residual.abs() < 1e-5 * (1.0 + v.abs().powf(p)), "{}", residual);
    }

    #[test]
    fn soliton_is_stationary(d in -0.95f64..0.95, y in -0.9f64..0.9) {
        let m = m13();
        let w = |y: f64| kappa(&m, &[d], &[y]).unwrap();
        let (a, b) = (second_difference(w, y, 1e-4), first_difference(w, y, 1e-4));
        let v = w(y);
        let residual = (1.0 - y * y) * a - m.drift() * y * b - m.mass() * v + v.powi(3);
        prop_assert!(residual.abs() < 1e-4 * (1.0 + v.abs().powi(3)), "{}", residual);
    }

    #[test]
    fn soliton_is_the_similarity_form_of_lorentz(d in -0.9f64..0.9, y in -0.95f64..0.95, t in 0.0f64..0.9) {
        let m = m13();
        let tau = 1.0 - t;
        let x = y * tau;
        let u = lorentz_soliton(&m, Sign::Plus, &[d], &[0.0], 1.0, &[x], t).unwrap();
        let w = kappa(&m, &[d], &[y]).unwrap();
        prop_assert!((u * tau.powf(m.scaling()) - w).abs() < 1e-12 * w);
    }

    #[test]
    fn kappa_star_solves_the_similarity_equation(d in -0.8f64..0.8, mu in 0.0f64..0.5, y in -0.8f64..0.8) {
        let m = m13();
        let w = |y: f64, s: f64| {
            let prof = ProfileParams::new(Sign::Plus, vec![d], mu * s.exp()).unwrap();
            kappa_star(&m, &prof, &[y]).unwrap()
        };
        let h = 1e-3;
        let (v, ws) = w(y, 0.0);
        prop_assert!((ws - first_difference(|s| w(y, s).0, 0.0, h)).abs() < 1e-5);
        let wss = second_difference(|s| w(y, s).0, 0.0, h);
        let wyy = second_difference(|z| w(z, 0.0).0, y, h);
        let wy = first_difference(|z| w(z, 0.0).0, y, h);
        let wys = first_difference(|z| w(z, 0.0).1, y, h);
        let residual = wss - (1.0 - y * y) * wyy + m.drift() * y * wy + m.mass() * v - v.powi(3) + m.damping() * ws + 2.0 * y * wys;
        prop_assert!(residual.abs() < 1e-4 * (1.0 + v.powi(3)), "{}", residual);
    }
}
