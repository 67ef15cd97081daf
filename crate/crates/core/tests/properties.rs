use std::sync::OnceLock;

use condensate_core::diagnostics::{fit_gamma_profile, q_of_t, theoretical_profile, ScaledProfile};
use condensate_core::measures::{l1_distance_away_from_zero, mass_below, total_mass};
use condensate_core::models::mass_rate;
use condensate_core::{
    Bsp, BspParams, ChatKernel, Grid, HeadModel, Kingman, KingmanParams, MeasureWithAtom, Sigma,
};
use proptest::prelude::*;

fn grid() -> &'static Grid {
    static G: OnceLock<Grid> = OnceLock::new();
    G.get_or_init(|| Grid::new(1e-6, 50.0, 256).unwrap())
}

fn unit_grid() -> &'static Grid {
    static G: OnceLock<Grid> = OnceLock::new();
    G.get_or_init(|| Grid::new(1e-6, 1.0, 256).unwrap())
}

fn bsp() -> &'static Bsp {
    static M: OnceLock<Bsp> = OnceLock::new();
    M.get_or_init(|| {
        let chat = ChatKernel { c0: 1.0, a: 1.0, kms_beta: None };
        Bsp::new(grid().clone(), BspParams::box_3d(1.0, chat)).unwrap()
    })
}

fn gamma_density(g: &Grid, amp: f64, k: f64, decay: f64) -> MeasureWithAtom {
    let bulk = g.nodes().iter().map(|&x| amp * x.powf(k) * (-decay * x).exp()).collect();
    MeasureWithAtom::new(0.0, bulk, HeadModel::new(k, amp).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn integrate_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64, k in 0.0..3.0f64) {
        let g = grid();
        let f: Vec<f64> = g.nodes().iter().map(|x| (-x).exp()).collect();
        let h: Vec<f64> = g.nodes().iter().map(|x| x.powf(k) / (1.0 + x * x)).collect();
        let (hf, hh) = (HeadModel::new(0.0, 1.0).unwrap(), HeadModel::new(k, 1.0).unwrap());
        let combo: Vec<f64> = f.iter().zip(&h).map(|(u, v)| a * u + b * v).collect();
        let lhs = g.integrate(&combo, &HeadModel::ZERO).unwrap()
            + hf.scaled(a).integral_to(g.x_min())
            + hh.scaled(b).integral_to(g.x_min());
        let rhs = a * g.integrate(&f, &hf).unwrap() + b * g.integrate(&h, &hh).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn interpolation_exact_on_power_laws(c in 0.1..10.0f64, kappa in -0.9..4.0f64, x in 1e-6..50.0f64) {
        let g = grid();
        let vals: Vec<f64> = g.nodes().iter().map(|n| c * n.powf(kappa)).collect();
        let v = g.interpolate(&vals, &HeadModel::new(kappa, c).unwrap(), x).unwrap();
        let exact = c * x.powf(kappa);
        prop_assert!((v - exact).abs() <= 1e-10 * exact, "{v} vs {exact}");
    }

    #[test]
    fn mass_below_is_monotone_and_reaches_total(
        amp in 0.1..5.0f64, k in 0.0..3.0f64, decay in 0.5..3.0f64,
        e1 in 1e-8..50.0f64, e2 in 1e-8..50.0f64, rho in 0.0..1.0f64,
    ) {
        let g = grid();
        let mut p = gamma_density(g, amp, k, decay);
        p.atom_mass = rho;
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let (mlo, mhi) = (mass_below(g, &p, lo).unwrap(), mass_below(g, &p, hi).unwrap());
        prop_assert!(mlo <= mhi + 1e-15);
        prop_assert!(mlo >= rho);
        prop_assert_eq!(mass_below(g, &p, g.x_max()).unwrap(), total_mass(g, &p).unwrap());
    }

    #[test]
    fn l1_distance_triangle_inequality(
        k1 in 0.5..3.0f64, k2 in 0.5..3.0f64, k3 in 0.5..3.0f64, delta in 0.0..10.0f64,
    ) {
        let g = grid();
        let (a, b, c) = (gamma_density(g, 1.0, k1, 1.0), gamma_density(g, 1.0, k2, 1.5), gamma_density(g, 2.0, k3, 2.0));
        let d = |u: &MeasureWithAtom, v: &MeasureWithAtom| l1_distance_away_from_zero(g, u, v, delta).unwrap();
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-14);
        prop_assert!(d(&a, &a) == 0.0);
    }

    #[test]
    fn kingman_mass_law_rate(amp in 0.1..4.0f64, k in 0.5..3.0f64, decay in 0.0..5.0f64, beta in 0.05..0.95f64) {
        let g = unit_grid();
        let m = Kingman::new(g.clone(), KingmanParams { beta_mut: beta, alpha_u: 1.0 }).unwrap();
        let p = gamma_density(g, amp, k, decay);
        let mass = total_mass(g, &p).unwrap();
        let rate = mass_rate(&m, &p).unwrap();
        prop_assert!((rate - (1.0 - mass)).abs() <= 1e-8, "rate {rate}, mass {mass}");
    }

    #[test]
    fn bsp_conserves_mass(amp in 0.1..2.0f64, k in 0.5..3.0f64, decay in 0.5..3.0f64) {
        let g = grid();
        let p = gamma_density(g, amp, k, decay);
        let mass = total_mass(g, &p).unwrap();
        let rate = mass_rate(bsp(), &p).unwrap();
        prop_assert!(rate.abs() <= 1e-6 * mass, "rate {rate}, mass {mass}");
    }

    #[test]
    fn kms_identity(z in -20.0..20.0f64, beta in 0.1..3.0f64, a_extra in 0.01..2.0f64) {
        let chat = ChatKernel { c0: 1.3, a: beta / 2.0 + a_extra, kms_beta: None };
        let lhs = chat.eval(-z, beta);
        let rhs = chat.eval(z, beta) * (beta * z).exp();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(rhs));
    }

    #[test]
    fn sigma_is_symmetric_and_bounded(x in 0.0..50.0f64, y in 0.0..50.0f64, s0 in 0.1..5.0f64, a in 0.0..2.0f64) {
        for sigma in [Sigma::Constant { s0 }, Sigma::ExpDecay { s0, a }] {
            let (u, v) = (sigma.eval(x, y), sigma.eval(y, x));
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1e-300));
            prop_assert!(u >= 0.0 && u <= sigma.bound());
        }
    }

    #[test]
    fn fit_scale_equivariance(
        c in 0.1..10.0f64, gamma in 0.3..3.0f64, beta in 0.2..3.0f64, shift in -30i32..30, lambda in 0.01..100.0f64,
    ) {
        let xs: Vec<f64> = (1..=60).map(|i| 0.1 * i as f64).collect();
        let g: Vec<f64> = xs.iter().map(|&x| c * x.powf(beta) * (-gamma * x).exp()).collect();
        let base = ScaledProfile { t: 1.0, xs: xs.clone(), g };
        let f0 = fit_gamma_profile(&base, [0.1, 6.0]).unwrap();
        prop_assert!((f0.beta_hat - beta).abs() < 1e-8 && (f0.gamma_hat - gamma).abs() < 1e-8);

        let pow2 = 2f64.powi(shift);
        let scaled = ScaledProfile { g: base.g.iter().map(|v| v * pow2).collect(), ..base.clone() };
        let f = fit_gamma_profile(&scaled, [0.1, 6.0]).unwrap();
        prop_assert_eq!(f.beta_hat, f0.beta_hat);
        prop_assert_eq!(f.gamma_hat, f0.gamma_hat);
        prop_assert_eq!(f.c_hat, pow2 * f0.c_hat);

        let scaled = ScaledProfile { g: base.g.iter().map(|v| v * lambda).collect(), ..base.clone() };
        let f = fit_gamma_profile(&scaled, [0.1, 6.0]).unwrap();
        prop_assert!((f.beta_hat - f0.beta_hat).abs() <= 1e-12);
        prop_assert!((f.gamma_hat - f0.gamma_hat).abs() <= 1e-12);
        prop_assert!((f.c_hat / (lambda * f0.c_hat) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn q_of_t_without_drift(t in 0.0..1e4f64, beta in 0.1..3.0f64) {
        let q = q_of_t(0.0, t, beta).unwrap();
        prop_assert_eq!(q.value, (t.ln_1p() * (1.0 + beta)).exp());
        prop_assert!((q.value / (t + 1.0).powf(1.0 + beta) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theoretical_profile_carries_rho(rho in 0.05..2.0f64, gamma in 0.5..4.0f64, beta in 0.3..3.0f64) {
        let g = Grid::new(1e-8, 80.0 / gamma, 2048).unwrap();
        let prof = theoretical_profile(rho, gamma, beta, g.nodes()).unwrap();
        let c = prof.g[0] / g.nodes()[0].powf(beta);
        let mass = g.integrate(&prof.g, &HeadModel::new(beta, c).unwrap()).unwrap();
        prop_assert!((mass - rho).abs() <= 1e-8 * rho.max(1.0), "{mass} vs {rho}");
    }
}
