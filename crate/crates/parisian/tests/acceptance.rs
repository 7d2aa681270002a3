//! End-to-end acceptance gate.
//!
//! Each numbered criterion prints one pass/fail line (run with
//! `--nocapture` to see them as they complete); failures are collected
//! and reported together at the end so a single broken criterion does
//! not hide the status of the others. The two Monte Carlo criteria
//! simulate 10^5 paths at dt = 1e-4 and take several minutes each; the
//! kappa-CDF comparison reuses the samples of the two-barrier run.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use parisian::engine::{Engine, TwoBarrierQuery};
use parisian::inversion::{invert, kappa_cdf_on_grid, InversionSpec};
use parisian::model::{build_model, DiffusionModel, FamilyKind, ModelParams, Sign};
use parisian::montecarlo::{estimate, simulate, Functional, Outcome, SimConfig, SimScenario};
use parisian::numerics::{erfc, ToleranceSpec};

fn bm(mu: f64) -> DiffusionModel {
    build_model(ModelParams { family: FamilyKind::BrownianDrift, mu }).unwrap()
}

fn bessel(mu: f64) -> DiffusionModel {
    build_model(ModelParams { family: FamilyKind::Bessel3Drift, mu }).unwrap()
}

fn reflected() -> DiffusionModel {
    build_model(ModelParams { family: FamilyKind::ReflectedBm, mu: 0.0 }).unwrap()
}

fn eng(model: &DiffusionModel) -> Engine<'_> {
    Engine::new(model, ToleranceSpec::default())
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn check(&mut self, id: u32, name: &str, ok: bool, started: Instant, detail: String) {
        let secs = started.elapsed().as_secs_f64();
        if ok {
            println!("criterion {id:02} {name}: pass ({secs:.2} s; {detail})");
        } else {
            println!("criterion {id:02} {name}: FAIL ({secs:.2} s; {detail})");
            self.failures.push(format!("{id:02} {name}: {detail}"));
        }
    }
}

#[test]
fn acceptance() {
    let mut gate = Gate { failures: Vec::new() };
    let tol = ToleranceSpec::default();

    // 1. Symmetric two-barrier layout: the order probability is exactly
    //    one half by the reflection symmetry of driftless Brownian motion.
    {
        let t0 = Instant::now();
        let m = bm(0.0);
        let q = TwoBarrierQuery::new(&m, 0.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        let p = eng(&m).order_probability(&q).unwrap();
        let err = (p - 0.5).abs();
        let ok = err <= 1e-12 && t0.elapsed().as_secs_f64() < 1.0;
        gate.check(1, "symmetric order probability", ok, t0, format!("|p - 1/2| = {err:.2e}"));
    }

    // 2. Driftless closed form of the order probability on a grid.
    {
        let t0 = Instant::now();
        let m = bm(0.0);
        let e = eng(&m);
        let k = (2.0 / std::f64::consts::PI).sqrt();
        let mut worst = 0.0f64;
        for &x in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            for &u in &[0.5, 1.0, 2.0] {
                for &v in &[0.5, 1.0, 2.0] {
                    let q = TwoBarrierQuery::new(&m, 0.0, 1.0, x, u, v).unwrap();
                    let got = e.order_probability(&q).unwrap();
                    let want = (u.sqrt() + x * k) / (v.sqrt() + u.sqrt() + k);
                    worst = worst.max((got - want).abs());
                }
            }
        }
        let ok = worst <= 1e-10 && t0.elapsed().as_secs_f64() < 5.0;
        gate.check(2, "driftless order closed form", ok, t0, format!("max |err| = {worst:.2e} over 45 points"));
    }

    // 3. Excursion decomposition of the Green kernel: 1/G_gamma(a, a)
    //    equals the total (1 - e^{-gamma t}) mass of both lifetime
    //    measures, atoms included.
    {
        let t0 = Instant::now();
        let mut worst = 0.0f64;
        for m in [bm(0.7), bessel(1.0), reflected()] {
            let e = eng(&m);
            for &a in &[0.5, 1.0, 2.0] {
                for &g in &[0.1, 1.0, 10.0] {
                    let inv_green = 1.0 / e.green(g, a, a).unwrap();
                    let total = m.levy(a, Sign::Plus).unwrap().one_minus_exp_integral(g, &tol).unwrap()
                        + m.levy(a, Sign::Minus).unwrap().one_minus_exp_integral(g, &tol).unwrap();
                    worst = worst.max(rel(total, inv_green));
                }
            }
        }
        let ok = worst <= 1e-8 && t0.elapsed().as_secs_f64() < 30.0;
        gate.check(3, "Green kernel excursion identity", ok, t0, format!("max rel err = {worst:.2e} over 27 points"));
    }

    // 4. Per-side eigenfunction form of the same masses: the plus side
    //    matches -Phi'_+ / (s' Phi_+), the minus side +Phi'_- / (s' Phi_-).
    {
        let t0 = Instant::now();
        let mut worst = 0.0f64;
        for m in [bm(0.7), bessel(1.0), reflected()] {
            for &a in &[0.5, 1.0, 2.0] {
                for &g in &[0.1, 1.0, 10.0] {
                    let ei = m.eigen(g, a).unwrap();
                    let sp = m.scale_prime(a);
                    let a_plus = -ei.dphi_plus / (sp * ei.phi_plus);
                    let a_minus = ei.dphi_minus / (sp * ei.phi_minus);
                    let l_plus = m.levy(a, Sign::Plus).unwrap().one_minus_exp_integral(g, &tol).unwrap();
                    let l_minus = m.levy(a, Sign::Minus).unwrap().one_minus_exp_integral(g, &tol).unwrap();
                    worst = worst.max(rel(a_plus, l_plus)).max(rel(a_minus, l_minus));
                }
            }
        }
        let ok = worst <= 1e-8 && t0.elapsed().as_secs_f64() < 30.0;
        gate.check(4, "lifetime-measure eigenfunction identity", ok, t0, format!("max rel err = {worst:.2e} over 54 sides"));
    }

    // 5. Reduction chain: the quadruple transform with unit weights
    //    collapses to the pair transform, and the general order
    //    probability agrees with the recurrent closed-form route.
    {
        let t0 = Instant::now();
        let mut worst_quad = 0.0f64;
        let mut worst_order = 0.0f64;
        let grids: [(DiffusionModel, f64, f64, &[f64]); 2] = [
            (bm(0.0), 0.0, 1.0, &[0.0, 0.3, 0.7, 1.0]),
            (reflected(), 0.5, 1.5, &[0.5, 1.0, 1.5]),
        ];
        for (m, a, b, xs) in grids {
            let e = eng(&m);
            for &x in xs {
                for &u in &[0.5, 1.5] {
                    for &v in &[0.5, 1.5] {
                        let q = TwoBarrierQuery::new(&m, a, b, x, u, v).unwrap();
                        let full = e.quadruple_transform(&q, 0.6, 0.4, |_| 1.0, |_| 1.0).unwrap();
                        let pair = e.pair_laplace(&q, 0.6, 0.4).unwrap();
                        worst_quad = worst_quad.max(rel(full.value, pair));
                        let general = e.order_probability_general(&q).unwrap();
                        let closed = e.order_probability(&q).unwrap();
                        worst_order = worst_order.max(rel(general, closed));
                    }
                }
            }
        }
        let ok = worst_quad <= 1e-10 && worst_order <= 1e-8 && t0.elapsed().as_secs_f64() < 10.0;
        gate.check(5, "quadruple and order reductions", ok, t0,
            format!("quad vs pair {worst_quad:.2e}, general vs closed {worst_order:.2e}"));
    }

    // 6. Strong Markov shift of the start: F(a) Psi^{(-)}_{gamma+lambda}(b, a, u)
    //    = F(b) for the pair transform F, on random valid queries.
    {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(61_803);
        let mut worst = 0.0f64;
        for (idx, m) in [bm(0.3), bessel(1.0), reflected()].iter().enumerate() {
            let e = eng(m);
            for _ in 0..50 {
                let a = if idx == 0 {
                    rng.gen_range(-1.0..0.5)
                } else {
                    rng.gen_range(0.3..1.0)
                };
                let b = a + rng.gen_range(0.3..1.3);
                let u = rng.gen_range(0.3..2.0);
                let v = rng.gen_range(0.3..2.0);
                let gamma = rng.gen_range(0.1..1.5);
                let lambda = rng.gen_range(0.1..1.5);
                let qa = TwoBarrierQuery::new(m, a, b, a, u, v).unwrap();
                let qb = TwoBarrierQuery::new(m, a, b, b, u, v).unwrap();
                let fa = e.pair_laplace(&qa, gamma, lambda).unwrap();
                let fb = e.pair_laplace(&qb, gamma, lambda).unwrap();
                let psi = e.psi(gamma + lambda, b, a, Sign::Minus, u).unwrap();
                worst = worst.max(rel(fa * psi, fb));
            }
        }
        let ok = worst <= 1e-12 && t0.elapsed().as_secs_f64() < 10.0;
        gate.check(6, "start-shift identity", ok, t0, format!("max rel err = {worst:.2e} over 150 queries"));
    }

    // 7. One-barrier transform as the a -> b limit of the two-barrier one.
    {
        let t0 = Instant::now();
        let m = bm(0.0);
        let e = eng(&m);
        let one = e.one_barrier_pair_laplace(0.0, 1.0, 1.0, 0.5, 0.5).unwrap();
        let q = TwoBarrierQuery::new(&m, -1e-5, 0.0, 0.0, 1.0, 1.0).unwrap();
        let two = e.pair_laplace(&q, 0.5, 0.5).unwrap();
        let err = (one - two).abs();
        let ok = err <= 1e-5 && t0.elapsed().as_secs_f64() < 5.0;
        gate.check(7, "one-barrier limit", ok, t0, format!("|diff| = {err:.2e}"));
    }

    // 8. Meander endpoint laws: unit mass for every family and both
    //    directions, the Rayleigh law for the driftless down-meander, and
    //    the tilted up-meander excursion-tail identity.
    {
        let t0 = Instant::now();
        let mut worst_norm = 0.0f64;
        for m in [bm(0.0), bm(0.7), bessel(1.0), reflected()] {
            let e = eng(&m);
            for sign in [Sign::Minus, Sign::Plus] {
                for &u in &[0.25, 1.0, 4.0] {
                    let mass = e.meander_expectation(sign, 1.0, u, |_| 1.0).unwrap();
                    worst_norm = worst_norm.max((mass - 1.0).abs());
                }
            }
        }
        let m0 = bm(0.0);
        let e0 = eng(&m0);
        let mut worst_ray = 0.0f64;
        for &z in &[-2.0, -1.0, -0.5] {
            // The engine density is taken against the speed measure;
            // m'(z) = 2 converts it to the Lebesgue Rayleigh density.
            let got = 2.0 * e0.meander_density(Sign::Minus, 0.0, 1.0, z).unwrap();
            let want = z.abs() * (-0.5 * z * z).exp();
            worst_ray = worst_ray.max((got - want).abs());
        }
        let mut worst_tilt = 0.0f64;
        for m in [bm(0.3), bessel(1.0)] {
            let e = eng(&m);
            let (b, v, g) = (1.0, 0.8, 0.6);
            let phi_b = m.eigen(g, b).unwrap().phi_plus;
            let got = e
                .meander_expectation(Sign::Plus, b, v, |z| {
                    m.eigen(g, z).map(|ez| ez.phi_plus / phi_b).unwrap_or(0.0)
                })
                .unwrap();
            let nu = m.levy(b, Sign::Plus).unwrap();
            let want = (g * v).exp() * nu.exp_tail(g, v, &tol).unwrap() / nu.tail(v, &tol).unwrap();
            worst_tilt = worst_tilt.max(rel(got, want));
        }
        let ok = worst_norm <= 1e-8
            && worst_ray <= 1e-6
            && worst_tilt <= 1e-7
            && t0.elapsed().as_secs_f64() < 60.0;
        gate.check(8, "meander endpoint laws", ok, t0,
            format!("norm {worst_norm:.2e}, Rayleigh {worst_ray:.2e}, tilt {worst_tilt:.2e}"));
    }

    // 9. Monte Carlo agreement on the symmetric-ish two-barrier scenario.
    let m0 = bm(0.0);
    let e0 = eng(&m0);
    let scenario9 = SimScenario { a: 0.0, b: 1.0, start: 0.0, u: 1.0, v: 1.0 };
    let config9 = SimConfig { n_paths: 100_000, dt: 1e-4, horizon: 1e3, seed: 20_260_823, bridge: true };
    let t9 = Instant::now();
    let report9 = simulate(&m0, &scenario9, &config9).unwrap();
    {
        let q = TwoBarrierQuery::new(&m0, 0.0, 1.0, 0.0, 1.0, 1.0).unwrap();

        let order_ref = e0.order_probability(&q).unwrap();
        let order_mc = estimate(&report9.samples, &Functional::OrderProbability).unwrap();
        let order_err = (order_mc.mean - order_ref).abs();
        let order_tol = 3.0 * order_mc.std_error + 0.005;

        let pair_ref = e0.pair_laplace(&q, 0.5, 0.5).unwrap();
        let pair_mc = estimate(&report9.samples, &Functional::PairLaplace { gamma: 0.5, lambda: 0.5 }).unwrap();
        let pair_err = (pair_mc.mean - pair_ref).abs();
        let pair_tol = 3.0 * pair_mc.std_error;

        let weight = |z: f64| z.abs();
        let indep = estimate(
            &report9.samples,
            &Functional::IndependenceCovariance { rate: 1.0, weight: &weight },
        )
        .unwrap();
        let z_stat = indep.mean / indep.std_error;

        let ok = order_err <= order_tol && pair_err <= pair_tol && z_stat.abs() < 3.0;
        gate.check(9, "two-barrier Monte Carlo", ok, t9, format!(
            "order {:.5} vs {:.5} (tol {:.1e}), pair {:.3e} vs {:.3e} (tol {:.1e}), indep z = {:.2}, censored {:.1}%",
            order_mc.mean, order_ref, order_tol, pair_mc.mean, pair_ref, pair_tol, z_stat,
            100.0 * order_mc.censored_fraction
        ));
    }

    // 10. Transient ruin probability: formula against simulation, and the
    //     lifetime-measure atom against the small-rate eigenfunction limit.
    {
        let t0 = Instant::now();
        let m = bessel(1.0);
        let e = eng(&m);
        let scenario = SimScenario { a: 1.0, b: 1.0, start: 1.0, u: 1.0, v: 1.0 };
        let config = SimConfig { n_paths: 100_000, dt: 1e-4, horizon: 1e3, seed: 7_707, bridge: true };
        let report = simulate(&m, &scenario, &config).unwrap();
        let mut ruined = 0usize;
        let mut resolved = 0usize;
        for s in &report.samples {
            match s.kappa_minus {
                Outcome::Observed { .. } => {
                    ruined += 1;
                    resolved += 1;
                }
                Outcome::Infinite => resolved += 1,
                Outcome::Censored => {}
            }
        }
        let p_mc = ruined as f64 / resolved as f64;
        let se = (p_mc * (1.0 - p_mc) / resolved as f64).sqrt();
        let p_ref = e.ruin_probability(1.0, 1.0, 1.0).unwrap();
        let ruin_err = (p_mc - p_ref).abs();
        let ruin_tol = 3.0 * se + 0.01;

        let atom = m.levy(1.0, Sign::Plus).unwrap().atom_at_infinity();
        let atom_closed = (2.0f64.exp() - 1.0) / 2.0;
        let ei = m.eigen(1e-8, 1.0).unwrap();
        let atom_limit = -ei.dphi_plus / (m.scale_prime(1.0) * ei.phi_plus);
        let atom_err = (atom - atom_closed).abs().max((atom_limit - atom_closed).abs());

        let ok = ruin_err <= ruin_tol && atom_err <= 1e-6;
        gate.check(10, "transient ruin and atom", ok, t0, format!(
            "ruin {:.5} vs {:.5} (tol {:.1e}), atom err {:.2e}, unresolved {:.2}%",
            p_mc, p_ref, ruin_tol, atom_err,
            100.0 * (1.0 - resolved as f64 / report.samples.len() as f64)
        ));
    }

    // 11. Talbot inversion: known transform pairs round-trip on [0.1, 10],
    //     and the inverted kappa CDF tracks the empirical one from the
    //     criterion-9 samples.
    {
        let t0 = Instant::now();
        let ts: Vec<f64> = (0..60)
            .map(|i| 0.1 * (100.0f64).powf(i as f64 / 59.0))
            .collect();
        let mut sup_exp = 0.0f64;
        let mut sup_ramp = 0.0f64;
        let mut sup_erfc = 0.0f64;
        for &t in &ts {
            let got = invert(|s| Ok(1.0 / (s + 1.0)), t, 32).unwrap();
            sup_exp = sup_exp.max((got - (-t).exp()).abs());
            let got = invert(|s| Ok(1.0 / (s * s)), t, 32).unwrap();
            sup_ramp = sup_ramp.max((got - t).abs());
            let c = 1.0;
            let got = invert(|s| Ok((-c * (2.0 * s).sqrt()).exp() / s), t, 32).unwrap();
            sup_erfc = sup_erfc.max((got - erfc(c / (2.0 * t).sqrt())).abs());
        }
        let known_ok = sup_exp.max(sup_ramp).max(sup_erfc) <= 1e-7;

        let spec = InversionSpec::new(32, vec![0.5, 1.0, 2.0, 5.0, 10.0]).unwrap();
        let grid = kappa_cdf_on_grid(&e0, 0.0, 0.0, 1.0, &spec).unwrap();
        let mut worst_gap = 0.0f64;
        let mut cdf_ok = true;
        for &(t, cdf) in &grid.points {
            let mc = estimate(&report9.samples, &Functional::KappaCdf { t }).unwrap();
            let gap = (cdf - mc.mean).abs();
            worst_gap = worst_gap.max(gap);
            if gap > (3.0 * mc.std_error).max(0.01) {
                cdf_ok = false;
            }
        }
        let ok = known_ok && cdf_ok && t0.elapsed().as_secs_f64() < 120.0;
        gate.check(11, "transform inversion", ok, t0, format!(
            "round trips {:.2e}/{:.2e}/{:.2e}, kappa CDF sup gap {:.2e}",
            sup_exp, sup_ramp, sup_erfc, worst_gap
        ));
    }

    assert!(
        gate.failures.is_empty(),
        "acceptance criteria failed:\n{}",
        gate.failures.join("\n")
    );
}
