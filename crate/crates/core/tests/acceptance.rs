//! Acceptance suite. Each test is one gate criterion and prints a single
//! PASS line with the measured quantities (visible under `--nocapture`).
//!
//! The statistical criteria run the desk-scale design: m = 200 coordinates,
//! 400 replications, target level q = 0.1. Criterion 10 reruns the full
//! reference design and is ignored by default (it takes hours); run it with
//! `cargo test --release -p dirfdr --test acceptance -- --ignored`.

mod common;

use common::*;
use dirfdr::classical::{bh_dir, gr_procedure, storey_dir, StoreyConfig};
use dirfdr::mixture::{
    build_grid, component_likelihood, fit_weights, penalized_objective, posterior_lfsr, LikMatrix,
    MixtureModel, PenaltyConfig, SupportGrid,
};
use dirfdr::normal::{std_normal_pdf, FRAC_1_SQRT_2PI};
use dirfdr::null::NullFamily;
use dirfdr::oracle::{lfsr_threshold, true_lfsr, SimPrior};
use dirfdr::rng;
use dirfdr::sim::{run_study, MethodId, SimConfig};
use dirfdr::zdirect::{run_unmask_steps, zdirect_traced, ZdirectConfig};
use dirfdr::ZSample;

const Q: f64 = 0.1;
const DESK_M: usize = 200;
const DESK_REPS: usize = 400;

fn desk_cell(w: f64, xi: f64, v: f64, methods: Vec<MethodId>) -> SimConfig {
    SimConfig {
        m: DESK_M,
        reps: DESK_REPS,
        q: Q,
        w_grid: vec![w],
        xi_grid: vec![xi],
        v_grid: vec![v],
        methods,
        ..SimConfig::default()
    }
}

#[test]
fn criterion_01_directional_fdr_control() {
    let cells = [(0.8, 2.0, 1.0), (0.5, 1.5, 0.75), (0.2, 2.5, 0.5), (0.0, 2.0, 1.0)];
    let methods = [MethodId::BhDir, MethodId::StoreyDir, MethodId::Zdirect];
    let mut worst_margin = f64::INFINITY;
    for (w, xi, v) in cells {
        let res = run_study(&desk_cell(w, xi, v, methods.to_vec())).unwrap();
        for method in methods {
            let a = res.cell_aggregate(w, xi, v, method).unwrap();
            assert_eq!(a.n_errors, 0);
            let bound = Q + 3.0 * a.se_fdr_dir;
            assert!(
                a.mean_fdr_dir <= bound,
                "{method} at ({w},{xi},{v}): fdr {:.4} > {:.4}",
                a.mean_fdr_dir,
                bound
            );
            worst_margin = worst_margin.min(bound - a.mean_fdr_dir);
        }
    }
    println!(
        "criterion 01 directional FDR control (bh-dir, storey-dir, zdirect over 4 cells): \
         PASS (worst margin {worst_margin:.4})"
    );
}

#[test]
fn criterion_02_doubled_level_violates_the_target() {
    let (w, xi, v) = (0.8, 2.5, 1.0);
    let res = run_study(&desk_cell(w, xi, v, vec![MethodId::Gr])).unwrap();
    let a = res.cell_aggregate(w, xi, v, MethodId::Gr).unwrap();
    let bound = Q + 3.0 * a.se_fdr_dir;
    assert!(
        a.mean_fdr_dir > bound,
        "gr at ({w},{xi},{v}): fdr {:.4} did not exceed {:.4}",
        a.mean_fdr_dir,
        bound
    );
    println!(
        "criterion 02 doubled-level procedure violates the target under sparse nulls: \
         PASS (fdr {:.4} > {bound:.4})",
        a.mean_fdr_dir
    );
}

#[test]
fn criterion_03_adaptive_power_gain_without_nulls() {
    let (w, xi, v) = (0.0, 2.0, 0.5);
    let res = run_study(&desk_cell(w, xi, v, vec![MethodId::BhDir, MethodId::StoreyDir])).unwrap();
    let bh = res.rep_metrics(w, xi, v, MethodId::BhDir);
    let st = res.rep_metrics(w, xi, v, MethodId::StoreyDir);
    assert_eq!(bh.len(), DESK_REPS);
    assert_eq!(st.len(), DESK_REPS);
    let diffs: Vec<f64> = st.iter().zip(&bh).map(|(s, b)| s.tpp - b.tpp).collect();
    let (mean, se) = mean_se(&diffs);
    assert!(mean > 2.0 * se, "power gain {mean:.4} not significant at 2 se ({se:.5})");
    println!(
        "criterion 03 adaptive power gain over bh-dir with no true nulls: \
         PASS (tpr gain {mean:.4} at paired se {se:.5})"
    );
}

#[test]
fn criterion_04_masking_leverages_asymmetry() {
    let (w, xi, v) = (0.2, 2.0, 1.0);
    let res =
        run_study(&desk_cell(w, xi, v, vec![MethodId::StoreyDir, MethodId::Zdirect])).unwrap();
    let st = res.rep_metrics(w, xi, v, MethodId::StoreyDir);
    let zd = res.rep_metrics(w, xi, v, MethodId::Zdirect);
    let diffs: Vec<f64> = zd.iter().zip(&st).map(|(z, s)| z.tpp - s.tpp).collect();
    let (mean, se) = mean_se(&diffs);
    assert!(mean > 2.0 * se, "asymmetry gain {mean:.4} not significant at 2 se ({se:.5})");
    println!(
        "criterion 04 masking procedure beats the adaptive one under full asymmetry: \
         PASS (tpr gain {mean:.4} at paired se {se:.5})"
    );
}

#[test]
fn criterion_05_binomial_ratio_identity() {
    // E[Y/(n-Y+1)] for Y ~ Binomial(n, p) has the closed form (1-p^n)p/(1-p)
    let draws = 100_000usize;
    for (n, p) in [(1u32, 0.5f64), (5, 0.5), (10, 0.8)] {
        let mut r = rng::stream_rng(&[0xb17, n as u64, p.to_bits()]);
        let mut ratios = Vec::with_capacity(draws);
        for _ in 0..draws {
            let y = (0..n).filter(|_| rng::open_unit(&mut r) < p).count() as f64;
            ratios.push(y / (n as f64 - y + 1.0));
        }
        let (mean, se) = mean_se(&ratios);
        let exact = (1.0 - p.powi(n as i32)) * p / (1.0 - p);
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "n={n} p={p}: mc mean {mean:.5} vs exact {exact:.5} (se {se:.6})"
        );
    }
    // spot values of the closed form itself
    assert!((((1.0 - 0.5f64) * 0.5 / 0.5) - 0.5).abs() < 1e-15);
    assert!((((1.0 - 0.5f64.powi(5)) * 0.5 / 0.5) - 0.96875).abs() < 1e-15);
    println!("criterion 05 binomial ratio identity matches Monte-Carlo at 3 se: PASS");
}

#[test]
fn criterion_06_masking_firewall() {
    // flipping masked values to their exact reflections must leave the
    // unmask sequence and every fitted weight vector identical, bit for bit;
    // flips are drawn from coordinates that stay masked for the whole run,
    // because revealing a coordinate is exactly when its value may speak
    let std = NullFamily::standard_normal();
    let config = ZdirectConfig::default();
    let mut total_flips = 0usize;
    let mut compared = 0usize;
    for trial in 0..100u64 {
        let mut r = rng::stream_rng(&[0xf11e, trial]);
        let z: Vec<f64> = (0..50)
            .map(|_| {
                let shift = if rng::open_unit(&mut r) < 0.4 {
                    if rng::open_unit(&mut r) < 0.7 {
                        2.2
                    } else {
                        -2.2
                    }
                } else {
                    0.0
                };
                shift + rng::standard_normal(&mut r)
            })
            .collect();
        let sample = ZSample::with_standard_normal(z.clone()).unwrap();
        let probe = run_unmask_steps(&sample, &config, 0).unwrap();
        let n_masked = probe.final_masked.len();
        if n_masked < 4 {
            continue;
        }
        let steps = n_masked / 2;
        let base = run_unmask_steps(&sample, &config, steps).unwrap();

        let mut flipped_z = z.clone();
        let mut flips = 0usize;
        for &i in &base.final_masked {
            if rng::open_unit(&mut r) < 0.5 {
                if let Some(partner) = exact_flip(z[i], &std) {
                    flipped_z[i] = partner;
                    flips += 1;
                }
            }
        }
        if flips == 0 {
            continue;
        }
        let flipped_sample = ZSample::with_standard_normal(flipped_z).unwrap();
        let other = run_unmask_steps(&flipped_sample, &config, steps).unwrap();

        assert_eq!(base.initial_masked, other.initial_masked, "trial {trial}: initial masked set");
        assert_eq!(base.unmask_order, other.unmask_order, "trial {trial}: unmask sequence");
        assert_eq!(
            base.fitted_weights, other.fitted_weights,
            "trial {trial}: fitted weights diverged"
        );
        assert_eq!(base.final_masked, other.final_masked);
        total_flips += flips;
        compared += 1;
    }
    assert!(compared >= 80, "only {compared} comparable trials");
    assert!(total_flips >= 300, "only {total_flips} flips exercised");
    println!(
        "criterion 06 masking firewall: PASS \
         ({compared} flipped runs, {total_flips} flips, identical traces)"
    );
}

#[test]
fn criterion_07_termination() {
    let m = 30usize;
    let mut max_steps = 0usize;
    for trial in 0..1000u64 {
        let mut r = rng::stream_rng(&[0x7e12, trial]);
        let z: Vec<f64> = (0..m)
            .map(|_| {
                let shift = match (rng::open_unit(&mut r) * 3.0) as u32 {
                    0 => 0.0,
                    1 => 1.5 + 2.0 * rng::open_unit(&mut r),
                    _ => -1.5 - 2.0 * rng::open_unit(&mut r),
                };
                shift + rng::standard_normal(&mut r)
            })
            .collect();
        let sample = ZSample::with_standard_normal(z).unwrap();
        let q = 0.05 + 0.25 * rng::open_unit(&mut r);
        let (decisions, trace) = zdirect_traced(&sample, q, &ZdirectConfig::default()).unwrap();
        assert!(trace.loop_steps <= m, "trial {trial}: {} unmask steps", trace.loop_steps);
        assert!(decisions.len() <= m);
        max_steps = max_steps.max(trace.loop_steps);
    }
    println!(
        "criterion 07 termination within m unmask steps on 1000 random inputs: \
         PASS (max {max_steps} of {m})"
    );
}

#[test]
fn criterion_08_numerical_oracles() {
    let mut r = rng::stream_rng(&[0x0c8, 1]);

    // slab and point-mass likelihoods against adaptive quadrature
    let mut worst_rel = 0.0f64;
    for case in 0..1000 {
        let sigma = 0.5 + 2.5 * rng::open_unit(&mut r);
        let fam = NullFamily::normal(sigma).unwrap();
        let z = 12.0 * rng::open_unit(&mut r) - 6.0;
        let endpoints: Vec<f64> = {
            let a1 = 0.2 + rng::open_unit(&mut r);
            vec![a1, a1 * 2.0, a1 * 5.0]
        };
        let grid = SupportGrid::new(endpoints).unwrap();
        let masked = rng::open_unit(&mut r) < 0.5;
        let z_check = 12.0 * rng::open_unit(&mut r) - 6.0;
        let k = [-3, -2, -1, 1, 2, 3][(rng::open_unit(&mut r) * 6.0) as usize % 6];
        let closed = component_likelihood(z, z_check, masked, k, &grid, &fam).unwrap();

        // quadrature tolerance pinned well below the comparison tolerance,
        // relative to the value under test
        let quad_tol = (closed.abs() * 1e-12).max(1e-280);
        let slab_integral = |x: f64| {
            let a = grid.endpoint(k);
            let (lo, hi) = if a > 0.0 { (0.0, a) } else { (a, 0.0) };
            let density =
                |theta: f64| std_normal_pdf((x - theta) / sigma) / sigma / (hi - lo);
            adaptive_simpson(&density, lo, hi, quad_tol)
        };
        let mut reference = slab_integral(z);
        if masked {
            reference += slab_integral(z_check);
        }
        if reference > 1e-100 {
            let rel = (closed - reference).abs() / reference;
            assert!(rel < 1e-8, "case {case}: relative error {rel:.2e}");
            worst_rel = worst_rel.max(rel);
        }
    }

    // exact local false sign rates against effect-grid quadrature
    let mut worst_lfsr = 0.0f64;
    for case in 0..1000 {
        let prior = SimPrior::new(
            rng::open_unit(&mut r),
            0.5 + 2.5 * rng::open_unit(&mut r),
            rng::open_unit(&mut r),
        )
        .unwrap();
        let z = 10.0 * rng::open_unit(&mut r) - 5.0;
        let closed = true_lfsr(z, &prior);

        let signal = |theta: f64| {
            (1.0 - prior.w)
                * ((1.0 - prior.v) * std_normal_pdf(theta + prior.xi)
                    + prior.v * std_normal_pdf(theta - prior.xi))
                * std_normal_pdf(z - theta)
        };
        let span = prior.xi + 12.0;
        let neg = adaptive_simpson(&signal, -span, 0.0, 1e-13);
        let pos = adaptive_simpson(&signal, 0.0, span, 1e-13);
        let null_mass = prior.w * std_normal_pdf(z);
        let total = null_mass + neg + pos;
        let reference = ((null_mass + neg).min(null_mass + pos)) / total;
        let err = (closed - reference).abs();
        assert!(err < 1e-6, "case {case}: lfsr error {err:.2e}");
        worst_lfsr = worst_lfsr.max(err);
    }

    // fitted-prior local false sign rates against per-component quadrature
    for case in 0..200 {
        let grid = SupportGrid::new(vec![0.4, 1.1, 2.7]).unwrap();
        let std = NullFamily::standard_normal();
        let weights = random_simplex_point(&mut r, grid.n_components());
        let model = MixtureModel::new(grid.clone(), weights).unwrap();
        let z = 8.0 * rng::open_unit(&mut r) - 4.0;
        let closed = posterior_lfsr(z, &std, &model).unwrap();

        let slab = |k: i32| {
            let a = grid.endpoint(k);
            let (lo, hi) = if a > 0.0 { (0.0, a) } else { (a, 0.0) };
            let density = |theta: f64| std_normal_pdf(z - theta) / (hi - lo);
            adaptive_simpson(&density, lo, hi, 1e-13)
        };
        let center = grid.k_max() as i32;
        let mut neg = 0.0;
        let mut pos = 0.0;
        for k in 1..=center {
            neg += model.weights[grid.column(-k)] * slab(-k);
            pos += model.weights[grid.column(k)] * slab(k);
        }
        let null_mass = model.weights[grid.column(0)] * std_normal_pdf(z);
        let total = neg + pos + null_mass;
        let reference = (neg + null_mass).min(pos + null_mass) / total;
        let err = (closed - reference).abs();
        assert!(err < 1e-6, "case {case}: fitted lfsr error {err:.2e}");
    }

    // fitted weights dominate random simplex points
    for instance in 0..5u64 {
        let mut rr = rng::stream_rng(&[0xd0a1, instance]);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..7).map(|_| rng::open_unit(&mut rr) * 2.0).collect())
            .collect();
        let lik = LikMatrix::from_rows(rows).unwrap();
        let penalty = PenaltyConfig::flat(0.8, 7).unwrap();
        let fitted = fit_weights(&lik, &penalty).unwrap();
        let fitted_obj = penalized_objective(&lik, &penalty, &fitted).unwrap();
        for _ in 0..1000 {
            let point = random_simplex_point(&mut rr, 7);
            let obj = penalized_objective(&lik, &penalty, &point).unwrap();
            assert!(
                fitted_obj >= obj - 1e-9,
                "instance {instance}: random point beats the fit by {}",
                obj - fitted_obj
            );
        }
    }
    println!(
        "criterion 08 numerical oracles: PASS \
         (slab rel err <= {worst_rel:.2e}, lfsr abs err <= {worst_lfsr:.2e}, \
          fit dominates 5000 simplex points)"
    );
}

#[test]
fn criterion_09_procedure_oracles() {
    let mut r = rng::stream_rng(&[0x09ac, 3]);

    // adaptive procedure against a brute-force threshold search on the grid
    // t in {0, 1e-5, 2e-5, ...} up to the split point
    let (lambda, q) = (0.5, 0.1);
    for case in 0..100 {
        let m = 20usize;
        let ps: Vec<f64> = (0..m)
            .map(|_| {
                if rng::open_unit(&mut r) < 0.4 {
                    0.002 + 0.2 * rng::open_unit(&mut r)
                } else {
                    rng::open_unit(&mut r)
                }
            })
            .collect();
        let sample = sample_with_pvalues(&ps);
        let got = storey_dir(&sample, &StoreyConfig::new(lambda, q).unwrap()).unwrap();

        let pi_hat = dirfdr::classical::storey_pi_hat(&ps, lambda);
        let mut best_t = f64::NEG_INFINITY;
        let mut step = 0usize;
        loop {
            let t = step as f64 * 1e-5;
            if t > lambda {
                break;
            }
            let n_at_most = ps.iter().filter(|&&p| p <= t).count();
            let est = pi_hat * m as f64 * t / n_at_most.max(1) as f64;
            if est <= q {
                best_t = t;
            }
            step += 1;
        }
        let expected: Vec<usize> = (0..m).filter(|&i| ps[i] <= best_t).collect();
        assert_eq!(got.rejected(), expected, "case {case}: adaptive threshold mismatch");
    }

    // step-up procedures against direct enumeration
    for case in 0..100 {
        let m = 25usize;
        let ps: Vec<f64> = (0..m)
            .map(|_| {
                if rng::open_unit(&mut r) < 0.3 {
                    0.001 + 0.05 * rng::open_unit(&mut r)
                } else {
                    rng::open_unit(&mut r)
                }
            })
            .collect();
        let sample = sample_with_pvalues(&ps);
        let bh = bh_dir(&sample, 0.1).unwrap();
        assert_eq!(bh.rejected(), step_up_oracle(&ps, 0.1), "case {case}: bh mismatch");
        let gr = gr_procedure(&sample, 0.1).unwrap();
        assert_eq!(gr.rejected(), step_up_oracle(&ps, 0.2), "case {case}: gr mismatch");
    }

    // prefix-mean thresholding keeps the mean of the rejected rates at q
    for _ in 0..200 {
        let lfsrs: Vec<f64> = (0..40).map(|_| rng::open_unit(&mut r)).collect();
        let rejected = lfsr_threshold(&lfsrs, 0.12);
        if !rejected.is_empty() {
            let mean: f64 =
                rejected.iter().map(|&i| lfsrs[i]).sum::<f64>() / rejected.len() as f64;
            assert!(mean <= 0.12 + 1e-12);
        }
    }
    println!(
        "criterion 09 procedure oracles: PASS \
         (100 threshold searches, 200 step-up enumerations, 200 prefix-mean bounds)"
    );
}

/// Full-design rerun; hours of compute, hence ignored by default.
#[test]
#[ignore = "full-scale reproduction; run explicitly in release mode"]
fn criterion_10_full_reproduction() {
    let cfg = SimConfig::default();
    let res = run_study(&cfg).unwrap();
    let cells = cfg.cells().unwrap();

    // guaranteed procedures control the directional FDR in every cell
    for prior in &cells {
        for method in [MethodId::BhDir, MethodId::StoreyDir, MethodId::Zdirect, MethodId::LfsrOracle] {
            let a = res.cell_aggregate(prior.w, prior.xi, prior.v, method).unwrap();
            assert!(
                a.mean_fdr_dir <= cfg.q + 3.0 * a.se_fdr_dir,
                "{method} at ({},{},{}): fdr {:.4}",
                prior.w,
                prior.xi,
                prior.v,
                a.mean_fdr_dir
            );
        }
    }

    // the adaptive procedure gains substantially over the step-up baseline
    // once nothing is null
    for prior in cells.iter().filter(|p| p.w == 0.0 && p.xi >= 1.5) {
        let st = res.cell_aggregate(prior.w, prior.xi, prior.v, MethodId::StoreyDir).unwrap();
        let bh = res.cell_aggregate(prior.w, prior.xi, prior.v, MethodId::BhDir).unwrap();
        assert!(
            st.mean_tpr - bh.mean_tpr > 0.05,
            "no substantial gain at ({},{},{})",
            prior.w,
            prior.xi,
            prior.v
        );
    }

    // the doubled-level procedure breaks the target badly under sparse nulls
    for prior in cells.iter().filter(|p| p.w == 0.8 && p.xi >= 2.0) {
        let gr = res.cell_aggregate(prior.w, prior.xi, prior.v, MethodId::Gr).unwrap();
        assert!(gr.mean_fdr_dir > cfg.q + 3.0 * gr.se_fdr_dir);
    }

    // the shrinkage procedure violates the target somewhere at w in {0.2, 0.5}
    let ash_violates = cells
        .iter()
        .filter(|p| p.w == 0.2 || p.w == 0.5)
        .any(|p| {
            let a = res.cell_aggregate(p.w, p.xi, p.v, MethodId::Ash).unwrap();
            a.mean_fdr_dir > cfg.q + 3.0 * a.se_fdr_dir
        });
    assert!(ash_violates);

    // masking beats the adaptive procedure under full asymmetry, in the
    // cells where power is not already saturated
    for prior in cells
        .iter()
        .filter(|p| p.v == 1.0 && (p.w == 0.5 || p.w == 0.2) && p.xi >= 2.0)
    {
        let zd = res.cell_aggregate(prior.w, prior.xi, prior.v, MethodId::Zdirect).unwrap();
        let st = res.cell_aggregate(prior.w, prior.xi, prior.v, MethodId::StoreyDir).unwrap();
        assert!(
            zd.mean_tpr > st.mean_tpr,
            "no asymmetry gain at ({},{},{})",
            prior.w,
            prior.xi,
            prior.v
        );
    }
    println!("criterion 10 full-design qualitative reproduction: PASS");
}

// keep the imported density constant exercised (and the import honest)
#[test]
fn density_normalizer_is_consistent() {
    assert!((std_normal_pdf(0.0) - FRAC_1_SQRT_2PI).abs() < 1e-16);
    let total = adaptive_simpson(&std_normal_pdf, -10.0, 10.0, 1e-13);
    assert!((total - 1.0).abs() < 1e-10);
    let grid = build_grid(4.0, 0.1, std::f64::consts::SQRT_2);
    assert!(grid.k_max() >= 8);
}
