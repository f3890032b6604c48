//! Acceptance criteria. Runs as a plain binary (no libtest harness) so that
//! every criterion prints one PASS/FAIL line; exits non-zero on any failure.

use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use vbsim::charges::{sample_point, PositionLaw};
use vbsim::coupling::{
    extract_coupling_slope, strain_perturbation, stress_couplings, CouplingConstants,
    StrainTensor2D,
};
use vbsim::odmr::{
    fit_spectrum, hyperfine_detunings, relative_densities, scatter_levels, synthesize_spectrum,
    Environment, FitConfig, FrequencyGrid, PerturbationKind, SynthesisParams, FAST_N_CONFIGS,
};
use vbsim::rng::substream;
use vbsim::spin::{build_hamiltonian, resonance_frequencies, ZfsParameters};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn k() -> CouplingConstants {
    CouplingConstants::experimental()
}

/// 1. Eigensolver resonances against the closed form D +- sqrt(E1^2 + E2^2).
fn analytic_resonances() -> Outcome {
    let mut rng = substream(1001, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let d = rng.random_range(3000.0..4000.0);
        let e1 = rng.random_range(-100.0..100.0);
        let e2 = rng.random_range(-100.0..100.0);
        let h = build_hamiltonian(&ZfsParameters::new(d, e1, e2), 0.0);
        let (fm, fp) = resonance_frequencies(&h).map_err(|e| e.to_string())?;
        let e = f64::hypot(e1, e2);
        worst = worst.max((fm - (d - e)).abs()).max((fp - (d + e)).abs());
    }
    check(worst <= 1e-6, format!("max |error| = {worst:.3e} MHz (tol 1e-6)"))
}

/// 2. h1 = g1/(C11+C12), h2 = g2/(C11-C12) from the default constants.
fn stress_conversion() -> Outcome {
    let (h1, h2) = stress_couplings(&k()).map_err(|e| e.to_string())?;
    let exact = (h1 - (-19_200.0 / 979.0)).abs() < 1e-12 && (h2 - 2_600.0 / 643.0).abs() < 1e-12;
    let quoted = format!("{h1:.2}") == "-19.61" && format!("{h2:.2}") == "4.04";
    check(exact && quoted, format!("h1 = {h1:.6} MHz/GPa, h2 = {h2:.6} MHz/GPa"))
}

/// 3. Random-environment level statistics.
fn scatter_statistics() -> Outcome {
    let k = k();
    let strain_mags: Vec<f64> = (1..=20).map(|i| i as f64 * 5e-4).collect();
    let ds = scatter_levels(PerturbationKind::Strain, &strain_mags, 1000, &k, 2024)
        .map_err(|e| e.to_string())?;
    let ratio = ds.shift_to_splitting_ratio(k.d0_mhz);

    let field_mags: Vec<f64> = (1..=20).map(|i| i as f64 * 5e4).collect();
    let de = scatter_levels(PerturbationKind::Electric, &field_mags, 1000, &k, 2025)
        .map_err(|e| e.to_string())?;
    let mut centroid = 0.0f64;
    let mut half = 0.0f64;
    for r in &de.rows {
        centroid = centroid.max((r.centroid() - k.d0_mhz).abs());
        half = half.max((r.half_splitting() - k.d_perp * 1e-6 * r.magnitude).abs());
    }
    check(
        (ratio - 7.38).abs() <= 0.15 && centroid <= 1e-9 && half <= 1e-9,
        format!(
            "strain shift/splitting = {ratio:.4} (7.38 +- 0.15); electric max |centroid shift| = {centroid:.2e} MHz, max |half-splitting - d_perp*E| = {half:.2e} MHz (tol 1e-9)"
        ),
    )
}

/// 4. Radial law and isotropy of the charge sampler.
fn sampling_law() -> Outcome {
    let start = Instant::now();
    let n = 100_000;
    let radius = 10.0;
    let mut rng = substream(4004, 0);
    let mut radii = Vec::with_capacity(n);
    let mut mean = [0.0f64; 3];
    for _ in 0..n {
        let p = sample_point(&mut rng, radius, PositionLaw::UniformBall);
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        radii.push(r / radius);
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / r;
        }
    }
    radii.sort_by(f64::total_cmp);
    let nf = n as f64;
    let ks = radii
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = x.powi(3);
            (cdf - i as f64 / nf).abs().max(((i + 1) as f64 / nf - cdf).abs())
        })
        .fold(0.0, f64::max);
    // asymptotic Kolmogorov critical value at alpha = 0.01
    let critical = 1.628 / nf.sqrt();
    let iso = mean.iter().map(|m| (m / nf).powi(2)).sum::<f64>().sqrt();
    let elapsed = start.elapsed();
    check(
        ks < critical && iso < 0.01 && elapsed < Duration::from_secs(5),
        format!(
            "KS D = {ks:.5} (crit {critical:.5}), |mean direction| = {iso:.5} (< 0.01), {:.2} s (< 5 s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// 5. Coupling slopes regenerated from noiseless strain sweeps.
fn slope_round_trip() -> Outcome {
    let k = k();
    let strains: Vec<f64> = (-10..=10).map(|i| i as f64 * 2e-4).collect();
    let sweep = |f: &dyn Fn(f64) -> (f64, StrainTensor2D), pick: fn(&ZfsParameters) -> f64| {
        strains
            .iter()
            .map(|&e| {
                let (x, eps) = f(e);
                (x, pick(&strain_perturbation(&eps, &k).unwrap()))
            })
            .collect::<Vec<_>>()
    };
    let normal = |e: f64| (e, StrainTensor2D::new(e, 0.0, 0.0));
    // literal convention: the shear bilinear form is exy + eyx
    let shear = |e: f64| (2.0 * e, StrainTensor2D::new(0.0, 0.0, e));
    let (g1, _) = extract_coupling_slope(&sweep(&normal, |z| z.d)).map_err(|e| e.to_string())?;
    let (g2, _) = extract_coupling_slope(&sweep(&normal, |z| z.e1)).map_err(|e| e.to_string())?;
    let (g3p, _) = extract_coupling_slope(&sweep(&shear, |z| z.e2)).map_err(|e| e.to_string())?;
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let worst = rel(g1, k.g1).max(rel(g2, k.g2)).max(rel(g3p, k.g3p));
    check(
        worst <= 1e-9,
        format!("g1 = {g1:.6}, g2 = {g2:.6}, g3' = {g3p:.6} MHz/strain; max rel err {worst:.2e}"),
    )
}

/// 6. Hyperfine manifold and symmetry of the zero-density spectrum.
fn hyperfine_structure() -> Outcome {
    let hf = hyperfine_detunings(47.0);
    let want = [
        (-141.0, 1.0),
        (-94.0, 3.0),
        (-47.0, 6.0),
        (0.0, 7.0),
        (47.0, 6.0),
        (94.0, 3.0),
        (141.0, 1.0),
    ];
    let manifold = hf.len() == 7
        && hf
            .iter()
            .zip(want)
            .all(|(&(s, w), (ws, ww))| s == ws && (w - ww / 27.0).abs() < 1e-15);

    let k = k();
    let grid = FrequencyGrid::centered(k.d0_mhz, 500.0, 0.5).map_err(|e| e.to_string())?;
    let params = SynthesisParams {
        rho_c: 0.0,
        contrast: 0.05,
        linewidth_mhz: 30.0,
        n_configs: 16,
        seed: 6,
    };
    let syn = synthesize_spectrum(&params, &grid, &k, &Environment::default())
        .map_err(|e| e.to_string())?;
    let s = &syn.spectrum.signal;
    let asym = (0..s.len())
        .map(|i| (s[i] - s[s.len() - 1 - i]).abs())
        .fold(0.0, f64::max);
    check(
        manifold && asym <= 1e-6,
        format!("manifold ok = {manifold}; max |S(D0+f) - S(D0-f)| = {asym:.2e} (tol 1e-6)"),
    )
}

/// 7. Fit round trip with common random numbers.
fn fit_round_trip() -> Outcome {
    let start = Instant::now();
    let k = k();
    let env = Environment::default();
    let seed = 777;
    let (rho, contrast) = (0.046, 0.05);
    let grid = FrequencyGrid::centered(k.d0_mhz, 400.0, 2.0).map_err(|e| e.to_string())?;
    let params = SynthesisParams {
        rho_c: rho,
        contrast,
        linewidth_mhz: 30.0,
        n_configs: FAST_N_CONFIGS,
        seed,
    };
    let measured = synthesize_spectrum(&params, &grid, &k, &env)
        .map_err(|e| e.to_string())?
        .spectrum;
    let cfg = FitConfig {
        n_configs: FAST_N_CONFIGS,
        linewidth_mhz: 30.0,
        env,
        ..FitConfig::default()
    };
    let fit = fit_spectrum(&measured, &cfg, &k, seed).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let monotone = fit.cycle_residuals.windows(2).all(|w| w[1] <= w[0]);
    check(
        (fit.rho_c - rho).abs() <= fit.step_rho
            && (fit.contrast - contrast).abs() <= fit.step_contrast
            && monotone
            && fit.cycle_residuals.len() == 3
            && fit.boundary_hits.is_empty()
            && elapsed < Duration::from_secs(180),
        format!(
            "rho_c = {:.5} +- {:.5}, contrast = {:.5} +- {:.5}, cycle SSR = {:?}, {:.1} s (< 180 s)",
            fit.rho_c,
            fit.step_rho,
            fit.contrast,
            fit.step_contrast,
            fit.cycle_residuals,
            elapsed.as_secs_f64()
        ),
    )
}

/// 8. Mean splitting grows with charge density.
fn splitting_monotone() -> Outcome {
    let k = k();
    let grid = FrequencyGrid::centered(k.d0_mhz, 500.0, 2.0).map_err(|e| e.to_string())?;
    let mut splits = Vec::new();
    for rho in [0.018, 0.046, 0.141] {
        let params = SynthesisParams {
            rho_c: rho,
            contrast: 0.05,
            linewidth_mhz: 30.0,
            n_configs: FAST_N_CONFIGS,
            seed: 88,
        };
        let syn = synthesize_spectrum(&params, &grid, &k, &Environment::default())
            .map_err(|e| e.to_string())?;
        splits.push(syn.mean_splitting_mhz);
    }
    check(
        splits.windows(2).all(|w| w[1] > w[0]),
        format!("mean splitting at 0.018/0.046/0.141 nm^-3 = {splits:.3?} MHz"),
    )
}

/// 9. PL slope ratios.
fn pl_ratios() -> Outcome {
    let base = 1234.5;
    let mut rng = substream(9, 0);
    let series: Vec<Vec<(f64, f64)>> = [1.0, 4.8, 8.5]
        .iter()
        .map(|m| {
            let offset: f64 = rng.random_range(0.0..500.0);
            (1..=8)
                .map(|i| {
                    let p = 0.1 * i as f64;
                    (p, offset + m * base * p)
                })
                .collect()
        })
        .collect();
    let r = relative_densities(&series).map_err(|e| e.to_string())?;
    check(
        (r[1] - 4.8).abs() <= 1e-9 && (r[2] - 8.5).abs() <= 1e-9,
        format!("S2/S1 = {:.12}, S3/S1 = {:.12}", r[1], r[2]),
    )
}

/// 10. `synth` output is byte-identical for 1 and 8 threads.
fn thread_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |threads: &str, name: &str| -> Result<Vec<u8>, String> {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_vbsim"))
            .args(["synth", "--rho", "0.046", "--contrast", "0.05", "--n-configs", "1000"])
            .args(["--seed", "42", "--threads", threads, "--out"])
            .arg(&path)
            .env_remove("VBSIM_CONFIG")
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("synth exited with {status}"));
        }
        std::fs::read(&path).map_err(|e| e.to_string())
    };
    let one = run("1", "t1.csv")?;
    let eight = run("8", "t8.csv")?;
    check(
        one == eight && !one.is_empty(),
        format!("{} bytes, identical = {}", one.len(), one == eight),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1 analytic resonance oracle", analytic_resonances),
        ("AC2 stress conversion", stress_conversion),
        ("AC3 random-environment statistics", scatter_statistics),
        ("AC4 sampling law", sampling_law),
        ("AC5 coupling-slope round trip", slope_round_trip),
        ("AC6 hyperfine structure", hyperfine_structure),
        ("AC7 fit round trip", fit_round_trip),
        ("AC8 splitting monotone in density", splitting_monotone),
        ("AC9 PL density ratios", pl_ratios),
        ("AC10 thread-count determinism", thread_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.2} s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
