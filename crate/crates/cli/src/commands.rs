use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use nlinterf::estimator::{extract_cd, fit, initial_guess, monte_carlo, FitResult, McSummary};
use nlinterf::interferogram::{add_noise, read_trace_csv, synthesize, write_trace_csv, Interferogram, TraceMeta};
use nlinterf::phase_matching::{acceptance, shg_suppression};
use nlinterf::spectral::{detuning_from_degeneracy, Wavelength};
use nlinterf::verify::{self, Fault};

use crate::config::ScenarioConfig;
use crate::report::{write_csv, write_file, KeyValue, Num};
use crate::svg::histogram_svg;
use crate::{Cli, Command, Failure};

/// Quantum-phase scale used by the hidden verification fault.
const FAULT_PHASE_SCALE: f64 = 1.01;

pub fn dispatch(cli: &Cli, vars: Vec<(String, String)>) -> Result<(), Failure> {
    let mut cfg = ScenarioConfig::load(cli.config.as_deref(), vars)?;
    if let Some(seed) = cli.seed {
        cfg.noise.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
    let out = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&out).map_err(|e| Failure::io(format!("cannot create output directory {}: {e}", out.display())))?;

    let run = || match &cli.command {
        Command::Acceptance => cmd_acceptance(&cfg, &out),
        Command::Synth => cmd_synth(&cfg, &out),
        Command::Fit { trace } => cmd_fit(&cfg, trace, &out),
        Command::Mc { n, svg } => cmd_mc(&cfg, n.unwrap_or(cfg.mc.n_scans), *svg || cfg.mc.svg, &out),
        Command::Verify { inject_fault } => {
            cmd_verify(cfg.noise.seed, if *inject_fault { Fault::ScaleQuantumPhase(FAULT_PHASE_SCALE) } else { Fault::None })
        }
    };
    match cli.threads {
        Some(0) => Err(Failure::config("--threads must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Failure::config(format!("cannot start {t} threads: {e}")))?
            .install(run),
        None => run(),
    }
}

fn core<T>(r: nlinterf::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::from_core)
}

pub fn cmd_acceptance(cfg: &ScenarioConfig, out: &Path) -> Result<(), Failure> {
    let env = cfg.envelope()?;
    let shg = cfg.shg()?;
    let grid = &cfg.acceptance;
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if grid.points < 2 || !(grid.stop_nm > grid.start_nm) {
        return Err(Failure::config("[acceptance] needs points ≥ 2 and stop_nm > start_nm"));
    }
    let mut rows = Vec::with_capacity(grid.points);
    for k in 0..grid.points {
        let nm = grid.start_nm + (grid.stop_nm - grid.start_nm) * k as f64 / (grid.points - 1) as f64;
        let l = core(Wavelength::from_nm(nm))?;
        rows.push(vec![
            Num(nm),
            Num(acceptance(&env.dfg, l)),
            Num(acceptance(&env.sfg_arm1, l)),
            Num(acceptance(&env.sfg_arm2, l)),
            Num(acceptance(&shg, l)),
        ]);
    }
    let path = out.join("acceptance.csv");
    write_csv(&path, &["lambda_nm", "dfg", "sfg1", "sfg2", "shg"], rows)?;

    let ratio = core(shg_suppression(&shg, &cfg.sweep()?))?;
    let verdict = if ratio <= grid.shg_threshold { "PASS" } else { "FAIL" };
    say!("wrote {}", path.display());
    say!("shg_suppression = {ratio:e}");
    say!("shg_check = {verdict} (threshold {})", grid.shg_threshold);
    Ok(())
}

#[derive(Serialize)]
struct TraceSidecar<'a> {
    origin: &'a str,
    seed: u64,
    scan_index: u64,
    samples: usize,
    fringes: f64,
    warnings: &'a [String],
    config: &'a ScenarioConfig,
}

/// Fringes spanned by a trace for the configured `β₂L`.
fn fringe_count(cfg: &ScenarioConfig, trace: &Interferogram<f64>) -> Result<f64, Failure> {
    let fiber = cfg.fiber()?;
    let pump = cfg.pump()?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for l in trace.wavelengths() {
        let dw = core(detuning_from_degeneracy(l, pump))?.value();
        lo = lo.min(dw * dw);
        hi = hi.max(dw * dw);
    }
    Ok((fiber.beta2 * fiber.length * (hi - lo)).abs() / std::f64::consts::TAU)
}

fn write_trace(trace: &Interferogram<f64>, path: &Path) -> Result<(), Failure> {
    let mut buf = Vec::new();
    core(write_trace_csv(trace, &mut buf))?;
    fs::write(path, buf).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_synth(cfg: &ScenarioConfig, out: &Path) -> Result<(), Failure> {
    let scenario = cfg.scenario()?;
    let clean = core(synthesize(&scenario.synthesis))?;
    let noisy = core(add_noise(&clean, &scenario.noise))?;
    write_trace(&clean, &out.join("trace_clean.csv"))?;
    write_trace(&noisy, &out.join("trace_noisy.csv"))?;
    let fringes = fringe_count(cfg, &clean)?;
    let meta: &TraceMeta = &noisy.meta;
    // where the files went is not part of the scenario
    let scenario_only = ScenarioConfig { output: Default::default(), ..cfg.clone() };
    let sidecar = TraceSidecar {
        origin: &meta.origin,
        seed: cfg.noise.seed,
        scan_index: meta.scan_index.unwrap_or(0),
        samples: clean.len(),
        fringes,
        warnings: &meta.warnings,
        config: &scenario_only,
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_file(&out.join("trace.meta.json"), &(json + "\n"))?;
    for w in &meta.warnings {
        eprintln!("warning: {w}");
    }
    say!("samples = {}", clean.len());
    say!("fringes = {}", Num(fringes));
    say!("seed = {}", cfg.noise.seed);
    say!("wrote {}", out.join("trace_noisy.csv").display());
    Ok(())
}

fn fit_report(cfg: &ScenarioConfig, r: &FitResult<f64>) -> Result<KeyValue, Failure> {
    let fiber = cfg.fiber()?;
    let mut kv = KeyValue::default();
    kv.put("converged", r.converged)
        .put("termination", format!("{:?}", r.termination))
        .put("iterations", r.iterations)
        .put("n_samples", r.n_samples)
        .put("rss", Num(r.rss))
        .put("residual_std", Num(r.residual_std()));
    let m = &r.model;
    let sigma = |name: &str| r.std_error(name).unwrap_or(f64::NAN);
    kv.put("amplitude", Num(m.amplitude))
        .put("amplitude_sigma", Num(sigma("amplitude")))
        .put("offset", Num(m.offset))
        .put("offset_sigma", Num(sigma("offset")))
        .put("visibility", Num(m.visibility))
        .put("visibility_sigma", Num(sigma("visibility")))
        .put("beta2L_s2", Num(m.beta2l))
        .put("beta2L_sigma_s2", Num(sigma("beta2L")))
        .put("phi0_rad", Num(m.phi0))
        .put("phi0_sigma_rad", Num(sigma("phi0")));
    for name in r.parameter_names.iter().skip(5) {
        kv.put(&format!("{name}_sigma"), Num(sigma(name)));
    }
    kv.put("fiber_length_m", Num(fiber.length)).put("lambda0_nm", Num(fiber.reference.nm()));
    if r.converged {
        let d = core(extract_cd(r, fiber.length, fiber.reference))?;
        kv.put("beta2_s2_m", Num(d.beta2))
            .put("beta2_sigma_s2_m", Num(d.beta2_sigma))
            .put("D_ps_nm_km", Num(d.dispersion.ps_per_nm_km()))
            .put("D_sigma_ps_nm_km", Num(d.dispersion_sigma));
    }
    kv.put("D_configured_ps_nm_km", Num(fiber.dispersion().ps_per_nm_km()));
    Ok(kv)
}

pub fn cmd_fit(cfg: &ScenarioConfig, trace_path: &Path, out: &Path) -> Result<(), Failure> {
    let file = fs::File::open(trace_path).map_err(|e| Failure::io(format!("cannot open {}: {e}", trace_path.display())))?;
    let trace: Interferogram<f64> =
        read_trace_csv(std::io::BufReader::new(file)).map_err(|e| Failure::io(format!("{}: {e}", trace_path.display())))?;
    let setup = cfg.setup()?;
    let guess = core(initial_guess(&trace, &setup))?;
    let result = core(fit(&trace, &guess, &cfg.fit_options()))?;
    let report = fit_report(cfg, &result)?.render();
    write_file(&out.join("fit_report.txt"), &report)?;
    print!("{report}");
    if result.converged {
        Ok(())
    } else {
        Err(Failure::numerical(format!("fit did not converge ({:?} after {} iterations)", result.termination, result.iterations)))
    }
}

fn mc_report(s: &McSummary<f64>) -> KeyValue {
    let mut kv = KeyValue::default();
    kv.put("n_requested", s.n_requested)
        .put("n_scans", s.n_scans)
        .put("n_failed", s.failures.len())
        .put("convergence_fraction", Num(s.convergence_fraction()))
        .put("valid", s.valid)
        .put("master_seed", s.master_seed)
        .put("truth_ps_nm_km", Num(s.truth))
        .put("mean", Num(s.mean))
        .put("std", Num(s.std))
        .put("standard_error", Num(s.standard_error))
        .put("rel_error_percent", Num(s.rel_error_percent))
        .put("rel_std_percent", Num(s.rel_std_percent))
        .put("bias", Num(s.mean - s.truth))
        .put("histogram_bins", s.histogram.counts.len());
    if !s.failures.is_empty() {
        let idx: Vec<String> = s.failures.iter().map(|f| f.scan_index.to_string()).collect();
        kv.put("failed_scans", idx.join(","));
    }
    kv
}

pub fn cmd_mc(cfg: &ScenarioConfig, n: usize, svg: bool, out: &Path) -> Result<(), Failure> {
    if n < 2 {
        return Err(Failure::config(format!("usage: mc needs --n ≥ 2, got {n}")));
    }
    let scenario = cfg.scenario()?;
    let summary = core(monte_carlo(&scenario, n, cfg.noise.seed))?;
    let report = mc_report(&summary).render();
    write_file(&out.join("mc_summary.txt"), &report)?;
    write_csv(
        &out.join("cd_values.csv"),
        &["scan_index", "D_ps_nm_km"],
        summary.scan_indices.iter().zip(&summary.cd_values).map(|(k, d)| vec![k.to_string(), Num(*d).to_string()]),
    )?;
    let h = &summary.histogram;
    write_csv(
        &out.join("histogram.csv"),
        &["bin_left", "bin_right", "count"],
        (0..h.counts.len()).map(|i| vec![Num(h.edges[i]).to_string(), Num(h.edges[i + 1]).to_string(), h.counts[i].to_string()]),
    )?;
    let o = &summary.overlay;
    write_csv(
        &out.join("mc_density.csv"),
        &["bin_center", "density", "gaussian_density"],
        (0..o.bin_centers.len()).map(|i| vec![Num(o.bin_centers[i]), Num(o.density[i]), Num(o.gaussian_density[i])]),
    )?;
    if svg {
        write_file(&out.join("mc_histogram.svg"), &histogram_svg(h, o))?;
    }
    for f in &summary.failures {
        eprintln!("scan {} failed: {}", f.scan_index, f.reason);
    }
    print!("{report}");
    if summary.valid {
        Ok(())
    } else {
        Err(Failure::numerical(format!("{} of {} scans failed; summary invalid", summary.failures.len(), n)))
    }
}

pub fn cmd_verify(seed: u64, fault: Fault) -> Result<(), Failure> {
    let checks = core(verify::run_all(seed, fault))?;
    let mut failed = 0;
    for c in &checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        say!("{verdict}  {}  deviation = {:e}  tolerance = {:e}  ({})", c.name, c.deviation, c.tolerance, c.detail);
        failed += usize::from(!c.passed);
    }
    say!("{} of {} checks passed", checks.len() - failed, checks.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::numerical(format!("{failed} verification checks failed")))
    }
}
