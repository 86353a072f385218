//! `loopbeam` — renders loop-phase intensity lobes of a structured probe,
//! maps the dark-state eigenstructure over the phase torus, and runs the
//! Berry-phase measurement protocol.

use clap::{Args, Parser, Subcommand};
use loopbeam::artifacts::{
    self, load_config, parse_config, write_intensity, write_phase, MapFormat, RunConfig, RunManifest,
};
use loopbeam::atomcore::CouplingConfig;
use loopbeam::beamlab::GridSpec;
use loopbeam::holonomy;
use loopbeam::propagate::{intensity_map, lobe_angles, phase_map, visibility, PropagationParams};
use loopbeam::protocol::{run_protocol, ProtocolConfig};
use loopbeam::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const DEFAULT_CONFIG: &str = r#"
[probe]
l = 1
amplitude = 0.1

[pump]
l = 0
amplitude = 5.0

[coupling]
omega12 = 0.1
"#;

/// Parse an angle: plain radians, or degrees with a `deg` suffix.
fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    if let Some(num) = t.strip_suffix("deg") {
        num.trim().parse::<f64>().map(|d| d.to_radians()).map_err(|e| e.to_string())
    } else {
        t.parse::<f64>().map_err(|e| e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "loopbeam",
    version,
    about = "Closed-loop three-level atom driven by structured light: loop-phase lobe maps, torus spectra and Berry-phase protocol",
    after_help = "\
Reproduction commands (paper-regime defaults: Ω13=Ω12=0.1γ13, Ω23=5γ13, w0=100):
  loopbeam render   --l 1 --od 1  --out runs/lg1        l=1 bright/dark lobe map
  loopbeam render   --l 2 --od 5  --out runs/lg2        l=2 four-lobe map with outer-ring structure
  loopbeam render   --l 1 --od 0.5  vs  --od 10         visibility trend with optical depth (l=1)
  loopbeam render   --l 2 --od 1    vs  --od 20         visibility trend with optical depth (l=2)
  loopbeam render   --l 1 --od 1 --phi12 1.0471975512   lobe rotation; compare --phi12 2.6179938780
  loopbeam spectrum --resolution 64 --out runs/spectrum eigenvalue sheets (unequal Rabi)
  loopbeam spectrum --equal-rabi                        degenerate sheets touching at Φ = nπ
  loopbeam torus    --resolution 100 --out runs/torus   dark-state manifold loops
  loopbeam berry    --equal-rabi                        closed form vs Wilson loop (2π/3)
  loopbeam protocol --c 0.7854 --out runs/protocol      four-stage Berry-phase measurement
  loopbeam validate                                     full acceptance suite (exit 3 on failure)

Exit codes: 0 success, 2 usage/config error, 3 validation/physics failure, 4 I/O error."
)]
struct Cli {
    /// Worker threads for grid rendering and sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SceneArgs {
    /// TOML run configuration; flags below override it (last wins).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Probe topological charge.
    #[arg(long)]
    l: Option<i32>,
    /// Optical depth α·L (keeps L = 1).
    #[arg(long)]
    od: Option<f64>,
    /// Control-field phase φ12 (radians, or e.g. `60deg`).
    #[arg(long, value_parser = parse_angle)]
    phi12: Option<f64>,
    /// Pump phase φ23.
    #[arg(long, value_parser = parse_angle)]
    phi23: Option<f64>,
    /// Probe constant phase φ13.
    #[arg(long, value_parser = parse_angle)]
    phi13: Option<f64>,
    /// Control Rabi magnitude Ω12 (γ13 units).
    #[arg(long)]
    omega12: Option<f64>,
    /// Probe Rabi scale Ω0.
    #[arg(long)]
    probe_amplitude: Option<f64>,
    /// Pump Rabi scale Ωc.
    #[arg(long)]
    pump_amplitude: Option<f64>,
    /// Grid pixels per side.
    #[arg(long)]
    grid: Option<usize>,
}

impl SceneArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => parse_config(DEFAULT_CONFIG)?,
        };
        if let Some(l) = self.l {
            cfg.probe.l = l;
        }
        if let Some(od) = self.od {
            cfg.params = PropagationParams::new(od, 1.0, cfg.params.n_z)?;
        }
        if let Some(v) = self.phi12 {
            cfg.phi12 = v;
        }
        if let Some(v) = self.phi23 {
            cfg.phi23 = v;
        }
        if let Some(v) = self.phi13 {
            cfg.phi13 = v;
        }
        if let Some(v) = self.omega12 {
            cfg.omega12 = v;
        }
        if let Some(v) = self.probe_amplitude {
            cfg.probe.amplitude = v;
        }
        if let Some(v) = self.pump_amplitude {
            cfg.pump.amplitude = v;
        }
        if let Some(n) = self.grid {
            cfg.grid = GridSpec::new(n, n, cfg.grid.half_extent, cfg.grid.center)?;
        }
        // Re-validate the merged configuration through the parser.
        parse_config(&cfg.to_toml())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render input/output intensity and phase maps plus a lobe report.
    Render {
        #[command(flatten)]
        scene: SceneArgs,
        /// Output directory.
        #[arg(long, default_value = "runs/render")]
        out: PathBuf,
        /// Map file format.
        #[arg(long, default_value = "pgm16")]
        format: String,
        /// Also write maps normalized to their own peak.
        #[arg(long)]
        normalize: bool,
    },
    /// Eigenvalue sheets over the (φ12+φ23, φ13) torus, as CSV matrices.
    Spectrum {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value_t = 64)]
        resolution: usize,
        /// Equal Rabi magnitudes (degenerate sheets) instead of the config values.
        #[arg(long)]
        equal_rabi: bool,
        #[arg(long, default_value = "runs/spectrum")]
        out: PathBuf,
    },
    /// Dark-state manifold: two non-contractible loops on the torus.
    Torus {
        #[arg(long, default_value_t = 100)]
        resolution: usize,
        #[arg(long, default_value = "runs/torus")]
        out: PathBuf,
    },
    /// Berry phase: closed form, Wilson loop and optional adiabatic evolution.
    Berry {
        /// Equal Rabi magnitudes (1, 1, 1)γ13.
        #[arg(long)]
        equal_rabi: bool,
        #[arg(long, default_value_t = 0.1)]
        omega12: f64,
        #[arg(long, default_value_t = 5.0)]
        omega23: f64,
        #[arg(long, default_value_t = 0.1)]
        omega13: f64,
        /// Wilson-loop samples.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Also integrate the adiabatic loop.
        #[arg(long)]
        adiabatic: bool,
        /// Loop duration (1/γ13 units) for --adiabatic.
        #[arg(long, default_value_t = 2000.0)]
        time: f64,
        /// Integrator steps for --adiabatic.
        #[arg(long, default_value_t = 200_000)]
        steps: usize,
        #[arg(long, default_value = "runs/berry")]
        out: PathBuf,
    },
    /// Four-stage Berry-phase measurement protocol.
    Protocol {
        /// Unknown constant phase offset c to recover.
        #[arg(long, value_parser = parse_angle, default_value = "0.7853981633974483")]
        c: f64,
        /// Rabi magnitudes Ω12, Ω23, Ω13 (default equal-Rabi 1,1,1).
        #[arg(long, num_args = 3, value_names = ["O12", "O23", "O13"])]
        magnitudes: Option<Vec<f64>>,
        /// Loop duration (1/γ13 units).
        #[arg(long, default_value_t = 2000.0)]
        time: f64,
        /// Integrator steps.
        #[arg(long, default_value_t = 200_000)]
        steps: usize,
        /// Stage-B handoff: `exact` (default) or `estimated`.
        #[arg(long, default_value = "exact")]
        handoff: String,
        /// Also write the stage A/B/D intensity maps.
        #[arg(long)]
        dump_maps: bool,
        #[arg(long, default_value = "runs/protocol")]
        out: PathBuf,
    },
    /// Sweep a parameter grid, one output directory and manifest per point.
    Sweep {
        #[command(flatten)]
        scene: SceneArgs,
        /// Optical depths to sweep.
        #[arg(long = "ods", num_args = 1.., default_values_t = [0.5, 1.0, 5.0, 10.0])]
        ods: Vec<f64>,
        /// φ12 values to sweep (radians or `deg` suffix).
        #[arg(long = "phi12s", num_args = 1.., value_parser = parse_angle, default_values = ["0"])]
        phi12s: Vec<f64>,
        /// Overall Rabi-magnitude scale factors.
        #[arg(long = "scales", num_args = 1.., default_values_t = [1.0])]
        scales: Vec<f64>,
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
        /// Map file format for sweep outputs.
        #[arg(long, default_value = "pgm16")]
        format: String,
    },
    /// Run the acceptance suite; exits 3 if any criterion fails.
    Validate {
        /// Criterion ids to run (default: all twelve).
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        only: Option<Vec<usize>>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 4,
        Error::ConfigParse(_) | Error::ConfigInvalid(_) | Error::Invalid { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Global pool; per-pixel results are order-preserving, so thread
        // count never changes the output bytes.
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: --jobs: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Render { scene, out, format, normalize } => render(scene, &out, &format, normalize),
        Command::Spectrum { scene, resolution, equal_rabi, out } => {
            spectrum(scene, resolution, equal_rabi, &out)
        }
        Command::Torus { resolution, out } => torus(resolution, &out),
        Command::Berry { equal_rabi, omega12, omega23, omega13, samples, adiabatic, time, steps, out } => {
            berry(equal_rabi, omega12, omega23, omega13, samples, adiabatic, time, steps, &out)
        }
        Command::Protocol { c, magnitudes, time, steps, handoff, dump_maps, out } => {
            protocol(c, magnitudes, time, steps, &handoff, dump_maps, &out)
        }
        Command::Sweep { scene, ods, phi12s, scales, out, format } => {
            sweep(scene, &ods, &phi12s, &scales, &out, &format)
        }
        Command::Validate { only } => validate(only),
    }
}

fn render(scene_args: SceneArgs, out: &Path, format: &str, normalize: bool) -> Result<ExitCode, Error> {
    let format: MapFormat = format.parse()?;
    let cfg = scene_args.resolve()?;
    let scene = cfg.scene();
    let mut manifest = RunManifest::new("render", cfg.to_toml());

    let t0 = Instant::now();
    let input = scene.input_field()?;
    let output = scene.output_field()?;
    manifest.record_timing("propagate", t0.elapsed().as_millis() as u64);

    let ext = match format {
        MapFormat::Csv => "csv",
        MapFormat::Pgm16 => "pgm",
        MapFormat::Bin => "bin",
    };
    let t1 = Instant::now();
    for (name, field) in [("input", &input), ("output", &output)] {
        let mut imap = intensity_map(field);
        if normalize {
            imap = imap.normalized();
        }
        let pmap = phase_map(field);
        let ipath = out.join(format!("{name}_intensity.{ext}"));
        manifest.record(&ipath, write_intensity(&imap, &ipath, format)?);
        let ppath = out.join(format!("{name}_phase.{ext}"));
        manifest.record(&ppath, write_phase(&pmap, &ppath, format)?);
    }
    manifest.record_timing("write_maps", t1.elapsed().as_millis() as u64);

    // Lobe report on the main probe ring.
    let ring = scene.main_ring_radius()?;
    let omap = intensity_map(&output);
    let lobes = lobe_angles(&omap, ring, 720)?;
    let vis = visibility(&omap, ring, 720)?;
    let mut report = String::new();
    use std::fmt::Write as _;
    writeln!(report, "ring_radius = {ring}").unwrap();
    writeln!(report, "visibility = {vis}").unwrap();
    writeln!(report, "lobe_count = {}", lobes.len()).unwrap();
    for (k, lobe) in lobes.iter().enumerate() {
        writeln!(
            report,
            "lobe_{k} = {{ kind = \"{:?}\", angle = {}, angle_over_pi = {:.6}, value = {:.6e} }}",
            lobe.kind,
            lobe.angle,
            lobe.angle / std::f64::consts::PI,
            lobe.value
        )
        .unwrap();
    }
    let rpath = out.join("lobes.txt");
    manifest.record(&rpath, write_text(&rpath, &report)?);
    manifest.write(&out.join("manifest.toml"))?;
    manifest.verify()?;
    println!("{report}");
    println!("wrote {} outputs to {}", manifest.outputs.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn write_text(path: &Path, text: &str) -> Result<String, Error> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: path.into(), source })?;
    }
    std::fs::write(path, text.as_bytes()).map_err(|source| Error::Io { path: path.into(), source })?;
    Ok(artifacts::sha256_hex(text.as_bytes()))
}

fn spectrum(scene_args: SceneArgs, resolution: usize, equal_rabi: bool, out: &Path) -> Result<ExitCode, Error> {
    let cfg = scene_args.resolve()?;
    let magnitudes = if equal_rabi {
        CouplingConfig::from_magnitudes(1.0, 1.0, 1.0)?
    } else {
        cfg.coupling()?
    };
    let mut manifest = RunManifest::new("spectrum", cfg.to_toml());
    let t0 = Instant::now();
    let surface = holonomy::spectrum_surface(&magnitudes, resolution)?;
    manifest.record_timing("surface", t0.elapsed().as_millis() as u64);
    for (path, sum) in artifacts::write_spectrum_surface(&surface, out)? {
        manifest.record(&path, sum);
    }
    manifest.write(&out.join("manifest.toml"))?;
    println!(
        "spectrum surface {}×{} written to {} ({} middle-sheet zeros)",
        resolution,
        resolution,
        out.display(),
        surface.zero_set.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn torus(resolution: usize, out: &Path) -> Result<ExitCode, Error> {
    let loops = holonomy::dark_manifold(resolution)?;
    let mut manifest = RunManifest::new("torus", String::new());
    let mut min_sep = f64::INFINITY;
    for a in &loops[0].points {
        for b in &loops[1].points {
            min_sep = min_sep.min(a.distance(b));
        }
    }
    use std::fmt::Write as _;
    let mut report = String::new();
    for (k, l) in loops.iter().enumerate() {
        let mut csv = String::from("u,v\n");
        for p in &l.points {
            writeln!(csv, "{},{}", p.u, p.v).unwrap();
        }
        let path = out.join(format!("loop{k}.csv"));
        manifest.record(&path, write_text(&path, &csv)?);
        writeln!(report, "loop_{k}_winding = ({}, {})", l.measured_winding().0, l.measured_winding().1)
            .unwrap();
    }
    writeln!(report, "min_separation = {min_sep}").unwrap();
    writeln!(report, "intersection = \"empty\"").unwrap();
    let rpath = out.join("manifold.txt");
    manifest.record(&rpath, write_text(&rpath, &report)?);
    manifest.write(&out.join("manifest.toml"))?;
    println!("{report}");
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn berry(
    equal_rabi: bool,
    omega12: f64,
    omega23: f64,
    omega13: f64,
    samples: usize,
    adiabatic: bool,
    time: f64,
    steps: usize,
    out: &Path,
) -> Result<ExitCode, Error> {
    let m = if equal_rabi {
        CouplingConfig::from_magnitudes(1.0, 1.0, 1.0)?
    } else {
        CouplingConfig::from_magnitudes(omega12, omega23, omega13)?
    };
    use std::fmt::Write as _;
    let mut report = String::new();
    writeln!(report, "omega12 = {}", m.omega12).unwrap();
    writeln!(report, "omega23 = {}", m.omega23).unwrap();
    writeln!(report, "omega13 = {}", m.omega13).unwrap();
    let closed = holonomy::berry_phase_closed(&m)?;
    let wilson = holonomy::berry_phase_wilson(&m, samples)?;
    writeln!(report, "gamma_closed = {closed}").unwrap();
    writeln!(report, "gamma_closed_mod_2pi = {}", loopbeam::wrap_2pi(closed)).unwrap();
    writeln!(report, "gamma_wilson_mod_2pi = {}", loopbeam::wrap_2pi(wilson)).unwrap();
    writeln!(report, "wilson_samples = {samples}").unwrap();
    writeln!(
        report,
        "wilson_vs_closed = {:.3e}",
        loopbeam::circle_distance(loopbeam::wrap_2pi(wilson), loopbeam::wrap_2pi(closed))
    )
    .unwrap();
    let mut manifest = RunManifest::new("berry", String::new());
    if adiabatic {
        let r = holonomy::adiabatic_evolve(&m, time, steps)?;
        writeln!(report, "gamma_evolved_mod_2pi = {}", loopbeam::wrap_2pi(r.gamma_evolved)).unwrap();
        writeln!(report, "dynamical_phase = {:.6e}", r.dynamical_phase).unwrap();
        writeln!(report, "adiabatic_fidelity = {:.9}", r.adiabatic_fidelity).unwrap();
        writeln!(report, "diabatic = {}", r.diabatic).unwrap();
        writeln!(report, "norm_drift_max = {:.3e}", r.norm_drift_max).unwrap();
        manifest.record_value("berry", &r)?;
    }
    let rpath = out.join("berry.txt");
    manifest.record(&rpath, write_text(&rpath, &report)?);
    manifest.write(&out.join("manifest.toml"))?;
    print!("{report}");
    Ok(ExitCode::SUCCESS)
}

fn protocol(
    c: f64,
    magnitudes: Option<Vec<f64>>,
    time: f64,
    steps: usize,
    handoff: &str,
    dump_maps: bool,
    out: &Path,
) -> Result<ExitCode, Error> {
    let mut cfg = ProtocolConfig::equal_rabi(c)?;
    if let Some(m) = magnitudes {
        cfg.magnitudes = CouplingConfig::from_magnitudes(m[0], m[1], m[2])?;
    }
    cfg.loop_time = time;
    cfg.loop_steps = steps;
    cfg.exact_handoff = match handoff {
        "exact" => true,
        "estimated" => false,
        other => {
            return Err(Error::Invalid {
                field: "handoff",
                message: format!("expected `exact` or `estimated`, got `{other}`"),
            })
        }
    };
    let report = run_protocol(&cfg)?;
    let text = report.to_text();
    let mut manifest = RunManifest::new("protocol", String::new());
    let rpath = out.join("protocol.txt");
    manifest.record(&rpath, write_text(&rpath, &text)?);
    manifest.record_value("berry", &report.berry)?;
    if dump_maps {
        let stages = [
            ("stage_a", cfg.render_scene(cfg.c_true)?),
            ("stage_b", cfg.stage_b_scene(if cfg.exact_handoff { cfg.c_true } else { report.c_estimate })?),
            ("stage_d", cfg.render_scene(cfg.c_true + report.berry.gamma_evolved)?),
        ];
        for (name, scene) in stages {
            let map = intensity_map(&scene.output_field()?);
            let path = out.join(format!("{name}_intensity.pgm"));
            manifest.record(&path, write_intensity(&map, &path, MapFormat::Pgm16)?);
        }
    }
    manifest.write(&out.join("manifest.toml"))?;
    manifest.verify()?;
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn sweep(
    scene_args: SceneArgs,
    ods: &[f64],
    phi12s: &[f64],
    scales: &[f64],
    out: &Path,
    format: &str,
) -> Result<ExitCode, Error> {
    let format: MapFormat = format.parse()?;
    let base = scene_args.resolve()?;
    let mut points = Vec::new();
    for &od in ods {
        for &phi12 in phi12s {
            for &scale in scales {
                points.push((od, phi12, scale));
            }
        }
    }
    use rayon::prelude::*;
    let results: Vec<Result<PathBuf, Error>> = points
        .par_iter()
        .map(|&(od, phi12, scale)| {
            let mut cfg = base.clone();
            cfg.params = PropagationParams::new(od, 1.0, cfg.params.n_z)?;
            cfg.phi12 = phi12;
            cfg.probe.amplitude *= scale;
            cfg.pump.amplitude *= scale;
            cfg.omega12 *= scale;
            let dir = out.join(format!("od_{od:.3}_phi12_{phi12:.4}_scale_{scale:.3}"));
            let scene = cfg.scene();
            let mut manifest = RunManifest::new("sweep-point", cfg.to_toml());
            let t0 = Instant::now();
            let output = scene.output_field()?;
            manifest.record_timing("propagate", t0.elapsed().as_millis() as u64);
            let imap = intensity_map(&output);
            let ext = match format {
                MapFormat::Csv => "csv",
                MapFormat::Pgm16 => "pgm",
                MapFormat::Bin => "bin",
            };
            let ipath = dir.join(format!("output_intensity.{ext}"));
            manifest.record(&ipath, write_intensity(&imap, &ipath, format)?);
            let ring = scene.main_ring_radius()?;
            let vis = visibility(&imap, ring, 720)?;
            let vpath = dir.join("summary.txt");
            manifest.record(
                &vpath,
                write_text(&vpath, &format!("od = {od}\nphi12 = {phi12}\nscale = {scale}\nvisibility = {vis}\n"))?,
            );
            manifest.write(&dir.join("manifest.toml"))?;
            manifest.verify()?;
            Ok(dir)
        })
        .collect();
    let mut failures = 0;
    for r in &results {
        match r {
            Ok(dir) => println!("sweep point done: {}", dir.display()),
            Err(e) => {
                eprintln!("sweep point failed: {e}");
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(Error::ConfigInvalid(format!("{failures} sweep points failed")));
    }
    println!("{} sweep points written under {}", results.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn validate(only: Option<Vec<usize>>) -> Result<ExitCode, Error> {
    let ids: Vec<usize> = only.unwrap_or_else(|| (1..=12).collect());
    for &id in &ids {
        if !(1..=12).contains(&id) {
            return Err(Error::Invalid {
                field: "only",
                message: format!("criterion ids run from 1 to 12, got {id}"),
            });
        }
    }
    let mut all_passed = true;
    for id in ids {
        let report = loopbeam::acceptance::run_criterion(id);
        println!("{} ({} ms)", report.line(), report.millis);
        all_passed &= report.passed;
    }
    if all_passed {
        println!("validate: all criteria passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("validate: FAILURES present");
        Ok(ExitCode::from(3))
    }
}
