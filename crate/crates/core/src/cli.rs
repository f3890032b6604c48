//! `vbsim` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure
//! (including a fit whose optimum sits on the search boundary).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::charges::{HexLattice, PositionLaw};
use crate::config::{parse_position_law, ConfigFile};
use crate::coupling::{
    electric_perturbation, local_strain_from_triangle, strain_perturbation, stress_couplings,
    stress_perturbation, CouplingConstants, ElectricFieldVec, StrainTensor2D, StressTensor2D,
    MHZ_PER_GHZ,
};
use crate::error::{Error, Result};
use crate::io::{self, sig9};
use crate::odmr::{
    fit_spectrum, relative_densities, sample_configuration, scatter_levels, synthesize_spectrum,
    Environment, FitConfig, FrequencyGrid, PerturbationKind, SynthesisParams,
    DEFAULT_LINEWIDTH_MHZ, DEFAULT_N_CONFIGS,
};
use crate::spin::{build_hamiltonian, resonance_frequencies};

pub const CONFIG_ENV: &str = "VBSIM_CONFIG";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "vbsim", version, about = "Zero-field spin resonance of the boron vacancy in hBN")]
struct Cli {
    /// INI-style config file (default: $VBSIM_CONFIG)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Cap on worker threads
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resonances for a given strain, stress and electric field
    Zfs(ZfsArgs),
    /// Print the stress couplings h1 and h2
    ConvertStress(ConstArgs),
    /// Level scatter of random strain or field environments
    Scatter(ScatterArgs),
    /// Synthesize a zero-field spectrum from random charge environments
    Synth(SynthArgs),
    /// Fit charge density and contrast to a measured spectrum
    Fit(FitArgs),
    /// Relative emitter densities from PL-versus-power slopes
    PlDensity(PlArgs),
    /// Local strain from a reference and a deformed triangle
    LocalStrain(LocalStrainArgs),
}

/// Overrides of the coupling constants; these win over the config file.
#[derive(Debug, Args, Default)]
struct ConstArgs {
    /// Constant preset: experimental (D0 = 3470 MHz) or flake-theory (3263 MHz)
    #[arg(long, value_parser = ["experimental", "flake-theory"])]
    preset: Option<String>,
    /// Axial ZFS D0, MHz
    #[arg(long)]
    d0_mhz: Option<f64>,
    /// Strain coupling of D to exx + eyy, GHz/strain
    #[arg(long, allow_hyphen_values = true)]
    g1_ghz_per_strain: Option<f64>,
    /// Strain coupling of E1 to exx - eyy, GHz/strain
    #[arg(long, allow_hyphen_values = true)]
    g2_ghz_per_strain: Option<f64>,
    /// Strain coupling of E2 to exx - eyy, GHz/strain
    #[arg(long, allow_hyphen_values = true)]
    g2p_ghz_per_strain: Option<f64>,
    /// Strain coupling of E1 to exy + eyx, GHz/strain
    #[arg(long, allow_hyphen_values = true)]
    g3_ghz_per_strain: Option<f64>,
    /// Strain coupling of E2 to exy + eyx, GHz/strain
    #[arg(long, allow_hyphen_values = true)]
    g3p_ghz_per_strain: Option<f64>,
    /// In-plane electric-field coupling, Hz cm/V
    #[arg(long, allow_hyphen_values = true)]
    dperp_hz_cm_per_v: Option<f64>,
    /// 14N hyperfine coupling, MHz
    #[arg(long, allow_hyphen_values = true)]
    a_hf_mhz: Option<f64>,
    /// Elastic constant C11, GPa
    #[arg(long)]
    c11_gpa: Option<f64>,
    /// Elastic constant C12, GPa
    #[arg(long)]
    c12_gpa: Option<f64>,
}

impl ConstArgs {
    fn apply(&self, base: CouplingConstants) -> CouplingConstants {
        let mut k = match &self.preset {
            Some(p) => CouplingConstants {
                d0_mhz: CouplingConstants::preset(p).expect("validated by clap").d0_mhz,
                ..base
            },
            None => base,
        };
        let set = |dst: &mut f64, v: Option<f64>, scale: f64| {
            if let Some(v) = v {
                *dst = v * scale;
            }
        };
        set(&mut k.d0_mhz, self.d0_mhz, 1.0);
        set(&mut k.g1, self.g1_ghz_per_strain, MHZ_PER_GHZ);
        set(&mut k.g2, self.g2_ghz_per_strain, MHZ_PER_GHZ);
        set(&mut k.g2p, self.g2p_ghz_per_strain, MHZ_PER_GHZ);
        set(&mut k.g3, self.g3_ghz_per_strain, MHZ_PER_GHZ);
        set(&mut k.g3p, self.g3p_ghz_per_strain, MHZ_PER_GHZ);
        set(&mut k.d_perp, self.dperp_hz_cm_per_v, 1.0);
        set(&mut k.a_hf_mhz, self.a_hf_mhz, 1.0);
        set(&mut k.c11_gpa, self.c11_gpa, 1.0);
        set(&mut k.c12_gpa, self.c12_gpa, 1.0);
        k
    }
}

#[derive(Debug, Args)]
struct ZfsArgs {
    #[command(flatten)]
    constants: ConstArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    strain_xx: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    strain_yy: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    strain_xy: f64,
    /// GPa
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    stress_xx: f64,
    /// GPa
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    stress_yy: f64,
    /// V/cm
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    efield_x: f64,
    /// V/cm
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    efield_y: f64,
    /// V/cm; carried for completeness, does not couple
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    efield_z: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Strain,
    Electric,
}

#[derive(Debug, Args)]
struct ScatterArgs {
    #[command(flatten)]
    constants: ConstArgs,
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Magnitudes as start:stop:count (inclusive, linearly spaced)
    #[arg(long, value_name = "START:STOP:COUNT")]
    mags: String,
    /// Random samples per magnitude
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Master RNG seed
    #[arg(long)]
    seed: u64,
    /// Output CSV (default: stdout)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// Charge-environment geometry; flags win over the config file.
#[derive(Debug, Args)]
struct EnvArgs {
    /// Simulation sphere radius, nm
    #[arg(long)]
    radius_nm: Option<f64>,
    /// Relative permittivity
    #[arg(long)]
    eps_r: Option<f64>,
    /// Charge-free radius around the defect, nm
    #[arg(long)]
    exclusion_nm: Option<f64>,
    /// In-plane lattice constant, nm
    #[arg(long)]
    lattice_a_nm: Option<f64>,
    /// Interlayer spacing, nm
    #[arg(long)]
    interlayer_nm: Option<f64>,
    /// uniform-ball or gaussian-scaled
    #[arg(long)]
    position_law: Option<String>,
    /// Charge environments per spectrum
    #[arg(long)]
    n_configs: Option<usize>,
    /// Lorentzian half width at half maximum, MHz
    #[arg(long)]
    linewidth_mhz: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    constants: ConstArgs,
    #[command(flatten)]
    env: EnvArgs,
    /// Charge density, nm^-3
    #[arg(long)]
    rho: f64,
    /// ODMR contrast in [0, 1)
    #[arg(long)]
    contrast: f64,
    /// Grid start, MHz (default D0 - 500)
    #[arg(long)]
    fmin: Option<f64>,
    /// Grid stop, MHz (default D0 + 500)
    #[arg(long)]
    fmax: Option<f64>,
    /// Grid step, MHz
    #[arg(long, default_value_t = 1.0)]
    fstep: f64,
    /// Master RNG seed
    #[arg(long)]
    seed: u64,
    /// Output CSV (default: stdout)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write charge environment 0 as CSV
    #[arg(long, value_name = "PATH")]
    dump_charges: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    constants: ConstArgs,
    #[command(flatten)]
    env: EnvArgs,
    /// Measured spectrum CSV (freq_mhz,signal)
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    rho_min: f64,
    #[arg(long, default_value_t = 0.2)]
    rho_max: f64,
    #[arg(long, default_value_t = 0.0)]
    contrast_min: f64,
    #[arg(long, default_value_t = 0.1)]
    contrast_max: f64,
    /// Grid points per axis and cycle (odd)
    #[arg(long, default_value_t = 21)]
    grid_points: usize,
    #[arg(long, default_value_t = 3)]
    cycles: usize,
    /// Grid contraction factor between cycles
    #[arg(long, default_value_t = 5.0)]
    shrink: f64,
    /// Master RNG seed
    #[arg(long)]
    seed: u64,
    /// Output key=value file (default: stdout)
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlArgs {
    /// LABEL=PATH of a power_mw,pl CSV; the first series is the reference
    #[arg(long = "series", value_name = "LABEL=PATH", required = true)]
    series: Vec<String>,
}

#[derive(Debug, Args)]
struct LocalStrainArgs {
    /// Reference vertices x0,y0,x1,y1,x2,y2 in nm
    #[arg(long = "ref", value_name = "X0,Y0,X1,Y1,X2,Y2", allow_hyphen_values = true)]
    reference: String,
    /// Deformed vertices x0,y0,x1,y1,x2,y2 in nm
    #[arg(long, value_name = "X0,Y0,X1,Y1,X2,Y2", allow_hyphen_values = true)]
    deformed: String,
}

fn parse_magnitudes(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("--mags '{spec}' is not START:STOP:COUNT"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        return Err(bad());
    };
    let start: f64 = start.parse().map_err(|_| bad())?;
    let stop: f64 = stop.parse().map_err(|_| bad())?;
    let count: usize = count.parse().map_err(|_| bad())?;
    match count {
        0 => Err(bad()),
        1 => Ok(vec![start]),
        n => Ok((0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect()),
    }
}

fn parse_triangle(spec: &str) -> Result<[[f64; 2]; 3]> {
    let vals: Vec<f64> = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidParameter(format!("'{spec}' is not six numbers")))?;
    if vals.len() != 6 {
        return Err(Error::InvalidParameter(format!("'{spec}' is not six numbers")));
    }
    Ok([[vals[0], vals[1]], [vals[2], vals[3]], [vals[4], vals[5]]])
}

struct Context {
    file: ConfigFile,
}

impl Context {
    fn constants(&self, args: &ConstArgs) -> CouplingConstants {
        args.apply(self.file.constants)
    }

    fn environment(&self, args: &EnvArgs) -> Result<Environment> {
        let run = &self.file.run;
        let d = Environment::default();
        let law = match &args.position_law {
            Some(s) => parse_position_law(s)?,
            None => run.position_law.unwrap_or(PositionLaw::UniformBall),
        };
        let env = Environment {
            lattice: HexLattice::new(
                args.lattice_a_nm.or(run.lattice_a_nm).unwrap_or(d.lattice.a_nm),
                args.interlayer_nm.or(run.interlayer_nm).unwrap_or(d.lattice.interlayer_nm),
            )?,
            radius_nm: args.radius_nm.or(run.radius_nm).unwrap_or(d.radius_nm),
            exclusion_nm: args.exclusion_nm.or(run.exclusion_nm).unwrap_or(d.exclusion_nm),
            eps_r: args.eps_r.or(run.eps_r).unwrap_or(d.eps_r),
            law,
        };
        if !(env.radius_nm > 0.0 && env.exclusion_nm >= 0.0 && env.exclusion_nm < env.radius_nm) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= exclusion ({}) < radius ({})",
                env.exclusion_nm, env.radius_nm
            )));
        }
        Ok(env)
    }

    fn n_configs(&self, args: &EnvArgs) -> usize {
        args.n_configs.or(self.file.run.n_configs).unwrap_or(DEFAULT_N_CONFIGS)
    }

    fn linewidth(&self, args: &EnvArgs) -> f64 {
        args.linewidth_mhz
            .or(self.file.run.linewidth_mhz)
            .unwrap_or(DEFAULT_LINEWIDTH_MHZ)
    }
}

fn with_output<F>(path: &Option<PathBuf>, stdout: &mut dyn Write, f: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(stdout),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))
}

fn kv(out: &mut dyn Write, key: &str, value: f64) -> Result<()> {
    writeln!(out, "{key}={}", sig9(value))?;
    Ok(())
}

fn execute(cmd: Command, ctx: &Context, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Zfs(a) => {
            let k = ctx.constants(&a.constants);
            let strain = strain_perturbation(&StrainTensor2D::new(a.strain_xx, a.strain_yy, a.strain_xy), &k)?;
            let stress = stress_perturbation(&StressTensor2D::new(a.stress_xx, a.stress_yy), &k)?;
            let field = electric_perturbation(&ElectricFieldVec::new(a.efield_x, a.efield_y, a.efield_z), &k);
            let zfs = k.unperturbed() + strain + stress + field;
            let (fm, fp) = resonance_frequencies(&build_hamiltonian(&zfs, 0.0))?;
            kv(out, "d_mhz", zfs.d)?;
            kv(out, "e1_mhz", zfs.e1)?;
            kv(out, "e2_mhz", zfs.e2)?;
            kv(out, "e_eff_mhz", zfs.e_eff())?;
            kv(out, "f_minus_mhz", fm)?;
            kv(out, "f_plus_mhz", fp)?;
        }
        Command::ConvertStress(c) => {
            let (h1, h2) = stress_couplings(&ctx.constants(&c))?;
            kv(out, "h1_mhz_per_gpa", h1)?;
            kv(out, "h2_mhz_per_gpa", h2)?;
        }
        Command::Scatter(a) => {
            let k = ctx.constants(&a.constants);
            let mags = parse_magnitudes(&a.mags)?;
            let kind = match a.kind {
                KindArg::Strain => PerturbationKind::Strain,
                KindArg::Electric => PerturbationKind::Electric,
            };
            let ds = scatter_levels(kind, &mags, a.n, &k, a.seed)?;
            with_output(&a.out, out, |w| io::write_scatter(w, &ds))?;
        }
        Command::Synth(a) => {
            let k = ctx.constants(&a.constants);
            let env = ctx.environment(&a.env)?;
            let grid = FrequencyGrid::new(
                a.fmin.unwrap_or(k.d0_mhz - 500.0),
                a.fmax.unwrap_or(k.d0_mhz + 500.0),
                a.fstep,
            )?;
            let params = SynthesisParams {
                rho_c: a.rho,
                contrast: a.contrast,
                linewidth_mhz: ctx.linewidth(&a.env),
                n_configs: ctx.n_configs(&a.env),
                seed: a.seed,
            };
            let syn = synthesize_spectrum(&params, &grid, &k, &env)?;
            with_output(&a.out, out, |w| io::write_spectrum(w, &syn.spectrum))?;
            if let Some(path) = &a.dump_charges {
                let cfg = sample_configuration(a.rho, &env, a.seed, 0)?;
                io::write_charges(BufWriter::new(File::create(path)?), &cfg)?;
            }
            log::info!("mean splitting {:.3} MHz", syn.mean_splitting_mhz);
        }
        Command::Fit(a) => {
            let k = ctx.constants(&a.constants);
            let measured = io::read_spectrum(open(&a.input)?)?;
            let cfg = FitConfig {
                rho_range: (a.rho_min, a.rho_max),
                contrast_range: (a.contrast_min, a.contrast_max),
                grid_points: a.grid_points,
                cycles: a.cycles,
                shrink: a.shrink,
                linewidth_mhz: ctx.linewidth(&a.env),
                n_configs: ctx.n_configs(&a.env),
                env: ctx.environment(&a.env)?,
            };
            let fit = fit_spectrum(&measured, &cfg, &k, a.seed)?;
            with_output(&a.out, out, |w| io::write_fit_result(w, &fit))?;
            fit.ensure_interior()?;
        }
        Command::PlDensity(a) => {
            let mut labels = Vec::new();
            let mut series = Vec::new();
            for s in &a.series {
                let (label, path) = s
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidParameter(format!("--series '{s}' is not LABEL=PATH")))?;
                labels.push(label.to_string());
                series.push(io::read_pl_series(open(Path::new(path))?)?);
            }
            let ratios = relative_densities(&series)?;
            for ((label, s), r) in labels.iter().zip(&series).zip(&ratios) {
                kv(out, &format!("slope_{label}"), crate::odmr::relative_density_from_pl(s)?)?;
                kv(out, &format!("ratio_{label}"), *r)?;
            }
        }
        Command::LocalStrain(a) => {
            let eps = local_strain_from_triangle(&parse_triangle(&a.reference)?, &parse_triangle(&a.deformed)?)?;
            kv(out, "exx", eps.exx)?;
            kv(out, "eyy", eps.eyy)?;
            kv(out, "exy", eps.exy)?;
        }
    }
    Ok(EXIT_OK)
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };

    let result = (|| -> Result<i32> {
        let path = cli
            .config
            .clone()
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let file = match path {
            Some(p) => ConfigFile::load(&p)?,
            None => ConfigFile::default(),
        };
        let ctx = Context { file };
        let mut buf = Vec::new();
        let code = match cli.threads {
            Some(0) => Err(Error::InvalidParameter("--threads must be >= 1".into())),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(e.to_string()))?
                .install(|| execute(cli.command, &ctx, &mut buf)),
            None => execute(cli.command, &ctx, &mut buf),
        };
        // partial output (e.g. a boundary-hit fit) is still emitted
        out.write_all(&buf)?;
        code
    })();

    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_input_error() {
                EXIT_USAGE
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}
