//! Run configuration, file formats and the reproducible run manifest.
//!
//! Formats:
//!
//! - **Config**: TOML with a fixed schema (see `RunConfig`); unknown keys are
//!   rejected by name and parse errors carry the line. Defaults fill
//!   γ12 = 1e−3, γ23 = (γ13 + γ12)/2, a 512² grid with half-extent 3·w0 and
//!   a 256-step propagation oracle.
//! - **CSV**: `x,y,Re,Im` for complex fields and `x,y,value` for maps, with
//!   shortest round-trip float formatting (re-parsing reproduces the values
//!   bit for bit).
//! - **BIN**: 32-byte header — 8-byte magic, `n_x` and `n_y` as little-endian
//!   u64, `half_extent` as little-endian f64 — followed by row-major
//!   little-endian f64 payload (`Re, Im` pairs for fields, one value per
//!   pixel for maps). The window is assumed centered; `center` is not stored.
//! - **PGM16**: binary `P5` with maxval 65535, big-endian samples per the
//!   Netpbm convention; values scale linearly between the map minimum and
//!   maximum, which are recorded in a `<path>.meta` sidecar. A constant map
//!   (min = max) writes all zeros, and the sidecar records that rule.
//!
//! Every write returns the SHA-256 of the bytes written;
//! [`RunManifest::verify`] re-hashes emitted files against the recorded
//! checksums.

use crate::atomcore::{CouplingConfig, RelaxationConfig};
use crate::beamlab::{ComplexField, GridSpec, LgModeSpec};
use crate::propagate::{IntensityMap, PhaseMap, PropagationParams, Scene};
use crate::{C64, Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamSection {
    l: i32,
    #[serde(default)]
    m: u32,
    #[serde(default = "default_w0")]
    w0: f64,
    #[serde(default = "default_wavelength")]
    wavelength: f64,
    amplitude: f64,
}

fn default_w0() -> f64 {
    100.0
}

fn default_wavelength() -> f64 {
    0.795
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingSection {
    omega12: f64,
    #[serde(default)]
    phi12: f64,
    #[serde(default)]
    phi23: f64,
    #[serde(default)]
    phi13: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelaxationSection {
    #[serde(default = "default_gamma_decay")]
    gamma_decay: f64,
    #[serde(default = "default_gamma12")]
    gamma12: f64,
    #[serde(default = "default_gamma13")]
    gamma13: f64,
    /// Defaults to (γ13 + γ12)/2 when absent.
    gamma23: Option<f64>,
}

fn default_gamma_decay() -> f64 {
    0.5
}

fn default_gamma12() -> f64 {
    1e-3
}

fn default_gamma13() -> f64 {
    1.0
}

impl Default for RelaxationSection {
    fn default() -> Self {
        Self {
            gamma_decay: default_gamma_decay(),
            gamma12: default_gamma12(),
            gamma13: default_gamma13(),
            gamma23: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropagationSection {
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_length")]
    length: f64,
    #[serde(default = "default_n_z")]
    n_z: usize,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_length() -> f64 {
    1.0
}

fn default_n_z() -> usize {
    256
}

impl Default for PropagationSection {
    fn default() -> Self {
        Self { alpha: default_alpha(), length: default_length(), n_z: default_n_z() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    #[serde(default = "default_grid_n")]
    n_x: usize,
    #[serde(default = "default_grid_n")]
    n_y: usize,
    /// Half-extent in units of the probe waist.
    #[serde(default = "default_half_extent_w0")]
    half_extent_w0: f64,
}

fn default_grid_n() -> usize {
    512
}

fn default_half_extent_w0() -> f64 {
    3.0
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_x: default_grid_n(), n_y: default_grid_n(), half_extent_w0: default_half_extent_w0() }
    }
}

/// Raw TOML schema of a run configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigFile {
    probe: BeamSection,
    pump: BeamSection,
    coupling: CouplingSection,
    #[serde(default)]
    relaxation: RelaxationSection,
    #[serde(default)]
    propagation: PropagationSection,
    #[serde(default)]
    grid: GridSection,
    /// Reserved for stochastic extensions; the core pipeline is deterministic.
    #[serde(default)]
    seed: u64,
}

/// A validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub probe: LgModeSpec,
    pub pump: LgModeSpec,
    pub omega12: f64,
    pub phi12: f64,
    pub phi23: f64,
    pub phi13: f64,
    pub relax: RelaxationConfig,
    pub params: PropagationParams,
    pub grid: GridSpec,
    pub seed: u64,
}

impl RunConfig {
    /// The rendering scene described by this configuration.
    pub fn scene(&self) -> Scene {
        Scene {
            probe: self.probe,
            pump: self.pump,
            omega12: self.omega12,
            phi12: self.phi12,
            phi23: self.phi23,
            phi13: self.phi13,
            relax: self.relax,
            params: self.params,
            grid: self.grid,
        }
    }

    /// Nominal coupling magnitudes (peak scales) with the constant phases.
    pub fn coupling(&self) -> Result<CouplingConfig> {
        CouplingConfig::new(
            self.omega12,
            self.pump.amplitude,
            self.probe.amplitude,
            self.phi12,
            self.phi23,
            self.phi13,
        )
    }

    /// Canonical TOML echo of the effective configuration.
    pub fn to_toml(&self) -> String {
        let file = RunConfigFile {
            probe: BeamSection {
                l: self.probe.l,
                m: self.probe.m,
                w0: self.probe.w0,
                wavelength: self.probe.wavelength,
                amplitude: self.probe.amplitude,
            },
            pump: BeamSection {
                l: self.pump.l,
                m: self.pump.m,
                w0: self.pump.w0,
                wavelength: self.pump.wavelength,
                amplitude: self.pump.amplitude,
            },
            coupling: CouplingSection {
                omega12: self.omega12,
                phi12: self.phi12,
                phi23: self.phi23,
                phi13: self.phi13,
            },
            relaxation: RelaxationSection {
                gamma_decay: self.relax.gamma_decay,
                gamma12: self.relax.gamma12,
                gamma13: self.relax.gamma13,
                gamma23: Some(self.relax.gamma23),
            },
            propagation: PropagationSection {
                alpha: self.params.alpha,
                length: self.params.length,
                n_z: self.params.n_z,
            },
            grid: GridSection {
                n_x: self.grid.n_x,
                n_y: self.grid.n_y,
                half_extent_w0: self.grid.half_extent / self.probe.w0,
            },
            seed: self.seed,
        };
        toml::to_string_pretty(&file).expect("config serialization cannot fail")
    }
}

/// Parse and validate a configuration string.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let file: RunConfigFile = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    validate_config(file)
}

/// Load a configuration file ([`parse_config`] plus I/O).
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text)
}

fn validate_config(file: RunConfigFile) -> Result<RunConfig> {
    let invalid = |e: Error| match e {
        Error::Invalid { field, message } => Error::ConfigInvalid(format!("{field}: {message}")),
        other => other,
    };
    let probe = LgModeSpec::new(
        file.probe.l,
        file.probe.m,
        file.probe.w0,
        file.probe.wavelength,
        file.probe.amplitude,
    )
    .map_err(invalid)?;
    let pump =
        LgModeSpec::new(file.pump.l, file.pump.m, file.pump.w0, file.pump.wavelength, file.pump.amplitude)
            .map_err(invalid)?;
    let gamma23 = file
        .relaxation
        .gamma23
        .unwrap_or(0.5 * (file.relaxation.gamma13 + file.relaxation.gamma12));
    let relax = RelaxationConfig::new(
        file.relaxation.gamma_decay,
        file.relaxation.gamma12,
        file.relaxation.gamma13,
        gamma23,
    )
    .map_err(invalid)?;
    let params =
        PropagationParams::new(file.propagation.alpha, file.propagation.length, file.propagation.n_z)
            .map_err(invalid)?;
    let grid = GridSpec::new(
        file.grid.n_x,
        file.grid.n_y,
        file.grid.half_extent_w0 * probe.w0,
        (0.0, 0.0),
    )
    .map_err(invalid)?;
    // Couplings validated through the same constructor as everything else.
    CouplingConfig::new(
        file.coupling.omega12,
        pump.amplitude,
        probe.amplitude,
        file.coupling.phi12,
        file.coupling.phi23,
        file.coupling.phi13,
    )
    .map_err(invalid)?;
    Ok(RunConfig {
        probe,
        pump,
        omega12: file.coupling.omega12,
        phi12: file.coupling.phi12,
        phi23: file.coupling.phi23,
        phi13: file.coupling.phi13,
        relax,
        params,
        grid,
        seed: file.seed,
    })
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

/// Output format of a map or field file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapFormat {
    Csv,
    Pgm16,
    Bin,
}

impl std::str::FromStr for MapFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "pgm16" | "pgm" => Ok(Self::Pgm16),
            "bin" => Ok(Self::Bin),
            other => Err(Error::Invalid {
                field: "format",
                message: format!("unknown format `{other}`; expected csv, pgm16 or bin"),
            }),
        }
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(path))?;
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(bytes).map_err(io_err(path))?;
    Ok(sha256_hex(bytes))
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

const FIELD_MAGIC: &[u8; 8] = b"LBFLD001";
const MAP_MAGIC: &[u8; 8] = b"LBMAP001";

fn bin_header(magic: &[u8; 8], grid: &GridSpec) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(32);
    bytes.extend_from_slice(magic);
    bytes.extend_from_slice(&(grid.n_x as u64).to_le_bytes());
    bytes.extend_from_slice(&(grid.n_y as u64).to_le_bytes());
    bytes.extend_from_slice(&grid.half_extent.to_le_bytes());
    bytes
}

fn parse_bin_header(bytes: &[u8], magic: &[u8; 8], path: &Path) -> Result<GridSpec> {
    if bytes.len() < 32 || &bytes[..8] != magic {
        return Err(Error::ConfigParse(format!("{}: bad or missing magic header", path.display())));
    }
    let n_x = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let n_y = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let half_extent = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    GridSpec::new(n_x, n_y, half_extent, (0.0, 0.0))
}

/// Write a complex field as CSV (`x,y,Re,Im`); returns the SHA-256 checksum.
pub fn write_field_csv(field: &ComplexField, path: &Path) -> Result<String> {
    let mut text = String::from("x,y,Re,Im\n");
    for iy in 0..field.grid.n_y {
        for ix in 0..field.grid.n_x {
            let (x, y) = field.grid.pixel_center(ix, iy);
            let v = field.at(ix, iy);
            // `{}` prints the shortest representation that round-trips.
            writeln!(text, "{},{},{},{}", x, y, v.re, v.im).unwrap();
        }
    }
    write_bytes(path, text.as_bytes())
}

/// Read back a CSV complex field written by [`write_field_csv`].
pub fn read_field_csv(path: &Path, grid: GridSpec) -> Result<ComplexField> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut values = Vec::with_capacity(grid.len());
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::ConfigParse(format!("line {}: expected 4 columns", lineno + 1)));
        }
        let re: f64 = cols[2]
            .parse()
            .map_err(|_| Error::ConfigParse(format!("line {}: bad float `{}`", lineno + 1, cols[2])))?;
        let im: f64 = cols[3]
            .parse()
            .map_err(|_| Error::ConfigParse(format!("line {}: bad float `{}`", lineno + 1, cols[3])))?;
        values.push(C64::new(re, im));
    }
    ComplexField::new(grid, values)
}

/// Write a complex field in the binary block format.
pub fn write_field_bin(field: &ComplexField, path: &Path) -> Result<String> {
    let mut bytes = bin_header(FIELD_MAGIC, &field.grid);
    bytes.reserve(field.values.len() * 16);
    for v in &field.values {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    write_bytes(path, &bytes)
}

/// Read back a binary complex field.
pub fn read_field_bin(path: &Path) -> Result<ComplexField> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let grid = parse_bin_header(&bytes, FIELD_MAGIC, path)?;
    let payload = &bytes[32..];
    if payload.len() != grid.len() * 16 {
        return Err(Error::ConfigParse(format!("{}: truncated payload", path.display())));
    }
    let values = payload
        .chunks_exact(16)
        .map(|c| {
            C64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    ComplexField::new(grid, values)
}

fn real_values<'a>(grid: &GridSpec, values: &'a [f64]) -> Result<&'a [f64]> {
    if values.len() != grid.len() {
        return Err(Error::Invalid {
            field: "values",
            message: format!("expected {} values, got {}", grid.len(), values.len()),
        });
    }
    Ok(values)
}

fn write_real_csv(grid: &GridSpec, values: &[f64], path: &Path) -> Result<String> {
    let values = real_values(grid, values)?;
    let mut text = String::from("x,y,value\n");
    for iy in 0..grid.n_y {
        for ix in 0..grid.n_x {
            let (x, y) = grid.pixel_center(ix, iy);
            writeln!(text, "{},{},{}", x, y, values[iy * grid.n_x + ix]).unwrap();
        }
    }
    write_bytes(path, text.as_bytes())
}

fn write_real_bin(grid: &GridSpec, values: &[f64], path: &Path) -> Result<String> {
    let values = real_values(grid, values)?;
    let mut bytes = bin_header(MAP_MAGIC, grid);
    bytes.reserve(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_bytes(path, &bytes)
}

/// Read back a binary real map as `(grid, values)`.
pub fn read_map_bin(path: &Path) -> Result<(GridSpec, Vec<f64>)> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let grid = parse_bin_header(&bytes, MAP_MAGIC, path)?;
    let payload = &bytes[32..];
    if payload.len() != grid.len() * 8 {
        return Err(Error::ConfigParse(format!("{}: truncated payload", path.display())));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((grid, values))
}

fn write_real_pgm16(grid: &GridSpec, values: &[f64], path: &Path) -> Result<String> {
    let values = real_values(grid, values)?;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut bytes = format!("P5\n{} {}\n65535\n", grid.n_x, grid.n_y).into_bytes();
    let scale = if hi > lo { 65535.0 / (hi - lo) } else { 0.0 };
    for v in values {
        // Degenerate scale (min = max) maps every pixel to 0.
        let q = ((v - lo) * scale).round().clamp(0.0, 65535.0) as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    let checksum = write_bytes(path, &bytes)?;
    let sidecar = format!(
        "min = {}\nmax = {}\nscale = linear\ndegenerate_rule = \"min==max maps all pixels to 0\"\n",
        lo, hi
    );
    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta");
    write_bytes(Path::new(&meta_path), sidecar.as_bytes())?;
    Ok(checksum)
}

/// Write an intensity map in the chosen format; returns the checksum.
pub fn write_intensity(map: &IntensityMap, path: &Path, format: MapFormat) -> Result<String> {
    match format {
        MapFormat::Csv => write_real_csv(&map.grid, &map.values, path),
        MapFormat::Bin => write_real_bin(&map.grid, &map.values, path),
        MapFormat::Pgm16 => write_real_pgm16(&map.grid, &map.values, path),
    }
}

/// Write a phase map in the chosen format; returns the checksum.
pub fn write_phase(map: &PhaseMap, path: &Path, format: MapFormat) -> Result<String> {
    match format {
        MapFormat::Csv => write_real_csv(&map.grid, &map.values, path),
        MapFormat::Bin => write_real_bin(&map.grid, &map.values, path),
        MapFormat::Pgm16 => write_real_pgm16(&map.grid, &map.values, path),
    }
}

/// Write the three eigenvalue sheets of a spectrum surface as CSV matrices
/// plus a metadata file; returns `(paths, checksums)`.
pub fn write_spectrum_surface(
    surface: &crate::holonomy::SpectrumSurface,
    dir: &Path,
) -> Result<Vec<(PathBuf, String)>> {
    let n = surface.resolution;
    let mut out = Vec::new();
    for (k, sheet) in surface.sheets.iter().enumerate() {
        let mut text = String::new();
        for iv in 0..n {
            let row: Vec<String> = (0..n).map(|iu| format!("{}", sheet[iv * n + iu])).collect();
            writeln!(text, "{}", row.join(",")).unwrap();
        }
        let path = dir.join(format!("sheet{k}.csv"));
        let sum = write_bytes(&path, text.as_bytes())?;
        out.push((path, sum));
    }
    let mut meta = format!("resolution = {n}\naxes = \"u = phi12+phi23, v = phi13, row-major in v\"\n");
    writeln!(meta, "zero_set_points = {}", surface.zero_set.len()).unwrap();
    let path = dir.join("surface.meta");
    let sum = write_bytes(&path, meta.as_bytes())?;
    out.push((path, sum));
    let mut zeros = String::from("u,v\n");
    for p in &surface.zero_set {
        writeln!(zeros, "{},{}", p.u, p.v).unwrap();
    }
    let path = dir.join("zero_set.csv");
    let sum = write_bytes(&path, zeros.as_bytes())?;
    out.push((path, sum));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

/// Record of one run: the effective config, software version, per-output
/// checksums, wall-clock timings and any machine-readable result records
/// (label → TOML blob).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config_echo: String,
    pub outputs: Vec<ManifestEntry>,
    pub timings_ms: Vec<(String, u64)>,
    #[serde(default)]
    pub records: Vec<(String, String)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

impl RunManifest {
    pub fn new(command: &str, config_echo: String) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_echo,
            outputs: Vec::new(),
            timings_ms: Vec::new(),
            records: Vec::new(),
        }
    }

    /// Attach a serializable result record under a label.
    pub fn record_value<T: Serialize>(&mut self, label: &str, value: &T) -> Result<()> {
        let text = toml::to_string_pretty(value).map_err(|e| Error::ConfigParse(e.to_string()))?;
        self.records.push((label.to_string(), text));
        Ok(())
    }

    pub fn record(&mut self, path: &Path, sha256: String) {
        self.outputs.push(ManifestEntry { path: path.display().to_string(), sha256 });
    }

    pub fn record_timing(&mut self, label: &str, millis: u64) {
        self.timings_ms.push((label.to_string(), millis));
    }

    /// Write the manifest itself (TOML) next to the outputs.
    pub fn write(&self, path: &Path) -> Result<String> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::ConfigParse(e.to_string()))?;
        write_bytes(path, text.as_bytes())
    }

    /// Re-hash every recorded output and compare with the stored checksums.
    pub fn verify(&self) -> Result<()> {
        for entry in &self.outputs {
            let path = PathBuf::from(&entry.path);
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            if sha256_hex(&bytes) != entry.sha256 {
                return Err(Error::ConfigInvalid(format!("checksum mismatch for {}", entry.path)));
            }
        }
        Ok(())
    }
}
