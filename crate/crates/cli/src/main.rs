// NaN must fail the `!(x > 0.0)` checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use reflectscope_core::acquisition::{DelayTable, Pixel, PixelGrid, DEFAULT_TABLE_CAP};
use reflectscope_core::analysis::{
    dv_overlay, extract_contours, pixel_channel_tx_map, Levels, Roi,
};
use reflectscope_core::compounding::{beamform_image, beamsum_profile};
use reflectscope_core::io::{
    self, beamsum_csv, contour_csv, dv_csv, encode_pgm, raw_grid_csv, AcquisitionConfig, RoiConfig,
    RunConfig, SceneRef, SchemeConfig,
};
use reflectscope_core::scene::{covering_fov, synth_rf};
use reflectscope_core::{Beamformer, Error, RfDataset};

#[derive(Parser)]
#[command(
    name = "reflectscope",
    version,
    about = "STA / plane-wave beamforming and reflection analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize RF data for a scene.
    Simulate {
        /// Preset name (wip, bop, bap) or scene file.
        #[arg(long)]
        scene: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured transmit scheme with its default set.
        #[arg(long)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Beamform an RF file into an 8-bit PGM and a raw grid CSV.
    Beamform {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bf: Option<String>,
        #[arg(long)]
        dynamic_range: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Raw grid dump; defaults to the PGM path with a `.csv` extension.
        #[arg(long)]
        raw: Option<PathBuf>,
    },
    /// Per-transmission beamformed values at pixels.
    Beamsum {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// `x,z` in meters; repeatable.
        #[arg(long = "pixel", required = true, value_parser = parse_pixel, allow_hyphen_values = true)]
        pixels: Vec<Pixel>,
        /// Repeatable; defaults to das.
        #[arg(long = "bf")]
        beamformers: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Contour isolines of one pixel's channel x transmission map.
    Contour {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_pixel, allow_hyphen_values = true)]
        pixel: Pixel,
        /// Comma-separated levels; eight automatic levels when absent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        levels: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Directivity Variance vectors over a region.
    Dv {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// `x_min,x_max,z_min,z_max` in meters.
        #[arg(long, value_parser = parse_roi, allow_hyphen_values = true)]
        roi: RoiConfig,
        #[arg(long)]
        subapertures: Option<usize>,
        #[arg(long)]
        percentile: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Everything the configuration asks for.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Use this RF file instead of simulating the configured scene.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Overrides `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Sta,
    Pw,
}

fn parse_numbers(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers"));
    }
    Ok(v)
}

fn parse_pixel(s: &str) -> Result<Pixel, String> {
    let v = parse_numbers(s, 2)?;
    if !(v[1] > 0.0) {
        return Err("z must be positive".into());
    }
    Ok(Pixel::new(v[0], v[1]))
}

fn parse_roi(s: &str) -> Result<RoiConfig, String> {
    let v = parse_numbers(s, 4)?;
    Ok(RoiConfig {
        x_min: v[0],
        x_max: v[1],
        z_min: v[2],
        z_max: v[3],
    })
}

/// A failure with its exit code: 1 for configuration, 2 for IO and format.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Format { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

type CliResult<T> = Result<T, Failure>;

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn base_dir(path: Option<&Path>) -> PathBuf {
    path.and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn sidecar_path(rf_path: &Path) -> PathBuf {
    let mut s = rf_path.as_os_str().to_owned();
    s.push(".toml");
    PathBuf::from(s)
}

/// Reads an RF file. The scheme and pulse length come from the `--config`
/// acquisition block when it sets one, else from the sidecar written by
/// `simulate`, else are inferred from the header.
fn load_rf(input: &Path, config: Option<&Path>) -> CliResult<RfDataset> {
    let configured = load_config(config)?.acquisition;
    let sidecar = sidecar_path(input);
    let acquisition = if configured != AcquisitionConfig::default() {
        Some(configured)
    } else if sidecar.is_file() {
        Some(RunConfig::load(&sidecar)?.acquisition)
    } else if config.is_some() {
        Some(configured)
    } else {
        None
    };
    let (scheme, cycles) = match &acquisition {
        Some(a) => {
            let header =
                io::rf_file::decode_header(&std::fs::read(input).map_err(|e| Error::Io {
                    path: input.to_path_buf(),
                    source: e,
                })?)?;
            let geometry =
                reflectscope_core::ArrayGeometry::linear(header.n_ch as usize, header.pitch)?;
            (Some(a.scheme.resolve(&geometry)), a.num_cycles)
        }
        None => (None, AcquisitionConfig::default().num_cycles),
    };
    Ok(io::read_rf(input, scheme, cycles)?)
}

fn resolve_beamformer(cfg: &RunConfig, kind: Option<&str>) -> CliResult<Beamformer> {
    let mut bc = cfg.beamformer.clone();
    if let Some(k) = kind {
        bc.kind = k.to_string();
    }
    Ok(bc.resolve()?)
}

/// Files are only written once every output has been computed.
struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn new() -> Self {
        Outputs(Vec::new())
    }

    fn add(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.0.push((path, bytes.into()));
    }

    fn commit(self) -> CliResult<()> {
        for (path, bytes) in self.0 {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            io::write_file(&path, &bytes)?;
        }
        Ok(())
    }
}

/// Sub-grid of `grid` covering `roi`, padded in depth for envelope
/// detection, and the ROI's index range within it.
fn roi_grid(grid: &PixelGrid, roi: &RoiConfig) -> CliResult<(PixelGrid, Roi)> {
    let inside = |v: f64, lo: f64, hi: f64| v >= lo - 1e-12 && v <= hi + 1e-12;
    let xs: Vec<usize> = (0..grid.n_x)
        .filter(|&i| inside(grid.x(i), roi.x_min, roi.x_max))
        .collect();
    let zs: Vec<usize> = (0..grid.n_z)
        .filter(|&i| inside(grid.z(i), roi.z_min, roi.z_max))
        .collect();
    if xs.is_empty() || zs.is_empty() {
        return Err(config_failure("dv ROI contains no grid pixels"));
    }
    const PAD: usize = 32;
    let (x0, x1) = (xs[0], *xs.last().unwrap());
    let z0 = zs[0].saturating_sub(PAD);
    let z1 = (*zs.last().unwrap() + PAD).min(grid.n_z - 1);
    let sub = PixelGrid::new(
        (grid.x(x0), grid.x(x1)),
        (grid.z(z0), grid.z(z1)),
        x1 - x0 + 1,
        z1 - z0 + 1,
    )?;
    let roi = Roi {
        ix: (0, x1 - x0 + 1),
        iz: (zs[0] - z0, zs.last().unwrap() - z0 + 1),
    };
    Ok((sub, roi))
}

fn contour_for(rf: &RfDataset, pixel: Pixel, levels: &Levels) -> CliResult<String> {
    let acq = rf.acquisition();
    let table = DelayTable::for_pixels(
        &[pixel],
        &acq.scheme,
        &acq.geometry,
        &acq.medium,
        DEFAULT_TABLE_CAP,
    )?;
    let map = pixel_channel_tx_map(rf, pixel, &table, 0);
    Ok(contour_csv(&extract_contours(&map, levels)?))
}

fn dv_for(
    rf: &RfDataset,
    grid: &PixelGrid,
    roi: &RoiConfig,
    cfg: &reflectscope_core::DvConfig,
    percentile: f64,
) -> CliResult<String> {
    if !(0.0..=100.0).contains(&percentile) {
        return Err(config_failure("percentile must be in [0, 100]"));
    }
    let (sub, roi) = roi_grid(grid, roi)?;
    let image = beamform_image(rf, &sub, &Beamformer::das_default(), None)?;
    Ok(dv_csv(&dv_overlay(rf, &image, roi, cfg, percentile)?))
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate {
            scene,
            config,
            scheme,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = scheme {
                cfg.acquisition.scheme = match s {
                    SchemeArg::Sta => SchemeConfig::Sta { elements: None },
                    SchemeArg::Pw => SchemeConfig::Pw { angles_deg: None },
                };
            }
            if let Some(name) = scene {
                cfg.scene = Some(SceneRef::Name(name));
            }
            let base = base_dir(config.as_deref());
            let run = cfg.resolve(&base)?;
            let scene = run.scene.ok_or_else(|| {
                config_failure("no scene given (use --scene or a config with `scene`)")
            })?;
            let fov = covering_fov(&scene, &run.acquisition, &run.grid)?;
            let rf = synth_rf(&scene, &run.acquisition, &fov)?;
            let sidecar = RunConfig {
                acquisition: AcquisitionConfig::from_spec(rf.acquisition()),
                ..RunConfig::default()
            };
            let mut outputs = Outputs::new();
            outputs.add(out.clone(), io::encode_rf(&rf)?);
            outputs.add(sidecar_path(&out), sidecar.to_toml());
            outputs.commit()
        }
        Command::Beamform {
            input,
            config,
            bf,
            dynamic_range,
            out,
            raw,
        } => {
            let cfg = load_config(config.as_deref())?;
            let beamformer = resolve_beamformer(&cfg, bf.as_deref())?;
            let grid = cfg.grid.resolve()?;
            let dr = dynamic_range.or(cfg.output.dynamic_range);
            if dr.is_some_and(|d| !(d > 0.0)) {
                return Err(config_failure("dynamic range must be positive"));
            }
            let rf = load_rf(&input, config.as_deref())?;
            let image = beamform_image(&rf, &grid, &beamformer, dr)?;
            let mut outputs = Outputs::new();
            outputs.add(out.clone(), encode_pgm(&image));
            outputs.add(
                raw.unwrap_or_else(|| with_extension(&out, "csv")),
                raw_grid_csv(&image),
            );
            outputs.commit()
        }
        Command::Beamsum {
            input,
            config,
            pixels,
            beamformers,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let bfs = if beamformers.is_empty() {
                vec![resolve_beamformer(&cfg, None)?]
            } else {
                beamformers
                    .iter()
                    .map(|k| resolve_beamformer(&cfg, Some(k)))
                    .collect::<CliResult<_>>()?
            };
            let rf = load_rf(&input, config.as_deref())?;
            let mut profiles = Vec::new();
            for &p in &pixels {
                for bf in &bfs {
                    profiles.push(beamsum_profile(&rf, p, bf)?);
                }
            }
            let mut outputs = Outputs::new();
            outputs.add(out, beamsum_csv(&profiles));
            outputs.commit()
        }
        Command::Contour {
            input,
            config,
            pixel,
            levels,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let levels = match levels {
                Some(l) => Levels::Explicit(l),
                None => cfg.output.contour_levels(),
            };
            let rf = load_rf(&input, config.as_deref())?;
            let mut outputs = Outputs::new();
            outputs.add(out, contour_for(&rf, pixel, &levels)?);
            outputs.commit()
        }
        Command::Dv {
            input,
            config,
            roi,
            subapertures,
            percentile,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let grid = cfg.grid.resolve()?;
            let mut dv = cfg.output.dv_config();
            if let Some(n) = subapertures {
                dv.num_subapertures = n;
            }
            let rf = load_rf(&input, config.as_deref())?;
            dv.block_len(&rf.acquisition().geometry)?;
            let csv = dv_for(
                &rf,
                &grid,
                &roi,
                &dv,
                percentile.unwrap_or(cfg.output.dv_percentile),
            )?;
            let mut outputs = Outputs::new();
            outputs.add(out, csv);
            outputs.commit()
        }
        Command::Pipeline {
            config,
            input,
            out_dir,
        } => {
            let cfg = RunConfig::load(&config)?;
            let run = cfg.resolve(&base_dir(Some(&config)))?;
            let dir = out_dir.unwrap_or_else(|| base_dir(Some(&config)).join(&run.out_dir));
            let mut outputs = Outputs::new();
            let rf = match (&input, &run.scene) {
                (Some(path), _) => load_rf(path, Some(&config))?,
                (None, Some(scene)) => {
                    let fov = covering_fov(scene, &run.acquisition, &run.grid)?;
                    let rf = synth_rf(scene, &run.acquisition, &fov)?;
                    let sidecar = RunConfig {
                        acquisition: AcquisitionConfig::from_spec(rf.acquisition()),
                        ..RunConfig::default()
                    };
                    outputs.add(dir.join("rf.urfd"), io::encode_rf(&rf)?);
                    outputs.add(dir.join("rf.urfd.toml"), sidecar.to_toml());
                    rf
                }
                (None, None) => {
                    return Err(config_failure(
                        "pipeline needs a scene in the config or --in",
                    ))
                }
            };
            let image = beamform_image(&rf, &run.grid, &run.beamformer, Some(run.dynamic_range))?;
            outputs.add(dir.join("image.pgm"), encode_pgm(&image));
            outputs.add(dir.join("image.csv"), raw_grid_csv(&image));
            if !run.beamsum_pixels.is_empty() {
                let mut profiles = Vec::new();
                for &p in &run.beamsum_pixels {
                    for bf in &run.beamsum_beamformers {
                        profiles.push(beamsum_profile(&rf, p, bf)?);
                    }
                }
                outputs.add(dir.join("beamsum.csv"), beamsum_csv(&profiles));
            }
            for (k, &p) in run.contour_pixels.iter().enumerate() {
                outputs.add(
                    dir.join(format!("contour_{k}.csv")),
                    contour_for(&rf, p, &run.contour_levels)?,
                );
            }
            if let Some(roi) = &run.dv_roi {
                outputs.add(
                    dir.join("dv.csv"),
                    dv_for(&rf, &run.grid, roi, &run.dv, run.dv_percentile)?,
                );
            }
            outputs.commit()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pixel_and_roi() {
        let p = parse_pixel("0.001, 0.02").unwrap();
        assert_eq!((p.x, p.z), (0.001, 0.02));
        assert!(parse_pixel("0.001").is_err());
        assert!(parse_pixel("0,-1").is_err());
        let r = parse_roi("-1e-3,1e-3,0.01,0.02").unwrap();
        assert_eq!(r.z_max, 0.02);
    }

    #[test]
    fn roi_grid_indices() {
        let grid = PixelGrid::new((-1e-3, 1e-3), (10e-3, 20e-3), 21, 101).unwrap();
        let roi = RoiConfig {
            x_min: 0.0,
            x_max: 0.5e-3,
            z_min: 15e-3,
            z_max: 16e-3,
        };
        let (sub, r) = roi_grid(&grid, &roi).unwrap();
        assert_eq!(sub.n_x, 6);
        assert_eq!(r.iz.1 - r.iz.0, 11);
        assert!((sub.z(r.iz.0) - 15e-3).abs() < 1e-12);
    }
}
