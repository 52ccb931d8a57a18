//! TOML run configuration and scene files.
//!
//! Lengths are meters, frequencies hertz, angles degrees. Unknown keys are
//! rejected. See `docs/config.md` for the full grammar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    AcquisitionSpec, ArrayGeometry, MediumSpec, Pixel, PixelGrid, PulseSpec, TransmitScheme,
};
use crate::analysis::{DvConfig, Levels};
use crate::beamform::{
    Beamformer, FdmasApodization, FdmasConfig, MvdrConfig, SbConfig, WindowKind,
};
use crate::error::{Error, Result};
use crate::scene::{self, DiffusePoint, ReflectorShape, Scene, SpecularReflector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionConfig {
    #[serde(default = "defaults::num_elements")]
    pub num_elements: usize,
    #[serde(default = "defaults::pitch")]
    pub pitch: f64,
    #[serde(default = "defaults::center_frequency")]
    pub center_frequency: f64,
    #[serde(default = "defaults::sampling_frequency")]
    pub sampling_frequency: f64,
    #[serde(default = "defaults::num_cycles")]
    pub num_cycles: f64,
    #[serde(default = "defaults::speed_of_sound")]
    pub speed_of_sound: f64,
    #[serde(default)]
    pub scheme: SchemeConfig,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            num_elements: defaults::num_elements(),
            pitch: defaults::pitch(),
            center_frequency: defaults::center_frequency(),
            sampling_frequency: defaults::sampling_frequency(),
            num_cycles: defaults::num_cycles(),
            speed_of_sound: defaults::speed_of_sound(),
            scheme: SchemeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SchemeConfig {
    /// Single-element transmissions; all elements when `elements` is absent.
    Sta {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        elements: Option<Vec<usize>>,
    },
    /// Plane waves; the 73-angle preset when `angles_deg` is absent.
    Pw {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angles_deg: Option<Vec<f64>>,
    },
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig::Pw { angles_deg: None }
    }
}

impl SchemeConfig {
    pub fn resolve(&self, geometry: &ArrayGeometry) -> TransmitScheme {
        match self {
            SchemeConfig::Sta { elements: None } => TransmitScheme::sta_full(geometry),
            SchemeConfig::Sta { elements: Some(e) } => TransmitScheme::Sta {
                elements: e.clone(),
            },
            SchemeConfig::Pw { angles_deg: None } => TransmitScheme::pw_preset(),
            SchemeConfig::Pw {
                angles_deg: Some(a),
            } => TransmitScheme::Pw {
                angles: a.iter().map(|d| d.to_radians()).collect(),
            },
        }
    }

    pub fn from_scheme(scheme: &TransmitScheme) -> Self {
        match scheme {
            TransmitScheme::Sta { elements } => SchemeConfig::Sta {
                elements: Some(elements.clone()),
            },
            TransmitScheme::Pw { angles } => SchemeConfig::Pw {
                angles_deg: Some(angles.iter().map(|a| a.to_degrees()).collect()),
            },
        }
    }
}

impl AcquisitionConfig {
    pub fn resolve(&self) -> Result<AcquisitionSpec> {
        let geometry = ArrayGeometry::linear(self.num_elements, self.pitch)?;
        let scheme = self.scheme.resolve(&geometry);
        let acq = AcquisitionSpec {
            pulse: PulseSpec::new(
                self.center_frequency,
                self.sampling_frequency,
                self.num_cycles,
            )?,
            medium: MediumSpec::new(self.speed_of_sound)?,
            scheme,
            geometry,
        };
        acq.validate()?;
        Ok(acq)
    }

    pub fn from_spec(acq: &AcquisitionSpec) -> Self {
        Self {
            num_elements: acq.geometry.num_elements(),
            pitch: acq.geometry.pitch(),
            center_frequency: acq.pulse.center_frequency,
            sampling_frequency: acq.pulse.sampling_frequency,
            num_cycles: acq.pulse.num_cycles,
            speed_of_sound: acq.medium.speed_of_sound,
            scheme: SchemeConfig::from_scheme(&acq.scheme),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowName {
    Rectangular,
    #[default]
    Tukey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformerConfig {
    /// One of `das`, `fdmas-na`, `fdmas-a`, `mvdr`, `sb`.
    #[serde(default = "defaults::beamformer")]
    pub kind: String,
    #[serde(default = "defaults::f_number")]
    pub f_number: f64,
    #[serde(default)]
    pub window: WindowName,
    #[serde(default = "defaults::tukey_taper")]
    pub tukey_taper: f64,
    #[serde(default)]
    pub fdmas: FdmasParams,
    #[serde(default)]
    pub mvdr: MvdrParams,
    #[serde(default)]
    pub sb: SbParams,
}

impl Default for BeamformerConfig {
    fn default() -> Self {
        Self {
            kind: defaults::beamformer(),
            f_number: defaults::f_number(),
            window: WindowName::default(),
            tukey_taper: defaults::tukey_taper(),
            fdmas: FdmasParams::default(),
            mvdr: MvdrParams::default(),
            sb: SbParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdmasParams {
    #[serde(default = "defaults::upsample")]
    pub upsample_factor: usize,
    /// `[low, high]` in Hz; defaults to `[1.5 f0, 2.5 f0]`.
    #[serde(default)]
    pub passband: Option<[f64; 2]>,
    #[serde(default = "defaults::taps")]
    pub taps: usize,
}

impl Default for FdmasParams {
    fn default() -> Self {
        Self {
            upsample_factor: defaults::upsample(),
            passband: None,
            taps: defaults::taps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MvdrParams {
    pub subarray_length: Option<usize>,
    pub diagonal_loading: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SbParams {
    #[serde(default = "defaults::tilt_min")]
    pub tilt_min_deg: f64,
    #[serde(default = "defaults::tilt_max")]
    pub tilt_max_deg: f64,
    #[serde(default = "defaults::tilt_step")]
    pub tilt_step_deg: f64,
    #[serde(default = "defaults::receive_sigma")]
    pub receive_sigma_deg: f64,
    #[serde(default = "defaults::yes")]
    pub matched_filter: bool,
}

impl Default for SbParams {
    fn default() -> Self {
        Self {
            tilt_min_deg: defaults::tilt_min(),
            tilt_max_deg: defaults::tilt_max(),
            tilt_step_deg: defaults::tilt_step(),
            receive_sigma_deg: defaults::receive_sigma(),
            matched_filter: true,
        }
    }
}

impl BeamformerConfig {
    pub fn named(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            ..Self::default()
        }
    }

    pub fn resolve(&self) -> Result<Beamformer> {
        if !(self.f_number > 0.0) {
            return Err(Error::invalid("beamformer.f_number", "must be positive"));
        }
        let window = match self.window {
            WindowName::Rectangular => WindowKind::Rectangular,
            WindowName::Tukey => {
                if !(0.0..=1.0).contains(&self.tukey_taper) {
                    return Err(Error::invalid(
                        "beamformer.tukey_taper",
                        "must be in [0, 1]",
                    ));
                }
                WindowKind::Tukey {
                    taper: self.tukey_taper,
                }
            }
        };
        let fdmas = |apodization| FdmasConfig {
            upsample_factor: self.fdmas.upsample_factor,
            passband: self.fdmas.passband.map(|[a, b]| (a, b)),
            taps: self.fdmas.taps,
            apodization,
        };
        Ok(match self.kind.as_str() {
            "das" => Beamformer::Das {
                f_number: self.f_number,
                window,
            },
            "fdmas-na" => Beamformer::Fdmas(fdmas(FdmasApodization::None)),
            "fdmas-a" => Beamformer::Fdmas(fdmas(FdmasApodization::Receive {
                f_number: self.f_number,
                window,
            })),
            "mvdr" => Beamformer::Mvdr(MvdrConfig {
                subarray_length: self.mvdr.subarray_length,
                diagonal_loading: self.mvdr.diagonal_loading,
            }),
            "sb" => {
                let p = &self.sb;
                if !(p.tilt_step_deg > 0.0) || !(p.tilt_max_deg >= p.tilt_min_deg) {
                    return Err(Error::invalid(
                        "beamformer.sb",
                        "need step > 0 and max >= min",
                    ));
                }
                let n =
                    ((p.tilt_max_deg - p.tilt_min_deg) / p.tilt_step_deg + 1e-9).floor() as usize;
                let cfg = SbConfig {
                    tilt_grid: (0..=n)
                        .map(|k| (p.tilt_min_deg + k as f64 * p.tilt_step_deg).to_radians())
                        .collect(),
                    receive_sigma: p.receive_sigma_deg.to_radians(),
                    matched_filter: p.matched_filter,
                };
                cfg.validate()?;
                Beamformer::Sb(cfg)
            }
            other => {
                return Err(Error::invalid(
                    "beamformer.kind",
                    format!(
                        "unknown beamformer '{other}' (expected das, fdmas-na, fdmas-a, mvdr, sb)"
                    ),
                ))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub n_x: usize,
    pub n_z: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x_min: -12e-3,
            x_max: 12e-3,
            z_min: 3e-3,
            z_max: 30e-3,
            n_x: 128,
            n_z: 512,
        }
    }
}

impl GridConfig {
    pub fn resolve(&self) -> Result<PixelGrid> {
        PixelGrid::new(
            (self.x_min, self.x_max),
            (self.z_min, self.z_max),
            self.n_x,
            self.n_z,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "defaults::out_dir")]
    pub dir: PathBuf,
    /// Defaults to 40 dB for SB and 70 dB otherwise.
    #[serde(default)]
    pub dynamic_range: Option<f64>,
    /// `[x, z]` pixels for beamsum profiles.
    #[serde(default)]
    pub beamsum_pixels: Vec<[f64; 2]>,
    /// Beamformers compared in beamsum output; defaults to the selected one.
    #[serde(default)]
    pub beamsum_beamformers: Vec<String>,
    #[serde(default)]
    pub contour_pixels: Vec<[f64; 2]>,
    /// Explicit contour levels; eight automatic levels when absent.
    #[serde(default)]
    pub contour_levels: Option<Vec<f64>>,
    #[serde(default)]
    pub dv_roi: Option<RoiConfig>,
    #[serde(default = "defaults::subapertures")]
    pub dv_subapertures: usize,
    #[serde(default = "defaults::percentile")]
    pub dv_percentile: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: defaults::out_dir(),
            dynamic_range: None,
            beamsum_pixels: Vec::new(),
            beamsum_beamformers: Vec::new(),
            contour_pixels: Vec::new(),
            contour_levels: None,
            dv_roi: None,
            dv_subapertures: defaults::subapertures(),
            dv_percentile: defaults::percentile(),
        }
    }
}

impl OutputConfig {
    pub fn contour_levels(&self) -> Levels {
        match &self.contour_levels {
            Some(l) => Levels::Explicit(l.clone()),
            None => Levels::Auto,
        }
    }

    pub fn dv_config(&self) -> DvConfig {
        DvConfig {
            num_subapertures: self.dv_subapertures,
        }
    }
}

fn pixels(list: &[[f64; 2]]) -> Vec<Pixel> {
    list.iter().map(|&[x, z]| Pixel::new(x, z)).collect()
}

/// Where the scene comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SceneRef {
    /// A preset name (`wip`, `bop`, `bap`) or a path to a scene file.
    Name(String),
    Inline(SceneFile),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub acquisition: AcquisitionConfig,
    #[serde(default)]
    pub scene: Option<SceneRef>,
    #[serde(default)]
    pub beamformer: BeamformerConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A run configuration with every field resolved to domain types.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub acquisition: AcquisitionSpec,
    pub scene: Option<Scene>,
    pub beamformer: Beamformer,
    pub grid: PixelGrid,
    pub dynamic_range: f64,
    pub beamsum_pixels: Vec<Pixel>,
    pub beamsum_beamformers: Vec<Beamformer>,
    pub contour_pixels: Vec<Pixel>,
    pub contour_levels: Levels,
    pub dv_roi: Option<RoiConfig>,
    pub dv: DvConfig,
    pub dv_percentile: f64,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Validates everything; scene paths are relative to `base`.
    pub fn resolve(&self, base: &Path) -> Result<ResolvedRun> {
        let acquisition = self.acquisition.resolve()?;
        let beamformer = self.beamformer.resolve()?;
        let scene = match &self.scene {
            None => None,
            Some(r) => Some(resolve_scene(r, base)?),
        };
        let grid = self.grid.resolve()?;
        let dynamic_range = self
            .output
            .dynamic_range
            .unwrap_or_else(|| beamformer.default_dynamic_range());
        if !(dynamic_range > 0.0) {
            return Err(Error::invalid("output.dynamic_range", "must be positive"));
        }
        let beamsum_beamformers = self
            .output
            .beamsum_beamformers
            .iter()
            .map(|k| {
                BeamformerConfig {
                    kind: k.clone(),
                    ..self.beamformer.clone()
                }
                .resolve()
            })
            .collect::<Result<Vec<_>>>()?;
        let dv = self.output.dv_config();
        dv.block_len(&acquisition.geometry)?;
        if !(0.0..=100.0).contains(&self.output.dv_percentile) {
            return Err(Error::invalid(
                "output.dv_percentile",
                "must be in [0, 100]",
            ));
        }
        if let Some(roi) = &self.output.dv_roi {
            if !(roi.x_max >= roi.x_min && roi.z_max >= roi.z_min) {
                return Err(Error::invalid("output.dv_roi", "max must be >= min"));
            }
        }
        for p in self
            .output
            .beamsum_pixels
            .iter()
            .chain(&self.output.contour_pixels)
        {
            if !(p[1] > 0.0) {
                return Err(Error::invalid("output", "analysis pixels need z > 0"));
            }
        }
        Ok(ResolvedRun {
            acquisition,
            scene,
            beamsum_beamformers: if beamsum_beamformers.is_empty() {
                vec![beamformer.clone()]
            } else {
                beamsum_beamformers
            },
            beamformer,
            grid,
            dynamic_range,
            beamsum_pixels: pixels(&self.output.beamsum_pixels),
            contour_pixels: pixels(&self.output.contour_pixels),
            contour_levels: self.output.contour_levels(),
            dv_roi: self.output.dv_roi,
            dv,
            dv_percentile: self.output.dv_percentile,
            out_dir: self.output.dir.clone(),
        })
    }
}

pub fn resolve_scene(r: &SceneRef, base: &Path) -> Result<Scene> {
    match r {
        SceneRef::Inline(s) => s.resolve(),
        SceneRef::Name(name) => {
            if let Some(s) = scene::preset_scene(name) {
                return Ok(s);
            }
            let path = base.join(name);
            if path.is_file() {
                SceneFile::load(&path)?.resolve()
            } else {
                Err(Error::Config(format!(
                    "scene '{name}' is neither a preset (wip, bop, bap) nor a file"
                )))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffuseEntry {
    pub x: f64,
    pub z: f64,
    #[serde(default = "defaults::one")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeckleEntry {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub density_per_mm2: f64,
    #[serde(default = "defaults::speckle_sigma")]
    pub amplitude_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateEntry {
    pub x: f64,
    pub z: f64,
    pub half_length: f64,
    pub tilt_deg: f64,
    #[serde(default = "defaults::one")]
    pub amplitude: f64,
    #[serde(default = "defaults::directivity_deg")]
    pub directivity_sigma_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcEntry {
    pub x: f64,
    pub z: f64,
    pub radius: f64,
    pub start_deg: f64,
    pub end_deg: f64,
    #[serde(default = "defaults::one")]
    pub amplitude: f64,
    #[serde(default = "defaults::directivity_deg")]
    pub directivity_sigma_deg: f64,
}

/// Scene file contents. Specular entries are indexed plates first, then arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default)]
    pub attenuation_db_cm_mhz: f64,
    #[serde(default)]
    pub noise_amplitude: f64,
    #[serde(default)]
    pub noise_seed: u64,
    /// Index of the reverberating specular entry.
    #[serde(default)]
    pub reverberant: Option<usize>,
    #[serde(default)]
    pub diffuse: Vec<DiffuseEntry>,
    #[serde(default)]
    pub speckle: Vec<SpeckleEntry>,
    #[serde(default)]
    pub plate: Vec<PlateEntry>,
    #[serde(default)]
    pub arc: Vec<ArcEntry>,
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn resolve(&self) -> Result<Scene> {
        let mut diffuse: Vec<DiffusePoint> = self
            .diffuse
            .iter()
            .map(|d| DiffusePoint {
                x: d.x,
                z: d.z,
                amplitude: d.amplitude,
            })
            .collect();
        for s in &self.speckle {
            if !(s.x_max > s.x_min && s.z_max > s.z_min)
                || !(s.density_per_mm2 >= 0.0)
                || !(s.amplitude_sigma > 0.0)
            {
                return Err(Error::invalid(
                    "speckle",
                    "need a non-empty region, density >= 0 and sigma > 0",
                ));
            }
            diffuse.extend(scene::speckle(
                (s.x_min, s.x_max),
                (s.z_min, s.z_max),
                s.density_per_mm2,
                s.amplitude_sigma,
                s.seed,
            ));
        }
        let plates = self.plate.iter().map(|p| SpecularReflector {
            shape: ReflectorShape::Plate {
                x: p.x,
                z: p.z,
                half_length: p.half_length,
                tilt: p.tilt_deg.to_radians(),
            },
            amplitude: p.amplitude,
            directivity_sigma: p.directivity_sigma_deg.to_radians(),
        });
        let arcs = self.arc.iter().map(|a| SpecularReflector {
            shape: ReflectorShape::Arc {
                x: a.x,
                z: a.z,
                radius: a.radius,
                start: a.start_deg.to_radians(),
                end: a.end_deg.to_radians(),
            },
            amplitude: a.amplitude,
            directivity_sigma: a.directivity_sigma_deg.to_radians(),
        });
        let scene = Scene {
            diffuse,
            specular: plates.chain(arcs).collect(),
            attenuation: self.attenuation_db_cm_mhz,
            noise_amplitude: self.noise_amplitude,
            noise_seed: self.noise_seed,
            reverberant: self.reverberant,
            multiple_reflections: self.reverberant.is_some(),
        };
        scene.validate()?;
        Ok(scene)
    }
}

mod defaults {
    use std::path::PathBuf;

    pub fn num_elements() -> usize {
        128
    }
    pub fn pitch() -> f64 {
        0.3e-3
    }
    pub fn center_frequency() -> f64 {
        7.6e6
    }
    pub fn sampling_frequency() -> f64 {
        31.25e6
    }
    pub fn num_cycles() -> f64 {
        2.5
    }
    pub fn speed_of_sound() -> f64 {
        1540.0
    }
    pub fn beamformer() -> String {
        "das".into()
    }
    pub fn f_number() -> f64 {
        1.5
    }
    pub fn tukey_taper() -> f64 {
        0.5
    }
    pub fn upsample() -> usize {
        2
    }
    pub fn taps() -> usize {
        101
    }
    pub fn tilt_min() -> f64 {
        -30.0
    }
    pub fn tilt_max() -> f64 {
        30.0
    }
    pub fn tilt_step() -> f64 {
        0.5
    }
    pub fn receive_sigma() -> f64 {
        3.0
    }
    pub fn yes() -> bool {
        true
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
    pub fn subapertures() -> usize {
        4
    }
    pub fn percentile() -> f64 {
        90.0
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn speckle_sigma() -> f64 {
        0.1
    }
    pub fn directivity_deg() -> f64 {
        2.0
    }
}
