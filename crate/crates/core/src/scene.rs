//! Synthetic pulse-echo RF generation from diffuse and specular scatterers.
//!
//! Diffuse points scatter omnidirectionally. Specular reflectors (plates and
//! circular arcs) are discretized at a quarter wavelength and every surface
//! sample re-radiates with a Gaussian directivity centered on the mirror
//! direction `a_r = a_inc - 2 a_g`, where `a_g` is the local surface tilt.
//! Angle conventions are those of [`TransmitScheme::incidence_angle`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::acquisition::{
    element_angle, rx_delay, AcquisitionSpec, ArrayGeometry, Pixel, PixelGrid, TransmitScheme,
};
use crate::error::{Error, Result};
use crate::rf::RfDataset;

/// Amplitude of the single-order reverberation copy.
pub const REVERB_GAIN: f64 = 0.3;

/// Contributions whose directivity weight falls below this are skipped.
const DIRECTIVITY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusePoint {
    pub x: f64,
    pub z: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReflectorShape {
    /// Straight segment centered on `(x, z)`; `tilt` is the slope angle
    /// `atan(dz/dx)`, positive when the plate deepens toward `+x`.
    Plate {
        x: f64,
        z: f64,
        half_length: f64,
        tilt: f64,
    },
    /// Arc of the circle centered on `(x, z)`. The polar angle `phi` is
    /// measured from the circle's top (the point nearest the array) toward
    /// `+x`, so the surface point is `(x + r sin phi, z - r cos phi)` and its
    /// tilt equals `phi`.
    Arc {
        x: f64,
        z: f64,
        radius: f64,
        start: f64,
        end: f64,
    },
}

/// A point on a specular surface with its local tilt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub x: f64,
    pub z: f64,
    pub tilt: f64,
}

impl ReflectorShape {
    /// Surface samples no further than `spacing` apart.
    pub fn samples(&self, spacing: f64) -> Vec<SurfaceSample> {
        match *self {
            ReflectorShape::Plate {
                x,
                z,
                half_length,
                tilt,
            } => {
                let n = ((2.0 * half_length / spacing).ceil() as usize).max(1);
                let (c, s) = (tilt.cos(), tilt.sin());
                (0..=n)
                    .map(|k| {
                        let u = -half_length + 2.0 * half_length * k as f64 / n as f64;
                        SurfaceSample {
                            x: x + u * c,
                            z: z + u * s,
                            tilt,
                        }
                    })
                    .collect()
            }
            ReflectorShape::Arc {
                x,
                z,
                radius,
                start,
                end,
            } => {
                let n = ((radius * (end - start).abs() / spacing).ceil() as usize).max(1);
                (0..=n)
                    .map(|k| {
                        let phi = start + (end - start) * k as f64 / n as f64;
                        SurfaceSample {
                            x: x + radius * phi.sin(),
                            z: z - radius * phi.cos(),
                            tilt: phi,
                        }
                    })
                    .collect()
            }
        }
    }

    /// Lateral mirror image (`x -> -x`).
    pub fn mirrored(&self) -> Self {
        match *self {
            ReflectorShape::Plate {
                x,
                z,
                half_length,
                tilt,
            } => ReflectorShape::Plate {
                x: -x,
                z,
                half_length,
                tilt: -tilt,
            },
            ReflectorShape::Arc {
                x,
                z,
                radius,
                start,
                end,
            } => ReflectorShape::Arc {
                x: -x,
                z,
                radius,
                start: -end,
                end: -start,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecularReflector {
    pub shape: ReflectorShape,
    /// Amplitude of each surface sample.
    pub amplitude: f64,
    /// Standard deviation of the mirror directivity lobe, radians.
    pub directivity_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub diffuse: Vec<DiffusePoint>,
    pub specular: Vec<SpecularReflector>,
    /// Attenuation in dB/cm/MHz, applied at the center frequency as a
    /// round-trip amplitude decay with depth.
    pub attenuation: f64,
    /// Standard deviation of additive white noise.
    pub noise_amplitude: f64,
    pub noise_seed: u64,
    /// Index into `specular` of the interface that reverberates.
    pub reverberant: Option<usize>,
    /// Enables the reverberation copy of `reverberant`.
    pub multiple_reflections: bool,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        for p in &self.diffuse {
            if !(p.z > 0.0) || !p.x.is_finite() {
                return Err(Error::invalid(
                    "scene",
                    format!("diffuse point at z = {} <= 0", p.z),
                ));
            }
            if !(p.amplitude.is_finite()) {
                return Err(Error::invalid("scene", "non-finite diffuse amplitude"));
            }
        }
        for r in &self.specular {
            if !(r.directivity_sigma > 0.0) {
                return Err(Error::invalid(
                    "scene",
                    "directivity sigma must be positive",
                ));
            }
            if !(r.amplitude >= 0.0) {
                return Err(Error::invalid("scene", "reflector amplitude must be >= 0"));
            }
            match r.shape {
                ReflectorShape::Plate { half_length, .. } if !(half_length > 0.0) => {
                    return Err(Error::invalid(
                        "scene",
                        "plate half length must be positive",
                    ));
                }
                ReflectorShape::Arc { radius, .. } if !(radius > 0.0) => {
                    return Err(Error::invalid("scene", "arc radius must be positive"));
                }
                _ => {}
            }
            if r.shape.samples(1e-3).iter().any(|s| !(s.z > 0.0)) {
                return Err(Error::invalid("scene", "reflector extends to z <= 0"));
            }
        }
        if let Some(idx) = self.reverberant {
            if idx >= self.specular.len() {
                return Err(Error::invalid("scene", "reverberant index out of range"));
            }
        }
        if self.noise_amplitude < 0.0 || self.attenuation < 0.0 {
            return Err(Error::invalid(
                "scene",
                "noise and attenuation must be >= 0",
            ));
        }
        Ok(())
    }

    /// Union of two scenes; global settings are taken from `self`.
    pub fn union(&self, other: &Scene) -> Scene {
        let mut out = self.clone();
        out.diffuse.extend_from_slice(&other.diffuse);
        out.specular.extend_from_slice(&other.specular);
        out
    }

    /// Bounding box `((x_min, x_max), (z_min, z_max))` of every scatterer,
    /// with specular surfaces sampled at `spacing`; `None` for an empty scene.
    pub fn extent(&self, spacing: f64) -> Option<((f64, f64), (f64, f64))> {
        let points = self.diffuse.iter().map(|p| (p.x, p.z)).chain(
            self.specular
                .iter()
                .flat_map(|r| r.shape.samples(spacing))
                .map(|s| (s.x, s.z)),
        );
        points.fold(None, |acc, (x, z)| {
            let ((x0, x1), (z0, z1)) = acc.unwrap_or(((x, x), (z, z)));
            Some(((x0.min(x), x1.max(x)), (z0.min(z), z1.max(z))))
        })
    }

    /// Lateral mirror image of the scene.
    pub fn mirrored(&self) -> Scene {
        let mut out = self.clone();
        out.diffuse.iter_mut().for_each(|p| p.x = -p.x);
        out.specular
            .iter_mut()
            .for_each(|r| r.shape = r.shape.mirrored());
        out
    }

    /// Round-trip amplitude attenuation coefficient in nepers per meter of depth.
    fn beta(&self, f0: f64) -> f64 {
        // dB/cm/MHz -> Np/m, doubled for the round trip.
        2.0 * self.attenuation * (f0 / 1e6) * 100.0 / (20.0 / std::f64::consts::LN_10)
    }
}

/// One scattering source prepared for synthesis.
#[derive(Debug, Clone, Copy)]
struct Source {
    x: f64,
    z: f64,
    amplitude: f64,
    /// `Some((tilt, sigma))` for specular surface samples.
    mirror: Option<(f64, f64)>,
    /// Echo arrival multiplier (1 for direct, 2 for reverberation).
    delay_scale: f64,
}

fn collect_sources(scene: &Scene, acq: &AcquisitionSpec) -> Vec<Source> {
    let spacing = acq.wavelength() / 4.0;
    let beta = scene.beta(acq.pulse.center_frequency);
    let mut out: Vec<Source> = scene
        .diffuse
        .iter()
        .map(|p| Source {
            x: p.x,
            z: p.z,
            amplitude: p.amplitude * (-beta * p.z).exp(),
            mirror: None,
            delay_scale: 1.0,
        })
        .collect();
    for (idx, r) in scene.specular.iter().enumerate() {
        let reverb = scene.multiple_reflections && scene.reverberant == Some(idx);
        for s in r.shape.samples(spacing) {
            let src = Source {
                x: s.x,
                z: s.z,
                amplitude: r.amplitude * (-beta * s.z).exp(),
                mirror: Some((s.tilt, r.directivity_sigma)),
                delay_scale: 1.0,
            };
            out.push(src);
            if reverb {
                out.push(Source {
                    amplitude: src.amplitude * REVERB_GAIN,
                    delay_scale: 2.0,
                    ..src
                });
            }
        }
    }
    out
}

/// Lower and upper bounds of `tx + rx` delay over the rectangle `fov`.
fn delay_bounds(fov: &PixelGrid, acq: &AcquisitionSpec) -> (f64, f64) {
    let c = acq.medium.speed_of_sound;
    let corners = [
        Pixel::new(fov.x_min, fov.z_min),
        Pixel::new(fov.x_max, fov.z_min),
        Pixel::new(fov.x_min, fov.z_max),
        Pixel::new(fov.x_max, fov.z_max),
    ];
    // Euclidean distance from an array point to the rectangle: nearest point
    // clamps x into range at the shallowest depth.
    let min_dist = |xa: f64| {
        let dx = xa - xa.clamp(fov.x_min, fov.x_max);
        (fov.z_min * fov.z_min + dx * dx).sqrt() / c
    };
    let max_dist = |xa: f64| {
        corners
            .iter()
            .map(|&p| rx_delay(p, xa, &acq.medium))
            .fold(f64::MIN, f64::max)
    };
    let geometry = &acq.geometry;
    let (tx_lo, tx_hi) = match &acq.scheme {
        TransmitScheme::Sta { elements } => elements.iter().fold((f64::MAX, f64::MIN), |a, &e| {
            let xe = geometry.element_x()[e];
            (a.0.min(min_dist(xe)), a.1.max(max_dist(xe)))
        }),
        TransmitScheme::Pw { .. } => {
            (0..acq.scheme.num_transmissions()).fold((f64::MAX, f64::MIN), |a, j| {
                corners.iter().fold(a, |a, &p| {
                    let d = acq.scheme.tx_delay(j, p, geometry, &acq.medium);
                    (a.0.min(d), a.1.max(d))
                })
            })
        }
    };
    let (rx_lo, rx_hi) = geometry
        .element_x()
        .iter()
        .fold((f64::MAX, f64::MIN), |a, &xe| {
            (a.0.min(min_dist(xe)), a.1.max(max_dist(xe)))
        });
    (tx_lo + rx_lo, tx_hi + rx_hi)
}

/// Sampled time window `(t0, n_t)` covering every echo from `fov`
/// (and their reverberation copies when `reverb`).
pub fn time_window(fov: &PixelGrid, acq: &AcquisitionSpec, reverb: bool) -> (f64, usize) {
    let fs = acq.pulse.sampling_frequency;
    let half = acq.pulse.half_duration();
    let (lo, hi) = delay_bounds(fov, acq);
    let hi = if reverb { 2.0 * hi } else { hi };
    let k0 = ((lo - half) * fs).floor();
    let t0 = k0 / fs;
    let n_t = ((hi + half) * fs).ceil() - k0 + 1.0;
    (t0, n_t as usize)
}

/// The smallest rectangle containing both `grid` and every scatterer of
/// `scene`, for simulating a whole scene while imaging only part of it.
pub fn covering_fov(scene: &Scene, acq: &AcquisitionSpec, grid: &PixelGrid) -> Result<PixelGrid> {
    let (mut x, mut z) = ((grid.x_min, grid.x_max), (grid.z_min, grid.z_max));
    if let Some((sx, sz)) = scene.extent(acq.wavelength() / 4.0) {
        x = (x.0.min(sx.0), x.1.max(sx.1));
        z = (z.0.min(sz.0), z.1.max(sz.1));
    }
    PixelGrid::new(x, z, 2, 2)
}

/// Synthesize the RF dataset `scene` would produce under `acq`, sampled
/// over a time window that covers every echo from the rectangle `fov`.
pub fn synth_rf(scene: &Scene, acq: &AcquisitionSpec, fov: &PixelGrid) -> Result<RfDataset> {
    scene.validate()?;
    acq.validate()?;
    fov.validate()?;
    let reverb = scene.multiple_reflections && scene.reverberant.is_some();
    let (t0, n_t) = time_window(fov, acq, reverb);
    let sources = collect_sources(scene, acq);

    let fs = acq.pulse.sampling_frequency;
    let half = acq.pulse.half_duration();
    let t_end = t0 + (n_t - 1) as f64 / fs;
    let geometry: &ArrayGeometry = &acq.geometry;

    // Every echo must land inside the window.
    for s in &sources {
        let p = Pixel::new(s.x, s.z);
        for j in 0..acq.scheme.num_transmissions() {
            let tx = acq.scheme.tx_delay(j, p, geometry, &acq.medium);
            for &xe in geometry.element_x() {
                let t = s.delay_scale * (tx + rx_delay(p, xe, &acq.medium));
                if t - half < t0 || t + half > t_end {
                    return Err(Error::Fov { x: s.x, z: s.z });
                }
            }
        }
    }

    let mut rf = RfDataset::zeros(acq.clone(), t0, n_t);
    rf.transmissions_mut()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .for_each(|(j, block)| {
            for s in &sources {
                let p = Pixel::new(s.x, s.z);
                let tx = acq.scheme.tx_delay(j, p, geometry, &acq.medium);
                let mirror = s.mirror.map(|(tilt, sigma)| {
                    (
                        acq.scheme.incidence_angle(j, p, geometry) - 2.0 * tilt,
                        sigma,
                    )
                });
                for (i, &xe) in geometry.element_x().iter().enumerate() {
                    let weight = match mirror {
                        None => 1.0,
                        Some((reflected, sigma)) => {
                            let d = element_angle(p, xe) - reflected;
                            (-(d * d) / (2.0 * sigma * sigma)).exp()
                        }
                    };
                    if weight < DIRECTIVITY_FLOOR {
                        continue;
                    }
                    let amp = s.amplitude * weight;
                    if amp == 0.0 {
                        continue;
                    }
                    let arrival = s.delay_scale * (tx + rx_delay(p, xe, &acq.medium));
                    let k_lo = ((arrival - half - t0) * fs).ceil().max(0.0) as usize;
                    let k_hi = (((arrival + half - t0) * fs).floor() as usize).min(n_t - 1);
                    let trace = &mut block[i * n_t..(i + 1) * n_t];
                    for (k, v) in trace.iter_mut().enumerate().take(k_hi + 1).skip(k_lo) {
                        let t = t0 + k as f64 / fs;
                        *v += amp * acq.pulse.waveform(t - arrival);
                    }
                }
            }
        });

    if scene.noise_amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.noise_seed);
        let normal = Normal::new(0.0, scene.noise_amplitude)
            .map_err(|e| Error::invalid("noise_amplitude", e.to_string()))?;
        rf.samples_mut()
            .iter_mut()
            .for_each(|v| *v += normal.sample(&mut rng));
    }
    Ok(rf)
}

/// Uniformly scattered diffuse points with Gaussian amplitudes.
pub fn speckle(
    x: (f64, f64),
    z: (f64, f64),
    density_per_mm2: f64,
    amplitude_sigma: f64,
    seed: u64,
) -> Vec<DiffusePoint> {
    let area_mm2 = (x.1 - x.0) * (z.1 - z.0) * 1e6;
    let count = (area_mm2 * density_per_mm2).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ux = Uniform::new_inclusive(x.0, x.1).expect("valid x range");
    let uz = Uniform::new_inclusive(z.0, z.1).expect("valid z range");
    let amp = Normal::new(0.0, amplitude_sigma).expect("valid sigma");
    (0..count)
        .map(|_| DiffusePoint {
            x: ux.sample(&mut rng),
            z: uz.sample(&mut rng),
            amplitude: amp.sample(&mut rng),
        })
        .collect()
}

/// Default mirror directivity width, radians.
pub fn default_directivity_sigma() -> f64 {
    2f64.to_radians()
}

/// The three built-in scenes: `wip` (tilted wire in gel), `bop` (bone
/// edges in water), `bap` (shallow bones, speckle and a deep interface).
pub fn preset_scenes() -> Vec<(&'static str, Scene)> {
    vec![("wip", wip()), ("bop", bop()), ("bap", bap())]
}

pub fn preset_scene(name: &str) -> Option<Scene> {
    preset_scenes()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
}

/// Field of view the presets are laid out in.
pub fn preset_fov() -> PixelGrid {
    PixelGrid {
        x_min: -12e-3,
        x_max: 12e-3,
        z_min: 3e-3,
        z_max: 30e-3,
        n_x: 2,
        n_z: 2,
    }
}

fn wip() -> Scene {
    let sigma = default_directivity_sigma();
    // Three joined segments with small bends, 10-15 deg tilt. A metal wire
    // reflects far more strongly than the surrounding speckle.
    let tilts = [10f64, 12.5, 15.0].map(f64::to_radians);
    let half = 2.0e-3;
    let mut x = -4.0e-3;
    let mut z = 14.0e-3;
    let mut specular = Vec::new();
    for tilt in tilts {
        let cx = x + half * tilt.cos();
        let cz = z + half * tilt.sin();
        specular.push(SpecularReflector {
            shape: ReflectorShape::Plate {
                x: cx,
                z: cz,
                half_length: half,
                tilt,
            },
            amplitude: 0.25,
            directivity_sigma: sigma,
        });
        x = cx + half * tilt.cos();
        z = cz + half * tilt.sin();
    }
    Scene {
        diffuse: speckle((-12e-3, 12e-3), (4e-3, 28e-3), 1.0, 0.1, 0x5eed_0001),
        specular,
        attenuation: 0.5,
        ..Scene::default()
    }
}

fn bop() -> Scene {
    let sigma = default_directivity_sigma();
    let arc = |x: f64, top: f64, radius: f64, extent_deg: f64| SpecularReflector {
        shape: ReflectorShape::Arc {
            x,
            z: top + radius,
            radius,
            start: -extent_deg.to_radians(),
            end: extent_deg.to_radians(),
        },
        amplitude: 0.05,
        directivity_sigma: sigma,
    };
    Scene {
        // Shallow small-radius edge and a deeper large-radius head, in water.
        specular: vec![arc(-4e-3, 5e-3, 2e-3, 60.0), arc(3e-3, 15e-3, 6e-3, 40.0)],
        ..Scene::default()
    }
}

fn bap() -> Scene {
    let sigma = default_directivity_sigma();
    let arc = |x: f64| SpecularReflector {
        shape: ReflectorShape::Arc {
            x,
            z: 4e-3 + 3e-3,
            radius: 3e-3,
            start: -50f64.to_radians(),
            end: 50f64.to_radians(),
        },
        amplitude: 0.04,
        directivity_sigma: sigma,
    };
    let interface = SpecularReflector {
        shape: ReflectorShape::Plate {
            x: 0.0,
            z: 14e-3,
            half_length: 9e-3,
            tilt: 0.0,
        },
        amplitude: 0.05,
        directivity_sigma: sigma,
    };
    Scene {
        diffuse: speckle((-12e-3, 12e-3), (3e-3, 13e-3), 1.0, 0.1, 0x5eed_0003),
        specular: vec![arc(-4.5e-3), arc(4.5e-3), interface],
        attenuation: 0.5,
        reverberant: Some(2),
        ..Scene::default()
    }
}
