//! Array geometry, pulse and medium description, transmit schemes, and the
//! geometric delay model shared by the simulator and every beamformer.
//!
//! Conventions: positions in meters, times in seconds, angles in radians.
//! The array lies on `z = 0` with elements centered on `x = 0`; depth grows
//! with `z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the imaging plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub x: f64,
    pub z: f64,
}

impl Pixel {
    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }
}

/// Uniform linear array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pitch: f64,
    element_x: Vec<f64>,
}

impl ArrayGeometry {
    /// `num_elements` elements at `pitch` spacing, centered on `x = 0`.
    pub fn linear(num_elements: usize, pitch: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::invalid("num_elements", "must be at least 1"));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::invalid(
                "pitch",
                format!("must be positive, got {pitch}"),
            ));
        }
        let offset = (num_elements as f64 - 1.0) / 2.0;
        let element_x = (0..num_elements)
            .map(|i| (i as f64 - offset) * pitch)
            .collect();
        Ok(Self { pitch, element_x })
    }

    pub fn num_elements(&self) -> usize {
        self.element_x.len()
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn element_x(&self) -> &[f64] {
        &self.element_x
    }

    /// Total array width `L = N_c * pitch`.
    pub fn aperture_width(&self) -> f64 {
        self.num_elements() as f64 * self.pitch
    }
}

/// Transmit pulse and digitizer parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub center_frequency: f64,
    pub sampling_frequency: f64,
    pub num_cycles: f64,
}

impl PulseSpec {
    pub fn new(center_frequency: f64, sampling_frequency: f64, num_cycles: f64) -> Result<Self> {
        let pulse = Self {
            center_frequency,
            sampling_frequency,
            num_cycles,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center_frequency > 0.0 && self.center_frequency.is_finite()) {
            return Err(Error::invalid("center_frequency", "must be positive"));
        }
        if !(self.sampling_frequency > 2.0 * self.center_frequency) {
            return Err(Error::invalid(
                "sampling_frequency",
                format!(
                    "{} Hz does not exceed twice the center frequency {} Hz",
                    self.sampling_frequency, self.center_frequency
                ),
            ));
        }
        if !(self.num_cycles > 0.0 && self.num_cycles.is_finite()) {
            return Err(Error::invalid("num_cycles", "must be positive"));
        }
        Ok(())
    }

    pub fn wavelength(&self, medium: &MediumSpec) -> f64 {
        medium.speed_of_sound / self.center_frequency
    }

    /// Standard deviation of the Gaussian envelope, chosen so that the
    /// envelope's full width at half maximum spans `num_cycles` periods.
    pub fn envelope_sigma(&self) -> f64 {
        let fwhm = self.num_cycles / self.center_frequency;
        fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
    }

    /// Half-length of the truncated pulse support, in seconds.
    pub fn half_duration(&self) -> f64 {
        4.0 * self.envelope_sigma()
    }

    /// Gaussian-windowed cosine centered on `t = 0`; zero outside the support.
    pub fn waveform(&self, t: f64) -> f64 {
        if t.abs() > self.half_duration() {
            return 0.0;
        }
        let sigma = self.envelope_sigma();
        (-(t * t) / (2.0 * sigma * sigma)).exp()
            * (2.0 * std::f64::consts::PI * self.center_frequency * t).cos()
    }

    /// The pulse sampled at `fs`, centered: index `len / 2` is `t = 0`.
    pub fn sampled(&self) -> Vec<f64> {
        let half = (self.half_duration() * self.sampling_frequency).ceil() as isize;
        (-half..=half)
            .map(|k| self.waveform(k as f64 / self.sampling_frequency))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub speed_of_sound: f64,
}

impl MediumSpec {
    pub fn new(speed_of_sound: f64) -> Result<Self> {
        if !(speed_of_sound > 0.0 && speed_of_sound.is_finite()) {
            return Err(Error::invalid("speed_of_sound", "must be positive"));
        }
        Ok(Self { speed_of_sound })
    }
}

/// How the medium is insonified.
#[derive(Debug, Clone, PartialEq)]
pub enum TransmitScheme {
    /// One single-element transmission per listed (zero-based) element.
    Sta { elements: Vec<usize> },
    /// Full-aperture plane waves at the listed steering angles.
    Pw { angles: Vec<f64> },
}

impl TransmitScheme {
    /// STA over every element of the array.
    pub fn sta_full(geometry: &ArrayGeometry) -> Self {
        TransmitScheme::Sta {
            elements: (0..geometry.num_elements()).collect(),
        }
    }

    /// The practical plane-wave set: -18 deg to +18 deg in 0.5 deg steps (73 angles).
    pub fn pw_preset() -> Self {
        let angles = (0..73)
            .map(|k| (-18.0 + 0.5 * k as f64).to_radians())
            .collect();
        TransmitScheme::Pw { angles }
    }

    pub fn num_transmissions(&self) -> usize {
        match self {
            TransmitScheme::Sta { elements } => elements.len(),
            TransmitScheme::Pw { angles } => angles.len(),
        }
    }

    pub fn is_sta(&self) -> bool {
        matches!(self, TransmitScheme::Sta { .. })
    }

    pub fn validate(&self, geometry: &ArrayGeometry) -> Result<()> {
        match self {
            TransmitScheme::Sta { elements } => {
                if elements.is_empty() {
                    return Err(Error::invalid("scheme", "STA needs at least one element"));
                }
                let mut seen = vec![false; geometry.num_elements()];
                for &e in elements {
                    if e >= geometry.num_elements() {
                        return Err(Error::invalid(
                            "scheme",
                            format!("transmit element {e} outside array"),
                        ));
                    }
                    if std::mem::replace(&mut seen[e], true) {
                        return Err(Error::invalid(
                            "scheme",
                            format!("transmit element {e} listed twice"),
                        ));
                    }
                }
            }
            TransmitScheme::Pw { angles } => {
                if angles.is_empty() {
                    return Err(Error::invalid("scheme", "PW needs at least one angle"));
                }
                if angles
                    .iter()
                    .any(|a| !(a.abs() < std::f64::consts::FRAC_PI_2))
                {
                    return Err(Error::invalid(
                        "scheme",
                        "PW angles must satisfy |a| < pi/2",
                    ));
                }
                if angles.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid(
                        "scheme",
                        "PW angles must be strictly increasing",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Transmit delay of transmission `j` to `pixel`.
    pub fn tx_delay(
        &self,
        j: usize,
        pixel: Pixel,
        geometry: &ArrayGeometry,
        medium: &MediumSpec,
    ) -> f64 {
        match self {
            TransmitScheme::Sta { elements } => {
                sta_tx_delay(pixel, geometry.element_x()[elements[j]], medium)
            }
            TransmitScheme::Pw { angles } => pw_tx_delay(pixel, angles[j], medium),
        }
    }

    /// Angle of incidence of transmission `j` at `pixel`, in the convention
    /// used by the mirror law `a_r = a_inc - 2 a_g`.
    ///
    /// Angles are measured from the depth axis. For STA this is the angle of
    /// the transmitting element seen from the pixel, `atan((x_j - x_p)/z_p)`.
    /// A plane wave steered by `a` arrives from the side of `-a`, so its
    /// incidence angle is `-a`. The matching receive angle of element `i` is
    /// [`element_angle`], `atan((x_p - x_i)/z_p)`, and reflector tilt is the
    /// slope angle `atan(dz/dx)` of the surface.
    pub fn incidence_angle(&self, j: usize, pixel: Pixel, geometry: &ArrayGeometry) -> f64 {
        match self {
            TransmitScheme::Sta { elements } => {
                ((geometry.element_x()[elements[j]] - pixel.x) / pixel.z).atan()
            }
            TransmitScheme::Pw { angles } => -angles[j],
        }
    }

    /// Per-transmission label for CSV output: steering angle in degrees for
    /// PW, transmitting element index for STA.
    pub fn label(&self, j: usize) -> f64 {
        match self {
            TransmitScheme::Sta { elements } => elements[j] as f64,
            TransmitScheme::Pw { angles } => display_degrees(angles[j]),
        }
    }
}

/// Radians to degrees, rounded to 1e-9 deg so that labels of configured
/// angles print as configured.
pub fn display_degrees(rad: f64) -> f64 {
    (rad.to_degrees() * 1e9).round() / 1e9
}

/// Receive angle of an element (or sub-aperture center) at `x` seen from
/// `pixel`: `atan((x_p - x)/z_p)`.
pub fn element_angle(pixel: Pixel, x: f64) -> f64 {
    ((pixel.x - x) / pixel.z).atan()
}

/// Everything needed to interpret an RF acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionSpec {
    pub geometry: ArrayGeometry,
    pub pulse: PulseSpec,
    pub medium: MediumSpec,
    pub scheme: TransmitScheme,
}

impl AcquisitionSpec {
    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        MediumSpec::new(self.medium.speed_of_sound)?;
        self.scheme.validate(&self.geometry)
    }

    pub fn wavelength(&self) -> f64 {
        self.pulse.wavelength(&self.medium)
    }

    /// 128 elements, 0.3 mm pitch, 7.6 MHz, 31.25 MHz sampling, 1540 m/s.
    pub fn reference(scheme: Option<TransmitScheme>) -> Self {
        let geometry = ArrayGeometry::linear(128, 0.3e-3).expect("static geometry");
        let scheme = scheme.unwrap_or_else(TransmitScheme::pw_preset);
        Self {
            geometry,
            pulse: PulseSpec {
                center_frequency: 7.6e6,
                sampling_frequency: 31.25e6,
                num_cycles: 2.5,
            },
            medium: MediumSpec {
                speed_of_sound: 1540.0,
            },
            scheme,
        }
    }
}

/// Rectangular imaging grid with uniform spacing per axis.
///
/// Pixels are stored column-major: index `ix * n_z + iz`, so each column is
/// one depth beamline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub n_x: usize,
    pub n_z: usize,
}

impl PixelGrid {
    pub fn new(x: (f64, f64), z: (f64, f64), n_x: usize, n_z: usize) -> Result<Self> {
        let grid = Self {
            x_min: x.0,
            x_max: x.1,
            z_min: z.0,
            z_max: z.1,
            n_x,
            n_z,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_x == 0 || self.n_z == 0 {
            return Err(Error::invalid("grid", "pixel counts must be positive"));
        }
        if !(self.z_min > 0.0) {
            return Err(Error::invalid("grid", "z_min must be positive"));
        }
        if self.x_max < self.x_min || self.z_max < self.z_min {
            return Err(Error::invalid("grid", "extent max below min"));
        }
        if (self.n_x > 1 && self.x_max == self.x_min) || (self.n_z > 1 && self.z_max == self.z_min)
        {
            return Err(Error::invalid(
                "grid",
                "zero extent with more than one pixel",
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        if self.n_x > 1 {
            (self.x_max - self.x_min) / (self.n_x - 1) as f64
        } else {
            0.0
        }
    }

    pub fn dz(&self) -> f64 {
        if self.n_z > 1 {
            (self.z_max - self.z_min) / (self.n_z - 1) as f64
        } else {
            0.0
        }
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.dx()
    }

    pub fn z(&self, iz: usize) -> f64 {
        self.z_min + iz as f64 * self.dz()
    }

    pub fn pixel(&self, ix: usize, iz: usize) -> Pixel {
        Pixel::new(self.x(ix), self.z(iz))
    }

    pub fn index(&self, ix: usize, iz: usize) -> usize {
        ix * self.n_z + iz
    }

    pub fn column(&self, ix: usize) -> Vec<Pixel> {
        (0..self.n_z).map(|iz| self.pixel(ix, iz)).collect()
    }

    pub fn pixels(&self) -> Vec<Pixel> {
        (0..self.n_x).flat_map(|ix| self.column(ix)).collect()
    }

    /// Nearest grid indices to a physical position, clamped to the grid.
    pub fn nearest(&self, x: f64, z: f64) -> (usize, usize) {
        let snap = |v: f64, lo: f64, step: f64, n: usize| {
            if n <= 1 || step == 0.0 {
                0
            } else {
                (((v - lo) / step).round().max(0.0) as usize).min(n - 1)
            }
        };
        (
            snap(x, self.x_min, self.dx(), self.n_x),
            snap(z, self.z_min, self.dz(), self.n_z),
        )
    }
}

/// Plane-wave angle set `asin(m * lambda / L)` for `m = -N_c/2 .. N_c/2 - 1`.
pub fn pw_angle_set(
    geometry: &ArrayGeometry,
    pulse: &PulseSpec,
    medium: &MediumSpec,
) -> Result<Vec<f64>> {
    let ratio = pulse.wavelength(medium) / geometry.aperture_width();
    let n = geometry.num_elements() as i64;
    let lo = -(n / 2);
    let hi = n - n / 2 - 1;
    (lo..=hi)
        .map(|m| {
            let s = m as f64 * ratio;
            if s.abs() > 1.0 {
                Err(Error::Domain(format!(
                    "m = {m} gives sin(angle) = {s}, outside [-1, 1]"
                )))
            } else {
                Ok(s.asin())
            }
        })
        .collect()
}

/// Spherical-wave transmit delay from the element at `tx_center`.
pub fn sta_tx_delay(pixel: Pixel, tx_center: f64, medium: &MediumSpec) -> f64 {
    let dx = pixel.x - tx_center;
    (pixel.z * pixel.z + dx * dx).sqrt() / medium.speed_of_sound
}

/// Plane-wave transmit delay for steering angle `angle`.
pub fn pw_tx_delay(pixel: Pixel, angle: f64, medium: &MediumSpec) -> f64 {
    (pixel.z * angle.cos() + pixel.x * angle.sin()) / medium.speed_of_sound
}

/// Receive delay from `pixel` back to the element at `element_x`.
pub fn rx_delay(pixel: Pixel, element_x: f64, medium: &MediumSpec) -> f64 {
    let dx = pixel.x - element_x;
    (pixel.z * pixel.z + dx * dx).sqrt() / medium.speed_of_sound
}

pub fn total_delay(tx_delay: f64, rx_delay: f64) -> f64 {
    tx_delay + rx_delay
}

/// Default delay-table memory cap (1 GiB).
pub const DEFAULT_TABLE_CAP: usize = 1 << 30;

/// Precomputed transmit and receive delays for a pixel list.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTable {
    n_pixels: usize,
    n_tx: usize,
    n_ch: usize,
    tx: Vec<f64>,
    rx: Vec<f64>,
}

impl DelayTable {
    pub fn for_pixels(
        pixels: &[Pixel],
        scheme: &TransmitScheme,
        geometry: &ArrayGeometry,
        medium: &MediumSpec,
        cap_bytes: usize,
    ) -> Result<Self> {
        let n_tx = scheme.num_transmissions();
        let n_ch = geometry.num_elements();
        let required = pixels
            .len()
            .saturating_mul(n_tx + n_ch)
            .saturating_mul(std::mem::size_of::<f64>());
        if required > cap_bytes {
            return Err(Error::MemoryBudget {
                required,
                cap: cap_bytes,
            });
        }
        let mut tx = Vec::with_capacity(pixels.len() * n_tx);
        let mut rx = Vec::with_capacity(pixels.len() * n_ch);
        for &p in pixels {
            tx.extend((0..n_tx).map(|j| scheme.tx_delay(j, p, geometry, medium)));
            rx.extend(
                geometry
                    .element_x()
                    .iter()
                    .map(|&xi| rx_delay(p, xi, medium)),
            );
        }
        Ok(Self {
            n_pixels: pixels.len(),
            n_tx,
            n_ch,
            tx,
            rx,
        })
    }

    pub fn n_pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_ch(&self) -> usize {
        self.n_ch
    }

    pub fn tx(&self, pixel: usize) -> &[f64] {
        &self.tx[pixel * self.n_tx..(pixel + 1) * self.n_tx]
    }

    pub fn rx(&self, pixel: usize) -> &[f64] {
        &self.rx[pixel * self.n_ch..(pixel + 1) * self.n_ch]
    }

    pub fn total(&self, pixel: usize, element: usize, tx: usize) -> f64 {
        total_delay(self.tx(pixel)[tx], self.rx(pixel)[element])
    }
}

/// Delay table over every pixel of `grid`, in the grid's storage order.
pub fn build_delay_table(
    grid: &PixelGrid,
    scheme: &TransmitScheme,
    geometry: &ArrayGeometry,
    medium: &MediumSpec,
    cap_bytes: usize,
) -> Result<DelayTable> {
    grid.validate()?;
    scheme.validate(geometry)?;
    DelayTable::for_pixels(&grid.pixels(), scheme, geometry, medium, cap_bytes)
}
