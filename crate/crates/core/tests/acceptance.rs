//! End-to-end acceptance checks. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fail.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reflectscope_core::acquisition::{
    pw_tx_delay, rx_delay, sta_tx_delay, AcquisitionSpec, ArrayGeometry, DelayTable, Pixel,
    PixelGrid, TransmitScheme, DEFAULT_TABLE_CAP,
};
use reflectscope_core::analysis::{
    directivity_variance, dv_at, extract_contours, DvConfig, Levels, PixelChannelTxMap,
};
use reflectscope_core::beamform::{
    beamform_raw, delay_compensate, fdmas, fdmas_beamline, mvdr, sb, solve_mvdr_weights,
    Beamformer, FdmasConfig, MvdrConfig, SbConfig,
};
use reflectscope_core::compounding::{beamform_image, beamsum_profile, profile_correlation};
use reflectscope_core::dsp::power_spectrum;
use reflectscope_core::io::{beamsum_csv, encode_pgm, raw_grid_csv};
use reflectscope_core::scene::{
    default_directivity_sigma, speckle, synth_rf, DiffusePoint, ReflectorShape, Scene,
    SpecularReflector,
};
use reflectscope_core::{BeamformedImage, RfDataset};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn acquisition(n: usize, scheme: Option<TransmitScheme>) -> AcquisitionSpec {
    let geometry = ArrayGeometry::linear(n, 0.3e-3).unwrap();
    let scheme = scheme.unwrap_or_else(|| TransmitScheme::sta_full(&geometry));
    AcquisitionSpec {
        geometry,
        scheme,
        ..AcquisitionSpec::reference(None)
    }
}

fn point(x: f64, z: f64) -> DiffusePoint {
    DiffusePoint {
        x,
        z,
        amplitude: 1.0,
    }
}

fn plate(x: f64, z: f64, half_length: f64, tilt_deg: f64) -> SpecularReflector {
    SpecularReflector {
        shape: ReflectorShape::Plate {
            x,
            z,
            half_length,
            tilt: tilt_deg.to_radians(),
        },
        amplitude: 0.05,
        directivity_sigma: default_directivity_sigma(),
    }
}

fn fov(x: f64, z: (f64, f64)) -> PixelGrid {
    PixelGrid::new((-x, x), z, 2, 2).unwrap()
}

// -- 1 -----------------------------------------------------------------------

fn delay_oracles() -> Outcome {
    let start = Instant::now();
    let acq = AcquisitionSpec::reference(None);
    let c = acq.medium.speed_of_sound;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let geometry = &acq.geometry;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = Pixel::new(
            rng.random_range(-20e-3..20e-3),
            rng.random_range(1e-3..60e-3),
        );
        let i = rng.random_range(0..geometry.num_elements());
        let j = rng.random_range(0..geometry.num_elements());
        let angle: f64 = rng.random_range(-30f64..30.0).to_radians();
        let xi = -(geometry.num_elements() as f64 - 1.0) / 2.0 * 0.3e-3 + i as f64 * 0.3e-3;
        let xj = -(geometry.num_elements() as f64 - 1.0) / 2.0 * 0.3e-3 + j as f64 * 0.3e-3;

        let oracle_sta = ((p.z * p.z) + (p.x - xj) * (p.x - xj)).sqrt() / c;
        let oracle_pw = (p.z * angle.cos() + p.x * angle.sin()) / c;
        let oracle_rx = ((p.z * p.z) + (p.x - xi) * (p.x - xi)).sqrt() / c;

        let sta = TransmitScheme::Sta { elements: vec![j] };
        let pw = TransmitScheme::Pw {
            angles: vec![angle],
        };
        let t_sta =
            DelayTable::for_pixels(&[p], &sta, geometry, &acq.medium, DEFAULT_TABLE_CAP).unwrap();
        let t_pw =
            DelayTable::for_pixels(&[p], &pw, geometry, &acq.medium, DEFAULT_TABLE_CAP).unwrap();

        for (got, want) in [
            (
                sta_tx_delay(p, geometry.element_x()[j], &acq.medium),
                oracle_sta,
            ),
            (pw_tx_delay(p, angle, &acq.medium), oracle_pw),
            (rx_delay(p, geometry.element_x()[i], &acq.medium), oracle_rx),
            (t_sta.total(0, i, 0), oracle_sta + oracle_rx),
            (t_pw.total(0, i, 0), oracle_pw + oracle_rx),
        ] {
            worst = worst.max((got - want).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-15 && secs < 1.0,
        format!("max |error| {worst:.2e} s over 1000 triples in {secs:.3} s"),
    )
}

// -- 2 -----------------------------------------------------------------------

fn point_localization() -> Outcome {
    let truth = Pixel::new(0.0, 20e-3);
    let scene = Scene {
        diffuse: vec![point(truth.x, truth.z)],
        ..Scene::default()
    };
    let grid = PixelGrid::new((-3e-3, 3e-3), (18.5e-3, 21.5e-3), 128, 128).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for (name, scheme) in [("STA", None), ("PW", Some(TransmitScheme::pw_preset()))] {
        let start = Instant::now();
        let acq = acquisition(64, scheme);
        let lambda = acq.wavelength();
        let rf = synth_rf(&scene, &acq, &grid).unwrap();
        let image = beamform_image(&rf, &grid, &Beamformer::das_default(), None).unwrap();
        let (ix, iz) = image.peak();
        let p = grid.pixel(ix, iz);
        let err = ((p.x - truth.x).powi(2) + (p.z - truth.z).powi(2)).sqrt();
        let secs = start.elapsed().as_secs_f64();
        ok &= err <= lambda / 2.0 && secs < 30.0;
        details.push(format!(
            "{name}: error {:.1} um (lambda/2 = {:.1} um), {secs:.1} s",
            err * 1e6,
            lambda * 5e5
        ));
    }
    check(ok, details.join("; "))
}

// -- 3 -----------------------------------------------------------------------

/// Full width at -6 dB of the lateral profile through the peak nearest `x0`.
fn lateral_width(image: &BeamformedImage, x0: f64) -> f64 {
    let grid = image.grid();
    let profile: Vec<f64> = (0..grid.n_x)
        .map(|ix| {
            (0..grid.n_z)
                .map(|iz| image.envelope_at(ix, iz))
                .fold(0.0, f64::max)
        })
        .collect();
    let (ic, _) = grid.nearest(x0, grid.z_min);
    // Local peak around the nominal position.
    let lo = ic.saturating_sub(4);
    let hi = (ic + 4).min(grid.n_x - 1);
    let ip = (lo..=hi)
        .max_by(|&a, &b| profile[a].total_cmp(&profile[b]))
        .unwrap();
    let half = profile[ip] / 2.0;
    let crossing = |step: isize| -> f64 {
        let mut k = ip as isize;
        loop {
            let next = k + step;
            if next < 0 || next >= grid.n_x as isize {
                return grid.x(k as usize);
            }
            let (a, b) = (profile[k as usize], profile[next as usize]);
            if b < half {
                let t = (a - half) / (a - b);
                return grid.x(k as usize) + step as f64 * t * grid.dx();
            }
            k = next;
        }
    };
    crossing(1) - crossing(-1)
}

fn mvdr_contract() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;

    // Identity covariance.
    for l in [16usize, 32] {
        let w = solve_mvdr_weights(&nalgebra::DMatrix::identity(l, l), 1.0 / (100.0 * l as f64))
            .unwrap();
        let exact = w.iter().all(|&v| v == 1.0 / l as f64);
        ok &= exact;
        details.push(format!("identity L={l} exact 1/L: {exact}"));
    }

    let angles: Vec<f64> = (-5..=5).map(|k| (2.0 * k as f64).to_radians()).collect();
    let acq = acquisition(128, Some(TransmitScheme::Pw { angles }));
    let scene = Scene {
        diffuse: vec![point(-1e-3, 20e-3), point(1e-3, 20e-3)],
        ..Scene::default()
    };
    let grid = PixelGrid::new((-2.5e-3, 2.5e-3), (19.6e-3, 20.4e-3), 101, 48).unwrap();
    let rf = synth_rf(&scene, &acq, &grid).unwrap();
    let cfg = MvdrConfig {
        subarray_length: Some(32),
        diagonal_loading: None,
    };

    // Distortionless constraint on every solve in the grid.
    let pixels = grid.pixels();
    let table = DelayTable::for_pixels(
        &pixels,
        &acq.scheme,
        &acq.geometry,
        &acq.medium,
        DEFAULT_TABLE_CAP,
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    let mut solves = 0usize;
    for (k, _) in pixels.iter().enumerate().step_by(7) {
        for j in 0..rf.n_tx() {
            let snap = delay_compensate(&rf, k, j, &table);
            if let Ok(out) = mvdr(&snap.0, &cfg) {
                worst = worst.max((out.weights.iter().sum::<f64>() - 1.0).abs());
                solves += 1;
            }
        }
    }
    ok &= worst <= 1e-9;
    details.push(format!("max |w^T a - 1| {worst:.1e} over {solves} solves"));

    let das = beamform_image(&rf, &grid, &Beamformer::das_default(), None).unwrap();
    let mv = beamform_image(&rf, &grid, &Beamformer::Mvdr(cfg), None).unwrap();
    for x0 in [-1e-3, 1e-3] {
        let (wd, wm) = (lateral_width(&das, x0), lateral_width(&mv, x0));
        ok &= wm <= wd;
        details.push(format!(
            "-6 dB width at x={:+.0} mm: MVDR {:.0} um, DAS {:.0} um",
            x0 * 1e3,
            wm * 1e6,
            wd * 1e6
        ));
    }
    check(ok, details.join("; "))
}

// -- 4 -----------------------------------------------------------------------

fn fdmas_algebra_and_spectrum() -> Outcome {
    let cases = [
        (fdmas(&[4.0; 4]), 24.0),
        (fdmas(&[-4.0; 4]), 24.0),
        (fdmas(&[1.0, -1.0, 1.0, -1.0]), -2.0),
    ];
    let exact = cases.iter().all(|(got, want)| got == want);

    let acq = acquisition(64, None);
    let scene = Scene {
        diffuse: vec![point(0.0, 20e-3)],
        ..Scene::default()
    };
    let rf = synth_rf(&scene, &acq, &fov(5e-3, (15e-3, 25e-3))).unwrap();
    let line = fdmas_beamline(&rf, &FdmasConfig::default(), 0.0, 15e-3, 25e-3).unwrap();
    let f0 = acq.pulse.center_frequency;
    let spectrum = power_spectrum(&line.filtered, line.sampling_rate);
    let total: f64 = spectrum.iter().map(|(_, p)| p).sum();
    let band: f64 = spectrum
        .iter()
        .filter(|(f, _)| (1.5 * f0..=2.5 * f0).contains(f))
        .map(|(_, p)| p)
        .sum();
    let fraction = band / total;
    check(
        exact && fraction >= 0.8,
        format!(
            "hand cases exact: {exact}; in-band energy {:.1}%",
            100.0 * fraction
        ),
    )
}

// -- 5 -----------------------------------------------------------------------

fn sb_tilt_recovery() -> Outcome {
    let acq = acquisition(128, Some(TransmitScheme::pw_preset()));
    let cfg = SbConfig::default();
    let step = 0.5f64.to_radians();
    let mut ok = true;
    let mut details = Vec::new();
    for tilt in [-10.0, 0.0, 10.0, 15.0] {
        let center = Pixel::new(0.0, 20e-3);
        let scene = Scene {
            specular: vec![plate(center.x, center.z, 3e-3, tilt)],
            ..Scene::default()
        };
        let rf = synth_rf(&scene, &acq, &fov(5e-3, (15e-3, 25e-3))).unwrap();
        let table = DelayTable::for_pixels(
            &[center],
            &acq.scheme,
            &acq.geometry,
            &acq.medium,
            DEFAULT_TABLE_CAP,
        )
        .unwrap();
        let out = sb(&rf, center, 0, &cfg, &table).unwrap();
        let err = (out.tilt - f64::to_radians(tilt)).abs();
        ok &= err <= step + 1e-12;
        details.push(format!("{tilt:+}° -> {:+.1}°", out.tilt.to_degrees()));
    }
    check(ok, details.join(", "))
}

// -- 6 / 7 -------------------------------------------------------------------

struct DvScene {
    plate_pixel: Pixel,
    plate_rf: RfDataset,
    speckle_rf: RfDataset,
    grid: PixelGrid,
}

fn dv_scene(scheme: Option<TransmitScheme>) -> DvScene {
    let acq = acquisition(128, scheme);
    let plate_pixel = Pixel::new(-4e-3, 20e-3);
    let field = fov(10e-3, (14e-3, 26e-3));
    let plate_scene = Scene {
        specular: vec![plate(plate_pixel.x, plate_pixel.z, 3e-3, 10.0)],
        ..Scene::default()
    };
    let speckle_scene = Scene {
        diffuse: speckle((2e-3, 8e-3), (17e-3, 23e-3), 20.0, 1.0, 7),
        ..Scene::default()
    };
    DvScene {
        plate_pixel,
        plate_rf: synth_rf(&plate_scene, &acq, &field).unwrap(),
        speckle_rf: synth_rf(&speckle_scene, &acq, &field).unwrap(),
        grid: PixelGrid::new((3e-3, 7e-3), (18e-3, 22e-3), 41, 160).unwrap(),
    }
}

fn envelope_at(rf: &RfDataset, p: Pixel) -> f64 {
    let grid = PixelGrid::new((p.x, p.x), (p.z - 0.5e-3, p.z + 0.5e-3), 1, 81).unwrap();
    let image = beamform_image(rf, &grid, &Beamformer::das_default(), None).unwrap();
    image.envelope_at(0, 40)
}

fn dv_separation() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    let cfg = DvConfig::default();
    for (name, scheme) in [("STA", None), ("PW", Some(TransmitScheme::pw_preset()))] {
        let s = dv_scene(scheme);
        let i_plate = envelope_at(&s.plate_rf, s.plate_pixel);
        let specular = dv_at(&s.plate_rf, s.plate_pixel, &cfg, i_plate).unwrap();

        // Compare against the brightest speckle grain, scaled to the plate's
        // brightness: both pixels are then envelope peaks of equal intensity.
        let image =
            beamform_image(&s.speckle_rf, &s.grid, &Beamformer::das_default(), None).unwrap();
        let (ix, iz) = image.peak();
        let k = i_plate / image.envelope_at(ix, iz);
        let scaled = s.speckle_rf.scaled(k);
        let p = s.grid.pixel(ix, iz);
        let i_speckle = k * image.envelope_at(ix, iz);
        let diffuse = dv_at(&scaled, p, &cfg, i_speckle).unwrap();
        let ratio = specular.phi_v / diffuse.phi_v;
        ok &= ratio >= 100.0;
        details.push(format!(
            "{name}: phi_v ratio {ratio:.0} (intensities {i_plate:.3e} / {i_speckle:.3e})"
        ));
    }
    let (phi, m, v, _) = directivity_variance(&vec![0.7; 4 * 73], 4, 73);
    let zero = phi.iter().all(|&p| p == 0.0) && m == 0.0 && v == 0.0;
    ok &= zero;
    details.push(format!("diffuse limit zero: {zero}"));
    check(ok, details.join("; "))
}

fn dv_tilt() -> Outcome {
    let acq = acquisition(128, Some(TransmitScheme::pw_preset()));
    let cfg = DvConfig::default();
    let pixel = Pixel::new(-4e-3, 20e-3);
    let scene = Scene {
        specular: vec![plate(pixel.x, pixel.z, 3e-3, 10.0)],
        ..Scene::default()
    };
    let field = fov(10e-3, (14e-3, 26e-3));
    let rf = synth_rf(&scene, &acq, &field).unwrap();
    let mirrored_rf = synth_rf(&scene.mirrored(), &acq, &field).unwrap();
    let eta = dv_at(&rf, pixel, &cfg, 1.0).unwrap().eta.unwrap();
    let eta_m = dv_at(&mirrored_rf, Pixel::new(-pixel.x, pixel.z), &cfg, 1.0)
        .unwrap()
        .eta
        .unwrap();
    // Angular width of one sub-aperture seen from the pixel.
    let centers = cfg.centers(&acq.geometry).unwrap();
    let half_block = 0.5 * cfg.block_len(&acq.geometry).unwrap() as f64 * acq.geometry.pitch();
    let width = centers
        .iter()
        .map(|&c| {
            ((pixel.x - c + half_block) / pixel.z).atan()
                - ((pixel.x - c - half_block) / pixel.z).atan()
        })
        .fold(f64::INFINITY, f64::min);
    let tol = width.max(0.5f64.to_radians());
    let err = (eta - 20f64.to_radians()).abs();
    check(
        err <= tol && (eta + eta_m).abs() <= 1e-9,
        format!(
            "eta {:.2}° (tolerance {:.2}°), mirrored {:.2}°",
            eta.to_degrees(),
            tol.to_degrees(),
            eta_m.to_degrees()
        ),
    )
}

// -- 8 -----------------------------------------------------------------------

fn contour_oracle() -> Outcome {
    let n = 64;
    let (ci, cj) = (30.3, 33.7);
    let values: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i as f64 - ci).powi(2) + (j as f64 - cj).powi(2)))
        .collect();
    let map = PixelChannelTxMap::from_values(n, n, values).unwrap();
    let mut worst: f64 = 0.0;
    let mut single = true;
    for r in [3.2, 10.0, 21.7] {
        let set = extract_contours(&map, &Levels::Explicit(vec![r * r])).unwrap();
        single &= set.contours.len() == 1 && set.contours[0].polylines.len() == 1;
        for line in set.contours.iter().flat_map(|c| &c.polylines) {
            single &= line.first() == line.last();
            for &(i, j) in line {
                worst = worst.max((((i - ci).powi(2) + (j - cj).powi(2)).sqrt() - r).abs());
            }
        }
    }
    let constant = PixelChannelTxMap::from_values(8, 8, vec![2.0; 64]).unwrap();
    let empty = extract_contours(&constant, &Levels::Auto)
        .unwrap()
        .is_empty();
    check(
        worst <= 1.0 && single && empty,
        format!("max radial error {worst:.3} cells, single closed lines: {single}, constant field empty: {empty}"),
    )
}

// -- 9 -----------------------------------------------------------------------

fn linearity_and_determinism() -> Outcome {
    let acq = acquisition(64, Some(TransmitScheme::pw_preset()));
    let field = fov(6e-3, (10e-3, 25e-3));
    let a = Scene {
        diffuse: vec![point(1e-3, 18e-3), point(-2e-3, 12e-3)],
        ..Scene::default()
    };
    let b = Scene {
        specular: vec![plate(0.0, 20e-3, 2e-3, 10.0)],
        diffuse: speckle((-4e-3, 4e-3), (14e-3, 16e-3), 2.0, 0.1, 3),
        ..Scene::default()
    };
    let grid = PixelGrid::new((-5e-3, 5e-3), (11e-3, 24e-3), 48, 256).unwrap();
    let bf = Beamformer::das_default();
    let raw = |s: &Scene| beamform_raw(&synth_rf(s, &acq, &field).unwrap(), &grid, &bf).unwrap();
    let (ra, rb, rab) = (raw(&a), raw(&b), raw(&a.union(&b)));
    let scale = rab.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = rab
        .values
        .iter()
        .zip(ra.values.iter().zip(&rb.values))
        .map(|(ab, (x, y))| (ab - (x + y)).abs())
        .fold(0.0, f64::max)
        / scale;

    let run = || {
        let rf = synth_rf(&a.union(&b), &acq, &field).unwrap();
        let image = beamform_image(&rf, &grid, &bf, None).unwrap();
        let profile = beamsum_profile(&rf, Pixel::new(1e-3, 18e-3), &bf).unwrap();
        (
            encode_pgm(&image),
            raw_grid_csv(&image),
            beamsum_csv(&[profile]),
        )
    };
    let identical = run() == run();
    check(
        worst <= 1e-9 && identical,
        format!("max relative deviation {worst:.1e}; repeated outputs byte-identical: {identical}"),
    )
}

// -- 10 ----------------------------------------------------------------------

fn beamsum_profiles() -> Outcome {
    let mvdr_bf = Beamformer::Mvdr(MvdrConfig::default());
    let das = Beamformer::das_default();
    let dmas = Beamformer::Fdmas(FdmasConfig::default());

    let acq = acquisition(64, None);
    let p = Pixel::new(0.0, 20e-3);
    let scene = Scene {
        diffuse: vec![point(p.x, p.z)],
        ..Scene::default()
    };
    let rf = synth_rf(&scene, &acq, &fov(5e-3, (15e-3, 25e-3))).unwrap();
    let profiles: Vec<Vec<f64>> = [&das, &dmas, &mvdr_bf]
        .iter()
        .map(|bf| beamsum_profile(&rf, p, bf).unwrap().values)
        .collect();
    let pairs =
        [(0, 1), (0, 2), (1, 2)].map(|(a, b)| profile_correlation(&profiles[a], &profiles[b]));
    let diffuse_das_dmas = pairs[0];

    let acq = acquisition(64, Some(TransmitScheme::pw_preset()));
    let scene = Scene {
        specular: vec![plate(p.x, p.z, 3e-3, 10.0)],
        ..Scene::default()
    };
    let rf = synth_rf(&scene, &acq, &fov(5e-3, (15e-3, 25e-3))).unwrap();
    let a = beamsum_profile(&rf, p, &das).unwrap();
    let b = beamsum_profile(&rf, p, &dmas).unwrap();
    let specular = profile_correlation(&a.values, &b.values);
    check(
        pairs.iter().all(|&c| c >= 0.9) && specular < diffuse_das_dmas,
        format!(
            "diffuse STA correlations DAS/F-DMAS {:.3}, DAS/MVDR {:.3}, F-DMAS/MVDR {:.3}; tilted plate PW DAS/F-DMAS {specular:.3}",
            pairs[0], pairs[1], pairs[2]
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("1 delay oracles", delay_oracles),
        ("2 point-target localization", point_localization),
        ("3 MVDR contract", mvdr_contract),
        ("4 F-DMAS algebra and spectrum", fdmas_algebra_and_spectrum),
        ("5 SB tilt recovery", sb_tilt_recovery),
        ("6 DV separation", dv_separation),
        ("7 DV tilt", dv_tilt),
        ("8 contour oracle", contour_oracle),
        ("9 linearity and determinism", linearity_and_determinism),
        ("10 beamsum profiles", beamsum_profiles),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .map(|a| a.to_lowercase())
        .collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| name.to_lowercase().contains(f.as_str()))
        {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
