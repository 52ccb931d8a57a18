//! PGM images and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{ContourSet, DvVector};
use crate::compounding::{BeamformedImage, BeamsumProfile};
use crate::error::{Error, Result};

/// 8-bit binary PGM of a dB image: `-dynamic_range` maps to 0, 0 dB to 255.
/// Rows are depths, columns lateral positions.
pub fn encode_pgm(image: &BeamformedImage) -> Vec<u8> {
    let grid = image.grid();
    let mut out = format!("P5\n{} {}\n255\n", grid.n_x, grid.n_z).into_bytes();
    let dr = image.dynamic_range;
    for iz in 0..grid.n_z {
        for ix in 0..grid.n_x {
            let db = image.db[grid.index(ix, iz)];
            let level = ((db + dr) / dr * 255.0).round().clamp(0.0, 255.0);
            out.push(level as u8);
        }
    }
    out
}

/// Raw compounded grid as CSV.
pub fn raw_grid_csv(image: &BeamformedImage) -> String {
    let grid = image.grid();
    let mut s = String::from("x_m,z_m,raw,envelope,db\n");
    for ix in 0..grid.n_x {
        for iz in 0..grid.n_z {
            let k = grid.index(ix, iz);
            let _ = writeln!(
                s,
                "{:e},{:e},{:e},{:e},{:e}",
                grid.x(ix),
                grid.z(iz),
                image.raw.values[k],
                image.envelope[k],
                image.db[k]
            );
        }
    }
    s
}

/// One row per transmission and profile.
pub fn beamsum_csv(profiles: &[BeamsumProfile]) -> String {
    let mut s = String::from("x_m,z_m,transmission_index,angle_deg_or_element,value,beamformer\n");
    for p in profiles {
        for (j, (&v, &label)) in p.values.iter().zip(&p.labels).enumerate() {
            let _ = writeln!(
                s,
                "{:e},{:e},{j},{label},{v:e},{}",
                p.pixel.x, p.pixel.z, p.beamformer
            );
        }
    }
    s
}

/// One row per vertex; `polyline` numbers lines within a level.
pub fn contour_csv(set: &ContourSet) -> String {
    let mut s = String::from("level,polyline,vertex_channel,vertex_tx\n");
    for c in &set.contours {
        for (k, line) in c.polylines.iter().enumerate() {
            for &(ch, tx) in line {
                let _ = writeln!(s, "{:e},{k},{ch},{tx}", c.level);
            }
        }
    }
    s
}

pub fn dv_csv(vectors: &[DvVector]) -> String {
    let mut s = String::from("x_m,z_m,phi_v,phi_m,eta_rad,vx,vz\n");
    for v in vectors {
        let _ = writeln!(
            s,
            "{:e},{:e},{:e},{:e},{},{:e},{:e}",
            v.x, v.z, v.phi_v, v.phi_m, v.eta, v.vx, v.vz
        );
    }
    s
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::PixelGrid;
    use crate::beamform::RawImage;

    #[test]
    fn pgm_maps_range_to_bytes() {
        let grid = PixelGrid::new((0.0, 1e-3), (1e-3, 2e-3), 1, 8).unwrap();
        let raw = RawImage {
            grid,
            values: vec![0.0; 8],
            tilts: None,
        };
        let image = BeamformedImage {
            raw,
            envelope: vec![1.0; 8],
            db: vec![0.0, -70.0, -35.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            dynamic_range: 70.0,
            beamformer: "das".into(),
            scheme: "pw".into(),
        };
        let bytes = encode_pgm(&image);
        let header = b"P5\n1 8\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..header.len() + 3], &[255, 0, 128]);
    }
}
