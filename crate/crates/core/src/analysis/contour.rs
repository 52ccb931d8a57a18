use std::collections::HashMap;

use crate::acquisition::{DelayTable, Pixel};
use crate::beamform::delay_compensate_into;
use crate::error::{Error, Result};
use crate::rf::RfDataset;

/// Delay-compensated samples of one pixel over (channel, transmission).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelChannelTxMap {
    pub pixel: Pixel,
    pub n_ch: usize,
    pub n_tx: usize,
    /// Row-major by channel: entry `(i, j)` at `i * n_tx + j`.
    pub values: Vec<f64>,
    /// Per-transmission axis labels (degrees for PW, element index for STA).
    pub tx_labels: Vec<f64>,
}

impl PixelChannelTxMap {
    pub fn from_values(n_ch: usize, n_tx: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_ch * n_tx {
            return Err(Error::LengthMismatch {
                expected: n_ch * n_tx,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("map", "entries must be finite"));
        }
        Ok(Self {
            pixel: Pixel::new(0.0, 0.0),
            n_ch,
            n_tx,
            values,
            tx_labels: (0..n_tx).map(|j| j as f64).collect(),
        })
    }

    pub fn at(&self, ch: usize, tx: usize) -> f64 {
        self.values[ch * self.n_tx + tx]
    }
}

/// Map of `s_i(tau(i, j))` for the pixel at entry `index` of `delays`; no
/// apodization.
pub fn pixel_channel_tx_map(
    rf: &RfDataset,
    pixel: Pixel,
    delays: &DelayTable,
    index: usize,
) -> PixelChannelTxMap {
    let (n_ch, n_tx) = (rf.n_ch(), rf.n_tx());
    let mut by_tx = vec![0.0; n_ch * n_tx];
    for (j, row) in by_tx.chunks_mut(n_ch).enumerate() {
        delay_compensate_into(rf, j, delays.tx(index)[j], delays.rx(index), row);
    }
    let mut values = vec![0.0; n_ch * n_tx];
    for j in 0..n_tx {
        for i in 0..n_ch {
            values[i * n_tx + j] = by_tx[j * n_ch + i];
        }
    }
    let scheme = &rf.acquisition().scheme;
    PixelChannelTxMap {
        pixel,
        n_ch,
        n_tx,
        values,
        tx_labels: (0..n_tx).map(|j| scheme.label(j)).collect(),
    }
}

/// A vertex in continuous (channel, transmission) index coordinates.
pub type Vertex = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub level: f64,
    /// Closed polylines repeat their first vertex at the end.
    pub polylines: Vec<Vec<Vertex>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContourSet {
    pub contours: Vec<Contour>,
}

impl ContourSet {
    pub fn is_empty(&self) -> bool {
        self.contours.iter().all(|c| c.polylines.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Levels {
    /// Eight levels evenly spaced from 10% to 90% of the map maximum.
    Auto,
    Explicit(Vec<f64>),
}

/// Level sets of `|map|` by marching squares.
pub fn extract_contours(map: &PixelChannelTxMap, levels: &Levels) -> Result<ContourSet> {
    if map.n_ch < 2 || map.n_tx < 2 {
        return Err(Error::invalid(
            "map",
            "contouring needs at least a 2x2 matrix",
        ));
    }
    let field: Vec<f64> = map.values.iter().map(|v| v.abs()).collect();
    let levels = match levels {
        Levels::Explicit(l) => l.clone(),
        Levels::Auto => {
            let max = field.iter().fold(0.0f64, |m, &v| m.max(v));
            if max == 0.0 {
                return Ok(ContourSet::default());
            }
            (0..8).map(|k| max * (0.1 + 0.8 * k as f64 / 7.0)).collect()
        }
    };
    let contours = levels
        .into_iter()
        .map(|level| {
            let polylines = marching_squares(&field, map.n_ch, map.n_tx, level);
            Contour { level, polylines }
        })
        .filter(|c| !c.polylines.is_empty())
        .collect();
    Ok(ContourSet { contours })
}

// Grid nodes are (row, col) = (channel, transmission); an edge is keyed by
// its two node indices so neighbouring cells share crossing points.
type EdgeKey = (usize, usize);

/// Iso-lines of `field` (rows × cols, row-major) at `level`, joined into
/// polylines. Nodes with `value >= level` count as inside; saddle cells are
/// resolved by the mean of the four corners.
pub fn marching_squares(field: &[f64], rows: usize, cols: usize, level: f64) -> Vec<Vec<Vertex>> {
    let node = |r: usize, c: usize| r * cols + c;
    let crossing = |a: usize, b: usize| -> Vertex {
        let (va, vb) = (field[a], field[b]);
        let t = if va == vb {
            0.5
        } else {
            (level - va) / (vb - va)
        };
        let (ra, ca) = ((a / cols) as f64, (a % cols) as f64);
        let (rb, cb) = ((b / cols) as f64, (b % cols) as f64);
        (ra + t * (rb - ra), ca + t * (cb - ca))
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            // Corners counter-clockwise: (r,c) (r,c+1) (r+1,c+1) (r+1,c).
            let corners = [
                node(r, c),
                node(r, c + 1),
                node(r + 1, c + 1),
                node(r + 1, c),
            ];
            let inside: Vec<bool> = corners.iter().map(|&k| field[k] >= level).collect();
            let edge = |e: usize| -> EdgeKey {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                (a.min(b), a.max(b))
            };
            let crossed: Vec<usize> = (0..4)
                .filter(|&e| inside[e] != inside[(e + 1) % 4])
                .collect();
            match crossed.len() {
                0 => {}
                2 => segments.push((edge(crossed[0]), edge(crossed[1]))),
                4 => {
                    let mean = corners.iter().map(|&k| field[k]).sum::<f64>() / 4.0;
                    let center_inside = mean >= level;
                    // Pair each crossed edge with the one that keeps the
                    // centre on the side it belongs to.
                    if center_inside == inside[0] {
                        segments.push((edge(0), edge(1)));
                        segments.push((edge(2), edge(3)));
                    } else {
                        segments.push((edge(3), edge(0)));
                        segments.push((edge(1), edge(2)));
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
        }
    }

    let mut incident: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segments.iter().enumerate() {
        incident.entry(*a).or_default().push(k);
        incident.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();

    let walk = |start_seg: usize, start_edge: EdgeKey, used: &mut Vec<bool>| -> Vec<Vertex> {
        let mut line = vec![crossing(start_edge.0, start_edge.1)];
        let mut seg = start_seg;
        let mut at = start_edge;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == at { b } else { a };
            line.push(crossing(next.0, next.1));
            at = next;
            match incident[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        line
    };

    // Open polylines start at boundary crossings (edges seen once).
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by_key(|&k| {
        let (a, b) = segments[k];
        (incident[&a].len().min(incident[&b].len()), k)
    });
    for k in order {
        if used[k] {
            continue;
        }
        let (a, b) = segments[k];
        let start = if incident[&a].len() == 1 {
            a
        } else if incident[&b].len() == 1 {
            b
        } else {
            a
        };
        polylines.push(walk(k, start, &mut used));
    }
    polylines
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle_map(n: usize, c: f64) -> PixelChannelTxMap {
        let mut v = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                v.push((i as f64 - c).powi(2) + (j as f64 - c).powi(2));
            }
        }
        PixelChannelTxMap::from_values(n, n, v).unwrap()
    }

    #[test]
    fn constant_field_has_no_contours() {
        let m = PixelChannelTxMap::from_values(5, 6, vec![3.0; 30]).unwrap();
        assert!(extract_contours(&m, &Levels::Auto).unwrap().is_empty());
        assert!(extract_contours(&m, &Levels::Explicit(vec![3.0, 1.0]))
            .unwrap()
            .is_empty());
        let z = PixelChannelTxMap::from_values(3, 3, vec![0.0; 9]).unwrap();
        assert!(extract_contours(&z, &Levels::Auto).unwrap().is_empty());
    }

    #[test]
    fn circle_is_a_single_closed_polyline() {
        let m = circle_map(41, 20.0);
        let r = 12.3;
        let set = extract_contours(&m, &Levels::Explicit(vec![r * r])).unwrap();
        assert_eq!(set.contours.len(), 1);
        let lines = &set.contours[0].polylines;
        assert_eq!(lines.len(), 1);
        let line = &lines[0];
        assert_eq!(line.first(), line.last());
        for &(i, j) in line {
            let rad = ((i - 20.0).powi(2) + (j - 20.0).powi(2)).sqrt();
            assert!((rad - r).abs() <= 1.0, "{rad}");
        }
    }

    #[test]
    fn open_line_terminates_on_boundary() {
        // Plane ramp along the channel axis.
        let v: Vec<f64> = (0..4).flat_map(|i| (0..5).map(move |_| i as f64)).collect();
        let m = PixelChannelTxMap::from_values(4, 5, v).unwrap();
        let set = extract_contours(&m, &Levels::Explicit(vec![1.5])).unwrap();
        let line = &set.contours[0].polylines[0];
        assert_eq!(line.len(), 5);
        assert!(line.iter().all(|&(i, _)| (i - 1.5).abs() < 1e-12));
        let ends = [line[0].1, line[4].1];
        assert!(ends.contains(&0.0) && ends.contains(&4.0));
    }

    #[test]
    fn rejects_degenerate_map() {
        let m = PixelChannelTxMap::from_values(1, 4, vec![1.0; 4]).unwrap();
        assert!(extract_contours(&m, &Levels::Auto).is_err());
    }
}
