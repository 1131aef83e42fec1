use super::Simulator;
use crate::geometry::ProbeFrame;

/// Mean echo intensity of surrounding tissue.
pub const BACKGROUND: f64 = 0.2;
/// Mean echo intensity of the target.
pub const TARGET_INTENSITY: f64 = 0.8;

const SPECKLE_LO: f64 = 0.8;
const SPECKLE_HI: f64 = 1.2;
const SUBSAMPLES: usize = 4;

/// Single-channel image, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f32>,
}

impl Image {
    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self { height, width, pixels: vec![value; height * width] }
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Multiplicative speckle factor for pixel `index`, uniform in [0.8, 1.2].
fn speckle(seed: u64, index: usize) -> f64 {
    let h = splitmix64(seed ^ splitmix64(index as u64));
    let u = (h >> 11) as f64 / (1u64 << 53) as f64;
    SPECKLE_LO + (SPECKLE_HI - SPECKLE_LO) * u
}

/// Where the beam axis crosses the target's depth, as the horizontal
/// displacement of the target center from that point (meters). `None` when
/// the beam does not point into the tissue.
pub(super) fn target_displacement(sim: &Simulator, frame: &ProbeFrame) -> Option<[f64; 2]> {
    let c = sim.phantom.target_center;
    let beam = frame.orientation.rotate([0.0, 0.0, -1.0]);
    if beam[2] > -1e-6 {
        return None;
    }
    let depth = frame.position[2] - c[2];
    let t = depth / -beam[2];
    let hit = [frame.position[0] + t * beam[0], frame.position[1] + t * beam[1]];
    Some([c[0] - hit[0], c[1] - hit[1]])
}

/// Renders the horizontal cross-section of the target through its center,
/// shifted by the beam offset, with fixed per-phantom speckle.
pub(super) fn render(sim: &Simulator, frame: &ProbeFrame) -> Image {
    let cfg = &sim.config;
    let (h, w) = (cfg.image_height, cfg.image_width);
    let mut coverage = vec![0.0f64; h * w];

    if let Some(d) = target_displacement(sim, frame) {
        if d[0].hypot(d[1]) <= cfg.fov_half_width {
            let s = cfg.pixels_per_meter();
            let cx = (w as f64 - 1.0) / 2.0 + d[0] * s;
            let cy = (h as f64 - 1.0) / 2.0 + d[1] * s;
            let rx = sim.phantom.target_radii[0] * s;
            let ry = sim.phantom.target_radii[1] * s;
            let c0 = ((cx - rx - 1.0).floor().max(0.0)) as usize;
            let c1 = ((cx + rx + 1.0).ceil().min(w as f64 - 1.0)).max(0.0) as usize;
            let r0 = ((cy - ry - 1.0).floor().max(0.0)) as usize;
            let r1 = ((cy + ry + 1.0).ceil().min(h as f64 - 1.0)).max(0.0) as usize;
            let n = SUBSAMPLES as f64;
            for row in r0..=r1 {
                for col in c0..=c1 {
                    let mut hits = 0usize;
                    for sy in 0..SUBSAMPLES {
                        let y = row as f64 - 0.5 + (sy as f64 + 0.5) / n;
                        let ny = (y - cy) / ry;
                        for sx in 0..SUBSAMPLES {
                            let x = col as f64 - 0.5 + (sx as f64 + 0.5) / n;
                            let nx = (x - cx) / rx;
                            if nx * nx + ny * ny <= 1.0 {
                                hits += 1;
                            }
                        }
                    }
                    coverage[row * w + col] = hits as f64 / (n * n);
                }
            }
        }
    }

    let seed = sim.phantom.speckle_seed;
    let pixels = coverage
        .iter()
        .enumerate()
        .map(|(i, &cov)| {
            let base = BACKGROUND + (TARGET_INTENSITY - BACKGROUND) * cov;
            (base * speckle(seed, i)).clamp(0.0, 1.0) as f32
        })
        .collect();
    Image { height: h, width: w, pixels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Quaternion;
    use crate::sim::{Phantom, SimConfig};

    const THRESHOLD: f32 = (BACKGROUND * SPECKLE_HI) as f32 + 1e-4;

    /// Brute-force scan: centroid of all pixels brighter than the background can get.
    fn bright_centroid(img: &Image) -> Option<(f64, f64, usize)> {
        let (mut sr, mut sc, mut n) = (0.0, 0.0, 0usize);
        for r in 0..img.height {
            for c in 0..img.width {
                if img.get(r, c) > THRESHOLD {
                    sr += r as f64;
                    sc += c as f64;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sr / n as f64, sc / n as f64, n))
    }

    fn at(x: f64, y: f64, q: Quaternion) -> ProbeFrame {
        ProbeFrame::new([x, y, -0.005], q)
    }

    #[test]
    fn centered_probe_renders_centered_target() {
        let sim = Simulator::default();
        let img = sim.render_image(&at(0.0, 0.0, Quaternion::IDENTITY));
        let (r, c, n) = bright_centroid(&img).expect("target visible");
        assert!(n > 20);
        assert!((r - 31.5).abs() <= 2.0 && (c - 31.5).abs() <= 2.0, "centroid ({r}, {c})");
        assert!(img.pixels.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert_eq!(img.pixels.len(), 64 * 64);
    }

    #[test]
    fn target_outside_fov_is_not_rendered() {
        let sim = Simulator::default();
        let img = sim.render_image(&at(0.05, 0.0, Quaternion::IDENTITY));
        assert!(bright_centroid(&img).is_none());
        let img = sim.render_image(&at(0.03, -0.03, Quaternion::IDENTITY));
        assert!(bright_centroid(&img).is_none());
    }

    #[test]
    fn render_is_deterministic() {
        let sim = Simulator::default();
        let q = Quaternion::from_axis_angle([0.3, 1.0, 0.0], 0.07).unwrap();
        let f = at(0.011, -0.004, q);
        assert_eq!(sim.render_image(&f).pixels, sim.render_image(&f).pixels);
    }

    #[test]
    fn centroid_moves_monotonically_with_offset() {
        let sim = Simulator::default();
        let mut last = f64::INFINITY;
        for k in 0..30 {
            let x = k as f64 * 0.001;
            let (_, c, _) = bright_centroid(&sim.render_image(&at(x, 0.0, Quaternion::IDENTITY))).unwrap();
            // probe to +x shows the target toward -x
            assert!(c < last, "x = {x}");
            last = c;
        }
    }

    #[test]
    fn tilt_shifts_target() {
        let sim = Simulator::default();
        let q = Quaternion::from_axis_angle([0.0, 1.0, 0.0], 5f64.to_radians()).unwrap();
        let (_, c0, _) = bright_centroid(&sim.render_image(&at(0.0, 0.0, Quaternion::IDENTITY))).unwrap();
        let (_, c1, _) = bright_centroid(&sim.render_image(&at(0.0, 0.0, q))).unwrap();
        assert!((c1 - c0).abs() > 1.0);
    }

    #[test]
    fn speckle_depends_on_seed() {
        let a = Simulator::default();
        let b = Simulator::new(Phantom { speckle_seed: 99, ..Phantom::default() }, SimConfig::default()).unwrap();
        let f = at(0.0, 0.0, Quaternion::IDENTITY);
        assert_ne!(a.render_image(&f).pixels, b.render_image(&f).pixels);
        for i in 0..10_000 {
            let s = speckle(5, i);
            assert!((SPECKLE_LO..SPECKLE_HI).contains(&s));
        }
    }
}
