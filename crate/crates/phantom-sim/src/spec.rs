use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tensor_engine::rng;
use tomo_core::{Unit, Volume, HU_WINDOW_HI, HU_WINDOW_LO};

use crate::{Result, SimError};

/// Synthetic cohort tag. The two domains use different acquisition
/// protocols, standing in for two scanners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    A,
    B,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::A => "A",
            Domain::B => "B",
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Axis-aligned-in-z ellipsoid with an in-plane tilt, in voxel units.
/// `center` is (z, y, x) measured from the volume center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    pub tilt_deg: f64,
    pub hu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub depth: usize,
    pub rows: usize,
    pub cols: usize,
    pub background_hu: f64,
    pub ellipsoids: Vec<Ellipsoid>,
    pub domain: Domain,
    /// Uniform per-axis center perturbation bound, voxels.
    pub center_jitter: f64,
    /// Uniform HU perturbation bound (results are clamped to the window).
    pub hu_jitter: f64,
}

impl PhantomSpec {
    /// Inscribed-circle radius of one slice.
    pub fn inscribed_radius(&self) -> f64 {
        self.rows.min(self.cols) as f64 / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.rows == 0 || self.cols == 0 {
            return Err(SimError::invalid("PhantomSpec", "zero extent"));
        }
        if !(HU_WINDOW_LO..=HU_WINDOW_HI).contains(&self.background_hu) {
            return Err(SimError::invalid(
                "PhantomSpec",
                format!("background {} HU outside window", self.background_hu),
            ));
        }
        if !(self.center_jitter >= 0.0) || !(self.hu_jitter >= 0.0) {
            return Err(SimError::invalid("PhantomSpec", "jitter bounds must be >= 0"));
        }
        for (i, e) in self.ellipsoids.iter().enumerate() {
            if e.semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(SimError::invalid(
                    "PhantomSpec",
                    format!("ellipsoid {i}: non-positive semi-axis"),
                ));
            }
            if !(HU_WINDOW_LO..=HU_WINDOW_HI).contains(&e.hu) {
                return Err(SimError::invalid(
                    "PhantomSpec",
                    format!("ellipsoid {i}: {} HU outside window", e.hu),
                ));
            }
            self.check_inside(i, e)?;
        }
        Ok(())
    }

    /// Conservative in-plane bound: center radius plus the larger in-plane
    /// semi-axis (the jitter bound counts against it too), one voxel inside
    /// the inscribed circle so rotations never clip tissue.
    fn check_inside(&self, index: usize, e: &Ellipsoid) -> Result<()> {
        self.check_reach(index, e, self.center_jitter)
    }

    /// `jitter_allowance` is the spec-level jitter budget; pass 0 when `e`
    /// is already a realized (jittered) ellipsoid, or the budget would be
    /// counted twice.
    fn check_reach(&self, index: usize, e: &Ellipsoid, jitter_allowance: f64) -> Result<()> {
        let reach = (e.center[1].powi(2) + e.center[2].powi(2)).sqrt()
            + e.semi_axes[1].max(e.semi_axes[2])
            + jitter_allowance * std::f64::consts::SQRT_2;
        let limit = self.inscribed_radius() - 1.0;
        if reach > limit {
            return Err(SimError::Escape {
                index,
                detail: format!("in-plane reach {reach:.2} exceeds {limit:.2} voxels"),
            });
        }
        Ok(())
    }
}

fn jitter(spec: &PhantomSpec, rng: &mut ChaCha12Rng) -> Vec<Ellipsoid> {
    spec.ellipsoids
        .iter()
        .map(|e| {
            let draw = rng::uniform(rng, vec![4], -1.0, 1.0);
            let d = draw.data();
            let mut out = *e;
            for a in 0..3 {
                out.center[a] += spec.center_jitter * d[a];
            }
            out.hu = (e.hu + spec.hu_jitter * d[3]).clamp(HU_WINDOW_LO, HU_WINDOW_HI);
            out
        })
        .collect()
}

/// Rasterizes the spec into an HU volume. The seed perturbs centers and
/// HU values within the spec's jitter bounds; later ellipsoids overwrite
/// earlier ones where they overlap. Identical (spec, seed) pairs produce
/// bit-identical volumes regardless of thread count.
pub fn make_phantom(spec: &PhantomSpec, seed: u64) -> Result<Volume> {
    spec.validate()?;
    let mut r = rng::stream(seed, "phantom-jitter");
    let ellipsoids = jitter(spec, &mut r);
    for (i, e) in ellipsoids.iter().enumerate() {
        spec.check_reach(i, e, 0.0)?;
    }

    let (depth, rows, cols) = (spec.depth, spec.rows, spec.cols);
    let cz = (depth as f64 - 1.0) / 2.0;
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;
    // trig per ellipsoid, hoisted out of the voxel loop
    let trig: Vec<(f64, f64)> = ellipsoids
        .iter()
        .map(|e| {
            let t = e.tilt_deg.to_radians();
            (t.cos(), t.sin())
        })
        .collect();

    let mut data = vec![0.0f64; depth * rows * cols];
    data.par_chunks_mut(rows * cols).enumerate().for_each(|(s, plane)| {
        let z = s as f64 - cz;
        for row in 0..rows {
            let y = row as f64 - cy;
            for col in 0..cols {
                let x = col as f64 - cx;
                let mut value = spec.background_hu;
                // later ellipsoids overwrite earlier: scan back to front
                for (e, (ct, st)) in ellipsoids.iter().zip(&trig).rev() {
                    let dz = z - e.center[0];
                    let dy = y - e.center[1];
                    let dx = x - e.center[2];
                    let u = dx * ct + dy * st;
                    let v = -dx * st + dy * ct;
                    let q = (dz / e.semi_axes[0]).powi(2)
                        + (v / e.semi_axes[1]).powi(2)
                        + (u / e.semi_axes[2]).powi(2);
                    if q <= 1.0 {
                        value = e.hu;
                        break;
                    }
                }
                plane[row * cols + col] = value;
            }
        }
    });
    Ok(Volume::from_parts(depth, rows, cols, data, Unit::Hu)?)
}

/// Randomized body-like spec: a soft-tissue body ellipsoid containing bony
/// inclusions, air cavities, and denser lesions, all inside the inscribed
/// circle. Deterministic in (seed, index).
///
/// Needs min(rows, cols) ≥ 52: the worst-case draw reaches
/// 0.82·half + 2.13 (body offset) + √2 (jitter) from center, which only
/// fits inside half − 1 from a half-extent of 26 up. Smaller grids make
/// the spec fail validation for some seeds.
pub fn sample_spec(
    depth: usize,
    rows: usize,
    cols: usize,
    domain: Domain,
    seed: u64,
    index: u64,
) -> PhantomSpec {
    let mut r = rng::substream(seed, "phantom-spec", index);
    let mut take = |lo: f64, hi: f64| rng::uniform(&mut r, vec![1], lo, hi).data()[0];

    let min_half = rows.min(cols) as f64 / 2.0;
    let body_ax = min_half * take(0.72, 0.82);
    let body_ay = min_half * take(0.60, 0.72);
    let body_az = depth as f64 * take(0.55, 1.1);
    let mut ellipsoids = vec![Ellipsoid {
        center: [0.0, take(-1.5, 1.5), take(-1.5, 1.5)],
        semi_axes: [body_az, body_ay, body_ax],
        tilt_deg: take(-20.0, 20.0),
        hu: take(10.0, 60.0),
    }];

    // placement budget keeps every inclusion inside the body's short axis
    let inner = body_ay.min(body_ax) * 0.55;
    let mut place = |count: usize, hu_lo: f64, hu_hi: f64, ax_lo: f64, ax_hi: f64| {
        let mut out = Vec::new();
        for _ in 0..count {
            let rad = inner * take(0.0, 1.0);
            let ang = take(0.0, std::f64::consts::TAU);
            out.push(Ellipsoid {
                center: [take(-0.2, 0.2) * depth as f64, rad * ang.sin(), rad * ang.cos()],
                semi_axes: [
                    (depth as f64 * take(0.2, 0.5)).max(1.0),
                    take(ax_lo, ax_hi),
                    take(ax_lo, ax_hi),
                ],
                tilt_deg: take(-90.0, 90.0),
                hu: take(hu_lo, hu_hi),
            });
        }
        out
    };

    let scale = min_half / 32.0; // keep proportions across grid sizes
    ellipsoids.extend(place(2, 350.0, 900.0, 2.0 * scale, 6.0 * scale));
    ellipsoids.extend(place(2, -850.0, -700.0, 2.0 * scale, 5.0 * scale));
    ellipsoids.extend(place(3, 80.0, 260.0, 1.5 * scale, 4.0 * scale));

    PhantomSpec {
        depth,
        rows,
        cols,
        background_hu: -1000.0,
        ellipsoids,
        domain,
        center_jitter: 1.0,
        hu_jitter: 15.0,
    }
}
