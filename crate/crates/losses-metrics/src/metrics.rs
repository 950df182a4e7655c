use tomo_core::{Unit, Volume};

use crate::{MetricError, Result};

/// Fixed dynamic range of the normalized window [-1, 1]. Reports stay
/// comparable across runs because the range never adapts to the data.
pub const DYNAMIC_RANGE: f64 = 2.0;

/// Sentinel for identical inputs, where PSNR diverges.
pub const PSNR_CAP_DB: f64 = 300.0;

/// Floor for log-scale MAE/MSE when the error is exactly zero.
pub const DB_FLOOR: f64 = -300.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, PartialEq)]
pub struct SliceMetrics {
    pub slice: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub mae: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub mae: f64,
    pub mae_db: f64,
    pub mse: f64,
    pub mse_db: f64,
    pub per_slice: Vec<SliceMetrics>,
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / mse).log10()).min(PSNR_CAP_DB)
}

fn db(value: f64, factor: f64) -> f64 {
    if value <= 0.0 {
        return DB_FLOOR;
    }
    (factor * value.log10()).max(DB_FLOOR)
}

/// 11x11 Gaussian window, normalized to unit sum.
fn ssim_window() -> Vec<f64> {
    let c = (SSIM_WINDOW as f64 - 1.0) / 2.0;
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            w.push((-d2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp());
        }
    }
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// Mean local SSIM over all fully-contained (valid) window positions of one
/// 2D slice. Both slices must be at least the window size in each axis.
fn ssim_slice(a: &[f64], b: &[f64], rows: usize, cols: usize, win: &[f64]) -> f64 {
    let c1 = (SSIM_K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (SSIM_K2 * DYNAMIC_RANGE).powi(2);
    let or = rows - SSIM_WINDOW + 1;
    let oc = cols - SSIM_WINDOW + 1;
    let mut acc = 0.0;
    for r0 in 0..or {
        for c0 in 0..oc {
            let mut mx = 0.0;
            let mut my = 0.0;
            let mut mxx = 0.0;
            let mut myy = 0.0;
            let mut mxy = 0.0;
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let w = win[i * SSIM_WINDOW + j];
                    let x = a[(r0 + i) * cols + c0 + j];
                    let y = b[(r0 + i) * cols + c0 + j];
                    mx += w * x;
                    my += w * y;
                    mxx += w * x * x;
                    myy += w * y * y;
                    // (x*y) first so the rounding is symmetric in the pair
                    mxy += w * (x * y);
                }
            }
            let vx = mxx - mx * mx;
            let vy = myy - my * my;
            let cov = mxy - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            acc += num / den;
        }
    }
    acc / (or * oc) as f64
}

/// Full-volume fidelity report between two normalized volumes on the same
/// grid. PSNR/SSIM use the fixed window range of 2.0; SSIM is computed per
/// axial slice with a valid-mode 11x11 Gaussian window and averaged. The
/// volume-level PSNR comes from the pooled MSE, not from per-slice means.
pub fn compute_metrics(xhat: &Volume, x0: &Volume) -> Result<MetricReport> {
    if xhat.unit() != Unit::Normalized || x0.unit() != Unit::Normalized {
        return Err(MetricError::invalid(
            "compute_metrics",
            format!("expected normalized volumes, got {:?} and {:?}", xhat.unit(), x0.unit()),
        ));
    }
    if xhat.values().shape() != x0.values().shape() {
        return Err(MetricError::shape(
            "compute_metrics",
            format!("{:?} vs {:?}", xhat.values().shape(), x0.values().shape()),
        ));
    }
    let (depth, rows, cols) = (xhat.depth(), xhat.rows(), xhat.cols());
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(MetricError::invalid(
            "compute_metrics",
            format!("slices {rows}x{cols} are smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"),
        ));
    }

    let a = xhat.values().data();
    let b = x0.values().data();
    let win = ssim_window();
    let plane = rows * cols;
    let mut per_slice = Vec::with_capacity(depth);
    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    for s in 0..depth {
        let sa = &a[s * plane..(s + 1) * plane];
        let sb = &b[s * plane..(s + 1) * plane];
        let mut sq = 0.0;
        let mut ab = 0.0;
        for (x, y) in sa.iter().zip(sb) {
            let e = x - y;
            sq += e * e;
            ab += e.abs();
        }
        sum_sq += sq;
        sum_abs += ab;
        let mse = sq / plane as f64;
        per_slice.push(SliceMetrics {
            slice: s,
            psnr: psnr_from_mse(mse),
            ssim: ssim_slice(sa, sb, rows, cols, &win),
            mae: ab / plane as f64,
            mse,
        });
    }
    let n = (depth * plane) as f64;
    let mse = sum_sq / n;
    let mae = sum_abs / n;
    let ssim = per_slice.iter().map(|s| s.ssim).sum::<f64>() / depth as f64;
    Ok(MetricReport {
        psnr: psnr_from_mse(mse),
        ssim,
        mae,
        mae_db: db(mae, 20.0),
        mse,
        mse_db: db(mse, 10.0),
        per_slice,
    })
}

pub fn csv_header() -> String {
    "label,psnr_db,ssim,mae,mae_db,mse,mse_db".to_string()
}

pub fn csv_row(label: &str, r: &MetricReport) -> String {
    format!(
        "{label},{:.6},{:.6},{:.8},{:.4},{:.10},{:.4}",
        r.psnr, r.ssim, r.mae, r.mae_db, r.mse, r.mse_db
    )
}

/// Mean ± sample standard deviation over a set of reports, one cell per
/// metric, formatted `mean±std`.
pub fn csv_aggregate_row(label: &str, reports: &[MetricReport]) -> String {
    fn agg(values: Vec<f64>) -> String {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        format!("{:.6}±{:.6}", mean, var.sqrt())
    }
    let cols = [
        agg(reports.iter().map(|r| r.psnr).collect()),
        agg(reports.iter().map(|r| r.ssim).collect()),
        agg(reports.iter().map(|r| r.mae).collect()),
        agg(reports.iter().map(|r| r.mae_db).collect()),
        agg(reports.iter().map(|r| r.mse).collect()),
        agg(reports.iter().map(|r| r.mse_db).collect()),
    ];
    format!("{label},{}", cols.join(","))
}
