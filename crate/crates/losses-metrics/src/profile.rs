use tomo_core::{attenuation_to_hu, normalized_to_hu, Unit, Volume};

use crate::{MetricError, Result};

/// One image row as (column, HU) pairs, converting from the volume's unit.
/// `slice` and `row` default to the middle of their axes.
pub fn line_profile(
    v: &Volume,
    slice: Option<usize>,
    row: Option<usize>,
) -> Result<Vec<(usize, f64)>> {
    let s = slice.unwrap_or(v.depth() / 2);
    let r = row.unwrap_or(v.rows() / 2);
    if s >= v.depth() || r >= v.rows() {
        return Err(MetricError::invalid(
            "line_profile",
            format!(
                "slice {s}, row {r} out of range for {}x{}x{}",
                v.depth(),
                v.rows(),
                v.cols()
            ),
        ));
    }
    let cols = v.cols();
    let data = v.values().data();
    let base = (s * v.rows() + r) * cols;
    let to_hu = |x: f64| match v.unit() {
        Unit::Hu => x,
        Unit::Normalized => normalized_to_hu(x),
        Unit::Attenuation => attenuation_to_hu(x),
    };
    Ok((0..cols).map(|c| (c, to_hu(data[base + c]))).collect())
}

/// CSV text for a profile: header plus one line per column.
pub fn profile_csv(profile: &[(usize, f64)]) -> String {
    let mut out = String::from("column,hu\n");
    for (c, hu) in profile {
        out.push_str(&format!("{c},{hu:.6}\n"));
    }
    out
}
