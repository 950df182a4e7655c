use tensor_engine::Tensor;

use crate::geometry::Geometry;
use crate::units::{self, Unit};
use crate::{Result, TomoError};

/// A stack of S square-pixel slices, laid out [S, rows, cols], tagged with
/// the value convention its numbers live in.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    values: Tensor,
    unit: Unit,
}

impl Volume {
    /// Values must be finite, rank 3, and inside [−1, 1] when normalized.
    pub fn new(values: Tensor, unit: Unit) -> Result<Self> {
        if values.shape().len() != 3 {
            return Err(TomoError::shape(
                "volume",
                format!("expected rank 3, got {:?}", values.shape()),
            ));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in values.data() {
            if !v.is_finite() {
                return Err(TomoError::invalid("volume", format!("non-finite value {v}")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if unit == Unit::Normalized && !values.data().is_empty() && (lo < -1.0 - 1e-9 || hi > 1.0 + 1e-9) {
            return Err(TomoError::invalid(
                "volume",
                format!("normalized values must lie in [-1, 1], found [{lo}, {hi}]"),
            ));
        }
        Ok(Volume { values, unit })
    }

    pub fn from_parts(depth: usize, rows: usize, cols: usize, data: Vec<f64>, unit: Unit) -> Result<Self> {
        Volume::new(Tensor::new(vec![depth, rows, cols], data)?, unit)
    }

    pub fn filled(depth: usize, rows: usize, cols: usize, value: f64, unit: Unit) -> Result<Self> {
        Volume::new(Tensor::full(vec![depth, rows, cols], value), unit)
    }

    pub fn depth(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn rows(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn cols(&self) -> usize {
        self.values.shape()[2]
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn into_values(self) -> Tensor {
        self.values
    }

    pub fn slice(&self, s: usize) -> &[f64] {
        let plane = self.rows() * self.cols();
        &self.values.data()[s * plane..(s + 1) * plane]
    }

    pub fn matches(&self, g: &Geometry) -> bool {
        self.rows() == g.n_rows && self.cols() == g.n_cols
    }

    /// Converts values into `unit`. Any conversion onto the normalized unit
    /// applies the display window (a clip), so it is total but not linear;
    /// the other directions are affine.
    pub fn to_unit(&self, unit: Unit) -> Volume {
        if unit == self.unit {
            return self.clone();
        }
        let f: fn(f64) -> f64 = match (self.unit, unit) {
            (Unit::Hu, Unit::Normalized) => units::hu_to_normalized,
            (Unit::Hu, Unit::Attenuation) => units::hu_to_attenuation,
            (Unit::Normalized, Unit::Hu) => units::normalized_to_hu,
            (Unit::Normalized, Unit::Attenuation) => units::normalized_to_attenuation,
            (Unit::Attenuation, Unit::Hu) => units::attenuation_to_hu,
            (Unit::Attenuation, Unit::Normalized) => |mu| {
                units::hu_to_normalized(units::attenuation_to_hu(mu))
            },
            _ => unreachable!("same-unit handled above"),
        };
        Volume { values: self.values.map(f), unit }
    }
}

/// Per-slice sinograms, laid out [S, n_angles, n_det], carrying the geometry
/// they were measured under.
#[derive(Debug, Clone, PartialEq)]
pub struct SinogramStack {
    values: Tensor,
    geom: Geometry,
}

impl SinogramStack {
    pub fn new(values: Tensor, geom: Geometry) -> Result<Self> {
        let dims = values.shape();
        if dims.len() != 3 || dims[1] != geom.n_angles || dims[2] != geom.n_det {
            return Err(TomoError::shape(
                "sinogram",
                format!(
                    "expected [S, {}, {}], got {:?}",
                    geom.n_angles, geom.n_det, dims
                ),
            ));
        }
        if let Some(v) = values.data().iter().find(|v| !v.is_finite()) {
            return Err(TomoError::invalid("sinogram", format!("non-finite value {v}")));
        }
        Ok(SinogramStack { values, geom })
    }

    pub fn zeros(depth: usize, geom: Geometry) -> Self {
        SinogramStack {
            values: Tensor::zeros(vec![depth, geom.n_angles, geom.n_det]),
            geom,
        }
    }

    pub fn depth(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn into_values(self) -> Tensor {
        self.values
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let (na, nd) = (self.geom.n_angles, self.geom.n_det);
        let start = (s * na + a) * nd;
        &self.values.data()[start..start + nd]
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.sum_squares()
    }
}
