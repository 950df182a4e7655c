use tensor_engine::rng;

use crate::geometry::Geometry;
use crate::project::{backproject_raw, project_raw};

/// ⟨Av, s⟩ and ⟨v, Aᵀs⟩ on random inputs, with their normalized gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjointReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Draws a random volume/sinogram pair and measures how far the projector
/// pair is from a true transpose: |⟨Av,s⟩ − ⟨v,Aᵀs⟩| / (‖Av‖·‖s‖). For the
/// matched pair this is summation noise, orders below 1e-12.
pub fn adjoint_test(g: &Geometry, depth: usize, seed: u64) -> AdjointReport {
    let mut r = rng::stream(seed, "adjoint-test");
    let v = rng::standard_normal(&mut r, vec![depth, g.n_rows, g.n_cols]);
    let s = rng::standard_normal(&mut r, vec![depth, g.n_angles, g.n_det]);

    let av = project_raw(v.data(), depth, g);
    let ats = backproject_raw(s.data(), depth, g);

    let lhs: f64 = av.iter().zip(s.data()).map(|(a, b)| a * b).sum();
    let rhs: f64 = v.data().iter().zip(&ats).map(|(a, b)| a * b).sum();
    let av_norm = av.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s_norm = s.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let denom = (av_norm * s_norm).max(f64::MIN_POSITIVE);
    AdjointReport { lhs, rhs, gap: (lhs - rhs).abs() / denom }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_pair_gap_is_machine_level() {
        for (na, nd, n) in [(8usize, 11usize, 10usize), (16, 16, 16), (12, 9, 7)] {
            let g = Geometry::new(na, nd, 1.0, n, n).unwrap();
            let rep = adjoint_test(&g, 2, 42);
            assert!(rep.gap < 1e-12, "geometry {na}x{nd}x{n}: gap {}", rep.gap);
        }
    }

    #[test]
    fn same_seed_reproduces_the_report() {
        let g = Geometry::new(10, 13, 1.5, 12, 12).unwrap();
        assert_eq!(adjoint_test(&g, 3, 7), adjoint_test(&g, 3, 7));
        assert_ne!(adjoint_test(&g, 3, 7).lhs, adjoint_test(&g, 3, 8).lhs);
    }
}
