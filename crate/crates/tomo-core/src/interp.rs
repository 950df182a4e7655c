//! Bilinear gather/scatter on one slice. The scatter uses the same four
//! weight expressions as the gather, which is what makes projector and
//! backprojector an exactly matched transpose pair.

#[inline]
pub(crate) fn gather(plane: &[f64], rows: usize, cols: usize, row: f64, col: f64, fill: f64) -> f64 {
    let r0f = row.floor();
    let c0f = col.floor();
    let fr = row - r0f;
    let fc = col - c0f;
    let r0 = r0f as isize;
    let c0 = c0f as isize;
    if r0 >= 0 && c0 >= 0 && (r0 as usize) + 1 < rows && (c0 as usize) + 1 < cols {
        let i = r0 as usize * cols + c0 as usize;
        return (1.0 - fr) * (1.0 - fc) * plane[i]
            + (1.0 - fr) * fc * plane[i + 1]
            + fr * (1.0 - fc) * plane[i + cols]
            + fr * fc * plane[i + cols + 1];
    }
    let mut acc = 0.0;
    for (rr, wr) in [(r0, 1.0 - fr), (r0 + 1, fr)] {
        for (cc, wc) in [(c0, 1.0 - fc), (c0 + 1, fc)] {
            let v = if rr >= 0 && (rr as usize) < rows && cc >= 0 && (cc as usize) < cols {
                plane[rr as usize * cols + cc as usize]
            } else {
                fill
            };
            acc += wr * wc * v;
        }
    }
    acc
}

#[inline]
pub(crate) fn scatter(plane: &mut [f64], rows: usize, cols: usize, row: f64, col: f64, val: f64) {
    let r0f = row.floor();
    let c0f = col.floor();
    let fr = row - r0f;
    let fc = col - c0f;
    let r0 = r0f as isize;
    let c0 = c0f as isize;
    if r0 >= 0 && c0 >= 0 && (r0 as usize) + 1 < rows && (c0 as usize) + 1 < cols {
        let i = r0 as usize * cols + c0 as usize;
        plane[i] += (1.0 - fr) * (1.0 - fc) * val;
        plane[i + 1] += (1.0 - fr) * fc * val;
        plane[i + cols] += fr * (1.0 - fc) * val;
        plane[i + cols + 1] += fr * fc * val;
        return;
    }
    for (rr, wr) in [(r0, 1.0 - fr), (r0 + 1, fr)] {
        for (cc, wc) in [(c0, 1.0 - fc), (c0 + 1, fc)] {
            if rr >= 0 && (rr as usize) < rows && cc >= 0 && (cc as usize) < cols {
                plane[rr as usize * cols + cc as usize] += wr * wc * val;
            }
        }
    }
}
