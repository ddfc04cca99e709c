//! The entire functions zeta(M) = sum (-M)^k/(k+1)! and omega(M) = sum (-M)^k/(k+2)!.

use nalgebra::DMatrix;

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Returns (exp(-M), zeta(M), omega(M)).
///
/// The series are summed on M / 2^s with a small norm and brought back with
/// zeta(2A) = (I + e^{-A}) zeta(A) / 2 and omega(2A) = (zeta(A)^2 + 2 omega(A)) / 4.
pub fn exp_zeta_omega(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let norm = norm1(m);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m / 2f64.powi(s);

    let mut e = id.clone();
    let mut z = id.clone();
    let mut w = &id * 0.5;
    // power holds (-A)^k / k!
    let mut power = id.clone();
    for k in 1..60 {
        power = -(&power * &a) / k as f64;
        let pn = norm1(&power);
        e += &power;
        z += &power / (k + 1) as f64;
        w += &power / ((k + 1) * (k + 2)) as f64;
        if pn < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        w = (&z * &z + &w * 2.0) * 0.25;
        z = (&id + &e) * &z * 0.5;
        e = &e * &e;
    }
    (e, z, w)
}

pub fn zeta(m: &DMatrix<f64>) -> DMatrix<f64> {
    exp_zeta_omega(m).1
}

pub fn omega(m: &DMatrix<f64>) -> DMatrix<f64> {
    exp_zeta_omega(m).2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_zero() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(zeta(&z), DMatrix::identity(3, 3));
        assert_eq!(omega(&z), DMatrix::identity(3, 3) * 0.5);
    }

    #[test]
    fn scalar_closed_forms() {
        for m in [1e-3, 0.3, 1.0, 7.5, 40.0, 300.0] {
            let mm = DMatrix::from_element(1, 1, m);
            let (e, z, w) = exp_zeta_omega(&mm);
            let ez = (-m).exp();
            assert!((e[(0, 0)] - ez).abs() < 1e-14 * (1.0 + ez));
            assert!((z[(0, 0)] - (1.0 - ez) / m).abs() < 1e-13 * z[(0, 0)]);
            let w_oracle = if m < 0.1 {
                (0..12).map(|k| (-m).powi(k) / (2..k + 3).map(f64::from).product::<f64>()).sum::<f64>()
            } else {
                (ez - 1.0 + m) / (m * m)
            };
            assert!((w[(0, 0)] - w_oracle).abs() < 1e-12 * w_oracle);
        }
        assert!((zeta(&DMatrix::from_element(1, 1, 1.0))[(0, 0)] - 0.6321206).abs() < 1e-7);
    }

    #[test]
    fn negative_scalar() {
        let m = -3.0f64;
        let z = zeta(&DMatrix::from_element(1, 1, m))[(0, 0)];
        assert!((z - (1.0 - (-m).exp()) / m).abs() < 1e-12 * z.abs());
    }
}
