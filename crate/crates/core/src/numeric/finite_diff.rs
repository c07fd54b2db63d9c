use crate::error::{Error, Result};

/// Central-difference gradient `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let coords: Vec<usize> = (0..x.len()).collect();
    finite_diff_partial(&mut f, x, h, &coords)
}

/// Central differences restricted to `coords`, in that order.
pub fn finite_diff_partial<F>(mut f: F, x: &[f64], h: f64, coords: &[usize]) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut work = x.to_vec();
    coords
        .iter()
        .map(|&i| {
            work[i] = x[i] + h;
            let up = f(&work);
            work[i] = x[i] - h;
            let down = f(&work);
            work[i] = x[i];
            if !(up.is_finite() && down.is_finite()) {
                return Err(Error::NonFiniteCoordinate { coordinate: i });
            }
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Central difference of `f` along direction `v`.
pub fn finite_diff_directional<F>(mut f: F, x: &[f64], v: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let up: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let down: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
    let (fu, fd) = (f(&up), f(&down));
    if !(fu.is_finite() && fd.is_finite()) {
        return Err(Error::NonFiniteCoordinate { coordinate: 0 });
    }
    Ok((fu - fd) / (2.0 * h))
}
