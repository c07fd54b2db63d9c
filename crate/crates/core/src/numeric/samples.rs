use serde::{Deserialize, Serialize};

/// Row-major matrix of draws, one row per sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim), "ragged sample matrix");
        SampleMatrix { dim, data }
    }

    pub fn from_rows(dim: usize, rows: impl IntoIterator<Item = Vec<f64>>) -> Self {
        let mut data = Vec::new();
        for r in rows {
            assert_eq!(r.len(), dim);
            data.extend(r);
        }
        SampleMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n_rows() as f64;
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|x| *x /= n);
        m
    }

    /// Sample standard deviation of each column.
    pub fn column_stds(&self) -> Vec<f64> {
        let mean = self.column_means();
        let n = self.n_rows() as f64;
        let mut s = vec![0.0; self.dim];
        for r in self.rows() {
            for ((a, b), m) in s.iter_mut().zip(r).zip(&mean) {
                *a += (b - m) * (b - m);
            }
        }
        s.iter().map(|x| (x / (n - 1.0).max(1.0)).sqrt()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}
