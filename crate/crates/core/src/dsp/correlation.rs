use crate::error::{Error, Result};

/// Pearson correlation between the rows that had non-zero variance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    /// Row-major `w x w` matrix over the retained rows.
    pub values: Vec<f64>,
    pub size: usize,
    /// Input row indices dropped for zero variance.
    pub dropped: Vec<usize>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    /// Entries strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.size * (self.size - 1) / 2);
        for i in 0..self.size {
            for j in i + 1..self.size {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

pub fn correlation_matrix(rows: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    let len = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != len) {
        return Err(Error::invalid("rows have unequal lengths"));
    }
    let mut centred = Vec::new();
    let mut dropped = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let m = r.iter().sum::<f64>() / len.max(1) as f64;
        let c: Vec<f64> = r.iter().map(|v| v - m).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            centred.push(c.into_iter().map(|v| v / norm).collect::<Vec<_>>());
        } else {
            dropped.push(i);
        }
    }
    let w = centred.len();
    if w < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 rows with non-zero variance, have {w}"
        )));
    }
    let mut values = vec![0.0; w * w];
    for i in 0..w {
        values[i * w + i] = 1.0;
        for j in i + 1..w {
            let c: f64 = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum();
            let c = c.clamp(-1.0, 1.0);
            values[i * w + j] = c;
            values[j * w + i] = c;
        }
    }
    Ok(CorrelationMatrix {
        values,
        size: w,
        dropped,
    })
}
