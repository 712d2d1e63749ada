use crate::error::{Error, Result};

/// `n_units x T` symbols, stored time-major so that each step is contiguous.
///
/// Times are 0-based here: step `t` is the model's time `t + 1`. Everything
/// before step 0 is the all-zero history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeSeries {
    n_units: usize,
    t_len: usize,
    symbols: Vec<u32>,
}

impl TimeSeries {
    pub fn zeros(n_units: usize, t_len: usize) -> Self {
        Self {
            n_units,
            t_len,
            symbols: vec![0; n_units * t_len],
        }
    }

    /// Build from one row of symbols per unit.
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let n_units = rows.len();
        let t_len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t_len) {
            return Err(Error::ShapeMismatch("unit rows have different lengths".into()));
        }
        let mut s = Self::zeros(n_units, t_len);
        for (i, row) in rows.iter().enumerate() {
            for (t, &x) in row.iter().enumerate() {
                s.set(i, t, x);
            }
        }
        Ok(s)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn len(&self) -> usize {
        self.t_len
    }

    pub fn is_empty(&self) -> bool {
        self.t_len == 0
    }

    #[inline]
    pub fn get(&self, unit: usize, t: usize) -> u32 {
        self.symbols[t * self.n_units + unit]
    }

    #[inline]
    pub fn set(&mut self, unit: usize, t: usize, x: u32) {
        self.symbols[t * self.n_units + unit] = x;
    }

    /// All units' symbols at step `t`.
    #[inline]
    pub fn step(&self, t: usize) -> &[u32] {
        &self.symbols[t * self.n_units..(t + 1) * self.n_units]
    }

    pub fn step_mut(&mut self, t: usize) -> &mut [u32] {
        &mut self.symbols[t * self.n_units..(t + 1) * self.n_units]
    }

    pub fn row(&self, unit: usize) -> Vec<u32> {
        (0..self.t_len).map(|t| self.get(unit, t)).collect()
    }

    pub fn check_alphabet(&self, c: usize) -> Result<()> {
        match self.symbols.iter().find(|&&x| x as usize >= c) {
            Some(&x) => Err(Error::SymbolOutOfRange {
                symbol: x as usize,
                alphabet: c,
            }),
            None => Ok(()),
        }
    }

    /// Number of non-zero symbols emitted by `unit`.
    pub fn spike_count(&self, unit: usize) -> usize {
        (0..self.t_len).filter(|&t| self.get(unit, t) != 0).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let rows = vec![vec![0, 1, 1], vec![1, 0, 2]];
        let s = TimeSeries::from_rows(&rows).unwrap();
        assert_eq!(s.step(1), &[1, 0]);
        assert_eq!(s.row(1), rows[1]);
        assert!(s.check_alphabet(3).is_ok());
        assert!(s.check_alphabet(2).is_err());
        assert_eq!(s.spike_count(0), 2);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(TimeSeries::from_rows(&[vec![0], vec![0, 1]]).is_err());
    }
}
