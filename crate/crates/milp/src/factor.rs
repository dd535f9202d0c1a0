//! Product-form basis inverse: `B^-1 = E_k ... E_1` with sparse eta matrices.
//!
//! Each eta records the pivot row `r` and the transformed entering column `w`.
//! Rebuilding from the identity keeps the file short; slack columns already
//! sitting in their own row need no eta at all.

const DROP_TOL: f64 = 1e-13;

#[derive(Clone, Debug, Default)]
pub(crate) struct EtaFile {
    rows: Vec<usize>,
    pivots: Vec<f64>,
    starts: Vec<usize>,
    index: Vec<u32>,
    value: Vec<f64>,
}

impl EtaFile {
    pub fn clear(&mut self) {
        self.rows.clear();
        self.pivots.clear();
        self.starts.clear();
        self.index.clear();
        self.value.clear();
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn nnz(&self) -> usize {
        self.index.len()
    }

    pub fn bytes(&self) -> usize {
        8 * (3 * self.rows.len() + 2 * self.value.len())
    }

    /// Appends the eta that turns column `w` into the unit vector `e_r`.
    pub fn push(&mut self, r: usize, w: &[f64]) {
        self.rows.push(r);
        self.pivots.push(w[r]);
        self.starts.push(self.index.len());
        for (i, &wi) in w.iter().enumerate() {
            if i != r && wi.abs() > DROP_TOL {
                self.index.push(i as u32);
                self.value.push(wi);
            }
        }
    }

    /// Sign-only eta for a column `sign * e_r`.
    pub fn push_unit(&mut self, r: usize, sign: f64) {
        self.rows.push(r);
        self.pivots.push(sign);
        self.starts.push(self.index.len());
    }

    fn span(&self, k: usize) -> std::ops::Range<usize> {
        let end = self.starts.get(k + 1).copied().unwrap_or(self.index.len());
        self.starts[k]..end
    }

    /// In place `v <- B^-1 v`.
    pub fn ftran(&self, v: &mut [f64]) {
        for k in 0..self.rows.len() {
            let r = self.rows[k];
            if v[r] == 0.0 {
                continue;
            }
            let vr = v[r] / self.pivots[k];
            v[r] = vr;
            for p in self.span(k) {
                v[self.index[p] as usize] -= self.value[p] * vr;
            }
        }
    }

    /// In place `y^T <- y^T B^-1`.
    pub fn btran(&self, y: &mut [f64]) {
        for k in (0..self.rows.len()).rev() {
            let r = self.rows[k];
            let mut s = y[r];
            for p in self.span(k) {
                s -= self.value[p] * y[self.index[p] as usize];
            }
            y[r] = s / self.pivots[k];
        }
    }
}
