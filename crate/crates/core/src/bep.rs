//! Bernoulli-process draws and the beta-Bernoulli feature matrix.

use std::collections::BTreeMap;
use std::io::Write;

use crate::bp::{stick_break, BPParams, BetaProcessDraw};
use crate::error::{Error, Result};
use crate::stats::RandomStream;

/// Binary N×K matrix, row-major, with cached column sums.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<u8>,
    column_counts: Vec<usize>,
    /// Index of the source atom for each column, when built from a draw.
    atoms: Vec<usize>,
}

impl FeatureMatrix {
    /// An N×0 matrix.
    pub fn empty(n_rows: usize) -> Self {
        FeatureMatrix { n_rows, n_cols: 0, entries: Vec::new(), column_counts: Vec::new(), atoms: Vec::new() }
    }

    /// Builds from row vectors of 0/1 values, keeping all-zero columns.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(n_rows * n_cols);
        let mut column_counts = vec![0; n_cols];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::domain(format!("row {r} has {} entries, expected {n_cols}", row.len())));
            }
            for (c, &z) in row.iter().enumerate() {
                if z > 1 {
                    return Err(Error::domain(format!("entry ({r}, {c}) is {z}, expected 0 or 1")));
                }
                column_counts[c] += z as usize;
                entries.push(z);
            }
        }
        Ok(FeatureMatrix { n_rows, n_cols, entries, column_counts, atoms: (0..n_cols).collect() })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn column_counts(&self) -> &[usize] {
        &self.column_counts
    }

    /// Source atom index of each column.
    pub fn atoms(&self) -> &[usize] {
        &self.atoms
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.entries[row * self.n_cols + col] != 0
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.entries[row * self.n_cols..(row + 1) * self.n_cols]
    }

    /// Sets an entry, keeping the column sums current.
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let e = &mut self.entries[row * self.n_cols + col];
        let old = *e != 0;
        if old != value {
            *e = value as u8;
            if value {
                self.column_counts[col] += 1;
            } else {
                self.column_counts[col] -= 1;
            }
        }
    }

    /// Drops the listed columns (indices in any order).
    pub fn remove_columns(&mut self, cols: &[usize]) {
        if cols.is_empty() {
            return;
        }
        let mut keep = vec![true; self.n_cols];
        for &c in cols {
            keep[c] = false;
        }
        let new_cols = keep.iter().filter(|&&k| k).count();
        let mut entries = Vec::with_capacity(self.n_rows * new_cols);
        for r in 0..self.n_rows {
            let row = self.row(r);
            entries.extend(row.iter().zip(&keep).filter(|(_, &k)| k).map(|(&z, _)| z));
        }
        let filter = |v: &Vec<usize>| v.iter().zip(&keep).filter(|(_, &k)| k).map(|(&x, _)| x).collect();
        self.column_counts = filter(&self.column_counts);
        self.atoms = filter(&self.atoms);
        self.entries = entries;
        self.n_cols = new_cols;
    }

    /// Indices of columns with no ones.
    pub fn empty_columns(&self) -> Vec<usize> {
        (0..self.n_cols).filter(|&c| self.column_counts[c] == 0).collect()
    }

    fn from_columns(n_rows: usize, cols: Vec<(usize, Vec<usize>)>) -> Self {
        let n_cols = cols.len();
        let mut entries = vec![0u8; n_rows * n_cols];
        let mut column_counts = Vec::with_capacity(n_cols);
        let mut atoms = Vec::with_capacity(n_cols);
        for (c, (atom, hits)) in cols.into_iter().enumerate() {
            for &r in &hits {
                entries[r * n_cols + c] = 1;
            }
            column_counts.push(hits.len());
            atoms.push(atom);
        }
        FeatureMatrix { n_rows, n_cols, entries, column_counts, atoms }
    }

    /// Rows of 0/1 under a `f1..fK` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.n_cols).map(|c| format!("f{c}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for r in 0..self.n_rows {
            let row: Vec<&str> = self.row(r).iter().map(|&z| if z == 1 { "1" } else { "0" }).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Prefix series, histogram and per-row totals of a feature matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountStats {
    /// `k_prefix[n - 1]` is the number of features seen in the first `n` rows.
    pub k_prefix: Vec<usize>,
    /// `j -> K_{N,j}`, the number of features present in exactly `j` rows.
    pub k_hist: BTreeMap<usize, usize>,
    pub row_counts: Vec<usize>,
}

impl CountStats {
    /// Long-format `section,key,value` rows for the prefix series,
    /// histogram and row counts.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "section,key,value")?;
        for (n, k) in self.k_prefix.iter().enumerate() {
            writeln!(w, "prefix,{},{k}", n + 1)?;
        }
        for (j, k) in &self.k_hist {
            writeln!(w, "hist,{j},{k}")?;
        }
        for (n, k) in self.row_counts.iter().enumerate() {
            writeln!(w, "row,{},{k}", n + 1)?;
        }
        Ok(())
    }
}

/// One Bernoulli-process draw: an independent coin per atom.
pub fn bernoulli_draw(draw: &BetaProcessDraw, stream: &mut RandomStream) -> Vec<u8> {
    draw.weights.iter().map(|&w| (stream.uniform() < w) as u8).collect()
}

/// Rows hit by an atom of weight `w` among `n` draws, by geometric skipping.
///
/// The gap before each success is `floor(ln U / ln(1 - w))`, so the cost is
/// proportional to the number of successes rather than to `n`.
fn bernoulli_hits(w: f64, n: usize, stream: &mut RandomStream, mut visit: impl FnMut(usize)) {
    if w >= 1.0 {
        (0..n).for_each(visit);
        return;
    }
    let log_fail = (-w).ln_1p();
    let mut pos = 0usize;
    loop {
        let gap = (stream.uniform().ln() / log_fail).floor();
        if !(gap < (n - pos) as f64) {
            return;
        }
        pos += gap as usize;
        visit(pos);
        pos += 1;
        if pos >= n {
            return;
        }
    }
}

/// `n` Bernoulli-process draws from `draw`, keeping represented atoms only.
pub fn bep_matrix(draw: &BetaProcessDraw, n: usize, stream: &mut RandomStream) -> FeatureMatrix {
    let mut cols = Vec::new();
    for (atom, &w) in draw.weights.iter().enumerate() {
        let mut hits = Vec::new();
        bernoulli_hits(w, n, stream, |r| hits.push(r));
        if !hits.is_empty() {
            cols.push((atom, hits));
        }
    }
    FeatureMatrix::from_columns(n, cols)
}

/// Per-row feature totals `k_n` for `n` draws, without storing the matrix.
pub fn bep_row_counts(draw: &BetaProcessDraw, n: usize, stream: &mut RandomStream) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for &w in &draw.weights {
        bernoulli_hits(w, n, stream, |r| counts[r] += 1);
    }
    counts
}

/// Draws `Z ~ BP-BeP(N)` with `rounds` stick-breaking rounds; also returns
/// the underlying beta-process draw.
pub fn bp_bep_with_draw(
    params: &BPParams,
    n: usize,
    rounds: usize,
    stream: &mut RandomStream,
) -> Result<(FeatureMatrix, BetaProcessDraw)> {
    if n == 0 {
        return Err(Error::domain("bp_bep needs at least one row"));
    }
    let draw = stick_break(params, rounds, stream)?;
    let z = bep_matrix(&draw, n, stream);
    Ok((z, draw))
}

pub fn bp_bep(params: &BPParams, n: usize, rounds: usize, stream: &mut RandomStream) -> Result<FeatureMatrix> {
    Ok(bp_bep_with_draw(params, n, rounds, stream)?.0)
}

pub fn count_stats(z: &FeatureMatrix) -> CountStats {
    let n = z.n_rows();
    let mut new_at = vec![0usize; n];
    for c in 0..z.n_cols() {
        if let Some(first) = (0..n).find(|&r| z.get(r, c)) {
            new_at[first] += 1;
        }
    }
    let mut k_prefix = Vec::with_capacity(n);
    let mut acc = 0;
    for x in new_at {
        acc += x;
        k_prefix.push(acc);
    }
    let mut k_hist = BTreeMap::new();
    for &m in z.column_counts() {
        if m > 0 {
            *k_hist.entry(m).or_insert(0) += 1;
        }
    }
    let row_counts = (0..n).map(|r| z.row(r).iter().map(|&x| x as usize).sum()).collect();
    CountStats { k_prefix, k_hist, row_counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64) -> BetaProcessDraw {
        BetaProcessDraw {
            weights: vec![w],
            log_weights: vec![w.ln()],
            rounds: vec![1],
            atom_labels: vec![0.5],
            truncation_rounds: 1,
        }
    }

    #[test]
    fn hand_matrix_stats() {
        let z = FeatureMatrix::from_rows(&[vec![1, 1], vec![0, 1]]).unwrap();
        let s = count_stats(&z);
        assert_eq!(s.k_prefix, vec![2, 2]);
        assert_eq!(s.k_hist, BTreeMap::from([(1, 1), (2, 1)]));
        assert_eq!(s.row_counts, vec![2, 1]);
    }

    #[test]
    fn all_ones_column() {
        let rows = vec![vec![1u8]; 7];
        let s = count_stats(&FeatureMatrix::from_rows(&rows).unwrap());
        assert_eq!(s.k_hist, BTreeMap::from([(7, 1)]));
        assert_eq!(s.k_prefix, vec![1; 7]);
    }

    #[test]
    fn random_matrix_double_counting() {
        let mut s = RandomStream::from_seed(21);
        let rows: Vec<Vec<u8>> =
            (0..50).map(|_| (0..13).map(|_| (s.uniform() < 0.3) as u8).collect()).collect();
        let z = FeatureMatrix::from_rows(&rows).unwrap();
        let st = count_stats(&z);
        let lhs: usize = st.k_hist.iter().map(|(j, k)| j * k).sum();
        let brute: usize = rows.iter().flatten().map(|&x| x as usize).sum();
        assert_eq!(lhs, brute);
        assert_eq!(st.row_counts.iter().sum::<usize>(), brute);
        assert!(st.k_prefix.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_ragged_or_nonbinary_rows() {
        assert!(FeatureMatrix::from_rows(&[vec![1, 0], vec![1]]).is_err());
        assert!(FeatureMatrix::from_rows(&[vec![2]]).is_err());
    }

    #[test]
    fn set_and_remove_keep_counts() {
        let mut z = FeatureMatrix::from_rows(&[vec![1, 0, 1], vec![0, 0, 1]]).unwrap();
        z.set(1, 0, true);
        z.set(0, 2, false);
        assert_eq!(z.column_counts(), &[2, 0, 1]);
        assert_eq!(z.empty_columns(), vec![1]);
        z.remove_columns(&[1]);
        assert_eq!(z.n_cols(), 2);
        assert_eq!(z.row(0), &[1, 0]);
        assert_eq!(z.row(1), &[1, 1]);
        assert_eq!(z.atoms(), &[0, 2]);
    }

    #[test]
    fn near_one_weight_success_rate() {
        let eps = 0.01;
        let d = single(1.0 - eps);
        let mut s = RandomStream::from_seed(22);
        let n = 10_000;
        let hits: usize = (0..n).map(|_| bernoulli_draw(&d, &mut s)[0] as usize).sum();
        let sd = (eps * (1.0 - eps) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - (1.0 - eps)).abs() < 3.0 * sd);
    }

    #[test]
    fn geometric_skipping_matches_bernoulli_rate() {
        let mut s = RandomStream::from_seed(23);
        for &w in &[0.003, 0.2, 0.9] {
            let n = 200_000;
            let c = bep_row_counts(&single(w), n, &mut s).iter().sum::<u32>() as f64;
            let sd = (n as f64 * w * (1.0 - w)).sqrt();
            assert!((c - n as f64 * w).abs() < 4.0 * sd, "w = {w}: {c}");
        }
        let z = bep_matrix(&single(f64::MIN_POSITIVE), 1000, &mut s);
        assert_eq!(z.n_cols(), 0);
    }

    #[test]
    fn single_row_matrix() {
        let q = BPParams::new(3.0, 1.0, 0.3).unwrap();
        let mut s = RandomStream::from_seed(24);
        for _ in 0..20 {
            let z = bp_bep(&q, 1, 200, &mut s).unwrap();
            assert!(z.column_counts().iter().all(|&c| c == 1));
            assert_eq!(count_stats(&z).row_counts, vec![z.n_cols()]);
        }
        assert!(bp_bep(&q, 0, 10, &mut s).is_err());
    }

    #[test]
    fn conditional_mean_row_count_is_total_mass() {
        let q = BPParams::new(3.0, 1.0, 0.3).unwrap();
        let mut s = RandomStream::from_seed(25);
        let draw = stick_break(&q, 300, &mut s).unwrap();
        let n = 5000;
        let counts = bep_row_counts(&draw, n, &mut s);
        let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n as f64;
        let var: f64 = draw.weights.iter().map(|w| w * (1.0 - w)).sum();
        let se = (var / n as f64).sqrt();
        assert!((mean - draw.total_mass()).abs() < 5.0 * se, "{mean} vs {}", draw.total_mass());
    }

    #[test]
    fn matrix_columns_follow_atom_order() {
        let q = BPParams::new(3.0, 1.0, 0.0).unwrap();
        let mut s = RandomStream::from_seed(26);
        let (z, d) = bp_bep_with_draw(&q, 100, 500, &mut s).unwrap();
        assert!(z.atoms().windows(2).all(|a| a[0] < a[1]));
        assert!(z.column_counts().iter().all(|&c| c >= 1));
        assert!(z.atoms().iter().all(|&a| a < d.len()));
    }

    #[test]
    fn csv_layouts() {
        let z = FeatureMatrix::from_rows(&[vec![1, 1], vec![0, 1]]).unwrap();
        let mut buf = Vec::new();
        z.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "f1,f2\n1,1\n0,1\n");
        let mut buf = Vec::new();
        count_stats(&z).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("section,key,value\nprefix,1,2\nprefix,2,2\nhist,1,1\nhist,2,1\nrow,1,2\n"));
    }
}
