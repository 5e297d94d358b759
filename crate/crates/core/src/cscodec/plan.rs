//! Space/time observation operators.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from;
use crate::{Error, Result};

/// Distribution of the entries of a dense random plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryDistribution {
    /// Uniform on `[0, 1)`.
    #[default]
    Uniform01,
    /// Uniform on `[-1, 1)`.
    UniformSymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingMode {
    /// Observe the entries at the selected (node, interval) pairs.
    SubsetSelection {
        nodes: Vec<usize>,
        intervals: Vec<usize>,
    },
    /// Row-major `m x n` matrices with random entries.
    DenseRandom {
        distribution: EntryDistribution,
        phi_space: Vec<f64>,
        phi_time: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub n_s: usize,
    pub n_t: usize,
    pub m_s: usize,
    pub m_t: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub mode: SamplingMode,
}

fn check_dims(n_s: usize, n_t: usize, m_s: usize, m_t: usize) -> Result<()> {
    if m_s > n_s || m_t > n_t {
        return Err(Error::InvalidParameter(format!(
            "plan {m_s}x{m_t} exceeds field {n_s}x{n_t}"
        )));
    }
    Ok(())
}

impl SamplingPlan {
    /// `m_s` distinct nodes and `m_t` distinct intervals drawn uniformly.
    pub fn random_subset(
        n_s: usize,
        n_t: usize,
        m_s: usize,
        m_t: usize,
        seed: u64,
    ) -> Result<Self> {
        check_dims(n_s, n_t, m_s, m_t)?;
        let mut rng = rng_from(seed, &[0x9a]);
        let mut nodes = sample(&mut rng, n_s, m_s).into_vec();
        let mut intervals = sample(&mut rng, n_t, m_t).into_vec();
        nodes.sort_unstable();
        intervals.sort_unstable();
        Ok(Self {
            n_s,
            n_t,
            m_s,
            m_t,
            seed,
            mode: SamplingMode::SubsetSelection { nodes, intervals },
        })
    }

    pub fn subset(
        n_s: usize,
        n_t: usize,
        nodes: Vec<usize>,
        intervals: Vec<usize>,
    ) -> Result<Self> {
        let distinct = |v: &[usize], n: usize| {
            let mut s = v.to_vec();
            s.sort_unstable();
            s.dedup();
            s.len() == v.len() && v.iter().all(|&i| i < n)
        };
        if !distinct(&nodes, n_s) || !distinct(&intervals, n_t) {
            return Err(Error::InvalidParameter(
                "subset indices must be distinct and in range".into(),
            ));
        }
        check_dims(n_s, n_t, nodes.len(), intervals.len())?;
        Ok(Self {
            n_s,
            n_t,
            m_s: nodes.len(),
            m_t: intervals.len(),
            seed: 0,
            mode: SamplingMode::SubsetSelection { nodes, intervals },
        })
    }

    /// Every entry observed.
    pub fn full(n_s: usize, n_t: usize) -> Self {
        Self::subset(n_s, n_t, (0..n_s).collect(), (0..n_t).collect())
            .expect("identity plan is valid")
    }

    pub fn dense_random(
        n_s: usize,
        n_t: usize,
        m_s: usize,
        m_t: usize,
        distribution: EntryDistribution,
        seed: u64,
    ) -> Result<Self> {
        check_dims(n_s, n_t, m_s, m_t)?;
        let mut rng = rng_from(seed, &[0xd5]);
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| match distribution {
                    EntryDistribution::Uniform01 => rng.gen::<f64>(),
                    EntryDistribution::UniformSymmetric => rng.gen_range(-1.0..1.0),
                })
                .collect()
        };
        let phi_space = draw(m_s * n_s);
        let phi_time = draw(m_t * n_t);
        Ok(Self {
            n_s,
            n_t,
            m_s,
            m_t,
            seed,
            mode: SamplingMode::DenseRandom {
                distribution,
                phi_space,
                phi_time,
            },
        })
    }

    /// Total number of observations `M = m_S m_T`.
    pub fn measurements(&self) -> usize {
        self.m_s * self.m_t
    }

    pub fn is_subset(&self) -> bool {
        matches!(self.mode, SamplingMode::SubsetSelection { .. })
    }

    /// `Phi_S`, `m_S x n_S`.
    pub fn phi_space(&self) -> DMatrix<f64> {
        match &self.mode {
            SamplingMode::SubsetSelection { nodes, .. } => selection(nodes, self.n_s),
            SamplingMode::DenseRandom { phi_space, .. } => {
                DMatrix::from_row_slice(self.m_s, self.n_s, phi_space)
            }
        }
    }

    /// `Phi_T`, `m_T x n_T`.
    pub fn phi_time(&self) -> DMatrix<f64> {
        match &self.mode {
            SamplingMode::SubsetSelection { intervals, .. } => selection(intervals, self.n_t),
            SamplingMode::DenseRandom { phi_time, .. } => {
                DMatrix::from_row_slice(self.m_t, self.n_t, phi_time)
            }
        }
    }

    pub(crate) fn check_field(&self, rows: usize, cols: usize) -> Result<()> {
        if rows != self.n_s || cols != self.n_t {
            return Err(Error::DimensionMismatch(format!(
                "plan for {}x{} applied to {rows}x{cols}",
                self.n_s, self.n_t
            )));
        }
        Ok(())
    }

    pub(crate) fn check_observation(&self, y: &DMatrix<f64>) -> Result<()> {
        if y.shape() != (self.m_s, self.m_t) {
            return Err(Error::DimensionMismatch(format!(
                "observation {}x{} against plan {}x{}",
                y.nrows(),
                y.ncols(),
                self.m_s,
                self.m_t
            )));
        }
        Ok(())
    }
}

fn selection(idx: &[usize], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(idx.len(), n);
    for (r, &c) in idx.iter().enumerate() {
        m[(r, c)] = 1.0;
    }
    m
}

/// `Y = Phi_S Z Phi_T^T`.
pub fn observe(z: &DMatrix<f64>, plan: &SamplingPlan) -> Result<DMatrix<f64>> {
    plan.check_field(z.nrows(), z.ncols())?;
    Ok(match &plan.mode {
        SamplingMode::SubsetSelection { nodes, intervals } => {
            DMatrix::from_fn(nodes.len(), intervals.len(), |i, j| {
                z[(nodes[i], intervals[j])]
            })
        }
        SamplingMode::DenseRandom { .. } => plan.phi_space() * z * plan.phi_time().transpose(),
    })
}

/// Row-stacking vectorization: entry `(i, j)` lands at `i * ncols + j`.
pub fn vectorize(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut v = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &[f64], rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {rows}x{cols} matrix",
            v.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, v))
}

/// Writes `y` as CSV. The header row carries the observed interval indices
/// and the first column the observed node indices; dense plans use ordinal
/// row/column numbers.
pub fn write_observations<W: Write>(y: &DMatrix<f64>, plan: &SamplingPlan, out: W) -> Result<()> {
    plan.check_observation(y)?;
    let (rows, cols): (Vec<usize>, Vec<usize>) = match &plan.mode {
        SamplingMode::SubsetSelection { nodes, intervals } => (nodes.clone(), intervals.clone()),
        SamplingMode::DenseRandom { .. } => ((0..plan.m_s).collect(), (0..plan.m_t).collect()),
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["node\\ri".to_string()];
    header.extend(cols.iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    for (i, r) in rows.iter().enumerate() {
        let mut rec = vec![r.to_string()];
        rec.extend((0..plan.m_t).map(|j| format!("{:e}", y[(i, j)])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_observations`]: returns the node indices,
/// the interval indices and the matrix.
pub fn read_observations<R: BufRead>(input: R) -> Result<(Vec<usize>, Vec<usize>, DMatrix<f64>)> {
    let mut rd = csv::Reader::from_reader(input);
    let parse_idx = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("index {s:?}: {e}")))
    };
    let cols = rd
        .headers()?
        .iter()
        .skip(1)
        .map(parse_idx)
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() != cols.len() + 1 {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected {}",
                line + 2,
                rec.len(),
                cols.len() + 1
            )));
        }
        rows.push(parse_idx(&rec[0])?);
        for f in rec.iter().skip(1) {
            values.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))?,
            );
        }
    }
    let y = DMatrix::from_row_slice(rows.len(), cols.len(), &values);
    Ok((rows, cols, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |i, j| (10 * i + j) as f64)
    }

    #[test]
    fn identity_plan_returns_field() {
        let z = ramp(4, 8);
        assert_eq!(observe(&z, &SamplingPlan::full(4, 8)).unwrap(), z);
    }

    #[test]
    fn subset_selects_entries() {
        let z = ramp(4, 4);
        let plan = SamplingPlan::subset(4, 4, vec![0, 2], vec![1]).unwrap();
        let y = observe(&z, &plan).unwrap();
        assert_eq!(y, DMatrix::from_row_slice(2, 1, &[z[(0, 1)], z[(2, 1)]]));
        assert!(SamplingPlan::subset(4, 4, vec![1, 1], vec![0]).is_err());
        assert!(SamplingPlan::subset(4, 4, vec![4], vec![0]).is_err());
    }

    #[test]
    fn random_subset_rows_are_distinct_unit_rows() {
        let plan = SamplingPlan::random_subset(32, 64, 10, 20, 3).unwrap();
        for phi in [plan.phi_space(), plan.phi_time()] {
            let mut seen = std::collections::HashSet::new();
            for r in phi.row_iter() {
                assert_eq!(r.iter().filter(|&&v| v == 1.0).count(), 1);
                assert_eq!(r.iter().filter(|&&v| v == 0.0).count(), r.len() - 1);
                assert!(seen.insert(r.iter().position(|&v| v == 1.0)));
            }
        }
        assert!(SamplingPlan::random_subset(4, 4, 5, 1, 0).is_err());
    }

    #[test]
    fn kronecker_form_matches_matrix_form() {
        let z = DMatrix::from_fn(8, 16, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        for dist in [
            EntryDistribution::Uniform01,
            EntryDistribution::UniformSymmetric,
        ] {
            let plan = SamplingPlan::dense_random(8, 16, 5, 6, dist, 21).unwrap();
            let y = observe(&z, &plan).unwrap();
            let k = plan.phi_space().kronecker(&plan.phi_time());
            let vy = k * nalgebra::DVector::from_vec(vectorize(&z));
            for (a, b) in vectorize(&y).iter().zip(vy.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
        let sub = SamplingPlan::random_subset(8, 16, 3, 5, 2).unwrap();
        let k = sub.phi_space().kronecker(&sub.phi_time());
        let vy = k * nalgebra::DVector::from_vec(vectorize(&z));
        assert_eq!(vectorize(&observe(&z, &sub).unwrap()), vy.as_slice());
    }

    #[test]
    fn uniform01_entries_are_nonnegative() {
        let plan =
            SamplingPlan::dense_random(16, 16, 8, 8, EntryDistribution::Uniform01, 1).unwrap();
        assert!(plan.phi_space().iter().all(|&v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn plan_serializes_round_trip() {
        for plan in [
            SamplingPlan::random_subset(16, 32, 4, 9, 5).unwrap(),
            SamplingPlan::dense_random(4, 4, 2, 3, EntryDistribution::UniformSymmetric, 6).unwrap(),
        ] {
            let text = serde_json::to_string(&plan).unwrap();
            assert_eq!(serde_json::from_str::<SamplingPlan>(&text).unwrap(), plan);
        }
    }

    #[test]
    fn observation_csv_round_trip() {
        let z = ramp(8, 8);
        let plan = SamplingPlan::random_subset(8, 8, 3, 4, 12).unwrap();
        let y = observe(&z, &plan).unwrap();
        let mut buf = Vec::new();
        write_observations(&y, &plan, &mut buf).unwrap();
        let (rows, cols, back) = read_observations(buf.as_slice()).unwrap();
        assert_eq!(back, y);
        if let SamplingMode::SubsetSelection { nodes, intervals } = &plan.mode {
            assert_eq!((&rows, &cols), (nodes, intervals));
        }
        assert!(read_observations("a,1\n0,x\n".as_bytes()).is_err());
    }

    #[test]
    fn vectorization_round_trip() {
        let z = ramp(3, 5);
        assert_eq!(unvectorize(&vectorize(&z), 3, 5).unwrap(), z);
        assert_eq!(vectorize(&z)[7], z[(1, 2)]);
    }
}
