use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::series::{Ar1Model, Harmonic, HarmonicModel, SeriesModel};
use super::spatial::{correlate_nodes, SpatialCorrelation};
use super::wind::{wind_power, WindTurbineCurve};
use crate::rng::rng_from;
use crate::{Error, Result};

/// Injected power `Z` (kW): rows are nodes, columns are reporting intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct DataField {
    pub values: DMatrix<f64>,
    pub ri_minutes: f64,
    pub seed: Option<u64>,
}

impl DataField {
    pub fn new(values: DMatrix<f64>, ri_minutes: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "field entries must be finite".into(),
            ));
        }
        if !(ri_minutes > 0.0) {
            return Err(Error::InvalidParameter("ri_minutes must be > 0".into()));
        }
        Ok(Self {
            values,
            ri_minutes,
            seed: None,
        })
    }

    pub fn n_s(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.values.ncols()
    }

    /// CSV with a `# n_s=..,n_t=..,ri_minutes=..,seed=..` header line.
    /// Reading skips any other `#` lines before it.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let seed = self
            .seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        writeln!(
            out,
            "# n_s={},n_t={},ri_minutes={},seed={}",
            self.n_s(),
            self.n_t(),
            self.ri_minutes,
            seed
        )?;
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        for row in self.values.row_iter() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self> {
        // other leading comment lines are ignored
        let mut header = String::new();
        loop {
            header.clear();
            if input.read_line(&mut header)? == 0 || !header.starts_with('#') {
                return Err(Error::Parse("missing '# n_s=..' header line".into()));
            }
            if header.contains("n_s=") {
                break;
            }
        }
        let meta = header.trim().trim_start_matches('#');
        let (mut n_s, mut n_t, mut ri, mut seed) = (None, None, None, None);
        for kv in meta.split(',') {
            let (k, v) = kv
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header entry '{kv}'")))?;
            let bad = |_| Error::Parse(format!("bad value for {k}: '{v}'"));
            match k {
                "n_s" => n_s = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "n_t" => n_t = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "ri_minutes" => ri = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "seed" => {
                    seed = if v == "none" {
                        None
                    } else {
                        Some(v.parse::<u64>().map_err(|e| bad(e.to_string()))?)
                    }
                }
                _ => return Err(Error::Parse(format!("unknown header key '{k}'"))),
            }
        }
        let (n_s, n_t) = n_s
            .zip(n_t)
            .ok_or_else(|| Error::Parse("header lacks n_s or n_t".into()))?;
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(input);
        let mut data = Vec::with_capacity(n_s * n_t);
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != n_t {
                return Err(Error::DimensionMismatch(format!(
                    "row {rows} has {} columns, expected {n_t}",
                    rec.len()
                )));
            }
            for f in rec.iter() {
                data.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("row {rows}: bad number '{f}'")))?,
                );
            }
            rows += 1;
        }
        if rows != n_s {
            return Err(Error::DimensionMismatch(format!(
                "{rows} rows, header says {n_s}"
            )));
        }
        let mut f = Self::new(DMatrix::from_row_slice(n_s, n_t, &data), ri.unwrap_or(5.0))?;
        f.seed = seed;
        Ok(f)
    }
}

/// Per-node load realization (kW), starting at interval-of-day `t0`.
pub(crate) fn load_matrix(n_t: usize, load: &[SeriesModel], seed: u64, t0: u64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(load.len(), n_t);
    for (i, model) in load.iter().enumerate() {
        let mut rng = rng_from(seed, &[LOAD, i as u64]);
        let e: Vec<f64> = (0..=n_t).map(|_| rng.sample(StandardNormal)).collect();
        for (j, v) in model.realize(&e, t0).into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    m
}

const LOAD: u64 = 1;
const WIND: u64 = 2;
const SITES: u64 = 3;
const START: u64 = 4;

/// Where generators sit among the node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// One contiguous (cyclic) run of node indices at a random offset.
    #[default]
    Clustered,
    /// Uniformly random subset.
    Scattered,
}

/// Nodes that host a generator: exactly `round(wind_fraction * n_s)` of them.
pub fn generator_nodes(
    n_s: usize,
    wind_fraction: f64,
    placement: Placement,
    seed: u64,
) -> Vec<usize> {
    let k = ((wind_fraction * n_s as f64).round() as usize).min(n_s);
    let mut rng = rng_from(seed, &[SITES]);
    let mut nodes = match placement {
        Placement::Scattered => sample(&mut rng, n_s, k).into_vec(),
        Placement::Clustered => {
            let start = if n_s > 0 { rng.gen_range(0..n_s) } else { 0 };
            (0..k).map(|i| (start + i) % n_s).collect()
        }
    };
    nodes.sort_unstable();
    nodes
}

/// `S = S_g - S_l` per node, generation present at a `wind_fraction` of nodes
/// placed as one cluster.
///
/// Wind speeds follow their own series models with innovations correlated
/// across generator nodes; `corr` covers all `n_s` nodes and is restricted to
/// the generator subset.
#[allow(clippy::too_many_arguments)]
pub fn gen_field(
    n_s: usize,
    n_t: usize,
    load_models: &[SeriesModel],
    wind_models: &[SeriesModel],
    curve: &WindTurbineCurve,
    corr: &SpatialCorrelation,
    wind_fraction: f64,
    seed: u64,
) -> Result<DataField> {
    gen_field_with(
        n_s,
        n_t,
        load_models,
        wind_models,
        curve,
        corr,
        wind_fraction,
        Placement::Clustered,
        seed,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn gen_field_with(
    n_s: usize,
    n_t: usize,
    load_models: &[SeriesModel],
    wind_models: &[SeriesModel],
    curve: &WindTurbineCurve,
    corr: &SpatialCorrelation,
    wind_fraction: f64,
    placement: Placement,
    seed: u64,
) -> Result<DataField> {
    if n_s == 0 || n_t == 0 {
        return Err(Error::InvalidParameter(
            "field dimensions must be >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&wind_fraction) {
        return Err(Error::InvalidParameter(format!(
            "wind fraction {wind_fraction} outside [0, 1]"
        )));
    }
    if load_models.len() != n_s || wind_models.len() != n_s || corr.len() != n_s {
        return Err(Error::DimensionMismatch(format!(
            "{} load models, {} wind models and {} correlated sites for {n_s} nodes",
            load_models.len(),
            wind_models.len(),
            corr.len()
        )));
    }
    for m in load_models.iter().chain(wind_models) {
        m.validate()?;
    }
    let period = load_models[0].harmonic.period as u64;
    let t0 = rng_from(seed, &[START]).gen_range(0..period);
    let mut z = -load_matrix(n_t, load_models, seed, t0);
    let gens = generator_nodes(n_s, wind_fraction, placement, seed);
    if !gens.is_empty() {
        let mut rng = rng_from(seed, &[WIND]);
        let e = DMatrix::from_fn(gens.len(), n_t + 1, |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        let e = correlate_nodes(&e, &corr.restrict(&gens))?;
        for (r, &i) in gens.iter().enumerate() {
            let innov: Vec<f64> = e.row(r).iter().copied().collect();
            let speed = wind_models[i].realize(&innov, t0);
            for (j, v) in speed.into_iter().enumerate() {
                z[(i, j)] += wind_power(v.max(0.0), curve);
            }
        }
    }
    let mut f = DataField::new(z, 5.0)?;
    f.seed = Some(seed);
    Ok(f)
}

/// Population-level series parameters; each node perturbs the level and
/// harmonic amplitudes by a uniform factor in `[1 - jitter, 1 + jitter]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodePopulation {
    pub chi0: f64,
    pub harmonics: Vec<Harmonic>,
    pub phi: Vec<f64>,
    pub noise_scale: f64,
    pub jitter: f64,
}

impl NodePopulation {
    fn draw<R: Rng>(&self, period: u32, rng: &mut R) -> SeriesModel {
        let mut f = || 1.0 + self.jitter * rng.gen_range(-1.0..=1.0);
        let chi0 = self.chi0 * f();
        let harmonics = self.harmonics.iter().map(|h| {
            let g = f();
            Harmonic {
                k: h.k,
                re: h.re * g,
                im: h.im * g,
            }
        });
        SeriesModel {
            harmonic: HarmonicModel {
                chi0,
                harmonics: harmonics.collect(),
                period,
            },
            ar1: Ar1Model {
                phi: self.phi.clone(),
                noise_scale: self.noise_scale,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationConfig {
    /// km
    pub d_scale: f64,
    /// Sites are scattered so that pairwise distances fall in `(0, span_km]`.
    pub span_km: f64,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            d_scale: 20.0,
            span_km: 1.0,
        }
    }
}

/// Everything needed to draw synthetic fields of any size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub period: u32,
    pub ri_minutes: f64,
    pub wind_fraction: f64,
    pub placement: Placement,
    /// Load (kW).
    pub load: NodePopulation,
    /// Wind speed (m/s).
    pub wind: NodePopulation,
    pub curve: WindTurbineCurve,
    pub correlation: CorrelationConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            period: 288,
            ri_minutes: 5.0,
            wind_fraction: 0.5,
            placement: Placement::Clustered,
            load: NodePopulation {
                chi0: 1.0,
                harmonics: vec![
                    Harmonic {
                        k: 1,
                        re: -0.25,
                        im: -0.2,
                    },
                    Harmonic {
                        k: 2,
                        re: 0.1,
                        im: -0.08,
                    },
                    Harmonic {
                        k: 3,
                        re: 0.04,
                        im: 0.03,
                    },
                ],
                phi: vec![0.9],
                noise_scale: 0.05,
                jitter: 0.03,
            },
            wind: NodePopulation {
                chi0: 8.0,
                harmonics: vec![Harmonic {
                    k: 1,
                    re: 1.2,
                    im: 0.6,
                }],
                phi: vec![0.6],
                noise_scale: 1.5,
                jitter: 0.05,
            },
            curve: WindTurbineCurve::default(),
            correlation: CorrelationConfig::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 || !(self.ri_minutes > 0.0) {
            return Err(Error::InvalidParameter(
                "period and ri_minutes must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.wind_fraction) {
            return Err(Error::InvalidParameter(
                "wind_fraction must lie in [0, 1]".into(),
            ));
        }
        for p in [&self.load, &self.wind] {
            if !(0.0..1.0).contains(&p.jitter) {
                return Err(Error::InvalidParameter("jitter must lie in [0, 1)".into()));
            }
            p.draw(self.period, &mut rng_from(0, &[])).validate()?;
        }
        if !(self.correlation.d_scale > 0.0 && self.correlation.span_km > 0.0) {
            return Err(Error::InvalidParameter(
                "correlation d_scale and span_km must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Per-node load and wind models plus site correlation for `n_s` nodes.
    pub fn node_models(
        &self,
        n_s: usize,
        seed: u64,
    ) -> Result<(Vec<SeriesModel>, Vec<SeriesModel>, SpatialCorrelation)> {
        self.validate()?;
        let mut rng = rng_from(seed, &[0x40de]);
        let load = (0..n_s)
            .map(|_| self.load.draw(self.period, &mut rng))
            .collect();
        let wind = (0..n_s)
            .map(|_| self.wind.draw(self.period, &mut rng))
            .collect();
        let corr = SpatialCorrelation::random_sites(
            n_s,
            self.correlation.d_scale,
            self.correlation.span_km,
            crate::rng::derive_seed(seed, &[0x5173]),
        )?;
        Ok((load, wind, corr))
    }

    /// Fresh node population and realization for `seed`.
    pub fn generate(&self, n_s: usize, n_t: usize, seed: u64) -> Result<DataField> {
        let (load, wind, corr) = self.node_models(n_s, seed)?;
        let mut f = gen_field_with(
            n_s,
            n_t,
            &load,
            &wind,
            &self.curve,
            &corr,
            self.wind_fraction,
            self.placement,
            seed,
        )?;
        f.ri_minutes = self.ri_minutes;
        Ok(f)
    }
}
