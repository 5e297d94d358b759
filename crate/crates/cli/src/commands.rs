use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use csmac_core::calibrate::{calibrate_full, CalibrationSpec};
use csmac_core::macmodel::{mix_participation, MacAnalytics, MacConfig};
use csmac_core::optimizer::{
    channels_required, max_group_size, optimize_mac, optimize_partial, scheme_delay, tdma_delay,
    BandwidthScenario, Optimum, Pinned, Scheme,
};
use csmac_core::rng::derive_seed;
use csmac_core::simulator::{run_campaign, run_ri, run_saturated, CampaignConfig, SimConfig};
use csmac_core::Error as CoreError;

use crate::config::ScenarioConfig;
use crate::error::Invalid;
use crate::output::{cell, num, Output};

fn analytics(cfg: &ScenarioConfig) -> MacAnalytics {
    MacAnalytics::with_model(cfg.timing, cfg.energy, cfg.model)
}

fn sim_config(cfg: &ScenarioConfig) -> SimConfig {
    SimConfig {
        timing: cfg.timing,
        energy: cfg.energy,
        options: cfg.simulation.options.clone(),
    }
}

/// `Ok(None)` when the requirement cannot be met inside the search space.
fn feasible(r: csmac_core::Result<Optimum>) -> Result<Option<Optimum>> {
    match r {
        Ok(o) => Ok(Some(o)),
        Err(CoreError::NoFeasibleConfig { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn p_axis(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

fn bo_string(bo: &[u32]) -> String {
    bo.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

pub fn generate(cfg: &ScenarioConfig, out: &Output) -> Result<()> {
    let f = &cfg.field;
    let field = f
        .generator
        .generate(f.n_s, f.n_t, cfg.seed)
        .context("generating field")?;
    out.write_with("field.csv", |w| field.write_csv(w))?;
    Ok(())
}

pub fn calibrate(cfg: &ScenarioConfig, out: &Output) -> Result<()> {
    let spec = CalibrationSpec {
        seed: derive_seed(cfg.seed, &[cfg.calibration.seed]),
        ..cfg.calibration.clone()
    };
    if spec.trials == 1 {
        log::warn!("calibration.trials = 1: success rates will have very wide variance");
    }
    if spec.grid.is_none() {
        log::info!(
            "calibration.grid not set; using the default grid ({} points)",
            spec.default_grid().len()
        );
    }
    let gen = cfg.field.generator.clone();
    let source =
        move |n_s: usize, n_t: usize, seed: u64| gen.generate(n_s, n_t, seed).map(|f| f.values);
    let c = calibrate_full(&spec, &source).context("calibrating")?;
    let s = &c.summary;
    out.table(
        "calibration_summary.csv",
        &[
            "n_s",
            "n_t",
            "m_s_thresh",
            "m_t_thresh",
            "m_thresh",
            "ratio",
            "m_s",
            "m_t",
        ],
        &[vec![
            s.n_s.to_string(),
            s.n_t.to_string(),
            s.m_s_thresh.to_string(),
            s.m_t_thresh.to_string(),
            s.m_thresh.to_string(),
            s.ratio.to_string(),
            s.m_s.to_string(),
            s.m_t.to_string(),
        ]],
    )?;
    for curve in [&c.space, &c.time, &c.joint] {
        out.write_with(&format!("curve_{}.csv", curve.mode.name()), |w| {
            curve.write_csv(w)
        })?;
    }
    log::info!(
        "(m_S, m_T) = ({}, {}) for a {}x{} field",
        s.m_s,
        s.m_t,
        s.n_s,
        s.n_t
    );
    Ok(())
}

pub fn analyze(cfg: &ScenarioConfig, out: &Output) -> Result<()> {
    let a = analytics(cfg);
    let m = &cfg.mac;

    let mac = MacConfig::uniform(m.k_tau, m.bo, 0.0, &cfg.timing)?;
    let profile = a.sufficiency_profile(m.n_s, m.m_s, &mac.bo)?;
    let rows: Vec<Vec<String>> = p_axis(m.p_axis_step)
        .into_iter()
        .map(|p| vec![p.to_string(), num(mix_participation(&profile, p))])
        .collect();
    out.table("pr_vs_ps.csv", &["p_s", "probability"], &rows)?;

    let rows = (1..=cfg.timing.k_tau_max)
        .into_par_iter()
        .map(|k| {
            let bo = vec![m.k_tau_sweep_bo; k as usize];
            let profile = a.sufficiency_profile(m.n_s, m.m_s, &bo)?;
            let (p, v) = p_axis(0.01)
                .into_iter()
                .map(|p| (p, mix_participation(&profile, p)))
                .fold(
                    (0.0, f64::NEG_INFINITY),
                    |b, x| if x.1 > b.1 { x } else { b },
                );
            Ok(vec![k.to_string(), p.to_string(), num(v)])
        })
        .collect::<Result<Vec<_>>>()?;
    out.table(
        "pr_vs_ktau.csv",
        &["k_tau", "p_s_best", "max_probability"],
        &rows,
    )?;

    let sw = &cfg.sweep;
    let rows = sw
        .n_s_values
        .par_iter()
        .map(|&n| {
            let m_s = sw.sampling.m_s(n);
            let row = match feasible(optimize_mac(&a, n, m_s, m.p_suff, &m.search))? {
                Some(o) => {
                    let e = a.expected_energy_ri(&o.config, n, m_s)?;
                    vec![
                        n.to_string(),
                        m_s.to_string(),
                        bo_string(&o.config.bo),
                        o.config.p_s.to_string(),
                        e.to_string(),
                        (e * f64::from(sw.m_t)).to_string(),
                    ]
                }
                None => vec![
                    n.to_string(),
                    m_s.to_string(),
                    String::new(),
                    String::new(),
                    cell::<f64>(None),
                    cell::<f64>(None),
                ],
            };
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    out.table(
        "energy_vs_ns.csv",
        &["n_s", "m_s", "bo", "p_s", "energy_ri_uj", "energy_field_uj"],
        &rows,
    )?;
    Ok(())
}

pub fn optimize(cfg: &ScenarioConfig, out: &Output) -> Result<()> {
    let a = analytics(cfg);
    let m = &cfg.mac;
    let sw = &cfg.sweep;

    let rows = sw
        .n_s_values
        .par_iter()
        .map(|&n| {
            let m_s = sw.sampling.m_s(n);
            let mut row = vec![n.to_string(), m_s.to_string()];
            for scheme in Scheme::ALL {
                row.push(cell(scheme_delay(
                    scheme,
                    n,
                    &a,
                    &sw.sampling,
                    m.p_suff,
                    &m.search,
                )?));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    out.table(
        "delay_vs_ns.csv",
        &["n_s", "m_s", "tdma", "csma", "tdma_cs", "csma_cs"],
        &reorder(rows),
    )?;

    let rows = sw
        .p_err_values
        .par_iter()
        .map(|&p_err| {
            let o = feasible(optimize_mac(&a, m.n_s, m.m_s, 1.0 - p_err, &m.search))?;
            Ok(vec![
                p_err.to_string(),
                cell(o.as_ref().map(|o| o.config.delay)),
                o.as_ref()
                    .map_or_else(String::new, |o| bo_string(&o.config.bo)),
                o.as_ref()
                    .map_or_else(String::new, |o| o.config.p_s.to_string()),
                tdma_delay(m.n_s, &cfg.timing, false, m.m_s).to_string(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    out.table(
        "delay_vs_perr.csv",
        &["p_err", "csma_cs", "bo", "p_s", "tdma"],
        &rows,
    )?;

    let rows = sw
        .n_s_values
        .par_iter()
        .map(|&n| {
            let m_s = sw.sampling.m_s(n);
            let full = feasible(optimize_mac(&a, n, m_s, m.p_suff, &m.search))?;
            let bo = feasible(optimize_partial(
                &a,
                n,
                m_s,
                m.p_suff,
                Pinned::Bo(sw.partial_bo),
                &m.search,
            ))?;
            let ps = feasible(optimize_partial(
                &a,
                n,
                m_s,
                m.p_suff,
                Pinned::PS(sw.partial_p_s),
                &m.search,
            ))?;
            let d = |o: &Option<Optimum>| cell(o.as_ref().map(|o| o.config.delay));
            Ok(vec![
                n.to_string(),
                m_s.to_string(),
                d(&full),
                d(&bo),
                d(&ps),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    out.table(
        "partial_vs_full.csv",
        &["n_s", "m_s", "full", "bo_fixed", "p_s_fixed"],
        &rows,
    )?;

    let groups = sw
        .target_delays
        .par_iter()
        .map(|&d| {
            let g = |s| match max_group_size(s, d, &a, &sw.sampling, m.p_suff, &m.search) {
                Ok(n) => Ok(Some(n)),
                Err(CoreError::Infeasible(_)) => Ok(None),
                Err(e) => Err(e),
            };
            Ok((d, g(Scheme::Tdma)?, g(Scheme::CsmaCs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = groups
        .iter()
        .map(|&(d, t, c)| vec![d.to_string(), cell(t), cell(c)])
        .collect();
    out.table(
        "group_sizes.csv",
        &["target_delay", "tdma", "csma_cs"],
        &rows,
    )?;

    let channels = |n_total: u32, tdma: u32, csma: u32| {
        channels_required(&BandwidthScenario {
            n_total,
            n_s_tdma: tdma,
            n_s_csma_cs: csma,
            m_t: sw.m_t,
            n_t: sw.n_t,
        })
    };
    let [gt, gc] = sw.group_sizes;
    let mut rows = Vec::new();
    for &n in &sw.n_total_values {
        let (t, c) = channels(n, gt, gc)?;
        rows.push(vec![n.to_string(), t.to_string(), c.to_string()]);
    }
    out.table("channels_vs_n.csv", &["n_total", "tdma", "csma_cs"], &rows)?;

    let mut rows = Vec::new();
    for &n in &sw.n_total_values {
        for &g in &sw.n_s_values {
            let (t, c) = channels(n, g, g)?;
            rows.push(vec![
                n.to_string(),
                g.to_string(),
                t.to_string(),
                c.to_string(),
            ]);
        }
    }
    out.table(
        "channels_vs_ns.csv",
        &["n_total", "n_s", "tdma", "csma_cs"],
        &rows,
    )?;

    let mut rows = Vec::new();
    for &(d, t, c) in &groups {
        for &n in &sw.n_total_values {
            let ch = |g: Option<u32>, pick: fn((u32, u32)) -> u32| -> Result<String> {
                Ok(match g {
                    Some(g) => pick(channels(n, g, g)?).to_string(),
                    None => cell::<u32>(None),
                })
            };
            rows.push(vec![
                d.to_string(),
                n.to_string(),
                ch(t, |x| x.0)?,
                ch(c, |x| x.1)?,
            ]);
        }
    }
    out.table(
        "channels_vs_target.csv",
        &["target_delay", "n_total", "tdma", "csma_cs"],
        &rows,
    )?;
    Ok(())
}

/// `Scheme::ALL` order is TDMA, TDMA-CS, CSMA, CSMA-CS; the table lists
/// TDMA, CSMA, TDMA-CS, CSMA-CS.
fn reorder(rows: Vec<Vec<String>>) -> Vec<Vec<String>> {
    rows.into_iter()
        .map(|r| {
            vec![
                r[0].clone(),
                r[1].clone(),
                r[2].clone(),
                r[4].clone(),
                r[3].clone(),
                r[5].clone(),
            ]
        })
        .collect()
}

pub fn simulate(cfg: &ScenarioConfig, out: &Output) -> Result<()> {
    let f = &cfg.field;
    let m = &cfg.mac;
    let c = &cfg.simulation.campaign;
    if c.length < f.n_t || (m.m_t as usize) > f.n_t {
        bail!(Invalid(
            "simulation.campaign.length must be >= field.n_t and mac.m_t <= field.n_t".into()
        ));
    }
    let field = f
        .generator
        .generate(f.n_s, c.length, cfg.seed)
        .context("generating field")?;
    let mac = MacConfig::uniform(m.k_tau, m.bo, m.p_s, &cfg.timing)?;
    let campaign = CampaignConfig {
        m_s: m.m_s,
        m_t: m.m_t as usize,
        n_t: f.n_t,
        mac: mac.clone(),
        sim: sim_config(cfg),
        wavelet: c.wavelet,
        recon: c.recon.clone(),
        stride: c.stride,
    };
    let r = run_campaign(&field, &campaign, derive_seed(cfg.seed, &[0x51]))?;
    let rows: Vec<Vec<String>> = r
        .records
        .iter()
        .map(|x| {
            vec![
                x.ri.to_string(),
                x.participants.to_string(),
                x.successes.to_string(),
                x.deficient.to_string(),
                x.delay_used.to_string(),
                x.energy.to_string(),
            ]
        })
        .collect();
    out.table(
        "campaign_intervals.csv",
        &[
            "ri",
            "participants",
            "successes",
            "deficient",
            "delay_used",
            "energy_uj",
        ],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = r
        .windows
        .iter()
        .map(|w| {
            vec![
                w.start.to_string(),
                w.requested.len().to_string(),
                w.samples.to_string(),
                w.mse.to_string(),
                w.converged.to_string(),
            ]
        })
        .collect();
    out.table(
        "campaign_windows.csv",
        &["start", "requested", "samples", "mse", "converged"],
        &rows,
    )?;
    let analytic = analytics(cfg).prob_sufficient(&mac, f.n_s as u32, m.m_s)?;
    let mean = |v: Vec<f64>| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    out.table(
        "campaign_summary.csv",
        &[
            "requested",
            "deficient",
            "sufficiency_rate",
            "analytic_probability",
            "window_success_rate",
            "mean_delay",
            "mean_energy_uj",
        ],
        &[vec![
            r.records.len().to_string(),
            r.deficient().len().to_string(),
            r.sufficiency_rate().to_string(),
            num(analytic),
            r.window_success_rate(cfg.calibration.target_mse)
                .to_string(),
            mean(r.delays().into_iter().map(|d| d as f64).collect()).to_string(),
            mean(r.energies()).to_string(),
        ]],
    )?;
    Ok(())
}

pub fn compare(cfg: &ScenarioConfig, out: &Output) -> Result<()> {
    let a = analytics(cfg);
    let m = &cfg.mac;
    let sim = sim_config(cfg);
    let n_ri = cfg.simulation.intervals_per_point;

    let profile = a.sufficiency_profile(m.n_s, m.m_s, &vec![m.bo; m.k_tau as usize])?;
    let rows = p_axis(m.p_axis_step)
        .into_par_iter()
        .map(|p| {
            let mac = MacConfig::uniform(m.k_tau, m.bo, p, &cfg.timing)?;
            let mut hits = 0usize;
            for i in 0..n_ri {
                let seed = derive_seed(cfg.seed, &[0xc0, p.to_bits(), i as u64]);
                hits += usize::from(run_ri(m.n_s, m.m_s, &mac, &sim, seed)?.sufficient);
            }
            let emp = hits as f64 / n_ri.max(1) as f64;
            let ana = mix_participation(&profile, p);
            Ok(vec![
                p.to_string(),
                num(ana),
                num(emp),
                num((ana - emp).abs()),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    out.table(
        "pr_compare.csv",
        &["p_s", "analytic", "empirical", "abs_gap"],
        &rows,
    )?;

    let sf_len = cfg.timing.sf_len(m.bo);
    let per_h = cfg
        .simulation
        .contenders
        .par_iter()
        .map(|&h| {
            let an = a.superframe(h, sf_len)?;
            let s = run_saturated(
                h,
                sf_len,
                cfg.simulation.superframes,
                &sim,
                derive_seed(cfg.seed, &[0xc1, u64::from(h)]),
            )?;
            let mut rows = Vec::new();
            let mut push = |q: &str, x: f64, y: f64| {
                let rel = if x == 0.0 {
                    0.0
                } else {
                    (x - y).abs() / x.abs()
                };
                rows.push(vec![
                    h.to_string(),
                    q.to_string(),
                    num(x),
                    num(y),
                    num((x - y).abs()),
                    num(rel),
                ]);
            };
            if let (Some(c), Some(st)) = (an.chain.as_ref(), an.stats.as_ref()) {
                push("alpha", c.alpha, s.alpha);
                push("beta", c.beta, s.beta);
                push("phi", c.phi, s.phi);
                push("p_succ", st.p_succ, s.p_succ);
                push("p_coll", st.p_coll, s.p_coll);
                push("p_ccas", st.p_ccas, s.p_ccas);
                push("p_d", st.p_d, s.p_d);
                push("t_bar", st.t_bar, s.t_bar);
                push("sigma2", st.sigma2, s.sigma2);
            }
            push(
                "energy_per_node_slot",
                an.energy.total,
                s.energy_per_node_slot,
            );
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    out.table(
        "chain_compare.csv",
        &[
            "h",
            "quantity",
            "analytic",
            "simulated",
            "abs_gap",
            "rel_gap",
        ],
        &per_h.concat(),
    )?;
    Ok(())
}
