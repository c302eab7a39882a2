use rand::Rng as _;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

use super::{param_layout, param_value, Chain, Dataset, Imputations, McmcConfig, McmcError, ParamDesc, UnitAcceptance};
use crate::condmodels::{beta_logpdf_rescaled, clamp_support, sample_beta_rescaled, CondParams, NetworkParams};
use crate::netspec::{NetworkSpec, Typology, Value};
use crate::priors::{prior_logdensity, sample_dirichlet, PriorEntry, PriorSpec, VarPrior};
use crate::rng::{stream, Rng};

/// Periodic progress report of a running chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Progress {
    pub chain: u32,
    pub iteration: u64,
    pub total: u64,
    /// Mean acceptance rate over update units so far.
    pub mean_acceptance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum UnitKind {
    PiRow(usize),
    Eta,
    Mu(usize),
    Tau,
}

#[derive(Debug, Clone)]
struct Unit {
    var: usize,
    kind: UnitKind,
    scale: f64,
    acc: u64,
    prop: u64,
    win_acc: u64,
    win_prop: u64,
}

const ADAPT_WINDOW: u64 = 50;
const LOW_RATE: f64 = 0.20;
const HIGH_RATE: f64 = 0.45;

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Record log-likelihood of one variable; domain errors count as zero density.
#[inline]
fn loglik(p: &CondParams, x: &[f64], y: f64, buf: &mut [f64]) -> f64 {
    match p {
        CondParams::Categorical(c) => {
            let k = c.s() + 1;
            match c.log_probs_into(x, &mut buf[..k]) {
                Ok(()) => buf[y as usize],
                Err(_) => f64::NEG_INFINITY,
            }
        }
        CondParams::Beta(b) => {
            let (a, bb) = b.shapes(x);
            beta_logpdf_rescaled(a, bb, y)
        }
    }
}

fn dirichlet_logpdf(alpha: &[f64], x: &[f64]) -> f64 {
    let mut lp = 0.0;
    let mut a0 = 0.0;
    for (&a, &v) in alpha.iter().zip(x) {
        lp += (a - 1.0) * v.ln() - ln_gamma(a);
        a0 += a;
    }
    lp + ln_gamma(a0)
}

pub(super) struct Sampler<'a> {
    spec: &'a NetworkSpec,
    priors: &'a PriorSpec,
    cfg: &'a McmcConfig,
    params: NetworkParams,
    nv: usize,
    n: usize,
    /// Record-major state: categorical cells hold their index.
    state: Vec<f64>,
    missing: Vec<(usize, usize)>,
    units: Vec<Unit>,
    layout: Vec<ParamDesc>,
    rng: Rng,
    chain_index: u32,
    buf: Vec<f64>,
    xbuf: Vec<f64>,
    xmat: Vec<f64>,
    sums: Vec<f64>,
}

impl<'a> Sampler<'a> {
    pub(super) fn new(
        spec: &'a NetworkSpec,
        priors: &'a PriorSpec,
        data: &Dataset,
        cfg: &'a McmcConfig,
        init: NetworkParams,
        chain_index: u32,
    ) -> Result<Self, McmcError> {
        let nv = spec.len();
        let n = data.n_records();
        let mut state = vec![0.0; n * nv];
        let mut missing = Vec::new();
        for r in 0..n {
            for &v in spec.topological_order() {
                match data.get(r, v) {
                    Some(Value::Cat(k)) => state[r * nv + v] = k as f64,
                    Some(Value::Real(y)) => state[r * nv + v] = y,
                    None => missing.push((r, v)),
                }
            }
        }

        let mut units = Vec::new();
        for (v, vp) in priors.vars.iter().enumerate() {
            let mut push = |kind: UnitKind, scale: f64| {
                units.push(Unit {
                    var: v,
                    kind,
                    scale,
                    acc: 0,
                    prop: 0,
                    win_acc: 0,
                    win_prop: 0,
                })
            };
            match vp {
                VarPrior::Categorical { rows, eta } => {
                    for r in 0..rows.len() {
                        push(UnitKind::PiRow(r), cfg.proposals.dirichlet_concentration);
                    }
                    if eta.is_some() {
                        push(UnitKind::Eta, cfg.proposals.eta_step);
                    }
                }
                VarPrior::Continuous { mu, .. } => {
                    for (i, e) in mu.iter().enumerate() {
                        if matches!(e, PriorEntry::Beta { .. }) {
                            push(UnitKind::Mu(i), cfg.proposals.mu_step);
                        }
                    }
                    push(UnitKind::Tau, cfg.proposals.tau_step);
                }
            }
        }

        let max_k = (0..nv)
            .filter_map(|v| spec.var(v).typology.n_categories())
            .max()
            .unwrap_or(2);
        let max_w = (0..nv).map(|v| spec.layout(v).width).max().unwrap_or(0);
        let s = Self {
            spec,
            priors,
            cfg,
            params: init,
            nv,
            n,
            state,
            missing,
            units,
            layout: param_layout(spec, priors),
            rng: stream(cfg.seed, chain_index as u64),
            chain_index,
            buf: vec![0.0; max_k],
            xbuf: vec![0.0; max_w],
            xmat: Vec::new(),
            sums: Vec::new(),
        };
        s.check_initial()?;
        Ok(s)
    }

    fn check_initial(&self) -> Result<(), McmcError> {
        let mut buf = self.buf.clone();
        let mut x = self.xbuf.clone();
        for r in 0..self.n {
            let row = &self.state[r * self.nv..(r + 1) * self.nv];
            for v in 0..self.nv {
                let lay = self.spec.layout(v);
                lay.fill(row, &mut x[..lay.width]);
                let ll = loglik(&self.params.blocks[v], &x[..lay.width], row[v], &mut buf);
                if !ll.is_finite() {
                    return Err(McmcError::Initialization {
                        record: r,
                        variable: self.spec.var(v).name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub(super) fn run(mut self, progress: Option<&(dyn Fn(&Progress) + Sync)>) -> Result<Chain, McmcError> {
        let cfg = self.cfg;
        let s_keep = cfg.retained();
        let mut draws: Vec<Vec<f64>> = vec![Vec::with_capacity(s_keep); self.layout.len()];
        let mut imp = cfg
            .keep_imputations
            .then(|| vec![Vec::with_capacity(s_keep); self.missing.len()]);
        let report_every = (cfg.iterations / 100).max(1);

        for it in 0..cfg.iterations {
            let burning = it < cfg.burn_in;
            self.impute();
            for v in 0..self.nv {
                self.update_block(v, burning);
            }
            if burning && cfg.adapt {
                self.adapt();
            }
            if !burning && (it - cfg.burn_in + 1) % cfg.thin == 0 {
                for (col, d) in draws.iter_mut().zip(&self.layout) {
                    col.push(param_value(&self.params, d));
                }
                if let Some(imp) = imp.as_mut() {
                    for (col, &(r, v)) in imp.iter_mut().zip(&self.missing) {
                        col.push(self.state[r * self.nv + v]);
                    }
                }
            }
            if let Some(cb) = progress {
                if (it + 1) % report_every == 0 || it + 1 == cfg.iterations {
                    cb(&Progress {
                        chain: self.chain_index,
                        iteration: it + 1,
                        total: cfg.iterations,
                        mean_acceptance: self.mean_acceptance(),
                    });
                }
            }
        }

        let acceptance = self
            .units
            .iter()
            .map(|u| {
                let name = &self.spec.var(u.var).name;
                let label = match u.kind {
                    UnitKind::PiRow(r) => format!("{name}/pi[{r},*]"),
                    UnitKind::Eta => format!("{name}/eta"),
                    UnitKind::Mu(i) => format!("{name}/mu[{i}]"),
                    UnitKind::Tau => format!("{name}/tau"),
                };
                UnitAcceptance {
                    name: label,
                    rate: if u.prop > 0 { u.acc as f64 / u.prop as f64 } else { 0.0 },
                    scale: u.scale,
                }
            })
            .collect();

        Ok(Chain {
            params: self.layout,
            draws,
            imputations: imp.map(|draws| Imputations {
                cells: self.missing.clone(),
                draws,
            }),
            acceptance,
            config: cfg.clone(),
            seed: cfg.seed,
            chain_index: self.chain_index,
        })
    }

    fn mean_acceptance(&self) -> f64 {
        let (a, p) = self
            .units
            .iter()
            .fold((0u64, 0u64), |(a, p), u| (a + u.acc + u.win_acc, p + u.prop + u.win_prop));
        if p == 0 {
            0.0
        } else {
            a as f64 / p as f64
        }
    }

    fn adapt(&mut self) {
        for u in &mut self.units {
            if u.win_prop < ADAPT_WINDOW {
                continue;
            }
            let rate = u.win_acc as f64 / u.win_prop as f64;
            match u.kind {
                UnitKind::PiRow(_) => {
                    if rate < LOW_RATE {
                        u.scale = (u.scale * 1.5).min(1e7);
                    } else if rate > HIGH_RATE {
                        u.scale = (u.scale / 1.5).max(1.0);
                    }
                }
                _ => {
                    if rate < LOW_RATE {
                        u.scale = (u.scale / 1.5).max(1e-4);
                    } else if rate > HIGH_RATE {
                        u.scale = (u.scale * 1.5).min(50.0);
                    }
                }
            }
            u.win_acc = 0;
            u.win_prop = 0;
        }
    }

    fn record(&mut self, unit: usize, accepted: bool, burning: bool) {
        let u = &mut self.units[unit];
        if burning {
            u.win_prop += 1;
            u.win_acc += accepted as u64;
        } else {
            u.prop += 1;
            u.acc += accepted as u64;
        }
    }

    fn in_domain(&self, v: usize, y: f64) -> bool {
        let (lo, hi) = self.spec.var(v).rescaled_domain().unwrap_or((-1.5, 1.5));
        let lo_ok = if lo == -1.5 { y > lo } else { y >= lo };
        lo_ok && y < hi
    }

    /// Sum of children's log-likelihoods in record `r` under the current state.
    fn children_ll(&mut self, r: usize, v: usize) -> f64 {
        let mut total = 0.0;
        let row = &self.state[r * self.nv..(r + 1) * self.nv];
        for &c in self.spec.children(v) {
            let lay = self.spec.layout(c);
            let x = &mut self.xbuf[..lay.width];
            lay.fill(row, x);
            total += loglik(&self.params.blocks[c], x, row[c], &mut self.buf);
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    fn own_x(&mut self, r: usize, v: usize) -> Vec<f64> {
        let lay = self.spec.layout(v);
        let mut x = vec![0.0; lay.width];
        lay.fill(&self.state[r * self.nv..(r + 1) * self.nv], &mut x);
        x
    }

    fn impute(&mut self) {
        for m in 0..self.missing.len() {
            let (r, v) = self.missing[m];
            let idx = r * self.nv + v;
            let x = self.own_x(r, v);
            match &self.spec.var(v).typology {
                Typology::Continuous(_) => {
                    let CondParams::Beta(bp) = &self.params.blocks[v] else {
                        unreachable!()
                    };
                    let (a, b) = bp.shapes(&x);
                    let cur = self.state[idx];
                    let ch_cur = self.children_ll(r, v);

                    // independence step from the variable's own conditional
                    let prop = sample_beta_rescaled(a, b, &mut self.rng);
                    let mut cur_y = cur;
                    let mut cur_ch = ch_cur;
                    if self.in_domain(v, prop) {
                        self.state[idx] = prop;
                        let ch_new = self.children_ll(r, v);
                        let log_u = self.rng.random::<f64>().ln();
                        if log_u < ch_new - cur_ch {
                            cur_y = prop;
                            cur_ch = ch_new;
                        }
                        self.state[idx] = cur_y;
                    }

                    // random walk on the logit of the unit value
                    let u = (cur_y + 1.5) / 3.0;
                    let z = (u / (1.0 - u)).ln();
                    let step: f64 = self.rng.sample(StandardNormal);
                    let u_new = sigmoid(z + self.cfg.proposals.cell_step * step);
                    let y_new = clamp_support(3.0 * u_new - 1.5);
                    if self.in_domain(v, y_new) && u_new > 0.0 && u_new < 1.0 {
                        let own_cur = beta_logpdf_rescaled(a, b, cur_y);
                        let own_new = beta_logpdf_rescaled(a, b, y_new);
                        self.state[idx] = y_new;
                        let ch_new = self.children_ll(r, v);
                        let u_cur = (cur_y + 1.5) / 3.0;
                        let u_prop = (y_new + 1.5) / 3.0;
                        let jac = (u_prop * (1.0 - u_prop)).ln() - (u_cur * (1.0 - u_cur)).ln();
                        let log_r = own_new - own_cur + ch_new - cur_ch + jac;
                        let log_u = self.rng.random::<f64>().ln();
                        if !(log_u < log_r) {
                            self.state[idx] = cur_y;
                        }
                    }
                }
                t => {
                    let k = t.n_categories().unwrap();
                    let mut lp = vec![0.0; k];
                    {
                        let CondParams::Categorical(cp) = &self.params.blocks[v] else {
                            unreachable!()
                        };
                        if cp.log_probs_into(&x, &mut lp).is_err() {
                            continue;
                        }
                    }
                    let cur = self.state[idx];
                    for (c, l) in lp.iter_mut().enumerate() {
                        if *l == f64::NEG_INFINITY {
                            continue;
                        }
                        self.state[idx] = c as f64;
                        *l += self.children_ll(r, v);
                    }
                    let m = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if m == f64::NEG_INFINITY {
                        self.state[idx] = cur;
                        continue;
                    }
                    let w: Vec<f64> = lp.iter().map(|l| (l - m).exp()).collect();
                    let pick = crate::condmodels::sample_categorical(&w, &mut self.rng);
                    self.state[idx] = pick as f64;
                }
            }
        }
    }

    /// Fills the dummy matrix and parent sums of `v` for every record.
    fn prepare_block(&mut self, v: usize) -> usize {
        let lay = self.spec.layout(v);
        let w = lay.width;
        self.xmat.resize(self.n * w, 0.0);
        self.sums.resize(self.n, 0.0);
        for r in 0..self.n {
            let x = &mut self.xmat[r * w..(r + 1) * w];
            lay.fill(&self.state[r * self.nv..(r + 1) * self.nv], x);
            self.sums[r] = x.iter().sum();
        }
        w
    }

    fn block_ll(&mut self, v: usize, p: &CondParams, recs: &[usize], w: usize) -> f64 {
        let mut total = 0.0;
        for &r in recs {
            let x = &self.xmat[r * w..(r + 1) * w];
            total += loglik(p, x, self.state[r * self.nv + v], &mut self.buf);
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    fn update_block(&mut self, v: usize, burning: bool) {
        let unit_ids: Vec<usize> = (0..self.units.len()).filter(|&u| self.units[u].var == v).collect();
        if unit_ids.is_empty() {
            return;
        }
        let w = self.prepare_block(v);
        for u in unit_ids {
            let kind = self.units[u].kind;
            let recs: Vec<usize> = (0..self.n)
                .filter(|&r| {
                    let s = self.sums[r];
                    let x = &self.xmat[r * w..(r + 1) * w];
                    match kind {
                        UnitKind::PiRow(0) => s <= 0.0,
                        UnitKind::PiRow(i) => s > 0.0 && x[i - 1] != 0.0,
                        UnitKind::Eta => s > 0.0 && s != 1.0,
                        UnitKind::Mu(0) => s != 1.0,
                        UnitKind::Mu(i) => x[i - 1] != 0.0,
                        UnitKind::Tau => true,
                    }
                })
                .collect();
            let accepted = match kind {
                UnitKind::PiRow(row) => self.step_pi_row(v, u, row, &recs, w),
                UnitKind::Eta => self.step_eta(v, u, &recs, w),
                UnitKind::Mu(i) => self.step_mu(v, u, i, &recs, w),
                UnitKind::Tau => self.step_tau(v, u, &recs, w),
            };
            self.record(u, accepted, burning);
        }
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        if log_ratio.is_nan() {
            return false;
        }
        log_ratio >= 0.0 || self.rng.random::<f64>().ln() < log_ratio
    }

    fn step_pi_row(&mut self, v: usize, u: usize, row: usize, recs: &[usize], w: usize) -> bool {
        let VarPrior::Categorical { rows, .. } = &self.priors.vars[v] else {
            unreachable!()
        };
        let prior = &rows[row];
        let CondParams::Categorical(cur) = &self.params.blocks[v] else {
            unreachable!()
        };
        let cur_row = cur.row(row).to_vec();
        let pos: Vec<usize> = (0..cur_row.len()).filter(|&y| !cur.is_structural(row, y)).collect();
        let c = self.units[u].scale;
        let floor = self.cfg.proposals.dirichlet_floor;
        let a_fwd: Vec<f64> = pos.iter().map(|&y| (c * cur_row[y]).max(floor)).collect();
        let draw = sample_dirichlet(&a_fwd, &mut self.rng);
        if draw.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return false;
        }
        let mut new_row = vec![0.0; cur_row.len()];
        for (&y, &p) in pos.iter().zip(&draw) {
            new_row[y] = p;
        }
        let mut prop = cur.clone();
        if prop.set_row(row, &new_row).is_err() {
            return false;
        }
        // the stored row may differ from the draw after zero handling
        let stored: Vec<f64> = pos.iter().map(|&y| prop.row(row)[y]).collect();
        let cur_pos: Vec<f64> = pos.iter().map(|&y| cur_row[y]).collect();
        let a_rev: Vec<f64> = stored.iter().map(|&p| (c * p).max(floor)).collect();
        let log_q = dirichlet_logpdf(&a_rev, &cur_pos) - dirichlet_logpdf(&a_fwd, &stored);
        let lp_prior = prior_logdensity(prior, prop.row(row)) - prior_logdensity(prior, &cur_row);

        let prop = CondParams::Categorical(prop);
        let cur_block = self.params.blocks[v].clone();
        let ll_cur = self.block_ll(v, &cur_block, recs, w);
        let ll_new = self.block_ll(v, &prop, recs, w);
        if self.accept(ll_new - ll_cur + lp_prior + log_q) {
            self.params.blocks[v] = prop;
            true
        } else {
            false
        }
    }

    fn step_eta(&mut self, v: usize, u: usize, recs: &[usize], w: usize) -> bool {
        let CondParams::Categorical(cur) = &self.params.blocks[v] else {
            unreachable!()
        };
        let sigma = self.units[u].scale;
        let old: Vec<f64> = cur.eta().to_vec();
        let mut prop = cur.clone();
        let new: Vec<f64> = old
            .iter()
            .map(|e| e + sigma * self.rng.sample::<f64, _>(StandardNormal))
            .collect();
        prop.set_eta(&new);
        let lp_prior: f64 = new
            .iter()
            .zip(&old)
            .map(|(n, o)| prior_logdensity(&PriorEntry::StdNormal, &[*n]) - prior_logdensity(&PriorEntry::StdNormal, &[*o]))
            .sum();
        let prop = CondParams::Categorical(prop);
        let cur_block = self.params.blocks[v].clone();
        let ll_cur = self.block_ll(v, &cur_block, recs, w);
        let ll_new = self.block_ll(v, &prop, recs, w);
        if self.accept(ll_new - ll_cur + lp_prior) {
            self.params.blocks[v] = prop;
            true
        } else {
            false
        }
    }

    fn step_mu(&mut self, v: usize, u: usize, i: usize, recs: &[usize], w: usize) -> bool {
        let VarPrior::Continuous { mu, .. } = &self.priors.vars[v] else {
            unreachable!()
        };
        let prior = &mu[i];
        let CondParams::Beta(cur) = &self.params.blocks[v] else {
            unreachable!()
        };
        let u_cur = (cur.mu[i] + 1.5) / 3.0;
        let z = (u_cur / (1.0 - u_cur)).ln();
        let step: f64 = self.rng.sample(StandardNormal);
        let u_new = sigmoid(z + self.units[u].scale * step);
        let mu_new = 3.0 * u_new - 1.5;
        if !(u_new > 0.0 && u_new < 1.0 && mu_new > -1.5 && mu_new < 1.5) {
            return false;
        }
        let mut prop = cur.clone();
        prop.mu[i] = mu_new;
        let u_new = (mu_new + 1.5) / 3.0;
        let lp_prior = prior_logdensity(prior, &[u_new]) - prior_logdensity(prior, &[u_cur]);
        let jac = (u_new * (1.0 - u_new)).ln() - (u_cur * (1.0 - u_cur)).ln();
        let prop = CondParams::Beta(prop);
        let cur_block = self.params.blocks[v].clone();
        let ll_cur = self.block_ll(v, &cur_block, recs, w);
        let ll_new = self.block_ll(v, &prop, recs, w);
        if self.accept(ll_new - ll_cur + lp_prior + jac) {
            self.params.blocks[v] = prop;
            true
        } else {
            false
        }
    }

    fn step_tau(&mut self, v: usize, u: usize, recs: &[usize], w: usize) -> bool {
        let VarPrior::Continuous { tau, .. } = &self.priors.vars[v] else {
            unreachable!()
        };
        let prior = tau;
        let CondParams::Beta(cur) = &self.params.blocks[v] else {
            unreachable!()
        };
        let t_cur = cur.tau;
        let step: f64 = self.rng.sample(StandardNormal);
        let t_new = t_cur * (self.units[u].scale * step).exp();
        if !(t_new > 0.0 && t_new.is_finite()) {
            return false;
        }
        let mut prop = cur.clone();
        prop.tau = t_new;
        let lp_prior = prior_logdensity(prior, &[t_new]) - prior_logdensity(prior, &[t_cur]);
        let jac = t_new.ln() - t_cur.ln();
        let prop = CondParams::Beta(prop);
        let cur_block = self.params.blocks[v].clone();
        let ll_cur = self.block_ll(v, &cur_block, recs, w);
        let ll_new = self.block_ll(v, &prop, recs, w);
        if self.accept(ll_new - ll_cur + lp_prior + jac) {
            self.params.blocks[v] = prop;
            true
        } else {
            false
        }
    }
}
