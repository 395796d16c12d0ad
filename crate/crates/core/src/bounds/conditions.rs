//! Summability diagnostics for power-law spectra.
//!
//! Every condition is a series `sum_j a_j` with `a_j ~ j^(-p)` for an exponent
//! `p` fixed by the spectral exponents; it converges iff `p > 1`. Each record
//! carries the exponent verdict, the partial sums at the requested dimensions,
//! and an empirical verdict from partial-sum increments over decades.
//!
//! Spectra: `sigma_ij = tau_i s_mix j^-a_mix`, `lambda_j = s_smooth j^-a_smooth`
//! (effective), `gamma_j = s_pre j^-a_pre`, `dm_ij = s_dm j^-a_dm`,
//! `dsigma_ij = s_dsigma j^-a_dsigma`. Sup-over-time conditions are evaluated
//! at `kappa = 0`, where every denominator is smallest.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converges,
    Diverges,
    Unknown,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converges => "converges",
            Verdict::Diverges => "diverges",
            Verdict::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionInputs {
    pub weights: Vec<f64>,
    pub perturbed_weights: Vec<f64>,
    pub tau: Vec<f64>,
    /// Means of each component as sparse `(coordinate, value)` lists.
    pub means: Vec<Vec<(usize, f64)>>,
    pub alpha_mix: f64,
    pub scale_mix: f64,
    pub alpha_smooth: f64,
    pub scale_smooth: f64,
    pub alpha_pre: f64,
    pub scale_pre: f64,
    pub alpha_dm: f64,
    pub scale_dm: f64,
    pub alpha_dsigma: f64,
    pub scale_dsigma: f64,
}

impl ConditionInputs {
    /// Unperturbed mixture with unit scales for the mixture spectrum.
    pub fn unperturbed(weights: Vec<f64>, tau: Vec<f64>, alpha_mix: f64) -> Self {
        let k = weights.len();
        ConditionInputs {
            perturbed_weights: weights.clone(),
            weights,
            tau,
            means: vec![Vec::new(); k],
            alpha_mix,
            scale_mix: 1.0,
            alpha_smooth: 0.0,
            scale_smooth: 1.0,
            alpha_pre: 0.0,
            scale_pre: 1.0,
            alpha_dm: 0.0,
            scale_dm: 0.0,
            alpha_dsigma: 0.0,
            scale_dsigma: 0.0,
        }
    }

    fn sigma(&self, i: usize, j: f64) -> f64 {
        self.tau[i] * self.scale_mix * j.powf(-self.alpha_mix)
    }
    fn lambda(&self, j: f64) -> f64 {
        self.scale_smooth * j.powf(-self.alpha_smooth)
    }
    fn gamma(&self, j: f64) -> f64 {
        self.scale_pre * j.powf(-self.alpha_pre)
    }
    fn dm(&self, j: f64) -> f64 {
        self.scale_dm * j.powf(-self.alpha_dm)
    }
    fn dsigma(&self, j: f64) -> f64 {
        self.scale_dsigma * j.powf(-self.alpha_dsigma)
    }
    fn mean(&self, i: usize, j: usize) -> f64 {
        self.means[i].iter().filter(|(k, _)| *k == j).map(|(_, v)| v).sum()
    }
    fn dm_active(&self) -> bool {
        self.scale_dm != 0.0
    }
    fn ds_active(&self) -> bool {
        self.scale_dsigma != 0.0
    }
    /// Decay exponent of `sigma + dsigma`.
    fn alpha_sigma_tilde(&self) -> f64 {
        if self.ds_active() {
            self.alpha_mix.min(self.alpha_dsigma)
        } else {
            self.alpha_mix
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub name: String,
    /// `(d, sum_{j <= d} a_j)` for each probe dimension.
    pub partial_sums: Vec<(usize, f64)>,
    pub verdict: Verdict,
    /// `p - 1` for summands `~ j^-p`; `None` when the series is identically zero
    /// or the condition is not a power-law series.
    pub exponent_margin: Option<f64>,
    /// Verdict read off partial sums at `d = 10^2, 10^3, 10^4`.
    pub empirical: Verdict,
}

impl ConditionRecord {
    pub fn agrees(&self) -> bool {
        self.verdict == self.empirical
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub records: Vec<ConditionRecord>,
}

impl ConditionReport {
    pub fn get(&self, name: &str) -> Option<&ConditionRecord> {
        self.records.iter().find(|r| r.name == name)
    }
}

/// Dimensions whose partial sums decide the empirical verdict.
pub const EMPIRICAL_PROBES: [usize; 3] = [100, 1_000, 10_000];
/// A series is read as convergent when the last decade adds less than this
/// fraction of the previous decade's increment.
pub const EMPIRICAL_DECAY: f64 = 0.95;

fn verdict_from_margin(margin: Option<f64>) -> Verdict {
    match margin {
        None => Verdict::Converges,
        Some(m) if m.is_nan() => Verdict::Unknown,
        Some(m) if m > 0.0 => Verdict::Converges,
        Some(_) => Verdict::Diverges,
    }
}

fn partial_sums(term: &dyn Fn(usize) -> f64, probes: &[usize]) -> Vec<(usize, f64)> {
    let max = probes.iter().copied().max().unwrap_or(0);
    let mut out = Vec::with_capacity(probes.len());
    let mut acc = 0.0;
    for j in 1..=max {
        acc += term(j);
        if probes.contains(&j) {
            out.push((j, acc));
        }
    }
    let mut sorted: Vec<(usize, f64)> = probes
        .iter()
        .map(|d| *out.iter().find(|(j, _)| j == d).unwrap_or(&(*d, 0.0)))
        .collect();
    sorted.dedup_by_key(|p| p.0);
    sorted
}

fn empirical(term: &dyn Fn(usize) -> f64) -> Verdict {
    let s = partial_sums(term, &EMPIRICAL_PROBES);
    let d1 = s[1].1 - s[0].1;
    let d2 = s[2].1 - s[1].1;
    if !d1.is_finite() || !d2.is_finite() {
        return Verdict::Diverges;
    }
    if d1 == 0.0 && d2 == 0.0 {
        return Verdict::Converges;
    }
    if d2 < EMPIRICAL_DECAY * d1 {
        Verdict::Converges
    } else {
        Verdict::Diverges
    }
}

fn record(
    name: &str,
    term: &dyn Fn(usize) -> f64,
    exponent: Option<f64>,
    probes: &[usize],
) -> ConditionRecord {
    let margin = exponent.map(|p| p - 1.0);
    ConditionRecord {
        name: name.to_string(),
        partial_sums: partial_sums(term, probes),
        verdict: verdict_from_margin(margin),
        exponent_margin: margin,
        empirical: empirical(term),
    }
}

/// Record for a condition that holds for any finite component set.
fn finite_record(name: &str, value: f64, probes: &[usize]) -> ConditionRecord {
    let verdict = if value.is_finite() { Verdict::Converges } else { Verdict::Diverges };
    ConditionRecord {
        name: name.to_string(),
        partial_sums: probes.iter().map(|d| (*d, value)).collect(),
        verdict,
        exponent_margin: None,
        empirical: verdict,
    }
}

/// Every summability condition, evaluated for the given power-law spectra.
///
/// Conditions: `suff_condition` (sum w lambda^2 / (gamma sigma)), `kd`,
/// `init_mean`, `init_var`, `bcomp_mean`, `bcomp_var`, `w1`, `s1`, `w2`,
/// `r2`, `m0_first`, `m0_second`, `m_pm`.
pub fn condition_report(c: &ConditionInputs, probes: &[usize]) -> ConditionReport {
    let k = c.weights.len();
    let sup_i = |f: &dyn Fn(usize, f64) -> f64, j: usize| (0..k).map(|i| f(i, j as f64)).fold(0.0, f64::max);
    let (a_mix, a_s, a_p) = (c.alpha_mix, c.alpha_smooth, c.alpha_pre);
    let (a_dm, a_ds) = (c.alpha_dm, c.alpha_dsigma);
    let a_st = c.alpha_sigma_tilde();
    let mut records = Vec::new();

    let suff = |j: usize| {
        let j = j as f64;
        (0..k).map(|i| c.weights[i] * c.lambda(j).powi(2) / (c.gamma(j) * c.sigma(i, j))).sum::<f64>()
    };
    records.push(record("suff_condition", &suff, Some(2.0 * a_s - a_p - a_mix), probes));

    let kd = |j: usize| {
        let j = j as f64;
        (0..k)
            .map(|i| c.weights[i] * c.lambda(j) / c.gamma(j) * (c.lambda(j) / c.sigma(i, j)).ln_1p())
            .sum::<f64>()
    };
    // ln(1 + lambda/sigma) ~ lambda/sigma when lambda decays faster, else ~ log j.
    let kd_exp = if a_s > a_mix { 2.0 * a_s - a_p - a_mix } else { a_s - a_p };
    records.push(record("kd", &kd, Some(kd_exp), probes));

    // Initialization conditions (full smoothing).
    let init_mean = |j| sup_i(&|i, j| c.dm(j).powi(2) / (c.sigma(i, j) + c.dsigma(j) + c.lambda(j)), j);
    let ie1 = c.dm_active().then(|| 2.0 * a_dm - a_st.min(a_s));
    records.push(record("init_mean", &init_mean, ie1, probes));
    let init_var = |j| sup_i(&|i, j| {
        let base = c.sigma(i, j) + c.lambda(j);
        c.dsigma(j).powi(2) / (base * (base + c.dsigma(j)))
    }, j);
    let ie2 = c.ds_active().then(|| 2.0 * a_ds - a_mix.min(a_s) - a_st.min(a_s));
    records.push(record("init_var", &init_var, ie2, probes));

    // Component-score conditions at kappa = 0.
    let bm = |j| sup_i(&|i, j| c.gamma(j) * c.dm(j).powi(2) / (c.sigma(i, j) + c.dsigma(j)).powi(2), j);
    records.push(record("bcomp_mean", &bm, c.dm_active().then(|| a_p + 2.0 * a_dm - 2.0 * a_st), probes));
    let bv = |j| sup_i(&|i, j| {
        let s = c.sigma(i, j);
        c.gamma(j) * c.dsigma(j).powi(2) / (s * (s + c.dsigma(j)).powi(2))
    }, j);
    records.push(record(
        "bcomp_var",
        &bv,
        c.ds_active().then(|| a_p + 2.0 * a_ds - a_mix - 2.0 * a_st),
        probes,
    ));

    let w1: f64 = c
        .weights
        .iter()
        .zip(&c.perturbed_weights)
        .map(|(w, wt)| if *wt > 0.0 { (wt - w).powi(2) / wt.powi(3) } else { f64::INFINITY })
        .sum();
    records.push(finite_record("w1", w1, probes));

    let s1 = |j: usize| {
        let jf = j as f64;
        let mut total = 0.0;
        for l in 0..k {
            for i in 0..k {
                let gap = c.mean(l, j) - (c.mean(i, j) + c.dm(jf));
                let vt = c.sigma(i, jf) + c.dsigma(jf);
                total += c.weights[l] * c.perturbed_weights[i] * c.gamma(jf) * (c.sigma(l, jf) + gap * gap)
                    / (vt * vt);
            }
        }
        total
    };
    let numer = if c.dm_active() { a_mix.min(2.0 * a_dm) } else { a_mix };
    records.push(record("s1", &s1, Some(a_p + numer - 2.0 * a_st), probes));

    let w2 = c
        .weights
        .iter()
        .zip(&c.perturbed_weights)
        .map(|(w, wt)| (w / wt).max(wt / w))
        .fold(0.0, f64::max);
    records.push(finite_record("w2", w2, probes));

    // Ratio-moment series: (kappa_ij - 1)^2 + dm^2 / v at kappa = 0.
    let ratio_series = |j| sup_i(&|i, j| {
        let s = c.sigma(i, j);
        (c.dsigma(j) / s).powi(2) + c.dm(j).powi(2) / s
    }, j);
    let mut r2_exp: Option<f64> = None;
    if c.ds_active() {
        r2_exp = Some(2.0 * (a_ds - a_mix));
    }
    if c.dm_active() {
        let e = 2.0 * a_dm - a_mix;
        r2_exp = Some(r2_exp.map_or(e, |x| x.min(e)));
    }
    let max_ratio_dev = |probe: usize| {
        (1..=probe)
            .flat_map(|j| (0..k).map(move |i| (i, j as f64)))
            .map(|(i, j)| (c.dsigma(j) / c.sigma(i, j)).abs())
            .fold(0.0, f64::max)
    };
    let probe_max = probes.iter().copied().max().unwrap_or(1).max(EMPIRICAL_PROBES[2]);
    let dev = max_ratio_dev(probe_max);
    let mut r2 = record("r2", &ratio_series, r2_exp, probes);
    if !(dev < 0.5) {
        r2.verdict = Verdict::Diverges;
        r2.empirical = Verdict::Diverges;
    }
    records.push(r2);

    let m0a = |j| sup_i(&|i, j| c.gamma(j) / (c.sigma(i, j) + c.dsigma(j)), j);
    records.push(record("m0_first", &m0a, Some(a_p - a_st), probes));
    let m0b = |j| sup_i(&|i, j| (c.gamma(j) / (c.sigma(i, j) + c.dsigma(j))).powi(2), j);
    records.push(record("m0_second", &m0b, Some(2.0 * (a_p - a_st)), probes));

    // Tilted moments: band |kappa_ij - 1| < 1/8 plus Delta-m weighted series.
    let mpm = |j| sup_i(&|i, j| {
        let s = c.sigma(i, j);
        let vt = s + c.dsigma(j);
        let g = c.gamma(j);
        let dm2 = c.dm(j).powi(2);
        (c.dsigma(j) / s).powi(2) + dm2 / s + g * dm2 / (vt * vt) + g * g * dm2 / vt.powi(3)
            + g * g * dm2 * dm2 / vt.powi(4)
    }, j);
    let mut mpm_exp = r2_exp;
    if c.dm_active() {
        let e = (a_p + 2.0 * a_dm - 2.0 * a_st)
            .min(2.0 * a_p + 2.0 * a_dm - 3.0 * a_st)
            .min(2.0 * a_p + 4.0 * a_dm - 4.0 * a_st);
        mpm_exp = Some(mpm_exp.map_or(e, |x| x.min(e)));
    }
    let mut mpm_rec = record("m_pm", &mpm, mpm_exp, probes);
    if !(dev < 0.125) {
        mpm_rec.verdict = Verdict::Diverges;
        mpm_rec.empirical = Verdict::Diverges;
    }
    records.push(mpm_rec);

    ConditionReport { records }
}
