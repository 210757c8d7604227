//! Torus graph parameterization.
//!
//! The natural parameter vector has length `2d²`: `d` marginal blocks
//! `(cos, sin)` followed by `d(d-1)/2` coupling blocks
//! `(α, β, γ, δ)` multiplying `cos(x_j-x_k), sin(x_j-x_k), cos(x_j+x_k),
//! sin(x_j+x_k)`, edges in lexicographic `j < k` order. The normalizing
//! constant is never computed; densities here are unnormalized.

use serde::{Deserialize, Serialize};

use crate::circular::wrap;
use crate::error::{Result, TorusError};

/// Index arithmetic for the canonical parameter ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub d: usize,
}

impl Layout {
    pub fn new(d: usize) -> Self {
        Layout { d }
    }

    #[inline]
    pub fn n_params(&self) -> usize {
        2 * self.d * self.d
    }

    #[inline]
    pub fn n_edges(&self) -> usize {
        self.d * self.d.saturating_sub(1) / 2
    }

    /// Offset of the marginal block of node `j`.
    #[inline]
    pub fn marginal(&self, j: usize) -> usize {
        2 * j
    }

    /// Position of edge `(j, k)`, `j < k`, in lexicographic order.
    #[inline]
    pub fn edge_index(&self, j: usize, k: usize) -> usize {
        debug_assert!(j < k && k < self.d);
        j * (2 * self.d - j - 1) / 2 + (k - j - 1)
    }

    /// Offset of the coupling block of edge `(j, k)`, `j < k`.
    #[inline]
    pub fn coupling(&self, j: usize, k: usize) -> usize {
        2 * self.d + 4 * self.edge_index(j, k)
    }

    /// All edges `(j, k)` with `j < k` in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> {
        let d = self.d;
        (0..d).flat_map(move |j| (j + 1..d).map(move |k| (j, k)))
    }

    /// Checks an edge and returns it with `j < k`.
    pub fn normalize_edge(&self, j: usize, k: usize) -> Result<(usize, usize)> {
        if j == k || j >= self.d || k >= self.d {
            return Err(TorusError::domain(format!(
                "invalid edge ({j}, {k}) for d = {}",
                self.d
            )));
        }
        Ok((j.min(k), j.max(k)))
    }
}

/// The submodels obtained by zeroing blocks of the natural parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    #[serde(rename = "full")]
    Full,
    /// Marginal blocks zero: uniform marginals.
    #[serde(rename = "uniform")]
    UniformMarginal,
    /// Reflectional coupling `(γ, δ)` zero.
    #[serde(rename = "phasediff")]
    PhaseDiff,
    #[serde(rename = "uniform-phasediff")]
    UniformPhaseDiff,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Full => "full",
            FamilyKind::UniformMarginal => "uniform",
            FamilyKind::PhaseDiff => "phasediff",
            FamilyKind::UniformPhaseDiff => "uniform-phasediff",
        }
    }

    pub fn zero_marginals(self) -> bool {
        matches!(self, FamilyKind::UniformMarginal | FamilyKind::UniformPhaseDiff)
    }

    pub fn zero_reflectional(self) -> bool {
        matches!(self, FamilyKind::PhaseDiff | FamilyKind::UniformPhaseDiff)
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = TorusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(FamilyKind::Full),
            "uniform" => Ok(FamilyKind::UniformMarginal),
            "phasediff" => Ok(FamilyKind::PhaseDiff),
            "uniform-phasediff" => Ok(FamilyKind::UniformPhaseDiff),
            other => Err(TorusError::domain(format!("unknown family '{other}'"))),
        }
    }
}

/// Which natural parameters are free. Beyond the family's own zeros, whole
/// edges can be pinned to zero (used for null models).
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyMask {
    kind: FamilyKind,
    d: usize,
    active: Vec<bool>,
    zero_edges: Vec<(usize, usize)>,
}

impl FamilyMask {
    pub fn new(kind: FamilyKind, d: usize) -> Self {
        let layout = Layout::new(d);
        let mut active = vec![true; layout.n_params()];
        if kind.zero_marginals() {
            active[..2 * d].iter_mut().for_each(|a| *a = false);
        }
        if kind.zero_reflectional() {
            for (j, k) in layout.edges() {
                let o = layout.coupling(j, k);
                active[o + 2] = false;
                active[o + 3] = false;
            }
        }
        FamilyMask {
            kind,
            d,
            active,
            zero_edges: Vec::new(),
        }
    }

    pub fn full(d: usize) -> Self {
        Self::new(FamilyKind::Full, d)
    }

    /// Additionally pins every coupling parameter of the given edges to zero.
    pub fn with_zero_edges(mut self, edges: &[(usize, usize)]) -> Result<Self> {
        let layout = Layout::new(self.d);
        for &(j, k) in edges {
            let (j, k) = layout.normalize_edge(j, k)?;
            let o = layout.coupling(j, k);
            self.active[o..o + 4].iter_mut().for_each(|a| *a = false);
            if !self.zero_edges.contains(&(j, k)) {
                self.zero_edges.push((j, k));
            }
        }
        self.zero_edges.sort_unstable();
        Ok(self)
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn zero_edges(&self) -> &[(usize, usize)] {
        &self.zero_edges
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    #[inline]
    pub fn is_active(&self, i: usize) -> bool {
        self.active[i]
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&i| self.active[i]).collect()
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Same family on the unrestricted edge set.
    pub fn without_zero_edges(&self) -> FamilyMask {
        FamilyMask::new(self.kind, self.d)
    }
}

/// Natural parameters of a torus graph together with their family.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGraphParams {
    d: usize,
    phi: Vec<f64>,
    family: FamilyMask,
}

impl TorusGraphParams {
    pub fn zeros(d: usize) -> Self {
        TorusGraphParams {
            d,
            phi: vec![0.0; 2 * d * d],
            family: FamilyMask::full(d),
        }
    }

    /// Validates length, finiteness and the family's structural zeros.
    pub fn new(d: usize, phi: Vec<f64>, family: FamilyMask) -> Result<Self> {
        let layout = Layout::new(d);
        if phi.len() != layout.n_params() {
            return Err(TorusError::Dimension {
                expected: layout.n_params(),
                got: phi.len(),
            });
        }
        if family.d() != d {
            return Err(TorusError::Dimension {
                expected: d,
                got: family.d(),
            });
        }
        if let Some(i) = phi.iter().position(|v| !v.is_finite()) {
            return Err(TorusError::domain(format!("parameter {i} is not finite")));
        }
        if let Some(i) = (0..phi.len()).find(|&i| !family.is_active(i) && phi[i] != 0.0) {
            return Err(TorusError::domain(format!(
                "parameter {i} must be zero under family '{}'",
                family.kind().name()
            )));
        }
        Ok(TorusGraphParams { d, phi, family })
    }

    pub fn full(d: usize, phi: Vec<f64>) -> Result<Self> {
        Self::new(d, phi, FamilyMask::full(d))
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn layout(&self) -> Layout {
        Layout::new(self.d)
    }

    #[inline]
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn family(&self) -> &FamilyMask {
        &self.family
    }

    pub fn marginal(&self, j: usize) -> [f64; 2] {
        let o = 2 * j;
        [self.phi[o], self.phi[o + 1]]
    }

    /// Coupling block `(α, β, γ, δ)` of edge `(j, k)`, `j < k`.
    pub fn coupling(&self, j: usize, k: usize) -> [f64; 4] {
        let o = self.layout().coupling(j, k);
        [self.phi[o], self.phi[o + 1], self.phi[o + 2], self.phi[o + 3]]
    }

    /// Sets a marginal block; masked entries stay zero.
    pub fn set_marginal(&mut self, j: usize, value: [f64; 2]) {
        let o = 2 * j;
        for (i, v) in value.into_iter().enumerate() {
            self.phi[o + i] = if self.family.is_active(o + i) { v } else { 0.0 };
        }
    }

    /// Sets a coupling block; masked entries stay zero.
    pub fn set_coupling(&mut self, j: usize, k: usize, value: [f64; 4]) {
        let o = self.layout().coupling(j, k);
        for (i, v) in value.into_iter().enumerate() {
            self.phi[o + i] = if self.family.is_active(o + i) { v } else { 0.0 };
        }
    }

    /// Euclidean norm of a coupling block.
    pub fn coupling_norm(&self, j: usize, k: usize) -> f64 {
        self.coupling(j, k).iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Sufficient statistics `S¹` (per node) and `S²` (per edge).
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
}

impl SufficientStats {
    /// Concatenation `[S¹, S²]` in canonical order.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.s1.clone();
        v.extend_from_slice(&self.s2);
        v
    }
}

/// Writes `[S¹, S²]` of `x` into `out` (length `2d²`).
pub fn suff_stats_into(x: &[f64], out: &mut [f64]) {
    let d = x.len();
    debug_assert_eq!(out.len(), 2 * d * d);
    let sc: Vec<(f64, f64)> = x.iter().map(|v| v.sin_cos()).collect();
    for (j, &(s, c)) in sc.iter().enumerate() {
        out[2 * j] = c;
        out[2 * j + 1] = s;
    }
    let mut o = 2 * d;
    for j in 0..d {
        let (sj, cj) = sc[j];
        for &(sk, ck) in &sc[j + 1..] {
            // angle-addition forms avoid 4 more trig calls per pair
            out[o] = cj * ck + sj * sk;
            out[o + 1] = sj * ck - cj * sk;
            out[o + 2] = cj * ck - sj * sk;
            out[o + 3] = sj * ck + cj * sk;
            o += 4;
        }
    }
}

pub fn suff_stats(x: &[f64]) -> SufficientStats {
    let d = x.len();
    let mut flat = vec![0.0; 2 * d * d];
    suff_stats_into(x, &mut flat);
    let s2 = flat.split_off(2 * d);
    SufficientStats { s1: flat, s2 }
}

/// `φᵀ S(x)`.
pub fn log_unnorm_density(params: &TorusGraphParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.d() {
        return Err(TorusError::Dimension {
            expected: params.d(),
            got: x.len(),
        });
    }
    let d = x.len();
    let mut s = vec![0.0; 2 * d * d];
    suff_stats_into(x, &mut s);
    Ok(params.phi().iter().zip(&s).map(|(p, v)| p * v).sum())
}

/// Mean-centered parameterization: per-node mean direction and
/// concentration, and per-edge `(λcc, λcs, λsc, λss)` multiplying the
/// products of `cos/sin(x - μ)` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCenteredParams {
    pub mu: Vec<f64>,
    pub kappa: Vec<f64>,
    pub lambdas: Vec<[f64; 4]>,
}

impl MeanCenteredParams {
    pub fn d(&self) -> usize {
        self.mu.len()
    }

    fn validate(&self) -> Result<()> {
        let d = self.mu.len();
        if self.kappa.len() != d {
            return Err(TorusError::Dimension {
                expected: d,
                got: self.kappa.len(),
            });
        }
        let m = Layout::new(d).n_edges();
        if self.lambdas.len() != m {
            return Err(TorusError::Dimension {
                expected: m,
                got: self.lambdas.len(),
            });
        }
        if self.kappa.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return Err(TorusError::domain("concentrations must be finite and >= 0"));
        }
        if self.mu.iter().chain(self.lambdas.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(TorusError::domain("mean-centered parameters must be finite"));
        }
        Ok(())
    }
}

/// Maps mean-centered parameters to the natural parameterization (full family).
pub fn to_natural(mc: &MeanCenteredParams) -> Result<TorusGraphParams> {
    mc.validate()?;
    let d = mc.d();
    let layout = Layout::new(d);
    let mut p = TorusGraphParams::zeros(d);
    for j in 0..d {
        let (s, c) = mc.mu[j].sin_cos();
        p.set_marginal(j, [mc.kappa[j] * c, mc.kappa[j] * s]);
    }
    for (e, (j, k)) in layout.edges().enumerate() {
        let [cc, cs, sc, ss] = mc.lambdas[e];
        let (sm, cm) = (mc.mu[j] - mc.mu[k]).sin_cos();
        let (sp, cp) = (mc.mu[j] + mc.mu[k]).sin_cos();
        p.set_coupling(
            j,
            k,
            [
                0.5 * ((cc + ss) * cm + (cs - sc) * sm),
                0.5 * ((sc - cs) * cm + (cc + ss) * sm),
                0.5 * ((cc - ss) * cp - (cs + sc) * sp),
                0.5 * ((cs + sc) * cp + (cc - ss) * sp),
            ],
        );
    }
    Ok(p)
}

/// Inverse of [`to_natural`]. Fails when a marginal block is zero, since the
/// mean direction is then unidentified.
pub fn to_mean_centered(params: &TorusGraphParams) -> Result<MeanCenteredParams> {
    let d = params.d();
    let mut mu = Vec::with_capacity(d);
    let mut kappa = Vec::with_capacity(d);
    for j in 0..d {
        let [a, b] = params.marginal(j);
        let k = a.hypot(b);
        if k == 0.0 {
            return Err(TorusError::UnidentifiedMean { node: j });
        }
        kappa.push(k);
        mu.push(wrap(b.atan2(a)));
    }
    let lambdas = params
        .layout()
        .edges()
        .map(|(j, k)| {
            let [p1, p2, p3, p4] = params.coupling(j, k);
            let (sm, cm) = (mu[j] - mu[k]).sin_cos();
            let (sp, cp) = (mu[j] + mu[k]).sin_cos();
            [
                p1 * cm + p2 * sm + p3 * cp + p4 * sp,
                -p2 * cm + p1 * sm + p4 * cp - p3 * sp,
                p2 * cm - p1 * sm + p4 * cp - p3 * sp,
                p1 * cm + p2 * sm - p3 * cp - p4 * sp,
            ]
        })
        .collect();
    Ok(MeanCenteredParams { mu, kappa, lambdas })
}

/// Sine model: mean-centered parameters with only `λss` coupling.
pub fn sine_model_embed(mu: &[f64], kappa: &[f64], lambda_ss: &[f64]) -> Result<TorusGraphParams> {
    let mc = MeanCenteredParams {
        mu: mu.to_vec(),
        kappa: kappa.to_vec(),
        lambdas: lambda_ss.iter().map(|&l| [0.0, 0.0, 0.0, l]).collect(),
    };
    to_natural(&mc)
}

/// Closest sine model in the mean-centered coordinates: keeps `μ`, `κ` and
/// `λss` of `params` and drops the other three interaction terms.
pub fn project_to_sine_model(params: &TorusGraphParams) -> Result<TorusGraphParams> {
    let mc = to_mean_centered(params)?;
    let lss: Vec<f64> = mc.lambdas.iter().map(|l| l[3]).collect();
    sine_model_embed(&mc.mu, &mc.kappa, &lss)
}

/// Restricts `params` to `family`: masked entries become exactly zero.
pub fn apply_family(params: &TorusGraphParams, family: &FamilyMask) -> Result<TorusGraphParams> {
    if family.d() != params.d() {
        return Err(TorusError::Dimension {
            expected: params.d(),
            got: family.d(),
        });
    }
    let phi = params
        .phi()
        .iter()
        .enumerate()
        .map(|(i, &v)| if family.is_active(i) { v } else { 0.0 })
        .collect();
    Ok(TorusGraphParams {
        d: params.d(),
        phi,
        family: family.clone(),
    })
}
