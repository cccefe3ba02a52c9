//! Right-hand sides of the collapse models.
//!
//! Five laws are supported:
//!
//! | variant          | law                                                          | calculus      |
//! |------------------|--------------------------------------------------------------|---------------|
//! | `TwoStateStrat`  | order-parameter law with `Ŝ_z = 𝒩σ_z`, coupling `J = 𝒥/𝒩`    | Stratonovich  |
//! | `TwoStateIto`    | its Itô (CSL) form, valid when `ħ𝒥 = 2𝒟𝒩`                   | Itô           |
//! | `NStateStrat`    | projector law over an arbitrary collapse basis               | Stratonovich  |
//! | `NStateIto`      | its Itô (CSL) form                                           | Itô           |
//! | `ColoredNState`  | projector law driven by colored noise `ξ^k`, no Wiener term  | ordinary ODE  |
//!
//! Parameters are always stored in the physical convention (`ħ`, `𝒥`, `𝒩`
//! explicit). The rescaled convention with `ħ = 1` and `𝒩` absorbed into the
//! couplings maps onto it as `J_rescaled = 𝒥𝒩/ħ` and
//! `G_rescaled = 𝒩G/ħ`; the white-noise diffusion of a projector channel in
//! that convention is [`ModelSpec::channel_strength`].
//!
//! A colored model with effective diffusion `𝒟 = 2E∞[ξ²]G²τ` converges as
//! `τ → 0` to the Stratonovich projector law whose channel strength is
//! `𝒟𝒩²/ħ²`; Born statistics in that limit need `𝒟 = ħ𝒥/𝒩`
//! ([`ModelSpec::white_limit_diffusion`]). The two-state `𝒟` is defined on
//! the single `σ_z` channel and is half of that per-projector value, which is
//! why its relation reads `ħ𝒥 = 2𝒟𝒩`.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, HermitianOperator, ProjectorSet, StateVector, I, ZERO};
use crate::noise::{ColoredNoiseState, NoiseKind};

/// Relative tolerance for the fluctuation-dissipation relations.
pub const FDR_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    TwoStateStrat,
    TwoStateIto,
    NStateStrat,
    NStateIto,
    ColoredNState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Calculus {
    Ito,
    Stratonovich,
}

impl Variant {
    /// Stochastic calculus of the Wiener term; `None` for the colored law.
    pub fn calculus(self) -> Option<Calculus> {
        match self {
            Variant::TwoStateStrat | Variant::NStateStrat => Some(Calculus::Stratonovich),
            Variant::TwoStateIto | Variant::NStateIto => Some(Calculus::Ito),
            Variant::ColoredNState => None,
        }
    }

    pub fn is_two_state(self) -> bool {
        matches!(self, Variant::TwoStateStrat | Variant::TwoStateIto)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::TwoStateStrat => "two_state_strat",
            Variant::TwoStateIto => "two_state_ito",
            Variant::NStateStrat => "n_state_strat",
            Variant::NStateIto => "n_state_ito",
            Variant::ColoredNState => "colored_n_state",
        }
    }
}

/// Which law to integrate and all of its physical parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Defaults to zero when absent.
    pub hamiltonian: Option<HermitianOperator>,
    pub projectors: ProjectorSet,
    /// 𝒥, energy.
    pub coupling: f64,
    /// 𝒩, dimensionless.
    pub system_size: f64,
    pub hbar: f64,
    /// 𝒟: energy² · time for the two-state laws; for the colored law the
    /// effective `2E∞[ξ²]G²τ`.
    pub diffusion: Option<f64>,
    /// G, energy.
    pub noise_amplitude: Option<f64>,
    pub tau: Option<f64>,
    pub noise_kind: Option<NoiseKind>,
    pub fdr_enforced: bool,
}

impl ModelSpec {
    fn base(variant: Variant, projectors: ProjectorSet, coupling: f64, system_size: f64) -> Self {
        Self {
            variant,
            hamiltonian: None,
            projectors,
            coupling,
            system_size,
            hbar: 1.0,
            diffusion: None,
            noise_amplitude: None,
            tau: None,
            noise_kind: None,
            fdr_enforced: false,
        }
    }

    /// A two-state law on the canonical basis; run [`derive_fdr_params`] to
    /// fill `𝒟`.
    pub fn two_state(variant: Variant, coupling: f64, system_size: f64) -> Result<Self> {
        if !variant.is_two_state() {
            return Err(Error::VariantMismatch { expected: "a two-state variant".into(), found: variant.name().into() });
        }
        Ok(Self::base(variant, ProjectorSet::canonical(2)?, coupling, system_size))
    }

    pub fn n_state(variant: Variant, projectors: ProjectorSet, coupling: f64, system_size: f64) -> Result<Self> {
        if !matches!(variant, Variant::NStateStrat | Variant::NStateIto) {
            return Err(Error::VariantMismatch { expected: "an N-state white-noise variant".into(), found: variant.name().into() });
        }
        Ok(Self::base(variant, projectors, coupling, system_size))
    }

    pub fn colored(kind: NoiseKind, projectors: ProjectorSet, coupling: f64, system_size: f64, tau: f64) -> Self {
        let mut spec = Self::base(Variant::ColoredNState, projectors, coupling, system_size);
        spec.noise_kind = Some(kind);
        spec.tau = Some(tau);
        spec
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn with_hamiltonian(mut self, h: HermitianOperator) -> Self {
        self.hamiltonian = Some(h);
        self
    }

    pub fn with_diffusion(mut self, d: f64) -> Self {
        self.diffusion = Some(d);
        self
    }

    pub fn with_noise_amplitude(mut self, g: f64) -> Self {
        self.noise_amplitude = Some(g);
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn dim(&self) -> usize {
        self.projectors.dim()
    }

    /// `𝒥𝒩/ħ`, the dephasing rate of the averaged dynamics.
    pub fn collapse_rate(&self) -> f64 {
        self.coupling * self.system_size / self.hbar
    }

    /// `ħ𝒥/(2𝒩)`: the two-state diffusion satisfying the relation.
    pub fn fdr_diffusion(&self) -> f64 {
        self.hbar * self.coupling / (2.0 * self.system_size)
    }

    /// `ħ𝒥/𝒩`: the colored-law `𝒟` whose white-noise limit obeys the relation.
    pub fn white_limit_diffusion(&self) -> f64 {
        self.hbar * self.coupling / self.system_size
    }

    /// Number of independent Wiener channels (or colored channels).
    pub fn channel_count(&self) -> usize {
        if self.variant.is_two_state() {
            1
        } else {
            self.projectors.len()
        }
    }

    /// Squared coefficient `c²` of each Wiener channel `c (A_k - ⟨A_k⟩)ψ dW^k`.
    pub fn channel_strength(&self) -> Result<f64> {
        let n = self.system_size;
        let h = self.hbar;
        match self.variant {
            Variant::TwoStateStrat => {
                let d = self.diffusion.ok_or_else(|| {
                    Error::param("diffusion", "required by the Stratonovich two-state law")
                })?;
                Ok(d * n * n / (h * h))
            }
            Variant::TwoStateIto => Ok(self.collapse_rate() / 2.0),
            Variant::NStateStrat => Ok(match self.diffusion {
                Some(d) if !self.fdr_enforced => 2.0 * d * n * n / (h * h),
                _ => self.collapse_rate(),
            }),
            Variant::NStateIto => Ok(self.collapse_rate()),
            Variant::ColoredNState => Err(Error::VariantMismatch {
                expected: "a white-noise variant".into(),
                found: self.variant.name().into(),
            }),
        }
    }

    /// The Stratonovich projector law the colored law converges to as `τ → 0`.
    pub fn white_noise_limit(&self) -> Result<ModelSpec> {
        self.expect_variant(Variant::ColoredNState)?;
        let d = self.effective_diffusion()?;
        let mut white = Self::base(Variant::NStateStrat, self.projectors.clone(), self.coupling, self.system_size);
        white.hbar = self.hbar;
        white.hamiltonian = self.hamiltonian.clone();
        // Per-projector strength 𝒟𝒩²/ħ² in two-state units is 𝒟/2.
        white.diffusion = Some(d / 2.0);
        white.fdr_enforced = relative_eq(d, self.white_limit_diffusion());
        Ok(white)
    }

    fn effective_diffusion(&self) -> Result<f64> {
        if let Some(d) = self.diffusion {
            return Ok(d);
        }
        match (self.noise_amplitude, self.tau, self.noise_kind) {
            (Some(g), Some(tau), Some(kind)) => Ok(2.0 * kind.stationary_second_moment() * g * g * tau),
            _ => Err(Error::param("diffusion", "needs either 𝒟 or (G, τ, noise kind)")),
        }
    }

    fn expect_variant(&self, expected: Variant) -> Result<()> {
        if self.variant == expected {
            Ok(())
        } else {
            Err(Error::VariantMismatch { expected: expected.name().into(), found: self.variant.name().into() })
        }
    }

    /// Checks every parameter invariant.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        let nonneg = |name: &'static str, v: Option<f64>| match v {
            Some(x) if !(x >= 0.0) || !x.is_finite() => Err(Error::param(name, format!("must be nonnegative, got {x}"))),
            _ => Ok(()),
        };
        if !(self.coupling >= 0.0) || !self.coupling.is_finite() {
            return Err(Error::param("coupling", format!("must be nonnegative, got {}", self.coupling)));
        }
        positive("system_size", self.system_size)?;
        positive("hbar", self.hbar)?;
        nonneg("diffusion", self.diffusion)?;
        nonneg("noise_amplitude", self.noise_amplitude)?;
        nonneg("tau", self.tau)?;
        self.projectors.require_complete()?;
        if let Some(h) = &self.hamiltonian {
            if h.dim() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), found: h.dim() });
            }
        }
        if self.variant.is_two_state() && (self.dim() != 2 || self.projectors.len() != 2) {
            return Err(Error::param("projectors", "two-state laws need the canonical pair on a 2-dimensional space"));
        }
        match self.variant {
            Variant::ColoredNState => {
                positive("tau", self.tau.unwrap_or(0.0))?;
                if self.noise_kind.is_none() {
                    return Err(Error::param("noise_kind", "required by the colored law"));
                }
                if self.fdr_enforced {
                    let (g, d) = match (self.noise_amplitude, self.diffusion) {
                        (Some(g), Some(d)) => (g, d),
                        _ => return Err(Error::FdrConflict("fdr_enforced needs both diffusion and noise_amplitude".into())),
                    };
                    let expected = 2.0 * self.noise_kind.unwrap().stationary_second_moment() * g * g * self.tau.unwrap();
                    if !relative_eq(d, expected) {
                        return Err(Error::FdrConflict(format!(
                            "diffusion = {d} but 2·E[ξ²]·G²·τ = {expected}"
                        )));
                    }
                }
            }
            Variant::TwoStateIto if !self.fdr_enforced => return Err(Error::FdrNotEnforced),
            _ => {
                if self.fdr_enforced {
                    let d = self.diffusion.ok_or_else(|| Error::FdrConflict("fdr_enforced without diffusion".into()))?;
                    if !relative_eq(d, self.fdr_diffusion()) {
                        return Err(Error::FdrConflict(format!(
                            "diffusion = {d} but ħ𝒥/(2𝒩) = {}",
                            self.fdr_diffusion()
                        )));
                    }
                }
                if self.variant == Variant::TwoStateStrat && self.diffusion.is_none() {
                    return Err(Error::param("diffusion", "required by the Stratonovich two-state law"));
                }
            }
        }
        Ok(())
    }
}

fn relative_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= FDR_TOLERANCE * a.abs().max(b.abs()) || a == b
}

/// Drift and per-channel diffusion vectors at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct TermPair {
    pub drift: DVector<Complex64>,
    pub diffusion: Vec<DVector<Complex64>>,
    pub calculus: Calculus,
}

/// Diagonal of each channel operator `A_k`: the indicator of block `k` for
/// the projector laws, `(1, -1)` for the two-state law.
fn channel_diagonals(spec: &ModelSpec) -> Vec<Vec<f64>> {
    if spec.variant.is_two_state() {
        vec![vec![1.0, -1.0]]
    } else {
        let n = spec.dim();
        (0..spec.projectors.len())
            .map(|k| (0..n).map(|i| if spec.projectors.owner(i) == Some(k) { 1.0 } else { 0.0 }).collect())
            .collect()
    }
}

/// `⟨A⟩` for a diagonal `A`, normalized by `⟨ψ|ψ⟩`.
fn diag_mean(diag: &[f64], probs: &[f64]) -> f64 {
    diag.iter().zip(probs).map(|(a, p)| a * p).sum()
}

fn basis_probabilities(psi: &DVector<Complex64>) -> Vec<f64> {
    let total = psi.norm_squared();
    psi.iter().map(|a| a.norm_sqr() / total).collect()
}

/// `-(i/ħ) H ψ`, or zero.
fn unitary_part(spec: &ModelSpec, psi: &DVector<Complex64>) -> DVector<Complex64> {
    match &spec.hamiltonian {
        Some(h) => h.apply(psi) * (-I / spec.hbar),
        None => DVector::from_element(psi.len(), ZERO),
    }
}

fn check_state(spec: &ModelSpec, psi: &StateVector) -> Result<()> {
    if psi.dim() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: psi.dim() });
    }
    Ok(())
}

/// Scales each amplitude by a real per-index factor.
fn scale_by(psi: &DVector<Complex64>, f: impl Fn(usize) -> f64) -> DVector<Complex64> {
    DVector::from_iterator(psi.len(), psi.iter().enumerate().map(|(i, a)| a * f(i)))
}

/// Terms of any white-noise variant at an arbitrary (possibly unnormalized)
/// amplitude vector.
pub(crate) fn white_terms(spec: &ModelSpec, psi: &DVector<Complex64>) -> Result<TermPair> {
    let probs = basis_probabilities(psi);
    let strength = spec.channel_strength()?;
    let c = strength.sqrt();
    let mut drift = unitary_part(spec, psi);
    let diffusion;
    match spec.variant {
        Variant::TwoStateStrat | Variant::TwoStateIto => {
            let s = probs[0] - probs[1];
            let sigma = [1.0, -1.0];
            let rate = spec.collapse_rate();
            let extra = if spec.variant == Variant::TwoStateStrat {
                scale_by(psi, |i| rate * s * (sigma[i] - s))
            } else {
                scale_by(psi, |i| -0.25 * rate * (sigma[i] - s).powi(2))
            };
            drift += extra;
            diffusion = vec![scale_by(psi, |i| c * (sigma[i] - s))];
        }
        Variant::NStateStrat | Variant::NStateIto => {
            let p = &spec.projectors;
            let pops: Vec<f64> = (0..p.len()).map(|k| p.blocks()[k].iter().map(|&i| probs[i]).sum()).collect();
            let sum_sq: f64 = pops.iter().map(|x| x * x).sum();
            let own = |i: usize| p.owner(i).map(|k| pops[k]).unwrap_or(0.0);
            let rate = spec.collapse_rate();
            let extra = if spec.variant == Variant::NStateStrat {
                // 2λ Σ_k ⟨P_k⟩(P_k - ⟨P_k⟩)ψ
                scale_by(psi, |i| 2.0 * rate * (own(i) - sum_sq))
            } else {
                // -(λ/2) Σ_k (P_k - ⟨P_k⟩)²ψ
                scale_by(psi, |i| -0.5 * rate * (1.0 - 2.0 * own(i) + sum_sq))
            };
            drift += extra;
            diffusion = (0..p.len())
                .map(|k| {
                    scale_by(psi, |i| {
                        let indicator = if p.owner(i) == Some(k) { 1.0 } else { 0.0 };
                        c * (indicator - pops[k])
                    })
                })
                .collect();
        }
        Variant::ColoredNState => unreachable!("channel_strength rejects the colored law"),
    }
    Ok(TermPair { drift, diffusion, calculus: spec.variant.calculus().unwrap() })
}

fn expect_variant(spec: &ModelSpec, expected: Variant) -> Result<()> {
    spec.expect_variant(expected)
}

pub fn two_state_strat_terms(spec: &ModelSpec, psi: &StateVector) -> Result<TermPair> {
    expect_variant(spec, Variant::TwoStateStrat)?;
    check_state(spec, psi)?;
    if psi.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: psi.dim() });
    }
    white_terms(spec, psi.amplitudes())
}

pub fn two_state_ito_terms(spec: &ModelSpec, psi: &StateVector) -> Result<TermPair> {
    expect_variant(spec, Variant::TwoStateIto)?;
    if !spec.fdr_enforced {
        return Err(Error::FdrNotEnforced);
    }
    check_state(spec, psi)?;
    if psi.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: psi.dim() });
    }
    white_terms(spec, psi.amplitudes())
}

pub fn n_state_strat_terms(spec: &ModelSpec, psi: &StateVector) -> Result<TermPair> {
    expect_variant(spec, Variant::NStateStrat)?;
    spec.projectors.require_complete()?;
    check_state(spec, psi)?;
    white_terms(spec, psi.amplitudes())
}

pub fn n_state_ito_terms(spec: &ModelSpec, psi: &StateVector) -> Result<TermPair> {
    expect_variant(spec, Variant::NStateIto)?;
    spec.projectors.require_complete()?;
    check_state(spec, psi)?;
    white_terms(spec, psi.amplitudes())
}

/// Dispatches to the term function of any white-noise variant.
pub fn terms(spec: &ModelSpec, psi: &StateVector) -> Result<TermPair> {
    match spec.variant {
        Variant::TwoStateStrat => two_state_strat_terms(spec, psi),
        Variant::TwoStateIto => two_state_ito_terms(spec, psi),
        Variant::NStateStrat => n_state_strat_terms(spec, psi),
        Variant::NStateIto => n_state_ito_terms(spec, psi),
        Variant::ColoredNState => Err(Error::VariantMismatch {
            expected: "a white-noise variant".into(),
            found: spec.variant.name().into(),
        }),
    }
}

/// `Ĉψ` with `Ĉ = c² Σ_k (½[A_k - ⟨A_k⟩]² - [⟨A_k²⟩ - ⟨A_k⟩²])`, the drift
/// that turns the Stratonovich product `c(A_k - ⟨A_k⟩)ψ ∘ dW^k` into an Itô
/// product.
pub fn stratonovich_correction(spec: &ModelSpec, psi: &StateVector) -> Result<DVector<Complex64>> {
    check_state(spec, psi)?;
    spec.projectors.require_complete()?;
    let strength = spec.channel_strength()?;
    let amps = psi.amplitudes();
    let probs = basis_probabilities(amps);
    let mut factor = vec![0.0; amps.len()];
    for diag in channel_diagonals(spec) {
        let mean = diag_mean(&diag, &probs);
        let mean_sq: f64 = diag.iter().zip(&probs).map(|(a, p)| a * a * p).sum();
        let variance = mean_sq - mean * mean;
        for (i, f) in factor.iter_mut().enumerate() {
            *f += 0.5 * (diag[i] - mean).powi(2) - variance;
        }
    }
    Ok(scale_by(amps, |i| strength * factor[i]))
}

/// Time derivative of the colored law at amplitudes `psi` and noise values `xi`.
pub(crate) fn colored_rhs(spec: &ModelSpec, psi: &DVector<Complex64>, xi: &[f64]) -> Result<DVector<Complex64>> {
    let g = spec.noise_amplitude.ok_or_else(|| Error::param("noise_amplitude", "required by the colored law"))?;
    let p = &spec.projectors;
    if xi.len() != p.len() {
        return Err(Error::ChannelMismatch { expected: p.len(), found: xi.len() });
    }
    let total = psi.norm_squared();
    let pops: Vec<f64> = (0..p.len()).map(|k| p.weight(k, psi) / total).collect();
    // Σ_k ⟨P_k⟩ c_k, with c_k = 2𝒥⟨P_k⟩ + Gξ^k
    let coefs: Vec<f64> = pops.iter().zip(xi).map(|(pk, x)| 2.0 * spec.coupling * pk + g * x).collect();
    let mean_coef: f64 = pops.iter().zip(&coefs).map(|(pk, ck)| pk * ck).sum();
    let scale = spec.system_size / spec.hbar;
    let mut out = unitary_part(spec, psi);
    out += scale_by(psi, |i| {
        let own = p.owner(i).map(|k| coefs[k]).unwrap_or(0.0);
        scale * (own - mean_coef)
    });
    Ok(out)
}

/// `dψ/dt` of the colored law; there is no Wiener term.
pub fn colored_terms(spec: &ModelSpec, psi: &StateVector, xi: &ColoredNoiseState) -> Result<DVector<Complex64>> {
    expect_variant(spec, Variant::ColoredNState)?;
    check_state(spec, psi)?;
    colored_rhs(spec, psi.amplitudes(), xi.xi())
}

/// `dE/dt = (𝒥𝒩/ħ)(Σ_k Tr[ρ P_k H P_k] - Tr[ρ H])` for the averaged dynamics.
pub fn energy_rate(spec: &ModelSpec, rho: &DensityMatrix) -> Result<f64> {
    let h = spec.hamiltonian.as_ref().ok_or(Error::MissingHamiltonian)?;
    if rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: rho.dim() });
    }
    let dephased = spec.projectors.dephase(h.matrix());
    let a = (rho.matrix() * dephased).trace().re;
    let b = (rho.matrix() * h.matrix()).trace().re;
    Ok(spec.collapse_rate() * (a - b))
}

/// Fills the missing noise parameter so the fluctuation-dissipation relation
/// holds and marks the spec as enforcing it.
///
/// White-noise laws derive `𝒟 = ħ𝒥/(2𝒩)`. The colored law relates
/// `𝒟 = 2E∞[ξ²]G²τ` and needs exactly one of `𝒟`, `G`.
pub fn derive_fdr_params(spec: &ModelSpec) -> Result<ModelSpec> {
    let mut out = spec.clone();
    match spec.variant {
        Variant::ColoredNState => {
            let kind = spec.noise_kind.ok_or_else(|| Error::param("noise_kind", "required by the colored law"))?;
            let tau = spec.tau.filter(|t| *t > 0.0).ok_or_else(|| Error::param("tau", "must be positive"))?;
            let moment = kind.stationary_second_moment();
            match (spec.diffusion, spec.noise_amplitude) {
                (None, Some(g)) => out.diffusion = Some(2.0 * moment * g * g * tau),
                (Some(d), None) => out.noise_amplitude = Some((d / (2.0 * moment * tau)).sqrt()),
                (Some(d), Some(g)) => {
                    let implied = 2.0 * moment * g * g * tau;
                    if !relative_eq(d, implied) {
                        return Err(Error::FdrConflict(format!(
                            "over-determined: diffusion = {d} and noise_amplitude = {g} imply 2·E[ξ²]·G²·τ = {implied}"
                        )));
                    }
                }
                (None, None) => {
                    return Err(Error::FdrConflict(
                        "under-determined: set one of diffusion, noise_amplitude".into(),
                    ))
                }
            }
        }
        _ => {
            if let Some(g) = spec.noise_amplitude {
                return Err(Error::FdrConflict(format!(
                    "over-determined: noise_amplitude = {g} has no role in the {} law",
                    spec.variant.name()
                )));
            }
            let target = spec.fdr_diffusion();
            match spec.diffusion {
                None => out.diffusion = Some(target),
                Some(d) if relative_eq(d, target) => {}
                Some(d) => {
                    return Err(Error::FdrConflict(format!(
                        "over-determined: diffusion = {d} but ħ𝒥/(2𝒩) = {target}"
                    )))
                }
            }
        }
    }
    out.fdr_enforced = true;
    Ok(out)
}
