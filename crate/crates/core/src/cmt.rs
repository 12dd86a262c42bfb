//! Coupled-mode theory for arrays of dual-mode guides.
//!
//! Coupling coefficients are carried as a single effective `κ` in rad/μm; the
//! analytic directional-coupler transfer uses the form
//! `C¹(z) = cos(κz)C¹(0) − i sin(κz)C²(0)`, `C²(z) = −i sin(κz)C¹(0) + cos(κz)C²(0)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, TransverseGrid, C64};
use crate::mode_solver::{effective_indices, solve_te_modes, Layer, SlabGeometry};

const I: C64 = C64::new(0.0, 1.0);

/// Propagation constants and couplings for `guides × modes_per_guide` amplitudes,
/// flattened as `guide * modes_per_guide + mode`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledModeSystem {
    guides: usize,
    modes_per_guide: usize,
    betas: Vec<f64>,
    kappas: Vec<Vec<C64>>,
    z_span: (f64, f64),
}

impl CoupledModeSystem {
    pub fn new(
        guides: usize,
        modes_per_guide: usize,
        betas: Vec<f64>,
        kappas: Vec<Vec<C64>>,
        z_span: (f64, f64),
    ) -> Result<Self> {
        let n = guides * modes_per_guide;
        if n == 0 || betas.len() != n || kappas.len() != n || kappas.iter().any(|r| r.len() != n) {
            return Err(Error::Geometry(format!("expected {n} propagation constants and a {n}x{n} coupling matrix")));
        }
        if !(z_span.1 > z_span.0) {
            return Err(Error::Geometry(format!("empty z span {:?}", z_span)));
        }
        for a in 0..n {
            if kappas[a][a].im.abs() > 1e-10 {
                return Err(Error::Geometry(format!("self coupling {a} is not real")));
            }
            for b in 0..a {
                if (kappas[a][b] - kappas[b][a].conj()).norm() > 1e-10 {
                    return Err(Error::Geometry(format!("coupling ({a},{b}) is not Hermitian")));
                }
            }
        }
        Ok(Self { guides, modes_per_guide, betas, kappas, z_span })
    }

    /// Two single-mode-per-guide channels coupled by `kappa`.
    pub fn pair(beta1: f64, beta2: f64, kappa: f64, length: f64) -> Result<Self> {
        let k = C64::new(kappa, 0.0);
        let z = C64::new(0.0, 0.0);
        Self::new(2, 1, vec![beta1, beta2], vec![vec![z, k], vec![k, z]], (0.0, length))
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn guides(&self) -> usize {
        self.guides
    }

    pub fn modes_per_guide(&self) -> usize {
        self.modes_per_guide
    }

    pub fn z_span(&self) -> (f64, f64) {
        self.z_span
    }

    pub fn max_coupling(&self) -> f64 {
        self.kappas.iter().flatten().map(|k| k.norm()).fold(0.0, f64::max)
    }

    fn derivative(&self, z: f64, c: &[C64]) -> Vec<C64> {
        let n = c.len();
        (0..n)
            .map(|a| {
                let direction = self.betas[a].signum();
                let sum: C64 = (0..n)
                    .filter(|&b| self.kappas[a][b] != C64::new(0.0, 0.0))
                    .map(|b| {
                        let phase = (self.betas[a] - self.betas[b]) * z;
                        self.kappas[a][b] * c[b] * C64::from_polar(1.0, phase)
                    })
                    .sum();
                -I * direction * sum
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeAmplitudes {
    pub z: f64,
    pub values: Vec<C64>,
}

impl ModeAmplitudes {
    pub fn total_power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Classical RK4 integration of the coupled-mode equations, with the
/// phase-mismatch exponentials evaluated exactly at every stage.
pub fn integrate_coupled_modes(system: &CoupledModeSystem, initial: &ModeAmplitudes, dz: f64) -> Result<Vec<ModeAmplitudes>> {
    if initial.values.len() != system.len() {
        return Err(Error::Geometry(format!(
            "{} initial amplitudes for a {}-amplitude system",
            initial.values.len(),
            system.len()
        )));
    }
    if !(dz > 0.0) {
        return Err(Error::StepTooLarge(format!("step {dz} must be positive")));
    }
    if system.max_coupling() * dz >= 0.1 {
        return Err(Error::StepTooLarge(format!("max |kappa| * dz = {:.3} must stay below 0.1", system.max_coupling() * dz)));
    }
    let (z0, z1) = system.z_span;
    let steps = ((z1 - z0) / dz).ceil().max(1.0) as usize;
    let h = (z1 - z0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut c = initial.values.clone();
    out.push(ModeAmplitudes { z: z0, values: c.clone() });
    let axpy = |base: &[C64], k: &[C64], s: f64| -> Vec<C64> { base.iter().zip(k).map(|(b, k)| b + k * s).collect() };
    for step in 0..steps {
        let z = z0 + step as f64 * h;
        let k1 = system.derivative(z, &c);
        let k2 = system.derivative(z + 0.5 * h, &axpy(&c, &k1, 0.5 * h));
        let k3 = system.derivative(z + 0.5 * h, &axpy(&c, &k2, 0.5 * h));
        let k4 = system.derivative(z + h, &axpy(&c, &k3, h));
        for (i, ci) in c.iter_mut().enumerate() {
            *ci += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
        }
        if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Diverged { step: step + 1, z: z + h });
        }
        out.push(ModeAmplitudes { z: z0 + (step + 1) as f64 * h, values: c.clone() });
    }
    Ok(out)
}

/// Exact two-guide transfer of one mode order through a uniform coupler.
pub fn dc_transfer(kappa: f64, length: f64, initial: (C64, C64)) -> (C64, C64) {
    let (c, s) = ((kappa * length).cos(), (kappa * length).sin());
    (c * initial.0 - I * s * initial.1, -I * s * initial.0 + c * initial.1)
}

/// `prefactor · ∫ Ψ_a* Δ(n²) Ψ_b dx`, the real part of the overlap integral.
pub fn coupling_coefficient(
    mode_a: &ComplexField,
    mode_b: &ComplexField,
    index_perturbation: &[f64],
    prefactor: f64,
) -> Result<f64> {
    if !mode_a.grid().matches(mode_b.grid()) {
        return Err(Error::GridMismatch("coupled mode profiles".into()));
    }
    if index_perturbation.len() != mode_a.grid().len() {
        return Err(Error::GridMismatch(format!(
            "perturbation has {} samples, grid {}",
            index_perturbation.len(),
            mode_a.grid().len()
        )));
    }
    let integrand: Vec<C64> =
        mode_a.samples().iter().zip(mode_b.samples()).zip(index_perturbation).map(|((a, b), d)| a.conj() * b * *d).collect();
    Ok(prefactor * mode_a.grid().integrate_complex(&integrand).re)
}

pub const SEPARATOR_PHASE_TOLERANCE: f64 = 1e-3;

/// A coupler length with `κ₀L = 2πm` and `κ₁L = π/2 + 2πn`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatorDesign {
    pub length: f64,
    pub m: u32,
    pub n: u32,
    /// Largest of the two phase residuals, rad.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SeparatorOutcome {
    Feasible(SeparatorDesign),
    /// No pair met the tolerance; carries the closest candidate.
    Infeasible {
        best: SeparatorDesign,
    },
}

impl SeparatorOutcome {
    pub fn design(&self) -> SeparatorDesign {
        match *self {
            SeparatorOutcome::Feasible(d) => d,
            SeparatorOutcome::Infeasible { best } => best,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, SeparatorOutcome::Feasible(_))
    }
}

/// Smallest length routing mode 0 back to its own guide and mode 1 across.
///
/// For each integer pair the length balancing both phase residuals is
/// `L = (2πm + π/2 + 2πn) / (κ₀ + κ₁)`; pairs are enumerated for every `m`
/// whose nominal length fits in `l_max`.
pub fn design_mode_separator(kappa0: f64, kappa1: f64, l_max: f64) -> Result<SeparatorOutcome> {
    if !(kappa0 > 0.0 && kappa1 > 0.0) {
        return Err(Error::Geometry(format!("coupling constants must be positive: {kappa0}, {kappa1}")));
    }
    if !(l_max > 0.0) {
        return Err(Error::Geometry(format!("maximum length {l_max} must be positive")));
    }
    let evaluate = |m: u32, n: u32| {
        let a0 = 2.0 * PI * m as f64;
        let a1 = PI / 2.0 + 2.0 * PI * n as f64;
        let length = (a0 + a1) / (kappa0 + kappa1);
        let residual = (kappa0 * a1 - kappa1 * a0).abs() / (kappa0 + kappa1);
        SeparatorDesign { length, m, n, residual }
    };
    let mut best: Option<SeparatorDesign> = None;
    let mut feasible: Option<SeparatorDesign> = None;
    let m_max = ((l_max * kappa0) / (2.0 * PI) + 1.0).floor() as u32;
    for m in 1..=m_max.max(1) {
        let ideal_n = (kappa1 * 2.0 * PI * m as f64 / kappa0 - PI / 2.0) / (2.0 * PI);
        let centre = ideal_n.round().max(0.0) as u32;
        for n in centre.saturating_sub(1)..=centre + 1 {
            let d = evaluate(m, n);
            let fits = d.length <= l_max;
            if fits && d.residual <= SEPARATOR_PHASE_TOLERANCE && feasible.is_none_or(|f| d.length < f.length) {
                feasible = Some(d);
            }
            let better = match best {
                None => true,
                Some(b) => {
                    let b_fits = b.length <= l_max;
                    (fits && !b_fits) || (fits == b_fits && d.residual < b.residual)
                }
            };
            if better {
                best = Some(d);
            }
        }
    }
    Ok(match feasible {
        Some(d) => SeparatorOutcome::Feasible(d),
        None => SeparatorOutcome::Infeasible { best: best.expect("at least one candidate") },
    })
}

/// A symmetric dual-mode guide used as one side of a directional coupler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuideSpec {
    pub n_core: f64,
    pub n_clad: f64,
    pub width: f64,
    pub wavelength: f64,
}

impl GuideSpec {
    pub fn nominal() -> Self {
        Self { n_core: 1.57, n_clad: 1.55, width: 3.0, wavelength: 1.064 }
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn slab(&self) -> Result<SlabGeometry> {
        SlabGeometry::symmetric(self.n_core, self.n_clad, self.width, self.wavelength)
    }

    /// Two copies separated by an edge-to-edge `gap`, centred on `x = 0`.
    pub fn pair(&self, gap: f64) -> Result<SlabGeometry> {
        SlabGeometry::new(
            vec![
                Layer::new(self.n_clad, 0.0),
                Layer::new(self.n_core, self.width),
                Layer::new(self.n_clad, gap),
                Layer::new(self.n_core, self.width),
                Layer::new(self.n_clad, 0.0),
            ],
            self.wavelength,
            -self.width - gap / 2.0,
        )
    }
}

/// Same-order coupling constants `[κ₀, κ₁]` from the even/odd supermode
/// splitting `(β_even − β_odd)/2` of the two-guide structure.
pub fn supermode_kappas(guide: &GuideSpec, gap: f64) -> Result<[f64; 2]> {
    let n = effective_indices(&guide.pair(gap)?, 4)?;
    if n.len() < 4 {
        return Err(Error::NoGuidedModes(format!("gap {gap} um supports {} supermodes, need 4", n.len())));
    }
    let k = guide.wavenumber();
    Ok([0.5 * k * (n[0] - n[1]), 0.5 * k * (n[2] - n[3])])
}

/// Coupling constant of mode `order` from the overlap integral
/// `(k²/2β) ∫ Ψ¹ Δ(n²) Ψ²` with the perturbation of the first core.
pub fn overlap_kappa(guide: &GuideSpec, gap: f64, order: usize, grid: &TransverseGrid) -> Result<f64> {
    let offset = 0.5 * (guide.width + gap);
    let single = guide.slab()?;
    let first = solve_te_modes(&single.shifted(-offset), grid, order + 1)?;
    let second = solve_te_modes(&single.shifted(offset), grid, order + 1)?;
    if first.len() <= order {
        return Err(Error::NoGuidedModes(format!("guide has no mode of order {order}")));
    }
    let delta = guide.n_core.powi(2) - guide.n_clad.powi(2);
    let core = single.shifted(-offset).core_fraction(grid);
    let perturbation: Vec<f64> = core.iter().map(|f| f * delta).collect();
    let beta = first.mode(order).beta;
    let k = guide.wavenumber();
    coupling_coefficient(&second.mode(order).profile, &first.mode(order).profile, &perturbation, k * k / (2.0 * beta))
}

/// Coupling phase `∫ κ_j dz` picked up while the gap opens linearly from
/// `gap_near` to `gap_far` at `separation_rate` (gap change per μm of z).
pub fn transition_phases(guide: &GuideSpec, gap_near: f64, gap_far: f64, separation_rate: f64) -> Result<[f64; 2]> {
    if !(separation_rate > 0.0) {
        return Err(Error::Geometry(format!("separation rate {separation_rate} must be positive")));
    }
    if gap_far <= gap_near {
        return Ok([0.0, 0.0]);
    }
    // Composite Simpson in the gap variable.
    let intervals = (((gap_far - gap_near) / 0.02).ceil() as usize).max(2);
    let intervals = intervals + intervals % 2;
    let h = (gap_far - gap_near) / intervals as f64;
    let mut acc = [0.0; 2];
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let k = supermode_kappas(guide, gap_near + i as f64 * h)?;
        acc[0] += w * k[0];
        acc[1] += w * k[1];
    }
    Ok([acc[0] * h / 3.0 / separation_rate, acc[1] * h / 3.0 / separation_rate])
}

/// Geometry of a symmetric coupler: two linear transitions of the gap between
/// `far_gap` and `gap` around a uniform section of `length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerGeometry {
    pub gap: f64,
    pub length: f64,
    pub far_gap: f64,
    /// Rate at which the edge-to-edge gap changes along z in the transitions.
    pub separation_rate: f64,
}

impl CouplerGeometry {
    pub fn transition_length(&self) -> f64 {
        (self.far_gap - self.gap).max(0.0) / self.separation_rate
    }
}

/// Total accumulated coupling phases `θ_j = κ_j L + 2∫κ_j dz` through a coupler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerPhases {
    pub kappas: [f64; 2],
    pub transition: [f64; 2],
    pub total: [f64; 2],
}

pub fn coupler_phases(guide: &GuideSpec, geometry: &CouplerGeometry) -> Result<CouplerPhases> {
    let kappas = supermode_kappas(guide, geometry.gap)?;
    let transition = transition_phases(guide, geometry.gap, geometry.far_gap, geometry.separation_rate)?;
    let total = [kappas[0] * geometry.length + 2.0 * transition[0], kappas[1] * geometry.length + 2.0 * transition[1]];
    Ok(CouplerPhases { kappas, transition, total })
}

/// A coupler geometry meeting the separator condition including its transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerDesign {
    pub geometry: CouplerGeometry,
    pub m: u32,
    pub n: u32,
    pub phases: CouplerPhases,
    /// Largest deviation of `θ₀` from `2πm` and `θ₁` from `π/2 + 2πn`, rad.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerSearch {
    pub gap_min: f64,
    pub gap_max: f64,
    pub far_gap: f64,
    pub separation_rate: f64,
    pub max_length: f64,
}

/// Searches gap and uniform length so that, transitions included, mode 0
/// returns to its guide and mode 1 crosses. The shortest uniform section wins.
pub fn design_separator_coupler(guide: &GuideSpec, search: &CouplerSearch) -> Result<CouplerDesign> {
    if !(search.gap_max > search.gap_min && search.gap_min > 0.0 && search.far_gap >= search.gap_max) {
        return Err(Error::Geometry(format!("invalid gap search {search:?}")));
    }
    // Tabulate κ_j(s) and the cumulative transition integral from s to the far gap.
    let ds = 0.01;
    let count = ((search.far_gap - search.gap_min) / ds).ceil() as usize;
    let gaps: Vec<f64> = (0..=count).map(|i| search.gap_min + i as f64 * ds).collect();
    let kap: Vec<[f64; 2]> = gaps.iter().map(|&g| supermode_kappas(guide, g)).collect::<Result<_>>()?;
    let mut tail = vec![[0.0; 2]; gaps.len()];
    for i in (0..gaps.len() - 1).rev() {
        let h = gaps[i + 1] - gaps[i];
        for j in 0..2 {
            tail[i][j] = tail[i + 1][j] + 0.5 * h * (kap[i][j] + kap[i + 1][j]) / search.separation_rate;
        }
    }
    let last_search = gaps.iter().position(|&g| g >= search.gap_max).unwrap_or(gaps.len() - 1);
    let lengths = |i: usize, m: u32, n: u32| {
        let l0 = (2.0 * PI * m as f64 - 2.0 * tail[i][0]) / kap[i][0];
        let l1 = (PI / 2.0 + 2.0 * PI * n as f64 - 2.0 * tail[i][1]) / kap[i][1];
        (l0, l1)
    };
    let mut best: Option<(f64, f64, u32, u32)> = None;
    for m in 1..=8u32 {
        for n in 0..=24u32 {
            for i in 0..last_search {
                let (a0, a1) = lengths(i, m, n);
                let (b0, b1) = lengths(i + 1, m, n);
                let fa = a0 - a1;
                let fb = b0 - b1;
                if fa.signum() == fb.signum() {
                    continue;
                }
                let t = fa / (fa - fb);
                let gap = gaps[i] + t * (gaps[i + 1] - gaps[i]);
                let length = a0 + t * (b0 - a0);
                if length > 0.0 && length <= search.max_length && best.is_none_or(|b| length < b.1) {
                    best = Some((gap, length, m, n));
                }
            }
        }
    }
    let (gap, _, m, n) = best.ok_or_else(|| Error::Infeasible(format!("no separator coupler within {search:?}")))?;
    // Polish with direct integration: secant iterations on the gap.
    let solve_length = |gap: f64| -> Result<(f64, f64, CouplerPhases)> {
        let geometry = CouplerGeometry { gap, length: 0.0, far_gap: search.far_gap, separation_rate: search.separation_rate };
        let p = coupler_phases(guide, &geometry)?;
        let l0 = (2.0 * PI * m as f64 - 2.0 * p.transition[0]) / p.kappas[0];
        let l1 = (PI / 2.0 + 2.0 * PI * n as f64 - 2.0 * p.transition[1]) / p.kappas[1];
        Ok((l0, l1, p))
    };
    let (mut g_prev, mut f_prev) = {
        let (l0, l1, _) = solve_length(gap)?;
        (gap, l0 - l1)
    };
    let mut g_cur = gap + 1e-3;
    for _ in 0..20 {
        let (l0, l1, _) = solve_length(g_cur)?;
        let f_cur = l0 - l1;
        if f_cur.abs() < 1e-9 || f_cur == f_prev {
            break;
        }
        let next = g_cur - f_cur * (g_cur - g_prev) / (f_cur - f_prev);
        g_prev = g_cur;
        f_prev = f_cur;
        g_cur = next;
    }
    let gap = g_cur;
    let (l0, l1, _) = solve_length(gap)?;
    let length = 0.5 * (l0 + l1);
    let geometry = CouplerGeometry { gap, length, far_gap: search.far_gap, separation_rate: search.separation_rate };
    let phases = coupler_phases(guide, &geometry)?;
    let residual = (phases.total[0] - 2.0 * PI * m as f64).abs().max((phases.total[1] - PI / 2.0 - 2.0 * PI * n as f64).abs());
    Ok(CouplerDesign { geometry, m, n, phases, residual })
}
