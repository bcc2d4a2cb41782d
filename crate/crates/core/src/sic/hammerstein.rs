//! Parallel Hammerstein digital canceller.
//!
//! Each odd-order branch `psi_p(n) = x(n) |x(n)|^(p-1)` of the known transmit
//! baseband feeds its own FIR filter; the filter taps of all branches are
//! found jointly by ridge-regularised least squares.
//!
//! Two framings are supported. [`Framing::Linear`] uses plain time-domain
//! delays with zero fill. [`Framing::Ofdm`] works per OFDM symbol on the
//! active subcarriers, where a delay of `m` samples is the phase ramp
//! `exp(-j 2 pi k m / N)`; this matches SI paths that are circular within the
//! cyclic prefix and needs no out-of-band modelling.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ofdm::{OfdmConfig, OfdmFft};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HammersteinSpec {
    /// Odd nonlinearity orders, e.g. `[1, 3, 5]`.
    pub orders: Vec<u32>,
    /// Taps per branch.
    pub memory_len: usize,
    /// How many of the taps are pre-cursor (negative lags).
    pub pre_cursor: usize,
    /// Ridge weight relative to the mean diagonal of the column-normalised
    /// Gram matrix.
    pub ridge: f64,
}

impl Default for HammersteinSpec {
    fn default() -> Self {
        Self {
            orders: vec![1, 3, 5],
            memory_len: 16,
            pre_cursor: 6,
            ridge: 1e-8,
        }
    }
}

impl HammersteinSpec {
    pub fn linear_only(&self) -> Self {
        Self {
            orders: vec![1],
            ..self.clone()
        }
    }

    pub fn unknowns(&self) -> usize {
        self.orders.len() * self.memory_len
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if self.orders.is_empty() || self.orders.iter().any(|p| p % 2 == 0) {
            return Err(Error::invalid(format!("{path}.orders"), "need a non-empty set of odd orders"));
        }
        if self.orders.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!("{path}.orders"), "orders must be strictly increasing"));
        }
        if self.memory_len == 0 {
            return Err(Error::invalid(format!("{path}.memory_len"), "must be at least 1"));
        }
        if self.pre_cursor >= self.memory_len {
            return Err(Error::invalid(format!("{path}.pre_cursor"), "must be below memory_len"));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::invalid(format!("{path}.ridge"), "must be non-negative"));
        }
        Ok(())
    }

    fn lags(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.memory_len).map(move |j| j as i64 - self.pre_cursor as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Framing {
    Linear,
    Ofdm(OfdmConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammersteinModel {
    pub spec: HammersteinSpec,
    pub framing: Framing,
    /// `coeffs[branch][tap]`, tap `j` at lag `j - pre_cursor`.
    pub coeffs: Vec<Vec<Complex64>>,
}

impl HammersteinModel {
    pub fn zeros(spec: HammersteinSpec, framing: Framing) -> Self {
        let coeffs = vec![vec![Complex64::default(); spec.memory_len]; spec.orders.len()];
        Self { spec, framing, coeffs }
    }

    /// L2 norm of one branch's coefficients.
    pub fn branch_norm(&self, branch: usize) -> f64 {
        self.coeffs[branch].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    fn flat(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.spec.unknowns(), self.coeffs.iter().flatten().copied())
    }

    /// Residual power left on `(tx, rx)`, measured the same way as the fit
    /// objective: mean sample power for the linear framing, active-subcarrier
    /// power for the OFDM framing.
    pub fn residual_power(&self, tx: &[Complex64], rx: &[Complex64]) -> Result<f64> {
        let res = apply_digital_sic(tx, rx, self)?;
        match self.framing {
            Framing::Linear => Ok(crate::units::mean_power(&res)),
            Framing::Ofdm(cfg) => crate::ofdm::in_band_power(&OfdmFft::new(&cfg), &res),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HammersteinFit {
    pub model: HammersteinModel,
    /// Training residual in the units of [`HammersteinModel::residual_power`].
    pub residual_power: f64,
    /// Set when the basis was rank-deficient beyond the ridge tolerance.
    pub conditioning_warning: bool,
    pub rows: usize,
}

fn branch(x: &[Complex64], p: u32) -> Vec<Complex64> {
    x.iter().map(|v| v * v.norm().powi(p as i32 - 1)).collect()
}

/// Regression problem: design matrix, target and the factor that converts a
/// sum of squared row errors into residual power.
struct Design {
    psi: DMatrix<Complex64>,
    target: DVector<Complex64>,
    power_scale: f64,
}

fn check_lengths(tx: &[Complex64], rx: &[Complex64]) -> Result<()> {
    if tx.len() != rx.len() {
        return Err(Error::Shape {
            what: "receive block length",
            expected: tx.len(),
            got: rx.len(),
        });
    }
    Ok(())
}

fn build_design(tx: &[Complex64], rx: Option<&[Complex64]>, spec: &HammersteinSpec, framing: &Framing) -> Result<Design> {
    let u = spec.unknowns();
    match framing {
        Framing::Linear => {
            let n = tx.len();
            let mut psi = DMatrix::<Complex64>::zeros(n, u);
            for (b, &p) in spec.orders.iter().enumerate() {
                let col_src = branch(tx, p);
                for (j, lag) in spec.lags().enumerate() {
                    let mut col = psi.column_mut(b * spec.memory_len + j);
                    for i in 0..n {
                        let k = i as i64 - lag;
                        if (0..n as i64).contains(&k) {
                            col[i] = col_src[k as usize];
                        }
                    }
                }
            }
            let target = DVector::from_iterator(n, rx.unwrap_or(&[]).iter().copied().chain(std::iter::repeat(Complex64::default())).take(n));
            Ok(Design {
                psi,
                target,
                power_scale: 1.0 / n.max(1) as f64,
            })
        }
        Framing::Ofdm(cfg) => {
            let fft = OfdmFft::new(cfg);
            let bins = cfg.active_bins();
            let n = cfg.fft_size;
            let spectra: Vec<Vec<Vec<Complex64>>> = spec
                .orders
                .iter()
                .map(|&p| fft.spectra(&branch(tx, p)))
                .collect::<Result<_>>()?;
            let n_sym = spectra[0].len();
            let rows = n_sym * bins.len();
            let ramps: Vec<Vec<Complex64>> = bins
                .iter()
                .map(|&k| {
                    spec.lags()
                        .map(|m| Complex64::from_polar(1.0, -2.0 * PI * (k as f64) * (m as f64) / n as f64))
                        .collect()
                })
                .collect();
            let mut psi = DMatrix::<Complex64>::zeros(rows, u);
            for (b, sp) in spectra.iter().enumerate() {
                for (s, sym) in sp.iter().enumerate().take(n_sym) {
                    for (ki, &k) in bins.iter().enumerate() {
                        let row = s * bins.len() + ki;
                        let v = sym[k];
                        for j in 0..spec.memory_len {
                            psi[(row, b * spec.memory_len + j)] = v * ramps[ki][j];
                        }
                    }
                }
            }
            let target = match rx {
                Some(rx) => {
                    let rs = fft.spectra(rx)?;
                    DVector::from_iterator(rows, rs.iter().flat_map(|s| bins.iter().map(move |&k| s[k])))
                }
                None => DVector::zeros(rows),
            };
            Ok(Design {
                psi,
                target,
                power_scale: 1.0 / ((n * n) as f64 * n_sym.max(1) as f64),
            })
        }
    }
}

/// Fit a parallel Hammerstein model mapping `tx` onto `rx`.
///
/// Short training blocks (fewer than ten rows per unknown) are accepted with a
/// log warning. A basis that is rank-deficient beyond the ridge tolerance is
/// solved by SVD and flagged in [`HammersteinFit::conditioning_warning`].
pub fn fit_hammerstein(
    tx: &[Complex64],
    rx: &[Complex64],
    spec: &HammersteinSpec,
    framing: Framing,
) -> Result<HammersteinFit> {
    spec.validate("hammerstein")?;
    check_lengths(tx, rx)?;
    if let Framing::Ofdm(cfg) = &framing {
        cfg.validate("ofdm")?;
    }
    let d = build_design(tx, Some(rx), spec, &framing)?;
    let u = spec.unknowns();
    let rows = d.psi.nrows();
    if rows < 10 * u {
        warn!("Hammerstein training block has {rows} rows for {u} unknowns (fewer than 10 per unknown)");
    }

    let gram = d.psi.ad_mul(&d.psi);
    let rhs = d.psi.ad_mul(&d.target);
    // Column equilibration: scale every basis column to unit norm.
    let inv_norm: Vec<f64> = (0..u)
        .map(|i| {
            let g = gram[(i, i)].re;
            if g > 0.0 {
                1.0 / g.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut gs = gram.clone();
    for i in 0..u {
        for j in 0..u {
            gs[(i, j)] *= inv_norm[i] * inv_norm[j];
        }
    }
    let bs = DVector::from_iterator(u, (0..u).map(|i| rhs[i] * inv_norm[i]));
    let mean_diag = (0..u).map(|i| gs[(i, i)].re).sum::<f64>() / u as f64;
    let lambda = spec.ridge * mean_diag;

    let eig = gs.clone().symmetric_eigenvalues();
    let (emin, emax) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    let tolerance = spec.ridge.max(f64::EPSILON * u as f64);
    let mut conditioning_warning = inv_norm.contains(&0.0) || emin <= tolerance * emax;

    let mut reg = gs.clone();
    for i in 0..u {
        reg[(i, i)] += lambda;
    }
    let y = match (conditioning_warning, Cholesky::new(reg.clone())) {
        (false, Some(ch)) => ch.solve(&bs),
        _ => {
            conditioning_warning = true;
            let svd = SVD::new(reg, true, true);
            let eps = tolerance * emax.max(f64::MIN_POSITIVE);
            svd.solve(&bs, eps).map_err(|e| Error::Singular(e.to_string()))?
        }
    };
    if conditioning_warning {
        warn!("Hammerstein basis is rank-deficient beyond the ridge tolerance (eigenvalue ratio {:e})", emin / emax);
    }
    let c = DVector::from_iterator(u, (0..u).map(|i| y[i] * inv_norm[i]));
    let err = &d.target - &d.psi * &c;
    let residual_power = err.norm_squared() * d.power_scale;

    let coeffs = c
        .as_slice()
        .chunks(spec.memory_len)
        .map(|ch| ch.to_vec())
        .collect();
    Ok(HammersteinFit {
        model: HammersteinModel {
            spec: spec.clone(),
            framing,
            coeffs,
        },
        residual_power,
        conditioning_warning,
        rows,
    })
}

/// Norm of the least-squares gradient `Psi^H (rx - Psi c)` at the model's
/// coefficients, relative to `||Psi^H rx||`.
pub fn relative_ls_gradient(tx: &[Complex64], rx: &[Complex64], model: &HammersteinModel) -> Result<f64> {
    check_lengths(tx, rx)?;
    let d = build_design(tx, Some(rx), &model.spec, &model.framing)?;
    let err = &d.target - &d.psi * model.flat();
    Ok(d.psi.ad_mul(&err).norm() / d.psi.ad_mul(&d.target).norm().max(f64::MIN_POSITIVE))
}

/// Regenerate the SI predicted by `model` from `tx` and subtract it from
/// `rx`.
pub fn apply_digital_sic(tx: &[Complex64], rx: &[Complex64], model: &HammersteinModel) -> Result<Vec<Complex64>> {
    check_lengths(tx, rx)?;
    let d = build_design(tx, None, &model.spec, &model.framing)?;
    let pred = &d.psi * model.flat();
    match model.framing {
        Framing::Linear => Ok(rx.iter().zip(pred.iter()).map(|(r, p)| r - p).collect()),
        Framing::Ofdm(cfg) => {
            let fft = OfdmFft::new(&cfg);
            let bins = cfg.active_bins();
            let zeros = vec![Complex64::default(); tx.len()];
            let synth = fft.map_symbols(&zeros, |s, spec| {
                for (ki, &k) in bins.iter().enumerate() {
                    spec[k] = pred[s * bins.len() + ki];
                }
            })?;
            Ok(rx.iter().zip(&synth).map(|(r, p)| r - p).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{modulate, qpsk_grid};
    use crate::rf::awgn;
    use crate::rng;
    use crate::units::{lin_to_db, mean_power};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn ofdm_tx(seed: u64, n_sym: usize) -> Vec<Complex64> {
        let c = OfdmConfig::default();
        modulate(&qpsk_grid(n_sym, 792, &mut rng::stream(seed, &[rng::DATA])), &c).unwrap()
    }

    fn fir(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
        (0..x.len())
            .map(|n| h.iter().enumerate().filter(|(k, _)| *k <= n).map(|(k, g)| g * x[n - k]).sum())
            .collect()
    }

    fn small_spec(orders: Vec<u32>) -> HammersteinSpec {
        HammersteinSpec {
            orders,
            memory_len: 4,
            pre_cursor: 0,
            ridge: 1e-8,
        }
    }

    #[test]
    fn linear_channel_has_no_nonlinear_branches() {
        let x = awgn(4000, 1.0, &mut rng::stream(1, &[rng::DATA]));
        let h = [Complex64::new(0.8, 0.1), Complex64::new(-0.2, 0.05), Complex64::new(0.03, 0.0)];
        let y = fir(&x, &h);
        let fit = fit_hammerstein(&x, &y, &small_spec(vec![1, 3, 5]), Framing::Linear).unwrap();
        let n1 = fit.model.branch_norm(0);
        assert!(fit.model.branch_norm(1) <= 1e-6 * n1);
        assert!(fit.model.branch_norm(2) <= 1e-6 * n1);
        for (c, t) in fit.model.coeffs[0].iter().zip(h.iter().chain(std::iter::once(&Complex64::default()))) {
            assert!((c - t).norm() < 1e-6);
        }
    }

    // Oracle for the linear-only floor: the cubic term minus its projection
    // onto the span of the delayed linear basis, computed by Gram-Schmidt.
    fn unmodellable_cubic_power(x: &[Complex64], c3: Complex64, taps: usize) -> f64 {
        let n = x.len();
        let cubic: Vec<Complex64> = x.iter().map(|v| c3 * v * v.norm_sqr()).collect();
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        for m in 0..taps {
            let mut col: Vec<Complex64> = (0..n).map(|i| if i >= m { x[i - m] } else { Complex64::default() }).collect();
            for b in &basis {
                let c: Complex64 = b.iter().zip(&col).map(|(p, q)| p.conj() * q).sum();
                col.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
            }
            let nrm = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            col.iter_mut().for_each(|v| *v /= nrm);
            basis.push(col);
        }
        let mut r = cubic;
        for b in &basis {
            let c: Complex64 = b.iter().zip(&r).map(|(p, q)| p.conj() * q).sum();
            r.iter_mut().zip(b).for_each(|(a, bb)| *a -= c * bb);
        }
        mean_power(&r)
    }

    #[test]
    fn cubic_pa_is_cancelled_below_noise() {
        let x = ofdm_tx(2, 6);
        let c3 = Complex64::new(-0.05, 0.01);
        let noise_p = 1e-6;
        let noise = awgn(x.len(), noise_p, &mut rng::stream(2, &[rng::NOISE]));
        let y: Vec<Complex64> = x.iter().zip(&noise).map(|(v, w)| v + c3 * v * v.norm_sqr() + w).collect();
        let spec = small_spec(vec![1, 3, 5]);
        let full = fit_hammerstein(&x, &y, &spec, Framing::Linear).unwrap();
        // Below the power of the noise realisation itself.
        assert!(full.residual_power <= mean_power(&noise));
        let lin = fit_hammerstein(&x, &y, &spec.linear_only(), Framing::Linear).unwrap();
        let oracle = unmodellable_cubic_power(&x, c3, 4) + noise_p;
        assert!(lin_to_db(lin.residual_power / oracle).abs() <= 1.0);
        // The raw cubic-term power exceeds what a linear fit cannot absorb.
        let raw: f64 = mean_power(&x.iter().map(|v| c3 * v * v.norm_sqr()).collect::<Vec<_>>());
        assert!(raw > oracle);
    }

    #[test]
    fn square_system_interpolates_but_generalises_badly() {
        let spec = HammersteinSpec {
            ridge: 0.0,
            ..small_spec(vec![1, 3, 5])
        };
        let u = spec.unknowns();
        let pa = |x: &[Complex64], seed: u64| -> Vec<Complex64> {
            let w = awgn(x.len(), 1e-3, &mut rng::stream(seed, &[rng::NOISE]));
            fir(x, &[Complex64::new(1.0, 0.0), Complex64::new(0.3, -0.1)])
                .iter()
                .zip(&w)
                .map(|(v, n)| v - 0.02 * v * v.norm_sqr() + n)
                .collect()
        };
        let x_small = awgn(u, 1.0, &mut rng::stream(3, &[rng::DATA]));
        let x_big = awgn(10 * u, 1.0, &mut rng::stream(4, &[rng::DATA]));
        let x_test = awgn(4000, 1.0, &mut rng::stream(5, &[rng::DATA]));
        let (y_small, y_big, y_test) = (pa(&x_small, 3), pa(&x_big, 4), pa(&x_test, 5));
        let over = fit_hammerstein(&x_small, &y_small, &spec, Framing::Linear).unwrap();
        assert!(over.residual_power <= 1e-12 * mean_power(&y_small));
        let ok = fit_hammerstein(&x_big, &y_big, &spec, Framing::Linear).unwrap();
        let test_over = over.model.residual_power(&x_test, &y_test).unwrap();
        let test_ok = ok.model.residual_power(&x_test, &y_test).unwrap();
        assert!(test_over > test_ok);
    }

    fn ofdm_si(x: &[Complex64], fft: &OfdmFft) -> Vec<Complex64> {
        // Fractional-delay two-path channel after a cubic-quintic PA.
        let y: Vec<Complex64> = x
            .iter()
            .map(|v| v * (1.0 - 0.04 * v.norm_sqr() + 0.002 * v.norm_sqr().powi(2)))
            .collect();
        let f = fft.config().all_freqs_hz();
        fft.map_symbols(&y, |_, spec| {
            for (s, &fk) in spec.iter_mut().zip(&f) {
                let h = Complex64::from_polar(1e-3, -2.0 * PI * fk * 2.3e-9)
                    + Complex64::from_polar(2e-4, -2.0 * PI * fk * 9.1e-9 + 1.0);
                *s *= h;
            }
        })
        .unwrap()
    }

    #[test]
    fn ofdm_framing_fit_matches_direct_measurement() {
        let cfg = OfdmConfig::default();
        let fft = OfdmFft::new(&cfg);
        let x = ofdm_tx(6, 6);
        let mut y = ofdm_si(&x, &fft);
        let w = crate::rf::in_band_noise(&fft, 6, 1e-12, &mut rng::stream(6, &[rng::NOISE]));
        y.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
        let fit = fit_hammerstein(&x, &y, &HammersteinSpec::default(), Framing::Ofdm(cfg)).unwrap();
        assert!(!fit.conditioning_warning);
        let measured = fit.model.residual_power(&x, &y).unwrap();
        assert_relative_eq!(measured, fit.residual_power, max_relative = 1e-9);
        assert!(fit.residual_power < 2e-12);
        assert!(relative_ls_gradient(&x, &y, &fit.model).unwrap() < 1e-6);

        // Fresh block through the same channel.
        let x2 = ofdm_tx(7, 6);
        let mut y2 = ofdm_si(&x2, &fft);
        let w2 = crate::rf::in_band_noise(&fft, 6, 1e-12, &mut rng::stream(7, &[rng::NOISE]));
        y2.iter_mut().zip(&w2).for_each(|(a, b)| *a += b);
        let fresh = fit.model.residual_power(&x2, &y2).unwrap();
        assert!(lin_to_db(fresh / fit.residual_power).abs() <= 1.0);
    }

    #[test]
    fn zero_model_is_identity_and_shapes_checked() {
        let x = ofdm_tx(8, 2);
        let y = ofdm_tx(9, 2);
        for framing in [Framing::Linear, Framing::Ofdm(OfdmConfig::default())] {
            let m = HammersteinModel::zeros(small_spec(vec![1, 3, 5]), framing);
            assert_eq!(apply_digital_sic(&x, &y, &m).unwrap(), y);
            assert!(apply_digital_sic(&x, &y[1..], &m).is_err());
        }
    }

    #[test]
    fn perturbing_any_coefficient_increases_residual() {
        let x = awgn(2000, 1.0, &mut rng::stream(10, &[rng::DATA]));
        let w = awgn(2000, 1e-4, &mut rng::stream(10, &[rng::NOISE]));
        let y: Vec<Complex64> = fir(&x, &[Complex64::new(0.5, 0.5), Complex64::new(0.1, 0.0)])
            .iter()
            .zip(&w)
            .map(|(v, n)| v + 0.01 * v * v.norm_sqr() + n)
            .collect();
        let fit = fit_hammerstein(&x, &y, &small_spec(vec![1, 3, 5]), Framing::Linear).unwrap();
        let base = fit.model.residual_power(&x, &y).unwrap();
        let mut r = rng::stream(10, &[rng::BEAM]);
        for _ in 0..10 {
            let b = r.random_range(0..3);
            let j = r.random_range(0..4);
            for sign in [-1.0, 1.0] {
                let mut m = fit.model.clone();
                let c = m.coeffs[b][j];
                m.coeffs[b][j] = c + sign * 1e-3 * c.norm().max(1e-6);
                assert!(m.residual_power(&x, &y).unwrap() > base);
            }
        }
    }

    #[test]
    fn duplicate_basis_flags_conditioning() {
        // Constant-modulus input makes |x|^2 x proportional to x.
        let x: Vec<Complex64> = (0..500).map(|i| Complex64::from_polar(1.0, 0.37 * i as f64)).collect();
        let y: Vec<Complex64> = x.iter().map(|v| v * 0.5).collect();
        let fit = fit_hammerstein(&x, &y, &small_spec(vec![1, 3]), Framing::Linear).unwrap();
        assert!(fit.conditioning_warning);
        assert!(fit.residual_power < 1e-10);
    }

    #[test]
    fn spec_validation() {
        assert!(small_spec(vec![1, 2]).validate("h").is_err());
        assert!(small_spec(vec![3, 1]).validate("h").is_err());
        assert!(HammersteinSpec { pre_cursor: 4, ..small_spec(vec![1]) }.validate("h").is_err());
        assert!(HammersteinSpec::default().validate("h").is_ok());
    }
}
