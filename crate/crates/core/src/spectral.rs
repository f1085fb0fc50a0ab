//! Frequency grids, scalar spectral densities and their cepstral factorization.

use std::f64::consts::TAU;
use std::path::Path;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{self, to_complex, CMat, Mat, Vector, C64};
use crate::sysmodel::RiccatiData;

/// Smallest admissible spectrum sample; the logarithm is unusable below this.
pub const MIN_SPECTRUM: f64 = 1e-12;
/// Tail-to-zero-lag cepstral ratio above which the grid is flagged as too coarse.
pub const ALIASING_RATIO: f64 = 1e-6;

/// The `n` roots of unity `exp(j 2 pi k / n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrequencyGrid {
    n: usize,
}

impl FrequencyGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(n));
        }
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn omega(&self, k: usize) -> f64 {
        TAU * k as f64 / self.n as f64
    }

    pub fn point(&self, k: usize) -> C64 {
        linalg::unit(self.omega(k))
    }

    pub fn points(&self) -> impl Iterator<Item = C64> + '_ {
        (0..self.n).map(|k| self.point(k))
    }

    /// Index of the conjugate point `conj(z_k)`.
    pub fn mirror(&self, k: usize) -> usize {
        (self.n - k) % self.n
    }
}

/// A strictly positive, conjugate-symmetric density sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSamples {
    grid: FrequencyGrid,
    values: Vec<f64>,
}

impl SpectrumSamples {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} samples for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        for (index, &value) in values.iter().enumerate() {
            if !(value >= MIN_SPECTRUM) || !value.is_finite() {
                return Err(Error::NonPositiveSpectrum { index, value });
            }
        }
        let scale = values.iter().cloned().fold(0.0, f64::max);
        for k in 1..grid.len() {
            if (values[k] - values[grid.mirror(k)]).abs() > 1e-9 * scale {
                return Err(Error::AsymmetricSpectrum { index: k });
            }
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(C64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().map(f).collect())
    }

    pub fn constant(grid: FrequencyGrid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["index", "omega", "value"]).map_err(|e| csv_err(path, e))?;
        for (k, v) in self.values.iter().enumerate() {
            w.write_record([k.to_string(), format!("{:.17e}", self.grid.omega(k)), format!("{v:.17e}")])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut values = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let index: usize = field(&rec, 0, path)?;
            if index != row {
                return Err(Error::parse(path, format!("row {row} carries index {index}")));
            }
            values.push(field::<f64>(&rec, 2, path)?);
        }
        Self::new(FrequencyGrid::new(values.len())?, values)
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(path, format!("bad or missing column {i}")))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::parse(path, e.to_string())
}

/// Causal factor samples `L(z)` with `|L|^2 = M` on the grid.
///
/// The cepstral coefficients are retained so the factor can also be evaluated
/// off the grid.
#[derive(Clone, Debug)]
pub struct FactorSamples {
    grid: FrequencyGrid,
    values: Vec<C64>,
    cepstrum: Vec<f64>,
    tail: f64,
}

impl FactorSamples {
    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Causal cepstral coefficients `c_0 .. c_{N/2}` with `L = exp(sum c_k z^{-k})`.
    pub fn cepstrum(&self) -> &[f64] {
        &self.cepstrum
    }

    /// `|lambda_{N/2}|`, the aliasing diagnostic of the factorization.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// Whether the cepstral tail exceeds the aliasing threshold.
    pub fn aliasing_suspected(&self) -> bool {
        self.tail > ALIASING_RATIO * (2.0 * self.cepstrum[0]).abs().max(1.0)
    }

    /// Evaluates the factor at an arbitrary unit-circle point.
    pub fn eval(&self, z: C64) -> C64 {
        let zi = z.inv();
        // Horner in z^{-1}.
        let mut acc = C64::new(0.0, 0.0);
        for &c in self.cepstrum.iter().rev() {
            acc = acc * zi + c;
        }
        acc.exp()
    }

    /// Impulse response of the factor, first `taps` coefficients, from the
    /// inverse DFT of the grid samples.
    pub fn impulse_response(&self, taps: usize) -> Vec<f64> {
        let n = self.grid.len();
        let mut buf = self.values.clone();
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        buf.iter().take(taps.min(n)).map(|c| c.re / n as f64).collect()
    }
}

/// Cepstral spectral factorization.
///
/// With `lambda = IDFT(log M)`, returns
/// `L(z_n) = exp(lambda_0 / 2 + sum_{k=1}^{N/2-1} lambda_k z_n^{-k} + lambda_{N/2} (-1)^n / 2)`.
/// The aliasing diagnostic is recorded on the result; see
/// [`spectral_factor_dft_strict`] for the erroring variant.
pub fn spectral_factor_dft(spectrum: &SpectrumSamples) -> Result<FactorSamples> {
    let grid = spectrum.grid();
    let n = grid.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<C64> = spectrum.values().iter().map(|&m| C64::new(m.ln(), 0.0)).collect();
    planner.plan_fft_inverse(n).process(&mut buf);
    let lambda: Vec<f64> = buf.iter().map(|c| c.re / n as f64).collect();

    let half = n / 2;
    let mut cepstrum = vec![0.0; half + 1];
    cepstrum[0] = 0.5 * lambda[0];
    cepstrum[1..half].copy_from_slice(&lambda[1..half]);
    cepstrum[half] += 0.5 * lambda[half];

    let mut coeffs = vec![C64::new(0.0, 0.0); n];
    for (k, &c) in cepstrum.iter().enumerate() {
        coeffs[k] = C64::new(c, 0.0);
    }
    planner.plan_fft_forward(n).process(&mut coeffs);
    let values = coeffs.into_iter().map(|c| c.exp()).collect();
    Ok(FactorSamples { grid, values, cepstrum, tail: lambda[half].abs() })
}

/// As [`spectral_factor_dft`], but fails when the aliasing diagnostic trips.
pub fn spectral_factor_dft_strict(spectrum: &SpectrumSamples) -> Result<FactorSamples> {
    let f = spectral_factor_dft(spectrum)?;
    if f.aliasing_suspected() {
        return Err(Error::Aliasing { tail: f.tail, zero_lag: 2.0 * f.cepstrum[0] });
    }
    Ok(f)
}

/// Per-grid-point cache of `(I - z Abar)^{-1} Bbar` and `Cbar (I - z Abar)^{-1}`.
///
/// Every Frank-Wolfe step needs both at every grid point, and they depend only
/// on the Riccati data and the grid.
#[derive(Clone, Debug)]
pub struct ResolventTable {
    grid: FrequencyGrid,
    /// `d_x` entries per grid point.
    gamma_kernel: Vec<CMat>,
    /// `d_u x d_x` per grid point.
    gradient_kernel: Vec<CMat>,
}

impl ResolventTable {
    pub fn new(ricc: &RiccatiData, grid: FrequencyGrid) -> Result<Self> {
        let radius = linalg::spectral_radius(&ricc.abar);
        if radius >= 1.0 {
            return Err(Error::NotStabilizing { radius });
        }
        let n = ricc.d_x();
        let abar = to_complex(&ricc.abar);
        let bbar = to_complex(&ricc.bbar);
        let cbar = to_complex(&ricc.cbar);
        let mut gamma_kernel = Vec::with_capacity(grid.len());
        let mut gradient_kernel = Vec::with_capacity(grid.len());
        for z in grid.points() {
            let lhs = CMat::identity(n, n) - &abar * z;
            let inv = lhs
                .try_inverse()
                .ok_or(Error::SingularResolvent { re: z.re, im: z.im })?;
            gamma_kernel.push(&inv * &bbar);
            gradient_kernel.push(&cbar * inv);
        }
        Ok(Self { grid, gamma_kernel, gradient_kernel })
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    /// Trapezoid rule `(1/N) sum_z (I - z Abar)^{-1} Bbar L(z)`.
    pub fn gamma(&self, factor: &FactorSamples) -> Result<Vector> {
        if factor.grid() != self.grid {
            return Err(Error::Dimension("factor and resolvent table grids differ".into()));
        }
        let d = self.gamma_kernel[0].nrows();
        let mut acc = vec![C64::new(0.0, 0.0); d];
        for (kern, &l) in self.gamma_kernel.iter().zip(factor.values()) {
            for (a, k) in acc.iter_mut().zip(kern.iter()) {
                *a += k * l;
            }
        }
        let n = self.grid.len() as f64;
        Ok(Vector::from_iterator(d, acc.into_iter().map(|a| a.re / n)))
    }

    /// `||Cbar (I - z_k Abar)^{-1} gamma||^2` at every grid point, which equals
    /// `||S(z_k)||^2` for the anticausal part `S`.
    pub fn anticausal_energy(&self, gamma: &Vector) -> Vec<f64> {
        self.gradient_kernel
            .iter()
            .map(|w| {
                let mut total = 0.0;
                for i in 0..w.nrows() {
                    let mut s = C64::new(0.0, 0.0);
                    for j in 0..w.ncols() {
                        s += w[(i, j)] * gamma[j];
                    }
                    total += s.norm_sqr();
                }
                total
            })
            .collect()
    }
}

/// Finite parameter `Gamma = (1/N) sum_z (I - z Abar)^{-1} Bbar L(z)`.
pub fn compute_gamma(factor: &FactorSamples, ricc: &RiccatiData) -> Result<Vector> {
    ResolventTable::new(ricc, factor.grid())?.gamma(factor)
}

/// `S(z) = Cbar (z^{-1} I - Abar)^{-1} Gamma`, the strictly anticausal part of `T L`.
pub fn anticausal_part_tl(gamma: &Vector, ricc: &RiccatiData, z: C64) -> Result<CMat> {
    let g = to_complex(&Mat::from_column_slice(gamma.len(), 1, gamma.as_slice()));
    Ok(to_complex(&ricc.cbar) * linalg::resolvent(&ricc.abar, z.inv(), &g)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::{riccati, StateSpaceModel};
    use proptest::prelude::*;

    fn fir(coeffs: &[f64], z: C64) -> C64 {
        coeffs.iter().enumerate().map(|(k, &c)| c * z.powi(-(k as i32))).sum()
    }

    #[test]
    fn unit_spectrum_has_unit_factor() {
        let g = FrequencyGrid::new(64).unwrap();
        let f = spectral_factor_dft(&SpectrumSamples::constant(g, 1.0).unwrap()).unwrap();
        assert!(f.values().iter().all(|l| (l - 1.0).norm() < 1e-15));
        assert_eq!(f.tail(), 0.0);
    }

    #[test]
    fn first_order_factor_recovered() {
        let g = FrequencyGrid::new(1024).unwrap();
        let m = SpectrumSamples::from_fn(g, |z| fir(&[1.0, -0.5], z).norm_sqr()).unwrap();
        let f = spectral_factor_dft_strict(&m).unwrap();
        for (k, z) in g.points().enumerate() {
            assert!((f.values()[k] - fir(&[1.0, -0.5], z)).norm() < 1e-8);
        }
        // Off-grid evaluation through the stored cepstrum.
        let z = linalg::unit(0.123);
        assert!((f.eval(z) - fir(&[1.0, -0.5], z)).norm() < 1e-8);
    }

    #[test]
    fn vanishing_spectrum_rejected() {
        let g = FrequencyGrid::new(256).unwrap();
        let r = SpectrumSamples::from_fn(g, |z| (2.0 + z + z.inv()).re);
        assert!(matches!(r, Err(Error::NonPositiveSpectrum { .. })));
    }

    #[test]
    fn coarse_grid_flags_aliasing() {
        let g = FrequencyGrid::new(8).unwrap();
        let m = SpectrumSamples::from_fn(g, |z| fir(&[1.0, -0.95], z).norm_sqr()).unwrap();
        assert!(spectral_factor_dft(&m).unwrap().aliasing_suspected());
        assert!(matches!(spectral_factor_dft_strict(&m), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn rejects_bad_grids_and_asymmetric_samples() {
        assert!(FrequencyGrid::new(100).is_err());
        let g = FrequencyGrid::new(4).unwrap();
        assert!(matches!(
            SpectrumSamples::new(g, vec![1.0, 2.0, 1.0, 1.0]),
            Err(Error::AsymmetricSpectrum { .. })
        ));
    }

    fn scalar_ricc() -> RiccatiData {
        let one = Mat::from_element(1, 1, 1.0);
        riccati(&StateSpaceModel::new(Mat::from_element(1, 1, 0.5), one.clone(), one.clone(), one).unwrap())
            .unwrap()
    }

    fn two_state_ricc() -> RiccatiData {
        let m = StateSpaceModel::new(
            Mat::from_row_slice(2, 2, &[0.9, 0.3, -0.2, 0.4]),
            Mat::from_column_slice(2, 1, &[0.0, 1.0]),
            Mat::from_column_slice(2, 1, &[1.0, 0.5]),
            Mat::identity(2, 2),
        )
        .unwrap();
        riccati(&m).unwrap()
    }

    #[test]
    fn gamma_for_flat_and_fir_factors() {
        let r = two_state_ricc();
        let g = FrequencyGrid::new(256).unwrap();
        let flat = spectral_factor_dft(&SpectrumSamples::constant(g, 1.0).unwrap()).unwrap();
        let gam = compute_gamma(&flat, &r).unwrap();
        assert!((gam.clone() - r.bbar.column(0)).norm() < 1e-14);

        let m = SpectrumSamples::from_fn(g, |z| fir(&[1.0, 0.3], z).norm_sqr()).unwrap();
        let l = spectral_factor_dft(&m).unwrap();
        let expected = r.bbar.column(0) + (&r.abar * &r.bbar).column(0) * 0.3;
        assert!((compute_gamma(&l, &r).unwrap() - expected).norm() < 1e-10);
    }

    #[test]
    fn zero_bbar_gives_zero_gamma() {
        let mut r = scalar_ricc();
        r.bbar.fill(0.0);
        let g = FrequencyGrid::new(64).unwrap();
        let l = spectral_factor_dft(&SpectrumSamples::constant(g, 3.0).unwrap()).unwrap();
        assert_eq!(compute_gamma(&l, &r).unwrap()[0], 0.0);
    }

    #[test]
    fn scalar_anticausal_part() {
        let r = scalar_ricc();
        let gamma = r.bbar.column(0).into_owned();
        let (cb, bb, ab) = (r.cbar[(0, 0)], r.bbar[(0, 0)], r.abar[(0, 0)]);
        for k in 0..16 {
            let z = linalg::unit(0.4 * k as f64);
            let expected = z * cb * bb / (1.0 - z * ab);
            let s = anticausal_part_tl(&gamma, &r, z).unwrap();
            assert!((s[(0, 0)] - expected).norm() < 1e-14);
        }
        let zero = anticausal_part_tl(&Vector::zeros(1), &r, linalg::unit(1.0)).unwrap();
        assert_eq!(zero[(0, 0)].norm(), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let g = FrequencyGrid::new(16).unwrap();
        let m = SpectrumSamples::from_fn(g, |z| 2.0 + z.re).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        m.write_csv(&p).unwrap();
        assert_eq!(SpectrumSamples::read_csv(&p).unwrap(), m);
    }

    fn stable_fir() -> impl Strategy<Value = Vec<f64>> {
        // Products of first-order factors with roots strictly inside the disk.
        proptest::collection::vec(-0.8f64..0.8, 1..=4).prop_map(|roots| {
            let mut c = vec![1.0];
            for r in roots {
                let mut next = vec![0.0; c.len() + 1];
                for (k, &v) in c.iter().enumerate() {
                    next[k] += v;
                    next[k + 1] -= r * v;
                }
                c = next;
            }
            c
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn factorization_round_trip(num in stable_fir(), den in stable_fir(), gain in 0.2f64..5.0) {
            let g = FrequencyGrid::new(1024).unwrap();
            let m = SpectrumSamples::from_fn(g, |z| gain * (fir(&num, z) / fir(&den, z)).norm_sqr()).unwrap();
            let f = spectral_factor_dft(&m).unwrap();
            let peak = m.values().iter().cloned().fold(0.0, f64::max);
            for (k, l) in f.values().iter().enumerate() {
                let mk = m.values()[k];
                prop_assert!((l.norm_sqr() - mk).abs() <= 1e-8 * peak);
                prop_assert!((mk / l.norm_sqr() - 1.0).abs() <= 1e-8);
                let mirror = f.values()[g.mirror(k)];
                prop_assert!((mirror - l.conj()).norm() <= 1e-10 * l.norm());
            }
        }

        #[test]
        fn quadrature_matches_series(num in stable_fir(), den in stable_fir()) {
            let r = two_state_ricc();
            let g = FrequencyGrid::new(512).unwrap();
            let m = SpectrumSamples::from_fn(g, |z| (fir(&num, z) / fir(&den, z)).norm_sqr()).unwrap();
            let f = spectral_factor_dft(&m).unwrap();
            // Impulse response of num/den by long division.
            let taps = 400;
            let mut h = vec![0.0; taps];
            for t in 0..taps {
                let mut v = if t < num.len() { num[t] } else { 0.0 };
                for k in 1..den.len().min(t + 1) {
                    v -= den[k] * h[t - k];
                }
                h[t] = v;
            }
            let mut expected = Vector::zeros(2);
            let mut power = r.bbar.column(0).into_owned();
            for &ht in &h {
                expected += &power * ht;
                power = &r.abar * power;
            }
            let got = compute_gamma(&f, &r).unwrap();
            prop_assert!((got - &expected).norm() <= 1e-10 * expected.norm().max(1.0));
        }
    }
}
