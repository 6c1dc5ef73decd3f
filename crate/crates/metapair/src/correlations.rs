//! Time-correlated single-photon counting: coincidence histograms, g2(0)
//! estimation, Cauchy-Schwarz tests, and pump-power scaling fits.

use serde::Serialize;

use crate::detection::TimestampStream;
use crate::error::{Error, Result};

/// Histogram of arrival-time differences t_b - t_a over a symmetric span
/// around zero delay. Bin k is centered at (k - half_bins) * bin_width_ps;
/// bin edges are contiguous and half-open on the right.
#[derive(Debug, Clone, Serialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: f64,
    pub half_bins: usize,
    pub counts: Vec<u64>,
    pub duration_s: f64,
}

const MIN_SPAN_BINS: f64 = 100.0;

impl CoincidenceHistogram {
    /// An all-zero histogram whose 2k+1 bins cover at least `span_ps`.
    /// The span must cover at least 100 bins.
    pub fn empty(bin_width_ps: f64, span_ps: f64, duration_s: f64) -> Result<Self> {
        if !(bin_width_ps > 0.0) || !bin_width_ps.is_finite() {
            return Err(Error::Domain(format!(
                "bin width {bin_width_ps} ps must be positive and finite"
            )));
        }
        if !span_ps.is_finite() || span_ps / bin_width_ps + 1e-9 < MIN_SPAN_BINS {
            return Err(Error::Domain(format!(
                "span {span_ps} ps must cover at least {MIN_SPAN_BINS} bins of {bin_width_ps} ps"
            )));
        }
        let half_bins = (span_ps / (2.0 * bin_width_ps)).ceil() as usize;
        Ok(CoincidenceHistogram {
            bin_width_ps,
            half_bins,
            counts: vec![0; 2 * half_bins + 1],
            duration_s,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_center_ps(&self, index: usize) -> f64 {
        (index as f64 - self.half_bins as f64) * self.bin_width_ps
    }

    pub fn bin_centers_ps(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|i| self.bin_center_ps(i)).collect()
    }

    /// Bin holding the delay `dt_s`, or None outside the span. This is the
    /// single binning rule used by every code path that fills a histogram.
    pub fn bin_index(&self, dt_s: f64) -> Option<usize> {
        let w = self.bin_width_ps * 1e-12;
        let idx = (dt_s / w + 0.5).floor() + self.half_bins as f64;
        if idx >= 0.0 && idx <= (2 * self.half_bins) as f64 {
            Some(idx as usize)
        } else {
            None
        }
    }

    pub fn record(&mut self, dt_s: f64) {
        if let Some(i) = self.bin_index(dt_s) {
            self.counts[i] += 1;
        }
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn fill_from_streams(&mut self, a: &TimestampStream, b: &TimestampStream) {
        let w = self.bin_width_ps * 1e-12;
        let half_span = (self.half_bins as f64 + 0.5) * w;
        let mut start = 0usize;
        for &ta in &a.times_s {
            let lo = ta - half_span;
            while start < b.times_s.len() && b.times_s[start] < lo {
                start += 1;
            }
            for &tb in &b.times_s[start..] {
                if tb - ta >= half_span {
                    break;
                }
                self.record(tb - ta);
            }
        }
    }
}

fn verify_sorted(stream: &TimestampStream) -> Result<()> {
    for (i, w) in stream.times_s.windows(2).enumerate() {
        if w[1] < w[0] {
            return Err(Error::UnsortedStream {
                channel: stream.channel_id.clone(),
                index: i + 1,
            });
        }
    }
    Ok(())
}

/// Histogram of delays t_b - t_a between two time-ordered click streams,
/// computed with a windowed merge join in O(n_a + n_b + matches). Empty
/// streams give an all-zero histogram.
pub fn coincidence_histogram(
    a: &TimestampStream,
    b: &TimestampStream,
    bin_width_ps: f64,
    span_ps: f64,
) -> Result<CoincidenceHistogram> {
    verify_sorted(a)?;
    verify_sorted(b)?;
    let mut hist =
        CoincidenceHistogram::empty(bin_width_ps, span_ps, a.duration_s.min(b.duration_s))?;
    hist.fill_from_streams(a, b);
    Ok(hist)
}

/// Count pairs with t_b - t_a in [center - width/2, center + width/2).
fn count_in_window(a: &TimestampStream, b: &TimestampStream, center_s: f64, width_s: f64) -> u64 {
    let lo_off = center_s - width_s / 2.0;
    let hi_off = center_s + width_s / 2.0;
    let mut start = 0usize;
    let mut n = 0u64;
    for &ta in &a.times_s {
        let lo = ta + lo_off;
        let hi = ta + hi_off;
        while start < b.times_s.len() && b.times_s[start] < lo {
            start += 1;
        }
        for &tb in &b.times_s[start..] {
            if tb >= hi {
                break;
            }
            n += 1;
        }
    }
    n
}

const LOCATOR_HALF_BINS: usize = 500;
const LOCATOR_PROMINENCE_SIGMA: f64 = 5.0;

/// Find the coincidence peak within +-500 windows of zero delay. Falls back
/// to zero delay when no bin rises 5 sigma above the off-peak baseline, so
/// uncorrelated streams are not biased by their largest fluctuation.
fn locate_peak(a: &TimestampStream, b: &TimestampStream, window_s: f64) -> Result<f64> {
    let bin_ps = window_s * 1e12;
    let duration = a.duration_s.min(b.duration_s);
    let mut hist = CoincidenceHistogram::empty(
        bin_ps,
        bin_ps * (2 * LOCATOR_HALF_BINS + 1) as f64,
        duration,
    )?;
    hist.fill_from_streams(a, b);
    let total = hist.total_counts();
    if total == 0 {
        return Ok(0.0);
    }
    let mut imax = 0;
    let mut cmax = 0u64;
    for (i, &c) in hist.counts.iter().enumerate() {
        if c > cmax {
            cmax = c;
            imax = i;
        }
    }
    let baseline = (total - cmax) as f64 / (hist.n_bins() - 1) as f64;
    if cmax as f64 > baseline + LOCATOR_PROMINENCE_SIGMA * baseline.max(1.0).sqrt() {
        Ok(hist.bin_center_ps(imax) * 1e-12)
    } else {
        Ok(0.0)
    }
}

/// A normalized second-order correlation estimate with its statistical error
/// and the raw ingredients it was formed from.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub std_error: f64,
    pub coincidences: u64,
    pub singles_a: u64,
    pub singles_b: u64,
    pub rate_coincidence_hz: f64,
    pub rate_singles_a_hz: f64,
    pub rate_singles_b_hz: f64,
    pub window_s: f64,
    /// Delay at which the coincidence window was centered.
    pub peak_delay_s: f64,
    pub duration_s: f64,
}

/// Normalized cross-correlation at zero (auto-located) delay:
/// g2 = R_c / (R_a * R_b * T_c), with Poisson error propagation
/// sigma = g2 * sqrt(1/N_c + 1/N_a + 1/N_b).
pub fn g2_cross(
    a: &TimestampStream,
    b: &TimestampStream,
    window_s: f64,
) -> Result<CorrelationEstimate> {
    if !(window_s > 0.0) || !window_s.is_finite() {
        return Err(Error::Domain(format!(
            "coincidence window {window_s} s must be positive and finite"
        )));
    }
    verify_sorted(a)?;
    verify_sorted(b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::UndefinedEstimate(format!(
            "stream `{}` has {} clicks and `{}` has {}; both must be nonempty",
            a.channel_id,
            a.len(),
            b.channel_id,
            b.len()
        )));
    }
    let duration = a.duration_s.min(b.duration_s);
    let peak_delay = locate_peak(a, b, window_s)?;
    let n_c = count_in_window(a, b, peak_delay, window_s);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let rate_a = a.rate_hz();
    let rate_b = b.rate_hz();
    let rate_c = n_c as f64 / duration;
    let value = rate_c / (rate_a * rate_b * window_s);
    let one_count = duration / (na * nb * window_s);
    let std_error = if n_c > 0 {
        value * (1.0 / n_c as f64 + 1.0 / na + 1.0 / nb).sqrt()
    } else {
        // zero observed coincidences: quote the one-count scale as the error
        one_count
    };
    Ok(CorrelationEstimate {
        value,
        std_error,
        coincidences: n_c,
        singles_a: a.len() as u64,
        singles_b: b.len() as u64,
        rate_coincidence_hz: rate_c,
        rate_singles_a_hz: rate_a,
        rate_singles_b_hz: rate_b,
        window_s,
        peak_delay_s: peak_delay,
        duration_s: duration,
    })
}

/// Auto-correlation g2 between the two output arms of a Hanbury Brown-Twiss
/// splitter fed by one field. Identical estimator to [`g2_cross`]; the two
/// streams are the two halves of the same beam.
pub fn g2_auto(
    arm_a: &TimestampStream,
    arm_b: &TimestampStream,
    window_s: f64,
) -> Result<CorrelationEstimate> {
    g2_cross(arm_a, arm_b, window_s)
}

/// Outcome of the classicality test lhs = g_si^2 vs rhs = g_ss * g_ii.
#[derive(Debug, Clone, Serialize)]
pub struct CsTestResult {
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_std_error: f64,
    pub rhs_std_error: f64,
    pub violated: bool,
    /// (lhs - rhs) over the combined standard error.
    pub sigma_violation: f64,
}

/// Cauchy-Schwarz test: classical fields obey g_si^2 <= g_ss * g_ii. Errors
/// propagate first-order from the three estimates.
pub fn cs_test(
    g_si: &CorrelationEstimate,
    g_ss: &CorrelationEstimate,
    g_ii: &CorrelationEstimate,
) -> CsTestResult {
    let lhs = g_si.value * g_si.value;
    let lhs_err = 2.0 * g_si.value.abs() * g_si.std_error;
    let rhs = g_ss.value * g_ii.value;
    let rhs_err = ((g_ii.value * g_ss.std_error).powi(2)
        + (g_ss.value * g_ii.std_error).powi(2))
    .sqrt();
    let diff = lhs - rhs;
    let combined = (lhs_err * lhs_err + rhs_err * rhs_err).sqrt();
    let sigma_violation = if combined > 0.0 {
        diff / combined
    } else if diff > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    CsTestResult {
        lhs,
        rhs,
        lhs_std_error: lhs_err,
        rhs_std_error: rhs_err,
        violated: lhs > rhs,
        sigma_violation,
    }
}

/// Fit of g2(P) against pump power.
#[derive(Debug, Clone, Serialize)]
pub struct PowerLawFit {
    /// Fixed offset of the constrained model g2 = offset + amplitude / P.
    pub offset: f64,
    pub amplitude: f64,
    /// Coefficient of determination of the constrained model.
    pub r_squared: f64,
    /// Unconstrained log-log fit g2 - 1 = a * P^b, when enough points rise
    /// above the offset.
    pub free_amplitude: Option<f64>,
    pub free_exponent: Option<f64>,
}

/// Fit measured (power_mw, g2) points to g2 = 1 + a / P (least squares in a),
/// plus an unconstrained log-log fit of the exponent. Needs at least four
/// distinct positive powers.
pub fn power_scan_fit(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let mut distinct: Vec<f64> = Vec::new();
    for &(p, g) in points {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::Domain(format!("pump power {p} mW must be positive")));
        }
        if !g.is_finite() {
            return Err(Error::Domain(format!("g2 value {g} is not finite")));
        }
        if !distinct.iter().any(|&d| (d - p).abs() < 1e-12 * p.max(1.0)) {
            distinct.push(p);
        }
    }
    if distinct.len() < 4 {
        return Err(Error::Domain(format!(
            "power-law fit needs at least 4 distinct powers, got {}",
            distinct.len()
        )));
    }

    let sum_xy: f64 = points.iter().map(|&(p, g)| (g - 1.0) / p).sum();
    let sum_xx: f64 = points.iter().map(|&(p, _)| 1.0 / (p * p)).sum();
    let amplitude = sum_xy / sum_xx;

    let mean_g: f64 = points.iter().map(|&(_, g)| g).sum::<f64>() / points.len() as f64;
    let ss_res: f64 = points
        .iter()
        .map(|&(p, g)| {
            let m = 1.0 + amplitude / p;
            (g - m) * (g - m)
        })
        .sum();
    let ss_tot: f64 = points.iter().map(|&(_, g)| (g - mean_g) * (g - mean_g)).sum();
    let r_squared = if ss_tot > 1e-30 {
        1.0 - ss_res / ss_tot
    } else if ss_res < 1e-30 {
        1.0
    } else {
        0.0
    };

    let logpts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, g)| g > 1.0)
        .map(|&(p, g)| (p.ln(), (g - 1.0).ln()))
        .collect();
    let mut log_distinct: Vec<f64> = Vec::new();
    for &(x, _) in &logpts {
        if !log_distinct.iter().any(|&d| (d - x).abs() < 1e-12) {
            log_distinct.push(x);
        }
    }
    let (free_amplitude, free_exponent) = if log_distinct.len() >= 2 {
        let n = logpts.len() as f64;
        let mx: f64 = logpts.iter().map(|&(x, _)| x).sum::<f64>() / n;
        let my: f64 = logpts.iter().map(|&(_, y)| y).sum::<f64>() / n;
        let sxx: f64 = logpts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
        let sxy: f64 = logpts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        (Some(intercept.exp()), Some(slope))
    } else {
        (None, None)
    };

    Ok(PowerLawFit {
        offset: 1.0,
        amplitude,
        r_squared,
        free_amplitude,
        free_exponent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Exp};

    use crate::rng::Seeder;

    fn poisson_stream(rate_hz: f64, duration_s: f64, label: &str, seed: u64) -> TimestampStream {
        let mut rng = Seeder::new(seed).stream(label);
        let exp = Exp::new(rate_hz).unwrap();
        let mut times = Vec::new();
        let mut t = 0.0;
        loop {
            t += exp.sample(&mut rng);
            if t >= duration_s {
                break;
            }
            times.push(t);
        }
        TimestampStream::new(label, times, duration_s).unwrap()
    }

    fn brute_force(
        a: &TimestampStream,
        b: &TimestampStream,
        bin_width_ps: f64,
        span_ps: f64,
    ) -> CoincidenceHistogram {
        let mut hist =
            CoincidenceHistogram::empty(bin_width_ps, span_ps, a.duration_s.min(b.duration_s))
                .unwrap();
        for &ta in &a.times_s {
            for &tb in &b.times_s {
                hist.record(tb - ta);
            }
        }
        hist
    }

    #[test]
    fn join_matches_brute_force_on_random_streams() {
        for seed in 0..30u64 {
            let mut cfg = Seeder::new(seed).stream("cfg");
            let rate_a = 10f64.powf(cfg.gen_range(1.0..3.0));
            let rate_b = 10f64.powf(cfg.gen_range(1.0..3.0));
            let bin = 10f64.powf(cfg.gen_range(1.0..4.0));
            let span = bin * cfg.gen_range(100.0..2000.0);
            let a = poisson_stream(rate_a, 2.0, "a", seed * 2 + 1);
            let b = poisson_stream(rate_b, 2.0, "b", seed * 2 + 2);
            let fast = coincidence_histogram(&a, &b, bin, span).unwrap();
            let slow = brute_force(&a, &b, bin, span);
            assert_eq!(fast.counts, slow.counts, "seed {seed}");
        }
    }

    #[test]
    fn bin_edges_are_contiguous_and_centered() {
        let hist = CoincidenceHistogram::empty(10.0, 2000.0, 1.0).unwrap();
        assert_eq!(hist.n_bins() % 2, 1);
        let centers = hist.bin_centers_ps();
        assert_eq!(centers[hist.half_bins], 0.0);
        for w in centers.windows(2) {
            assert!((w[1] - w[0] - 10.0).abs() < 1e-9);
        }
        // a delay exactly on a bin edge lands in the upper bin
        assert_eq!(hist.bin_index(5.0e-12), Some(hist.half_bins + 1));
        assert_eq!(hist.bin_index(-5.0e-12), Some(hist.half_bins));
    }

    #[test]
    fn histogram_rejects_undersized_spans_and_bad_bins() {
        let a = poisson_stream(100.0, 1.0, "a", 1);
        let b = poisson_stream(100.0, 1.0, "b", 2);
        assert!(coincidence_histogram(&a, &b, 10.0, 500.0).is_err());
        assert!(coincidence_histogram(&a, &b, 0.0, 5000.0).is_err());
        assert!(coincidence_histogram(&a, &b, -1.0, 5000.0).is_err());
    }

    #[test]
    fn histogram_rejects_unsorted_input() {
        let good = poisson_stream(100.0, 1.0, "a", 1);
        let bad = TimestampStream {
            channel_id: "b".into(),
            times_s: vec![0.5, 0.2, 0.7],
            duration_s: 1.0,
        };
        match coincidence_histogram(&good, &bad, 10.0, 2000.0) {
            Err(Error::UnsortedStream { channel, index }) => {
                assert_eq!(channel, "b");
                assert_eq!(index, 1);
            }
            other => panic!("expected unsorted error, got {other:?}"),
        }
    }

    #[test]
    fn empty_streams_give_zero_histogram() {
        let empty = TimestampStream::new("e", vec![], 1.0).unwrap();
        let full = poisson_stream(100.0, 1.0, "a", 1);
        let hist = coincidence_histogram(&empty, &full, 10.0, 2000.0).unwrap();
        assert_eq!(hist.total_counts(), 0);
    }

    #[test]
    fn accidental_background_matches_rate_product() {
        let rate_a = 20_000.0;
        let rate_b = 30_000.0;
        let duration = 5.0;
        let a = poisson_stream(rate_a, duration, "a", 31);
        let b = poisson_stream(rate_b, duration, "b", 32);
        let bin_ps = 1000.0;
        let hist = coincidence_histogram(&a, &b, bin_ps, 200_000.0).unwrap();
        let expected_per_bin = rate_a * rate_b * bin_ps * 1e-12 * duration;
        let mean =
            hist.total_counts() as f64 / hist.n_bins() as f64;
        let sigma_of_mean = (expected_per_bin / hist.n_bins() as f64).sqrt();
        assert!(
            (mean - expected_per_bin).abs() < 5.0 * sigma_of_mean,
            "mean {mean} vs {expected_per_bin}"
        );
    }

    #[test]
    fn delay_shows_up_at_positive_lag_of_second_stream() {
        let a = poisson_stream(5_000.0, 1.0, "a", 7);
        let delayed: Vec<f64> = a.times_s.iter().map(|t| t + 3e-9).collect();
        let b = TimestampStream::new("b", delayed, 1.0 + 3e-9).unwrap();
        let hist = coincidence_histogram(&a, &b, 100.0, 20_000.0).unwrap();
        let mut imax = 0;
        for (i, &c) in hist.counts.iter().enumerate() {
            if c > hist.counts[imax] {
                imax = i;
            }
        }
        assert!((hist.bin_center_ps(imax) - 3000.0).abs() < 51.0);
    }

    #[test]
    fn g2_of_independent_poisson_streams_is_unity() {
        let a = poisson_stream(20_000.0, 10.0, "a", 41);
        let b = poisson_stream(20_000.0, 10.0, "b", 42);
        let est = g2_cross(&a, &b, 1e-6).unwrap();
        assert_eq!(est.peak_delay_s, 0.0, "no peak should be claimed");
        assert!(
            (est.value - 1.0).abs() < 3.0 * est.std_error,
            "g2 {} +- {}",
            est.value,
            est.std_error
        );
    }

    #[test]
    fn g2_finds_and_uses_a_shifted_peak() {
        let a = poisson_stream(2_000.0, 5.0, "a", 51);
        let shifted: Vec<f64> = a.times_s.iter().map(|t| t + 40e-9).collect();
        let b = TimestampStream::new("b", shifted, 5.0 + 1e-6).unwrap();
        let est = g2_cross(&a, &b, 1e-9).unwrap();
        assert!((est.peak_delay_s - 40e-9).abs() < 1.1e-9);
        assert!(est.value > 100.0, "correlated copy must be far above 1");
        assert_eq!(est.coincidences, a.len() as u64);
    }

    #[test]
    fn g2_rejects_empty_and_bad_windows() {
        let a = poisson_stream(100.0, 1.0, "a", 61);
        let empty = TimestampStream::new("e", vec![], 1.0).unwrap();
        assert!(matches!(
            g2_cross(&a, &empty, 1e-9),
            Err(Error::UndefinedEstimate(_))
        ));
        assert!(g2_cross(&a, &a, 0.0).is_err());
        assert!(g2_cross(&a, &a, f64::NAN).is_err());
    }

    fn estimate(value: f64, std_error: f64) -> CorrelationEstimate {
        CorrelationEstimate {
            value,
            std_error,
            coincidences: 0,
            singles_a: 0,
            singles_b: 0,
            rate_coincidence_hz: 0.0,
            rate_singles_a_hz: 0.0,
            rate_singles_b_hz: 0.0,
            window_s: 1e-9,
            peak_delay_s: 0.0,
            duration_s: 1.0,
        }
    }

    #[test]
    fn cs_test_reproduces_reference_triple() {
        // lhs = 10.5^2 = 110.25 +- 2*10.5*1.1 = 23.1
        // rhs = 1.6*1.2 = 1.92 +- sqrt((1.2*0.3)^2 + (1.6*0.2)^2) = 0.4817
        let result = cs_test(
            &estimate(10.5, 1.1),
            &estimate(1.6, 0.3),
            &estimate(1.2, 0.2),
        );
        assert!((result.lhs - 110.25).abs() < 1e-9);
        assert!((result.lhs_std_error - 23.1).abs() < 1e-9);
        assert!((result.rhs - 1.92).abs() < 1e-9);
        assert!((result.rhs_std_error - 0.48166).abs() < 1e-4);
        assert!(result.violated);
        assert!((result.sigma_violation - 4.689).abs() < 0.01);
    }

    #[test]
    fn cs_test_accepts_classical_values() {
        let result = cs_test(
            &estimate(1.9, 0.05),
            &estimate(2.0, 0.05),
            &estimate(2.0, 0.05),
        );
        assert!(!result.violated);
        assert!(result.sigma_violation < 0.0);
    }

    #[test]
    fn power_fit_recovers_exact_inverse_law() {
        let points: Vec<(f64, f64)> =
            [1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|&p| (p, 1.0 + 5.0 / p)).collect();
        let fit = power_scan_fit(&points).unwrap();
        assert!((fit.amplitude - 5.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.free_exponent.unwrap() + 1.0).abs() < 1e-12);
        assert!((fit.free_amplitude.unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn power_fit_handles_flat_and_rejects_degenerate_input() {
        let flat: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&p| (p, 1.0)).collect();
        let fit = power_scan_fit(&flat).unwrap();
        assert_eq!(fit.amplitude, 0.0);
        assert_eq!(fit.r_squared, 1.0);
        assert!(fit.free_exponent.is_none());

        assert!(power_scan_fit(&[(1.0, 2.0), (1.0, 2.0), (2.0, 1.5), (4.0, 1.2)]).is_err());
        assert!(power_scan_fit(&[(0.0, 2.0), (1.0, 2.0), (2.0, 1.5), (4.0, 1.2)]).is_err());
        assert!(power_scan_fit(&[]).is_err());
    }
}
