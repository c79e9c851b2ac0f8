//! Specification tests: joint F on year dummies, the Breusch–Pagan LM test
//! for topic random effects (Baltagi–Li unbalanced form), and the Hausman
//! comparison of the fixed- and random-effects fits.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use super::design::{least_squares, pooled_design, y_vector, Design};
use super::{ModelKind, PanelDataset, PanelError, RegressionResult, TestKind, TestResult};

/// Joint F test of year-dummy coefficients: the pooled model against the
/// pooled model plus one indicator per year beyond the first. The null is
/// that all period coefficients are zero.
pub fn f_test_time_effects(panel: &PanelDataset) -> Result<TestResult, PanelError> {
    panel.single_delta()?;
    let years: Vec<i32> = panel.year_groups().keys().copied().collect();
    if years.len() < 2 {
        return Err(PanelError::SingleYear);
    }
    let restricted = pooled_design(panel);
    let y = y_vector(panel);
    let n = panel.n_obs();

    let mut names = restricted.names.clone();
    let extra = years.len() - 1;
    let mut x = DMatrix::zeros(n, restricted.ncols() + extra);
    x.view_mut((0, 0), (n, restricted.ncols())).copy_from(&restricted.x);
    for (c, &year) in years.iter().skip(1).enumerate() {
        names.push(format!("year_{year}"));
        for (r, row) in panel.rows.iter().enumerate() {
            if row.t == year {
                x[(r, restricted.ncols() + c)] = 1.0;
            }
        }
    }
    let unrestricted = Design { names, x };

    let k_u = unrestricted.ncols();
    if n <= k_u {
        return Err(PanelError::InsufficientObservations { n_obs: n, k: k_u });
    }
    let fit_r = least_squares(&restricted, &y)?;
    let fit_u = least_squares(&unrestricted, &y)?;
    let q = extra as f64;
    let dof2 = (n - k_u) as f64;
    let improvement = (fit_r.rss - fit_u.rss).max(0.0);
    // treat rounding residue of two exact fits as "no improvement"
    let negligible = 1e-14 * y.norm_squared().max(1.0);
    let (statistic, p_value) = if improvement <= negligible {
        (0.0, 1.0)
    } else if fit_u.rss <= negligible {
        (f64::INFINITY, 0.0)
    } else {
        let stat = (improvement / q) / (fit_u.rss / dof2);
        let dist = FisherSnedecor::new(q, dof2).expect("positive dof");
        (stat, 1.0 - dist.cdf(stat))
    };
    Ok(TestResult {
        name: TestKind::FTest,
        statistic,
        degrees_of_freedom: vec![extra, n - k_u],
        p_value,
        decision_hint: if p_value < 0.05 { ModelKind::Fixed } else { ModelKind::Pooled },
        notices: Vec::new(),
    })
}

/// Breusch–Pagan Lagrange-multiplier test for topic random effects, in the
/// Baltagi–Li form that also covers unbalanced panels:
///
/// ```text
/// LM = (ΣTᵢ)² / (2 Σ Tᵢ(Tᵢ−1)) · [ Σᵢ(Σₜ e_it)² / Σ e² − 1 ]² ~ χ²(1)
/// ```
///
/// computed from pooled residuals. On a balanced panel this reduces to
/// `NT/(2(T−1)) · (Σ(Σe)²/Σe² − 1)²`.
pub fn lm_test(panel: &PanelDataset) -> Result<TestResult, PanelError> {
    panel.single_delta()?;
    let multi_obs_topics =
        panel.topic_groups().values().filter(|ids| ids.len() >= 2).count();
    if multi_obs_topics < 2 {
        return Err(PanelError::InsufficientStructure);
    }
    let design = pooled_design(panel);
    let y = y_vector(panel);
    if panel.n_obs() <= design.ncols() {
        return Err(PanelError::InsufficientObservations {
            n_obs: panel.n_obs(),
            k: design.ncols(),
        });
    }
    let fit = least_squares(&design, &y)?;

    let mut sum_t = 0.0;
    let mut sum_t_tm1 = 0.0;
    let mut sum_group_sq = 0.0;
    for ids in panel.topic_groups().values() {
        let t_i = ids.len() as f64;
        sum_t += t_i;
        sum_t_tm1 += t_i * (t_i - 1.0);
        let s: f64 = ids.iter().map(|&i| fit.residuals[i]).sum();
        sum_group_sq += s * s;
    }
    let sse: f64 = fit.residuals.iter().map(|e| e * e).sum();
    let a = sum_group_sq / sse - 1.0;
    let statistic = sum_t * sum_t / (2.0 * sum_t_tm1) * a * a;
    let dist = ChiSquared::new(1.0).expect("df 1");
    let p_value = 1.0 - dist.cdf(statistic);
    Ok(TestResult {
        name: TestKind::LmTest,
        statistic,
        degrees_of_freedom: vec![1],
        p_value,
        decision_hint: if p_value < 0.05 { ModelKind::Random } else { ModelKind::Pooled },
        notices: Vec::new(),
    })
}

/// Hausman comparison of the fixed- and random-effects estimates over their
/// common time-varying regressors:
///
/// ```text
/// H = (β_fe − β_re)ᵀ (V_fe − V_re)⁻¹ (β_fe − β_re) ~ χ²(k)
/// ```
///
/// A covariance difference that is not positive definite is inverted through
/// its eigendecomposition (pseudo-inverse) with a notice.
pub fn hausman(fe: &RegressionResult, re: &RegressionResult) -> Result<TestResult, PanelError> {
    let common: Vec<&str> = fe
        .coefficients
        .iter()
        .filter(|c| re.coefficient(&c.name).is_some())
        .map(|c| c.name.as_str())
        .collect();
    if common.is_empty() {
        return Err(PanelError::NoCommonRegressors);
    }
    let k = common.len();
    let d = DVector::from_iterator(
        k,
        common.iter().map(|name| {
            fe.coefficient(name).expect("common name").estimate
                - re.coefficient(name).expect("common name").estimate
        }),
    );
    let v_fe = fe.cov_submatrix(&common).expect("names from fe");
    let v_re = re.cov_submatrix(&common).expect("names present in re");
    let diff = &v_fe - &v_re;

    let mut notices = Vec::new();
    let sym = (&diff + diff.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let tol = max_abs * 1e-12;
    let not_pd = eig.eigenvalues.iter().any(|&v| v <= tol);
    let inv = if not_pd {
        notices.push(
            "covariance difference is not positive definite; pseudo-inverse used".to_string(),
        );
        // invert the usable spectrum, zero the rest
        let mut lambda_inv = DMatrix::zeros(k, k);
        for i in 0..k {
            if eig.eigenvalues[i].abs() > tol {
                lambda_inv[(i, i)] = 1.0 / eig.eigenvalues[i];
            }
        }
        &eig.eigenvectors * lambda_inv * eig.eigenvectors.transpose()
    } else {
        sym.try_inverse().ok_or_else(|| PanelError::RankDeficient {
            columns: common.iter().map(|s| s.to_string()).collect(),
        })?
    };
    let statistic = (d.transpose() * inv * &d)[(0, 0)];
    let dist = ChiSquared::new(k as f64).expect("positive df");
    let p_value = 1.0 - dist.cdf(statistic.max(0.0));
    Ok(TestResult {
        name: TestKind::Hausman,
        statistic,
        degrees_of_freedom: vec![k],
        p_value,
        decision_hint: if p_value < 0.05 { ModelKind::Fixed } else { ModelKind::Random },
        notices,
    })
}
