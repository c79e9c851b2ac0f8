//! Pooled OLS, the within (fixed-effects) estimator, and Swamy–Arora
//! random-effects GLS.
//!
//! References: Greene, *Econometric Analysis*, ch. 11; Baltagi, *Econometric
//! Analysis of Panel Data*, ch. 2–3.

use nalgebra::{DMatrix, DVector};

use super::design::{centered_tss, least_squares, pooled_design, y_vector, Design, TIME_VARYING};
use super::{
    Coefficient, ModelKind, PanelDataset, PanelError, RegressionResult, VarianceComponents,
};

/// Condition-number threshold below which a notice about near-collinearity is
/// attached (the fit itself still proceeds).
const NEAR_COLLINEAR_TOL: f64 = 1e-8;

/// Ordinary least squares on `[1, novelty, growth_t, age, field dummies]`
/// with conventional standard errors.
pub fn pooled_ols(panel: &PanelDataset) -> Result<RegressionResult, PanelError> {
    panel.single_delta()?;
    let design = pooled_design(panel);
    let y = y_vector(panel);
    let n = panel.n_obs();
    let k = design.ncols();
    if n <= k + 1 {
        return Err(PanelError::InsufficientObservations { n_obs: n, k });
    }
    let fit = least_squares(&design, &y)?;
    let sigma2 = fit.rss / (n - k) as f64;
    let tss = centered_tss(&y);
    let r_squared = if tss > 0.0 { 1.0 - fit.rss / tss } else { 0.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / (n - k) as f64;
    let q = (k - 1).max(1);
    let f_value = if fit.rss > 0.0 {
        ((tss - fit.rss) / q as f64) / (fit.rss / (n - k) as f64)
    } else {
        f64::INFINITY
    };

    let mut notices = Vec::new();
    let mut dropped = Vec::new();
    if super::design::field_levels(panel).len() == 1 {
        dropped.push("field".to_string());
        notices.push("field has a single level in this panel; no dummy columns".to_string());
    }

    // slopes only: skip the intercept column
    let coefficients: Vec<Coefficient> = design
        .names
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, name)| Coefficient {
            name: name.clone(),
            estimate: fit.beta[i],
            std_error: (sigma2 * fit.cov_unscaled[(i, i)]).sqrt(),
        })
        .collect();
    let n_slopes = coefficients.len();
    let cov = DMatrix::from_fn(n_slopes, n_slopes, |r, c| {
        sigma2 * fit.cov_unscaled[(r + 1, c + 1)]
    });

    Ok(RegressionResult {
        model_kind: ModelKind::Pooled,
        coefficients,
        intercept: fit.beta[0],
        variance_components: None,
        r_squared,
        adj_r_squared,
        f_value,
        n_obs: n,
        n_topics: panel.n_topics(),
        dropped,
        notices,
        cov,
    })
}

/// Per-topic means of y and the time-varying regressors.
struct TopicMeans {
    y: f64,
    x: [f64; 3],
    size: usize,
    field: u8,
}

fn topic_means(panel: &PanelDataset) -> Vec<(String, TopicMeans)> {
    panel
        .topic_groups()
        .iter()
        .map(|(topic, ids)| {
            let n = ids.len() as f64;
            let mut m = TopicMeans {
                y: 0.0,
                x: [0.0; 3],
                size: ids.len(),
                field: panel.rows[ids[0]].field,
            };
            for &i in ids {
                let r = &panel.rows[i];
                m.y += r.y;
                m.x[0] += r.novelty;
                m.x[1] += r.growth_t;
                m.x[2] += r.age;
            }
            m.y /= n;
            for v in &mut m.x {
                *v /= n;
            }
            (topic.clone(), m)
        })
        .collect()
}

/// The within design: time-varying regressors demeaned by topic, over the
/// given topic groups. Returns (design, demeaned y).
fn within_design(
    panel: &PanelDataset,
    groups: &[(String, Vec<usize>)],
) -> (Design, DVector<f64>) {
    let n: usize = groups.iter().map(|(_, ids)| ids.len()).sum();
    let mut x = DMatrix::zeros(n, TIME_VARYING.len());
    let mut y = DVector::zeros(n);
    let mut row = 0;
    for (_, ids) in groups {
        let count = ids.len() as f64;
        let mut means = [0.0f64; 4];
        for &i in ids {
            let r = &panel.rows[i];
            means[0] += r.y;
            means[1] += r.novelty;
            means[2] += r.growth_t;
            means[3] += r.age;
        }
        for m in &mut means {
            *m /= count;
        }
        for &i in ids {
            let r = &panel.rows[i];
            y[row] = r.y - means[0];
            x[(row, 0)] = r.novelty - means[1];
            x[(row, 1)] = r.growth_t - means[2];
            x[(row, 2)] = r.age - means[3];
            row += 1;
        }
    }
    let names = TIME_VARYING.iter().map(|s| s.to_string()).collect();
    (Design { names, x }, y)
}

/// Within (fixed-effects) estimator: every variable is demeaned by topic,
/// absorbing the topic intercepts. Time-invariant regressors drop out; topics
/// with a single observation are excluded with a notice.
pub fn fixed_effects(panel: &PanelDataset) -> Result<RegressionResult, PanelError> {
    panel.single_delta()?;
    let mut notices = Vec::new();
    let kept: Vec<(String, Vec<usize>)> = panel
        .topic_groups()
        .iter()
        .filter(|(_, ids)| ids.len() >= 2)
        .map(|(t, ids)| (t.clone(), ids.clone()))
        .collect();
    let dropped_topics = panel.n_topics() - kept.len();
    if dropped_topics > 0 {
        log::warn!("fixed effects: dropping {dropped_topics} single-observation topics");
        notices.push(format!("dropped {dropped_topics} single-observation topics"));
    }
    if kept.is_empty() {
        return Err(PanelError::NoWithinVariation);
    }

    let (design, y_w) = within_design(panel, &kept);
    let n: usize = kept.iter().map(|(_, ids)| ids.len()).sum();
    let n_topics = kept.len();
    let k = design.ncols();
    let dof = n as isize - n_topics as isize - k as isize;
    if dof <= 0 {
        return Err(PanelError::InsufficientObservations { n_obs: n, k: n_topics + k });
    }
    let fit = least_squares(&design, &y_w)?;
    if fit.condition < NEAR_COLLINEAR_TOL {
        notices.push(format!(
            "within design is near-collinear (condition ratio {:.2e})",
            fit.condition
        ));
    }
    let dof = dof as f64;
    let sigma2 = fit.rss / dof;
    let tss_w: f64 = y_w.iter().map(|v| v * v).sum();
    let r_squared = if tss_w > 0.0 { 1.0 - fit.rss / tss_w } else { 0.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / dof;
    let f_value = if fit.rss > 0.0 {
        ((tss_w - fit.rss) / k as f64) / (fit.rss / dof)
    } else {
        f64::INFINITY
    };

    // average absorbed intercept: mean over topics of ȳ_i − x̄_i'β
    let means = topic_means(panel);
    let intercept = {
        let mut acc = 0.0;
        let mut cnt = 0.0;
        for (topic, m) in &means {
            if kept.iter().any(|(t, _)| t == topic) {
                let xb: f64 = (0..3).map(|j| m.x[j] * fit.beta[j]).sum();
                acc += m.y - xb;
                cnt += 1.0;
            }
        }
        acc / cnt
    };

    let coefficients: Vec<Coefficient> = design
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| Coefficient {
            name: name.clone(),
            estimate: fit.beta[i],
            std_error: (sigma2 * fit.cov_unscaled[(i, i)]).sqrt(),
        })
        .collect();
    let cov = fit.cov_unscaled.map(|v| sigma2 * v);

    Ok(RegressionResult {
        model_kind: ModelKind::Fixed,
        coefficients,
        intercept,
        variance_components: None,
        r_squared,
        adj_r_squared,
        f_value,
        n_obs: n,
        n_topics,
        dropped: vec!["field".to_string()],
        notices,
        cov,
    })
}

/// Swamy–Arora random-effects GLS.
///
/// σ²_ε comes from the within residuals, σ²_u from the between regression on
/// topic means (clamped at zero with a notice when the moment estimate turns
/// negative). Each topic is quasi-demeaned by
/// `θ_i = 1 − sqrt(σ²_ε / (σ²_ε + T_i σ²_u))` and the transformed system is
/// solved by OLS, which reproduces GLS with the block-diagonal
/// equicorrelated covariance exactly.
pub fn random_effects(panel: &PanelDataset) -> Result<RegressionResult, PanelError> {
    panel.single_delta()?;
    let mut notices = Vec::new();
    let n = panel.n_obs();
    let groups: Vec<(String, Vec<usize>)> =
        panel.topic_groups().iter().map(|(t, ids)| (t.clone(), ids.clone())).collect();
    let n_topics = groups.len();

    // idiosyncratic variance from the within residuals (single-observation
    // topics contribute zero rows, which the degrees of freedom absorb)
    let (w_design, y_w) = within_design(panel, &groups);
    let k_w = w_design.ncols();
    let dof_w = n as isize - n_topics as isize - k_w as isize;
    if dof_w <= 0 {
        return Err(PanelError::InsufficientObservations { n_obs: n, k: n_topics + k_w });
    }
    let w_fit = least_squares(&w_design, &y_w)?;
    let sigma2_e = w_fit.rss / dof_w as f64;

    // between regression on topic means
    let means = topic_means(panel);
    let mut field_levels: Vec<u8> = means.iter().map(|(_, m)| m.field).collect();
    field_levels.sort_unstable();
    field_levels.dedup();
    let k_b = 4 + field_levels.len().saturating_sub(1);
    if n_topics <= k_b {
        return Err(PanelError::InsufficientTopics { n_topics, k: k_b });
    }
    let between_design = {
        let mut names = vec![
            "intercept".to_string(),
            "novelty".to_string(),
            "growth_t".to_string(),
            "age".to_string(),
        ];
        let mut x = DMatrix::zeros(n_topics, k_b);
        for (r, (_, m)) in means.iter().enumerate() {
            x[(r, 0)] = 1.0;
            for j in 0..3 {
                x[(r, 1 + j)] = m.x[j];
            }
            for (c, &level) in field_levels.iter().skip(1).enumerate() {
                x[(r, 4 + c)] = if m.field == level { 1.0 } else { 0.0 };
            }
        }
        for &level in field_levels.iter().skip(1) {
            names.push(format!("field_{level}"));
        }
        Design { names, x }
    };
    let y_b = DVector::from_iterator(n_topics, means.iter().map(|(_, m)| m.y));
    let b_fit = least_squares(&between_design, &y_b)?;
    let sigma2_b = b_fit.rss / (n_topics - k_b) as f64;

    // E[σ²_b] ≈ σ²_u + σ²_ε·mean(1/T_i); moment estimate, clamped at zero
    let mean_inv_t: f64 =
        means.iter().map(|(_, m)| 1.0 / m.size as f64).sum::<f64>() / n_topics as f64;
    let mut sigma2_u = sigma2_b - sigma2_e * mean_inv_t;
    if sigma2_u < 0.0 {
        notices.push(format!(
            "between-variance moment estimate was negative ({sigma2_u:.3e}); clamped to 0"
        ));
        sigma2_u = 0.0;
    }

    // quasi-demean the pooled design per topic
    let design = pooled_design(panel);
    let y = y_vector(panel);
    let k = design.ncols();
    if n <= k + 1 {
        return Err(PanelError::InsufficientObservations { n_obs: n, k });
    }
    let mut x_t = design.x.clone();
    let mut y_t = y.clone();
    let mut theta_sum = 0.0;
    for (_, ids) in &groups {
        let t_i = ids.len() as f64;
        let theta = 1.0 - (sigma2_e / (sigma2_e + t_i * sigma2_u)).sqrt();
        theta_sum += theta;
        let mut y_mean = 0.0;
        let mut x_mean = vec![0.0; k];
        for &i in ids {
            y_mean += y[i];
            for c in 0..k {
                x_mean[c] += design.x[(i, c)];
            }
        }
        y_mean /= t_i;
        for m in &mut x_mean {
            *m /= t_i;
        }
        for &i in ids {
            y_t[i] -= theta * y_mean;
            for c in 0..k {
                x_t[(i, c)] -= theta * x_mean[c];
            }
        }
    }
    let theta_mean = theta_sum / n_topics as f64;

    let gls_design = Design { names: design.names.clone(), x: x_t };
    let fit = least_squares(&gls_design, &y_t)?;

    // GLS covariance: (XᵀΩ⁻¹X)⁻¹ = σ²_ε (X̃ᵀX̃)⁻¹
    let cov_full = fit.cov_unscaled.map(|v| sigma2_e * v);

    // goodness of fit in the transformed space; the intercept-only
    // transformed fit supplies the total sum of squares
    let tss_t = {
        let intercept_col = Design {
            names: vec!["intercept".to_string()],
            x: DMatrix::from_column_slice(
                n,
                1,
                gls_design.x.column(0).iter().copied().collect::<Vec<f64>>().as_slice(),
            ),
        };
        least_squares(&intercept_col, &y_t)?.rss
    };
    let r_squared = if tss_t > 0.0 { 1.0 - fit.rss / tss_t } else { 0.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / (n - k) as f64;
    let q = (k - 1).max(1);
    let f_value = if fit.rss > 0.0 {
        ((tss_t - fit.rss) / q as f64) / (fit.rss / (n - k) as f64)
    } else {
        f64::INFINITY
    };

    let mut dropped = Vec::new();
    if super::design::field_levels(panel).len() == 1 {
        dropped.push("field".to_string());
        notices.push("field has a single level in this panel; no dummy columns".to_string());
    }

    let coefficients: Vec<Coefficient> = gls_design
        .names
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, name)| Coefficient {
            name: name.clone(),
            estimate: fit.beta[i],
            std_error: cov_full[(i, i)].sqrt(),
        })
        .collect();
    let n_slopes = coefficients.len();
    let cov = DMatrix::from_fn(n_slopes, n_slopes, |r, c| cov_full[(r + 1, c + 1)]);

    Ok(RegressionResult {
        model_kind: ModelKind::Random,
        coefficients,
        intercept: fit.beta[0],
        variance_components: Some(VarianceComponents {
            sigma2_u,
            sigma2_e,
            theta: theta_mean,
        }),
        r_squared,
        adj_r_squared,
        f_value,
        n_obs: n,
        n_topics,
        dropped,
        notices,
        cov,
    })
}
