//! Design-matrix assembly and the SVD-backed least-squares core shared by
//! every estimator in this module.

use nalgebra::{DMatrix, DVector};

use super::{PanelDataset, PanelError};

/// Relative singular-value cutoff below which a design is rank deficient.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// A named design matrix.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
}

impl Design {
    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }
}

/// The time-varying regressors of the model, in reporting order.
pub(crate) const TIME_VARYING: [&str; 3] = ["novelty", "growth_t", "age"];

fn column_of(panel: &PanelDataset, name: &str) -> Vec<f64> {
    panel
        .rows
        .iter()
        .map(|r| match name {
            "novelty" => r.novelty,
            "growth_t" => r.growth_t,
            "age" => r.age,
            other => unreachable!("unknown regressor {other}"),
        })
        .collect()
}

/// Distinct field levels present, ascending.
pub(crate) fn field_levels(panel: &PanelDataset) -> Vec<u8> {
    let mut levels: Vec<u8> = panel.rows.iter().map(|r| r.field).collect();
    levels.sort_unstable();
    levels.dedup();
    levels
}

/// Assemble `[1 | novelty | growth_t | age | field dummies]`.
///
/// Field enters as one indicator per level beyond the first (the smallest
/// level present is the reference). With a single level in the data the
/// field term vanishes and a notice is recorded by the caller.
pub(crate) fn pooled_design(panel: &PanelDataset) -> Design {
    let n = panel.rows.len();
    let mut names = vec!["intercept".to_string()];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for var in TIME_VARYING {
        names.push(var.to_string());
        cols.push(column_of(panel, var));
    }
    let levels = field_levels(panel);
    for &level in levels.iter().skip(1) {
        names.push(format!("field_{level}"));
        cols.push(
            panel.rows.iter().map(|r| if r.field == level { 1.0 } else { 0.0 }).collect(),
        );
    }
    let x = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);
    Design { names, x }
}

pub(crate) fn y_vector(panel: &PanelDataset) -> DVector<f64> {
    DVector::from_iterator(panel.rows.len(), panel.rows.iter().map(|r| r.y))
}

/// Least-squares fit with rank diagnostics.
#[derive(Debug, Clone)]
pub(crate) struct LsFit {
    pub beta: DVector<f64>,
    /// (XᵀX)⁻¹ (pseudo-inverse form when near-singular).
    pub cov_unscaled: DMatrix<f64>,
    pub rss: f64,
    pub residuals: DVector<f64>,
    /// smin/smax of the design.
    pub condition: f64,
}

/// Solve `min ‖Xβ − y‖` by SVD. Rank-deficient designs are rejected with the
/// offending column names (read off the null-space direction).
pub(crate) fn least_squares(
    design: &Design,
    y: &DVector<f64>,
) -> Result<LsFit, PanelError> {
    let x = &design.x;
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax <= 0.0 || smin / smax < RANK_TOL {
        return Err(PanelError::RankDeficient { columns: collinear_columns(design, &svd) });
    }
    let beta = svd.solve(y, 0.0).expect("svd computed with u and v_t");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let k = x.ncols();
    let mut cov_unscaled = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let mut acc = 0.0;
            for s in 0..svd.singular_values.len() {
                let sv = svd.singular_values[s];
                acc += v_t[(s, a)] * v_t[(s, b)] / (sv * sv);
            }
            cov_unscaled[(a, b)] = acc;
        }
    }
    let residuals = y - x * &beta;
    let rss = residuals.iter().map(|e| e * e).sum();
    Ok(LsFit { beta, cov_unscaled, rss, residuals, condition: smin / smax })
}

fn collinear_columns(
    design: &Design,
    svd: &nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
) -> Vec<String> {
    let v_t = match svd.v_t.as_ref() {
        Some(v) => v,
        None => return design.names.clone(),
    };
    // null-space direction = row of Vᵀ for the smallest singular value
    let mut idx = 0;
    let mut smin = f64::INFINITY;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s < smin {
            smin = s;
            idx = i;
        }
    }
    let weights: Vec<f64> = (0..design.ncols()).map(|c| v_t[(idx, c)].abs()).collect();
    let wmax = weights.iter().cloned().fold(0.0, f64::max);
    design
        .names
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w > 0.1 * wmax)
        .map(|(n, _)| n.clone())
        .collect()
}

/// Centered total sum of squares.
pub(crate) fn centered_tss(y: &DVector<f64>) -> f64 {
    let mean = y.mean();
    y.iter().map(|v| (v - mean) * (v - mean)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PanelRow;
    use approx::assert_abs_diff_eq;

    fn row(topic: &str, t: i32, field: u8) -> PanelRow {
        PanelRow {
            topic: topic.into(),
            t,
            delta: 1,
            y: t as f64,
            novelty: 1.0,
            growth_t: 2.0,
            age: 3.0,
            field,
        }
    }

    #[test]
    fn pooled_design_names_and_reference_level() {
        let panel = PanelDataset::from_rows(vec![
            row("a", 2000, 3),
            row("a", 2001, 3),
            row("b", 2000, 7),
            row("b", 2001, 17),
        ])
        .unwrap();
        let d = pooled_design(&panel);
        assert_eq!(
            d.names,
            vec!["intercept", "novelty", "growth_t", "age", "field_7", "field_17"]
        );
        // level 3 is the reference: its rows have zeros in both dummies
        assert_eq!(d.x[(0, 4)], 0.0);
        assert_eq!(d.x[(2, 4)], 1.0);
        assert_eq!(d.x[(3, 5)], 1.0);
    }

    #[test]
    fn least_squares_exact_line() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let design = Design { names: vec!["intercept".into(), "x".into()], x };
        let y = DVector::from_row_slice(&[1.0, 3.0, 5.0, 7.0]);
        let fit = least_squares(&design, &y).unwrap();
        assert_abs_diff_eq!(fit.beta[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.beta[1], 2.0, epsilon = 1e-12);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        // independent oracle: solve XᵀXβ = Xᵀy by hand on a small fixture
        let x = DMatrix::from_row_slice(
            5,
            2,
            &[1.0, 2.0, 1.0, -1.0, 1.0, 0.5, 1.0, 3.0, 1.0, -2.0],
        );
        let y = DVector::from_row_slice(&[1.0, 0.0, 2.0, -1.0, 0.5]);
        let design = Design { names: vec!["c0".into(), "c1".into()], x: x.clone() };
        let fit = least_squares(&design, &y).unwrap();
        let xtx = x.transpose() * &x;
        let xty = x.transpose() * &y;
        let oracle = xtx.try_inverse().unwrap() * xty;
        for i in 0..2 {
            assert_abs_diff_eq!(fit.beta[i], oracle[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn rank_deficiency_names_collinear_columns() {
        // third column is the sum of the first two
        let x = DMatrix::from_fn(6, 3, |r, c| match c {
            0 => 1.0,
            1 => r as f64,
            _ => 1.0 + r as f64,
        });
        let design =
            Design { names: vec!["intercept".into(), "trend".into(), "sum".into()], x };
        let y = DVector::from_element(6, 1.0);
        match least_squares(&design, &y) {
            Err(PanelError::RankDeficient { columns }) => {
                assert!(columns.contains(&"sum".to_string()), "columns: {columns:?}");
            }
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }
}
