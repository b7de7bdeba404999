use crate::error::{Error, Result};
use crate::games::SimplexPoint;

/// KKT data of a simplex projection: `x_i = max(v_i - theta, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCertificate {
    pub theta: f64,
    /// Indices with positive output mass, in decreasing order of input.
    pub support: Vec<usize>,
}

/// Nearest point of the probability simplex to `v`.
pub fn project_simplex(v: &[f64]) -> Result<SimplexPoint> {
    let mut out = vec![0.0; v.len()];
    let mut order = Vec::with_capacity(v.len());
    project_simplex_into(v, &mut out, &mut order)?;
    Ok(SimplexPoint::from_vec_unchecked(out))
}

/// Projection together with its threshold and support.
pub fn project_simplex_certified(v: &[f64]) -> Result<(SimplexPoint, SimplexCertificate)> {
    let mut out = vec![0.0; v.len()];
    let mut order = Vec::with_capacity(v.len());
    let theta = project_simplex_into(v, &mut out, &mut order)?;
    let support = order.into_iter().filter(|&i| out[i] > 0.0).collect();
    Ok((SimplexPoint::from_vec_unchecked(out), SimplexCertificate { theta, support }))
}

/// Allocation-free core: writes the projection into `out` and returns `theta`.
/// `order` is scratch space; on return it holds indices sorted by decreasing
/// input, ties broken by index.
pub fn project_simplex_into(v: &[f64], out: &mut [f64], order: &mut Vec<usize>) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::Structural("cannot project an empty vector".into()));
    }
    if out.len() != v.len() {
        return Err(Error::Structural(format!("output has {} entries, input {}", out.len(), v.len())));
    }
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NumericInput { index });
    }
    order.clear();
    order.extend(0..v.len());
    // Stable sort keeps equal inputs in index order, so runs are reproducible.
    order.sort_by(|&i, &j| v[j].partial_cmp(&v[i]).unwrap());

    let mut cum = 0.0;
    let mut theta = v[order[0]] - 1.0;
    for (j, &i) in order.iter().enumerate() {
        cum += v[i];
        let t = (cum - 1.0) / (j + 1) as f64;
        if v[i] - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - theta).max(0.0);
    }
    Ok(theta)
}
