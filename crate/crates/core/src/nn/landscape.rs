//! Loss-landscape plane projection and grid evaluation.
//!
//! Three weight vectors span a plane: the first axis is `u = w_h − w_v`, the
//! second is `w_r − w_v` orthogonalized against `u` (Gram–Schmidt), both
//! normalized. A plane point with coordinates (x, y) maps to
//! `P = w_v + x·û + y·v̂`.

use crate::error::{Error, Result};
use crate::nn::mlp::{Arch, Mlp};
use crate::param::ParamVector;

#[derive(Debug, Clone)]
pub struct PlaneProjection {
    pub origin: ParamVector,
    pub u_hat: ParamVector,
    pub v_hat: ParamVector,
    /// Raw norms ‖u‖ and ‖v‖ before normalization, for coordinate scaling.
    pub u_norm: f64,
    pub v_norm: f64,
}

impl PlaneProjection {
    /// In-plane coordinates of a weight vector.
    pub fn coords_of(&self, w: &ParamVector) -> Result<(f64, f64)> {
        let delta = w.sub(&self.origin)?;
        Ok((delta.dot(&self.u_hat)?, delta.dot(&self.v_hat)?))
    }

    /// The weight vector at plane coordinates (x, y).
    pub fn point_at(&self, x: f64, y: f64) -> Result<ParamVector> {
        let mut p = self.origin.clone();
        p.axpy(x, &self.u_hat)?;
        p.axpy(y, &self.v_hat)?;
        Ok(p)
    }

    /// Component of `w − origin` outside the plane.
    pub fn out_of_plane_residual(&self, w: &ParamVector) -> Result<ParamVector> {
        let (x, y) = self.coords_of(w)?;
        let in_plane = self.point_at(x, y)?;
        w.sub(&in_plane)
    }
}

/// Builds the orthonormal plane basis from three weight vectors. Errors if
/// the three are (numerically) collinear.
pub fn plane_projection(
    w_v: &ParamVector,
    w_h: &ParamVector,
    w_r: &ParamVector,
) -> Result<PlaneProjection> {
    let u = w_h.sub(w_v)?;
    let u_norm = u.norm_l2();
    if u_norm < 1e-12 {
        return Err(Error::DegeneratePlane("w_h coincides with w_v".into()));
    }
    let r = w_r.sub(w_v)?;
    let proj = r.dot(&u)? / (u_norm * u_norm);
    let mut v = r;
    v.axpy(-proj, &u)?;
    let v_norm = v.norm_l2();
    if v_norm < 1e-12 {
        return Err(Error::DegeneratePlane(
            "w_r lies on the line through w_v and w_h".into(),
        ));
    }
    let mut u_hat = u;
    u_hat.scale(1.0 / u_norm);
    let mut v_hat = v;
    v_hat.scale(1.0 / v_norm);
    Ok(PlaneProjection {
        origin: w_v.clone(),
        u_hat,
        v_hat,
        u_norm,
        v_norm,
    })
}

/// Dense grid of mean test losses over the plane.
#[derive(Debug, Clone)]
pub struct LossGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major: `losses[iy][ix]` is the loss at (xs[ix], ys[iy]).
    pub losses: Vec<Vec<f64>>,
}

/// Evaluates mean test loss at every grid point of the plane.
pub fn plane_grid_eval(
    proj: &PlaneProjection,
    arch: &Arch,
    test_inputs: &[Vec<f64>],
    test_labels: &[usize],
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: usize,
) -> Result<LossGrid> {
    if resolution < 2 {
        return Err(Error::invalid("resolution must be ≥ 2 per axis"));
    }
    let lin = |lo: f64, hi: f64| -> Vec<f64> {
        (0..resolution)
            .map(|i| lo + (hi - lo) * i as f64 / (resolution - 1) as f64)
            .collect()
    };
    let xs = lin(x_range.0, x_range.1);
    let ys = lin(y_range.0, y_range.1);
    let mut losses = Vec::with_capacity(resolution);
    for &y in &ys {
        let mut row = Vec::with_capacity(resolution);
        for &x in &xs {
            let p = proj.point_at(x, y)?;
            let net = Mlp::unflatten(arch.clone(), p)?;
            row.push(net.mean_loss(test_inputs, test_labels)?);
        }
        losses.push(row);
    }
    Ok(LossGrid { xs, ys, losses })
}
