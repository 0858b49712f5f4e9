//! Configuration-dependent output torque limits.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Vector2};

use super::system::PlaSystem;
use crate::error::{check_len, Error, Result};
use crate::scalar::{cast, to_f64, Real};

/// Image of the motor torque box under `Γ_iᵀ`.
///
/// With two outputs the vertices are ordered counterclockwise; with one they
/// are `[min, max]`; otherwise they are the unordered corner images.
#[derive(Clone, Debug, PartialEq)]
pub struct TorquePolytope<T: Real> {
    pub vertices: Vec<DVector<T>>,
    /// The image has lower dimension than the output space.
    pub degenerate: bool,
}

fn box_corners<T: Real>(limits: &[[T; 2]]) -> Vec<DVector<T>> {
    let n = limits.len();
    (0..1usize << n)
        .map(|mask| {
            DVector::from_iterator(
                n,
                limits
                    .iter()
                    .enumerate()
                    .map(|(k, l)| if mask >> k & 1 == 1 { l[1] } else { l[0] }),
            )
        })
        .collect()
}

fn cross<T: Real>(o: &Vector2<T>, a: &Vector2<T>, b: &Vector2<T>) -> T {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Andrew's monotone chain; collinear points are dropped.
fn convex_hull<T: Real>(mut pts: Vec<Vector2<T>>) -> Vec<Vector2<T>> {
    pts.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.y.partial_cmp(&b.y).unwrap_or(std::cmp::Ordering::Equal))
    });
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vector2<T>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<T>>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2
                && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= T::zero()
            {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    hull
}

impl<T: Real> TorquePolytope<T> {
    /// Polytope of `τ_o = Γ_iᵀ τ_i` with `τ_i` in the box `limits`.
    pub fn from_transmission(gamma_i: &DMatrix<T>, limits: &[[T; 2]]) -> Result<Self> {
        check_len("motor torque limits", gamma_i.nrows(), limits.len())?;
        let gt = gamma_i.transpose();
        let images: Vec<DVector<T>> = box_corners(limits).iter().map(|c| &gt * c).collect();
        let n_o = gt.nrows();
        let scale = gt.amax();
        let rank = gt.clone().svd(false, false).rank(scale * cast(1e-10));
        let degenerate = rank < n_o;
        let vertices = match n_o {
            1 => {
                let lo = images
                    .iter()
                    .map(|v| v[0])
                    .fold(images[0][0], |a, b| a.min(b));
                let hi = images
                    .iter()
                    .map(|v| v[0])
                    .fold(images[0][0], |a, b| a.max(b));
                vec![DVector::from_element(1, lo), DVector::from_element(1, hi)]
            }
            2 if !degenerate => {
                convex_hull(images.iter().map(|v| Vector2::new(v[0], v[1])).collect())
                    .into_iter()
                    .map(|p| DVector::from_column_slice(&[p.x, p.y]))
                    .collect()
            }
            _ => images,
        };
        Ok(Self {
            vertices,
            degenerate,
        })
    }

    fn polygon(&self) -> Result<Vec<Vector2<T>>> {
        if self.vertices.first().map(|v| v.len()) != Some(2) || self.degenerate {
            return Err(Error::InvalidParameter(
                "membership queries need a full-dimensional polygon".into(),
            ));
        }
        Ok(self
            .vertices
            .iter()
            .map(|v| Vector2::new(v[0], v[1]))
            .collect())
    }

    /// Whether `tau_o` lies in the polygon, with slack `tol` on each edge.
    pub fn contains(&self, tau_o: &DVector<T>, tol: T) -> Result<bool> {
        if self.vertices.first().map(|v| v.len()) == Some(1) {
            check_len("output torque", 1, tau_o.len())?;
            return Ok(
                tau_o[0] >= self.vertices[0][0] - tol && tau_o[0] <= self.vertices[1][0] + tol
            );
        }
        check_len("output torque", 2, tau_o.len())?;
        let poly = self.polygon()?;
        let p = Vector2::new(tau_o[0], tau_o[1]);
        let n = poly.len();
        Ok((0..n).all(|k| {
            let a = poly[k];
            let b = poly[(k + 1) % n];
            let edge = b - a;
            cross(&a, &b, &p) >= -tol * edge.norm()
        }))
    }

    /// Closest feasible output torque.
    pub fn project(&self, tau_o: &DVector<T>) -> Result<DVector<T>> {
        if self.vertices.first().map(|v| v.len()) == Some(1) {
            check_len("output torque", 1, tau_o.len())?;
            let x = tau_o[0].max(self.vertices[0][0]).min(self.vertices[1][0]);
            return Ok(DVector::from_element(1, x));
        }
        if self.contains(tau_o, T::zero())? {
            return Ok(tau_o.clone());
        }
        let poly = self.polygon()?;
        let p = Vector2::new(tau_o[0], tau_o[1]);
        let n = poly.len();
        let mut best = poly[0];
        let mut best_d = T::max_value().unwrap_or_else(|| cast(f64::MAX));
        for k in 0..n {
            let a = poly[k];
            let b = poly[(k + 1) % n];
            let e = b - a;
            let t = ((p - a).dot(&e) / e.norm_squared())
                .max(T::zero())
                .min(T::one());
            let c = a + e * t;
            let d = (p - c).norm_squared();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        Ok(DVector::from_column_slice(&[best.x, best.y]))
    }
}

/// Feasible output torques at `q_o` for the motor torque box `limits`.
pub fn torque_polytope<T: Real>(
    sys: &PlaSystem<T>,
    q_o: &DVector<T>,
    limits: &[[T; 2]],
    warm: Option<&DVector<T>>,
) -> Result<TorquePolytope<T>> {
    match sys.transmission_jacobians(q_o, warm) {
        Ok(maps) => TorquePolytope::from_transmission(&maps.gamma_i, limits),
        Err(Error::TransmissionSingularity) => Ok(TorquePolytope {
            vertices: Vec::new(),
            degenerate: true,
        }),
        Err(e) => Err(e),
    }
}

/// One grid point of a two-output sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct PolytopeSample<T: Real> {
    pub q_o: [T; 2],
    pub polytope: TorquePolytope<T>,
}

/// Polygons on an `n × n` grid over `[lo, hi]` in each of two outputs.
///
/// Rows are swept in order, warm-starting the closure from the previous point.
pub fn polytope_sweep<T: Real>(
    sys: &PlaSystem<T>,
    lo: [T; 2],
    hi: [T; 2],
    n: usize,
) -> Result<Vec<PolytopeSample<T>>> {
    if sys.num_outputs() != 2 {
        return Err(Error::InvalidParameter(
            "polytope sweeps need two outputs".into(),
        ));
    }
    if n == 0 || !(lo[0] <= hi[0] && lo[1] <= hi[1]) {
        return Err(Error::InvalidParameter("empty sweep range".into()));
    }
    let limits = sys.linkage().motor_torque_limits.clone();
    let at = |k: usize, d: usize| -> T {
        if n == 1 {
            (lo[d] + hi[d]) * cast(0.5)
        } else {
            lo[d] + (hi[d] - lo[d]) * cast::<T>(k as f64 / (n - 1) as f64)
        }
    };
    let mut out = Vec::with_capacity(n * n);
    let mut warm = sys.nominal_support().clone();
    for i in 0..n {
        for j in 0..n {
            let q_o = DVector::from_column_slice(&[at(i, 0), at(j, 1)]);
            let sol = sys.solve_loop_closure(&q_o, Some(&warm))?;
            let y = DVector::from_iterator(
                sol.q_i.len() + sol.q_d.len(),
                sol.q_i.iter().chain(sol.q_d.iter()).copied(),
            );
            let polytope = torque_polytope(sys, &q_o, &limits, Some(&y))?;
            if j == 0 {
                warm = y;
            }
            out.push(PolytopeSample {
                q_o: [q_o[0], q_o[1]],
                polytope,
            });
        }
    }
    Ok(out)
}

pub const POLYTOPE_CSV_HEADER: [&str; 5] =
    ["pitch", "roll", "vertex_index", "tau_pitch", "tau_roll"];

pub fn write_polytope_csv<T: Real, W: Write>(samples: &[PolytopeSample<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POLYTOPE_CSV_HEADER)?;
    for s in samples {
        for (k, v) in s.polytope.vertices.iter().enumerate() {
            w.write_record(&[
                format!("{}", to_f64(s.q_o[0])),
                format!("{}", to_f64(s.q_o[1])),
                k.to_string(),
                format!("{}", to_f64(v[0])),
                format!("{}", to_f64(v[1])),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
