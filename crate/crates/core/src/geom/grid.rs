use serde::{Deserialize, Serialize};

use super::{dist, transport::w1_transport, PointCloud};
use crate::grid2d::{check_same_grid, GridMeasure};
use crate::error::Result;

/// Enclosure `lower ≤ W₁(a, b) ≤ upper` between two grid measures, in cell
/// units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct W1Bounds {
    pub lower: f64,
    pub upper: f64,
    /// Transport cost between the (possibly coarsened) measures.
    pub estimate: f64,
    /// Side length in cells of the blocks used for coarsening (1 = exact).
    pub block: usize,
}

/// Largest number of support points per side handed to the exact solver.
pub const MAX_TRANSPORT_POINTS: usize = 600;

/// Aggregates the nonnegative cell values `values` over `block × block`
/// squares placed at the block's mass barycentre. Returns the points, their
/// masses, and the cost of moving every cell to its block point.
fn coarsen(values: &[f64], p: usize, block: usize) -> (Vec<[f64; 2]>, Vec<f64>, f64) {
    let q = p.div_ceil(block);
    let mut mass = vec![0.0; q * q];
    let mut moment = vec![[0.0, 0.0]; q * q];
    for (c, m) in values.iter().enumerate() {
        if *m > 0.0 {
            let (i, j) = (c / p, c % p);
            let b = (i / block) * q + j / block;
            mass[b] += m;
            moment[b][0] += m * (i as f64 + 0.5);
            moment[b][1] += m * (j as f64 + 0.5);
        }
    }
    let centre: Vec<[f64; 2]> = moment
        .iter()
        .zip(&mass)
        .map(|(s, m)| if *m > 0.0 { [s[0] / m, s[1] / m] } else { [0.0, 0.0] })
        .collect();
    let mut cost = 0.0;
    for (c, m) in values.iter().enumerate() {
        if *m > 0.0 {
            let (i, j) = (c / p, c % p);
            let b = (i / block) * q + j / block;
            cost += m * dist([i as f64 + 0.5, j as f64 + 0.5], centre[b]);
        }
    }
    let (pts, ms) = centre
        .into_iter()
        .zip(mass)
        .filter(|(_, m)| *m > 0.0)
        .unzip();
    (pts, ms, cost)
}

/// Rigorous bounds on W₁ between grid measures (cell centres, Euclidean
/// distance in cell units). The common part `min(a, b)` cancels; the
/// remaining excesses are transported exactly, after coarsening into blocks
/// when either has more than [`MAX_TRANSPORT_POINTS`] cells, in which case
/// the exact cost of the coarsening widens the enclosure. The difference of
/// means is always a lower bound.
pub fn grid_w1_bounds(a: &GridMeasure, b: &GridMeasure) -> Result<W1Bounds> {
    let p = a.side();
    check_same_grid(p, b.side())?;
    let mut plus = vec![0.0; p * p];
    let mut minus = vec![0.0; p * p];
    for (c, (x, y)) in a.as_slice().iter().zip(b.as_slice()).enumerate() {
        let d = x - y;
        if d > 0.0 {
            plus[c] = d;
        } else {
            minus[c] = -d;
        }
    }
    let mean = |m: &GridMeasure| {
        m.weighted_cells()
            .fold([0.0, 0.0], |s, (x, w)| [s[0] + w * x[0], s[1] + w * x[1]])
    };
    let (ma, mb) = (mean(a), mean(b));
    let mean_gap = dist(ma, mb);
    let excess: f64 = plus.iter().sum::<f64>().max(minus.iter().sum::<f64>());
    if excess == 0.0 {
        return Ok(W1Bounds { lower: 0.0, upper: 0.0, estimate: 0.0, block: 1 });
    }
    let count = |v: &[f64], k: usize| coarsen(v, p, k).1.len();
    let mut block = 1;
    while block < p && (count(&plus, block) > MAX_TRANSPORT_POINTS || count(&minus, block) > MAX_TRANSPORT_POINTS) {
        block += 1;
    }
    let (pp, pm, pc) = coarsen(&plus, p, block);
    let (qp, qm, qc) = coarsen(&minus, p, block);
    // The two excesses carry equal mass up to rounding; normalize both and
    // charge the rounding to the diameter.
    let (sp, sq): (f64, f64) = (pm.iter().sum(), qm.iter().sum());
    let estimate = if pp.is_empty() || qp.is_empty() {
        0.0
    } else {
        let pa = PointCloud::normalized(pp, pm)?;
        let qa = PointCloud::normalized(qp, qm)?;
        w1_transport(&pa, &qa) * sp.min(sq)
    };
    let diameter = (2.0f64).sqrt() * p as f64;
    let rounding = (sp - sq).abs() * diameter;
    let slack = pc + qc + rounding;
    Ok(W1Bounds {
        lower: mean_gap.max(estimate - slack),
        upper: estimate + slack,
        estimate,
        block,
    })
}
