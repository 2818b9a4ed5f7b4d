use serde::{Deserialize, Serialize};

use super::{PathError, RiskBasis, StepPath, TimeGrid, TIME_TOL};

/// One information delay `τ` with `τ(0) = 0`, `τ(t) <= t`, non-decreasing and right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayMap {
    Identity,
    /// `τ(t)` is the last observation point `<= t`. Points are sorted and start at 0.
    Floor(Vec<f64>),
    /// `τ(t) = max(0, t - lag)`.
    Shift(f64),
    /// Linear interpolation between knots `(t, τ(t))`, constant after the last knot.
    PiecewiseLinear(Vec<(f64, f64)>),
}

/// Image of `[0, H]` under a delay map.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayImage {
    Points(Vec<f64>),
    Interval(f64),
}

impl DelayImage {
    pub fn is_subset_of(&self, other: &DelayImage) -> bool {
        match (self, other) {
            (DelayImage::Points(a), DelayImage::Points(b)) => a
                .iter()
                .all(|x| b.iter().any(|y| (x - y).abs() <= TIME_TOL)),
            (DelayImage::Points(a), DelayImage::Interval(end)) => {
                a.iter().all(|&x| x <= end + TIME_TOL)
            }
            (DelayImage::Interval(end), DelayImage::Interval(other)) => *end <= other + TIME_TOL,
            (DelayImage::Interval(end), DelayImage::Points(b)) => {
                *end <= TIME_TOL && b.iter().any(|y| y.abs() <= TIME_TOL)
            }
        }
    }
}

impl DelayMap {
    /// Floor to the grid `{0, Δ, 2Δ, ...}` on `[0, horizon]`.
    pub fn floor_to_grid(delta: f64, horizon: f64) -> Result<Self, PathError> {
        if !(delta > 0.0) {
            return Err(PathError::InvalidDelay(format!("floor step must be positive, got {delta}")));
        }
        let n = (horizon / delta + TIME_TOL).floor() as usize;
        Ok(DelayMap::Floor((0..=n).map(|k| k as f64 * delta).collect()))
    }

    pub fn validate(&self) -> Result<(), PathError> {
        match self {
            DelayMap::Identity => Ok(()),
            DelayMap::Floor(points) => {
                if points.first() != Some(&0.0) {
                    return Err(PathError::InvalidDelay(
                        "floor observation points must start at 0".into(),
                    ));
                }
                if points.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(PathError::InvalidDelay(
                        "floor observation points must be strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            DelayMap::Shift(lag) if *lag >= 0.0 && lag.is_finite() => Ok(()),
            DelayMap::Shift(lag) => Err(PathError::InvalidDelay(format!("negative lag {lag}"))),
            DelayMap::PiecewiseLinear(knots) => {
                if knots.first() != Some(&(0.0, 0.0)) {
                    return Err(PathError::InvalidDelay("first knot must be (0, 0)".into()));
                }
                for w in knots.windows(2) {
                    if !(w[1].0 > w[0].0) || w[1].1 < w[0].1 {
                        return Err(PathError::InvalidDelay(
                            "knots must increase in t and not decrease in τ".into(),
                        ));
                    }
                }
                if knots.iter().any(|&(t, v)| v > t + TIME_TOL) {
                    return Err(PathError::InvalidDelay("delay may not look ahead".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            DelayMap::Identity => t,
            DelayMap::Floor(points) => {
                let n = points.partition_point(|&a| a <= t + TIME_TOL);
                points[n.saturating_sub(1)]
            }
            DelayMap::Shift(lag) => (t - lag).max(0.0),
            DelayMap::PiecewiseLinear(knots) => {
                let n = knots.partition_point(|&(x, _)| x <= t);
                if n == 0 {
                    return 0.0;
                }
                if n >= knots.len() {
                    return knots[knots.len() - 1].1;
                }
                let (x0, y0) = knots[n - 1];
                let (x1, y1) = knots[n];
                y0 + (t - x0) * (y1 - y0) / (x1 - x0)
            }
        }
    }

    /// `inf{u >= 0 : τ(u) >= s}`, or `+∞` when `τ` never reaches `s`.
    pub fn pseudo_inverse(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            DelayMap::Identity => s,
            DelayMap::Floor(points) => {
                let n = points.partition_point(|&a| a < s - TIME_TOL);
                points.get(n).copied().unwrap_or(f64::INFINITY)
            }
            DelayMap::Shift(lag) => s + lag,
            DelayMap::PiecewiseLinear(knots) => {
                let n = knots.partition_point(|&(_, y)| y < s - TIME_TOL);
                if n >= knots.len() {
                    return f64::INFINITY;
                }
                if n == 0 {
                    return 0.0;
                }
                let (x0, y0) = knots[n - 1];
                let (x1, y1) = knots[n];
                (x0 + (s - y0) * (x1 - x0) / (y1 - y0)).min(x1)
            }
        }
    }

    /// `sup_{0 <= s <= H} (s - τ(s))`.
    pub fn sup_lag(&self, horizon: f64) -> f64 {
        match self {
            DelayMap::Identity => 0.0,
            DelayMap::Floor(points) => {
                let inside: Vec<f64> = points.iter().copied().filter(|&a| a <= horizon + TIME_TOL).collect();
                let gaps = inside.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
                gaps.max(horizon - inside[inside.len() - 1])
            }
            DelayMap::Shift(lag) => lag.min(horizon),
            DelayMap::PiecewiseLinear(knots) => knots
                .iter()
                .filter(|&&(x, _)| x <= horizon)
                .map(|&(x, y)| x - y)
                .fold(horizon - self.eval(horizon), f64::max),
        }
    }

    pub fn image(&self, horizon: f64) -> DelayImage {
        match self {
            DelayMap::Floor(points) => DelayImage::Points(
                points.iter().copied().filter(|&a| a <= horizon + TIME_TOL).collect(),
            ),
            _ => DelayImage::Interval(self.eval(horizon)),
        }
    }

    /// Times in `[0, H]` at which `τ` first reaches a point of `grid`.
    fn crossings(&self, grid: &TimeGrid) -> Vec<f64> {
        if matches!(self, DelayMap::Identity) {
            return Vec::new();
        }
        let h = grid.horizon();
        grid.points()[1..]
            .iter()
            .map(|&s| self.pseudo_inverse(s))
            .filter(|&u| u <= h + TIME_TOL)
            .collect()
    }
}

/// A delay for each basis component, with an optional witnessing partition for phased delays.
#[derive(Debug, Clone, PartialEq)]
pub struct Delay {
    maps: Vec<DelayMap>,
    witness: Option<TimeGrid>,
    label: String,
}

impl Delay {
    pub fn new(maps: Vec<DelayMap>, label: impl Into<String>) -> Result<Self, PathError> {
        for m in &maps {
            m.validate()?;
        }
        Ok(Self {
            maps,
            witness: None,
            label: label.into(),
        })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            maps: vec![DelayMap::Identity; m],
            witness: None,
            label: "identity".into(),
        }
    }

    /// Attach a witnessing partition; fails unless at most one component moves on each of its intervals.
    pub fn with_witness(mut self, witness: TimeGrid) -> Result<Self, PathError> {
        if let Some((a, b)) = self.first_unphased_interval(&witness) {
            return Err(PathError::InvalidDelay(format!(
                "several components move on ({a}, {b}]"
            )));
        }
        self.witness = Some(witness);
        Ok(self)
    }

    pub fn maps(&self) -> &[DelayMap] {
        &self.maps
    }

    pub fn map(&self, i: usize) -> &DelayMap {
        &self.maps[i]
    }

    pub fn m(&self) -> usize {
        self.maps.len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn witness(&self) -> Option<&TimeGrid> {
        self.witness.as_ref()
    }

    pub fn is_phased(&self) -> bool {
        self.witness.is_some()
    }

    pub fn is_continuous(&self) -> bool {
        self.maps
            .iter()
            .all(|m| matches!(m, DelayMap::Identity | DelayMap::Shift(_) | DelayMap::PiecewiseLinear(_)))
    }

    /// Component whose delay is non-constant on `(a, b]`, `None` if all are constant.
    /// Errors when more than one component moves.
    pub fn moving_component(&self, a: f64, b: f64) -> Result<Option<usize>, PathError> {
        let moving: Vec<usize> = (0..self.m())
            .filter(|&i| self.maps[i].eval(b) > self.maps[i].eval(a) + TIME_TOL)
            .collect();
        match moving.len() {
            0 => Ok(None),
            1 => Ok(Some(moving[0])),
            _ => Err(PathError::InvalidDelay(format!(
                "components {moving:?} all move on ({a}, {b}]"
            ))),
        }
    }

    fn first_unphased_interval(&self, witness: &TimeGrid) -> Option<(f64, f64)> {
        witness
            .points()
            .windows(2)
            .find(|w| self.moving_component(w[0], w[1]).is_err())
            .map(|w| (w[0], w[1]))
    }

    pub fn sup_lags(&self, horizon: f64) -> Vec<f64> {
        self.maps.iter().map(|m| m.sup_lag(horizon)).collect()
    }
}

/// The delayed basis `X_i(τ_i(t))`, on the basis grid refined by the delay crossing times.
pub fn apply_delay(basis: &RiskBasis, delay: &Delay) -> Result<RiskBasis, PathError> {
    if delay.m() != basis.m() {
        return Err(PathError::DimensionMismatch {
            expected: basis.m(),
            got: delay.m(),
        });
    }
    let grid = basis.grid();
    let extra: Vec<f64> = delay.maps.iter().flat_map(|m| m.crossings(grid)).collect();
    let fine = grid.refine_with(&extra);
    let components = basis
        .components()
        .iter()
        .zip(&delay.maps)
        .map(|(path, map)| {
            let mut values = Vec::with_capacity(fine.len() * path.dim());
            for &t in fine.points() {
                let k = grid.index_at_unchecked(map.eval(t));
                values.extend_from_slice(path.row(k));
            }
            StepPath::new(fine.clone(), path.dim(), values)
        })
        .collect::<Result<Vec<_>, _>>()?;
    basis.with_components(components)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayKind {
    /// Staggered floor delays: at most one component updates on each witnessing interval.
    PhasedDyadic,
    /// `τ(t) = max(0, t - 2^{-n} H)` for every component.
    ContinuousLag,
}

/// Delays for levels `1..=n_levels`, each level finer than the previous.
pub fn make_refining_delays(
    kind: DelayKind,
    n_levels: u32,
    m: usize,
    horizon: f64,
) -> Result<Vec<Delay>, PathError> {
    if n_levels == 0 || n_levels > 30 || m == 0 || !(horizon > 0.0) {
        return Err(PathError::InvalidDelay(format!(
            "refining delays need n_levels in 1..=30, m >= 1 and a positive horizon (got {n_levels}, {m}, {horizon})"
        )));
    }
    let finest = horizon / (1u64 << n_levels) as f64;
    (1..=n_levels)
        .map(|n| {
            let h = horizon / (1u64 << n) as f64;
            match kind {
                DelayKind::ContinuousLag => {
                    Delay::new(vec![DelayMap::Shift(h); m], format!("continuous-lag-{n}"))
                }
                DelayKind::PhasedDyadic => {
                    let mut witness = vec![horizon];
                    let maps: Vec<DelayMap> = (0..m)
                        .map(|i| {
                            let offset = i as f64 * finest / m as f64;
                            let mut pts = vec![0.0];
                            let mut k = 0u64;
                            loop {
                                let t = offset + k as f64 * h;
                                let keep = if i == 0 {
                                    t <= horizon + TIME_TOL
                                } else {
                                    t < horizon - TIME_TOL
                                };
                                if !keep {
                                    break;
                                }
                                if t > 0.0 {
                                    pts.push(t.min(horizon));
                                }
                                k += 1;
                            }
                            witness.extend_from_slice(&pts);
                            DelayMap::Floor(pts)
                        })
                        .collect();
                    witness.sort_by(f64::total_cmp);
                    witness.dedup_by(|a, b| (*a - *b).abs() <= TIME_TOL);
                    Delay::new(maps, format!("phased-dyadic-{n}"))?.with_witness(TimeGrid::new(witness)?)
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefiningReport {
    /// `sup_lags[n][i]`: sup-lag of component `i` at level `n`.
    pub sup_lags: Vec<Vec<f64>>,
    pub lags_non_increasing: bool,
    pub lags_shrink: bool,
    pub images_nested: bool,
    pub passes: bool,
}

/// Checks that sup-lags do not increase and shrink, and that delay images are nested across levels.
///
/// A single level counts as shrinking when its lag is below the horizon.
pub fn verify_refining(delays: &[Delay], horizon: f64) -> RefiningReport {
    let sup_lags: Vec<Vec<f64>> = delays.iter().map(|d| d.sup_lags(horizon)).collect();
    let m = delays.first().map_or(0, Delay::m);
    let same_shape = delays.iter().all(|d| d.m() == m);
    let mut non_increasing = same_shape;
    let mut nested = same_shape;
    for w in delays.windows(2) {
        for i in 0..m.min(w[0].m()).min(w[1].m()) {
            if w[1].map(i).sup_lag(horizon) > w[0].map(i).sup_lag(horizon) + TIME_TOL {
                non_increasing = false;
            }
            if !w[0].map(i).image(horizon).is_subset_of(&w[1].map(i).image(horizon)) {
                nested = false;
            }
        }
    }
    let worst = |lags: &Vec<f64>| lags.iter().copied().fold(0.0, f64::max);
    let lags_shrink = match (sup_lags.first(), sup_lags.last()) {
        (Some(first), Some(last)) => {
            let (first, last) = (worst(first), worst(last));
            last <= TIME_TOL || last < first || (sup_lags.len() == 1 && last < horizon)
        }
        _ => false,
    };
    RefiningReport {
        passes: non_increasing && nested && lags_shrink,
        sup_lags,
        lags_non_increasing: non_increasing,
        lags_shrink,
        images_nested: nested,
    }
}
