//! Synthetic datasets, CSV ingestion and preprocessing.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{check_dim, Error, Result};

/// Rows of `points` are data points; `labels` holds regression targets when
/// present.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: DMatrix<f64>,
    pub labels: Option<DVector<f64>>,
}

impl PointSet {
    pub fn new(points: DMatrix<f64>, labels: Option<DVector<f64>>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::invalid("point set needs n >= 1 and d >= 1"));
        }
        if let Some(y) = &labels {
            check_dim(points.nrows(), y.len())?;
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("labels must be finite"));
            }
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
        Ok(PointSet { points, labels })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Labels, or an error for unlabelled data.
    pub fn require_labels(&self) -> Result<&DVector<f64>> {
        self.labels
            .as_ref()
            .ok_or_else(|| Error::invalid("dataset has no labels"))
    }

    /// Replaces every label `y` by `√y`.
    pub fn sqrt_labels(mut self) -> Result<Self> {
        let y = self
            .labels
            .as_mut()
            .ok_or_else(|| Error::invalid("dataset has no labels"))?;
        if let Some(bad) = y.iter().find(|v| **v < 0.0) {
            return Err(Error::invalid(format!("cannot take square root of label {bad}")));
        }
        y.apply(|v| *v = v.sqrt());
        Ok(self)
    }

    /// Subset of rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> PointSet {
        PointSet {
            points: self.points.select_rows(rows),
            labels: self.labels.as_ref().map(|y| y.select_rows(rows)),
        }
    }

    /// Random split into `n_train` and `len() − n_train` rows.
    pub fn split<R: Rng + ?Sized>(&self, n_train: usize, rng: &mut R) -> Result<(PointSet, PointSet)> {
        if n_train == 0 || n_train >= self.len() {
            return Err(Error::invalid(format!(
                "train size {n_train} must be in [1, {})",
                self.len()
            )));
        }
        let perm = index::sample(rng, self.len(), self.len()).into_vec();
        Ok((self.select_rows(&perm[..n_train]), self.select_rows(&perm[n_train..])))
    }
}

/// The Swiss-roll point with roll parameter `t` and height `h`.
pub fn swiss_roll_point(t: f64, h: f64) -> [f64; 3] {
    [t * t.cos(), h, t * t.sin()]
}

/// `n` Swiss-roll points with `t ~ U[3π/2, 9π/2]` and `h ~ U[0, 21]`.
pub fn gen_swiss_roll<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::invalid("swiss roll needs n >= 1"));
    }
    let mut points = DMatrix::zeros(n, 3);
    for j in 0..n {
        let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
        let h = 21.0 * rng.random::<f64>();
        let p = swiss_roll_point(t, h);
        for (c, v) in p.into_iter().enumerate() {
            points[(j, c)] = v;
        }
    }
    PointSet::new(points, None)
}

pub const LORENZ_SIGMA: f64 = 10.0;
pub const LORENZ_RHO: f64 = 28.0;
pub const LORENZ_BETA: f64 = 8.0 / 3.0;

/// Default integration settings.
pub const LORENZ_DT: f64 = 0.01;
pub const LORENZ_X0: [f64; 3] = [1.0, 1.0, 1.0];
pub const LORENZ_BURN_IN: usize = 1000;
/// RK4 substeps per recorded step.
pub const LORENZ_SUBSTEPS: usize = 10;

pub fn lorenz_rhs(p: [f64; 3]) -> [f64; 3] {
    [
        LORENZ_SIGMA * (p[1] - p[0]),
        p[0] * (LORENZ_RHO - p[2]) - p[1],
        p[0] * p[1] - LORENZ_BETA * p[2],
    ]
}

/// One classical fourth-order Runge–Kutta step.
pub fn lorenz_rk4_step(p: [f64; 3], dt: f64) -> [f64; 3] {
    let shift = |a: [f64; 3], k: [f64; 3], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]];
    let k1 = lorenz_rhs(p);
    let k2 = lorenz_rhs(shift(p, k1, dt / 2.0));
    let k3 = lorenz_rhs(shift(p, k2, dt / 2.0));
    let k4 = lorenz_rhs(shift(p, k3, dt));
    std::array::from_fn(|i| p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Advances the state by `dt` using [`LORENZ_SUBSTEPS`] RK4 steps.
pub fn lorenz_advance(p: [f64; 3], dt: f64) -> [f64; 3] {
    let h = dt / LORENZ_SUBSTEPS as f64;
    (0..LORENZ_SUBSTEPS).fold(p, |q, _| lorenz_rk4_step(q, h))
}

/// `n` states of the Lorenz system spaced `dt` apart, after `burn_in`
/// discarded steps; the first recorded point is the state after the
/// burn-in.
pub fn gen_lorenz(n: usize, dt: f64, x0: [f64; 3], burn_in: usize) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::invalid("lorenz trajectory needs n >= 1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("step size must be positive, got {dt}")));
    }
    let mut p = x0;
    for _ in 0..burn_in {
        p = lorenz_advance(p, dt);
    }
    let mut points = DMatrix::zeros(n, 3);
    for j in 0..n {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("lorenz trajectory diverged at step {j}")));
        }
        for c in 0..3 {
            points[(j, c)] = p[c];
        }
        p = lorenz_advance(p, dt);
    }
    PointSet::new(points, None)
}

fn gaussian_sample<R: Rng + ?Sized>(n: usize, d: usize, var: f64, rng: &mut R) -> DMatrix<f64> {
    let sd = var.sqrt();
    DMatrix::from_fn(n, d, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    })
}

/// Samples of size `n` from `N(0, var1·I_d)` and `N(0, var2·I_d)`.
pub fn gen_gaussian_pair<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    var1: f64,
    var2: f64,
    rng: &mut R,
) -> Result<(PointSet, PointSet)> {
    for v in [var1, var2] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("variance must be positive, got {v}")));
        }
    }
    if n == 0 || d == 0 {
        return Err(Error::invalid("gaussian samples need n >= 1 and d >= 1"));
    }
    let x = gaussian_sample(n, d, var1, rng);
    let y = gaussian_sample(n, d, var2, rng);
    Ok((PointSet::new(x, None)?, PointSet::new(y, None)?))
}

/// Friedman's first regression benchmark: `x ~ U[0,1]^d` (`d ≥ 5`, only
/// the first five coordinates matter) and
/// `y = 10 sin(π x₁x₂) + 20(x₃ − ½)² + 10x₄ + 5x₅ + ε` with `ε ~ N(0, noise²)`.
pub fn gen_friedman<R: Rng + ?Sized>(n: usize, d: usize, noise: f64, rng: &mut R) -> Result<PointSet> {
    if n == 0 || d < 5 {
        return Err(Error::invalid("friedman data needs n >= 1 and d >= 5"));
    }
    let noise = Normal::new(0.0, noise).map_err(|e| Error::invalid(e.to_string()))?;
    let points = DMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
    let labels = DVector::from_fn(n, |j, _| {
        let x = |c: usize| points[(j, c)];
        10.0 * (PI * x(0) * x(1)).sin() + 20.0 * (x(2) - 0.5).powi(2) + 10.0 * x(3) + 5.0 * x(4) + noise.sample(rng)
    });
    PointSet::new(points, Some(labels))
}

/// Per-column `(x − min)/(max − min)`; constant columns become 0. Labels are
/// left alone.
pub fn minmax_scale(set: &PointSet) -> PointSet {
    let mut points = set.points.clone();
    for mut col in points.column_iter_mut() {
        let (lo, hi) = (col.min(), col.max());
        let range = hi - lo;
        if range > 0.0 {
            col.apply(|v| *v = ((*v - lo) / range).clamp(0.0, 1.0));
        } else {
            col.fill(0.0);
        }
    }
    PointSet {
        points,
        labels: set.labels.clone(),
    }
}

/// Reads a numeric CSV file. With `label_last` the final column becomes the
/// labels.
pub fn load_csv(path: &Path, has_header: bool, label_last: bool) -> Result<PointSet> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", width.unwrap(), record.len())));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value: {field:?}")));
            }
            values.push(v);
        }
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::invalid(format!("{}: no data rows", path.display())))?;
    let all = DMatrix::from_row_slice(rows, width, &values);
    if label_last {
        if width < 2 {
            return Err(Error::invalid("label column requested but file has one column"));
        }
        let labels = all.column(width - 1).into_owned();
        PointSet::new(all.columns(0, width - 1).into_owned(), Some(labels))
    } else {
        PointSet::new(all, None)
    }
}

/// Uniform without-replacement subset of `rows` rows and `cols` columns,
/// kept in their original order.
pub fn subsample<R: Rng + ?Sized>(set: &PointSet, rows: usize, cols: usize, rng: &mut R) -> Result<PointSet> {
    if rows == 0 || rows > set.len() || cols == 0 || cols > set.dim() {
        return Err(Error::invalid(format!(
            "cannot take {rows}x{cols} from a {}x{} dataset",
            set.len(),
            set.dim()
        )));
    }
    let mut r = index::sample(rng, set.len(), rows).into_vec();
    let mut c = index::sample(rng, set.dim(), cols).into_vec();
    r.sort_unstable();
    c.sort_unstable();
    let picked = set.select_rows(&r);
    Ok(PointSet {
        points: picked.points.select_columns(&c),
        labels: picked.labels,
    })
}
