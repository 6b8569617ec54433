//! Geometric complexity of a two-class boundary: maximum Fisher discriminant
//! ratio, minimum-spanning-tree boundary fraction and nearest-neighbour distance
//! ratio. All distances are Euclidean.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{mean, sample_variance, Scalar};
use crate::sem::Dataset;

/// `n` points in `d` dimensions with binary labels; both classes nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointSet<T> {
    coords: Vec<T>,
    labels: Vec<bool>,
    dim: usize,
}

impl<T: Scalar> LabeledPointSet<T> {
    pub fn new(points: &[Vec<T>], labels: &[bool]) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::LengthMismatch { left: points.len(), right: labels.len() });
        }
        let dim = points.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidInput("points need at least one coordinate".into()));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("points differ in dimension".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            return Err(Error::SingleClass);
        }
        Ok(LabeledPointSet { coords: points.concat(), labels: labels.to_vec(), dim })
    }

    /// Points from feature columns, labelled by a 0/1 column.
    pub fn from_dataset(data: &Dataset<T>, features: &[String], label: &str) -> Result<Self> {
        let cols: Vec<&[T]> = features.iter().map(|f| data.column(f)).collect::<Result<_>>()?;
        let labels: Vec<bool> = data
            .column(label)?
            .iter()
            .map(|&v| match v {
                v if v == T::one() => Ok(true),
                v if v == T::zero() => Ok(false),
                v => Err(Error::InvalidInput(format!("label {v} is not 0 or 1"))),
            })
            .collect::<Result<_>>()?;
        let points: Vec<Vec<T>> = (0..data.n_rows()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        Self::new(&points, &labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    fn feature(&self, j: usize, class: bool) -> Vec<T> {
        (0..self.len()).filter(|&i| self.labels[i] == class).map(|i| self.point(i)[j]).collect()
    }

    fn class_size(&self, class: bool) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    /// Copy with every feature centred and scaled to unit sample variance
    /// (constant features are only centred).
    pub fn standardized(&self) -> Self {
        let mut out = self.clone();
        for j in 0..self.dim {
            let col: Vec<T> = (0..self.len()).map(|i| self.point(i)[j]).collect();
            let (m, s) = (mean(&col), sample_variance(&col).sqrt());
            let s = if s > T::zero() { s } else { T::one() };
            for (i, &v) in col.iter().enumerate() {
                out.coords[i * self.dim + j] = (v - m) / s;
            }
        }
        out
    }

    fn squared_distance(&self, a: usize, b: usize) -> T {
        self.point(a).iter().zip(self.point(b)).map(|(&x, &y)| (x - y) * (x - y)).sum()
    }
}

/// Largest per-feature `(mu1 - mu2)^2 / (s1^2 + s2^2)`, with `n - 1` variances.
/// A feature with zero pooled variance and distinct means gives `+inf`; with equal
/// means it gives 0.
pub fn max_fisher_ratio<T: Scalar>(points: &LabeledPointSet<T>) -> Result<T> {
    if points.class_size(true) < 2 || points.class_size(false) < 2 {
        return Err(Error::InvalidInput("each class needs two points for a variance".into()));
    }
    let mut best = T::zero();
    for j in 0..points.dim() {
        let (a, b) = (points.feature(j, true), points.feature(j, false));
        let gap = mean(&a) - mean(&b);
        let spread = sample_variance(&a) + sample_variance(&b);
        let ratio = if spread > T::zero() {
            gap * gap / spread
        } else if gap != T::zero() {
            T::infinity()
        } else {
            T::zero()
        };
        best = best.max(ratio);
    }
    Ok(best)
}

/// Euclidean minimum spanning tree by dense Prim, as `(parent, child, length)`
/// edges in insertion order. Ties go to the lower point index.
pub fn euclidean_mst<T: Scalar>(points: &LabeledPointSet<T>) -> Result<Vec<(usize, usize, T)>> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidInput("a spanning tree needs two points".into()));
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![T::infinity(); n];
    let mut parent = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if !in_tree[v] {
                let d = points.squared_distance(current, v);
                if d < best[v] {
                    best[v] = d;
                    parent[v] = current;
                }
            }
        }
        let next = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].partial_cmp(&best[b]).expect("finite").then(a.cmp(&b)))
            .expect("vertices remain");
        in_tree[next] = true;
        edges.push((parent[next], next, best[next].sqrt()));
        current = next;
    }
    Ok(edges)
}

/// Fraction of points incident to an MST edge joining the two classes.
pub fn mst_boundary_fraction<T: Scalar>(points: &LabeledPointSet<T>) -> Result<T> {
    let mut boundary = vec![false; points.len()];
    for (a, b, _) in euclidean_mst(points)? {
        if points.label(a) != points.label(b) {
            boundary[a] = true;
            boundary[b] = true;
        }
    }
    let count = boundary.iter().filter(|&&b| b).count();
    Ok(T::of_usize(count) / T::of_usize(points.len()))
}

/// Mean distance to the nearest same-class point over mean distance to the
/// nearest other-class point.
pub fn nn_distance_ratio<T: Scalar>(points: &LabeledPointSet<T>) -> Result<T> {
    if points.class_size(true) < 2 || points.class_size(false) < 2 {
        return Err(Error::InvalidInput("each class needs two points for a nearest neighbour".into()));
    }
    let n = points.len();
    let nearest: Vec<(T, T)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (mut intra, mut inter) = (T::infinity(), T::infinity());
            for j in (0..n).filter(|&j| j != i) {
                let d = points.squared_distance(i, j);
                if points.label(i) == points.label(j) {
                    intra = intra.min(d);
                } else {
                    inter = inter.min(d);
                }
            }
            (intra.sqrt(), inter.sqrt())
        })
        .collect();
    let intra: Vec<T> = nearest.iter().map(|p| p.0).collect();
    let inter: Vec<T> = nearest.iter().map(|p| p.1).collect();
    let (a, b) = (mean(&intra), mean(&inter));
    Ok(if b == T::zero() { T::infinity() } else { a / b })
}

/// The three metrics for one feature set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityReport<T> {
    pub fisher: T,
    pub mst: T,
    pub distance_ratio: T,
    pub n: usize,
    pub d: usize,
}

impl<T: Scalar> ComplexityReport<T> {
    pub const CSV_HEADER: &'static str = "fisher,mst,distance_ratio,n,d";

    pub fn compute(points: &LabeledPointSet<T>, standardize: bool) -> Result<Self> {
        let scaled;
        let pts = if standardize {
            scaled = points.standardized();
            &scaled
        } else {
            points
        };
        Ok(ComplexityReport {
            fisher: max_fisher_ratio(pts)?,
            mst: mst_boundary_fraction(pts)?,
            distance_ratio: nn_distance_ratio(pts)?,
            n: pts.len(),
            d: pts.dim(),
        })
    }

    pub fn to_csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.fisher, self.mst, self.distance_ratio, self.n, self.d)
    }
}

impl<T: Scalar> fmt::Display for ComplexityReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv_row())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[f64], labels: &[bool]) -> LabeledPointSet<f64> {
        let pts: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        LabeledPointSet::new(&pts, labels).unwrap()
    }

    #[test]
    fn fisher_ratio_by_hand() {
        let p = set(&[0.0, 2.0, 4.0, 6.0], &[false, false, true, true]);
        assert_eq!(max_fisher_ratio(&p).unwrap(), 4.0);
        let same = set(&[0.0, 2.0, 0.0, 2.0], &[false, false, true, true]);
        assert_eq!(max_fisher_ratio(&same).unwrap(), 0.0);
        let tight = set(&[1.0, 1.0, 3.0, 3.0], &[false, false, true, true]);
        assert_eq!(max_fisher_ratio(&tight).unwrap(), f64::INFINITY);
    }

    #[test]
    fn mst_fraction_small_cases() {
        let clusters = LabeledPointSet::new(
            &[vec![0.0, 0.0], vec![0.1, 0.0], vec![10.0, 10.0], vec![10.1, 10.0]],
            &[false, false, true, true],
        )
        .unwrap();
        assert_eq!(mst_boundary_fraction(&clusters).unwrap(), 0.5);
        let chain = set(&[0.0, 1.0, 2.0, 3.0], &[false, true, false, true]);
        assert_eq!(mst_boundary_fraction(&chain).unwrap(), 1.0);
    }

    #[test]
    fn distance_ratio_by_hand() {
        let p = set(&[0.0, 1.0, 10.0, 11.0], &[false, false, true, true]);
        assert!((nn_distance_ratio(&p).unwrap() - 1.0 / 9.5).abs() < 1e-15);
        let collapsed = set(&[0.0, 0.0, 5.0, 5.0], &[false, false, true, true]);
        assert_eq!(nn_distance_ratio(&collapsed).unwrap(), 0.0);
        let lonely = set(&[0.0, 1.0, 5.0], &[false, false, true]);
        assert!(nn_distance_ratio(&lonely).is_err());
    }

    #[test]
    fn single_class_is_rejected() {
        assert!(matches!(LabeledPointSet::new(&[vec![0.0_f64], vec![1.0]], &[true, true]), Err(Error::SingleClass)));
    }

    #[test]
    fn report_row() {
        let p = set(&[0.0, 2.0, 4.0, 6.0], &[false, false, true, true]);
        let r = ComplexityReport::compute(&p, false).unwrap();
        // Same-class neighbours are all 2 apart; other-class ones are 4, 2, 2, 4.
        assert!((r.distance_ratio - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.to_csv_row(), format!("4,0.5,{},4,1", r.distance_ratio));
        let s = ComplexityReport::compute(&p, true).unwrap();
        assert!((s.fisher - 4.0).abs() < 1e-12);
    }
}
