// Index loops mirror the matrix algebra they implement.
#![allow(clippy::needless_range_loop)]

//! Exact rational intersection theory on a Kähler surface.
//!
//! A surface is declared by its rational `(1,1)` lattice: a symmetric pairing
//! matrix of signature `(1, rank−1)`, the canonical class, a finite list of
//! irreducible curve classes, and a reference Kähler class. Positivity of a
//! class is tested against the declared curves (the ambient cone test needs
//! every irreducible curve, which no finite engine can enumerate, so the
//! geometry carries an explicit `curve_list_sufficient` assertion and every
//! Kählerness verdict is relative to it).
//!
//! All arithmetic is exact; there is no floating point in this module.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{format_rational, parse_rational, Rational};

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("coordinate length {got} does not match lattice rank {rank}")]
    DimensionMismatch { rank: usize, got: usize },
    #[error("pairing matrix is not symmetric (entries ({i},{j}) vs ({j},{i}))")]
    NotSymmetric { i: usize, j: usize },
    #[error("pairing matrix is degenerate")]
    Degenerate,
    #[error("pairing matrix has signature ({pos},{neg}), expected (1,{expected_neg})")]
    WrongSignature {
        pos: usize,
        neg: usize,
        expected_neg: usize,
    },
    #[error("class is not in the declared curve list, cannot certify it as a curve")]
    NotInCurveList,
    #[error("curve list is not asserted sufficient; refusing a Kähler cone verdict")]
    CurveListNotSufficient,
    #[error("reference class fails the declared-cone positivity test: {0}")]
    BadReference(String),
    #[error("blow-down input `{label}` is not a (-1)-curve")]
    NotMinusOne { label: String },
    #[error("blow-down inputs `{a}` and `{b}` are not orthogonal")]
    NotDisjoint { a: String, b: String },
    #[error("class does not lie in the orthogonal complement of the contracted curves")]
    NotOrthogonal,
    #[error("geometry file: {0}")]
    File(String),
}

/// A `(1,1)`-class as exact coordinates in the declared lattice basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalClass {
    coords: Vec<Rational>,
}

impl RationalClass {
    pub fn new(coords: Vec<Rational>) -> Self {
        RationalClass { coords }
    }

    pub fn from_i64(coords: &[i64]) -> Self {
        RationalClass {
            coords: coords
                .iter()
                .map(|&c| Rational::from_integer(c.into()))
                .collect(),
        }
    }

    pub fn zero(rank: usize) -> Self {
        RationalClass {
            coords: vec![Rational::zero(); rank],
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Rational] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(Zero::is_zero)
    }

    pub fn add(&self, other: &RationalClass) -> RationalClass {
        assert_eq!(self.len(), other.len());
        RationalClass {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &RationalClass) -> RationalClass {
        assert_eq!(self.len(), other.len());
        RationalClass {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: &Rational) -> RationalClass {
        RationalClass {
            coords: self.coords.iter().map(|c| c * s).collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(crate::rational::to_f64).collect()
    }
}

impl fmt::Display for RationalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (k, c) in self.coords.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", format_rational(c))?;
        }
        write!(f, ")")
    }
}

/// A labelled irreducible curve class.
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub class: RationalClass,
}

/// The declared lattice data of a Kähler surface.
///
/// Constructed through [`SurfaceGeometry::new`], which checks symmetry and
/// the index-theorem signature `(1, rank−1)` and validates the reference
/// class, so a value of this type is always a lattice the engines can trust.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    rank: usize,
    pairing: Vec<Vec<Rational>>,
    canonical: RationalClass,
    curves: Vec<Curve>,
    reference_kahler: RationalClass,
    curve_list_sufficient: bool,
}

impl SurfaceGeometry {
    pub fn new(
        pairing: Vec<Vec<Rational>>,
        canonical: RationalClass,
        curves: Vec<Curve>,
        reference_kahler: RationalClass,
        curve_list_sufficient: bool,
    ) -> Result<Self, LatticeError> {
        let rank = pairing.len();
        for (i, row) in pairing.iter().enumerate() {
            if row.len() != rank {
                return Err(LatticeError::DimensionMismatch {
                    rank,
                    got: row.len(),
                });
            }
            for j in 0..i {
                if pairing[i][j] != pairing[j][i] {
                    return Err(LatticeError::NotSymmetric { i, j });
                }
            }
        }
        let geom = SurfaceGeometry {
            rank,
            pairing,
            canonical,
            curves,
            reference_kahler,
            curve_list_sufficient,
        };
        geom.check_len(&geom.canonical)?;
        geom.check_len(&geom.reference_kahler)?;
        for c in &geom.curves {
            geom.check_len(&c.class)?;
        }
        let (pos, neg) = geom.hodge_signature()?;
        if pos != 1 || neg != rank - 1 {
            return Err(LatticeError::WrongSignature {
                pos,
                neg,
                expected_neg: rank - 1,
            });
        }
        // The reference must itself pass the declared-cone test it anchors.
        let r = &geom.reference_kahler;
        if !geom.pair(r, r).is_positive() {
            return Err(LatticeError::BadReference("reference^2 <= 0".into()));
        }
        for c in &geom.curves {
            if !geom.pair(r, &c.class).is_positive() {
                return Err(LatticeError::BadReference(format!(
                    "reference . {} <= 0",
                    c.label
                )));
            }
        }
        Ok(geom)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn canonical_class(&self) -> &RationalClass {
        &self.canonical
    }

    /// First Chern class, `c1 = -K`.
    pub fn c1(&self) -> RationalClass {
        self.canonical.scale(&crate::rational::int(-1))
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn reference_kahler(&self) -> &RationalClass {
        &self.reference_kahler
    }

    pub fn curve_list_sufficient(&self) -> bool {
        self.curve_list_sufficient
    }

    fn check_len(&self, a: &RationalClass) -> Result<(), LatticeError> {
        if a.len() != self.rank {
            Err(LatticeError::DimensionMismatch {
                rank: self.rank,
                got: a.len(),
            })
        } else {
            Ok(())
        }
    }

    /// Cup product `a · b` through the declared pairing matrix.
    pub fn pair(&self, a: &RationalClass, b: &RationalClass) -> Rational {
        debug_assert_eq!(a.len(), self.rank);
        debug_assert_eq!(b.len(), self.rank);
        let mut acc = Rational::zero();
        for (i, ai) in a.coords().iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            let mut row = Rational::zero();
            for (j, bj) in b.coords().iter().enumerate() {
                if !bj.is_zero() {
                    row += &self.pairing[i][j] * bj;
                }
            }
            acc += ai * row;
        }
        acc
    }

    /// Checked variant of [`pair`](Self::pair) for caller-supplied data.
    pub fn pair_checked(
        &self,
        a: &RationalClass,
        b: &RationalClass,
    ) -> Result<Rational, LatticeError> {
        self.check_len(a)?;
        self.check_len(b)?;
        Ok(self.pair(a, b))
    }

    /// Arithmetic genus from adjunction: `1 + (K·C + C·C)/2`.
    pub fn adjunction_genus(&self, c: &RationalClass) -> Result<Rational, LatticeError> {
        self.check_len(c)?;
        let kc = self.pair(&self.canonical, c);
        let cc = self.pair(c, c);
        Ok(Rational::from_integer(1.into()) + (kc + cc) / Rational::from_integer(2.into()))
    }

    /// Certify a declared curve as exceptional of the first kind:
    /// `C·C = −1` and `K·C = −1` (equivalently genus 0 with `C² = −1`).
    ///
    /// Only classes in the declared curve list can be certified; an arbitrary
    /// class is not known to be represented by an irreducible curve.
    pub fn is_minus_one_curve(&self, c: &RationalClass) -> Result<bool, LatticeError> {
        self.check_len(c)?;
        if !self.curves.iter().any(|cv| &cv.class == c) {
            return Err(LatticeError::NotInCurveList);
        }
        let minus_one = -Rational::from_integer(1.into());
        Ok(self.pair(c, c) == minus_one && self.pair(&self.canonical, c) == minus_one)
    }

    /// Cone test against the declared data: `a² > 0`, `a·ref > 0`, and
    /// `a·C > 0` for every declared curve.
    ///
    /// Refuses when the curve list has not been asserted sufficient: without
    /// that assertion a positive verdict would claim more than the data
    /// supports.
    pub fn is_kahler(&self, a: &RationalClass) -> Result<bool, LatticeError> {
        if !self.curve_list_sufficient {
            return Err(LatticeError::CurveListNotSufficient);
        }
        self.check_len(a)?;
        if !self.pair(a, a).is_positive() {
            return Ok(false);
        }
        if !self.pair(a, &self.reference_kahler).is_positive() {
            return Ok(false);
        }
        Ok(self
            .curves
            .iter()
            .all(|c| self.pair(a, &c.class).is_positive()))
    }

    /// Signature `(positives, negatives)` of the pairing matrix, computed by
    /// exact symmetric congruence diagonalization over the rationals.
    ///
    /// Errors on a degenerate matrix.
    pub fn hodge_signature(&self) -> Result<(usize, usize), LatticeError> {
        signature(&self.pairing)
    }

    /// Contract a pairwise-orthogonal family of declared (−1)-curves.
    ///
    /// Returns the geometry of the orthogonal sublattice in the echelonized
    /// integral basis, together with the projection onto it. The new
    /// canonical class is the orthogonal projection of `K` (equal to
    /// `K − ΣE_i` in the old coordinates); surviving declared curves are
    /// pushed forward by the same projection.
    pub fn blow_down(
        &self,
        curves: &[RationalClass],
    ) -> Result<(SurfaceGeometry, BlowDownProjection), LatticeError> {
        for (idx, e) in curves.iter().enumerate() {
            if !self.is_minus_one_curve(e)? {
                let label = self.label_of(e).unwrap_or_else(|| format!("#{idx}"));
                return Err(LatticeError::NotMinusOne { label });
            }
        }
        for i in 0..curves.len() {
            for j in 0..i {
                if !self.pair(&curves[i], &curves[j]).is_zero() {
                    return Err(LatticeError::NotDisjoint {
                        a: self.label_of(&curves[i]).unwrap_or_default(),
                        b: self.label_of(&curves[j]).unwrap_or_default(),
                    });
                }
            }
        }

        // Orthogonal complement {x : (M E_i)^T x = 0}, echelonized over Q and
        // scaled to primitive integer vectors for a deterministic basis.
        let constraints: Vec<Vec<Rational>> = curves
            .iter()
            .map(|e| {
                (0..self.rank)
                    .map(|j| {
                        let mut s = Rational::zero();
                        for (i, ei) in e.coords().iter().enumerate() {
                            s += ei * &self.pairing[i][j];
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let basis = integral_kernel_basis(&constraints, self.rank);
        let new_rank = basis.len();
        debug_assert_eq!(new_rank, self.rank - curves.len());

        let projection = BlowDownProjection {
            contracted: curves.to_vec(),
            basis,
            old_pairing: self.pairing.clone(),
        };

        let mut new_pairing = vec![vec![Rational::zero(); new_rank]; new_rank];
        for i in 0..new_rank {
            for j in 0..new_rank {
                new_pairing[i][j] = self.pair(
                    &RationalClass::new(projection.basis[i].clone()),
                    &RationalClass::new(projection.basis[j].clone()),
                );
            }
        }

        let new_canonical = projection.push_forward(self, &self.canonical);
        let mut new_curves = Vec::new();
        for c in &self.curves {
            let down = projection.push_forward(self, &c.class);
            if !down.is_zero() {
                new_curves.push(Curve {
                    label: c.label.clone(),
                    class: down,
                });
            }
        }
        let new_reference = projection.push_forward(self, &self.reference_kahler);

        let geom = SurfaceGeometry::new(
            new_pairing,
            new_canonical,
            new_curves,
            new_reference,
            self.curve_list_sufficient,
        )?;
        Ok((geom, projection))
    }

    fn label_of(&self, class: &RationalClass) -> Option<String> {
        self.curves
            .iter()
            .find(|c| &c.class == class)
            .map(|c| c.label.clone())
    }

    pub fn curve_by_label(&self, label: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.label == label)
    }
}

/// Linear data of a blow-down: the contracted classes and the echelonized
/// integral basis of their orthogonal complement.
#[derive(Debug, Clone)]
pub struct BlowDownProjection {
    contracted: Vec<RationalClass>,
    /// Rows are downstairs basis vectors written in upstairs coordinates.
    basis: Vec<Vec<Rational>>,
    old_pairing: Vec<Vec<Rational>>,
}

impl BlowDownProjection {
    pub fn contracted(&self) -> &[RationalClass] {
        &self.contracted
    }

    /// Upstairs coordinates of the i-th downstairs basis vector.
    pub fn basis_vector(&self, i: usize) -> RationalClass {
        RationalClass::new(self.basis[i].clone())
    }

    /// Push a class forward: orthogonal projection onto the complement of the
    /// contracted curves, expressed in the downstairs basis. Since each
    /// contracted `E` has `E² = −1` and the family is orthogonal, the
    /// projection is `c + Σ (c·E_i) E_i`.
    pub fn push_forward(&self, upstairs: &SurfaceGeometry, c: &RationalClass) -> RationalClass {
        let mut proj = c.clone();
        for e in &self.contracted {
            let coef = upstairs.pair(c, e);
            proj = proj.add(&e.scale(&coef));
        }
        self.coords_in_basis(&proj)
            .expect("projection lies in the complement by construction")
    }

    /// Express a class already orthogonal to every contracted curve in the
    /// downstairs basis; errors if the class is not in the complement.
    pub fn map_orthogonal(
        &self,
        upstairs: &SurfaceGeometry,
        c: &RationalClass,
    ) -> Result<RationalClass, LatticeError> {
        for e in &self.contracted {
            if !upstairs.pair(c, e).is_zero() {
                return Err(LatticeError::NotOrthogonal);
            }
        }
        self.coords_in_basis(c).ok_or(LatticeError::NotOrthogonal)
    }

    /// Pull a downstairs class back to upstairs coordinates.
    pub fn pull_back(&self, down: &RationalClass) -> RationalClass {
        let rank_up = self.old_pairing.len();
        let mut coords = vec![Rational::zero(); rank_up];
        for (bi, ci) in self.basis.iter().zip(down.coords()) {
            for (k, b) in bi.iter().enumerate() {
                coords[k] += b * ci;
            }
        }
        RationalClass::new(coords)
    }

    /// Solve `Σ x_i basis_i = v` exactly; `None` if `v` is outside the span.
    fn coords_in_basis(&self, v: &RationalClass) -> Option<RationalClass> {
        let rows = self.basis.len();
        let cols = self.old_pairing.len();
        // Augmented system [basis^T | v], eliminated over Q.
        let mut a: Vec<Vec<Rational>> = (0..cols)
            .map(|r| {
                let mut row: Vec<Rational> = (0..rows).map(|c| self.basis[c][r].clone()).collect();
                row.push(v.coords()[r].clone());
                row
            })
            .collect();
        let mut pivot_row = 0usize;
        let mut pivots = Vec::new();
        for col in 0..rows {
            let Some(p) = (pivot_row..cols).find(|&r| !a[r][col].is_zero()) else {
                continue;
            };
            a.swap(pivot_row, p);
            let inv = a[pivot_row][col].clone();
            for x in a[pivot_row].iter_mut() {
                *x /= &inv;
            }
            for r in 0..cols {
                if r != pivot_row && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for cidx in 0..=rows {
                        let sub = &a[pivot_row][cidx] * &f;
                        a[r][cidx] -= sub;
                    }
                }
            }
            pivots.push((pivot_row, col));
            pivot_row += 1;
        }
        // Consistency: rows beyond the pivots must have zero rhs.
        for r in pivot_row..cols {
            if !a[r][rows].is_zero() {
                return None;
            }
        }
        let mut x = vec![Rational::zero(); rows];
        for (r, c) in pivots {
            x[c] = a[r][rows].clone();
        }
        Some(RationalClass::new(x))
    }
}

/// Signature of a symmetric rational matrix by congruence diagonalization.
fn signature(m: &[Vec<Rational>]) -> Result<(usize, usize), LatticeError> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut pos = 0usize;
    let mut neg = 0usize;
    let mut k = 0usize;
    while k < n {
        if a[k][k].is_zero() {
            // Bring a nonzero entry onto the diagonal.
            if let Some(j) = (k + 1..n).find(|&j| !a[j][j].is_zero()) {
                swap_symmetric(&mut a, k, j);
            } else if let Some((i, j)) = first_offdiag(&a, k, n) {
                // All remaining diagonal entries vanish; a[i][j] != 0.
                // Row/col addition puts 2*a[i][j] on the diagonal.
                add_symmetric(&mut a, i, j);
                if i != k {
                    swap_symmetric(&mut a, k, i);
                }
            } else {
                return Err(LatticeError::Degenerate);
            }
        }
        let d = a[k][k].clone();
        if d.is_positive() {
            pos += 1;
        } else {
            neg += 1;
        }
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = &a[i][k] / &d;
            for j in k..n {
                let sub = &f * &a[k][j];
                a[i][j] -= sub;
            }
            for j in k..n {
                let sub = &f * &a[j][k];
                a[j][i] -= sub;
            }
        }
        k += 1;
    }
    Ok((pos, neg))
}

fn swap_symmetric(a: &mut [Vec<Rational>], i: usize, j: usize) {
    a.swap(i, j);
    for row in a.iter_mut() {
        row.swap(i, j);
    }
}

/// Symmetric congruence `row_i += row_j`, `col_i += col_j`.
fn add_symmetric(a: &mut [Vec<Rational>], i: usize, j: usize) {
    let n = a.len();
    for c in 0..n {
        let add = a[j][c].clone();
        a[i][c] += add;
    }
    for r in 0..n {
        let add = a[r][j].clone();
        a[r][i] += add;
    }
}

fn first_offdiag(a: &[Vec<Rational>], k: usize, n: usize) -> Option<(usize, usize)> {
    for i in k..n {
        for j in i + 1..n {
            if !a[i][j].is_zero() {
                return Some((i, j));
            }
        }
    }
    None
}

/// Kernel of the constraint rows, echelonized and scaled to primitive
/// integer vectors; deterministic given the constraint order.
fn integral_kernel_basis(constraints: &[Vec<Rational>], rank: usize) -> Vec<Vec<Rational>> {
    let mut a: Vec<Vec<Rational>> = constraints.to_vec();
    let rows = a.len();
    let mut pivot_cols = Vec::new();
    let mut pr = 0usize;
    for col in 0..rank {
        let Some(p) = (pr..rows).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(pr, p);
        let inv = a[pr][col].clone();
        for x in a[pr].iter_mut() {
            *x /= &inv;
        }
        for r in 0..rows {
            if r != pr && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in 0..rank {
                    let sub = &a[pr][c] * &f;
                    a[r][c] -= sub;
                }
            }
        }
        pivot_cols.push(col);
        pr += 1;
        if pr == rows {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in 0..rank {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![Rational::zero(); rank];
        v[free] = Rational::from_integer(1.into());
        for (r, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -a[r][free].clone();
        }
        basis.push(primitive_integral(v));
    }
    basis
}

/// Clear denominators and divide by the content; first nonzero entry > 0.
fn primitive_integral(v: Vec<Rational>) -> Vec<Rational> {
    use num_bigint::BigInt;
    use num_integer::Integer;
    use num_traits::One;
    let mut lcm = BigInt::one();
    for x in &v {
        lcm = lcm.lcm(x.denom());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&lcm / x.denom())).collect();
    let mut gcd = BigInt::zero();
    for x in &ints {
        gcd = gcd.gcd(x);
    }
    if gcd.is_zero() {
        return v;
    }
    let mut out: Vec<BigInt> = ints.into_iter().map(|x| x / &gcd).collect();
    if let Some(first) = out.iter().find(|x| !x.is_zero()) {
        if first.is_negative() {
            for x in out.iter_mut() {
                *x = -x.clone();
            }
        }
    }
    out.into_iter().map(Rational::from_integer).collect()
}

// ---------------------------------------------------------------------------
// Geometry file format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct GeometryFile {
    rank: usize,
    /// Row-major pairing entries as `"p/q"` strings.
    pairing: Vec<String>,
    canonical: Vec<String>,
    /// Curve label to coordinate vector; serialized sorted by label.
    curves: BTreeMap<String, Vec<String>>,
    reference_kahler: Vec<String>,
    curve_list_sufficient: bool,
}

/// Parse the JSON geometry format.
pub fn geometry_from_json(text: &str) -> Result<SurfaceGeometry, LatticeError> {
    let file: GeometryFile =
        serde_json::from_str(text).map_err(|e| LatticeError::File(e.to_string()))?;
    let rank = file.rank;
    if file.pairing.len() != rank * rank {
        return Err(LatticeError::File(format!(
            "pairing has {} entries, expected {}",
            file.pairing.len(),
            rank * rank
        )));
    }
    let parse_vec = |v: &[String]| -> Result<RationalClass, LatticeError> {
        let coords = v
            .iter()
            .map(|s| parse_rational(s).map_err(|e| LatticeError::File(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(RationalClass::new(coords))
    };
    let mut pairing = vec![vec![Rational::zero(); rank]; rank];
    for (k, s) in file.pairing.iter().enumerate() {
        pairing[k / rank][k % rank] =
            parse_rational(s).map_err(|e| LatticeError::File(e.to_string()))?;
    }
    let canonical = parse_vec(&file.canonical)?;
    let reference = parse_vec(&file.reference_kahler)?;
    let mut curves = Vec::new();
    for (label, coords) in &file.curves {
        curves.push(Curve {
            label: label.clone(),
            class: parse_vec(coords)?,
        });
    }
    SurfaceGeometry::new(
        pairing,
        canonical,
        curves,
        reference,
        file.curve_list_sufficient,
    )
}

/// Serialize to the JSON geometry format.
pub fn geometry_to_json(geom: &SurfaceGeometry) -> String {
    let fmt_vec = |c: &RationalClass| -> Vec<String> {
        c.coords().iter().map(format_rational).collect()
    };
    let file = GeometryFile {
        rank: geom.rank,
        pairing: geom
            .pairing
            .iter()
            .flat_map(|row| row.iter().map(format_rational))
            .collect(),
        canonical: fmt_vec(&geom.canonical),
        curves: geom
            .curves
            .iter()
            .map(|c| (c.label.clone(), fmt_vec(&c.class)))
            .collect(),
        reference_kahler: fmt_vec(&geom.reference_kahler),
        curve_list_sufficient: geom.curve_list_sufficient,
    };
    serde_json::to_string_pretty(&file).expect("geometry serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Stock lattices used by scenarios and tests
// ---------------------------------------------------------------------------

/// The projective plane: rank 1, `H² = 1`, `K = −3H`, line `H`.
pub fn projective_plane() -> SurfaceGeometry {
    use crate::rational::int;
    SurfaceGeometry::new(
        vec![vec![int(1)]],
        RationalClass::from_i64(&[-3]),
        vec![Curve {
            label: "H".into(),
            class: RationalClass::from_i64(&[1]),
        }],
        RationalClass::from_i64(&[1]),
        true,
    )
    .expect("projective plane lattice is valid")
}

/// One-point blow-up of the plane, basis `(H, E)`, pairing `diag(1, −1)`.
///
/// Declared curves: the exceptional curve `E`, the fiber `H−E` of the ruling,
/// and a line `H` avoiding the blown-up point.
pub fn blown_up_plane() -> SurfaceGeometry {
    use crate::rational::int;
    SurfaceGeometry::new(
        vec![vec![int(1), int(0)], vec![int(0), int(-1)]],
        RationalClass::from_i64(&[-3, 1]),
        vec![
            Curve {
                label: "E".into(),
                class: RationalClass::from_i64(&[0, 1]),
            },
            Curve {
                label: "H-E".into(),
                class: RationalClass::from_i64(&[1, -1]),
            },
            Curve {
                label: "H".into(),
                class: RationalClass::from_i64(&[1, 0]),
            },
        ],
        RationalClass::from_i64(&[3, -1]),
        true,
    )
    .expect("blown-up plane lattice is valid")
}

/// Two-point blow-up of the plane, basis `(H, E1, E2)`.
pub fn two_point_blown_up_plane() -> SurfaceGeometry {
    use crate::rational::int;
    SurfaceGeometry::new(
        vec![
            vec![int(1), int(0), int(0)],
            vec![int(0), int(-1), int(0)],
            vec![int(0), int(0), int(-1)],
        ],
        RationalClass::from_i64(&[-3, 1, 1]),
        vec![
            Curve {
                label: "E1".into(),
                class: RationalClass::from_i64(&[0, 1, 0]),
            },
            Curve {
                label: "E2".into(),
                class: RationalClass::from_i64(&[0, 0, 1]),
            },
            Curve {
                label: "H-E1".into(),
                class: RationalClass::from_i64(&[1, -1, 0]),
            },
            Curve {
                label: "H-E2".into(),
                class: RationalClass::from_i64(&[1, 0, -1]),
            },
            Curve {
                label: "H-E1-E2".into(),
                class: RationalClass::from_i64(&[1, -1, -1]),
            },
        ],
        RationalClass::from_i64(&[4, -1, -1]),
        true,
    )
    .expect("two-point blow-up lattice is valid")
}

/// Rank-1 lattice with `K = 0`: the class model of a torus/K3-type surface.
pub fn trivial_canonical_model() -> SurfaceGeometry {
    use crate::rational::int;
    SurfaceGeometry::new(
        vec![vec![int(1)]],
        RationalClass::from_i64(&[0]),
        vec![],
        RationalClass::from_i64(&[1]),
        true,
    )
    .expect("trivial canonical lattice is valid")
}
