//! Open-knot B-spline bases on uniform Cartesian grids.
//!
//! Knots are stored in physical coordinates, so the parametric-to-physical
//! map is the identity and derivatives come out directly in 1/length.
//! Evaluation returns only the local window of `p + 1` nonzero functions.

use crate::{Error, Result, Vec3};

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 3;
/// Largest number of nonzero functions per axis.
pub const MAX_SUPPORT: usize = MAX_DEGREE + 1;

/// Open uniform knot vector on `[x_min, x_max]`.
///
/// The first and last knot values are repeated `degree + 1` times; interior
/// knots are equally spaced. Degree 0 gives per-element indicator functions
/// and is used for projection onto constants.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
    n_elements: usize,
    x_min: f64,
    x_max: f64,
    h: f64,
    /// Per element, the power-series coefficients of the `p + 1` local
    /// functions in the local coordinate `t = (x - ξ_e) / h`.
    polys: Vec<[[f64; MAX_SUPPORT]; MAX_SUPPORT]>,
}

/// Nonzero basis values and first derivatives at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BasisEvaluation {
    /// Index of the first supported basis function.
    pub first_index: usize,
    /// Number of live entries, `degree + 1`.
    pub len: usize,
    pub values: [f64; MAX_SUPPORT],
    /// Derivatives with respect to the physical coordinate.
    pub derivs: [f64; MAX_SUPPORT],
}

impl BasisEvaluation {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.len]
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs[..self.len]
    }
}

/// Builds the open uniform knot vector with `n_elements` elements of degree `p`.
pub fn make_open_uniform_knots(n_elements: usize, p: usize, x_min: f64, x_max: f64) -> Result<KnotVector> {
    KnotVector::open_uniform(n_elements, p, x_min, x_max)
}

impl KnotVector {
    pub fn open_uniform(n_elements: usize, degree: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::config(
                "degree",
                format!("degree {degree} not supported (0..={MAX_DEGREE})"),
            ));
        }
        if n_elements == 0 {
            return Err(Error::config("elements", "at least one element is required"));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::config(
                "domain",
                format!("empty or invalid interval [{x_min}, {x_max}]"),
            ));
        }
        let h = (x_max - x_min) / n_elements as f64;
        let mut knots = Vec::with_capacity(n_elements + 2 * degree + 1);
        knots.extend(std::iter::repeat(x_min).take(degree));
        for e in 0..n_elements {
            knots.push(x_min + e as f64 * h);
        }
        knots.push(x_max);
        knots.extend(std::iter::repeat(x_max).take(degree));
        let polys = (0..n_elements)
            .map(|e| element_polynomials(&knots, e + degree, degree, h))
            .collect();
        Ok(Self {
            degree,
            knots,
            n_elements,
            x_min,
            x_max,
            h,
            polys,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_basis(&self) -> usize {
        self.n_elements + self.degree
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    /// Element size.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Element containing `x`: half-open `[ξ_e, ξ_{e+1})`, except that the
    /// right end of the domain belongs to the last element.
    #[inline]
    pub fn element_of(&self, x: f64) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::OutsideKnotSpan {
                x,
                min: self.x_min,
                max: self.x_max,
            });
        }
        let p = self.degree;
        let last = self.n_elements - 1;
        // x >= x_min here, so truncation is the floor.
        let mut e = (((x - self.x_min) / self.h) as usize).min(last);
        // The floor above can be off by one in either direction from rounding.
        while e > 0 && x < self.knots[e + p] {
            e -= 1;
        }
        while e < last && x >= self.knots[e + p + 1] {
            e += 1;
        }
        Ok(e)
    }

    /// Greville abscissa of basis function `i` (its control point location).
    pub fn greville(&self, i: usize) -> f64 {
        let p = self.degree;
        if p == 0 {
            return 0.5 * (self.knots[i] + self.knots[i + 1]);
        }
        self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64
    }

    /// Values and first derivatives of the `p + 1` basis functions that are
    /// nonzero at `x`.
    pub fn eval(&self, x: f64) -> Result<BasisEvaluation> {
        let e = self.element_of(x)?;
        Ok(self.eval_in_element(e, x))
    }

    #[inline]
    pub(crate) fn eval_in_element(&self, element: usize, x: f64) -> BasisEvaluation {
        let mut out = BasisEvaluation::default();
        self.eval_into(element, x, &mut out);
        out
    }

    #[inline]
    fn eval_into(&self, element: usize, x: f64, out: &mut BasisEvaluation) {
        match self.degree {
            0 => self.eval_n::<0>(element, x, out),
            1 => self.eval_n::<1>(element, x, out),
            2 => self.eval_n::<2>(element, x, out),
            _ => self.eval_n::<3>(element, x, out),
        }
    }

    #[inline(always)]
    fn eval_n<const P: usize>(&self, element: usize, x: f64, out: &mut BasisEvaluation) {
        out.first_index = element;
        out.len = P + 1;
        let t = (x - self.knots[element + P]) / self.h;
        let inv_h = 1.0 / self.h;
        let polys = &self.polys[element];
        for r in 0..=P {
            let c = &polys[r];
            let mut v = c[P];
            let mut d = 0.0;
            for k in (0..P).rev() {
                d = d * t + v;
                v = v * t + c[k];
            }
            out.values[r] = v;
            out.derivs[r] = d * inv_h;
        }
    }
}

fn poly_mul_linear(a: &[f64; MAX_SUPPORT], c0: f64, c1: f64) -> [f64; MAX_SUPPORT] {
    let mut out = [0.0; MAX_SUPPORT];
    for k in 0..MAX_SUPPORT {
        out[k] += c0 * a[k];
        if k + 1 < MAX_SUPPORT {
            out[k + 1] += c1 * a[k];
        }
    }
    out
}

/// Cox-de Boor recursion carried out on polynomials in `t = (x - ξ_span) / h`
/// for the `p + 1` functions nonzero on knot span `span`.
fn element_polynomials(u: &[f64], span: usize, p: usize, h: f64) -> [[f64; MAX_SUPPORT]; MAX_SUPPORT] {
    let x0 = u[span];
    // level[r] holds N_{span-k+r, k}
    let mut level = [[0.0; MAX_SUPPORT]; MAX_SUPPORT];
    level[0][0] = 1.0;
    for k in 1..=p {
        let mut next = [[0.0; MAX_SUPPORT]; MAX_SUPPORT];
        for (r, slot) in next.iter_mut().enumerate().take(k + 1) {
            let i = span + r - k;
            let mut acc = [0.0; MAX_SUPPORT];
            // (x - ξ_i)/(ξ_{i+k} - ξ_i) N_{i,k-1}
            if r >= 1 {
                let den = u[i + k] - u[i];
                if den > 0.0 {
                    let term = poly_mul_linear(&level[r - 1], (x0 - u[i]) / den, h / den);
                    acc.iter_mut().zip(term).for_each(|(a, b)| *a += b);
                }
            }
            // (ξ_{i+k+1} - x)/(ξ_{i+k+1} - ξ_{i+1}) N_{i+1,k-1}
            if r < k {
                let den = u[i + k + 1] - u[i + 1];
                if den > 0.0 {
                    let term = poly_mul_linear(&level[r], (u[i + k + 1] - x0) / den, -h / den);
                    acc.iter_mut().zip(term).for_each(|(a, b)| *a += b);
                }
            }
            *slot = acc;
        }
        level = next;
    }
    level
}

/// Calls `$body` with the const `$n` bound to the stencil support (1 to 4).
#[macro_export]
#[doc(hidden)]
macro_rules! with_support {
    ($support:expr, $n:ident => $body:expr) => {
        match $support {
            1 => {
                const $n: usize = 1;
                $body
            }
            2 => {
                const $n: usize = 2;
                $body
            }
            3 => {
                const $n: usize = 3;
                $body
            }
            _ => {
                const $n: usize = 4;
                $body
            }
        }
    };
}

/// Tensor product of three knot vectors of equal degree over an axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorBasis3D {
    axes: [KnotVector; 3],
}

/// Per-particle evaluation window on a [`TensorBasis3D`].
#[derive(Clone, Copy, Debug, Default)]
pub struct Stencil {
    pub axes: [BasisEvaluation; 3],
    base: usize,
    stride_y: usize,
    stride_z: usize,
}

impl Stencil {
    /// Visits every supported control point with its flat index, value and
    /// physical gradient, x-fastest.
    #[inline]
    pub fn for_each(&self, f: impl FnMut(usize, f64, Vec3)) {
        match self.axes[0].len {
            1 => self.for_each_n::<1>(f),
            2 => self.for_each_n::<2>(f),
            3 => self.for_each_n::<3>(f),
            _ => self.for_each_n::<4>(f),
        }
    }

    #[inline(always)]
    fn for_each_n<const N: usize>(&self, mut f: impl FnMut(usize, f64, Vec3)) {
        let [ex, ey, ez] = &self.axes;
        for c in 0..N {
            let (wz, dz) = (ez.values[c], ez.derivs[c]);
            for b in 0..N {
                let (wy, dy) = (ey.values[b], ey.derivs[b]);
                let row = self.base + b * self.stride_y + c * self.stride_z;
                let wyz = wy * wz;
                let dyz = dy * wz;
                let wdz = wy * dz;
                for a in 0..N {
                    let (wx, dx) = (ex.values[a], ex.derivs[a]);
                    f(row + a, wx * wyz, Vec3::new(dx * wyz, wx * dyz, wx * wdz));
                }
            }
        }
    }

    /// Like [`Stencil::for_each`] without gradients.
    #[inline]
    pub fn for_each_value(&self, f: impl FnMut(usize, f64)) {
        match self.axes[0].len {
            1 => self.for_each_value_n::<1>(f),
            2 => self.for_each_value_n::<2>(f),
            3 => self.for_each_value_n::<3>(f),
            _ => self.for_each_value_n::<4>(f),
        }
    }

    #[inline(always)]
    fn for_each_value_n<const N: usize>(&self, mut f: impl FnMut(usize, f64)) {
        let [ex, ey, ez] = &self.axes;
        for c in 0..N {
            let wz = ez.values[c];
            for b in 0..N {
                let wyz = ey.values[b] * wz;
                let row = self.base + b * self.stride_y + c * self.stride_z;
                for a in 0..N {
                    f(row + a, ex.values[a] * wyz);
                }
            }
        }
    }

    #[inline(always)]
    fn rows_n<const N: usize>(&self, mut f: impl FnMut(usize, f64, f64, f64)) {
        let [_, ey, ez] = &self.axes;
        for c in 0..N {
            let (wz, dz) = (ez.values[c], ez.derivs[c]);
            for b in 0..N {
                let (wy, dy) = (ey.values[b], ey.derivs[b]);
                let start = self.base + b * self.stride_y + c * self.stride_z;
                f(start, wy * wz, dy * wz, wy * dz);
            }
        }
    }

    /// Calls `f` with the entry of `data` at every supported control point,
    /// its basis value and gradient. Equivalent to [`Stencil::for_each`]
    /// with `&mut data[i]`, but checks bounds once per row.
    #[inline]
    pub fn scatter_into<T>(&self, data: &mut [T], f: impl FnMut(&mut T, f64, Vec3)) {
        match self.axes[0].len {
            1 => self.scatter_into_n::<T, 1>(data, f),
            2 => self.scatter_into_n::<T, 2>(data, f),
            3 => self.scatter_into_n::<T, 3>(data, f),
            _ => self.scatter_into_n::<T, 4>(data, f),
        }
    }

    #[inline(always)]
    fn scatter_into_n<T, const N: usize>(&self, data: &mut [T], mut f: impl FnMut(&mut T, f64, Vec3)) {
        let (wx, dx) = (&self.axes[0].values, &self.axes[0].derivs);
        self.rows_n::<N>(|start, wyz, dyz, wdz| {
            let row = &mut data[start..start + N];
            for a in 0..N {
                f(
                    &mut row[a],
                    wx[a] * wyz,
                    Vec3::new(dx[a] * wyz, wx[a] * dyz, wx[a] * wdz),
                );
            }
        });
    }

    /// Value-only variant of [`Stencil::scatter_into`].
    #[inline]
    pub fn scatter_values_into<T>(&self, data: &mut [T], f: impl FnMut(&mut T, f64)) {
        match self.axes[0].len {
            1 => self.scatter_values_into_n::<T, 1>(data, f),
            2 => self.scatter_values_into_n::<T, 2>(data, f),
            3 => self.scatter_values_into_n::<T, 3>(data, f),
            _ => self.scatter_values_into_n::<T, 4>(data, f),
        }
    }

    #[inline(always)]
    fn scatter_values_into_n<T, const N: usize>(&self, data: &mut [T], mut f: impl FnMut(&mut T, f64)) {
        let wx = &self.axes[0].values;
        self.rows_n::<N>(|start, wyz, _, _| {
            let row = &mut data[start..start + N];
            for a in 0..N {
                f(&mut row[a], wx[a] * wyz);
            }
        });
    }

    /// Read-only counterpart of [`Stencil::scatter_into`].
    #[inline]
    pub fn gather_from<T>(&self, data: &[T], f: impl FnMut(&T, f64, Vec3)) {
        match self.axes[0].len {
            1 => self.gather_from_n::<T, 1>(data, f),
            2 => self.gather_from_n::<T, 2>(data, f),
            3 => self.gather_from_n::<T, 3>(data, f),
            _ => self.gather_from_n::<T, 4>(data, f),
        }
    }

    #[inline(always)]
    fn gather_from_n<T, const N: usize>(&self, data: &[T], mut f: impl FnMut(&T, f64, Vec3)) {
        let (wx, dx) = (&self.axes[0].values, &self.axes[0].derivs);
        self.rows_n::<N>(|start, wyz, dyz, wdz| {
            let row = &data[start..start + N];
            for a in 0..N {
                f(&row[a], wx[a] * wyz, Vec3::new(dx[a] * wyz, wx[a] * dyz, wx[a] * wdz));
            }
        });
    }

    /// Value-only variant of [`Stencil::gather_from`].
    #[inline]
    pub fn gather_values_from<T>(&self, data: &[T], f: impl FnMut(&T, f64)) {
        match self.axes[0].len {
            1 => self.gather_values_from_n::<T, 1>(data, f),
            2 => self.gather_values_from_n::<T, 2>(data, f),
            3 => self.gather_values_from_n::<T, 3>(data, f),
            _ => self.gather_values_from_n::<T, 4>(data, f),
        }
    }

    #[inline(always)]
    fn gather_values_from_n<T, const N: usize>(&self, data: &[T], mut f: impl FnMut(&T, f64)) {
        let wx = &self.axes[0].values;
        self.rows_n::<N>(|start, wyz, _, _| {
            let row = &data[start..start + N];
            for a in 0..N {
                f(&row[a], wx[a] * wyz);
            }
        });
    }

    /// Basis functions per axis, `p + 1`.
    #[inline]
    pub fn support(&self) -> usize {
        self.axes[0].len
    }

    /// Row-wise traversal for kernels that factor the x direction out:
    /// `f(start, wyz, dyz, wdz)` for every x-row of `N` control points
    /// starting at flat index `start`, where `wyz = N_y N_z`,
    /// `dyz = N_y' N_z` and `wdz = N_y N_z'`. `N` must equal
    /// [`Stencil::support`].
    #[inline(always)]
    pub fn for_each_row<const N: usize>(&self, f: impl FnMut(usize, f64, f64, f64)) {
        debug_assert_eq!(N, self.support());
        self.rows_n::<N>(f)
    }

    /// Number of supported control points, `(p + 1)^3`.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|e| e.len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TensorBasis3D {
    pub fn new(min: [f64; 3], max: [f64; 3], elements: [usize; 3], degree: usize) -> Result<Self> {
        let axis = |k: usize| KnotVector::open_uniform(elements[k], degree, min[k], max[k]);
        Ok(Self {
            axes: [axis(0)?, axis(1)?, axis(2)?],
        })
    }

    /// Same element partition, different degree.
    pub fn with_degree(&self, degree: usize) -> Result<Self> {
        Self::new(self.min(), self.max(), self.elements(), degree)
    }

    pub fn axis(&self, k: usize) -> &KnotVector {
        &self.axes[k]
    }

    pub fn degree(&self) -> usize {
        self.axes[0].degree()
    }

    pub fn min(&self) -> [f64; 3] {
        [self.axes[0].x_min(), self.axes[1].x_min(), self.axes[2].x_min()]
    }

    pub fn max(&self) -> [f64; 3] {
        [self.axes[0].x_max(), self.axes[1].x_max(), self.axes[2].x_max()]
    }

    pub fn elements(&self) -> [usize; 3] {
        [
            self.axes[0].n_elements(),
            self.axes[1].n_elements(),
            self.axes[2].n_elements(),
        ]
    }

    pub fn cell_size(&self) -> [f64; 3] {
        [self.axes[0].h(), self.axes[1].h(), self.axes[2].h()]
    }

    pub fn n_basis(&self) -> [usize; 3] {
        [self.axes[0].n_basis(), self.axes[1].n_basis(), self.axes[2].n_basis()]
    }

    pub fn n_control_points(&self) -> usize {
        self.n_basis().iter().product()
    }

    /// Flat x-fastest index of control point `(i, j, k)`.
    #[inline]
    pub fn flat_index(&self, ijk: [usize; 3]) -> usize {
        let [nx, ny, _] = self.n_basis();
        ijk[0] + nx * (ijk[1] + ny * ijk[2])
    }

    pub fn unflatten(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.n_basis();
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn control_point(&self, ijk: [usize; 3]) -> Vec3 {
        Vec3::new(
            self.axes[0].greville(ijk[0]),
            self.axes[1].greville(ijk[1]),
            self.axes[2].greville(ijk[2]),
        )
    }

    pub fn contains(&self, x: &Vec3) -> bool {
        (0..3).all(|k| self.axes[k].contains(x[k]))
    }

    /// Element containing `x` per axis.
    pub fn cell_of(&self, x: &Vec3) -> Result<[usize; 3]> {
        let mut cell = [0; 3];
        for k in 0..3 {
            cell[k] = self.axes[k].element_of(x[k]).map_err(|_| Error::OutOfDomain {
                point: [x[0], x[1], x[2]],
            })?;
        }
        Ok(cell)
    }

    pub fn stencil(&self, x: &Vec3) -> Result<Stencil> {
        let mut st = Stencil::default();
        self.stencil_into(x, &mut st)?;
        Ok(st)
    }

    /// Evaluates the stencil at `x` into `out`, reusing its storage.
    #[inline]
    pub fn stencil_into(&self, x: &Vec3, out: &mut Stencil) -> Result<()> {
        let mut first = [0; 3];
        for k in 0..3 {
            let axis = &self.axes[k];
            let e = axis.element_of(x[k]).map_err(|_| Error::OutOfDomain {
                point: [x[0], x[1], x[2]],
            })?;
            axis.eval_into(e, x[k], &mut out.axes[k]);
            first[k] = e;
        }
        let nx = self.axes[0].n_basis();
        let ny = self.axes[1].n_basis();
        out.base = first[0] + nx * (first[1] + ny * first[2]);
        out.stride_y = nx;
        out.stride_z = nx * ny;
        Ok(())
    }

    /// Refreshes `out` to the stencils at `positions`; entries whose position
    /// equals the one in `cached` are kept. On failure returns the index of
    /// the offending point.
    pub fn update_stencils<'a>(
        &self,
        positions: impl ExactSizeIterator<Item = &'a Vec3>,
        cached: &mut Vec<Vec3>,
        out: &mut Vec<Stencil>,
    ) -> std::result::Result<(), (usize, Error)> {
        let n = positions.len();
        if out.len() != n || cached.len() != n {
            out.clear();
            out.resize(n, Stencil::default());
            cached.clear();
            cached.resize(n, Vec3::repeat(f64::NAN));
        }
        for (k, ((x, st), c)) in positions.zip(out.iter_mut()).zip(cached.iter_mut()).enumerate() {
            if x != c {
                self.stencil_into(x, st).map_err(|e| (k, e))?;
                *c = *x;
            }
        }
        Ok(())
    }
}

/// Supported control-point indices, values and physical gradients at `x`.
pub fn eval_basis_3d(tb: &TensorBasis3D, x: &Vec3) -> Result<(Vec<usize>, Vec<f64>, Vec<Vec3>)> {
    let st = tb.stencil(x)?;
    let n = st.len();
    let (mut idx, mut val, mut grad) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    st.for_each(|i, w, g| {
        idx.push(i);
        val.push(w);
        grad.push(g);
    });
    Ok((idx, val, grad))
}

/// Evaluates the 1D basis at `x`.
pub fn eval_basis_1d(kv: &KnotVector, x: f64) -> Result<BasisEvaluation> {
    kv.eval(x)
}
