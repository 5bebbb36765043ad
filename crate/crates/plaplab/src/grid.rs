//! Uniform Dirichlet grids on an interval or rectangle, grid fields, and
//! trapezoidal quadrature.
//!
//! Interior nodes sit at x_i = i*h, i = 1..=n with h = L/(n+1); the closed
//! node box additionally contains the boundary ring where every field is
//! pinned to exactly 0. Fields store interior values only. Quadrature is
//! composite trapezoid: every interior node carries the full cell weight
//! (h in 1d, hx*hy in 2d) and boundary nodes carry the usual half weights,
//! so the weights of the closed box sum to the domain measure exactly.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::util::fmt17;
use crate::{Error, Result};

/// Uniform tensor grid with `n` interior nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    lengths: [f64; 2],
    n: usize,
    h: [f64; 2],
    boundary_weight: f64,
}

impl Grid {
    /// Builds a grid; `dim` is 1 or 2 and `lengths` must supply one side
    /// length per dimension. Needs at least 3 interior nodes per axis.
    pub fn build(dim: usize, lengths: &[f64], n: usize) -> Result<Arc<Self>> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if lengths.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} side length(s), got {}",
                lengths.len()
            )));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!("need n >= 3 interior nodes per axis, got {n}")));
        }
        for &l in lengths {
            if !l.is_finite() || l <= 0.0 {
                return Err(Error::InvalidGrid(format!("side length must be positive and finite, got {l}")));
            }
        }
        let lx = lengths[0];
        let ly = if dim == 2 { lengths[1] } else { 0.0 };
        let hx = lx / (n + 1) as f64;
        let hy = if dim == 2 { ly / (n + 1) as f64 } else { 0.0 };
        let boundary_weight = match dim {
            1 => hx, // two end nodes, h/2 each
            _ => {
                // Ring of the closed (n+2)^2 box: 4 corners at hx*hy/4 and
                // 2n edge nodes per side at half weight.
                let corners = hx * hy;
                let edges_x = n as f64 * hx * (hy * 0.5) * 2.0;
                let edges_y = n as f64 * hy * (hx * 0.5) * 2.0;
                corners + edges_x + edges_y
            }
        };
        Ok(Arc::new(Grid { dim, lengths: [lx, ly], n, h: [hx, hy], boundary_weight }))
    }

    /// 1d grid on (0, length).
    pub fn line(length: f64, n: usize) -> Result<Arc<Self>> {
        Self::build(1, &[length], n)
    }

    /// 2d grid on (0, lx) x (0, ly) with the same interior count per axis.
    pub fn rectangle(lx: f64, ly: f64, n: usize) -> Result<Arc<Self>> {
        Self::build(2, &[lx, ly], n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len_x(&self) -> f64 {
        self.lengths[0]
    }

    /// Side length along y; only meaningful in 2d.
    pub fn len_y(&self) -> f64 {
        self.lengths[1]
    }

    pub fn hx(&self) -> f64 {
        self.h[0]
    }

    pub fn hy(&self) -> f64 {
        self.h[1]
    }

    /// Smallest spacing over the axes; the diffusive step cap uses this.
    pub fn h_min(&self) -> f64 {
        if self.dim == 1 {
            self.h[0]
        } else {
            self.h[0].min(self.h[1])
        }
    }

    /// Domain measure |Omega|.
    pub fn measure(&self) -> f64 {
        if self.dim == 1 {
            self.lengths[0]
        } else {
            self.lengths[0] * self.lengths[1]
        }
    }

    /// Number of interior nodes in total.
    pub fn interior_count(&self) -> usize {
        if self.dim == 1 {
            self.n
        } else {
            self.n * self.n
        }
    }

    /// Quadrature weight of one interior node (uniform).
    pub fn interior_weight(&self) -> f64 {
        if self.dim == 1 {
            self.h[0]
        } else {
            self.h[0] * self.h[1]
        }
    }

    /// Total trapezoid weight of the boundary ring.
    pub fn boundary_weight_total(&self) -> f64 {
        self.boundary_weight
    }

    /// Sums all trapezoid weights of the closed node box by explicit loop;
    /// must equal `measure()` up to roundoff.
    pub fn weight_sum(&self) -> f64 {
        let axis_w = |h: f64, i: usize| if i == 0 || i == self.n + 1 { 0.5 * h } else { h };
        match self.dim {
            1 => (0..=self.n + 1).map(|i| axis_w(self.h[0], i)).sum(),
            _ => {
                let mut s = 0.0;
                for j in 0..=self.n + 1 {
                    let wy = axis_w(self.h[1], j);
                    for i in 0..=self.n + 1 {
                        s += axis_w(self.h[0], i) * wy;
                    }
                }
                s
            }
        }
    }

    /// Coordinates of a closed-box node (i, j), with j = 0 in 1d.
    pub fn pos(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.h[0], if self.dim == 2 { j as f64 * self.h[1] } else { 0.0 })
    }

    /// Flat index of interior node (i, j), both in 1..=n; x runs fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i >= 1 && i <= self.n);
        if self.dim == 1 {
            i - 1
        } else {
            debug_assert!(j >= 1 && j <= self.n);
            (j - 1) * self.n + (i - 1)
        }
    }
}

/// Scalar field sampled at the interior nodes of a grid; the boundary value
/// is identically zero. `blown_up` marks a field that left finite range
/// during time stepping.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
    blown_up: bool,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Field { grid: grid.clone(), values: vec![0.0; grid.interior_count()], blown_up: false }
    }

    /// Wraps interior values; rejects wrong length or non-finite entries.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.interior_count() {
            return Err(Error::InvalidGrid(format!(
                "value count {} does not match interior count {}",
                values.len(),
                grid.interior_count()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("field values must be finite".into()));
        }
        Ok(Field { grid: grid.clone(), values, blown_up: false })
    }

    /// Internal constructor for operator outputs; caller checks finiteness.
    pub(crate) fn from_values_unchecked(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.interior_count());
        Field { grid: grid.clone(), values, blown_up: false }
    }

    /// Samples a profile at the interior nodes; in 1d the closure receives
    /// y = 0.
    pub fn from_profile(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.interior_count());
        if grid.dim() == 1 {
            for i in 1..=n {
                let (x, _) = grid.pos(i, 0);
                values.push(f(x, 0.0));
            }
        } else {
            for j in 1..=n {
                for i in 1..=n {
                    let (x, y) = grid.pos(i, j);
                    values.push(f(x, y));
                }
            }
        }
        Field { grid: grid.clone(), values, blown_up: false }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at closed-box coords (i, j); boundary nodes read exactly 0.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.n();
        assert!(i <= n + 1, "x index {i} outside closed box");
        if self.grid.dim() == 1 {
            debug_assert_eq!(j, 0);
            if i == 0 || i == n + 1 {
                0.0
            } else {
                self.values[i - 1]
            }
        } else {
            assert!(j <= n + 1, "y index {j} outside closed box");
            if i == 0 || i == n + 1 || j == 0 || j == n + 1 {
                0.0
            } else {
                self.values[self.grid.index(i, j)]
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn blown_up(&self) -> bool {
        self.blown_up
    }

    pub(crate) fn mark_blown_up(&mut self) {
        self.blown_up = true;
    }

    pub fn scaled(&self, c: f64) -> Self {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            blown_up: self.blown_up,
        }
    }

    /// Max of |u| over the nodes (the boundary contributes 0).
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Trapezoid quadrature of |u|^k, k > 0. Boundary terms vanish exactly.
    pub fn integrate_power(&self, k: f64) -> f64 {
        assert!(k > 0.0 && k.is_finite(), "exponent must be positive, got {k}");
        let w = self.grid.interior_weight();
        let s: f64 = if k == 2.0 {
            self.values.iter().map(|v| v * v).sum()
        } else if k == 1.0 {
            self.values.iter().map(|v| v.abs()).sum()
        } else {
            self.values.iter().map(|v| v.abs().powf(k)).sum()
        };
        w * s
    }

    /// Trapezoid quadrature of g(u), including the boundary contribution
    /// g(0) * (boundary weight). Non-finite g output is an error.
    pub fn integrate_composed(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        let g0 = g(0.0);
        if !g0.is_finite() {
            return Err(Error::NonFinite("integrand not finite at the boundary value 0".into()));
        }
        let mut s = 0.0;
        for &v in &self.values {
            let gv = g(v);
            if !gv.is_finite() {
                return Err(Error::NonFinite(format!("integrand not finite at u = {v:e}")));
            }
            s += gv;
        }
        Ok(self.grid.interior_weight() * s + g0 * self.grid.boundary_weight_total())
    }

    /// Writes `# grid dim=<d> L=<..> n=<..>` then one `x[,y],u` row per
    /// interior node, floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let g = &self.grid;
        let lstr = if g.dim() == 1 {
            format!("{}", g.len_x())
        } else {
            format!("{}x{}", g.len_x(), g.len_y())
        };
        writeln!(w, "# grid dim={} L={} n={}", g.dim(), lstr, g.n())?;
        let n = g.n();
        if g.dim() == 1 {
            for i in 1..=n {
                let (x, _) = g.pos(i, 0);
                writeln!(w, "{},{}", fmt17(x), fmt17(self.values[i - 1]))?;
            }
        } else {
            for j in 1..=n {
                for i in 1..=n {
                    let (x, y) = g.pos(i, j);
                    writeln!(w, "{},{},{}", fmt17(x), fmt17(y), fmt17(self.values[g.index(i, j)]))?;
                }
            }
        }
        Ok(())
    }

    /// Writes the CSV form to a file path.
    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut w)
    }

    /// Reads the CSV form from a file path.
    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        Self::read_csv(&mut r)
    }

    /// Reads the format produced by `write_csv`.
    pub fn read_csv<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let header = header.trim();
        let rest = header
            .strip_prefix("# grid ")
            .ok_or_else(|| Error::Config(format!("bad field header: {header:?}")))?;
        let mut dim = None;
        let mut lstr = None;
        let mut n = None;
        for tok in rest.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad header token {tok:?}")))?;
            match k {
                "dim" => dim = Some(v.parse::<usize>().map_err(|e| Error::Config(e.to_string()))?),
                "L" => lstr = Some(v.to_string()),
                "n" => n = Some(v.parse::<usize>().map_err(|e| Error::Config(e.to_string()))?),
                _ => return Err(Error::Config(format!("unknown header key {k:?}"))),
            }
        }
        let (dim, lstr, n) = match (dim, lstr, n) {
            (Some(d), Some(l), Some(n)) => (d, l, n),
            _ => return Err(Error::Config("field header must carry dim, L and n".into())),
        };
        let lengths: Vec<f64> = lstr
            .split('x')
            .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("bad length {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        let grid = Grid::build(dim, &lengths, n)?;
        let mut values = vec![0.0; grid.interior_count()];
        let mut count = 0usize;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != dim + 1 {
                return Err(Error::Config(format!("expected {} columns, got {}", dim + 1, cols.len())));
            }
            let u: f64 = cols[dim]
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("bad value {:?}: {e}", cols[dim])))?;
            if count >= values.len() {
                return Err(Error::Config("more rows than interior nodes".into()));
            }
            values[count] = u;
            count += 1;
        }
        if count != values.len() {
            return Err(Error::Config(format!(
                "expected {} rows, got {count}",
                values.len()
            )));
        }
        Field::from_values(&grid, values)
    }
}
