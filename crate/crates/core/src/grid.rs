//! Dense row-major grids and the validity-masked depth map built on them.

use thiserror::Error;

/// Errors raised by grid-shaped inputs.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GridError {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("grid too small: {width}x{height} (need at least {min}x{min})")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("no jointly valid pixels")]
    NoValidPixels,
}

/// Dense H×W grid stored row-major (`idx = y * width + x`).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    /// Grid of the given size with every cell set to `fill`.
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }

    /// Wraps an existing row-major buffer. Panics if the length is wrong.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(
            data.len(),
            width * height,
            "grid buffer length {} does not match {}x{}",
            data.len(),
            width,
            height
        );
        Self {
            width,
            height,
            data,
        }
    }

    /// Builds a grid by evaluating `f(x, y)` at every cell.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_size<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Error unless `other` has this grid's dimensions.
    pub fn check_same_size<U>(&self, other: &Grid<U>) -> Result<(), GridError> {
        if self.same_size(other) {
            Ok(())
        } else {
            Err(GridError::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            })
        }
    }

    pub fn get(&self, x: usize, y: usize) -> &T {
        debug_assert!(x < self.width && y < self.height);
        &self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: T) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }
}

impl<T: Copy> Grid<T> {
    /// Copied cell value.
    pub fn at(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Cell value with coordinates clamped into bounds (replicate border).
    pub fn at_clamped(&self, x: isize, y: isize) -> T {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.at(xc, yc)
    }
}

/// Dense metric depth with a per-pixel validity mask.
///
/// Valid pixels always hold finite, strictly positive depth in meters;
/// every reduction in the crate skips invalid pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub values: Grid<f64>,
    pub valid: Grid<bool>,
}

impl DepthMap {
    /// Builds a depth map, demoting non-finite or non-positive entries to
    /// invalid so the validity invariant holds by construction.
    pub fn new(values: Grid<f64>, valid: Grid<bool>) -> Self {
        assert!(values.same_size(&valid), "values/valid size mismatch");
        let mut valid = valid;
        for (v, ok) in values.data().iter().zip(valid.data_mut().iter_mut()) {
            if !(v.is_finite() && *v > 0.0) {
                *ok = false;
            }
        }
        Self { values, valid }
    }

    /// Depth map where validity is derived from the values alone.
    pub fn from_values(values: Grid<f64>) -> Self {
        let valid = Grid::new(values.width(), values.height(), true);
        Self::new(values, valid)
    }

    /// Constant depth over the full grid.
    pub fn constant(width: usize, height: usize, depth: f64) -> Self {
        Self::from_values(Grid::new(width, height, depth))
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    /// Depth at (x, y) if the pixel is valid.
    pub fn depth_at(&self, x: usize, y: usize) -> Option<f64> {
        if self.valid.at(x, y) {
            Some(self.values.at(x, y))
        } else {
            None
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.data().iter().filter(|&&v| v).count()
    }
}
