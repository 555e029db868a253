//! The onboard workload: synthetic water-body tiles, a per-pixel sigmoid
//! segmentation model, analytic gradients, Adam, and IoU evaluation.

mod tiles;
mod train;

pub use tiles::{
    extract_bbox, generate_tile, generate_tiles, ndwi, normalize_band, normalize_bands, BBox,
    TileGenConfig, TileSample,
};
pub use train::{
    adam_step, batch_gradient, binary_iou, evaluate, forward, gradient, iou, loss_mse, AdamState,
    ModelParams, TrainerConfig, DEFAULT_WIRE_SIZE_BYTES, FEATURE_COUNT, PARAM_COUNT,
};

/// Dense row-major 2-D array.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Grid<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "grid data length mismatch");
        Grid { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape<U: Copy + Default>(&self, other: &Grid<U>) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }
}

#[cfg(test)]
mod grid_tests {
    use super::Grid;

    #[test]
    fn indexing_is_row_major() {
        let mut g: Grid<f64> = Grid::new(2, 3);
        g.set(1, 2, 7.0);
        assert_eq!(g.as_slice()[5], 7.0);
        assert_eq!(g.get(1, 2), 7.0);
    }
}
