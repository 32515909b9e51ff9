//! Summed-area tables over 8-bit images.

use crate::imageio::{GrayImage, Rect};

/// Plain and squared summed-area tables, each `(width + 1) x (height + 1)`.
///
/// Entry `(x, y)` holds the sum over all pixels strictly above and to the left
/// of `(x, y)`, so row 0 and column 0 are zero and any rectangle sum takes four
/// lookups. 64-bit entries cannot overflow for images up to 4096x4096
/// (255^2 * 2^24 < 2^40).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralImage {
    width: u32,
    height: u32,
    sum: Vec<u64>,
    sqsum: Vec<u64>,
}

pub fn integral(img: &GrayImage) -> IntegralImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let stride = w + 1;
    let mut sum = vec![0u64; stride * (h + 1)];
    let mut sqsum = vec![0u64; stride * (h + 1)];
    let data = img.data();
    for y in 0..h {
        let mut row = 0u64;
        let mut row_sq = 0u64;
        for x in 0..w {
            let v = data[y * w + x] as u64;
            row += v;
            row_sq += v * v;
            let i = (y + 1) * stride + x + 1;
            sum[i] = sum[i - stride] + row;
            sqsum[i] = sqsum[i - stride] + row_sq;
        }
    }
    IntegralImage { width: img.width(), height: img.height(), sum, sqsum }
}

impl IntegralImage {
    /// Width of the source image (the table is one wider).
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub(crate) fn stride(&self) -> usize {
        self.width as usize + 1
    }

    pub(crate) fn sums(&self) -> &[u64] {
        &self.sum
    }

    pub(crate) fn sq_sums(&self) -> &[u64] {
        &self.sqsum
    }

    /// Sum of pixels with column `< x` and row `< y`.
    pub fn sum_at(&self, x: u32, y: u32) -> u64 {
        self.sum[y as usize * self.stride() + x as usize]
    }

    pub fn sqsum_at(&self, x: u32, y: u32) -> u64 {
        self.sqsum[y as usize * self.stride() + x as usize]
    }

    fn corners(table: &[u64], stride: usize, r: Rect) -> u64 {
        let a = r.y as usize * stride + r.x as usize;
        let b = a + r.w as usize;
        let c = a + r.h as usize * stride;
        let d = c + r.w as usize;
        (table[d] + table[a]) - (table[b] + table[c])
    }

    /// Sum of pixel values inside `r`.
    ///
    /// # Panics
    ///
    /// Panics if `r` extends beyond the image.
    pub fn rect_sum(&self, r: Rect) -> u64 {
        assert!(self.contains(r), "rect {r} outside {}x{} image", self.width, self.height);
        Self::corners(&self.sum, self.stride(), r)
    }

    /// Sum of squared pixel values inside `r`.
    ///
    /// # Panics
    ///
    /// Panics if `r` extends beyond the image.
    pub fn rect_sqsum(&self, r: Rect) -> u64 {
        assert!(self.contains(r), "rect {r} outside {}x{} image", self.width, self.height);
        Self::corners(&self.sqsum, self.stride(), r)
    }

    /// Zero-area rectangles are allowed here; they sum to zero.
    fn contains(&self, r: Rect) -> bool {
        r.right() <= self.width as u64 && r.bottom() <= self.height as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_closed_form() {
        let ii = integral(&GrayImage::filled(3, 3, 1).unwrap());
        for y in 0..=3 {
            for x in 0..=3 {
                assert_eq!(ii.sum_at(x, y), (x * y) as u64);
            }
        }
    }

    #[test]
    fn single_pixel() {
        let ii = integral(&GrayImage::new(1, 1, vec![200]).unwrap());
        assert_eq!(ii.rect_sum(Rect::new(0, 0, 1, 1)), 200);
        assert_eq!(ii.rect_sqsum(Rect::new(0, 0, 1, 1)), 40_000);
    }

    #[test]
    fn largest_supported_image_does_not_overflow() {
        let img = GrayImage::filled(4096, 4096, 255).unwrap();
        let ii = integral(&img);
        let full = Rect::new(0, 0, 4096, 4096);
        assert_eq!(ii.rect_sum(full), 255 * 4096 * 4096);
        assert_eq!(ii.rect_sqsum(full), 255 * 255 * 4096 * 4096);
    }

    #[test]
    #[should_panic]
    fn out_of_bounds_rect_panics() {
        let ii = integral(&GrayImage::filled(2, 2, 1).unwrap());
        ii.rect_sum(Rect::new(1, 1, 2, 1));
    }
}
