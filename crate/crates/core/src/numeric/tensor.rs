use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::real::{Precision, Real};

/// Batched real sequence with layout `[batch, time, feature]`, feature innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqTensor<T> {
    data: Vec<T>,
    batch: usize,
    time: usize,
    feature: usize,
}

impl<T: Real> SeqTensor<T> {
    pub fn zeros(batch: usize, time: usize, feature: usize) -> Self {
        Self::filled(batch, time, feature, T::zero())
    }

    pub fn filled(batch: usize, time: usize, feature: usize, value: T) -> Self {
        SeqTensor {
            data: vec![value; batch * time * feature],
            batch,
            time,
            feature,
        }
    }

    pub fn from_vec(data: Vec<T>, batch: usize, time: usize, feature: usize) -> Result<Self> {
        if data.len() != batch * time * feature {
            return Err(invalid(alloc::format!(
                "data length {} does not match shape ({batch}, {time}, {feature})",
                data.len()
            )));
        }
        Ok(SeqTensor {
            data,
            batch,
            time,
            feature,
        })
    }

    /// Single-lane tensor (batch 1, feature 1) from a time series.
    pub fn from_series(series: &[T]) -> Self {
        SeqTensor {
            data: series.to_vec(),
            batch: 1,
            time: series.len(),
            feature: 1,
        }
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.time, self.feature)
    }
    #[inline]
    pub fn batch(&self) -> usize {
        self.batch
    }
    #[inline]
    pub fn time(&self) -> usize {
        self.time
    }
    #[inline]
    pub fn feature(&self) -> usize {
        self.feature
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
    pub fn precision(&self) -> Precision {
        T::PRECISION
    }
    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, b: usize, t: usize, f: usize) -> usize {
        debug_assert!(b < self.batch && t < self.time && f < self.feature);
        (b * self.time + t) * self.feature + f
    }
    #[inline]
    pub fn get(&self, b: usize, t: usize, f: usize) -> T {
        self.data[self.index(b, t, f)]
    }
    #[inline]
    pub fn set(&mut self, b: usize, t: usize, f: usize, v: T) {
        let i = self.index(b, t, f);
        self.data[i] = v;
    }

    /// Row of features at `(b, t)`.
    #[inline]
    pub fn row(&self, b: usize, t: usize) -> &[T] {
        let start = (b * self.time + t) * self.feature;
        &self.data[start..start + self.feature]
    }
    #[inline]
    pub fn row_mut(&mut self, b: usize, t: usize) -> &mut [T] {
        let start = (b * self.time + t) * self.feature;
        &mut self.data[start..start + self.feature]
    }

    /// Gathers the time series of lane `(b, f)` into `out`.
    pub fn read_lane(&self, b: usize, f: usize, out: &mut [T]) {
        let base = b * self.time * self.feature + f;
        for (t, o) in out.iter_mut().enumerate().take(self.time) {
            *o = self.data[base + t * self.feature];
        }
    }

    pub fn lane(&self, b: usize, f: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.time];
        self.read_lane(b, f, &mut out);
        out
    }

    pub fn write_lane(&mut self, b: usize, f: usize, src: &[T]) {
        let base = b * self.time * self.feature + f;
        for (t, &v) in src.iter().enumerate().take(self.time) {
            self.data[base + t * self.feature] = v;
        }
    }

    /// Transposes into lane-major storage `[batch, feature, time]` so each
    /// lane's time series is contiguous.
    pub fn to_lanes(&self) -> Vec<T> {
        let (bn, tn, fn_) = self.shape();
        let mut out = vec![T::zero(); self.data.len()];
        for b in 0..bn {
            for t in 0..tn {
                let row = self.row(b, t);
                for (f, &v) in row.iter().enumerate() {
                    out[(b * fn_ + f) * tn + t] = v;
                }
            }
        }
        out
    }

    /// Inverse of [`SeqTensor::to_lanes`].
    pub fn from_lanes(lanes: &[T], batch: usize, time: usize, feature: usize) -> Result<Self> {
        if lanes.len() != batch * time * feature {
            return Err(invalid("lane buffer length does not match shape"));
        }
        let mut out = Self::zeros(batch, time, feature);
        for b in 0..batch {
            for f in 0..feature {
                let src = &lanes[(b * feature + f) * time..(b * feature + f + 1) * time];
                out.write_lane(b, f, src);
            }
        }
        Ok(out)
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        SeqTensor {
            data: self.data.iter().map(|&x| f(x)).collect(),
            batch: self.batch,
            time: self.time,
            feature: self.feature,
        }
    }

    pub fn cast<U: Real>(&self) -> SeqTensor<U> {
        SeqTensor {
            data: self.data.iter().map(|&x| U::lit(x.as_f64())).collect(),
            batch: self.batch,
            time: self.time,
            feature: self.feature,
        }
    }

    /// Copies samples `range` of the batch axis.
    pub fn slice_batch(&self, start: usize, end: usize) -> Self {
        let stride = self.time * self.feature;
        SeqTensor {
            data: self.data[start * stride..end * stride].to_vec(),
            batch: end - start,
            time: self.time,
            feature: self.feature,
        }
    }

    /// Stacks tensors along the batch axis.
    pub fn concat_batch(parts: &[SeqTensor<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| invalid("nothing to concatenate"))?;
        let (_, tn, fn_) = first.shape();
        let mut data = Vec::new();
        let mut batch = 0;
        for p in parts {
            if p.time != tn || p.feature != fn_ {
                return Err(invalid("time/feature mismatch in concat"));
            }
            data.extend_from_slice(&p.data);
            batch += p.batch;
        }
        Self::from_vec(data, batch, tn, fn_)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }
}

/// Complex sequence stored as separate real/imaginary planes of identical shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeq<T> {
    pub re: SeqTensor<T>,
    pub im: SeqTensor<T>,
}

impl<T: Real> ComplexSeq<T> {
    pub fn zeros(batch: usize, time: usize, feature: usize) -> Self {
        ComplexSeq {
            re: SeqTensor::zeros(batch, time, feature),
            im: SeqTensor::zeros(batch, time, feature),
        }
    }

    pub fn new(re: SeqTensor<T>, im: SeqTensor<T>) -> Result<Self> {
        if re.shape() != im.shape() {
            return Err(invalid("real and imaginary planes differ in shape"));
        }
        Ok(ComplexSeq { re, im })
    }

    /// Single-lane complex series.
    pub fn from_series(series: &[Complex<T>]) -> Self {
        let re: Vec<T> = series.iter().map(|c| c.re).collect();
        let im: Vec<T> = series.iter().map(|c| c.im).collect();
        ComplexSeq {
            re: SeqTensor::from_series(&re),
            im: SeqTensor::from_series(&im),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.re.shape()
    }

    pub fn get(&self, b: usize, t: usize, f: usize) -> Complex<T> {
        Complex::new(self.re.get(b, t, f), self.im.get(b, t, f))
    }

    pub fn set(&mut self, b: usize, t: usize, f: usize, v: Complex<T>) {
        self.re.set(b, t, f, v.re);
        self.im.set(b, t, f, v.im);
    }

    pub fn lane(&self, b: usize, f: usize) -> Vec<Complex<T>> {
        let re = self.re.lane(b, f);
        let im = self.im.lane(b, f);
        re.into_iter().zip(im).map(|(r, i)| Complex::new(r, i)).collect()
    }

    pub fn write_lane(&mut self, b: usize, f: usize, src: &[Complex<T>]) {
        let re: Vec<T> = src.iter().map(|c| c.re).collect();
        let im: Vec<T> = src.iter().map(|c| c.im).collect();
        self.re.write_lane(b, f, &re);
        self.im.write_lane(b, f, &im);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_contract_enforced() {
        assert!(SeqTensor::<f64>::from_vec(vec![0.0; 5], 1, 2, 3).is_err());
        let t = SeqTensor::<f64>::from_vec(vec![0.0; 6], 1, 2, 3).unwrap();
        assert_eq!(t.shape(), (1, 2, 3));
    }

    #[test]
    fn feature_axis_is_innermost() {
        let t = SeqTensor::<f64>::from_vec((0..12).map(|x| x as f64).collect(), 2, 3, 2).unwrap();
        assert_eq!(t.get(0, 0, 1), 1.0);
        assert_eq!(t.get(0, 1, 0), 2.0);
        assert_eq!(t.get(1, 0, 0), 6.0);
        assert_eq!(t.lane(1, 1), vec![7.0, 9.0, 11.0]);
    }

    #[test]
    fn lane_transpose_round_trip() {
        let t = SeqTensor::<f32>::from_vec((0..60).map(|x| x as f32 * 0.5).collect(), 3, 5, 4).unwrap();
        let lanes = t.to_lanes();
        assert_eq!(&lanes[0..5], &t.lane(0, 0)[..]);
        let back = SeqTensor::from_lanes(&lanes, 3, 5, 4).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn complex_planes_must_match() {
        let a = SeqTensor::<f64>::zeros(1, 2, 3);
        let b = SeqTensor::<f64>::zeros(1, 3, 2);
        assert!(ComplexSeq::new(a.clone(), b).is_err());
        assert!(ComplexSeq::new(a.clone(), a).is_ok());
    }
}
