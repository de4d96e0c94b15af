//! Small numeric helpers shared by the reductions.

/// Neumaier-compensated accumulator.
///
/// Results are insensitive to summation order up to a few ulps of the
/// total, which keeps aggregate outputs stable when coverage entries or
/// time steps arrive in a different order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        acc.extend(iter);
        acc
    }
}

/// Compensated sum of a sequence.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Arithmetic mean that is exact for constant inputs and never leaves
/// `[min, max]` of its inputs. Returns `None` for an empty input.
pub fn bounded_mean(values: &[f64]) -> Option<f64> {
    let (&first, rest) = values.split_first()?;
    let mut lo = first;
    let mut hi = first;
    let mut acc = CompensatedSum::new();
    for &x in rest {
        lo = lo.min(x);
        hi = hi.max(x);
        acc.add(x - first);
    }
    let mean = first + acc.value() / values.len() as f64;
    Some(mean.clamp(lo, hi))
}
