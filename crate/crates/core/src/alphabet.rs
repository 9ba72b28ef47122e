//! Equispaced symmetric quantization alphabets and memoryless rounding onto them.
//!
//! An alphabet with `M` levels and radius `α` is the set
//! `α · { -1 + 2j/(M-1) : j = 0..M-1 }`. With `M = 3, α = 1` this is the
//! ternary alphabet `{-1, 0, 1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alphabet {
    radius: f64,
    levels: usize,
    elements: Vec<f64>,
}

impl Alphabet {
    pub fn new(levels: usize, radius: f64) -> Result<Self> {
        if levels < 2 || !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidAlphabet { levels, radius });
        }
        let denom = (levels - 1) as f64;
        let elements = (0..levels)
            .map(|j| {
                // Evaluate the endpoints and the center directly so that
                // they are exact and the set is symmetric bit-for-bit.
                let k = 2 * j as i64 - (levels as i64 - 1);
                if k == 0 {
                    0.0
                } else {
                    radius * (k as f64 / denom)
                }
            })
            .collect();
        Ok(Self {
            radius,
            levels,
            elements,
        })
    }

    /// The ternary alphabet `{-1, 0, 1}`.
    pub fn ternary() -> Self {
        Self::new(3, 1.0).expect("valid")
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Sorted, strictly increasing.
    pub fn elements(&self) -> &[f64] {
        &self.elements
    }

    /// Same level count with the radius multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.levels, self.radius * factor)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.elements.contains(&value)
    }

    /// Index of the element nearest to `z`.
    ///
    /// Exact midpoints round away from zero. For an even level count the
    /// midpoint at `z = 0` has no "away from zero" side; it goes to the
    /// positive element.
    pub fn nearest_index(&self, z: f64) -> usize {
        let last = self.levels - 1;
        if z.is_nan() {
            return last / 2;
        }
        if z <= -self.radius {
            return 0;
        }
        if z >= self.radius {
            return last;
        }
        let step = 2.0 * self.radius / last as f64;
        let lo = (((z + self.radius) / step).floor() as usize).min(last - 1);
        let (a, b) = (self.elements[lo], self.elements[lo + 1]);
        let (da, db) = ((z - a).abs(), (z - b).abs());
        if da < db {
            lo
        } else if db < da {
            lo + 1
        } else if z < 0.0 {
            lo
        } else {
            lo + 1
        }
    }

    /// Nearest element of the alphabet; inputs beyond `±α` clamp to `±α`.
    pub fn quantize(&self, z: f64) -> f64 {
        self.elements[self.nearest_index(z)]
    }
}

pub fn build_alphabet(levels: usize, radius: f64) -> Result<Alphabet> {
    Alphabet::new(levels, radius)
}

pub fn scalar_quantize(z: f64, alphabet: &Alphabet) -> f64 {
    alphabet.quantize(z)
}

/// Median of the absolute values of `values`; the mean of the two central
/// order statistics when the count is even.
pub fn median_abs<I>(values: I) -> Option<f64>
where
    I: IntoIterator<Item = f64>,
{
    let mut abs: Vec<f64> = values.into_iter().map(f64::abs).collect();
    if abs.is_empty() {
        return None;
    }
    abs.sort_by(f64::total_cmp);
    let n = abs.len();
    Some(if n % 2 == 1 {
        abs[n / 2]
    } else {
        0.5 * (abs[n / 2 - 1] + abs[n / 2])
    })
}

/// Per-layer radius rule: `c_alpha · median(|W_ij|)`.
pub fn radius_from_weights<I>(weights: I, c_alpha: f64) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
{
    if !(c_alpha > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "c_alpha must be positive, got {c_alpha}"
        )));
    }
    let median = median_abs(weights).ok_or(Error::EmptyWeights)?;
    let radius = c_alpha * median;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::DegenerateAlphabet { radius });
    }
    Ok(radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ternary_elements() {
        assert_eq!(Alphabet::new(3, 1.0).unwrap().elements(), &[-1.0, 0.0, 1.0]);
        assert_eq!(Alphabet::new(2, 1.0).unwrap().elements(), &[-1.0, 1.0]);
    }

    #[test]
    fn four_levels_radius_two() {
        let a = Alphabet::new(4, 2.0).unwrap();
        let expected = [-2.0, -2.0 / 3.0, 2.0 / 3.0, 2.0];
        for (e, x) in a.elements().iter().zip(expected) {
            assert!((e - x).abs() < 1e-15);
        }
        assert_eq!(a.elements()[0], -2.0);
        assert_eq!(a.elements()[3], 2.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(Alphabet::new(1, 1.0), Err(Error::InvalidAlphabet { .. })));
        assert!(Alphabet::new(3, 0.0).is_err());
        assert!(Alphabet::new(3, -1.0).is_err());
        assert!(Alphabet::new(3, f64::NAN).is_err());
    }

    #[test]
    fn radius_rule() {
        assert_eq!(radius_from_weights([1.0, -3.0, 2.0], 2.0).unwrap(), 4.0);
        assert_eq!(radius_from_weights([0.5], 1.0).unwrap(), 0.5);
        assert_eq!(radius_from_weights([1.0, 2.0, 3.0, 4.0], 1.0).unwrap(), 2.5);
        assert!(matches!(
            radius_from_weights([0.0, 0.0], 1.0),
            Err(Error::DegenerateAlphabet { .. })
        ));
        assert!(matches!(
            radius_from_weights(std::iter::empty(), 1.0),
            Err(Error::EmptyWeights)
        ));
    }

    #[test]
    fn even_median_matches_sorting_oracle() {
        let vals = [4.0, -1.0, 3.0, -2.0];
        let mut sorted: Vec<f64> = vals.iter().map(|v: &f64| v.abs()).collect();
        sorted.sort_by(f64::total_cmp);
        let oracle = (sorted[1] + sorted[2]) / 2.0;
        assert_eq!(median_abs(vals).unwrap(), oracle);
    }

    #[test]
    fn quantize_examples() {
        let t = Alphabet::ternary();
        assert_eq!(t.quantize(0.7), 1.0);
        assert_eq!(t.quantize(-3.0), -1.0);
        // Tie: both 0 and 1 are 0.5 away; away from zero wins.
        assert_eq!((0.5f64 - 0.0).abs(), (0.5f64 - 1.0).abs());
        assert_eq!(t.quantize(0.5), 1.0);
        assert_eq!(t.quantize(-0.5), -1.0);
        assert_eq!(t.quantize(0.49), 0.0);
    }

    #[test]
    fn even_levels_zero_tie_goes_positive() {
        let a = Alphabet::new(4, 3.0).unwrap();
        assert_eq!(a.quantize(0.0), 1.0);
        assert_eq!(a.quantize(-0.0), 1.0);
    }

    fn alphabet_strategy() -> impl Strategy<Value = Alphabet> {
        (2usize..10, 0.01f64..10.0).prop_map(|(m, r)| Alphabet::new(m, r).unwrap())
    }

    proptest! {
        #[test]
        fn nearest_is_optimal(a in alphabet_strategy(), z in -20.0f64..20.0) {
            let q = a.quantize(z);
            for &p in a.elements() {
                prop_assert!((z - q).abs() <= (z - p).abs());
            }
        }

        #[test]
        fn odd_symmetry_off_ties(a in alphabet_strategy(), z in -20.0f64..20.0) {
            let q = a.quantize(z);
            let d = (z - q).abs();
            let tie = a.elements().iter().any(|&p| p != q && (z - p).abs() == d);
            if !tie {
                prop_assert_eq!(a.quantize(-z), -q);
            }
        }

        #[test]
        fn elements_are_fixed_points(a in alphabet_strategy()) {
            for &p in a.elements() {
                prop_assert_eq!(a.quantize(p), p);
            }
            let e = a.elements();
            prop_assert!(e.windows(2).all(|w| w[0] < w[1]));
            prop_assert_eq!(e[0], -a.radius());
            prop_assert_eq!(e[e.len() - 1], a.radius());
            for (x, y) in e.iter().zip(e.iter().rev()) {
                prop_assert_eq!(*x, -*y);
            }
        }

        #[test]
        fn scaling_equivariance(m in 2usize..8, s in 0.1f64..10.0, z in -3.0f64..3.0) {
            let a = Alphabet::new(m, 1.0).unwrap();
            let b = a.scaled(s).unwrap();
            let lhs = b.nearest_index(s * z);
            let rhs = a.nearest_index(z);
            // Indices agree except within rounding of a midpoint.
            if lhs != rhs {
                let q = a.quantize(z);
                let other = a.elements()[lhs];
                prop_assert!(((z - q).abs() - (z - other).abs()).abs() < 1e-12);
            } else {
                prop_assert!((b.quantize(s * z) - s * a.quantize(z)).abs() <= 1e-12 * s);
            }
        }
    }
}
