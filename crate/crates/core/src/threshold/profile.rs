use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::Table;

/// Queue-length thresholds per channel state, plus the channel (if any)
/// allowed to transmit with a fractional probability one level below its
/// threshold.
///
/// Channels are 0-based here: `thresholds[0]` belongs to the best channel and
/// is always 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ThresholdProfile {
    thresholds: Vec<usize>,
    fractional: Option<usize>,
}

impl ThresholdProfile {
    pub fn new(thresholds: Vec<usize>, fractional: Option<usize>, buffer: usize) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        match thresholds.first() {
            None => return bad("profile needs at least one channel".into()),
            Some(&t) if t != 0 => return bad(format!("best channel threshold is {t}, must be 0")),
            _ => {}
        }
        if thresholds.windows(2).any(|w| w[1] < w[0]) {
            return bad(format!("thresholds {thresholds:?} are not non-decreasing"));
        }
        if thresholds.last().is_some_and(|&t| t > buffer) {
            return bad(format!("thresholds {thresholds:?} exceed buffer {buffer}"));
        }
        if let Some(m) = fractional {
            // the fractional channel must be the best one sharing its threshold
            if m == 0 || m >= thresholds.len() || thresholds[m - 1] >= thresholds[m] {
                return bad(format!(
                    "channel {m} cannot carry the fractional cell of {thresholds:?}"
                ));
            }
        }
        Ok(Self { thresholds, fractional })
    }

    /// All thresholds zero: transmit whenever possible.
    pub fn zero(states: usize) -> Self {
        Self {
            thresholds: vec![0; states],
            fractional: None,
        }
    }

    pub fn thresholds(&self) -> &[usize] {
        &self.thresholds
    }

    pub fn fractional(&self) -> Option<usize> {
        self.fractional
    }

    pub fn states(&self) -> usize {
        self.thresholds.len()
    }

    /// Largest threshold; the queue never grows beyond it.
    pub fn top(&self) -> usize {
        *self.thresholds.last().expect("non-empty profile")
    }

    /// Same thresholds without a fractional channel.
    pub fn integral(&self) -> Self {
        Self {
            thresholds: self.thresholds.clone(),
            fractional: None,
        }
    }

    /// Reads the threshold structure off an LP solution.
    ///
    /// A cell is full when `y` reaches its upper bound `pi_i + xi pi_{i+1}`;
    /// channel `m`'s threshold is one above its highest non-full cell. Any
    /// positive mass on the cell just below a threshold marks the fractional
    /// channel.
    pub fn extract<T: Scalar>(y: &Table<T>, pi: &[T], xi: T, tol: T) -> Result<Self> {
        let q = y.rows() - 1;
        let upper = |i: usize| pi[i] + if i < q { xi * pi[i + 1] } else { T::zero() };
        let mut thresholds = Vec::with_capacity(y.cols());
        for m in 0..y.cols() {
            let t = (0..=q).rev().find(|&i| y[(i, m)] < upper(i) - tol).map_or(0, |i| i + 1);
            thresholds.push(t);
        }
        let mut fractional = None;
        for (m, &t) in thresholds.iter().enumerate() {
            if t > 0 && y[(t - 1, m)] > tol {
                if fractional.is_some() {
                    return Err(Error::StructureViolation {
                        row: t - 1,
                        channel: m,
                        detail: "second fractional cell".into(),
                    });
                }
                fractional = Some(m);
            }
            if let Some(i) = (0..t.saturating_sub(1)).find(|&i| y[(i, m)] > tol) {
                return Err(Error::StructureViolation {
                    row: i,
                    channel: m,
                    detail: format!("mass {} below threshold {t}", y[(i, m)]),
                });
            }
        }
        Self::new(thresholds, fractional, q).map_err(|e| Error::StructureViolation {
            row: 0,
            channel: 0,
            detail: e.to_string(),
        })
    }
}

/// Number of channel states whose threshold is at most `i`.
pub fn eval_gamma(profile: &ThresholdProfile, i: usize) -> usize {
    profile.thresholds.partition_point(|&t| t <= i)
}

/// Enumerates non-decreasing threshold vectors `0 = t_0 <= ... <= t_{M-1} <= Q`
/// in lexicographic order.
pub(crate) struct MonotoneProfiles {
    current: Option<Vec<usize>>,
    buffer: usize,
}

impl MonotoneProfiles {
    pub(crate) fn new(states: usize, buffer: usize) -> Self {
        Self {
            current: Some(vec![0; states]),
            buffer,
        }
    }

    /// `C(Q + M - 1, M - 1)`, saturating.
    pub(crate) fn count(states: usize, buffer: usize) -> u128 {
        let k = states.saturating_sub(1) as u128;
        let n = buffer as u128 + k;
        (0..k).fold(1u128, |acc, j| acc.saturating_mul(n - j) / (j + 1))
    }
}

impl Iterator for MonotoneProfiles {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let mut next = out.clone();
        if let Some(k) = (1..next.len()).rev().find(|&k| next[k] < self.buffer) {
            let v = next[k] + 1;
            next[k..].iter_mut().for_each(|t| *t = v);
            self.current = Some(next);
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_examples() {
        assert_eq!(eval_gamma(&ThresholdProfile::zero(3), 0), 3);
        let p = ThresholdProfile::new(vec![0, 2, 5], None, 10).unwrap();
        assert_eq!(eval_gamma(&p, 0), 1);
        assert_eq!(eval_gamma(&p, 3), 2);
        assert_eq!(eval_gamma(&p, 5), 3);
        assert_eq!(eval_gamma(&p, 7), 3);
    }

    #[test]
    fn profile_validation() {
        assert!(ThresholdProfile::new(vec![1, 2], None, 5).is_err());
        assert!(ThresholdProfile::new(vec![0, 3, 2], None, 5).is_err());
        assert!(ThresholdProfile::new(vec![0, 6], None, 5).is_err());
        assert!(ThresholdProfile::new(vec![0, 2, 2], Some(2), 5).is_err());
        assert!(ThresholdProfile::new(vec![0, 2, 2], Some(1), 5).is_ok());
        assert!(ThresholdProfile::new(vec![0, 0], Some(1), 5).is_err());
        assert!(ThresholdProfile::new(vec![0, 2], Some(0), 5).is_err());
    }

    #[test]
    fn enumeration_is_lexicographic_and_complete() {
        let all: Vec<_> = MonotoneProfiles::new(3, 3).collect();
        assert_eq!(all.len() as u128, MonotoneProfiles::count(3, 3));
        assert_eq!(all.len(), 10);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert!(all.iter().all(|v| v[0] == 0 && v.windows(2).all(|w| w[0] <= w[1])));
        assert_eq!(MonotoneProfiles::count(3, 100), 5151);
        assert_eq!(MonotoneProfiles::new(1, 7).count(), 1);
    }
}
