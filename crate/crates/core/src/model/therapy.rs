use super::ModelError;
use crate::scalar::Real;

/// Half-open interval `[start, end)` with a constant death rate (1/day).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInterval<T> {
    pub start: T,
    pub end: T,
    pub rate: T,
}

/// Piecewise-constant radiotherapy and chemotherapy death-rate profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct TherapySchedule<T> {
    pub radio: Vec<RateInterval<T>>,
    pub chemo: Vec<RateInterval<T>>,
}

impl<T> Default for TherapySchedule<T> {
    fn default() -> Self {
        Self {
            radio: Vec::new(),
            chemo: Vec::new(),
        }
    }
}

impl<T: Real> TherapySchedule<T> {
    pub fn new(radio: Vec<RateInterval<T>>, chemo: Vec<RateInterval<T>>) -> Result<Self, ModelError> {
        let s = Self { radio, chemo };
        s.validate()?;
        Ok(s)
    }

    pub fn is_empty(&self) -> bool {
        self.radio.is_empty() && self.chemo.is_empty()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, list) in [("radio", &self.radio), ("chemo", &self.chemo)] {
            for iv in list {
                if !(iv.start < iv.end) {
                    return Err(ModelError::Parameter(format!(
                        "{name} interval [{}, {}) is empty",
                        iv.start, iv.end
                    )));
                }
                if !(iv.rate >= T::zero()) {
                    return Err(ModelError::Parameter(format!("{name} rate {} is negative", iv.rate)));
                }
            }
            let mut sorted: Vec<_> = list.iter().collect();
            sorted.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
            for w in sorted.windows(2) {
                if w[1].start < w[0].end {
                    return Err(ModelError::Parameter(format!(
                        "{name} intervals starting at {} and {} overlap",
                        w[0].start, w[1].start
                    )));
                }
            }
        }
        Ok(())
    }

    fn rate_at(list: &[RateInterval<T>], t: T) -> T {
        list.iter()
            .find(|iv| iv.start <= t && t < iv.end)
            .map_or(T::zero(), |iv| iv.rate)
    }

    /// Therapy death rates `(k_T1, k_T2)`; both equal `k_R(t) + k_C(t)`.
    pub fn therapy_rate(&self, t: T) -> (T, T) {
        let k = Self::rate_at(&self.radio, t) + Self::rate_at(&self.chemo, t);
        (k, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(start: f64, end: f64, rate: f64) -> RateInterval<f64> {
        RateInterval { start, end, rate }
    }

    #[test]
    fn empty_schedule_has_no_therapy() {
        assert_eq!(TherapySchedule::<f64>::default().therapy_rate(3.0), (0.0, 0.0));
    }

    #[test]
    fn additive_rates_on_half_open_intervals() {
        let s = TherapySchedule::new(vec![iv(1.0, 2.0, 0.3)], vec![iv(1.5, 4.0, 0.2)]).unwrap();
        assert_eq!(s.therapy_rate(1.2), (0.3, 0.3));
        assert_eq!(s.therapy_rate(1.7), (0.5, 0.5));
        assert_eq!(s.therapy_rate(2.0), (0.2, 0.2));
        assert_eq!(s.therapy_rate(4.0), (0.0, 0.0));
        assert_eq!(s.therapy_rate(0.0), (0.0, 0.0));
    }

    #[test]
    fn invalid_schedules() {
        assert!(TherapySchedule::new(vec![iv(2.0, 1.0, 0.1)], vec![]).is_err());
        assert!(TherapySchedule::new(vec![iv(0.0, 1.0, -0.1)], vec![]).is_err());
        assert!(TherapySchedule::new(vec![iv(0.0, 2.0, 0.1), iv(1.0, 3.0, 0.1)], vec![]).is_err());
        assert!(TherapySchedule::new(vec![iv(0.0, 1.0, 0.1), iv(1.0, 3.0, 0.1)], vec![]).is_ok());
    }
}
