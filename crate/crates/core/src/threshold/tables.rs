use crate::error::{Error, Result};
use crate::model::{ChannelModel, SteadyState, SystemInstance, TrafficModel};
use crate::scalar::Scalar;

use super::profile::{eval_gamma, ThresholdProfile};

/// Up/down odds of the queue when exactly the `k` best channels transmit:
/// `(1 - sum_{m<=k} eta_m) / (xi sum_{m<=k} eta_m)`.
pub fn eval_chi<T: Scalar>(channel: &ChannelModel<T>, traffic: &TrafficModel<T>, k: usize) -> T {
    assert!(k >= 1 && k <= channel.states(), "chi needs 1 <= k <= M");
    if k == channel.states() {
        return T::zero();
    }
    let head = channel.head_mass(k);
    ((T::one() - head) / (traffic.xi() * head)).max(T::zero())
}

/// Coefficients expressing the optimal distribution as a linear function of
/// `pi_0`, for one threshold profile.
///
/// `pi_i = pi_0 phi1[i] + x phi2[i]` where `x` is the fractional cell's `y`;
/// `theta1`, `theta2` are the matching power coefficients (divided by alpha)
/// and `nu1`, `nu2` the normalization sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormTables<T> {
    pub phi1: Vec<T>,
    pub phi2: Vec<T>,
    pub theta1: T,
    pub theta2: T,
    pub nu1: T,
    pub nu2: T,
    /// `gamma_of_i[i]` = number of channels active at queue length `i`.
    pub gamma_of_i: Vec<usize>,
    /// `chi_of_k[k - 1]` = `chi(k)`.
    pub chi_of_k: Vec<T>,
    fractional: bool,
}

impl<T: Scalar> ClosedFormTables<T> {
    pub fn chi(&self, k: usize) -> T {
        self.chi_of_k[k - 1]
    }

    pub fn has_fractional(&self) -> bool {
        self.fractional
    }

    /// Distribution for a given `pi_0`.
    ///
    /// Without a fractional channel the profile pins the shape and `pi_0`
    /// only scales it.
    pub fn distribution(&self, pi0: T) -> Vec<T> {
        if !self.fractional {
            return self.phi1.iter().map(|&p| p * pi0).collect();
        }
        let ratio = self.nu1 / self.nu2;
        self.phi1
            .iter()
            .zip(&self.phi2)
            .map(|(&a, &b)| b / self.nu2 + (a - ratio * b) * pi0)
            .collect()
    }

    /// `y` of the fractional cell implied by `pi_0`.
    pub fn fractional_mass(&self, pi0: T) -> T {
        if self.fractional {
            (T::one() - pi0 * self.nu1) / self.nu2
        } else {
            T::zero()
        }
    }
}

pub fn eval_tables<T: Scalar>(inst: &SystemInstance<T>, profile: &ThresholdProfile) -> ClosedFormTables<T> {
    let q = inst.buffer();
    let ms = inst.states();
    let xi = inst.xi();
    let eta = inst.channel.eta();
    let power = inst.channel.power();
    let th = profile.thresholds();
    let top = profile.top();

    let chi_of_k: Vec<T> = (1..=ms).map(|k| eval_chi(&inst.channel, &inst.traffic, k)).collect();
    let chi = |k: usize| chi_of_k[k - 1];
    let gamma_of_i: Vec<usize> = (0..=q).map(|i| eval_gamma(profile, i)).collect();
    // thresholds by 1-based channel number
    let t = |k: usize| th[k - 1];
    let powi = |base: T, e: usize| base.powi(e as i32);

    // product of chi over the levels n in [t(from), i), grouped by channel count
    let run = |from: usize, i: usize| -> T {
        let g = gamma_of_i[i - 1];
        let mut acc = powi(chi(g), i - t(g));
        for m in from..g {
            acc = acc * powi(chi(m), t(m + 1) - t(m));
        }
        acc
    };

    let mut phi1 = vec![T::zero(); q + 1];
    phi1[0] = T::one();
    for (i, slot) in phi1.iter_mut().enumerate().skip(1) {
        *slot = run(1, i);
    }

    let mut phi2 = vec![T::zero(); q + 1];
    if let Some(mt) = profile.fractional() {
        let tilde = mt + 1;
        let lead = -eta[mt] / (xi * inst.channel.head_mass(mt));
        phi2[t(tilde)] = lead;
        for (i, slot) in phi2.iter_mut().enumerate().skip(t(tilde) + 1) {
            *slot = lead * run(tilde, i);
        }
    }

    let theta = |phi: &[T]| -> T {
        (0..ms)
            .map(|m| {
                let tail: T = phi[th[m] + 1..=top].iter().copied().sum();
                eta[m] * (phi[th[m]] + (T::one() + xi) * tail) * power[m]
            })
            .sum()
    };
    let theta1 = theta(&phi1);
    let mut theta2 = theta(&phi2);
    if let Some(mt) = profile.fractional() {
        theta2 = theta2 + eta[mt] * power[mt];
    }
    let nu1 = phi1[..=top].iter().copied().sum();
    let nu2 = phi2[..=top].iter().copied().sum();

    ClosedFormTables {
        phi1,
        phi2,
        theta1,
        theta2,
        nu1,
        nu2,
        gamma_of_i,
        chi_of_k,
        fractional: profile.fractional().is_some(),
    }
}

/// Probability of an empty queue that makes the profile spend exactly the
/// budget, or the normalization constant when there is no fractional cell.
pub fn solve_pi0<T: Scalar>(inst: &SystemInstance<T>, tables: &ClosedFormTables<T>) -> Result<T> {
    let pi0 = if !tables.fractional || tables.nu2 == T::zero() {
        T::one() / tables.nu1
    } else {
        let ratio = tables.nu1 / tables.nu2;
        let denom = tables.theta1 - ratio * tables.theta2;
        let numer = inst.p_max() / inst.alpha() - tables.theta2 / tables.nu2;
        if denom.abs() <= T::epsilon() * (tables.theta1.abs() + (ratio * tables.theta2).abs()) {
            return Err(Error::ProfileInfeasible { pi0: f64::NAN });
        }
        numer / denom
    };
    if !(pi0 > T::zero() && pi0 <= T::one() + T::feas_tol()) {
        return Err(Error::ProfileInfeasible { pi0: pi0.as_f64() });
    }
    Ok(pi0.min(T::one()))
}

/// Distribution for `pi_0`, rejecting shapes with negative mass.
pub fn pi_star<T: Scalar>(tables: &ClosedFormTables<T>, pi0: T) -> Result<SteadyState<T>> {
    let pi = tables.distribution(pi0);
    let scale = pi.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    if pi
        .iter()
        .any(|&p| !p.is_finite() || p < -T::feas_tol() * scale.max(T::one()))
    {
        return Err(Error::ProfileInfeasible { pi0: pi0.as_f64() });
    }
    let clipped: Vec<T> = pi.into_iter().map(|p| p.max(T::zero())).collect();
    let total: T = clipped.iter().copied().sum();
    if (total - T::one()).abs() > T::feas_tol() {
        return Err(Error::ProfileInfeasible { pi0: pi0.as_f64() });
    }
    SteadyState::new(clipped.into_iter().map(|p| p / total).collect())
        .map_err(|_| Error::ProfileInfeasible { pi0: pi0.as_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelModel, TrafficModel};

    fn inst(eta: &[f64], power: &[f64], alpha: f64, q: usize, p_max: f64) -> SystemInstance<f64> {
        SystemInstance::new(
            ChannelModel::new(eta.to_vec(), power.to_vec()).unwrap(),
            TrafficModel::new(alpha).unwrap(),
            q,
            p_max,
        )
        .unwrap()
    }

    #[test]
    fn chi_examples() {
        let ch = ChannelModel::<f64>::new(vec![0.25, 0.5, 0.25], vec![1.0, 2.0, 3.0]).unwrap();
        let t = TrafficModel::new(0.5).unwrap();
        assert!((eval_chi(&ch, &t, 1) - 3.0).abs() < 1e-15);
        assert!((eval_chi(&ch, &t, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(eval_chi(&ch, &t, 3), 0.0);
    }

    #[test]
    fn two_state_phi1_is_geometric() {
        let sys = inst(&[0.4, 0.6], &[1.0, 2.0], 0.3, 12, 0.4);
        let profile = ThresholdProfile::new(vec![0, 7], None, 12).unwrap();
        let tables = eval_tables(&sys, &profile);
        let r = eval_chi(&sys.channel, &sys.traffic, 1);
        for i in 0..=7 {
            assert!((tables.phi1[i] - r.powi(i as i32)).abs() <= 1e-12 * r.powi(i as i32));
        }
        assert!(tables.phi1[8..].iter().all(|&p| p == 0.0));
        assert!(tables.phi2.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn phi2_vanishes_below_fractional_threshold() {
        let sys = inst(&[0.3, 0.3, 0.4], &[1.0, 2.0, 4.0], 0.5, 10, 1.0);
        let profile = ThresholdProfile::new(vec![0, 2, 6], Some(2), 10).unwrap();
        let tables = eval_tables(&sys, &profile);
        assert!(tables.phi2[..6].iter().all(|&p| p == 0.0));
        assert!((tables.phi2[6] + 0.4 / (1.0 * 0.6)).abs() < 1e-15);
        assert!(tables.phi2[7..].iter().all(|&p| p == 0.0));
        assert!(tables.nu2 < 0.0);
    }

    #[test]
    fn zero_profile_pi0_is_one() {
        let sys = inst(&[0.25, 0.5, 0.25], &[1.0, 2.0, 3.0], 0.5, 20, 1.2);
        let tables = eval_tables(&sys, &ThresholdProfile::zero(3));
        assert_eq!(tables.nu1, 1.0);
        assert_eq!(solve_pi0(&sys, &tables).unwrap(), 1.0);
        assert_eq!(tables.gamma_of_i[0], 3);
    }
}
