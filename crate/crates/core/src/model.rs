//! System model: channel and traffic statistics, transmission policies, the
//! birth-death chain they induce on the queue length, and the closed-form
//! performance metrics of that chain.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::Table;

/// i.i.d. block-fading channel with `M` states.
///
/// State 0 is the best channel (lowest power per packet); powers are
/// non-decreasing in the state index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel<T> {
    eta: Vec<T>,
    power: Vec<T>,
}

impl<T: Scalar> ChannelModel<T> {
    pub fn new(eta: Vec<T>, power: Vec<T>) -> Result<Self> {
        if eta.is_empty() {
            return Err(Error::InvalidInstance("channel needs at least one state".into()));
        }
        if eta.len() != power.len() {
            return Err(Error::InvalidInstance(format!(
                "{} state probabilities but {} power levels",
                eta.len(),
                power.len()
            )));
        }
        if let Some(m) = eta.iter().position(|&e| !(e > T::zero()) || !e.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "state probability eta[{m}] = {} must be positive",
                eta[m]
            )));
        }
        let total: T = eta.iter().copied().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::from_usize_lossy(16 * eta.len()));
        if (total - T::one()).abs() > tol {
            return Err(Error::InvalidInstance(format!(
                "state probabilities sum to {total}, expected 1"
            )));
        }
        if let Some(m) = power.iter().position(|&p| !(p > T::zero()) || !p.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "power level P[{m}] = {} must be positive",
                power[m]
            )));
        }
        if let Some(m) = power.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::InvalidInstance(format!(
                "power levels must be non-decreasing: P[{}] = {} > P[{}] = {}",
                m,
                power[m],
                m + 1,
                power[m + 1]
            )));
        }
        Ok(Self { eta, power })
    }

    /// Number of fading states `M`.
    pub fn states(&self) -> usize {
        self.eta.len()
    }

    pub fn eta(&self) -> &[T] {
        &self.eta
    }

    pub fn power(&self) -> &[T] {
        &self.power
    }

    /// Probability mass of the `k` best states.
    pub fn head_mass(&self, k: usize) -> T {
        self.eta[..k].iter().copied().sum()
    }
}

/// Bernoulli arrivals: one packet per slot with probability `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel<T> {
    alpha: T,
    xi: T,
}

impl<T: Scalar> TrafficModel<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::InvalidInstance(format!(
                "arrival probability {alpha} must lie strictly inside (0, 1)"
            )));
        }
        Ok(Self {
            alpha,
            xi: (T::one() - alpha) / alpha,
        })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Odds of no arrival, `(1 - alpha) / alpha`.
    pub fn xi(&self) -> T {
        self.xi
    }
}

/// Probabilistic transmission policy over `(queue length, channel state)`.
///
/// `g[i][m]` is the transmit probability when a packet arrives in the slot,
/// `f[i][m]` when none does. Row 0 of `f` is stored but never read.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<T> {
    g: Table<T>,
    f: Table<T>,
}

impl<T: Scalar> Policy<T> {
    pub fn new(g: Table<T>, f: Table<T>) -> Result<Self> {
        if g.rows() < 2 || g.cols() == 0 {
            return Err(Error::InvalidInstance(format!(
                "policy tables must be at least 2 x 1, got {} x {}",
                g.rows(),
                g.cols()
            )));
        }
        if g.rows() != f.rows() || g.cols() != f.cols() {
            return Err(Error::InvalidInstance(format!(
                "g is {} x {} but f is {} x {}",
                g.rows(),
                g.cols(),
                f.rows(),
                f.cols()
            )));
        }
        for (name, table) in [("g", &g), ("f", &f)] {
            if let Some(k) = table.iter().position(|&p| !(p >= T::zero() && p <= T::one())) {
                return Err(Error::InvalidInstance(format!(
                    "{name}[{}][{}] = {} is not a probability",
                    k / table.cols(),
                    k % table.cols(),
                    table.as_slice()[k]
                )));
            }
        }
        Ok(Self { g, f })
    }

    /// Transmit in every slot, whatever the channel.
    pub fn always(buffer: usize, states: usize) -> Self {
        let ones = Table::filled(buffer + 1, states, T::one());
        Self {
            g: ones.clone(),
            f: ones,
        }
    }

    /// Never transmit.
    pub fn never(buffer: usize, states: usize) -> Self {
        let zeros = Table::filled(buffer + 1, states, T::zero());
        Self {
            g: zeros.clone(),
            f: zeros,
        }
    }

    /// Buffer capacity `Q`.
    pub fn buffer(&self) -> usize {
        self.g.rows() - 1
    }

    pub fn states(&self) -> usize {
        self.g.cols()
    }

    pub fn g(&self) -> &Table<T> {
        &self.g
    }

    pub fn f(&self) -> &Table<T> {
        &self.f
    }

    pub fn into_tables(self) -> (Table<T>, Table<T>) {
        (self.g, self.f)
    }

    fn check_states(&self, channel: &ChannelModel<T>) -> Result<()> {
        if self.states() != channel.states() {
            return Err(Error::InvalidInstance(format!(
                "policy has {} channel columns but the channel has {} states",
                self.states(),
                channel.states()
            )));
        }
        Ok(())
    }
}

/// A complete problem instance: link statistics, buffer size and power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemInstance<T> {
    pub channel: ChannelModel<T>,
    pub traffic: TrafficModel<T>,
    buffer: usize,
    p_max: T,
}

impl<T: Scalar> SystemInstance<T> {
    pub fn new(channel: ChannelModel<T>, traffic: TrafficModel<T>, buffer: usize, p_max: T) -> Result<Self> {
        if buffer < 1 {
            return Err(Error::InvalidInstance("buffer capacity must be at least 1".into()));
        }
        if !(p_max > T::zero()) || !p_max.is_finite() {
            return Err(Error::InvalidInstance(format!("power budget {p_max} must be positive")));
        }
        Ok(Self {
            channel,
            traffic,
            buffer,
            p_max,
        })
    }

    /// Same link and buffer under a different power budget.
    pub fn with_budget(&self, p_max: T) -> Result<Self> {
        Self::new(self.channel.clone(), self.traffic, self.buffer, p_max)
    }

    /// Buffer capacity `Q`.
    pub fn buffer(&self) -> usize {
        self.buffer
    }

    pub fn p_max(&self) -> T {
        self.p_max
    }

    pub fn states(&self) -> usize {
        self.channel.states()
    }

    pub fn alpha(&self) -> T {
        self.traffic.alpha()
    }

    pub fn xi(&self) -> T {
        self.traffic.xi()
    }

    /// Budget above which the always-transmit policy is affordable.
    pub fn power_threshold(&self) -> T {
        power_threshold(&self.traffic, &self.channel)
    }
}

/// Up and down transition probabilities of the queue-length chain.
#[derive(Debug, Clone, PartialEq)]
pub struct BirthDeathRates<T> {
    /// `lambda[i]` is the probability of moving `i -> i + 1`, for `i < Q`.
    pub lambda: Vec<T>,
    /// `mu[i - 1]` is the probability of moving `i -> i - 1`, for `1 <= i <= Q`.
    pub mu: Vec<T>,
}

impl<T: Scalar> BirthDeathRates<T> {
    pub fn new(lambda: Vec<T>, mu: Vec<T>) -> Result<Self> {
        if lambda.is_empty() || lambda.len() != mu.len() {
            return Err(Error::InvalidInstance(format!(
                "need Q >= 1 up and down rates, got {} and {}",
                lambda.len(),
                mu.len()
            )));
        }
        let valid = |p: T| p >= T::zero() && p <= T::one();
        if !lambda.iter().chain(&mu).all(|&p| valid(p)) {
            return Err(Error::InvalidInstance("rates must be probabilities".into()));
        }
        // interior state i uses lambda[i] and mu[i - 1]
        for i in 1..lambda.len() {
            if lambda[i] + mu[i - 1] > T::one() + T::epsilon() * T::lit(4.0) {
                return Err(Error::InvalidInstance(format!(
                    "state {i}: up {} + down {} exceed 1",
                    lambda[i],
                    mu[i - 1]
                )));
            }
        }
        Ok(Self { lambda, mu })
    }

    pub fn buffer(&self) -> usize {
        self.lambda.len()
    }

    /// Probability of moving up from state `i`, zero at `Q`.
    pub fn up(&self, i: usize) -> T {
        self.lambda.get(i).copied().unwrap_or_else(T::zero)
    }

    /// Probability of moving down from state `i`, zero at 0.
    pub fn down(&self, i: usize) -> T {
        if i == 0 {
            T::zero()
        } else {
            self.mu[i - 1]
        }
    }
}

/// Stationary distribution of the queue length.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState<T> {
    pi: Vec<T>,
}

impl<T: Scalar> SteadyState<T> {
    /// Accepts a probability vector, clamping entries in `[-1e-12, 0)` to zero
    /// and renormalizing.
    pub fn new(mut pi: Vec<T>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::InvalidInstance("empty distribution".into()));
        }
        let clamp = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        for (i, p) in pi.iter_mut().enumerate() {
            if !p.is_finite() || *p < -clamp {
                return Err(Error::InvalidInstance(format!("pi[{i}] = {p} is not a probability")));
            }
            if *p < T::zero() {
                *p = T::zero();
            }
        }
        let total: T = pi.iter().copied().sum();
        if (total - T::one()).abs() > T::balance_tol() {
            return Err(Error::InvalidInstance(format!(
                "distribution sums to {total}, expected 1"
            )));
        }
        pi.iter_mut().for_each(|p| *p = *p / total);
        Ok(Self { pi })
    }

    /// Point mass on the empty queue.
    pub fn empty_queue(buffer: usize) -> Self {
        let mut pi = vec![T::zero(); buffer + 1];
        pi[0] = T::one();
        Self { pi }
    }

    pub fn probs(&self) -> &[T] {
        &self.pi
    }

    pub fn buffer(&self) -> usize {
        self.pi.len() - 1
    }

    pub fn mean_queue(&self) -> T {
        self.pi
            .iter()
            .enumerate()
            .map(|(i, &p)| T::from_usize_lossy(i) * p)
            .sum()
    }

    /// Total variation distance to another distribution on the same support.
    pub fn tv_distance(&self, other: &Self) -> T {
        let n = self.pi.len().max(other.pi.len());
        let at = |v: &[T], i: usize| v.get(i).copied().unwrap_or_else(T::zero);
        let sum: T = (0..n).map(|i| (at(&self.pi, i) - at(&other.pi, i)).abs()).sum();
        sum * T::lit(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<T> {
    /// Average queueing delay in slots.
    pub avg_delay: T,
    /// Average transmit power in watts.
    pub avg_power: T,
    pub loss_prob: T,
}

/// Birth-death rates induced by a policy.
pub fn derive_rates<T: Scalar>(
    policy: &Policy<T>,
    traffic: &TrafficModel<T>,
    channel: &ChannelModel<T>,
) -> Result<BirthDeathRates<T>> {
    policy.check_states(channel)?;
    let q = policy.buffer();
    let eta = channel.eta();
    let alpha = traffic.alpha();
    let weighted = |row: &[T], hold: bool| -> T {
        row.iter()
            .zip(eta)
            .map(|(&p, &e)| if hold { e * (T::one() - p) } else { e * p })
            .sum()
    };
    let lambda = (0..q).map(|i| alpha * weighted(policy.g().row(i), true)).collect();
    let mu = (1..=q)
        .map(|i| (T::one() - alpha) * weighted(policy.f().row(i), false))
        .collect();
    Ok(BirthDeathRates { lambda, mu })
}

/// Limiting distribution of the chain started from an empty queue.
///
/// When every rate is positive this is the usual product form. Otherwise the
/// chain started at 0 climbs until the first state `k` with no up-rate and
/// settles on the closed class `[lo, k]`, where `lo` is the highest state at
/// or below `k` that cannot be left downwards. Mass outside that class is 0.
pub fn steady_state<T: Scalar>(rates: &BirthDeathRates<T>) -> SteadyState<T> {
    let q = rates.buffer();
    let top = (0..q).find(|&i| rates.up(i) <= T::zero()).unwrap_or(q);
    let bottom = (1..=top).rev().find(|&i| rates.down(i) <= T::zero()).unwrap_or(0);

    let mut weights = vec![T::zero(); q + 1];
    weights[bottom] = T::one();
    let ceiling = T::max_value().sqrt();
    for i in bottom..top {
        let next = weights[i] * (rates.up(i) / rates.down(i + 1));
        weights[i + 1] = next;
        if next > ceiling {
            // rescale to keep the running products finite for large buffers
            for w in &mut weights[bottom..=i + 1] {
                *w = *w / next;
            }
        }
    }
    let total: T = weights.iter().copied().sum();
    SteadyState {
        pi: weights.into_iter().map(|w| w / total).collect(),
    }
}

/// Average delay in slots by Little's law: mean queue over arrival rate.
pub fn average_delay<T: Scalar>(ss: &SteadyState<T>, traffic: &TrafficModel<T>) -> T {
    ss.mean_queue() / traffic.alpha()
}

pub fn average_power<T: Scalar>(
    policy: &Policy<T>,
    ss: &SteadyState<T>,
    traffic: &TrafficModel<T>,
    channel: &ChannelModel<T>,
) -> Result<T> {
    policy.check_states(channel)?;
    if ss.buffer() != policy.buffer() {
        return Err(Error::InvalidInstance(format!(
            "distribution covers buffer {} but policy covers {}",
            ss.buffer(),
            policy.buffer()
        )));
    }
    let alpha = traffic.alpha();
    let pi = ss.probs();
    let mut total = T::zero();
    for (m, (&eta, &power)) in channel.eta().iter().zip(channel.power()).enumerate() {
        let with_arrival: T = pi.iter().enumerate().map(|(i, &p)| p * policy.g()[(i, m)]).sum();
        let without: T = pi
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &p)| p * policy.f()[(i, m)])
            .sum();
        total = total + (alpha * with_arrival + (T::one() - alpha) * without) * eta * power;
    }
    Ok(total)
}

/// Probability that an arrival finds the buffer full.
pub fn packet_loss<T: Scalar>(ss: &SteadyState<T>, traffic: &TrafficModel<T>) -> T {
    traffic.alpha() * ss.probs()[ss.buffer()]
}

/// Smallest budget that affords transmitting in every slot.
pub fn power_threshold<T: Scalar>(traffic: &TrafficModel<T>, channel: &ChannelModel<T>) -> T {
    let mean: T = channel.eta().iter().zip(channel.power()).map(|(&e, &p)| e * p).sum();
    traffic.alpha() * mean
}

/// Runs the full pipeline policy -> rates -> steady state -> metrics.
pub fn evaluate<T: Scalar>(policy: &Policy<T>, inst: &SystemInstance<T>) -> Result<(SteadyState<T>, Metrics<T>)> {
    if policy.buffer() != inst.buffer() {
        return Err(Error::InvalidInstance(format!(
            "policy covers buffer {} but the instance has Q = {}",
            policy.buffer(),
            inst.buffer()
        )));
    }
    let rates = derive_rates(policy, &inst.traffic, &inst.channel)?;
    let ss = steady_state(&rates);
    let metrics = Metrics {
        avg_delay: average_delay(&ss, &inst.traffic),
        avg_power: average_power(policy, &ss, &inst.traffic, &inst.channel)?,
        loss_prob: packet_loss(&ss, &inst.traffic),
    };
    Ok((ss, metrics))
}
