//! LCC-HVDC P-f droop controller and the generator effective droop.
//!
//! The controller turns the frequency deviations seen at the receiving and
//! sending ends of a link into a rectifier power order: each channel is
//! gated by a dead zone (latched once exceeded), a selection stage passes
//! the earlier-responding channel and locks out the other, the droop law is
//! applied, and the order is clamped to its limits. All operations are pure
//! given explicit state in and out; a controller instance may be sent
//! between threads but is owned by one simulation at a time.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DroopError {
    #[error("DC voltage must be positive for current-order conversion")]
    ZeroDcVoltage,
    #[error("invalid controller bounds: require min ≤ nominal ≤ max")]
    InvalidBounds,
}

/// Which droop channel the selection stage has committed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LockState {
    #[default]
    Unlocked,
    LockedToRe,
    LockedToSe,
}

/// A clamped rectifier power order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOrder {
    pub power_pu: f64,
    pub saturated: bool,
}

/// Effective generator droop: governor droop plus damping.
pub fn effective_gen_droop(governor_droop: f64, damping: f64) -> f64 {
    governor_droop + damping
}

/// Dead-zone gate with latching. Once the deviation magnitude has reached
/// the threshold the channel stays active until an operator reset, so the
/// droop does not chatter when the deviation re-enters the band.
pub fn apply_dead_zone(omega_dev_pu: f64, threshold_pu: f64, latched: bool) -> (f64, bool) {
    if latched || omega_dev_pu.abs() >= threshold_pu {
        (omega_dev_pu, true)
    } else {
        (0.0, false)
    }
}

/// Passes the earlier-responding droop correction and locks out the other
/// channel. A simultaneous first activation resolves to the RE channel.
pub fn select_and_lock(re_delta_pu: f64, se_delta_pu: f64, lock: LockState) -> (f64, LockState) {
    match lock {
        LockState::LockedToRe => (re_delta_pu, LockState::LockedToRe),
        LockState::LockedToSe => (se_delta_pu, LockState::LockedToSe),
        LockState::Unlocked => {
            if re_delta_pu != 0.0 {
                (re_delta_pu, LockState::LockedToRe)
            } else if se_delta_pu != 0.0 {
                (se_delta_pu, LockState::LockedToSe)
            } else {
                (0.0, LockState::Unlocked)
            }
        }
    }
}

/// Converts a clamped power order (MW) into a rectifier current order (kA).
pub fn current_order_ka(p_ord_mw: f64, u_d_kv: f64) -> Result<f64, DroopError> {
    if u_d_kv <= 0.0 {
        return Err(DroopError::ZeroDcVoltage);
    }
    Ok(p_ord_mw / u_d_kv)
}

/// P-f droop controller of one LCC link, in the rectifier power-order frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LccDroopController {
    /// Droop gain on the receiving-end frequency (p.u.).
    pub k_re: f64,
    /// Droop gain on the sending-end frequency (p.u.).
    pub k_se: f64,
    /// Nominal power order P_dN (p.u.).
    pub nominal_power_pu: f64,
    /// Order limits, min ≤ nominal ≤ max.
    pub order_min_pu: f64,
    pub order_max_pu: f64,
    /// Dead-zone threshold on p.u. frequency deviation; 0 disables the band.
    pub dead_zone_pu: f64,
    pub lock: LockState,
    pub re_latched: bool,
    pub se_latched: bool,
}

impl LccDroopController {
    pub fn new(
        k_re: f64,
        k_se: f64,
        nominal_power_pu: f64,
        order_min_pu: f64,
        order_max_pu: f64,
        dead_zone_pu: f64,
    ) -> Result<Self, DroopError> {
        if !(order_min_pu <= nominal_power_pu && nominal_power_pu <= order_max_pu) {
            return Err(DroopError::InvalidBounds);
        }
        Ok(Self {
            k_re,
            k_se,
            nominal_power_pu,
            order_min_pu,
            order_max_pu,
            dead_zone_pu,
            lock: LockState::Unlocked,
            re_latched: false,
            se_latched: false,
        })
    }

    /// Full droop evaluation: dead zone per channel, selection and lock,
    /// droop law, clamp. Returns the order and the successor state.
    pub fn power_order(
        &self,
        omega_re_dev_pu: f64,
        omega_se_dev_pu: f64,
    ) -> (PowerOrder, LccDroopController) {
        let (re_gated, re_latched) =
            apply_dead_zone(omega_re_dev_pu, self.dead_zone_pu, self.re_latched);
        let (se_gated, se_latched) =
            apply_dead_zone(omega_se_dev_pu, self.dead_zone_pu, self.se_latched);
        let re_delta = -self.k_re * re_gated;
        let se_delta = self.k_se * se_gated;
        let (delta, lock) = select_and_lock(re_delta, se_delta, self.lock);
        let raw = self.nominal_power_pu + delta;
        let power = raw.clamp(self.order_min_pu, self.order_max_pu);
        (
            PowerOrder {
                power_pu: power,
                saturated: power != raw,
            },
            LccDroopController {
                lock,
                re_latched,
                se_latched,
                ..*self
            },
        )
    }

    /// Order only, without advancing latch or lock state. Used inside
    /// integrator stages where discrete state is frozen per step.
    pub fn peek_order(&self, omega_re_dev_pu: f64, omega_se_dev_pu: f64) -> PowerOrder {
        self.power_order(omega_re_dev_pu, omega_se_dev_pu).0
    }

    /// Operator reset: clears latches and the channel lock.
    pub fn reset(&mut self) {
        self.lock = LockState::Unlocked;
        self.re_latched = false;
        self.se_latched = false;
    }
}
