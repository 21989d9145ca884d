use super::{Ephemeris, Epoch, EpochState, FrameError};
use crate::constants::SPEED_OF_LIGHT_KM_S;

const TOLERANCE_S: f64 = 1e-13;
const MAX_ITER: usize = 20;
/// Lookback the transmitter ephemeris must cover before the receive time.
const REQUIRED_LOOKBACK_S: f64 = 3.0;

#[derive(Clone, Copy, Debug)]
pub struct LightTimeSolution {
    pub t_tx: Epoch,
    pub tx: EpochState,
    /// `t_rx - t_tx`, s.
    pub delay_s: f64,
    /// Final `|t_rx - t_tx - range / c|`, s.
    pub residual_s: f64,
    pub iterations: usize,
}

/// Solves `t_rx - t_tx = |r_rx(t_rx) - r_tx(t_tx)| / c` by fixed-point
/// iteration starting from `t_tx = t_rx`.
pub fn solve_light_time(
    rx: &EpochState,
    tx_ephemeris: &dyn Ephemeris,
) -> Result<LightTimeSolution, FrameError> {
    if tx_ephemeris.frame() != rx.frame {
        return Err(FrameError::FrameMismatch {
            expected: rx.frame,
            got: tx_ephemeris.frame(),
        });
    }
    if let Some((start, end)) = tx_ephemeris.coverage() {
        let need_from = rx.epoch - REQUIRED_LOOKBACK_S;
        if start > need_from || end < rx.epoch {
            let (from, to) = if start > need_from {
                (need_from, start.min(rx.epoch))
            } else {
                (end.max(need_from), rx.epoch)
            };
            return Err(FrameError::EphemerisGap {
                from_s: from.seconds(),
                to_s: to.seconds(),
            });
        }
    }

    let range_s = |delay: f64| -> Result<(EpochState, f64), FrameError> {
        let tx = tx_ephemeris.state_at(rx.epoch - delay)?;
        Ok((tx, (rx.position - tx.position).norm() / SPEED_OF_LIGHT_KM_S))
    };
    let mut delay = 0.0;
    let mut step = f64::INFINITY;
    for iteration in 1..=MAX_ITER {
        let (_, next) = range_s(delay)?;
        step = (next - delay).abs();
        delay = next;
        if step <= TOLERANCE_S {
            let (tx, check) = range_s(delay)?;
            return Ok(LightTimeSolution {
                t_tx: rx.epoch - delay,
                tx,
                delay_s: delay,
                residual_s: (check - delay).abs(),
                iterations: iteration,
            });
        }
    }
    Err(FrameError::LightTimeNotConverged { residual_s: step })
}
