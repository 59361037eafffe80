//! Closed-form transfer times. Sizes are bytes, rates are Mbps (1e6 bit/s),
//! results are seconds.

use crate::error::{Error, Result};

/// Megabits in `model_bytes`.
pub fn megabits(model_bytes: u64) -> f64 {
    8.0 * model_bytes as f64 / 1e6
}

fn positive_rate(name: &str, mbps: f64) -> Result<()> {
    if mbps > 0.0 && mbps.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be a positive finite rate, got {mbps}")))
    }
}

/// Intra-LAN time for one parameter-server exchange: every worker pushes its
/// model to the aggregator and pulls the result back, `2 |w| / BL_ps`.
pub fn comm_time_ps(model_bytes: u64, bl_ps_mbps: f64) -> Result<f64> {
    positive_rate("bl_ps_mbps", bl_ps_mbps)?;
    Ok(2.0 * megabits(model_bytes) / bl_ps_mbps)
}

/// Coefficient of `|w| / BL` for a ring all-reduce over `nc_s` members on a
/// half-duplex medium: `4 (n - 1) / n`, twice the full-duplex cost.
pub fn ring_coefficient(nc_s: usize) -> f64 {
    4.0 * (nc_s as f64 - 1.0) / nc_s as f64
}

/// Intra-LAN time for one ring all-reduce, `4 (n-1)/n * |w| / BL_ring`.
pub fn comm_time_ring(model_bytes: u64, bl_ring_mbps: f64, nc_s: usize) -> Result<f64> {
    if nc_s < 2 {
        return Err(Error::TooFewMembers { needed: 2, got: nc_s });
    }
    positive_rate("bl_ring_mbps", bl_ring_mbps)?;
    Ok(ring_coefficient(nc_s) * megabits(model_bytes) / bl_ring_mbps)
}

/// One-way WAN transfer of a model, `|w| / BW`.
pub fn wan_transfer_time(model_bytes: u64, bw_mbps: f64) -> Result<f64> {
    positive_rate("bw_mbps", bw_mbps)?;
    Ok(megabits(model_bytes) / bw_mbps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ps_examples() {
        assert_eq!(comm_time_ps(25_000_000, 20.0).unwrap(), 20.0);
        assert_eq!(comm_time_ps(0, 20.0).unwrap(), 0.0);
        let a = comm_time_ps(123_457, 3.0).unwrap();
        let b = comm_time_ps(123_457, 6.0).unwrap();
        assert_eq!(a, 2.0 * b);
        assert!(comm_time_ps(1, 0.0).is_err());
        assert!(comm_time_ps(1, -2.0).is_err());
    }

    #[test]
    fn ring_examples() {
        let t = comm_time_ring(25_000_000, 62.0, 8).unwrap();
        assert!((t - 4.0 * 7.0 / 8.0 * 200.0 / 62.0).abs() < 1e-12);
        assert!((t - 11.29).abs() < 5e-3);
        assert_eq!(ring_coefficient(2), 2.0);
        assert_eq!(
            comm_time_ring(777, 9.0, 2).unwrap(),
            comm_time_ps(777, 9.0).unwrap()
        );
        assert!(matches!(
            comm_time_ring(1, 1.0, 1),
            Err(Error::TooFewMembers { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn ring_monotone_in_members() {
        let times: Vec<f64> = (2..=20)
            .map(|n| comm_time_ring(1_000_000, 10.0, n).unwrap())
            .collect();
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn ring_large_n_limit() {
        let limit = 4.0 * megabits(5_000_000) / 30.0;
        let t = comm_time_ring(5_000_000, 30.0, 1000).unwrap();
        assert!((limit - t) / limit < 0.005);
    }

    #[test]
    fn wan_examples() {
        assert_eq!(wan_transfer_time(25_000_000, 2.0).unwrap(), 100.0);
        assert_eq!(wan_transfer_time(0, 2.0).unwrap(), 0.0);
        assert_eq!(
            wan_transfer_time(9_999, 1.0).unwrap(),
            2.0 * wan_transfer_time(9_999, 2.0).unwrap()
        );
        assert!(wan_transfer_time(1, 0.0).is_err());
    }
}
