//! Procedural grid city.
//!
//! Key points sit on a lattice with spacing `neighborhood_size`; each gets a
//! uniform location value. Houses take the bilinear blend of the four
//! surrounding key points. Construction values scale with location, and the
//! owner value differs from the MREE value by a signed error of at most half
//! the configured error range.

use rand::Rng;

use crate::error::ConfigError;
use crate::repp::{Geometry, HouseNode, MarketState, Money};
use crate::rng::{substream, SimRng, Substream};

#[derive(Debug, Clone, PartialEq)]
pub struct CityConfig {
    /// Houses per city edge.
    pub side: usize,
    /// Key-point lattice spacing, in houses.
    pub neighborhood_size: usize,
    pub lambda_min: Money,
    pub lambda_max: Money,
    pub x_min: Money,
    pub x_max: Money,
    /// MREE absolute error range `E`.
    pub error_range: Money,
    /// Probability that a house does not opt in.
    pub opt_out_fraction: f64,
    pub seed: u64,
}

impl Default for CityConfig {
    fn default() -> Self {
        Self {
            side: 1001,
            neighborhood_size: 10,
            lambda_min: 30_000.0,
            lambda_max: 230_000.0,
            x_min: 100_000.0,
            x_max: 600_000.0,
            error_range: 10_000.0,
            opt_out_fraction: 0.0,
            seed: 0,
        }
    }
}

impl CityConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.side < 2 {
            return Err(ConfigError::new(
                "side",
                format!("must be ≥ 2, got {}", self.side),
            ));
        }
        if self.side * self.side > u32::MAX as usize {
            return Err(ConfigError::new("side", "too many houses for 32-bit ids"));
        }
        if self.neighborhood_size < 1 {
            return Err(ConfigError::new("neighborhood_size", "must be ≥ 1"));
        }
        if !(self.lambda_min > 0.0
            && self.lambda_min < self.lambda_max
            && self.lambda_max.is_finite())
        {
            return Err(ConfigError::new(
                "lambda_min",
                format!(
                    "need 0 < lambda_min < lambda_max, got {} and {}",
                    self.lambda_min, self.lambda_max
                ),
            ));
        }
        if !(self.x_min > 0.0 && self.x_min < self.x_max && self.x_max.is_finite()) {
            return Err(ConfigError::new(
                "x_min",
                format!(
                    "need 0 < x_min < x_max, got {} and {}",
                    self.x_min, self.x_max
                ),
            ));
        }
        if !(self.error_range >= 0.0 && self.error_range < 2.0 * self.x_min) {
            return Err(ConfigError::new(
                "error_range",
                format!(
                    "must be in [0, 2·x_min) so owner values stay positive, got {}",
                    self.error_range
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.opt_out_fraction) {
            return Err(ConfigError::new(
                "opt_out_fraction",
                format!("must be in [0, 1], got {}", self.opt_out_fraction),
            ));
        }
        Ok(())
    }
}

/// Location values at the key points, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyGrid {
    pub spacing: usize,
    /// Key points per axis.
    pub points: usize,
    pub values: Vec<Money>,
}

impl KeyGrid {
    pub fn value(&self, row: usize, col: usize) -> Money {
        self.values[row * self.points + col]
    }
}

fn uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Key points per axis: enough to reach or pass the last house.
pub fn key_points_per_axis(side: usize, spacing: usize) -> usize {
    (side - 1).div_ceil(spacing) + 1
}

pub fn generate_key_grid(config: &CityConfig, rng: &mut SimRng) -> KeyGrid {
    let points = key_points_per_axis(config.side, config.neighborhood_size);
    let values = (0..points * points)
        .map(|_| uniform(rng, config.lambda_min, config.lambda_max))
        .collect();
    KeyGrid {
        spacing: config.neighborhood_size,
        points,
        values,
    }
}

/// Bilinear blend of the four key points around `(x, y)`. Positions past
/// the last key cell use the last cell.
pub fn interpolate_location(grid: &KeyGrid, (x, y): (f64, f64)) -> Money {
    let s = grid.spacing as f64;
    let last_cell = grid.points - 2;
    let cell = |p: f64| ((p / s).floor().max(0.0) as usize).min(last_cell);
    let (cx, cy) = (cell(x), cell(y));
    let fx = (x - cx as f64 * s) / s;
    let fy = (y - cy as f64 * s) / s;
    let v00 = grid.value(cy, cx);
    let v01 = grid.value(cy, cx + 1);
    let v10 = grid.value(cy + 1, cx);
    let v11 = grid.value(cy + 1, cx + 1);
    let lerp = |a: f64, b: f64, t: f64| (1.0 - t) * a + t * b;
    lerp(lerp(v00, v01, fx), lerp(v10, v11, fx), fy)
}

/// Draws `(v, u)` for a house with location value `lambda`.
///
/// Draw order per house is fixed (x, error magnitude, error sign) and does
/// not depend on the error range, so cities that differ only in `E` share
/// every draw and their errors scale exactly with `E`.
pub fn assign_construction_values(
    lambda: Money,
    config: &CityConfig,
    rng: &mut SimRng,
) -> (Money, Money) {
    let x = uniform(rng, config.x_min, config.x_max);
    let v = construction_value(x, lambda, config.lambda_min);
    let epsilon = config.error_range * rng.random::<f64>();
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    (v, v + sign * epsilon / 2.0)
}

/// `v = x · (1 + (λ − λ_min) / (10 · λ_min))`.
pub fn construction_value(x: Money, lambda: Money, lambda_min: Money) -> Money {
    x * (1.0 + (lambda - lambda_min) / (lambda_min * 10.0))
}

/// A generated city.
#[derive(Debug, Clone, PartialEq)]
pub struct City {
    pub config: CityConfig,
    pub key_grid: KeyGrid,
    pub houses: Vec<HouseNode>,
    pub initial_state: MarketState,
}

impl City {
    pub fn side(&self) -> usize {
        self.config.side
    }

    pub fn geometry(&self) -> Geometry {
        Geometry::Grid {
            side: self.config.side,
        }
    }

    pub fn len(&self) -> usize {
        self.houses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.houses.is_empty()
    }
}

/// Builds the city from its config. Three substreams of the seed are used:
/// key grid, construction/error, and opt-in.
pub fn generate_city(config: &CityConfig) -> Result<City, ConfigError> {
    config.validate()?;
    let side = config.side;
    let key_grid = generate_key_grid(config, &mut substream(config.seed, Substream::KeyGrid));
    let mut construction = substream(config.seed, Substream::Construction);
    let mut opt = substream(config.seed, Substream::OptIn);

    let mut houses = Vec::with_capacity(side * side);
    let mut lambda = Vec::with_capacity(side * side);
    for row in 0..side {
        for col in 0..side {
            let position = (col as f64, row as f64);
            let l = interpolate_location(&key_grid, position);
            let (v, u) = assign_construction_values(l, config, &mut construction);
            let opt_in = opt.random::<f64>() >= config.opt_out_fraction;
            houses.push(HouseNode {
                v,
                u,
                opt_in,
                position,
            });
            lambda.push(l);
        }
    }
    Ok(City {
        config: config.clone(),
        key_grid,
        houses,
        initial_state: MarketState::with_zero_rho(lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(side: usize, spacing: usize) -> CityConfig {
        CityConfig {
            side,
            neighborhood_size: spacing,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn key_point_counts() {
        assert_eq!(key_points_per_axis(1001, 10), 101);
        assert_eq!(key_points_per_axis(1001, 15), 68);
        assert_eq!(key_points_per_axis(1001, 25), 41);
        assert_eq!(key_points_per_axis(101, 10), 11);
    }

    #[test]
    fn key_values_in_range() {
        let cfg = small(1001, 15);
        let grid = generate_key_grid(&cfg, &mut substream(1, Substream::KeyGrid));
        assert_eq!(grid.values.len(), 68 * 68);
        assert!(grid
            .values
            .iter()
            .all(|&v| (30_000.0..=230_000.0).contains(&v)));
    }

    #[test]
    fn interpolation_exact_at_keys() {
        let cfg = small(51, 5);
        let grid = generate_key_grid(&cfg, &mut substream(9, Substream::KeyGrid));
        for r in 0..grid.points {
            for c in 0..grid.points {
                let at = interpolate_location(&grid, ((c * 5) as f64, (r * 5) as f64));
                assert_eq!(at, grid.value(r, c));
            }
        }
    }

    #[test]
    fn interpolation_cell_center() {
        let grid = KeyGrid {
            spacing: 10,
            points: 2,
            values: vec![30_000.0, 50_000.0, 30_000.0, 50_000.0],
        };
        assert_eq!(interpolate_location(&grid, (5.0, 5.0)), 40_000.0);
    }

    #[test]
    fn interpolation_past_last_key_uses_last_cell() {
        // spacing 15 on side 1001: last house x = 1000 lies inside [990, 1005]
        let grid = KeyGrid {
            spacing: 15,
            points: 3,
            values: vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        };
        let v = interpolate_location(&grid, (25.0, 0.0));
        assert!((v - 10.0 / 15.0).abs() < 1e-12);
        assert_eq!(interpolate_location(&grid, (30.0, 30.0)), 1.0);
    }

    #[test]
    fn construction_scaling() {
        assert_eq!(construction_value(200_000.0, 30_000.0, 30_000.0), 200_000.0);
        let v = construction_value(100_000.0, 230_000.0, 30_000.0);
        assert!((v - 166_666.666_666_666_7).abs() < 1e-6);
    }

    #[test]
    fn zero_error_gives_exact_owner_value() {
        let cfg = CityConfig {
            error_range: 0.0,
            ..small(10, 3)
        };
        let mut rng = substream(5, Substream::Construction);
        for _ in 0..100 {
            let (v, u) = assign_construction_values(100_000.0, &cfg, &mut rng);
            assert_eq!(u, v);
        }
    }

    #[test]
    fn errors_scale_linearly_with_range() {
        let base = small(10, 3);
        let mut a = substream(5, Substream::Construction);
        let mut b = substream(5, Substream::Construction);
        let ca = CityConfig {
            error_range: 5_000.0,
            ..base.clone()
        };
        let cb = CityConfig {
            error_range: 50_000.0,
            ..base
        };
        for _ in 0..50 {
            let (va, ua) = assign_construction_values(80_000.0, &ca, &mut a);
            let (vb, ub) = assign_construction_values(80_000.0, &cb, &mut b);
            assert_eq!(va, vb);
            assert!(((ub - vb) - 10.0 * (ua - va)).abs() < 1e-6);
        }
    }

    #[test]
    fn full_scale_house_count() {
        // 1001 × 1001 without generating a million houses
        let cfg = small(1001, 10);
        cfg.validate().unwrap();
        assert_eq!(cfg.side * cfg.side, 1_002_001);
    }

    #[test]
    fn opt_out_zero_means_all_opted_in() {
        let city = generate_city(&small(21, 5)).unwrap();
        assert!(city.houses.iter().all(|h| h.opt_in));
    }

    #[test]
    fn rejects_bad_config_naming_key() {
        let err = generate_city(&CityConfig {
            side: 1,
            ..Default::default()
        })
        .unwrap_err();
        assert_eq!(err.key, "side");
        let err = generate_city(&CityConfig {
            opt_out_fraction: 1.5,
            ..small(5, 2)
        })
        .unwrap_err();
        assert_eq!(err.key, "opt_out_fraction");
        let err = generate_city(&CityConfig {
            error_range: -1.0,
            ..small(5, 2)
        })
        .unwrap_err();
        assert_eq!(err.key, "error_range");
        let err = generate_city(&CityConfig {
            neighborhood_size: 0,
            ..small(5, 2)
        })
        .unwrap_err();
        assert_eq!(err.key, "neighborhood_size");
    }
}
