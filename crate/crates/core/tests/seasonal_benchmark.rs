//! Seasonal model checks on the full-size synthetic benchmark.

use flightstat::carrier_origin::{CarrierOriginConfig, CarrierOriginModel};
use flightstat::ingest::{generate_synthetic, FlightRecord, SeasonCoefficients, SyntheticConfig};
use flightstat::numerics::evaluate;
use flightstat::seasonal::{Season, SeasonalModel};

/// Solves the normal equations for (intercept, dep, dist) by Gauss-Jordan
/// elimination with partial pivoting and returns (beta, standard errors).
fn oracle(rows: &[&FlightRecord]) -> ([f64; 3], [f64; 3]) {
    let mut g = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for r in rows {
        let x = [1.0, r.dep_delay.unwrap(), r.distance];
        let y = r.arr_delay.unwrap();
        for i in 0..3 {
            b[i] += x[i] * y;
            for j in 0..3 {
                g[i][j] += x[i] * x[j];
            }
        }
    }
    // augment with identity to get the inverse alongside the solution
    let mut a = [[0.0f64; 7]; 3];
    for i in 0..3 {
        a[i][..3].copy_from_slice(&g[i]);
        a[i][3] = b[i];
        a[i][4 + i] = 1.0;
    }
    for col in 0..3 {
        let p = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, p);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for i in 0..3 {
            if i != col {
                let f = a[i][col];
                let pivot_row = a[col];
                for (v, pv) in a[i].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    let beta = [a[0][3], a[1][3], a[2][3]];
    let sse: f64 = rows
        .iter()
        .map(|r| {
            let fit = beta[0] + beta[1] * r.dep_delay.unwrap() + beta[2] * r.distance;
            (r.arr_delay.unwrap() - fit).powi(2)
        })
        .sum();
    let sigma2 = sse / (rows.len() - 3) as f64;
    let se = [
        (sigma2 * a[0][4]).sqrt(),
        (sigma2 * a[1][5]).sqrt(),
        (sigma2 * a[2][6]).sqrt(),
    ];
    (beta, se)
}

fn usable(config: &SyntheticConfig, seed: u64) -> Vec<FlightRecord> {
    generate_synthetic(config, seed)
        .unwrap()
        .into_iter()
        .filter(FlightRecord::is_usable)
        .collect()
}

#[test]
fn per_season_fits_recover_configured_coefficients() {
    // without the time-of-day term the linear model is correctly specified
    let config = SyntheticConfig {
        nonlinearity: 0.0,
        ..SyntheticConfig::default()
    };
    let records = usable(&config, 42);
    let model = SeasonalModel::train(&records).unwrap();
    let mut slopes = Vec::new();
    for season in Season::ALL {
        let rows: Vec<&FlightRecord> = records
            .iter()
            .filter(|r| Season::of_month(r.month).unwrap() == season)
            .collect();
        let (beta, se) = oracle(&rows);
        let fit = model.season_model(season);
        assert!((fit.coefficients[0] - beta[1]).abs() <= 1e-9 * beta[1].abs().max(1.0));
        assert!((fit.coefficients[1] - beta[2]).abs() <= 1e-9 * beta[2].abs().max(1.0));
        assert!((fit.intercept.unwrap() - beta[0]).abs() <= 1e-7 * beta[0].abs().max(1.0));
        let SeasonCoefficients {
            dep_delay,
            distance,
        } = config.coefficients(season);
        assert!(
            (beta[1] - dep_delay).abs() <= 3.0 * se[1],
            "{season}: dep {} vs {dep_delay}",
            beta[1]
        );
        assert!(
            (beta[2] - distance).abs() <= 3.0 * se[2],
            "{season}: dist {} vs {distance}",
            beta[2]
        );
        assert!(
            beta[0].abs() <= 3.0 * se[0],
            "{season}: intercept {}",
            beta[0]
        );
        slopes.push(fit.coefficients[0]);
    }
    slopes.dedup();
    assert_eq!(slopes.len(), 4);
}

#[test]
fn seasonal_beats_pooled_linear_on_benchmark() {
    let records = usable(&SyntheticConfig::default(), 42);
    let y: Vec<f64> = records.iter().map(|r| r.arr_delay.unwrap()).collect();
    let seasonal = SeasonalModel::train(&records).unwrap();
    let pooled = CarrierOriginModel::train(&records, CarrierOriginConfig::default())
        .unwrap()
        .fallback;
    let seasonal_hat: Vec<f64> = records
        .iter()
        .map(|r| {
            seasonal
                .predict(r.month, r.dep_delay.unwrap(), r.distance)
                .unwrap()
        })
        .collect();
    let pooled_hat: Vec<f64> = records
        .iter()
        .map(|r| pooled.predict(&[r.dep_delay.unwrap(), r.distance]).unwrap())
        .collect();
    let s = evaluate(&y, &seasonal_hat, 3).unwrap();
    let p = evaluate(&y, &pooled_hat, 2).unwrap();
    assert!(
        s.adjusted_r_squared >= p.adjusted_r_squared,
        "{s:?} vs {p:?}"
    );
}

#[test]
fn constant_coefficients_make_seasons_agree_with_pooled() {
    let base = SyntheticConfig::default();
    let config = SyntheticConfig {
        seasons: [SeasonCoefficients {
            dep_delay: 0.9,
            distance: 0.004,
        }; 4],
        nonlinearity: 0.0,
        count: 20_000,
        ..base
    };
    let records = usable(&config, 7);
    let all: Vec<&FlightRecord> = records.iter().collect();
    let (pooled, _) = oracle(&all);
    let model = SeasonalModel::train(&records).unwrap();
    for season in Season::ALL {
        let rows: Vec<&FlightRecord> = records
            .iter()
            .filter(|r| Season::of_month(r.month).unwrap() == season)
            .collect();
        let (_, se) = oracle(&rows);
        let fit = model.season_model(season);
        assert!((fit.coefficients[0] - pooled[1]).abs() <= 3.0 * se[1]);
        assert!((fit.coefficients[1] - pooled[2]).abs() <= 3.0 * se[2]);
    }
}
