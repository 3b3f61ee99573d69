use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which kind of misprediction the bound speaks about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    FalseNegative,
    FalsePositive,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::FalseNegative => "false_negative",
            Direction::FalsePositive => "false_positive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fn" | "false_negative" => Ok(Direction::FalseNegative),
            "fp" | "false_positive" => Ok(Direction::FalsePositive),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction `{other}` (expected fn or fp)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    /// Number of rule features.
    pub m: usize,
    /// Number of supporters.
    pub n: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub direction: Direction,
}

impl BoundQuery {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument(
                "supporter count n must be at least 1".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument("epsilon must be finite".into()));
        }
        Ok(())
    }
}

/// The concentration radical `sqrt(((m+1)/2) ln(1 / (1 − sqrt(1 − δ^{1/n}))))`.
///
/// `1 − δ^{1/n}` is formed as `−expm1(ln δ / n)` and the outer log as `−ln_1p(−s)`,
/// which keeps full relative precision when `n` is large.
pub fn radical(m: usize, n: u64, delta: f64) -> Result<f64> {
    let one_minus_root = -((delta.ln() / n as f64).exp_m1());
    let s = one_minus_root.sqrt();
    if !(s < 1.0) || !(s >= 0.0) {
        return Err(Error::Domain(format!(
            "log argument out of range for delta={delta}, n={n}"
        )));
    }
    let log_term = -(-s).ln_1p();
    Ok(((m as f64 + 1.0) / 2.0 * log_term).sqrt())
}

/// Lower bound on μ for a false negative, or upper bound on μ for a false positive.
pub fn theorem_bound(q: &BoundQuery) -> Result<f64> {
    q.validate()?;
    let r = radical(q.m, q.n, q.delta)?;
    Ok(match q.direction {
        Direction::FalseNegative => 0.5 + q.epsilon / 2.0 - r,
        Direction::FalsePositive => 0.5 - q.epsilon / 2.0 + r,
    })
}

/// CSV table with one row per query.
pub fn bound_table(queries: &[BoundQuery]) -> Result<String> {
    let mut out = String::from("m,n,delta,epsilon,direction,bound\n");
    for q in queries {
        let b = theorem_bound(q)?;
        out.push_str(&format!(
            "{},{},{},{},{},{:.10}\n",
            q.m,
            q.n,
            q.delta,
            q.epsilon,
            q.direction.name(),
            b
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fn_query(m: usize, n: u64, delta: f64, epsilon: f64) -> BoundQuery {
        BoundQuery {
            m,
            n,
            delta,
            epsilon,
            direction: Direction::FalseNegative,
        }
    }

    // 50-digit evaluations of the closed form, frozen.
    #[allow(clippy::excessive_precision)]
    const ORACLE: [(usize, u64, f64, f64, f64); 5] = [
        (10, 100, 0.05, 0.2, -0.418_190_064_762_042_5),
        (10, 1_000_000, 0.05, 0.2, 0.502_389_848_148_080_7),
        (10, 1_000_000_000, 0.05, 0.2, 0.582_649_458_362_343_2),
        (50, 1000, 0.1, 0.3, -0.469_471_693_526_117_03),
        (3, 10, 0.5, 0.0, -0.273_896_108_392_787_66),
    ];

    #[test]
    fn matches_high_precision_oracle() {
        for (m, n, d, e, want) in ORACLE {
            let got = theorem_bound(&fn_query(m, n, d, e)).unwrap();
            assert!(
                (got - want).abs() < 1e-9,
                "({m},{n},{d},{e}): {got} vs {want}"
            );
        }
    }

    #[test]
    fn fp_mirrors_fn() {
        for (m, n, d, e, _) in ORACLE {
            let f = theorem_bound(&fn_query(m, n, d, e)).unwrap();
            let p = theorem_bound(&BoundQuery {
                direction: Direction::FalsePositive,
                ..fn_query(m, n, d, e)
            })
            .unwrap();
            assert!((f + p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_over_grid() {
        let ns: Vec<u64> = (0..=9).map(|p| 10u64.pow(p)).collect();
        for m in [1usize, 5, 10, 50] {
            for delta in [0.01, 0.05, 0.2] {
                let bs: Vec<f64> = ns
                    .iter()
                    .map(|&n| theorem_bound(&fn_query(m, n, delta, 0.2)).unwrap())
                    .collect();
                assert!(bs.windows(2).all(|w| w[1] > w[0]), "n: {bs:?}");
                let rs: Vec<f64> = ns.iter().map(|&n| radical(m, n, delta).unwrap()).collect();
                assert!(rs.windows(2).all(|w| w[1] < w[0]) && rs.iter().all(|r| *r > 0.0));
            }
            let es: Vec<f64> = [-0.5, 0.0, 0.1, 0.5]
                .iter()
                .map(|&e| theorem_bound(&fn_query(m, 1000, 0.05, e)).unwrap())
                .collect();
            assert!(es.windows(2).all(|w| w[1] > w[0]));
        }
        let ms: Vec<f64> = [1usize, 2, 10, 100]
            .iter()
            .map(|&m| theorem_bound(&fn_query(m, 1000, 0.05, 0.2)).unwrap())
            .collect();
        assert!(ms.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_queries() {
        assert!(theorem_bound(&fn_query(10, 0, 0.05, 0.2)).is_err());
        assert!(theorem_bound(&fn_query(10, 5, 0.0, 0.2)).is_err());
        assert!(theorem_bound(&fn_query(10, 5, 1.0, 0.2)).is_err());
        assert!(theorem_bound(&fn_query(10, 5, 0.5, f64::NAN)).is_err());
    }

    #[test]
    fn table_has_header_and_rows() {
        let t = bound_table(&[fn_query(10, 1_000_000, 0.05, 0.2)]).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].ends_with("0.5023898481"));
    }
}
