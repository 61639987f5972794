//! Scaled exponential integral `S(u) = e^u E1(u)` for complex `u`, principal branch.

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `e^u E1(u)` with the principal branch of `E1`.
pub fn scaled_e1(u: Complex64) -> Complex64 {
    assert!(u.norm() > 0.0, "E1 is singular at 0");
    let near_negative_axis = u.re < 0.0 && u.im.abs() <= 0.5 * u.re.abs();
    if u.norm() < 4.0 || near_negative_axis {
        u.exp() * e1_series(u)
    } else {
        continued_fraction(u)
    }
}

fn e1_series(u: Complex64) -> Complex64 {
    // E1(u) = -gamma - ln u - sum_{n>=1} (-u)^n / (n n!)
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::default();
    for n in 1..2000 {
        term *= -u / n as f64;
        let add = term / n as f64;
        sum += add;
        if add.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    -EULER_GAMMA - u.ln() - sum
}

/// Modified Lentz evaluation of
/// `e^u E1(u) = 1/(u+1 - 1/(u+3 - 4/(u+5 - ...)))`.
fn continued_fraction(u: Complex64) -> Complex64 {
    let tiny = 1e-300;
    let mut b = u + 1.0;
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = Complex64::new(1.0, 0.0) / b;
    let mut h = d;
    for n in 1..10_000 {
        let a = -((n * n) as f64);
        b += 2.0;
        d = a * d + b;
        if d.norm() < tiny {
            d = tiny.into();
        }
        c = b + a / c;
        if c.norm() < tiny {
            c = tiny.into();
        }
        d = Complex64::new(1.0, 0.0) / d;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_values() {
        let cases = [
            ((0.5, 0.3), (0.8138042447164815, -0.27527085176929017)),
            ((1e-3, -2e-3), (5.534552437659299, 1.095188513262333)),
            ((3.0, 4.0), (0.12221459566956695, -0.1284850018092138)),
            ((-5.0, 0.5), (-0.2567857208892701, -0.05365143917192886)),
            ((-20.0, 3.0), (-0.051491555836674155, -0.008183810191321564)),
            ((-1.5, -1.9), (-0.11411007397831689, 0.41748734004064114)),
            ((10.0, -30.0), (0.010747022737082989, 0.0293696347996412)),
            ((-40.0, -25.0), (-0.018171620872141084, 0.011659882037256899)),
            ((0.0, 15.0), (0.004334932977124716, -0.06610223786162127)),
            ((60.0, 1.0), (0.01639330248659996, -0.00026888057144241047)),
        ];
        for ((ur, ui), (sr, si)) in cases {
            let got = scaled_e1(Complex64::new(ur, ui));
            let want = Complex64::new(sr, si);
            assert!(
                (got - want).norm() <= 1e-13 * want.norm(),
                "u = {ur}{ui:+}i: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn series_and_fraction_agree_on_overlap() {
        for &(r, t) in &[(2.5, 0.3), (4.0, 1.2), (3.0, -2.0), (3.5, 2.5), (4.0, -0.2)] {
            let u = Complex64::from_polar(r, t);
            let a = u.exp() * e1_series(u);
            let b = continued_fraction(u);
            assert!((a - b).norm() < 1e-11 * b.norm(), "u = {u}: {a} vs {b}");
        }
    }
}
