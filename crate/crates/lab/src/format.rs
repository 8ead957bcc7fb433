//! Text renderings shared by the CSV and JSON writers.

use kelab_core::geometry::SpherePoint;
use kelab_core::stability::{ProductValuation, Valuation};
use kelab_core::Rational;

/// `p/q` with the denominator always present.
pub fn ratio(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn point(p: &SpherePoint) -> String {
    match p {
        SpherePoint::Infinity => "inf".into(),
        SpherePoint::Finite(z) if z.im == 0.0 => format!("{}", z.re),
        SpherePoint::Finite(z) => format!("{}{:+}i", z.re, z.im),
    }
}

/// `ord_p` for curves, `a=(..)` for toric valuations, with a `*scale` suffix unless the scale is one.
pub fn valuation(v: &Valuation) -> String {
    let (body, scale) = match v {
        Valuation::Curve(c) => (format!("ord[{}]", point(&c.point())), c.scale()),
        Valuation::Toric(t) => (
            format!("a({})", t.vector().iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")),
            t.scale(),
        ),
    };
    if scale.is_integer() && *scale.numer() == 1.into() {
        body
    } else {
        format!("{}*{}", ratio(scale), body)
    }
}

pub fn product(pv: &ProductValuation) -> String {
    pv.factors().iter().map(valuation).collect::<Vec<_>>().join(" x ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use kelab_core::stability::CurveValuation;

    #[test]
    fn ratios_keep_denominator() {
        assert_eq!(ratio(&Rational::from_integer(3.into())), "3/1");
        assert_eq!(ratio(&Rational::new((-6).into(), 8.into())), "-3/4");
    }

    #[test]
    fn valuation_labels() {
        let v = Valuation::Curve(CurveValuation::ord(SpherePoint::Infinity));
        assert_eq!(valuation(&v), "ord[inf]");
        let w = Valuation::Curve(CurveValuation::new(SpherePoint::finite(1.0, -2.0), Rational::new(1.into(), 2.into())).unwrap());
        assert_eq!(valuation(&w), "1/2*ord[1-2i]");
    }
}
