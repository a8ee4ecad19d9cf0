//! 192-bit reference arithmetic for oracle values.
#![allow(dead_code)]

use astro_float::{BigFloat, Consts, Radix, RoundingMode};

const P: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

pub struct Hp {
    cc: Consts,
}

impl Hp {
    pub fn new() -> Self {
        Hp {
            cc: Consts::new().expect("constant cache"),
        }
    }

    pub fn num(&self, x: f64) -> BigFloat {
        BigFloat::from_f64(x, P)
    }

    pub fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, P, RM)
    }

    pub fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, P, RM)
    }

    pub fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, P, RM)
    }

    pub fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, P, RM)
    }

    pub fn sqrt(&self, a: &BigFloat) -> BigFloat {
        a.sqrt(P, RM)
    }

    pub fn exp(&mut self, a: &BigFloat) -> BigFloat {
        a.exp(P, RM, &mut self.cc)
    }

    pub fn sinh(&mut self, a: &BigFloat) -> BigFloat {
        a.sinh(P, RM, &mut self.cc)
    }

    pub fn cosh(&mut self, a: &BigFloat) -> BigFloat {
        a.cosh(P, RM, &mut self.cc)
    }

    pub fn tanh(&mut self, a: &BigFloat) -> BigFloat {
        a.tanh(P, RM, &mut self.cc)
    }

    pub fn acosh(&mut self, a: &BigFloat) -> BigFloat {
        a.acosh(P, RM, &mut self.cc)
    }

    pub fn f64(&mut self, a: &BigFloat) -> f64 {
        let s = a
            .format(Radix::Dec, RM, &mut self.cc)
            .expect("decimal format");
        s.parse().unwrap_or_else(|_| panic!("cannot parse {s}"))
    }
}

/// |got − want| ≤ rel·max(|want|, floor)
pub fn close(got: f64, want: f64, rel: f64, floor: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(floor)
}
