//! Numeric expressions accepted wherever the config takes a matrix entry or
//! coefficient, e.g. `"2^(1/3)"`, `"-(3 - sqrt(5))/2"`, `"1/36"`.
//!
//! Grammar: `+ - * / ^`, parentheses, unary minus, the constants `pi` and
//! `e`, and the functions `sqrt`, `cbrt`, `exp`, `ln`, `atan`, `tanh`.
//! All arithmetic is in `f64`; `^` is right-associative and binds tighter
//! than unary minus, so `-2^2 = -4`.

use std::iter::Peekable;
use std::str::Chars;

pub fn eval(text: &str) -> Result<f64, String> {
    let mut p = Parser {
        chars: text.chars().peekable(),
    };
    let v = p.expr().and_then(|v| {
        p.skip_ws();
        match p.chars.peek() {
            Some(c) => Err(format!("unexpected `{c}`")),
            None => Ok(v),
        }
    });
    match v {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(format!("`{text}` evaluates to {v}")),
        Err(m) => Err(format!("{m} in `{text}`")),
    }
}

struct Parser<'a> {
    chars: Peekable<Chars<'a>>,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.chars.next_if(|c| c.is_whitespace()).is_some() {}
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        self.chars.next_if_eq(&c).is_some()
    }

    fn expr(&mut self) -> Result<f64, String> {
        let mut v = self.term()?;
        loop {
            if self.eat('+') {
                v += self.term()?;
            } else if self.eat('-') {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        loop {
            if self.eat('*') {
                v *= self.unary()?;
            } else if self.eat('/') {
                v /= self.unary()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> Result<f64, String> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<f64, String> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(base.powf(exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<f64, String> {
        self.skip_ws();
        if self.eat('(') {
            let v = self.expr()?;
            if !self.eat(')') {
                return Err("missing `)`".into());
            }
            return Ok(v);
        }
        match self.chars.peek() {
            Some(c) if c.is_ascii_digit() || *c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let mut name = String::new();
                while let Some(c) = self.chars.next_if(|c| c.is_ascii_alphanumeric()) {
                    name.push(c);
                }
                match name.as_str() {
                    "pi" => Ok(std::f64::consts::PI),
                    "e" => Ok(std::f64::consts::E),
                    _ => {
                        let f: fn(f64) -> f64 = match name.as_str() {
                            "sqrt" => f64::sqrt,
                            "cbrt" => f64::cbrt,
                            "exp" => f64::exp,
                            "ln" => f64::ln,
                            "atan" => f64::atan,
                            "tanh" => f64::tanh,
                            _ => return Err(format!("unknown name `{name}`")),
                        };
                        if !self.eat('(') {
                            return Err(format!("`{name}` needs an argument in parentheses"));
                        }
                        let v = self.expr()?;
                        if !self.eat(')') {
                            return Err("missing `)`".into());
                        }
                        Ok(f(v))
                    }
                }
            }
            Some(c) => Err(format!("unexpected `{c}`")),
            None => Err("unexpected end of expression".into()),
        }
    }

    fn number(&mut self) -> Result<f64, String> {
        let mut s = String::new();
        while let Some(c) = self.chars.next_if(|c| c.is_ascii_digit() || *c == '.') {
            s.push(c);
        }
        if let Some(e) = self.chars.next_if(|c| *c == 'e' || *c == 'E') {
            s.push(e);
            if let Some(sign) = self.chars.next_if(|c| *c == '+' || *c == '-') {
                s.push(sign);
            }
            while let Some(c) = self.chars.next_if(|c| c.is_ascii_digit()) {
                s.push(c);
            }
        }
        s.parse().map_err(|_| format!("bad number `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::eval;

    #[test]
    fn cube_root_of_two() {
        assert_eq!(eval("2^(1/3)").unwrap(), 2f64.powf(1.0 / 3.0));
        assert_eq!(eval("cbrt(2)").unwrap(), 2f64.cbrt());
    }

    #[test]
    fn precedence_and_signs() {
        assert_eq!(eval("1 + 2 * 3").unwrap(), 7.0);
        assert_eq!(eval("-2^2").unwrap(), -4.0);
        assert_eq!(eval("2^3^2").unwrap(), 512.0);
        assert_eq!(
            eval("(-3 + sqrt(5)) / 2").unwrap(),
            (-3.0 + 5f64.sqrt()) / 2.0
        );
        assert_eq!(eval("1/36").unwrap(), 1.0 / 36.0);
        assert_eq!(eval("1.5e-3*2").unwrap(), 3e-3);
        assert_eq!(eval("pi/2").unwrap(), std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(eval("2 +").is_err());
        assert!(eval("foo(1)").is_err());
        assert!(eval("(1").is_err());
        assert!(eval("1/0").is_err());
        assert!(eval("3 4").is_err());
    }
}
