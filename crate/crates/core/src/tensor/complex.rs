use super::{Storage, Tape, Tensor, C64};
use crate::error::{shape_err, Error, Result};

fn complex_input<'a>(x: &'a Tensor, op: &str) -> Result<&'a [C64]> {
    x.complex_values().map_err(|_| Error::Kind(format!("{op} expects a complex tensor")))
}

impl Tape {
    pub fn real_part(&self, z: &Tensor) -> Result<Tensor> {
        let v = complex_input(z, "real_part")?;
        let data = Storage::Real(v.iter().map(|c| c.re).collect());
        self.record(&[z], z.shape().to_vec(), data, |g, _| {
            vec![Some(Storage::Complex(g.real().iter().map(|&r| C64::new(r, 0.0)).collect()))]
        })
    }

    pub fn imag_part(&self, z: &Tensor) -> Result<Tensor> {
        let v = complex_input(z, "imag_part")?;
        let data = Storage::Real(v.iter().map(|c| c.im).collect());
        self.record(&[z], z.shape().to_vec(), data, |g, _| {
            vec![Some(Storage::Complex(g.real().iter().map(|&i| C64::new(0.0, i)).collect()))]
        })
    }

    /// Joins real and imaginary parts of equal shape.
    pub fn complex(&self, re: &Tensor, im: &Tensor) -> Result<Tensor> {
        let (a, b) = (re.real_values()?, im.real_values()?);
        if re.shape() != im.shape() {
            return Err(shape_err!("real part {:?} and imaginary part {:?} differ", re.shape(), im.shape()));
        }
        let data = Storage::Complex(a.iter().zip(b).map(|(&x, &y)| C64::new(x, y)).collect());
        self.record(&[re, im], re.shape().to_vec(), data, |g, needs| {
            let g = g.complex();
            vec![
                needs[0].then(|| Storage::Real(g.iter().map(|c| c.re).collect())),
                needs[1].then(|| Storage::Real(g.iter().map(|c| c.im).collect())),
            ]
        })
    }

    pub fn conj(&self, z: &Tensor) -> Result<Tensor> {
        let v = complex_input(z, "conj")?;
        let data = Storage::Complex(v.iter().map(|c| c.conj()).collect());
        self.record(&[z], z.shape().to_vec(), data, |g, _| {
            vec![Some(Storage::Complex(g.complex().iter().map(|c| c.conj()).collect()))]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_and_join_round_trip() {
        let t = Tape::new();
        let z = Tensor::from_complex(&[2], vec![C64::new(1.0, -2.0), C64::new(3.0, 4.0)]).unwrap();
        let re = t.real_part(&z).unwrap();
        let im = t.imag_part(&z).unwrap();
        assert_eq!(re.real_values().unwrap(), &[1.0, 3.0]);
        assert_eq!(im.real_values().unwrap(), &[-2.0, 4.0]);
        assert!(t.complex(&re, &im).unwrap().bit_eq(&z));
        assert!(t.real_part(&re).is_err());
    }
}
