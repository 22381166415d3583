use crate::Real;

/// Table over a set of discrete variables, row-major with the last variable
/// varying fastest.
#[derive(Debug, Clone)]
pub(crate) struct Factor<T> {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<T>,
}

fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

impl<T: Real> Factor<T> {
    pub fn scalar(v: T) -> Self {
        Self {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![v],
        }
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.contains(&var)
    }

    /// Fix `var` to `state`, dropping it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Self {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let st = strides(&self.cards);
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let size: usize = cards.iter().product();
        let out_st = strides(&cards);
        let mut values = Vec::with_capacity(size);
        for flat in 0..size {
            let mut src = state * st[pos];
            for (k, &s) in out_st.iter().enumerate() {
                let digit = (flat / s) % cards[k];
                let orig = if k < pos { k } else { k + 1 };
                src += digit * st[orig];
            }
            values.push(self.values[src]);
        }
        Self {
            vars,
            cards,
            values,
        }
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(v) {
                vars.push(*v);
                cards.push(*c);
            }
        }
        let size: usize = cards.iter().product();
        let sa = strides(&self.cards);
        let sb = strides(&other.cards);
        // stride of each output variable within each input (0 if absent)
        let map = |f: &Self, s: &[usize]| -> Vec<usize> {
            vars.iter()
                .map(|v| f.vars.iter().position(|x| x == v).map_or(0, |p| s[p]))
                .collect()
        };
        let ma = map(self, &sa);
        let mb = map(other, &sb);
        let mut digits = vec![0usize; vars.len()];
        let mut values = Vec::with_capacity(size);
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            // odometer increment, last variable fastest
            for k in (0..vars.len()).rev() {
                digits[k] += 1;
                ia += ma[k];
                ib += mb[k];
                if digits[k] < cards[k] {
                    break;
                }
                ia -= ma[k] * cards[k];
                ib -= mb[k] * cards[k];
                digits[k] = 0;
            }
        }
        Self {
            vars,
            cards,
            values,
        }
    }

    pub fn sum_out(&self, var: usize) -> Self {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let st = strides(&self.cards);
        let card = self.cards[pos];
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        let size: usize = cards.iter().product();
        let out_st = strides(&cards);
        let mut values = vec![T::zero(); size];
        for (flat, slot) in values.iter_mut().enumerate() {
            let mut base = 0;
            for (k, &s) in out_st.iter().enumerate() {
                let digit = (flat / s) % cards[k];
                let orig = if k < pos { k } else { k + 1 };
                base += digit * st[orig];
            }
            let mut acc = T::zero();
            for s in 0..card {
                acc = acc + self.values[base + s * st[pos]];
            }
            *slot = acc;
        }
        Self {
            vars,
            cards,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(vars: &[usize], cards: &[usize], values: &[f64]) -> Factor<f64> {
        Factor {
            vars: vars.to_vec(),
            cards: cards.to_vec(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn product_and_marginal() {
        // P(A) * P(B|A)
        let a = f(&[0], &[2], &[0.3, 0.7]);
        let ba = f(&[0, 1], &[2, 3], &[0.1, 0.2, 0.7, 0.5, 0.25, 0.25]);
        let joint = a.product(&ba);
        assert_eq!(joint.vars, vec![0, 1]);
        let expect = [0.03, 0.06, 0.21, 0.35, 0.175, 0.175];
        for (x, y) in joint.values.iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
        let pb = joint.sum_out(0);
        assert_eq!(pb.vars, vec![1]);
        let expect = [0.38, 0.235, 0.385];
        for (x, y) in pb.values.iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
        let total = pb.sum_out(1);
        assert!((total.values[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_is_order_insensitive_up_to_layout() {
        let a = f(&[0, 2], &[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = f(&[2, 1], &[2, 3], &[1.0, 10.0, 100.0, 2.0, 20.0, 200.0]);
        let ab = a.product(&b);
        let ba = b.product(&a);
        // compare entry (v0=1, v1=2, v2=1)
        let pick = |x: &Factor<f64>| {
            let st = strides(&x.cards);
            let idx: usize = x.vars.iter().zip(&st).map(|(v, s)| [1, 2, 1][*v] * s).sum();
            x.values[idx]
        };
        assert_eq!(pick(&ab), 4.0 * 200.0);
        assert_eq!(pick(&ba), 4.0 * 200.0);
    }

    #[test]
    fn reduce_selects_slice() {
        let ba = f(&[0, 1], &[2, 3], &[0.1, 0.2, 0.7, 0.5, 0.25, 0.25]);
        let r = ba.reduce(0, 1);
        assert_eq!(r.vars, vec![1]);
        assert_eq!(r.values, vec![0.5, 0.25, 0.25]);
        let r = ba.reduce(1, 2);
        assert_eq!(r.vars, vec![0]);
        assert_eq!(r.values, vec![0.7, 0.25]);
        assert_eq!(r.reduce(0, 0).values, vec![0.7]);
    }
}
