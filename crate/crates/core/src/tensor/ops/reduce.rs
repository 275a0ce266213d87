use crate::error::Result;
use crate::tensor::{Backward, Element, Shape, Tensor};

use super::pointwise::{abs, add_scalar, mul, sub};

struct Sum<T: Element> {
    x: Tensor<T>,
    factor: T,
}

impl<T: Element> Backward<T> for Sum<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.x]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        vec![Some(vec![grad[0] * self.factor; self.x.numel()])]
    }
}

pub fn sum<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let total = x.data().iter().copied().sum();
    Tensor::from_op(Shape::scalar(), vec![total], Sum { x: x.clone(), factor: T::one() })
}

pub fn mean<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let n = T::lit(x.numel() as f64);
    let total: T = x.data().iter().copied().sum();
    Tensor::from_op(Shape::scalar(), vec![total / n], Sum { x: x.clone(), factor: T::one() / n })
}

/// Mean absolute difference over all elements.
pub fn l1_mean<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(mean(&abs(&sub(a, b)?)))
}

/// Mean of `(a - target)^2`.
pub fn sq_mean<T: Element>(a: &Tensor<T>, target: T) -> Tensor<T> {
    let d = add_scalar(a, -target);
    mean(&mul(&d, &d).expect("same tensor"))
}

/// Mean over consecutive groups of `group` elements.
struct GroupMean<T: Element> {
    x: Tensor<T>,
    group: usize,
}

impl<T: Element> Backward<T> for GroupMean<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.x]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let inv = T::one() / T::lit(self.group as f64);
        vec![Some(grad.iter().flat_map(|&g| std::iter::repeat(g * inv).take(self.group)).collect())]
    }
}

fn group_mean<T: Element>(x: &Tensor<T>, group: usize, shape: Shape) -> Tensor<T> {
    let inv = T::one() / T::lit(group as f64);
    let data = x.data().chunks(group).map(|c| c.iter().copied().sum::<T>() * inv).collect();
    Tensor::from_op(shape, data, GroupMean { x: x.clone(), group })
}

/// (N, C, H, W) → (N, C, 1, 1), each value the plane mean.
pub fn global_avg_pool<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    group_mean(x, s.plane(), s.with_hw(1, 1))
}

/// (N, C, H, W) → (N, 1, 1, 1).
pub fn sample_mean<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    group_mean(x, s.c() * s.plane(), Shape::new(s.n(), 1, 1, 1))
}

struct ChannelMax<T: Element> {
    x: Tensor<T>,
    argmax: Vec<u32>,
}

impl<T: Element> Backward<T> for ChannelMax<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.x]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let s = self.x.shape();
        let plane = s.plane();
        let mut gx = vec![T::zero(); s.numel()];
        for n in 0..s.n() {
            for p in 0..plane {
                let c = self.argmax[n * plane + p] as usize;
                gx[(n * s.c() + c) * plane + p] = grad[n * plane + p];
            }
        }
        vec![Some(gx)]
    }
}

/// Per-pixel maximum over channels. Ties route the gradient to the first maximal channel.
pub fn channel_max<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let plane = s.plane();
    let mut data = Vec::with_capacity(s.n() * plane);
    let mut argmax = Vec::with_capacity(s.n() * plane);
    for n in 0..s.n() {
        for p in 0..plane {
            let mut best = x.data()[n * s.c() * plane + p];
            let mut arg = 0u32;
            for c in 1..s.c() {
                let v = x.data()[(n * s.c() + c) * plane + p];
                if v > best {
                    best = v;
                    arg = c as u32;
                }
            }
            data.push(best);
            argmax.push(arg);
        }
    }
    Tensor::from_op(s.with_c(1), data, ChannelMax { x: x.clone(), argmax })
}

struct ChannelMean<T: Element> {
    x: Tensor<T>,
}

impl<T: Element> Backward<T> for ChannelMean<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        vec![&self.x]
    }

    fn backward(&self, _: &Tensor<T>, grad: &[T]) -> Vec<Option<Vec<T>>> {
        let s = self.x.shape();
        let plane = s.plane();
        let inv = T::one() / T::lit(s.c() as f64);
        let mut gx = Vec::with_capacity(s.numel());
        for g in grad.chunks(plane) {
            for _ in 0..s.c() {
                gx.extend(g.iter().map(|v| *v * inv));
            }
        }
        vec![Some(gx)]
    }
}

/// Per-pixel mean over channels.
pub fn channel_mean<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    let s = x.shape();
    let plane = s.plane();
    let inv = T::one() / T::lit(s.c() as f64);
    let mut data = vec![T::zero(); s.n() * plane];
    for n in 0..s.n() {
        let out = &mut data[n * plane..][..plane];
        for c in 0..s.c() {
            out.iter_mut().zip(x.plane(n, c)).for_each(|(o, v)| *o = *o + *v);
        }
        out.iter_mut().for_each(|o| *o = *o * inv);
    }
    Tensor::from_op(s.with_c(1), data, ChannelMean { x: x.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let a = Tensor::<f64>::from_vec(Shape::new(1, 1, 1, 2), vec![1.0, 2.0]).unwrap();
        let b = Tensor::<f64>::from_vec(Shape::new(1, 1, 1, 2), vec![3.0, 5.0]).unwrap();
        assert_eq!(l1_mean(&a, &b).unwrap().item(), 2.5);
        assert_eq!(l1_mean(&a, &a).unwrap().item(), 0.0);
        let ones = Tensor::<f64>::full(Shape::new(1, 2, 3, 3), 1.0);
        assert_eq!(sq_mean(&ones, 1.0).item(), 0.0);
        let g = Tensor::<f64>::from_vec(Shape::new(1, 1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(global_avg_pool(&g).item(), 2.5);
    }

    #[test]
    fn channel_max_first_tie_rule() {
        let x = Tensor::<f64>::parameter(Shape::new(1, 4, 1, 1), vec![3.0, -1.0, 7.0, 7.0]).unwrap();
        let m = channel_max(&x);
        assert_eq!(m.item(), 7.0);
        m.backward().unwrap();
        assert_eq!(x.grad_vec().unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn backward_of_sum_is_ones_and_square_is_2x() {
        let x = Tensor::<f64>::parameter(Shape::new(1, 2, 2, 2), (0..8).map(f64::from).collect()).unwrap();
        sum(&x).backward().unwrap();
        assert!(x.grad_vec().unwrap().iter().all(|&g| g == 1.0));

        let y = Tensor::<f64>::parameter(Shape::scalar(), vec![2.0]).unwrap();
        sq_mean(&y, 0.0).backward().unwrap();
        assert_eq!(y.grad_vec().unwrap(), vec![4.0]);
    }

    #[test]
    fn backward_accumulates_until_cleared() {
        let x = Tensor::<f64>::parameter(Shape::scalar(), vec![3.0]).unwrap();
        sum(&x).backward().unwrap();
        sum(&x).backward().unwrap();
        assert_eq!(x.grad_vec().unwrap(), vec![2.0]);
        x.zero_grad();
        assert!(x.grad().is_none());
    }

    #[test]
    fn non_scalar_backward_is_rejected() {
        let x = Tensor::<f64>::parameter(Shape::new(1, 1, 1, 2), vec![1.0, 2.0]).unwrap();
        assert!(super::super::pointwise::relu(&x).backward().is_err());
    }
}
