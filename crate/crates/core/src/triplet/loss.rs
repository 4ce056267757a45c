use crate::net::Scalar;

#[inline]
pub(crate) fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// `max(0, |a - p|^2 - |a - n|^2 + alpha)`.
pub fn triplet_loss<T: Scalar>(e_a: &[T], e_p: &[T], e_n: &[T], alpha: T) -> T {
    (sq_dist(e_a, e_p) - sq_dist(e_a, e_n) + alpha).max(T::zero())
}

/// Gradients of [`triplet_loss`] with respect to the anchor, positive and
/// negative embeddings. Zero when the hinge is clamped, including at the kink.
pub fn triplet_loss_grads<T: Scalar>(e_a: &[T], e_p: &[T], e_n: &[T], alpha: T) -> (Vec<T>, Vec<T>, Vec<T>) {
    let d = e_a.len();
    if triplet_loss(e_a, e_p, e_n, alpha) <= T::zero() {
        return (vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d]);
    }
    let two = T::of(2.0);
    let g_a = e_n.iter().zip(e_p).map(|(&n, &p)| two * (n - p)).collect();
    let g_p = e_p.iter().zip(e_a).map(|(&p, &a)| two * (p - a)).collect();
    let g_n = e_a.iter().zip(e_n).map(|(&a, &n)| two * (a - n)).collect();
    (g_a, g_p, g_n)
}
