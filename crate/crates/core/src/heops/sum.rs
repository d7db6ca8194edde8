use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{HeError, Result};
use crate::slotvec::{CipherHandle, Evaluator, SlotVector};

fn log2_size(size: usize, n: usize) -> Result<u32> {
    if !size.is_power_of_two() || size > n {
        return Err(HeError::Size(format!(
            "summation size {size} must be a power of two no larger than {n}"
        )));
    }
    Ok(size.trailing_zeros())
}

/// On a noise-free clear backend, checks that slots `size..n` are zero.
fn check_zero_tail(ev: &dyn Evaluator, c: &CipherHandle, size: usize) -> Result<()> {
    if size == c.slot_count() {
        return Ok(());
    }
    if let Some(slots) = ev.exact_slots(c) {
        if let Some(i) = slots.as_slice()[size..].iter().position(|v| *v != Complex64::default()) {
            return Err(HeError::Size(format!(
                "slot {} beyond summation size {size} is nonzero",
                size + i
            )));
        }
    }
    Ok(())
}

/// Rotate-and-add summation.
///
/// After `log2(size)` rounds of `c += rot(c, 2^i)` (largest step first),
/// slot 0 holds the sum of the first `size` slots. With `size == n` every slot
/// holds the full sum. For `size < n` the tail must be zero. Consumes no levels.
pub fn rot_add(ev: &dyn Evaluator, c: &CipherHandle, size: usize) -> Result<CipherHandle> {
    let k = log2_size(size, c.slot_count())?;
    check_zero_tail(ev, c, size)?;
    let mut acc = c.clone();
    for i in (0..k).rev() {
        let rotated = ev.rotate(&acc, 1i64 << i)?;
        acc = ev.add(&acc, &rotated)?;
    }
    Ok(acc)
}

/// Slot-vector image of [`rot_add`], performing the same additions in the
/// same order.
pub fn rot_add_plain(v: &[f64], size: usize) -> Result<Vec<f64>> {
    let n = v.len();
    let k = log2_size(size, n)?;
    let mut acc = v.to_vec();
    for i in (0..k).rev() {
        let step = 1usize << i;
        let rotated: Vec<f64> = (0..n).map(|j| acc[(j + step) % n]).collect();
        for (a, r) in acc.iter_mut().zip(rotated) {
            *a += r;
        }
    }
    Ok(acc)
}

/// Summation through a homomorphic radix-2 DFT: bin 0 of the transform is
/// the sum, which a final one-hot mask isolates in slot 0.
///
/// Each decimation-in-frequency stage costs one level, so the total is
/// `log2(size) + 1`.
pub fn dft_sum(ev: &dyn Evaluator, c: &CipherHandle, size: usize) -> Result<CipherHandle> {
    dft_sum_radix(ev, c, size, 2)
}

/// [`dft_sum`] with an explicit radix. Only radix 2 is implemented.
pub fn dft_sum_radix(
    ev: &dyn Evaluator,
    c: &CipherHandle,
    size: usize,
    radix: usize,
) -> Result<CipherHandle> {
    if radix != 2 {
        return Err(HeError::Config(format!("DFT radix {radix} is not supported, use 2")));
    }
    let n = c.slot_count();
    let k = log2_size(size, n)?;
    check_zero_tail(ev, c, size)?;
    if c.level() < k + 1 {
        return Err(ev.params().depth_error(k + 1, c.level()));
    }
    let mut v = c.clone();
    let mut half = size / 2;
    while half >= 1 {
        let (keep, lower) = dft_stage_masks(n, size, half);
        let up = ev.rotate(&v, half as i64)?;
        let down = ev.rotate(&v, -(half as i64))?;
        let top = ev.mult_plain(&up, &top_mask(n, size, half))?;
        let bottom = ev.mult_plain(&down, &lower)?;
        let stay = ev.mult_plain(&v, &keep)?;
        v = ev.add(&ev.add(&stay, &top)?, &bottom)?;
        half /= 2;
    }
    let mask = SlotVector::one_hot(0, n)?;
    ev.mult_plain(&v, &mask)
}

fn top_mask(n: usize, size: usize, half: usize) -> SlotVector {
    let slots = (0..n)
        .map(|p| {
            if p < size && p % (2 * half) < half {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        })
        .collect();
    SlotVector::new(slots).expect("slot count is a power of two")
}

/// `(T - B_w, B_w)`: `T` is 1 on the upper half of every butterfly block,
/// `B_w` carries the twiddle `w^t` on the lower half.
fn dft_stage_masks(n: usize, size: usize, half: usize) -> (SlotVector, SlotVector) {
    let mut keep = vec![Complex64::default(); n];
    let mut lower = vec![Complex64::default(); n];
    for p in 0..size {
        let t = p % (2 * half);
        if t < half {
            keep[p] = Complex64::new(1.0, 0.0);
        } else {
            let w = Complex64::from_polar(1.0, -PI * (t - half) as f64 / half as f64);
            keep[p] = -w;
            lower[p] = w;
        }
    }
    (
        SlotVector::new(keep).expect("slot count is a power of two"),
        SlotVector::new(lower).expect("slot count is a power of two"),
    )
}

fn check_layer(rows: &[Vec<f64>], bias: &[f64], size: usize, n: usize) -> Result<()> {
    log2_size(size, n)?;
    if rows.is_empty() || rows.len() > size {
        return Err(HeError::Size(format!(
            "layer has {} rows, expected 1..={size}",
            rows.len()
        )));
    }
    if let Some(r) = rows.iter().position(|r| r.len() > size) {
        return Err(HeError::Size(format!(
            "row {r} has {} columns, more than size {size}",
            rows[r].len()
        )));
    }
    if bias.len() != rows.len() {
        return Err(HeError::Size(format!(
            "bias has {} entries for {} rows",
            bias.len(),
            rows.len()
        )));
    }
    Ok(())
}

/// Fully connected layer by node-positional masking.
///
/// For every node `j`: multiply by row `j`, sum with rotate-and-add over all
/// `n` slots (the zero-padded row keeps the sum confined to the first `size`
/// inputs), keep only slot `j` with a one-hot mask and accumulate. The bias
/// is added at the end. Costs exactly two levels.
pub fn fc_layer(
    ev: &dyn Evaluator,
    c: &CipherHandle,
    rows: &[Vec<f64>],
    bias: &[f64],
    size: usize,
) -> Result<CipherHandle> {
    let n = c.slot_count();
    check_layer(rows, bias, size, n)?;
    if c.level() < 2 {
        return Err(ev.params().depth_error(2, c.level()));
    }
    let mut out: Option<CipherHandle> = None;
    for (j, row) in rows.iter().enumerate() {
        let w = SlotVector::from_real_padded(row, n)?;
        let product = ev.mult_plain(c, &w)?;
        let summed = rot_add(ev, &product, n)?;
        let placed = ev.mult_plain(&summed, &SlotVector::one_hot(j, n)?)?;
        out = Some(match out {
            None => placed,
            Some(acc) => ev.add(&acc, &placed)?,
        });
    }
    let out = out.expect("at least one row");
    ev.add_plain(&out, &SlotVector::from_real_padded(bias, n)?)
}

/// Slot-vector image of [`fc_layer`] on a length-`n` input. Produces the
/// same floating-point results as the noise-free clear backend.
pub fn fc_layer_plain(v: &[f64], rows: &[Vec<f64>], bias: &[f64], size: usize) -> Result<Vec<f64>> {
    let n = v.len();
    check_layer(rows, bias, size, n)?;
    let mut out = vec![0.0; n];
    for (j, row) in rows.iter().enumerate() {
        let product: Vec<f64> = (0..n)
            .map(|i| v[i] * row.get(i).copied().unwrap_or(0.0))
            .collect();
        out[j] = rot_add_plain(&product, n)?[j];
    }
    for (o, b) in out.iter_mut().zip(bias) {
        *o += b;
    }
    Ok(out)
}

/// Appends zeros up to `target`, which must be a power of two.
pub fn pad_pow2(v: &[f64], target: usize) -> Result<Vec<f64>> {
    if !target.is_power_of_two() || target < v.len() {
        return Err(HeError::Size(format!(
            "cannot pad length {} to {target}",
            v.len()
        )));
    }
    let mut out = v.to_vec();
    out.resize(target, 0.0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slotvec::{ClearBackend, Encryptor, Decryptor, HEParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clear(log_slots: u32, depth: u32) -> ClearBackend {
        ClearBackend::new(HEParams::for_depth(log_slots, 30, depth).unwrap()).unwrap()
    }

    fn enc(b: &ClearBackend, v: &[f64]) -> CipherHandle {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        b.encrypt(&SlotVector::from_real_padded(v, b.params().slot_count()).unwrap(), &mut rng)
            .unwrap()
    }

    fn dec(b: &ClearBackend, c: &CipherHandle) -> Vec<f64> {
        b.decrypt(c).unwrap().real_parts()
    }

    #[test]
    fn rot_add_fills_every_slot() {
        let b = clear(2, 1);
        let out = rot_add(&b, &enc(&b, &[1.0, 2.0, 3.0, 4.0]), 4).unwrap();
        assert_eq!(dec(&b, &out), vec![10.0; 4]);
    }

    #[test]
    fn rot_add_partial_needs_zero_tail() {
        let b = clear(3, 1);
        let out = rot_add(&b, &enc(&b, &[1.0, 2.0, 3.0, 4.0]), 4).unwrap();
        assert_eq!(dec(&b, &out)[0], 10.0);
        assert!(rot_add(&b, &enc(&b, &[1.0; 8]), 4).is_err());
        assert!(rot_add(&b, &enc(&b, &[1.0; 8]), 3).is_err());
    }

    #[test]
    fn rot_add_matches_plain_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = clear(5, 1);
        let v: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = dec(&b, &rot_add(&b, &enc(&b, &v), 32).unwrap());
        assert_eq!(out, rot_add_plain(&v, 32).unwrap());
    }

    #[test]
    fn dft_sum_isolates_sum() {
        let b = clear(2, 3);
        let out = dft_sum(&b, &enc(&b, &[1.0, 2.0, 3.0, 4.0]), 4).unwrap();
        let d = b.decrypt(&out).unwrap();
        assert!((d.as_slice()[0] - Complex64::new(10.0, 0.0)).norm() < 1e-12);
        assert!(d.as_slice()[1..].iter().all(|x| x.norm() < 1e-12));
        assert_eq!(out.level(), 0);
    }

    #[test]
    fn dft_sum_partial_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = clear(5, 5);
        let v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let out = b.decrypt(&dft_sum(&b, &enc(&b, &v), 8).unwrap()).unwrap();
        let sum: f64 = v.iter().sum();
        assert!((out.as_slice()[0].re - sum).abs() < 1e-12);
        assert!(out.as_slice()[1..].iter().all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn dft_sum_depth_and_radix() {
        let b = clear(3, 3);
        let c = enc(&b, &[1.0; 8]);
        assert!(matches!(dft_sum(&b, &c, 8), Err(HeError::DepthExceeded { required: 4, available: 3, .. })));
        assert!(dft_sum(&b, &c, 4).is_err());
        let b = clear(2, 3);
        assert!(matches!(dft_sum_radix(&b, &enc(&b, &[1.0; 4]), 4, 4), Err(HeError::Config(_))));
    }

    #[test]
    fn fc_layer_hand_example() {
        let b = clear(2, 2);
        let rows = vec![vec![1.0, 1.0], vec![2.0, 0.0]];
        let out = fc_layer(&b, &enc(&b, &[3.0, 5.0]), &rows, &[0.0, 1.0], 4).unwrap();
        assert_eq!(dec(&b, &out), vec![8.0, 7.0, 0.0, 0.0]);
        assert_eq!(out.level(), 0);
    }

    #[test]
    fn fc_layer_identity_and_errors() {
        let b = clear(2, 2);
        let id: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| (i == j) as u8 as f64).collect()).collect();
        let v = [0.5, -1.5, 2.0, 4.0];
        assert_eq!(dec(&b, &fc_layer(&b, &enc(&b, &v), &id, &[0.0; 4], 4).unwrap()), v.to_vec());
        assert!(fc_layer(&b, &enc(&b, &v), &id, &[0.0; 3], 4).is_err());
        let shallow = clear(2, 1);
        assert!(matches!(
            fc_layer(&shallow, &enc(&shallow, &v), &id, &[0.0; 4], 4),
            Err(HeError::DepthExceeded { .. })
        ));
    }

    #[test]
    fn pad_pow2_cases() {
        assert_eq!(pad_pow2(&[1.0, 2.0, 3.0], 8).unwrap(), vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(pad_pow2(&[1.0; 4], 4).unwrap(), vec![1.0; 4]);
        let padded = pad_pow2(&[1.0; 266], 512).unwrap();
        assert_eq!(padded.len(), 512);
        assert!(padded[266..].iter().all(|&x| x == 0.0));
        assert!(pad_pow2(&[1.0; 5], 4).is_err());
        assert!(pad_pow2(&[1.0; 5], 6).is_err());
    }
}
