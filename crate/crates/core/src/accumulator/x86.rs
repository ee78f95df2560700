use std::arch::x86_64::*;

use super::PermuteLayout;

// Binary64 naive: scalar leaf loads assembled into a vector, one vector add.

/// 16 objects per group, 2 binary64 lanes per add.
#[target_feature(enable = "sse2")]
pub(super) unsafe fn naive64_w128(indices: &[u8], table: &[f64], groups: usize, sums: &mut [f64]) {
    let (i, t, s) = (indices.as_ptr(), table.as_ptr(), sums.as_mut_ptr());
    for o in (0..groups * 16).step_by(2) {
        let v = _mm_setr_pd(*t.add(*i.add(o) as usize), *t.add(*i.add(o + 1) as usize));
        _mm_storeu_pd(s.add(o), _mm_add_pd(_mm_loadu_pd(s.add(o)), v));
    }
}

/// 32 objects per group, 4 lanes per add.
#[target_feature(enable = "avx2")]
pub(super) unsafe fn naive64_w256(indices: &[u8], table: &[f64], groups: usize, sums: &mut [f64]) {
    let (i, t, s) = (indices.as_ptr(), table.as_ptr(), sums.as_mut_ptr());
    for o in (0..groups * 32).step_by(4) {
        let v = _mm256_setr_pd(
            *t.add(*i.add(o) as usize),
            *t.add(*i.add(o + 1) as usize),
            *t.add(*i.add(o + 2) as usize),
            *t.add(*i.add(o + 3) as usize),
        );
        _mm256_storeu_pd(s.add(o), _mm256_add_pd(_mm256_loadu_pd(s.add(o)), v));
    }
}

/// 64 objects per group, 8 lanes per add.
#[target_feature(enable = "avx512f")]
pub(super) unsafe fn naive64_w512(indices: &[u8], table: &[f64], groups: usize, sums: &mut [f64]) {
    let (i, t, s) = (indices.as_ptr(), table.as_ptr(), sums.as_mut_ptr());
    for o in (0..groups * 64).step_by(8) {
        let v = _mm512_setr_pd(
            *t.add(*i.add(o) as usize),
            *t.add(*i.add(o + 1) as usize),
            *t.add(*i.add(o + 2) as usize),
            *t.add(*i.add(o + 3) as usize),
            *t.add(*i.add(o + 4) as usize),
            *t.add(*i.add(o + 5) as usize),
            *t.add(*i.add(o + 6) as usize),
            *t.add(*i.add(o + 7) as usize),
        );
        _mm512_storeu_pd(s.add(o), _mm512_add_pd(_mm512_loadu_pd(s.add(o)), v));
    }
}

// Gather: leaf indices widened to 32-bit offsets, one gather per vector.

/// 32 objects per group, 4-lane gathers.
#[target_feature(enable = "avx2")]
pub(super) unsafe fn gather_w256(indices: &[u8], table: &[f64], groups: usize, sums: &mut [f64]) {
    let (i, t, s) = (indices.as_ptr(), table.as_ptr(), sums.as_mut_ptr());
    for o in (0..groups * 32).step_by(4) {
        let packed = i32::from_le_bytes(std::ptr::read_unaligned(i.add(o).cast::<[u8; 4]>()));
        let offsets = _mm_cvtepu8_epi32(_mm_cvtsi32_si128(packed));
        let v = _mm256_i32gather_pd::<8>(t, offsets);
        _mm256_storeu_pd(s.add(o), _mm256_add_pd(_mm256_loadu_pd(s.add(o)), v));
    }
}

/// 64 objects per group, 8-lane gathers.
#[target_feature(enable = "avx512f")]
pub(super) unsafe fn gather_w512(indices: &[u8], table: &[f64], groups: usize, sums: &mut [f64]) {
    let (i, t, s) = (indices.as_ptr(), table.as_ptr(), sums.as_mut_ptr());
    for o in (0..groups * 64).step_by(8) {
        let offsets = _mm256_cvtepu8_epi32(_mm_loadl_epi64(i.add(o).cast()));
        let v = _mm512_i32gather_pd::<8>(offsets, t);
        _mm512_storeu_pd(s.add(o), _mm512_add_pd(_mm512_loadu_pd(s.add(o)), v));
    }
}

/// Whole binary64 table in up to 32 registers; 8 objects per group. For each
/// register `g`, lanes whose index selects `g` take `permute(reg_g, index & 7)`,
/// the rest keep the previous merge result.
#[target_feature(enable = "avx512f")]
pub(super) unsafe fn permute64_w512(
    indices: &[u8],
    table: &[f64],
    layout: PermuteLayout,
    groups: usize,
    sums: &mut [f64],
) {
    let mut regs = [_mm512_setzero_pd(); 32];
    for (g, r) in regs.iter_mut().enumerate().take(layout.vectors) {
        *r = _mm512_load_pd(table.as_ptr().add(g * 8));
    }
    let regs = &regs[..layout.vectors];
    let low = _mm512_set1_epi64(7);
    let (i, s) = (indices.as_ptr(), sums.as_mut_ptr());
    for o in (0..groups * 8).step_by(8) {
        let idx = _mm512_cvtepu8_epi64(_mm_loadl_epi64(i.add(o).cast()));
        let reg_of = _mm512_srli_epi64::<3>(idx);
        let lane = _mm512_and_si512(idx, low);
        let mut picked = _mm512_setzero_pd();
        for (g, &reg) in regs.iter().enumerate() {
            let mask = _mm512_cmpeq_epi64_mask(reg_of, _mm512_set1_epi64(g as i64));
            picked = _mm512_mask_permutexvar_pd(picked, mask, lane, reg);
        }
        _mm512_storeu_pd(s.add(o), _mm512_add_pd(_mm512_loadu_pd(s.add(o)), picked));
    }
}

// Binary16 leaves: widened to binary32 before the add.

/// 16 objects per group, 4 halves per conversion.
#[target_feature(enable = "sse2,f16c")]
pub(super) unsafe fn naive16_w128(indices: &[u8], table: &[u16], groups: usize, sums: &mut [f32]) {
    let (i, t, s) = (indices.as_ptr(), table.as_ptr(), sums.as_mut_ptr());
    let h = |k: usize| *t.add(*i.add(k) as usize) as i16;
    for o in (0..groups * 16).step_by(4) {
        let halves = _mm_setr_epi16(h(o), h(o + 1), h(o + 2), h(o + 3), 0, 0, 0, 0);
        _mm_storeu_ps(s.add(o), _mm_add_ps(_mm_loadu_ps(s.add(o)), _mm_cvtph_ps(halves)));
    }
}

/// 32 objects per group, 8 halves per conversion.
#[target_feature(enable = "avx2,f16c")]
pub(super) unsafe fn naive16_w256(indices: &[u8], table: &[u16], groups: usize, sums: &mut [f32]) {
    let (i, t, s) = (indices.as_ptr(), table.as_ptr(), sums.as_mut_ptr());
    let h = |k: usize| *t.add(*i.add(k) as usize) as i16;
    for o in (0..groups * 32).step_by(8) {
        let halves = _mm_setr_epi16(
            h(o),
            h(o + 1),
            h(o + 2),
            h(o + 3),
            h(o + 4),
            h(o + 5),
            h(o + 6),
            h(o + 7),
        );
        _mm256_storeu_ps(
            s.add(o),
            _mm256_add_ps(_mm256_loadu_ps(s.add(o)), _mm256_cvtph_ps(halves)),
        );
    }
}

/// 64 objects per group, 16 halves per conversion.
#[target_feature(enable = "avx512f")]
pub(super) unsafe fn naive16_w512(indices: &[u8], table: &[u16], groups: usize, sums: &mut [f32]) {
    let (i, t, s) = (indices.as_ptr(), table.as_ptr(), sums.as_mut_ptr());
    let mut halves = [0u16; 16];
    for o in (0..groups * 64).step_by(16) {
        for (k, h) in halves.iter_mut().enumerate() {
            *h = *t.add(*i.add(o + k) as usize);
        }
        let packed = _mm256_loadu_si256(halves.as_ptr().cast());
        _mm512_storeu_ps(
            s.add(o),
            _mm512_add_ps(_mm512_loadu_ps(s.add(o)), _mm512_cvtph_ps(packed)),
        );
    }
}

/// Whole binary16 table in up to 8 registers of 32 halves; 32 objects per group.
/// The index splits into register ordinal (high bits) and lane (low 5 bits).
#[target_feature(enable = "avx512f,avx512bw")]
pub(super) unsafe fn permute16_w512(
    indices: &[u8],
    table: &[u16],
    layout: PermuteLayout,
    groups: usize,
    sums: &mut [f32],
) {
    let mut regs = [_mm512_setzero_si512(); 8];
    for (g, r) in regs.iter_mut().enumerate().take(layout.vectors) {
        *r = _mm512_load_si512(table.as_ptr().add(g * 32).cast());
    }
    let regs = &regs[..layout.vectors];
    let (i, s) = (indices.as_ptr(), sums.as_mut_ptr());
    for o in (0..groups * 32).step_by(32) {
        let idx = _mm512_cvtepu8_epi16(_mm256_loadu_si256(i.add(o).cast()));
        let reg_of = _mm512_srli_epi16::<5>(idx);
        let mut picked = _mm512_setzero_si512();
        for (g, &reg) in regs.iter().enumerate() {
            let mask = _mm512_cmpeq_epi16_mask(reg_of, _mm512_set1_epi16(g as i16));
            // vpermw only reads the low 5 bits of each index lane.
            picked = _mm512_mask_permutexvar_epi16(picked, mask, idx, reg);
        }
        let lo = _mm512_cvtph_ps(_mm512_castsi512_si256(picked));
        let hi = _mm512_cvtph_ps(_mm512_extracti64x4_epi64::<1>(picked));
        _mm512_storeu_ps(s.add(o), _mm512_add_ps(_mm512_loadu_ps(s.add(o)), lo));
        _mm512_storeu_ps(s.add(o + 16), _mm512_add_ps(_mm512_loadu_ps(s.add(o + 16)), hi));
    }
}
