use std::arch::x86_64::*;

use super::ResolvedSplit;
use crate::model::MAX_DEPTH;

/// 16 objects per group. SSE2 has only signed byte compares, so both sides are
/// biased by 0x80 to compare unsigned quantiles.
#[target_feature(enable = "sse2")]
pub(super) unsafe fn indices_w128(splits: &[ResolvedSplit<'_>], groups: usize, out: &mut [u8]) {
    let flip = _mm_set1_epi8(i8::MIN);
    let mut thresholds = [_mm_setzero_si128(); MAX_DEPTH];
    let mut bits = [_mm_setzero_si128(); MAX_DEPTH];
    for (d, s) in splits.iter().enumerate() {
        thresholds[d] = _mm_set1_epi8((s.ordinal ^ 0x80) as i8);
        bits[d] = _mm_set1_epi8((1u8 << d) as i8);
    }
    for g in 0..groups {
        let base = g * 16;
        let mut idx = _mm_setzero_si128();
        for (d, s) in splits.iter().enumerate() {
            let q = _mm_xor_si128(_mm_loadu_si128(s.row.as_ptr().add(base).cast()), flip);
            idx = _mm_or_si128(idx, _mm_and_si128(_mm_cmpgt_epi8(q, thresholds[d]), bits[d]));
        }
        _mm_storeu_si128(out.as_mut_ptr().add(base).cast(), idx);
    }
}

/// 32 objects per group.
#[target_feature(enable = "avx2")]
pub(super) unsafe fn indices_w256(splits: &[ResolvedSplit<'_>], groups: usize, out: &mut [u8]) {
    let flip = _mm256_set1_epi8(i8::MIN);
    let mut thresholds = [_mm256_setzero_si256(); MAX_DEPTH];
    let mut bits = [_mm256_setzero_si256(); MAX_DEPTH];
    for (d, s) in splits.iter().enumerate() {
        thresholds[d] = _mm256_set1_epi8((s.ordinal ^ 0x80) as i8);
        bits[d] = _mm256_set1_epi8((1u8 << d) as i8);
    }
    for g in 0..groups {
        let base = g * 32;
        let mut idx = _mm256_setzero_si256();
        for (d, s) in splits.iter().enumerate() {
            let q = _mm256_xor_si256(_mm256_loadu_si256(s.row.as_ptr().add(base).cast()), flip);
            idx = _mm256_or_si256(idx, _mm256_and_si256(_mm256_cmpgt_epi8(q, thresholds[d]), bits[d]));
        }
        _mm256_storeu_si256(out.as_mut_ptr().add(base).cast(), idx);
    }
}

/// 64 objects per group, using unsigned byte compares into mask registers.
#[target_feature(enable = "avx512f,avx512bw")]
pub(super) unsafe fn indices_w512(splits: &[ResolvedSplit<'_>], groups: usize, out: &mut [u8]) {
    let mut thresholds = [_mm512_setzero_si512(); MAX_DEPTH];
    let mut bits = [_mm512_setzero_si512(); MAX_DEPTH];
    for (d, s) in splits.iter().enumerate() {
        thresholds[d] = _mm512_set1_epi8(s.ordinal as i8);
        bits[d] = _mm512_set1_epi8((1u8 << d) as i8);
    }
    for g in 0..groups {
        let base = g * 64;
        let mut idx = _mm512_setzero_si512();
        for (d, s) in splits.iter().enumerate() {
            let q = _mm512_loadu_si512(s.row.as_ptr().add(base).cast());
            let crossed = _mm512_cmpgt_epu8_mask(q, thresholds[d]);
            idx = _mm512_or_si512(idx, _mm512_maskz_mov_epi8(crossed, bits[d]));
        }
        _mm512_storeu_si512(out.as_mut_ptr().add(base).cast(), idx);
    }
}
