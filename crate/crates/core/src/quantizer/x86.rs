//! Border-counting kernels. Each lane group keeps four registers of binary32
//! values live and runs every border against them, counting crossings in
//! 32-bit lanes which are then narrowed to bytes.

use std::arch::x86_64::*;

use super::Column;

#[target_feature(enable = "sse2")]
unsafe fn load4(column: Column<'_>, first: usize) -> __m128 {
    let p = column.values.as_ptr().add(column.start + first * column.stride);
    if column.stride == 1 {
        _mm_loadu_ps(p)
    } else {
        let s = column.stride;
        _mm_setr_ps(*p, *p.add(s), *p.add(2 * s), *p.add(3 * s))
    }
}

/// 16 objects per group.
#[target_feature(enable = "sse2")]
pub(super) unsafe fn quantize_w128(column: Column<'_>, borders: &[f32], groups: usize, row: &mut [u8]) {
    for g in 0..groups {
        let base = g * 16;
        let v0 = load4(column, base);
        let v1 = load4(column, base + 4);
        let v2 = load4(column, base + 8);
        let v3 = load4(column, base + 12);
        let (mut c0, mut c1, mut c2, mut c3) = (
            _mm_setzero_si128(),
            _mm_setzero_si128(),
            _mm_setzero_si128(),
            _mm_setzero_si128(),
        );
        for &b in borders {
            let b = _mm_set1_ps(b);
            // A true comparison is all ones (-1), so subtracting it counts the crossing.
            c0 = _mm_sub_epi32(c0, _mm_castps_si128(_mm_cmpgt_ps(v0, b)));
            c1 = _mm_sub_epi32(c1, _mm_castps_si128(_mm_cmpgt_ps(v1, b)));
            c2 = _mm_sub_epi32(c2, _mm_castps_si128(_mm_cmpgt_ps(v2, b)));
            c3 = _mm_sub_epi32(c3, _mm_castps_si128(_mm_cmpgt_ps(v3, b)));
        }
        let bytes = _mm_packus_epi16(_mm_packs_epi32(c0, c1), _mm_packs_epi32(c2, c3));
        _mm_storeu_si128(row.as_mut_ptr().add(base).cast(), bytes);
    }
}

#[target_feature(enable = "avx2")]
unsafe fn load8(column: Column<'_>, first: usize, strides: __m256i) -> __m256 {
    let p = column.values.as_ptr().add(column.start + first * column.stride);
    if column.stride == 1 {
        _mm256_loadu_ps(p)
    } else {
        _mm256_i32gather_ps::<4>(p, strides)
    }
}

/// 32 objects per group.
#[target_feature(enable = "avx2")]
pub(super) unsafe fn quantize_w256(column: Column<'_>, borders: &[f32], groups: usize, row: &mut [u8]) {
    let s = column.stride as i32;
    let strides = _mm256_setr_epi32(0, s, 2 * s, 3 * s, 4 * s, 5 * s, 6 * s, 7 * s);
    // packs/packus interleave 128-bit halves; this restores object order.
    let unshuffle = _mm256_setr_epi32(0, 4, 1, 5, 2, 6, 3, 7);
    for g in 0..groups {
        let base = g * 32;
        let v0 = load8(column, base, strides);
        let v1 = load8(column, base + 8, strides);
        let v2 = load8(column, base + 16, strides);
        let v3 = load8(column, base + 24, strides);
        let (mut c0, mut c1, mut c2, mut c3) = (
            _mm256_setzero_si256(),
            _mm256_setzero_si256(),
            _mm256_setzero_si256(),
            _mm256_setzero_si256(),
        );
        for &b in borders {
            let b = _mm256_set1_ps(b);
            c0 = _mm256_sub_epi32(c0, _mm256_castps_si256(_mm256_cmp_ps::<_CMP_GT_OQ>(v0, b)));
            c1 = _mm256_sub_epi32(c1, _mm256_castps_si256(_mm256_cmp_ps::<_CMP_GT_OQ>(v1, b)));
            c2 = _mm256_sub_epi32(c2, _mm256_castps_si256(_mm256_cmp_ps::<_CMP_GT_OQ>(v2, b)));
            c3 = _mm256_sub_epi32(c3, _mm256_castps_si256(_mm256_cmp_ps::<_CMP_GT_OQ>(v3, b)));
        }
        let bytes = _mm256_packus_epi16(_mm256_packs_epi32(c0, c1), _mm256_packs_epi32(c2, c3));
        let bytes = _mm256_permutevar8x32_epi32(bytes, unshuffle);
        _mm256_storeu_si256(row.as_mut_ptr().add(base).cast(), bytes);
    }
}

#[target_feature(enable = "avx512f")]
unsafe fn load16(column: Column<'_>, first: usize, strides: __m512i) -> __m512 {
    let p = column.values.as_ptr().add(column.start + first * column.stride);
    if column.stride == 1 {
        _mm512_loadu_ps(p)
    } else {
        _mm512_i32gather_ps::<4>(strides, p)
    }
}

/// 64 objects per group.
#[target_feature(enable = "avx512f,avx512bw")]
pub(super) unsafe fn quantize_w512(column: Column<'_>, borders: &[f32], groups: usize, row: &mut [u8]) {
    let s = column.stride as i32;
    let strides = _mm512_mullo_epi32(
        _mm512_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15),
        _mm512_set1_epi32(s),
    );
    let one = _mm512_set1_epi32(1);
    for g in 0..groups {
        let base = g * 64;
        let v0 = load16(column, base, strides);
        let v1 = load16(column, base + 16, strides);
        let v2 = load16(column, base + 32, strides);
        let v3 = load16(column, base + 48, strides);
        let (mut c0, mut c1, mut c2, mut c3) = (
            _mm512_setzero_si512(),
            _mm512_setzero_si512(),
            _mm512_setzero_si512(),
            _mm512_setzero_si512(),
        );
        for &b in borders {
            let b = _mm512_set1_ps(b);
            c0 = _mm512_mask_add_epi32(c0, _mm512_cmp_ps_mask::<_CMP_GT_OQ>(v0, b), c0, one);
            c1 = _mm512_mask_add_epi32(c1, _mm512_cmp_ps_mask::<_CMP_GT_OQ>(v1, b), c1, one);
            c2 = _mm512_mask_add_epi32(c2, _mm512_cmp_ps_mask::<_CMP_GT_OQ>(v2, b), c2, one);
            c3 = _mm512_mask_add_epi32(c3, _mm512_cmp_ps_mask::<_CMP_GT_OQ>(v3, b), c3, one);
        }
        let out = row.as_mut_ptr().add(base);
        _mm_storeu_si128(out.cast(), _mm512_cvtepi32_epi8(c0));
        _mm_storeu_si128(out.add(16).cast(), _mm512_cvtepi32_epi8(c1));
        _mm_storeu_si128(out.add(32).cast(), _mm512_cvtepi32_epi8(c2));
        _mm_storeu_si128(out.add(48).cast(), _mm512_cvtepi32_epi8(c3));
    }
}
