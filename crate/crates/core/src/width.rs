//! Lane widths and host capability detection.

use std::fmt;
use std::str::FromStr;

/// Register width a kernel runs at.
///
/// | width  | x86 extension used        | byte lanes |
/// |--------|---------------------------|------------|
/// | Scalar | none                      | 1          |
/// | W128   | SSE2                      | 16         |
/// | W256   | AVX2                      | 32         |
/// | W512   | AVX-512 F + BW            | 64         |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VectorWidth {
    Scalar,
    W128,
    W256,
    W512,
}

impl VectorWidth {
    pub const ALL: [VectorWidth; 4] = [
        VectorWidth::Scalar,
        VectorWidth::W128,
        VectorWidth::W256,
        VectorWidth::W512,
    ];

    /// Objects handled per vector iteration by the byte-lane stages (quantization,
    /// index computation): one byte per object.
    pub fn byte_lanes(self) -> usize {
        match self {
            VectorWidth::Scalar => 1,
            VectorWidth::W128 => 16,
            VectorWidth::W256 => 32,
            VectorWidth::W512 => 64,
        }
    }

    pub fn bits(self) -> usize {
        match self {
            VectorWidth::Scalar => 64,
            w => w.byte_lanes() * 8,
        }
    }

    /// Whether this host can run kernels of this width.
    pub fn is_supported(self) -> bool {
        match self {
            VectorWidth::Scalar => true,
            #[cfg(target_arch = "x86_64")]
            VectorWidth::W128 => std::arch::is_x86_feature_detected!("sse2"),
            #[cfg(target_arch = "x86_64")]
            VectorWidth::W256 => std::arch::is_x86_feature_detected!("avx2"),
            #[cfg(target_arch = "x86_64")]
            VectorWidth::W512 => {
                std::arch::is_x86_feature_detected!("avx512f") && std::arch::is_x86_feature_detected!("avx512bw")
            }
            #[cfg(not(target_arch = "x86_64"))]
            _ => false,
        }
    }

    /// Widest width this host supports.
    pub fn widest_supported() -> Self {
        Self::ALL
            .into_iter()
            .rev()
            .find(|w| w.is_supported())
            .unwrap_or(VectorWidth::Scalar)
    }

    pub fn supported() -> Vec<Self> {
        Self::ALL.into_iter().filter(|w| w.is_supported()).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            VectorWidth::Scalar => "scalar",
            VectorWidth::W128 => "128",
            VectorWidth::W256 => "256",
            VectorWidth::W512 => "512",
        }
    }
}

impl fmt::Display for VectorWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VectorWidth {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "scalar" => Ok(VectorWidth::Scalar),
            "128" => Ok(VectorWidth::W128),
            "256" => Ok(VectorWidth::W256),
            "512" => Ok(VectorWidth::W512),
            _ => Err(format!("unknown vector width {s:?}")),
        }
    }
}

/// Binary16 to binary32 conversion instructions (F16C), needed by the
/// 128/256-bit binary16 kernels.
pub(crate) fn has_f16c() -> bool {
    #[cfg(target_arch = "x86_64")]
    {
        std::arch::is_x86_feature_detected!("f16c")
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        false
    }
}

/// Extensions detected on this host, for report metadata.
pub fn host_features() -> Vec<&'static str> {
    #[allow(unused_mut)]
    let mut out = Vec::new();
    #[cfg(target_arch = "x86_64")]
    {
        macro_rules! probe {
            ($($f:tt),*) => {$(
                if std::arch::is_x86_feature_detected!($f) {
                    out.push($f);
                }
            )*};
        }
        probe!(
            "sse2",
            "sse4.1",
            "avx2",
            "f16c",
            "avx512f",
            "avx512bw",
            "avx512vl",
            "avx512fp16"
        );
    }
    out
}
