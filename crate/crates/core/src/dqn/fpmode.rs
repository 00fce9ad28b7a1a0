//! Scoped flush-to-zero mode for the training hot loop.
//!
//! Adam moments of parameters that stop receiving gradient decay
//! geometrically into the subnormal range, and subnormal arithmetic is
//! roughly an order of magnitude slower on x86. Inside the guard subnormal
//! inputs and results are treated as zero; elsewhere this is a no-op.

#[cfg(target_arch = "x86_64")]
const FTZ_DAZ: u32 = 0x8040;

/// Restores the previous floating-point control state on drop.
#[must_use = "the mode is reverted when the guard is dropped"]
pub struct FlushDenormals {
    #[cfg(target_arch = "x86_64")]
    saved: u32,
}

impl FlushDenormals {
    pub fn enable() -> Self {
        #[cfg(target_arch = "x86_64")]
        {
            let saved = read_mxcsr();
            write_mxcsr(saved | FTZ_DAZ);
            Self { saved }
        }
        #[cfg(not(target_arch = "x86_64"))]
        {
            Self {}
        }
    }
}

impl Drop for FlushDenormals {
    fn drop(&mut self) {
        #[cfg(target_arch = "x86_64")]
        write_mxcsr(self.saved);
    }
}

#[cfg(target_arch = "x86_64")]
fn read_mxcsr() -> u32 {
    let mut value = 0u32;
    // SAFETY: stmxcsr stores the 32-bit control register into `value`.
    unsafe { std::arch::asm!("stmxcsr [{}]", in(reg) &mut value, options(nostack, preserves_flags)) };
    value
}

#[cfg(target_arch = "x86_64")]
fn write_mxcsr(value: u32) {
    // SAFETY: only the FTZ/DAZ bits differ from a value read from the register.
    unsafe { std::arch::asm!("ldmxcsr [{}]", in(reg) &value, options(nostack, readonly, preserves_flags)) };
}
