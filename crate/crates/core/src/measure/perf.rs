//! Minimal `perf_event_open(2)` binding for a retired-instructions counter
//! attached to another process.

use std::io;
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd};

const PERF_TYPE_HARDWARE: u32 = 0;
const PERF_COUNT_HW_INSTRUCTIONS: u64 = 1;

const FLAG_DISABLED: u64 = 1 << 0;
const FLAG_EXCLUDE_KERNEL: u64 = 1 << 5;
const FLAG_EXCLUDE_HV: u64 = 1 << 6;

const PERF_FLAG_FD_CLOEXEC: libc::c_ulong = 1 << 3;

const IOC_ENABLE: libc::c_ulong = 0x2400;
const IOC_DISABLE: libc::c_ulong = 0x2401;
const IOC_RESET: libc::c_ulong = 0x2403;

// PERF_ATTR_SIZE_VER5 layout.
#[repr(C)]
#[derive(Default)]
struct PerfEventAttr {
    kind: u32,
    size: u32,
    config: u64,
    sample_period: u64,
    sample_type: u64,
    read_format: u64,
    flags: u64,
    wakeup_events: u32,
    bp_type: u32,
    bp_addr: u64,
    bp_len: u64,
    branch_sample_type: u64,
    sample_regs_user: u64,
    sample_stack_user: u32,
    clockid: i32,
    sample_regs_intr: u64,
    aux_watermark: u32,
    sample_max_stack: u16,
    reserved: u16,
}

#[derive(Debug)]
pub(crate) enum OpenError {
    Unavailable(io::Error),
    Permission(io::Error),
    Other(io::Error),
}

#[derive(Debug)]
pub(crate) struct InstructionCounter {
    fd: OwnedFd,
}

impl InstructionCounter {
    /// Opens a disabled user-mode (optionally also kernel-mode) counter on
    /// `pid`; `pid == 0` means the calling thread.
    pub(crate) fn open(pid: libc::pid_t, count_kernel: bool) -> Result<Self, OpenError> {
        let mut attr = PerfEventAttr {
            kind: PERF_TYPE_HARDWARE,
            size: std::mem::size_of::<PerfEventAttr>() as u32,
            config: PERF_COUNT_HW_INSTRUCTIONS,
            flags: FLAG_DISABLED | FLAG_EXCLUDE_HV,
            ..Default::default()
        };
        if !count_kernel {
            attr.flags |= FLAG_EXCLUDE_KERNEL;
        }
        // SAFETY: attr is a valid, initialised perf_event_attr of the declared size.
        let fd = unsafe {
            libc::syscall(
                libc::SYS_perf_event_open,
                &mut attr as *mut PerfEventAttr,
                pid,
                -1 as libc::c_int,
                -1 as libc::c_int,
                PERF_FLAG_FD_CLOEXEC,
            )
        };
        if fd < 0 {
            let err = io::Error::last_os_error();
            return Err(match err.raw_os_error() {
                Some(libc::ENOENT) | Some(libc::ENODEV) | Some(libc::EOPNOTSUPP)
                | Some(libc::ENOSYS) | Some(libc::EINVAL) => OpenError::Unavailable(err),
                Some(libc::EACCES) | Some(libc::EPERM) => OpenError::Permission(err),
                _ => OpenError::Other(err),
            });
        }
        // SAFETY: the kernel returned a fresh descriptor we now own.
        let fd = unsafe { OwnedFd::from_raw_fd(fd as libc::c_int) };
        Ok(InstructionCounter { fd })
    }

    fn ioctl(&self, request: libc::c_ulong) -> io::Result<()> {
        // SAFETY: fd is a perf event descriptor; these requests take no argument.
        let rc = unsafe { libc::ioctl(self.fd.as_raw_fd(), request as _, 0) };
        if rc < 0 {
            Err(io::Error::last_os_error())
        } else {
            Ok(())
        }
    }

    pub(crate) fn reset(&self) -> io::Result<()> {
        self.ioctl(IOC_RESET)
    }

    pub(crate) fn enable(&self) -> io::Result<()> {
        self.ioctl(IOC_ENABLE)
    }

    pub(crate) fn disable(&self) -> io::Result<()> {
        self.ioctl(IOC_DISABLE)
    }

    pub(crate) fn read(&self) -> io::Result<u64> {
        let mut buf = [0u8; 8];
        // SAFETY: buf is 8 writable bytes.
        let n = unsafe { libc::read(self.fd.as_raw_fd(), buf.as_mut_ptr().cast(), buf.len()) };
        if n != 8 {
            return Err(if n < 0 {
                io::Error::last_os_error()
            } else {
                io::Error::new(io::ErrorKind::UnexpectedEof, "short counter read")
            });
        }
        Ok(u64::from_ne_bytes(buf))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attr_has_ver5_size() {
        assert_eq!(std::mem::size_of::<PerfEventAttr>(), 112);
    }

    #[test]
    fn self_counter_counts_or_reports_unavailable() {
        match InstructionCounter::open(0, false) {
            Ok(c) => {
                c.reset().unwrap();
                c.enable().unwrap();
                let mut x = 0u64;
                for i in 0..100_000u64 {
                    x = std::hint::black_box(x ^ i);
                }
                c.disable().unwrap();
                assert!(c.read().unwrap() >= 100_000, "{x}");
            }
            Err(OpenError::Unavailable(_)) | Err(OpenError::Permission(_)) => {}
            Err(OpenError::Other(e)) => panic!("unexpected perf error {e}"),
        }
    }
}
