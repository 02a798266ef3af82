"""Desk-scale hybrid HPC/quantum toolchain: IR, compiler passes, scheduler, runtime."""

__version__ = "0.1.0"
