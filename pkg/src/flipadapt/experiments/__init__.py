from .pipeline import (
    RunReport,
    SweepSpec,
    expected_gamma_for,
    psnr,
    run_simulate,
    run_sweep,
    write_sweep_csv,
)

__all__ = [
    "RunReport",
    "SweepSpec",
    "expected_gamma_for",
    "psnr",
    "run_simulate",
    "run_sweep",
    "write_sweep_csv",
]
