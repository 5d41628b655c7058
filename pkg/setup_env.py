"""Post-clone environment setup helper.

Run once after creating the env and installing requirements:

    python -m venv .venv && source .venv/bin/activate
    pip install -r requirements.txt
    python setup_env.py

This script:
1. Verifies all required imports resolve correctly.
2. Checks that scipy.fft is usable with worker threads.
3. Prints a clear summary of what passed.
"""

import os
import sys


def verify_imports() -> None:
    print("Verifying core imports...")
    required = [
        ("numpy", "numpy"),
        ("scipy", "scipy"),
        ("pandas", "pandas"),
        ("yaml", "PyYAML"),
        ("dotenv", "python-dotenv"),
        ("pytest", "pytest"),
        ("hypothesis", "hypothesis"),
    ]
    all_ok = True
    for mod, pkg in required:
        try:
            __import__(mod)
            print(f"  [OK] {pkg}")
        except ImportError:
            print(f"  [MISSING] {pkg}  ->  run: pip install {pkg}")
            all_ok = False

    if not all_ok:
        print("\nSome packages are missing. Run:  pip install -r requirements.txt")
        sys.exit(1)


def check_fft_workers() -> None:
    print("\nChecking scipy.fft workers...")
    import numpy as np
    from scipy import fft

    workers = os.cpu_count() or 1
    x = np.random.default_rng(0).standard_normal((64, 64))
    err = np.abs(fft.ifft2(fft.fft2(x, workers=workers), workers=workers).real - x).max()
    if err > 1e-12:
        print(f"  [ERROR] FFT round trip error {err:.2e}")
        sys.exit(1)
    print(f"  [OK] fft2 round trip with {workers} workers (error {err:.1e})")


def verify_package_imports() -> None:
    print("\nVerifying source imports...")
    try:
        from src.numerics.solver import integrate  # noqa: F401
        from src.analysis.diagnostics import theorem1_residual  # noqa: F401
        from src.analysis.inequalities import run_inequality_suite  # noqa: F401
        from src.pipeline.engine import ExperimentEngine  # noqa: F401
        print("  [OK] All modules import cleanly.")
    except Exception as exc:
        print(f"  [ERROR] Import failed: {exc}")
        sys.exit(1)


if __name__ == "__main__":
    print("=" * 60)
    print("  QG decay toolkit: Environment Setup Check")
    print("=" * 60)
    verify_imports()
    check_fft_workers()
    verify_package_imports()
    print("\n" + "=" * 60)
    print("  Setup complete. You can now run: python run_experiment.py run config.yaml")
    print("=" * 60)
