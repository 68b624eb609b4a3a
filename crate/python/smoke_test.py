"""Smoke test for the `casimir` extension module.

Builds the cdylib with cargo (unless CASIMIR_LIB points at a built
library), loads it under its module name and exercises the main types.

    python3 python/smoke_test.py
"""

import math
import os
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    lib = os.environ.get("CASIMIR_LIB")
    if lib is None:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "casimir-py"],
            cwd=ROOT,
            check=True,
        )
        target = Path(os.environ.get("CARGO_TARGET_DIR", ROOT / "target"))
        names = ["libcasimir.so", "libcasimir.dylib", "casimir.dll"]
        lib = next(str(target / "release" / n) for n in names if (target / "release" / n).exists())
    tmp = tempfile.mkdtemp(prefix="casimir-py-")
    suffix = ".pyd" if lib.endswith(".dll") else ".so"
    shutil.copy(lib, os.path.join(tmp, "casimir" + suffix))
    sys.path.insert(0, tmp)
    import casimir

    return casimir


def close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def main():
    casimir = load_module()
    hbar, c = 1.054571817e-34, 299792458.0

    a = 1e-6
    ideal = -math.pi**2 * hbar * c / (240 * a**4)
    assert close(casimir.ideal_metal_pressure(a), ideal, 1e-3)

    drude = casimir.Material.gold("drude")
    plasma = casimir.Material.gold("plasma")
    assert plasma.eps(1e14) > drude.eps(1e14) > 1.0
    assert casimir.pressure(plasma, 500e-9) < casimir.pressure(drude, 500e-9) < 0.0

    geom = casimir.Geometry.experiment()
    assert close(geom.roughness_factor(250e-9), 1.000391, 1e-6)
    grid = [300e-9, 500e-9, 800e-9]
    fd = casimir.force_gradients(drude, geom, grid)
    fp = casimir.force_gradients(plasma, geom, grid)
    assert all(abs(p) > abs(d) for p, d in zip(fp, fd))

    assert close(casimir.calibration_constant(0.007353, 0.9444e4), 6.42e5, 1e-3)
    radius, cal = geom.radius, 6.4e5
    sep = 1e-4 * radius
    pfa = cal * math.pi * 8.8541878128e-12 * radius / sep**2
    assert close(casimir.gamma_coefficient(sep, radius, cal), pfa, 5e-3)

    spec = casimir.CampaignSpec.measurement_set(2, "drude")
    spec.separation_range = (400e-9, 520e-9)
    g1 = spec.synthesize(geom, 3)
    g2 = spec.synthesize(geom, 3)
    assert g1.shifts == g2.shifts and len(g1) >= 100
    again = casimir.MeasurementGrid.from_text(g1.to_text())
    assert again.shifts == g1.shifts

    fit = casimir.calibrate(g1)
    assert close(fit.c, spec.c_true, 1e-2), fit
    assert abs(fit.z0 - spec.z0_true) < 2e-9
    series = casimir.extract_gradients(g1, fit)
    theories = {
        "drude": casimir.force_gradients(drude, geom, series.separations),
        "plasma": casimir.force_gradients(plasma, geom, series.separations),
    }
    verdicts = casimir.compare(series, theories)
    assert {v[0] for v in verdicts} == {"drude", "plasma"}
    assert all(v[5] in ("consistent", "excluded") for v in verdicts)
    mean = casimir.average_sets([series, series])
    assert 0 < len(mean) <= len(series)
    assert all(abs(x * 1e9 - round(x * 1e9)) < 1e-6 for x in mean.separations)

    try:
        casimir.Material.gold("lorentz")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown response accepted")
    try:
        casimir.force_gradients(plasma, geom, [100e-9])
    except casimir.CasimirError:
        pass
    else:
        raise AssertionError("separation outside the domain accepted")

    print("casimir python smoke test: ok")


if __name__ == "__main__":
    main()
