"""Smoke test for the compiled extension.

Build and install first, e.g.
    cd crates/python && maturin build --release && pip install ../../target/wheels/*.whl
then run ``python python/smoke_test.py``.
"""

import cmath
import csv
import io
import json
import math

import subradiance_py as sr


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    c = sr.Constants()
    close(c.wavenumber() * c.wavelength, 2 * math.pi, 1e-12)
    close(c.dephasing_length(100e-6) / (c.wavelength / 191), 1.0, 0.03)

    trapped = sr.CloudGeometry([6.3e-6, 6.3e-6, 360e-6], 11000, 40e-6)
    close(trapped.expand(0.2e-3).radii[0], 18e-6, 0.05 * 18e-6)
    expanded = sr.CloudGeometry([18e-6, 18e-6, 360e-6], 11000, 40e-6)
    close(expanded.figure_of_merit(), 550, 0.05 * 550)

    r = 0.3 * c.wavelength
    pair = sr.AtomSet([[0.0, 0.0, 0.0], [r, 0.0, 0.0]])
    kr = c.wavenumber() * r
    g = cmath.exp(1j * kr) / (1j * kr)
    key = lambda z: (z.real, z.imag)
    ev = sorted((complex(*z) for z in pair.eigenvalues()), key=key)
    want = sorted([1 + g, 1 - g], key=key)
    for a, b in zip(ev, want):
        close(abs(a - b), 0.0, 1e-10)

    single = sr.AtomSet([[0.0, 0.0, 0.0]])
    times = [0.05 * i for i in range(75)]
    trace = single.decay_trace(times)
    tau, _ = trace.fit_decay_time()
    close(tau, 1.0, 1e-9)

    cloud = sr.CloudGeometry([1.5e-6, 1.5e-6, 6e-6], 80, 40e-6)
    atoms = cloud.sample(seed=3)
    assert len(atoms) == 80
    re = [z[0] for z in atoms.eigenvalues()]
    close(sum(re) / len(re), 1.0, 1e-8)

    phases = [2.5 * 2 * math.pi * i / 15 for i in range(16)]
    signal = [1 + 0.4 * math.cos(p + 0.3) for p in phases]
    contrast, _, _ = sr.fringe_contrast(phases, signal)
    close(contrast, 0.4, 1e-9)
    close(sr.excited_fraction(2.0), 1 / 3, 1e-15)

    t, i, _ = sr.ladder_trace(1, 1.0, 20000, seed=5, t_max=4.0, bins=40)
    assert len(t) == 40 and i[0] > i[-1]

    outputs, manifest = sr.run(
        "decay", "[cloud]\natom_count = 1\nradius_x_um = 1.0\nradius_y_um = 1.0\nradius_z_um = 1.0\n"
    )
    fit = json.loads(outputs["decay_fit.json"])
    close(fit["mean_tau_over_tau_a"], 1.0, 0.005)
    rows = list(csv.DictReader(io.StringIO(outputs["trace.csv"].decode())))
    assert set(rows[0]) == {"t_over_tau_a", "intensity", "intensity_err"}
    m = json.loads(manifest)
    assert {o["file"] for o in m["outputs"]} == set(outputs)

    try:
        sr.run("decay", "[cloud]\nradius_x_mm = 1.0\n")
    except ValueError as e:
        assert "radius_x_mm" in str(e)
    else:
        raise AssertionError("bad suffix accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
