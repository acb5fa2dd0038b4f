"""Single entrypoint for the Jaynes-Cummings dimer laboratory.

    spectrum, spectral-map, dos,      exact diagonalization of the dimer and
    splittings, imbalance-map         the observables built on its spectrum

    wkb-levels, wkb-defects,          semiclassical quantization of the four
    wkb-wavefunction,                 polariton bands, checked against the
    phase-boundary, classical-orbits  exact spectrum

    classical-scan, poincare          coherent-state dynamics: localization
                                      threshold and Poincare sections

    husimi                            Q portraits of lower-lower band states

    figure NAME                       named parameter sets of the figures

Usage:
    python main.py spectrum --N 1 --g 1 --J 1
    python main.py dos --N 400 --J-over-gprime 0.25
    python main.py figure fig4 --out runs/fig4
    python main.py --from-manifest runs/fig4/manifest.json --out runs/replay

Every run writes CSV tables and a manifest.json into --out. Set JCDM_THREADS
for sweeps, JCDM_COMMAND_LOG=0 to silence the per-command log.
"""

from __future__ import annotations

import sys

from jcdm.cli import run


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
