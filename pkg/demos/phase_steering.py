"""Steer a state by a phase outside the control span.

The controls only reach ``1, cos x, sin x, cos 2x, sin 2x`` directly.  The
phase ``cos 3x`` is reached by saturation: conjugating a short free flow by a
large phase yields the cube of that phase's derivative.  This script compiles
the program, calibrates the free-flow time and prints the error curve.

    python demos/phase_steering.py
"""

from kdvsat import ControlProfileSet, SpectralState, TrigPoly
from kdvsat.synthesis import PhaseTarget, phase_program

Q = ControlProfileSet.standard(2)
theta = TrigPoly.mode(3, "cos")

for alpha in (0.0, 1.0, -2.5):
    psi0 = SpectralState.mode(16, 1, alpha)
    prog, err, cal = phase_program(PhaseTarget(theta, epsilon=1e-2, time_budget=0.1), Q, psi0)
    print(f"alpha={alpha:+.1f}: error {err:.2e}, {len(prog)} segments, total time {prog.total_time:.2e}")
    for trial in cal.curve[-4:]:
        print(f"    tau={trial.param:.2e}  error={trial.error:.2e}")
