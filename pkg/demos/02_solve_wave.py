"""Cross iteration from the slow-root bounds to a certified wave profile.

Builds the quasi-solution quadruple, checks its differential inequalities and
iterates until a candidate profile has a small wave residual.
"""
import numpy as np

from wavefrontier.bounds import build_bounds, profile_pair, verify_quasi
from wavefrontier.core import ModelParams, validate
from wavefrontier.iteration import level_crossing, solve
from wavefrontier.waveops import WaveOperators

model = ModelParams()
wave = validate(model)
ops = WaveOperators(model, wave)

spec = build_bounds(model, wave)
d = spec.as_dict()
print(f"bounds: rate {spec.lambda1:.6f}, lower plateau {d['plateau']:.4f} reached at t*={d['t_star']:.3f}")
rep = verify_quasi(spec, model, wave)
for name, e in rep["inequalities"].items():
    print(f"  {name:16s} {e['sense']} 0   worst {e['worst']:+.3e}   at t={e['at']:+.2f}")

pair0 = profile_pair(spec, wave.L, wave.h, wave.box)


def show(state):
    if state.iter % 10 == 0:
        print(f"  iter {state.iter:3d}   gap {state.gap_sup:.3e}   residual {state.residual_sup:.3e}")


result = solve(pair0, ops, tol_residual=1e-5, callback=show)
cert = result.certificates
print(f"\nstopped on '{result.reason}' after {cert['iterations']} steps with the {result.candidate} candidate")
print(f"residual {cert['residual_sup']:.3e}; phi(-L)={cert['boundary']['phi(-L)']:.2e}, phi(L)={cert['boundary']['phi(L)']:.6f}")
print(f"equilibrium {wave.equilibrium}, phi crosses 1/2 at t={level_crossing(result.phi, 0.5):.3f}")

t = result.phi.t
for s in (-20, -10, -5, 0, 5, 10, 20):
    j = int(np.argmin(np.abs(t - s)))
    print(f"  t={s:+4d}   phi={result.phi.values[j]:.6f}   psi={result.psi.values[j]:.6f}")
