"""Run the delayed PDE from the computed wave and measure its speed.

The solver profile seeds the simulator together with its history
u(x, -s) = phi(x - c s). A true traveling wave should keep its shape and move
at speed c.
"""
from wavefrontier.bounds import build_bounds, profile_pair
from wavefrontier.core import ModelParams, validate
from wavefrontier.iteration import solve
from wavefrontier.pdesim import NoStableStep, auto_dx, sim_config_for, simulate, stable_dt
from wavefrontier.waveops import WaveOperators

model = ModelParams()
wave = validate(model)
ops = WaveOperators(model, wave)
res = solve(profile_pair(build_bounds(model, wave), wave.L, wave.h, wave.box), ops, tol_residual=1e-5)
profile = (res.phi, res.psi)

# delayed diffusion damps only modes with D k^2 tau < pi/2, which bounds dx from below
try:
    stable_dt(0.05, model)
except NoStableStep as e:
    print(f"dx=0.05: {e}")
dx, dt = auto_dx(model)
print(f"using dx={dx}, dt={dt:.2e}")

cfg = sim_config_for(profile, model, T=5.0, dx=dx, dt=dt)
out = simulate(profile, cfg, snapshot_times=(0.0, 2.5, 5.0))
print(f"front speed {out['speed']:.5f} (c={model.c}), r^2={out['r2']:.6f}")
print(f"transport error sup|u(x,T) - phi(x + cT)| = {out['transport_error']:.2e}")
for t, u, v in out["result"].snapshots:
    print(f"  t={t:.2f}   u range [{u.min():.4f}, {u.max():.4f}]   v range [{v.min():.4f}, {v.max():.4f}]")
