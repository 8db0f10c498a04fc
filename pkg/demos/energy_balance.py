"""Energy bookkeeping along Langevin paths of a two-bath chain.

Each path records the energy injected by the baths, the energy removed by
friction and the martingale remainder. Started in the stationary state the
mean dissipation rate equals the total bath power T_1 + T_3.

    python3 demos/energy_balance.py
"""
from hcnet import SimConfig, energy_balance, load_builtin, simulate_ensemble

spec = load_builtin("chain3_ends")
cfg = SimConfig(dt=0.01, horizon=20.0, seed=3, scheme="exact-gaussian")
paths = simulate_ensemble(spec, cfg, 200, start="stationary")
led = paths[0].ledger
print(f"path 0: H {led.H_start:.3f} -> {led.H_end:.3f}, bath input {led.bath_input:.3f}, "
      f"dissipation {led.dissipation:.3f}, residual {led.martingale_residual:.3f}")
eb = energy_balance(spec, paths)
print(f"mean residual {eb.mean_residual:.3f} +- {eb.se_residual:.3f}")
print(f"dissipation rate {eb.mean_dissipation_rate:.3f} +- {eb.se_dissipation_rate:.3f} (bath power {eb.bath_rate:g})")
