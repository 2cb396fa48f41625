import time

from lraaa.als import AlsConfig
import lraaa.als as als_mod
import lraaa.driver as drv
from lraaa.driver import FitConfig, fit
from lraaa.models import make_grid

orig = als_mod.als_solve


def timed(ctx, init, cfg):
    t0 = time.time()
    res = orig(ctx, init, cfg)
    print(
        f"  als: shape {ctx.node_shape} rank {init.rank} sweeps {res.sweeps} "
        f"obj {res.objective:.3e} t {time.time() - t0:.1f}s",
        flush=True,
    )
    return res


drv.als_solve = timed

grid = make_grid("trig3")
t0 = time.time()
cfg = FitConfig(
    algorithm="low-rank",
    rank=3,
    tol=1e-6,
    max_iterations=25,
    als=AlsConfig(epsilon=1e-2, rng_seed=0),
)
model, report = fit(grid, cfg)
for r in report.iterations:
    print(
        f"it {r.iteration:2d} orders {r.orders} lin {r.linearized_error:.3e} "
        f"ls {r.ls_error:.3e} max {r.max_error:.3e} sweeps {r.als_sweeps}",
        flush=True,
    )
print(f"fit time {time.time() - t0:.1f}s")
