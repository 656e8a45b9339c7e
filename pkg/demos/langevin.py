"""Continuous Langevin dynamics: a trained certificate and the horizon behaviour.

The KL term grows with the horizon and saturates, so long runs cost no more
than a fixed amount of complexity.

    python demos/langevin.py
"""

from pathlib import Path

import numpy as np

from floorpac import scalar_bounds as sb
from floorpac.certifier import certify_result
from floorpac.config import execute, load_config

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "blobs_cld.yaml"

res = execute(load_config(CONFIG))
print(certify_result(res).table())

params = sb.CatoniParams(1.0, 2000, 1000, 0.1)
print(f"\n{'horizon':>8} {'KL term':>12}")
for horizon in np.geomspace(0.1, 1e4, 11):
    kl = sb.cld_bound(0.0, 1.0, 1.0, 0.5, 1.0, horizon, params).kl_term
    print(f"{horizon:>8.3g} {kl:>12.6g}")
