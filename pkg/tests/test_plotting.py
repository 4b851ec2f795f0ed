import numpy as np

from msqferry import plotting
from msqferry.cycles import assign_cycles
from msqferry.sim import SimConfig, run


def test_figures_render(layered, tmp_path):
    plan = assign_cycles(layered, "mixed")
    p = plotting.plot_network(layered, plan, tmp_path / "net.png", label_nodes=True)
    assert p.stat().st_size > 1000
    m = run(layered, plan, SimConfig({(0, 1): 0.3}, {c: 2.0 for c in plan.cycles}, horizon=200, seed=1))
    assert plotting.plot_delays(m.delays(), tmp_path / "d.png", analytic=1.0).is_file()
    assert plotting.plot_timeline(m, tmp_path / "t.png").is_file()


def test_empty_delays(tmp_path):
    assert plotting.plot_delays(np.array([]), tmp_path / "e.png").is_file()
