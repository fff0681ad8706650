"""Optional figure of a trace; needs the ``plot`` extra (matplotlib).

matplotlib is imported lazily so the rest of the package never depends on
it. The figure is written next to the CSV; the CSV stays the primary output.
"""
import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ImportError("figure output needs matplotlib; install the 'plot' extra") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_trace(trace, path, f_star=None):
    """Save cost error and relaxation diagnostics against the round index."""
    plt = _pyplot()
    t = trace.column("t")
    err = trace.column("cost_err_abs")
    scale = max(1.0, abs(trace.f_star if f_star is None else f_star))
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(6.0, 5.0), sharex=True, constrained_layout=True)
    ax0.semilogy(t, np.maximum(err / scale, 1e-16), lw=1.0, color="C0")
    ax0.set_ylabel("relative cost error")
    ax0.grid(True, which="both", lw=0.3, alpha=0.5)
    ax1.plot(t, trace.column("mu_min"), lw=0.8, color="C1", label="min mu")
    ax1.plot(t, trace.column("mu_max"), lw=0.8, color="C2", label="max mu")
    rho = trace.column("max_rho")
    if np.any(rho > 0):
        ax1.plot(t, rho, lw=0.8, color="C3", label="max rho")
    ax1.set_xlabel("round t")
    ax1.set_ylabel("multipliers")
    ax1.legend(frameon=False, fontsize=8)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
