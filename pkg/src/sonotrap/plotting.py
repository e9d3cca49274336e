"""Matplotlib renderings for the CLI report paths.

Every figure function writes a PNG next to the delimited output and
returns the path. Rendering uses the Agg backend so headless runs work.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .echo_sim import AdcModel, EchoTrace
from .field_sim import FieldSlice, Trajectory, spl
from .phase_engine import BenchmarkReport, PhaseFrame


def render_slice_heatmap(sl: FieldSlice, path, focus=None, particle=None) -> str:
    """SPL heatmap of a field slice with optional focus/particle markers."""
    mag = np.abs(sl.pressure)
    with np.errstate(divide="ignore"):
        levels = 20.0 * np.log10(np.maximum(mag, 1e-30) / np.sqrt(2.0) / 20e-6)
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    extent = [sl.v_coords[0], sl.v_coords[-1], sl.u_coords[0], sl.u_coords[-1]]
    im = ax.imshow(levels, origin="lower", extent=extent, aspect="equal", cmap="inferno")
    fig.colorbar(im, ax=ax, label="SPL (dB)")
    u_name, v_name = sl.plane[0], sl.plane[1]
    ax.set_xlabel(f"{v_name} (mm)")
    ax.set_ylabel(f"{u_name} (mm)")
    ax.set_title(f"{sl.plane} plane at {sl.plane.strip(u_name + v_name) or 'offset'}={sl.offset:g} mm")
    if focus is not None:
        ax.plot(focus[1], focus[0], "wx", markersize=10, label="focus")
    if particle is not None:
        ax.plot(particle[1], particle[0], "co", markersize=6, label="particle")
    if focus is not None or particle is not None:
        ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)


def render_phase_map(frame: PhaseFrame, grid_shape: tuple[int, int], path) -> str:
    """Per-channel phase pattern as a grid image (radians)."""
    phases = frame.phases.reshape(grid_shape)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(phases, origin="lower", cmap="twilight", vmin=0, vmax=2 * np.pi)
    fig.colorbar(im, ax=ax, label="phase (rad)")
    ax.set_title(f"target {np.round(frame.command.target, 1).tolist()} mm")
    ax.set_xlabel("channel column")
    ax.set_ylabel("channel row")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)


def render_width_profile(xs, mags, path, predicted=None) -> str:
    """SPL line profile through the focus with the -6 dB level marked."""
    levels = np.array([spl(m) for m in mags])
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(xs, levels, lw=1.5)
    peak = levels.max()
    ax.axhline(peak - 6.0, color="tab:red", ls="--", lw=1, label="-6 dB")
    ax.axhline(peak - 3.0, color="tab:orange", ls=":", lw=1, label="-3 dB")
    if predicted is not None:
        ax.axvspan(-predicted / 2, predicted / 2, color="tab:green", alpha=0.15,
                   label=f"predicted width {predicted:.1f} mm")
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("SPL (dB)")
    ax.legend(loc="lower center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)


def render_trajectory(traj: Trajectory, path, commanded=None) -> str:
    """Particle path in the horizontal plane plus height trace."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.2))
    ax1.plot(traj.positions[:, 0], traj.positions[:, 1], lw=0.7)
    if commanded is not None:
        cmd = np.asarray(commanded)
        ax1.plot(cmd[:, 0], cmd[:, 1], "k--", lw=0.7, alpha=0.6, label="commanded")
        ax1.legend(fontsize=8)
    ax1.set_xlabel("x (mm)")
    ax1.set_ylabel("y (mm)")
    ax1.set_aspect("equal")
    ax2.plot(traj.times, traj.positions[:, 2], lw=0.8)
    ax2.set_xlabel("t (s)")
    ax2.set_ylabel("z (mm)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)


def render_bench(report: BenchmarkReport, path) -> str:
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.bar(["latency/frame (us)", "refresh (kHz)"],
           [report.latency_per_frame * 1e6, report.refresh_rate / 1e3],
           color=["tab:blue", "tab:green"])
    ax.set_title(f"{report.frames} frames x {report.channels} channels, median of {report.repetitions}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)


def render_echo_traces(traces: list[EchoTrace], path, adc: AdcModel | None = None) -> str:
    adc = AdcModel() if adc is None else adc
    fig, ax = plt.subplots(figsize=(7, 4))
    for trace in traces:
        t = np.arange(len(trace.samples)) / trace.sample_rate * 1e3
        ax.plot(t, adc.to_volts(trace.samples), lw=0.6, label=f"channel {trace.channel}")
    ax.set_xlabel("t (ms)")
    ax.set_ylabel("receiver voltage (V)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return str(path)
