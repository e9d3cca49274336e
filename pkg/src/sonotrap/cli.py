"""Command-line interface: phases, field, experiment, echo, bench, serve.

Report-producing subcommands write machine-readable output (CSV/JSON) and
render a matplotlib figure next to it unless --no-figure is given. All
options can be overridden through SONOTRAP_* environment variables.
Exit codes: 0 success, 2 validation error, 1 runtime error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import plotting
from .echo_sim import AdcModel, detect, export_trace, simulate_echo
from .errors import SonotrapError
from .field_sim import (
    GorkovParams,
    ParticleState,
    calibrate_source_amplitude,
    measure_focal_width,
    sample_slice,
    slice_header_json,
)
from .geometry import add_reflector, flat_8x8, flat_echo_rig
from .medium import MediumState
from .phase_engine import (
    ControllerTiming,
    FocalCommand,
    QuantizationConfig,
    benchmark,
    compute_frame,
    focal_width,
    REFERENCE_CONTROLLER,
)
from .service import ServiceServer, SteeringService
from .trajectory import SPEED_TABLE, TrajectorySpec, run_experiment
from .medium import wavelength


def _parse_vector(text: str) -> np.ndarray:
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise click.UsageError(f"expected comma-separated numbers, got {text!r}") from exc
    if len(parts) != 3:
        raise click.UsageError(f"expected X,Y,Z, got {text!r}")
    return np.array(parts)


def _load_spec_file(path: Path) -> dict:
    raw = path.read_bytes()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # py310
            import tomli as tomllib
        return tomllib.loads(raw.decode("utf-8"))
    return json.loads(raw.decode("utf-8"))


class _ErrorBridge(click.Group):
    """Map package errors to exit 2 (validation) instead of tracebacks."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except SonotrapError as exc:
            raise click.UsageError(str(exc)) from exc


@click.group(cls=_ErrorBridge, context_settings={"auto_envvar_prefix": "SONOTRAP"})
@click.version_option(package_name="sonotrap")
def main():
    """Phased-array levitation toolbox: phase patterns, field maps,
    tracking experiments, echo detection, benchmarks and the live
    steering service."""


@main.command()
@click.option("--target", required=True, help="Focal point X,Y,Z in mm.")
@click.option("--temp", default=20.0, show_default=True, help="Air temperature, degC.")
@click.option("--temp-file", type=click.Path(exists=True, path_type=Path), default=None,
              help="Read the temperature (degC) from a file instead.")
@click.option("--carrier", default=40_000.0, show_default=True, help="Carrier frequency, Hz.")
@click.option("--clock", default=100e6, show_default=True, help="Controller clock, Hz.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.option("--output", "-o", type=click.Path(path_type=Path), default=None,
              help="Write to a file instead of stdout.")
@click.option("--figure/--no-figure", default=False, help="Render the phase map PNG.")
def phases(target, temp, temp_file, carrier, clock, fmt, output, figure):
    """Per-channel phases and register delays for one focal point."""
    layout = flat_8x8(carrier=carrier)
    if temp_file is not None:
        from .medium import FileTemperatureSource, read_and_update

        medium = read_and_update(
            FileTemperatureSource(temp_file), MediumState.from_temperature(temp)
        )
    else:
        medium = MediumState.from_temperature(temp)
    quant = QuantizationConfig(carrier_hz=carrier, clock_hz=clock)
    frame = compute_frame(layout, FocalCommand(_parse_vector(target)), medium, quant)
    if fmt == "csv":
        lines = ["id,phase_rad,delay_cycles"]
        for cid, phi, delay in zip(frame.emitter_ids, frame.phases, frame.delays_cycles):
            lines.append(f"{cid},{phi:.9f},{delay}")
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(
            [
                {"id": int(cid), "phase_rad": float(phi), "delay_cycles": int(delay)}
                for cid, phi, delay in zip(frame.emitter_ids, frame.phases, frame.delays_cycles)
            ],
            indent=2,
        ) + "\n"
    if output:
        output.write_text(text)
        click.echo(f"wrote {output}")
    else:
        click.echo(text, nl=False)
    if figure:
        fig_path = (output or Path("phases.csv")).with_suffix(".png")
        plotting.render_phase_map(frame, (8, 8), fig_path)
        click.echo(f"wrote {fig_path}")


@main.command()
@click.option("--target", default="0,0,100", show_default=True, help="Focal point X,Y,Z mm.")
@click.option("--temp", default=43.0 / 3.0, show_default=True, help="Air temperature, degC.")
@click.option("--carrier", default=40_000.0, show_default=True)
@click.option("--plane", type=click.Choice(["xy", "xz", "yz"]), default="xz", show_default=True)
@click.option("--offset", default=0.0, show_default=True, help="Fixed coordinate of the plane, mm.")
@click.option("--extent", default=50.0, show_default=True, help="Half extent of the grid, mm.")
@click.option("--pitch", default=1.0, show_default=True, help="Grid pitch, mm.")
@click.option("--reflector", type=float, default=None, help="Reflector plane height, mm.")
@click.option("--output", "-o", type=click.Path(path_type=Path), default=Path("field.csv"),
              show_default=True)
@click.option("--figure/--no-figure", default=True, show_default=True)
def field(target, temp, carrier, plane, offset, extent, pitch, reflector, output, figure):
    """Field slice: CSV grid + JSON header (+ SPL heatmap), and the focal
    width report (-6 dB and -3 dB, against the 2*lambda*R/D prediction)."""
    layout = flat_8x8(carrier=carrier)
    if reflector is not None:
        layout = add_reflector(layout, reflector)
    medium = MediumState.from_temperature(temp)
    quant = QuantizationConfig(carrier_hz=carrier)
    tgt = _parse_vector(target)
    frame = compute_frame(layout, FocalCommand(tgt), medium, quant)
    amplitude = calibrate_source_amplitude(medium=medium)
    center = {"xy": (tgt[0], tgt[1]), "xz": (tgt[0], tgt[2]), "yz": (tgt[1], tgt[2])}[plane]
    sl = sample_slice(
        layout, frame, medium, plane, offset,
        (center[0] - extent, center[0] + extent),
        (center[1] - extent, center[1] + extent),
        pitch, amplitude,
    )
    output.write_text(sl.to_csv())
    header_path = output.with_suffix(".header.json")
    header_path.write_text(slice_header_json(sl) + "\n")
    click.echo(f"wrote {output} and {header_path}")

    lam = wavelength(carrier, medium)
    w6 = measure_focal_width(layout, frame, medium, amplitude, level_db=-6.0)
    w3 = measure_focal_width(layout, frame, medium, amplitude, level_db=-3.0)
    predicted = focal_width(lam, float(tgt[2]), layout.side_length_D)
    click.echo(f"focal width: {w6:.2f} mm at -6 dB, {w3:.2f} mm at -3 dB "
               f"(2*lambda*R/D predicts {predicted:.2f} mm)")
    if figure:
        fig_path = output.with_suffix(".png")
        plotting.render_slice_heatmap(sl, fig_path, focus=center)
        click.echo(f"wrote {fig_path}")


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True, path_type=Path), required=True,
              help="TOML or JSON experiment spec.")
@click.option("--output", "-o", type=click.Path(path_type=Path), default=Path("experiment.csv"),
              show_default=True)
@click.option("--trajectory-out", type=click.Path(path_type=Path), default=None,
              help="Also dump the last run's particle path as CSV (t,x,y,z,vx,vy,vz).")
@click.option("--figure/--no-figure", default=True, show_default=True)
def experiment(spec_path, output, trajectory_out, figure):
    """Run tracking experiments from a spec file and write the results table.

    Spec keys: shape (linear|circular), radius_or_length (mm), speeds (list,
    mm/s), timing {refresh_hz} (or {latency_s}), height (mm, default 100),
    particle {radius_mm, density} (EPS default), reflector_z (default 100),
    iterations, temperature_c.
    """
    spec = _load_spec_file(spec_path)
    shape = spec["shape"]
    size = float(spec["radius_or_length"])
    timing_spec = spec.get("timing", {})
    if "refresh_hz" in timing_spec:
        timing = ControllerTiming.from_refresh_rate(float(timing_spec["refresh_hz"]))
    elif "latency_s" in timing_spec:
        timing = ControllerTiming.from_latency(float(timing_spec["latency_s"]))
    else:
        timing = ControllerTiming.from_refresh_rate(SPEED_TABLE[1].back_computed_refresh())
    medium = MediumState.from_temperature(float(spec.get("temperature_c", 43.0 / 3.0)))
    layout = add_reflector(flat_8x8(), float(spec.get("reflector_z", 100.0)))
    height = float(spec.get("height", 100.0))
    particle_spec = spec.get("particle", {})
    particle = ParticleState.eps_sphere(
        (size if shape == "linear" else size, 0.0, height),
        radius_mm=float(particle_spec.get("radius_mm", 0.5)),
    )
    if "density" in particle_spec:
        particle = ParticleState(particle.position, particle.velocity,
                                 particle.radius, float(particle_spec["density"]))
    amplitude = calibrate_source_amplitude(medium=medium)
    fixed_step = 0.026 if shape == "linear" else 0.0304

    rows = ["shape,speed_mm_s,step_size_mm,normalized_speed_mm_s,fixed_step_size_mm,"
            "completed,rms_tracking_error_mm,rms_radial_error_mm,escape_frame"]
    for speed in spec["speeds"]:
        speed = float(speed)
        step = speed / timing.refresh_rate
        tspec = TrajectorySpec(shape, size, speed, step, height)
        result = run_experiment(
            layout, medium, tspec, timing, particle,
            iterations=int(spec.get("iterations", 1)),
            source_amplitude=amplitude,
        )
        normalized = fixed_step * timing.refresh_rate
        radial = "" if result.rms_radial_error is None else f"{result.rms_radial_error:.6f}"
        escape = "" if result.escape_frame is None else str(result.escape_frame)
        rows.append(
            f"{shape},{speed},{step:.6g},{normalized:.6g},{fixed_step},"
            f"{result.completed},{result.rms_tracking_error:.6f},{radial},{escape}"
        )
        click.echo(rows[-1])
    output.write_text("\n".join(rows) + "\n")
    click.echo(f"wrote {output}")
    if figure or trajectory_out:
        # re-run the last speed recording the path
        from .phase_engine import multiplex
        from .trajectory import plan_steps
        from .field_sim import simulate_particle, find_trap_equilibrium

        plan = plan_steps(tspec, timing)
        quant = QuantizationConfig(carrier_hz=layout.emitter_carrier())
        schedule = multiplex(layout, plan, medium, quant, timing)
        params = GorkovParams.eps_sphere(medium, particle.radius)
        eq = find_trap_equilibrium(layout, schedule.frames[0], medium, params, amplitude,
                                   xy=(plan[0].target[0], plan[0].target[1]))
        start = ParticleState(eq, (0.0, speed, 0.0) if shape == "circular" else (speed, 0.0, 0.0),
                              particle.radius, particle.density)
        traj = simulate_particle(layout, schedule, medium, start, timing.latency / 10,
                                 min(len(plan) * schedule.dwell, 0.5), amplitude,
                                 record_every=20)
        if trajectory_out:
            trajectory_out.write_text(traj.to_csv())
            click.echo(f"wrote {trajectory_out}")
        if figure:
            fig_path = output.with_suffix(".png")
            plotting.render_trajectory(traj, fig_path, commanded=[c.target for c in plan[::10]])
            click.echo(f"wrote {fig_path}")


@main.command()
@click.option("--offset", default="0,0", show_default=True,
              help="Particle offset X,Y in mm from the axis at 100 mm height.")
@click.option("--probe", default=40_000.0, show_default=True, help="Probe frequency, Hz.")
@click.option("--size", default=1.0, show_default=True, help="Particle size (diameter), mm.")
@click.option("--temp", default=43.0 / 3.0, show_default=True)
@click.option("--leakage/--no-leakage", default=False, show_default=True,
              help="Include levitation-drive leakage (dual-frequency rig).")
@click.option("--seed", default=0, show_default=True)
@click.option("--output", "-o", type=click.Path(path_type=Path), default=Path("echo"),
              show_default=True, help="Base path for the .pcm/.json trace files.")
@click.option("--figure/--no-figure", default=True, show_default=True)
def echo(offset, probe, size, temp, leakage, seed, output, figure):
    """Simulate a probe burst, export receiver traces, report the detection."""
    parts = offset.split(",")
    if len(parts) != 2:
        raise click.UsageError(f"expected X,Y offset, got {offset!r}")
    ox, oy = (float(p) for p in parts)
    medium = MediumState.from_temperature(temp)
    rig = flat_echo_rig()
    adc = AdcModel()
    particle = ParticleState.eps_sphere((ox, oy, 100.0), radius_mm=size / 2.0)
    traces = simulate_echo(
        rig, particle, probe, medium, adc,
        include_levitation_leakage=leakage, levitation_frequency=25e3, seed=seed,
    )
    for trace in traces:
        pcm, sidecar = export_trace(trace, f"{output}_ch{trace.channel}")
        click.echo(f"wrote {pcm} and {sidecar}")
    result = detect(traces, layout=rig, adc=adc)
    click.echo(json.dumps({
        "detected": result.detected,
        "direction": result.direction.value if result.direction else None,
        "amplitude_v": result.amplitude,
        "offset_sign": result.estimated_offset_sign,
        "tof_s": result.tof_seconds,
        "warnings": list(result.warnings),
    }, indent=2))
    if figure:
        fig_path = Path(f"{output}_traces.png")
        plotting.render_echo_traces(traces, fig_path, adc)
        click.echo(f"wrote {fig_path}")


@main.command()
@click.option("--frames", default=160, show_default=True, help="Frames per batch.")
@click.option("--reps", default=10, show_default=True, help="Timing repetitions (median).")
@click.option("--carrier", default=40_000.0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text",
              show_default=True)
@click.option("--output", "-o", type=click.Path(path_type=Path), default=None,
              help="Write the JSON report to a file.")
@click.option("--figure/--no-figure", default=False, show_default=True)
def bench(frames, reps, carrier, fmt, output, figure):
    """Benchmark the batch phase kernel on this host.

    The original controller's FPGA numbers (2.7x / 21x speedups, 154 -> 60 us,
    700/520 mW) are hardware-specific reference context, not reproduced here.
    """
    layout = flat_8x8(carrier=carrier)
    medium = MediumState.from_temperature(20.0)
    quant = QuantizationConfig(carrier_hz=carrier)
    report = benchmark(layout, medium, quant, n_frames=frames, repetitions=reps)
    doc = {"host": report.to_dict(), "reference_controller": REFERENCE_CONTROLLER}
    if fmt == "json":
        click.echo(json.dumps(doc, indent=2))
    else:
        click.echo(f"frames={report.frames} channels={report.channels} reps={report.repetitions}")
        click.echo(f"latency_per_frame = {report.latency_per_frame * 1e6:.2f} us")
        click.echo(f"refresh_rate      = {report.refresh_rate / 1e3:.2f} kHz")
        click.echo(f"frames_per_second = {report.frames_per_second:.0f}")
        click.echo(f"identity refresh*latency == 1: {'pass' if report.identity_ok() else 'FAIL'}")
        ref = REFERENCE_CONTROLLER
        click.echo(
            "reference controller (not reproduced): "
            f"{ref['latency_software_us']:.0f} -> {ref['latency_accelerated_us']:.0f} us, "
            f"{ref['refresh_software_khz']} -> {ref['refresh_accelerated_khz']} kHz, "
            f"speedups {ref['speedup_single_compute_unit']}x / "
            f"{ref['speedup_four_compute_units_batch160']}x, "
            f"power {ref['power_cpu_mw']:.0f} / {ref['power_fpga_mw']:.0f} mW"
        )
    if output:
        output.write_text(json.dumps(doc, indent=2) + "\n")
        click.echo(f"wrote {output}")
    if figure:
        fig_path = (output or Path("bench.json")).with_suffix(".png")
        plotting.render_bench(report, fig_path)
        click.echo(f"wrote {fig_path}")
    if not report.identity_ok():
        sys.exit(1)


@main.command()
@click.option("--port", default=8151, show_default=True, help="TCP command port.")
@click.option("--http-port", default=None, type=int, help="HTTP snapshot port (default port+1).")
@click.option("--temp", default=20.0, show_default=True)
@click.option("--carrier", default=40_000.0, show_default=True)
@click.option("--session", type=click.Path(path_type=Path), default=None,
              help="Load a persisted session file.")
def serve(port, http_port, temp, carrier, session):
    """Run the live steering service (newline-JSON over TCP + HTTP snapshots)."""
    if session is not None:
        service = SteeringService.load_session(session)
    else:
        service = SteeringService(
            layout=flat_8x8(carrier=carrier),
            medium=MediumState.from_temperature(temp),
            source_amplitude=calibrate_source_amplitude(
                medium=MediumState.from_temperature(temp)
            ),
        )
    server = ServiceServer(service, port=port,
                           http_port=(port + 1 if http_port is None else http_port))
    server.start()
    click.echo(f"steering service on tcp://127.0.0.1:{server.port} "
               f"(snapshots http://127.0.0.1:{server.http_port}/snapshot)")
    try:
        import signal
        import threading

        stop = threading.Event()
        signal.signal(signal.SIGTERM, lambda *a: stop.set())
        signal.signal(signal.SIGINT, lambda *a: stop.set())
        stop.wait()
    finally:
        server.stop()


if __name__ == "__main__":
    main()
