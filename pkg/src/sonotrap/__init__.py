"""sonotrap: a software model of an ultrasonic phased-array levitation rig.

The package mirrors the platform's dataflow: `geometry` describes the
transducer arrays, `medium` the temperature-compensated air model,
`phase_engine` turns focal commands into per-channel phases and register
delays, `upac` emulates the register-level controller and its square-wave
outputs, `field_sim` synthesizes the acoustic field and radiation forces,
`trajectory` reproduces the particle-movement experiments, `echo_sim` the
closed-loop echo detection, and `service` exposes everything over a small
steering protocol consumed by the CLI and the web console.
"""

from .errors import (
    AdcChannelLimitError,
    FrameShapeError,
    InvalidArgumentError,
    LayoutInfeasibleError,
    NoEdgesError,
    NoReceiverError,
    OutOfVolumeError,
    SensorIOError,
    SensorRangeError,
    SessionVersionError,
    SingularityError,
    SliceTooSmallError,
    SonotrapError,
    UnstablePlanError,
)
from .geometry import (
    ArrayKind,
    ArrayLayout,
    Role,
    Transducer,
    WorkingVolume,
    add_reflector,
    build_flat_array,
    build_spherical_cap,
    cap_echo_rig,
    flat_8x8,
    flat_echo_rig,
    mark_receivers,
    reflector_rig,
    spherical_cap_64,
)
from .medium import (
    FileTemperatureSource,
    MediumState,
    MockTemperatureSource,
    QuantizedTemperatureSource,
    max_particle_radius,
    read_and_update,
    speed_of_sound,
    wavelength,
)
from .phase_engine import (
    BenchmarkReport,
    ControllerTiming,
    FocalCommand,
    MultiplexSchedule,
    PhaseFrame,
    QuantizationConfig,
    batch_compute,
    benchmark,
    compute_frame,
    focal_width,
    multiplex,
    path_length,
    phase_shift,
)
from .upac import (
    DigitalWaveform,
    RegisterFile,
    UpacEmulator,
    dump_edges,
    epoch_reference,
    generate,
    load_frame,
    make_register_file,
    measured_phase,
    parse_edges,
)
from .field_sim import (
    FieldSample,
    FieldSlice,
    GorkovParams,
    ParticleState,
    Trajectory,
    calibrate_source_amplitude,
    find_pressure_nodes,
    find_trap_equilibrium,
    gorkov_potential,
    measure_focal_width,
    pressure_at,
    pressure_field,
    radiation_force,
    sample_slice,
    simulate_particle,
    spl,
)
from .trajectory import (
    ExperimentResult,
    SPEED_TABLE,
    TrajectorySpec,
    max_stable_speed,
    normalized_speed,
    plan_steps,
    run_experiment,
    software_refresh_rate,
)
from .echo_sim import (
    AdcModel,
    DetectionResult,
    Direction,
    EchoTrace,
    amplitude_vs_size,
    detect,
    simulate_echo,
)

__version__ = "0.1.0"
