"""Discrete-time simulation of a quantum robot measuring its distance to a particle."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AuditError,
    DegenerateKernelError,
    FormatError,
    NormDriftError,
    QRobotError,
    ValidationError,
)
from .config_space import (  # noqa: E402
    Configuration,
    Node,
    Output,
    StateVector,
    SystemParams,
    decode,
    dimension,
    encode,
    initial_configuration,
    marginal,
    project,
)
from .task_machine import audit_injectivity, compile_task, tc_step  # noqa: E402
from .action_kernel import KernelSpec, build_kernels, gaussian_kernel, strict_kernel, unitarize  # noqa: E402
from .assembly import (  # noqa: E402
    EnvironmentSpec,
    StepOperator,
    assemble_step_operator,
    audit_unitarity,
    build_environment_step,
    build_step_operator,
    compose_environment,
)
