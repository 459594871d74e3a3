"""Code-specific unrolled Fast-SSC polar decoders: compile, pipeline, simulate."""

from .code_model import (
    FIXED6,
    FLOAT,
    ChannelConfig,
    PolarCodeSpec,
    QuantSpec,
    construct_frozen_set,
    encode,
    load_frozen_set,
    polar_transform,
    transmit,
)
from .pipeline_sim import PipelineSimulator, check_timing, run
from .reference_decoders import decoders_agree, fastssc_interpret, sc_decode
from .tree_compiler import CompilerConfig, OpProgram, build_tree, compile_code, emit_program, program_stats
from .unroller import PipelineNetlist, emit_netlist, latency_of, resource_report, unroll

__version__ = "0.1.0"
